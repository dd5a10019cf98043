//! Prints `H̄(c)` for the time-modulated cosine potential next to the free
//! value `c²/2`, and solves one interacting periodic equilibrium.

use viscous_mather::mfg::{solve_periodic_mfg, MfgOptions};
use viscous_mather::torus::{DensityField, DensityPath, Interaction, Potential, PotentialSpec, TimeGrid, TorusGrid};
use viscous_mather::transfer::{pressure_path, principal_eigenpair};

fn main() -> viscous_mather::Result<()> {
    let grid = TorusGrid::new(1, 64)?;
    let time = TimeGrid::unit_period(128)?;
    println!("{:>6} {:>12} {:>12}", "c", "H̄(c)", "c²/2");
    for k in 0..=8 {
        let c = -2.0 + 0.5 * k as f64;
        let spec = PotentialSpec::new(Potential::modulated_cosine(0.3, 0.5), Interaction::zero(), 1.0, vec![c])?;
        let p = pressure_path(&DensityPath::constant(time, DensityField::uniform(grid)), &spec);
        let pair = principal_eigenpair(&p, &spec, 1e-10)?;
        println!("{c:>6.2} {:>12.6} {:>12.6}", pair.shift(spec.beta), 0.5 * c * c);
    }

    let spec = PotentialSpec::new(Potential::modulated_cosine(0.3, 0.5), Interaction::cosine(0.1), 1.0, vec![0.0])?;
    let options = MfgOptions {
        steps_per_unit: 128,
        ..MfgOptions::default()
    };
    let sol = solve_periodic_mfg(&spec, grid, &options)?;
    println!(
        "\ninteracting equilibrium: H̄ = {:.6}, action = {:.6}, {} iterations, fixed-point gap {:.1e}",
        sol.hbar.unwrap_or(f64::NAN),
        sol.action,
        sol.iterations,
        sol.residuals.fixed_point_gap
    );
    Ok(())
}
