//! The invariant suite behind `check`. Every row is a deterministic function
//! of the config (and its seed), so two runs print identical tables.

use serde::Serialize;
use viscous_mather::ergodic::{semigroup_check, ProbeSet};
use viscous_mather::fokker_planck::mollify;
use viscous_mather::mfg::{hopf_lax, solve_periodic_mfg};
use viscous_mather::particles::{feynman_kac_mc, nash_best_response, sample_measure, RngSpec};
use viscous_mather::torus::ScalarField;
use viscous_mather::transfer::{pressure_path, principal_eigenpair, propagate};
use viscous_mather::wasserstein::w1_density;
use viscous_mather::Result;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub comparison: &'static str,
    pub pass: bool,
}

impl CheckRow {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            limit,
            comparison: "<=",
            pass: value <= limit,
        }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            limit,
            comparison: ">=",
            pass: value >= limit,
        }
    }

    fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            limit,
            comparison: ">",
            pass: value > limit,
        }
    }
}

fn relative_sup(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    Ok(a.zip_map(b, |x, y| (x - y).abs())?.max() / b.sup_norm())
}

/// Runs the periodic solver, the propagator, the horizon problem, the
/// particle game and the Monte-Carlo estimator on the configured problem.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let grid = cfg.grid();
    let spec = cfg.spec();
    let options = cfg.mfg_options();
    let steps = options.steps_per_unit;
    let dt = 1.0 / steps as f64;
    let mut rows = Vec::new();

    // periodic equilibrium
    let sol = solve_periodic_mfg(&spec, grid, &options)?;
    let mass = sol
        .rho
        .slices
        .iter()
        .map(|s| (s.field().integral() - 1.0).abs())
        .fold(0.0, f64::max);
    rows.push(CheckRow::at_most("fp_mass_error", mass, 1e-12));
    rows.push(CheckRow::at_most("periodic_fixed_point_gap", sol.residuals.fixed_point_gap, 1e-8));
    rows.push(CheckRow::at_most("periodic_hj_residual", sol.residuals.hj, 5e-3));
    rows.push(CheckRow::at_most("periodic_fp_residual", sol.residuals.fp, 5e-3));

    // propagator along the equilibrium pressure
    let p = pressure_path(&sol.rho, &spec);
    let phi = ScalarField::from_fn(grid, |x| 1.0 + 0.5 * (std::f64::consts::TAU * x[0]).cos());
    let base = propagate(&phi, &p, 0.0, &spec, 1.0, steps)?;
    let mut gauge: f64 = 0.0;
    for r in [-1.0, 0.5, 2.0] {
        let shifted = propagate(&phi, &p, r, &spec, 1.0, steps)?;
        let scaled = base.map(|v| v * (-spec.beta * r).exp());
        gauge = gauge.max(relative_sup(&shifted, &scaled)?);
    }
    rows.push(CheckRow::at_most("gauge_identity", gauge, 1e-12));
    rows.push(CheckRow::above("propagator_positivity", base.min(), 0.0));
    let eigen = principal_eigenpair(&p, &spec, options.eigen_tol)?;
    let contraction = eigen
        .theta_history
        .windows(2)
        .skip(1)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    rows.push(CheckRow::at_most("hilbert_contraction_ratio", contraction, 1.0 - 1e-6));

    // Monte-Carlo against the propagator
    let (mean, se) = feynman_kac_mc(
        &phi,
        &p,
        0.0,
        &spec,
        1.0,
        cfg.experiment.mc_paths,
        &RngSpec::new(cfg.solver.seed),
    )?;
    let within = (0..grid.len())
        .filter(|&i| (mean.values()[i] - base.values()[i]).abs() <= 3.0 * se.values()[i])
        .count() as f64
        / grid.len() as f64;
    rows.push(CheckRow::at_least("mc_within_3se_fraction", within, 0.99));

    // horizon problem
    let mu = cfg.initial();
    let f = cfg.terminal();
    let m = cfg.problem.horizon;
    let value = |f: &ScalarField| -> Result<f64> {
        Ok(hopf_lax(&mu, f, &spec, m, &options)?.value.expect("horizon value"))
    };
    let v0 = value(&f)?;
    let mut shift: f64 = 0.0;
    for a in [-0.7, 1.5] {
        shift = shift.max((value(&f.map(|v| v + a))? - v0 - a).abs());
    }
    rows.push(CheckRow::at_most("terminal_shift_exactness", shift, 1e-10));
    let bump = ScalarField::from_fn(grid, |x| 0.05 * (1.0 + (std::f64::consts::TAU * x[0]).cos()));
    let higher = value(&f.zip_map(&bump, |a, b| a + b)?)?;
    rows.push(CheckRow::at_most("terminal_monotonicity_excess", v0 - higher, 2.0 * options.tol));
    let dpp = semigroup_check(&mu, &f, &spec, 1, 1, &options)?;
    rows.push(CheckRow::at_most("dpp_residual", dpp.residual, 5.0 * (grid.h() + dt)));

    // distance axioms on the probe densities
    let probes = ProbeSet::standard(grid);
    let dens = probes
        .probes
        .iter()
        .map(|p| mollify(&p.measure, grid, &spec))
        .collect::<Result<Vec<_>>>()?;
    let mut asym: f64 = 0.0;
    let mut triangle: f64 = 0.0;
    for a in &dens {
        for b in &dens {
            let ab = w1_density(a, b)?;
            asym = asym.max((ab - w1_density(b, a)?).abs());
            for c in &dens {
                triangle = triangle.max(ab - w1_density(a, c)? - w1_density(c, b)?);
            }
        }
    }
    rows.push(CheckRow::at_most("w1_symmetry", asym, 1e-12));
    rows.push(CheckRow::at_most("w1_triangle_excess", triangle, 1e-12));

    // a small particle game
    let n = cfg.experiment.lipschitz_n.first().copied().unwrap_or(8);
    let nash = cfg.nash_options();
    let z = sample_measure(&mu, grid, &spec, n, &RngSpec::new(cfg.solver.seed))?;
    let sys = nash_best_response(&z, &f, &spec, m, &nash)?;
    rows.push(CheckRow::at_most("nash_gap", sys.nash_gap, 10.0 * nash.tol));

    Ok(rows)
}
