//! Mean-field equilibria: the periodic fixed point `ρ = Φ(ρ)` and the
//! finite-horizon problem with linear terminal cost (Hopf–Lax operator).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fokker_planck::{fp_from_measure, fp_periodic_steady, fp_residual_sup, InitialMeasure};
use crate::torus::{
    DensityField, DensityPath, DriftPath, PotentialSpec, ScalarField, ScalarPath, TimeGrid,
    TorusGrid, VectorField,
};
use crate::transfer::{
    hj_residual, optimal_drift, pressure_path, solve_hj_periodic_with, solve_hj_terminal_with,
    ValuePath,
};
use crate::wasserstein::curve_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfgOptions {
    /// Number of initial guesses; the first is always the unperturbed one.
    pub starts: usize,
    /// Picard relaxation `τ` in `ψ ← (1-τ)ψ + τΦ(ψ)`.
    pub damping: f64,
    /// Stopping tolerance on `sup |Φ(ψ) - ψ|`.
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub steps_per_unit: usize,
    /// Hilbert-metric tolerance of the eigen-iteration.
    pub eigen_tol: f64,
    /// `L¹` tolerance of the periodic Fokker–Planck iteration.
    pub steady_tol: f64,
}

impl Default for MfgOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            damping: 0.5,
            tol: 1e-9,
            max_iterations: 500,
            seed: 0,
            steps_per_unit: 256,
            eigen_tol: 1e-10,
            steady_tol: 1e-12,
        }
    }
}

impl MfgOptions {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidArgument("starts must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.steps_per_unit == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "tol, steps_per_unit and max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }

    /// With no interaction `Φ` is constant: one application, no relaxation.
    fn effective(&self, spec: &PotentialSpec) -> Self {
        let mut o = *self;
        if spec.w.is_zero() {
            o.starts = 1;
            o.damping = 1.0;
        }
        o
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Sup of the discrete HJ residual.
    pub hj: f64,
    /// Sup of the discrete FP residual.
    pub fp: f64,
    /// `curve_distance(ψ, Φ(ψ))` at the last iterate.
    pub fixed_point_gap: f64,
    /// `sup |Φ(ψ) - ψ|` at the last iterate.
    pub sup_gap: f64,
}

/// Outcome of one start of the Picard iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub start_id: usize,
    pub converged: bool,
    pub iterations: usize,
    pub sup_gap: f64,
    /// Action (periodic) or value (horizon); `None` if the start failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfgSolution {
    pub u: ValuePath,
    pub rho: DensityPath,
    pub drift: DriftPath,
    /// Effective Hamiltonian (periodic problem).
    pub hbar: Option<f64>,
    /// `Λ^m_c U(μ)` (horizon problem).
    pub value: Option<f64>,
    pub action: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub start_id: usize,
    pub candidates: Vec<Candidate>,
}

/// Compact JSON summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfgRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_eigen: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub action: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub start_id: usize,
    pub candidates: Vec<Candidate>,
}

impl MfgSolution {
    pub fn record(&self) -> MfgRecord {
        MfgRecord {
            hbar: self.hbar,
            hbar_eigen: self.u.diagnostics.as_ref().map(|d| d.hbar_eigen),
            value: self.value,
            action: self.action,
            residuals: self.residuals,
            iterations: self.iterations,
            start_id: self.start_id,
            candidates: self.candidates.clone(),
        }
    }
}

/// `h^p Σ [½|Y|² - ⟨c,Y⟩ - V(t) - ½ W*ρ] ρ` at one time slice.
pub fn lagrangian_slice(rho: &DensityField, y: &VectorField, spec: &PotentialSpec, t: f64) -> f64 {
    let g = rho.grid();
    let v = spec.v.sample(g, t);
    let conv = if spec.w.is_zero() {
        None
    } else {
        Some(spec.w.convolve(rho.field()))
    };
    let mut acc = 0.0;
    for i in 0..g.len() {
        let mut kin = 0.0;
        let mut cy = 0.0;
        for a in 0..g.dim() {
            let ya = y.component(a).values()[i];
            kin += ya * ya;
            cy += spec.c_at(a) * ya;
        }
        let inter = conv.as_ref().map_or(0.0, |c| 0.5 * c.values()[i]);
        acc += (0.5 * kin - cy - v.values()[i] - inter) * rho.values()[i];
    }
    acc * g.cell_volume()
}

/// Periodic action: rectangle rule over the nodes `0..K` of one period.
pub fn action_periodic(sol: &MfgSolution, spec: &PotentialSpec) -> f64 {
    periodic_action(&sol.rho, &sol.drift, spec)
}

fn periodic_action(rho: &DensityPath, y: &DriftPath, spec: &PotentialSpec) -> f64 {
    let time = rho.time;
    (0..time.steps)
        .map(|k| lagrangian_slice(&rho.slices[k], &y.slices[k], spec, time.node(k)))
        .sum::<f64>()
        * time.dt
}

/// Running cost `∫∫ L ρ` over the path, trapezoid rule in time.
pub fn running_cost(rho: &DensityPath, y: &DriftPath, spec: &PotentialSpec) -> Result<f64> {
    if !rho.time.same_as(&y.time) {
        return Err(Error::TimeGridMismatch);
    }
    let time = rho.time;
    let vals: Vec<f64> = (0..time.len())
        .map(|k| lagrangian_slice(&rho.slices[k], &y.slices[k], spec, time.node(k)))
        .collect();
    let inner: f64 = vals[1..time.steps].iter().sum();
    Ok(time.dt * (inner + 0.5 * (vals[0] + vals[time.steps])))
}

/// Horizon action including the terminal term `h^p Σ f ρ(0)`.
pub fn action_horizon(
    rho: &DensityPath,
    y: &DriftPath,
    f: &ScalarField,
    spec: &PotentialSpec,
) -> Result<f64> {
    Ok(running_cost(rho, y, spec)? + rho.last().field().dot(f)?)
}

struct PhiEval {
    rho: DensityPath,
    u: ValuePath,
    drift: DriftPath,
    pressure: ScalarPath,
}

fn phi_periodic_full(
    psi: &DensityPath,
    spec: &PotentialSpec,
    options: &MfgOptions,
    warm: Option<&ScalarField>,
) -> Result<PhiEval> {
    let pressure = pressure_path(psi, spec);
    let u = solve_hj_periodic_with(&pressure, spec, options.eigen_tol, warm)?;
    let drift = optimal_drift(&u, spec)?;
    let rho = fp_periodic_steady(&drift, spec, options.steady_tol)?;
    Ok(PhiEval {
        rho,
        u,
        drift,
        pressure,
    })
}

/// `Φ(ψ)`: periodic HJ for the pressure of `ψ`, then the periodic FP state of
/// the optimal drift.
pub fn phi_map_periodic(psi: &DensityPath, spec: &PotentialSpec) -> Result<DensityPath> {
    Ok(phi_periodic_full(psi, spec, &MfgOptions::default(), None)?.rho)
}

/// Smooth positive random field `1 + Σ a_j cos(2π j·x + φ_j)(1 + b_j cos 2πt)`
/// with total amplitude below `0.6`.
fn random_profile(rng: &mut ChaCha8Rng, grid: TorusGrid) -> impl Fn(f64, [f64; 2]) -> f64 {
    let terms: Vec<([f64; 2], f64, f64, f64)> = (1..=3)
        .map(|j| {
            let axis = if grid.dim() == 2 {
                rng.random_range(0..2)
            } else {
                0
            };
            let mut k = [0.0; 2];
            k[axis] = j as f64;
            (
                k,
                rng.random_range(-0.1..0.1),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    move |t, x| {
        1.0 + terms
            .iter()
            .map(|(k, a, ph, b)| {
                let arg = std::f64::consts::TAU * (k[0] * x[0] + k[1] * x[1]) + ph;
                a * arg.cos() * (1.0 + b * (std::f64::consts::TAU * t).cos())
            })
            .sum::<f64>()
    }
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64 + 1);
    rng
}

fn periodic_start(grid: TorusGrid, time: TimeGrid, start: usize, seed: u64) -> Result<DensityPath> {
    if start == 0 {
        return Ok(DensityPath::constant(time, DensityField::uniform(grid)));
    }
    let mut rng = start_rng(seed, start);
    let profile = random_profile(&mut rng, grid);
    let slices = (0..time.len())
        .map(|k| DensityField::normalize(ScalarField::from_fn(grid, |x| profile(time.node(k), x))))
        .collect::<Result<Vec<_>>>()?;
    DensityPath::new(time, slices)
}

fn sup_gap(a: &DensityPath, b: &DensityPath) -> Result<f64> {
    a.sup_distance(b)
}

struct Converged {
    psi: DensityPath,
    eval: PhiEval,
    iterations: usize,
    sup_gap: f64,
}

/// Damped Picard iteration for a generic map.
fn picard<F>(
    mut psi: DensityPath,
    options: &MfgOptions,
    constant_map: bool,
    mut phi: F,
) -> (Result<Converged>, usize, f64)
where
    F: FnMut(&DensityPath, Option<&PhiEval>) -> Result<PhiEval>,
{
    let mut last: Option<PhiEval> = None;
    let mut gap = f64::INFINITY;
    for it in 1..=options.max_iterations {
        let eval = match phi(&psi, last.as_ref()) {
            Ok(e) => e,
            Err(e) => return (Err(e), it, gap),
        };
        gap = match sup_gap(&eval.rho, &psi) {
            Ok(g) => g,
            Err(e) => return (Err(e), it, gap),
        };
        if constant_map {
            // Φ ignores its argument, so Φ(ψ) is already a fixed point
            let psi = eval.rho.clone();
            return (
                Ok(Converged {
                    psi,
                    eval,
                    iterations: it,
                    sup_gap: 0.0,
                }),
                it,
                0.0,
            );
        }
        if gap < options.tol {
            return (
                Ok(Converged {
                    psi,
                    eval,
                    iterations: it,
                    sup_gap: gap,
                }),
                it,
                gap,
            );
        }
        let next = match DensityPath::mix(&psi, &eval.rho, options.damping) {
            Ok(p) => p,
            Err(e) => return (Err(e), it, gap),
        };
        psi = next;
        last = Some(eval);
    }
    (
        Err(Error::NonConvergence {
            what: "Picard iteration",
            iterations: options.max_iterations,
            gap,
        }),
        options.max_iterations,
        gap,
    )
}

fn select(results: Vec<(usize, Result<(MfgSolution, f64)>, usize, f64)>) -> Result<MfgSolution> {
    let mut candidates = Vec::with_capacity(results.len());
    let mut best: Option<(MfgSolution, f64)> = None;
    let mut best_gap = f64::INFINITY;
    let mut first_error = None;
    for (id, res, iterations, gap) in results {
        best_gap = best_gap.min(gap);
        match res {
            Ok((mut sol, score)) => {
                sol.start_id = id;
                candidates.push(Candidate {
                    start_id: id,
                    converged: true,
                    iterations,
                    sup_gap: sol.residuals.sup_gap,
                    score: Some(score),
                });
                // ties within round-off keep the earlier start
                if best
                    .as_ref()
                    .is_none_or(|(_, s)| score < *s - 1e-12 * s.abs().max(1.0))
                {
                    best = Some((sol, score));
                }
            }
            Err(e) => {
                log::warn!("start {id} failed: {e}");
                candidates.push(Candidate {
                    start_id: id,
                    converged: false,
                    iterations,
                    sup_gap: gap,
                    score: None,
                });
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some((mut sol, _)) => {
            for c in &candidates {
                log::info!(
                    "start {}: converged {} after {} iterations, score {:?}",
                    c.start_id,
                    c.converged,
                    c.iterations,
                    c.score
                );
            }
            sol.candidates = candidates;
            Ok(sol)
        }
        None => match first_error {
            Some(Error::NonConvergence {
                what, iterations, ..
            }) => Err(Error::NonConvergence {
                what,
                iterations,
                gap: best_gap,
            }),
            Some(e) => Err(e),
            None => Err(Error::InvalidArgument("no starts".into())),
        },
    }
}

/// Periodic mean-field equilibrium on `grid`, selected by minimal action
/// among the converged starts.
pub fn solve_periodic_mfg(
    spec: &PotentialSpec,
    grid: TorusGrid,
    options: &MfgOptions,
) -> Result<MfgSolution> {
    options.validate()?;
    spec.check_grid(grid)?;
    let opts = options.effective(spec);
    let time = TimeGrid::unit_period(opts.steps_per_unit)?;
    let run = |id: usize| -> (usize, Result<(MfgSolution, f64)>, usize, f64) {
        let psi0 = match periodic_start(grid, time, id, opts.seed) {
            Ok(p) => p,
            Err(e) => return (id, Err(e), 0, f64::INFINITY),
        };
        let (res, iterations, gap) = picard(psi0, &opts, spec.w.is_zero(), |psi, last| {
            let warm = last.map(|e| e.u.slices[e.u.time.steps].map(|x| (-spec.beta * x).exp()));
            phi_periodic_full(psi, spec, &opts, warm.as_ref())
        });
        let out = res.and_then(|c| {
            finish_periodic(c, spec).map(|s| {
                let a = s.action;
                (s, a)
            })
        });
        (id, out, iterations, gap)
    };
    let results: Vec<_> = (0..opts.starts).into_par_iter().map(run).collect();
    select(results)
}

fn finish_periodic(c: Converged, spec: &PotentialSpec) -> Result<MfgSolution> {
    let Converged {
        psi,
        eval,
        iterations,
        sup_gap,
    } = c;
    let hbar = eval.u.hbar;
    let hj = hj_residual(&eval.u, &eval.pressure, spec, hbar.unwrap_or(0.0), true)?
        .iter()
        .map(ScalarField::sup_norm)
        .fold(0.0, f64::max);
    let fp = fp_residual_sup(&eval.rho, &eval.drift, spec, true)?;
    let fixed_point_gap = curve_distance(&psi, &eval.rho)?;
    let action = periodic_action(&eval.rho, &eval.drift, spec);
    Ok(MfgSolution {
        u: eval.u,
        rho: eval.rho,
        drift: eval.drift,
        hbar,
        value: None,
        action,
        residuals: Residuals {
            hj,
            fp,
            fixed_point_gap,
            sup_gap,
        },
        iterations,
        start_id: 0,
        candidates: Vec::new(),
    })
}

fn horizon_start(
    mu: &InitialMeasure,
    grid: TorusGrid,
    time: TimeGrid,
    spec: &PotentialSpec,
    start: usize,
    seed: u64,
) -> Result<DensityPath> {
    let c: Vec<f64> = (0..grid.dim()).map(|a| spec.c_at(a)).collect();
    let y = if start == 0 {
        DriftPath::constant(time, VectorField::constant(grid, &c))
    } else {
        let mut rng = start_rng(seed, start);
        let profile = random_profile(&mut rng, grid);
        let slices = (0..time.len())
            .map(|k| {
                let t = time.node(k);
                VectorField::new(
                    (0..grid.dim())
                        .map(|a| ScalarField::from_fn(grid, |x| c[a] + 5.0 * (profile(t, x) - 1.0)))
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        DriftPath::new(time, slices)?
    };
    fp_from_measure(mu, &y, spec)
}

/// Horizon-`m` mean-field problem with terminal cost `U(ρ) = ∫ f ρ`.
///
/// Returns the minimizing solution among converged starts; `value` is
/// `Λ^m_c U(μ)`.
pub fn hopf_lax(
    mu: &InitialMeasure,
    f: &ScalarField,
    spec: &PotentialSpec,
    m: usize,
    options: &MfgOptions,
) -> Result<MfgSolution> {
    options.validate()?;
    mu.validate()?;
    let grid = f.grid();
    spec.check_grid(grid)?;
    let opts = options.effective(spec);
    let time = TimeGrid::horizon(m, opts.steps_per_unit)?;
    let run = |id: usize| -> (usize, Result<(MfgSolution, f64)>, usize, f64) {
        let psi0 = match horizon_start(mu, grid, time, spec, id, opts.seed) {
            Ok(p) => p,
            Err(e) => return (id, Err(e), 0, f64::INFINITY),
        };
        let (res, iterations, gap) = picard(psi0, &opts, spec.w.is_zero(), |psi, _| {
            let pressure = pressure_path(psi, spec);
            let u = solve_hj_terminal_with(&pressure, f, spec)?;
            let drift = optimal_drift(&u, spec)?;
            let rho = fp_from_measure(mu, &drift, spec)?;
            Ok(PhiEval {
                rho,
                u,
                drift,
                pressure,
            })
        });
        let out = res.and_then(|c| {
            finish_horizon(c, f, spec).map(|s| {
                let v = s.value.unwrap_or(f64::NAN);
                (s, v)
            })
        });
        (id, out, iterations, gap)
    };
    let results: Vec<_> = (0..opts.starts).into_par_iter().map(run).collect();
    select(results)
}

fn finish_horizon(c: Converged, f: &ScalarField, spec: &PotentialSpec) -> Result<MfgSolution> {
    let Converged {
        psi,
        eval,
        iterations,
        sup_gap,
    } = c;
    let hj = hj_residual(&eval.u, &eval.pressure, spec, 0.0, false)?
        .iter()
        .map(ScalarField::sup_norm)
        .fold(0.0, f64::max);
    let fp = fp_residual_sup(&eval.rho, &eval.drift, spec, false)?;
    let fixed_point_gap = curve_distance(&psi, &eval.rho)?;
    let value = action_horizon(&eval.rho, &eval.drift, f, spec)?;
    Ok(MfgSolution {
        u: eval.u,
        rho: eval.rho,
        drift: eval.drift,
        hbar: None,
        value: Some(value),
        action: value,
        residuals: Residuals {
            hj,
            fp,
            fixed_point_gap,
            sup_gap,
        },
        iterations,
        start_id: 0,
        candidates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{Interaction, Potential};

    fn quick() -> MfgOptions {
        MfgOptions {
            steps_per_unit: 64,
            starts: 2,
            ..MfgOptions::default()
        }
    }

    #[test]
    fn free_periodic_equilibrium() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::free(1.0, vec![1.0]).unwrap();
        let sol = solve_periodic_mfg(&spec, g, &quick()).unwrap();
        assert!((sol.hbar.unwrap() - 0.5).abs() < 1e-12);
        assert!(sol.u.slices.iter().all(|s| s.sup_norm() < 1e-12));
        assert!(sol
            .rho
            .slices
            .iter()
            .all(|s| s.values().iter().all(|x| (x - 1.0).abs() < 1e-12)));
        assert_eq!(sol.iterations, 1);
        // Y ≡ c: integrand (½|c|² - |c|²)ρ
        assert!((sol.action + 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_data_has_zero_action() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::free(1.0, vec![0.0]).unwrap();
        let sol = solve_periodic_mfg(&spec, g, &quick()).unwrap();
        assert!(sol.action.abs() < 1e-14);
        let f = ScalarField::zeros(g);
        let hl = hopf_lax(&InitialMeasure::dirac([0.3, 0.0]), &f, &spec, 1, &quick()).unwrap();
        assert!(hl.value.unwrap().abs() < 1e-14);
        let worst = hl.u.slices.iter().map(|s| s.sup_norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn without_interaction_phi_is_constant() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::new(
            Potential::modulated_cosine(0.3, 0.5),
            Interaction::zero(),
            1.0,
            vec![0.0],
        )
        .unwrap();
        let time = TimeGrid::unit_period(64).unwrap();
        let a = periodic_start(g, time, 0, 1).unwrap();
        let b = periodic_start(g, time, 3, 1).unwrap();
        let opts = quick();
        let pa = phi_periodic_full(&a, &spec, &opts, None).unwrap().rho;
        let pb = phi_periodic_full(&b, &spec, &opts, None).unwrap().rho;
        assert_eq!(pa, pb);
    }

    #[test]
    fn horizon_free_action() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::free(1.0, vec![0.6]).unwrap();
        let time = TimeGrid::horizon(2, 32).unwrap();
        let rho = DensityPath::constant(time, DensityField::uniform(g));
        let y = DriftPath::constant(time, VectorField::constant(g, &[0.6]));
        let a = action_horizon(&rho, &y, &ScalarField::zeros(g), &spec).unwrap();
        assert!((a + 0.5 * 0.36 * 2.0).abs() < 1e-13);
    }

    #[test]
    fn options_are_validated() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::free(1.0, vec![0.0]).unwrap();
        let bad = MfgOptions {
            damping: 0.0,
            ..quick()
        };
        assert!(solve_periodic_mfg(&spec, g, &bad).is_err());
        let bad = MfgOptions {
            starts: 0,
            ..quick()
        };
        assert!(solve_periodic_mfg(&spec, g, &bad).is_err());
    }
}
