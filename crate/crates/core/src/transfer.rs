//! Hopf–Cole side of the problem: the twisted heat propagator, the Hilbert
//! projective metric, the principal eigenpair and the Hamilton–Jacobi solves.
//!
//! With `v = e^{-βu}` the viscous equation
//! `(1/2β)Δu + ∂_t u - ½|c - ∂u|² - P + H̄ = 0` becomes the linear problem
//! `∂_t v + (1/2β)Δv + ⟨c, ∂v⟩ + β(P + |c|²/2 - A) v = 0` with `A = H̄`,
//! which is integrated backward in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CirculantExp;
use crate::torus::{
    c3_norm, centered_difference, compose_pressure, gradient, laplacian, DensityPath, DriftPath,
    PotentialSpec, ScalarField, ScalarPath, TimeGrid, TorusGrid, VectorField,
};

/// Principal eigenpair of the one-period propagator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Positive eigenfunction with `h^p Σ v = 1`.
    pub v: ScalarField,
    /// Eigenvalue of the period map.
    pub b: f64,
    /// Hilbert distance between successive iterates.
    pub theta_history: Vec<f64>,
}

impl EigenPair {
    pub fn iterations(&self) -> usize {
        self.theta_history.len()
    }

    /// `A = (1/β) log B`.
    pub fn shift(&self, beta: f64) -> f64 {
        self.b.ln() / beta
    }
}

/// Extra output of the periodic solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicDiagnostics {
    /// `(1/β) log B` from the eigenvalue.
    pub hbar_eigen: f64,
    /// The opposite-sign reading `-(1/β) log B`.
    pub hbar_alternative: f64,
    /// Sup of the discrete HJ residual with the selected `H̄`.
    pub residual: f64,
    pub eigen_iterations: usize,
    pub theta_history: Vec<f64>,
}

/// Value function `u(t,·)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePath {
    pub time: TimeGrid,
    pub slices: Vec<ScalarField>,
    /// Effective Hamiltonian, set by the periodic solve.
    pub hbar: Option<f64>,
    pub diagnostics: Option<PeriodicDiagnostics>,
}

impl ValuePath {
    pub fn grid(&self) -> TorusGrid {
        self.slices[0].grid()
    }

    /// Value at `t = time.start`.
    pub fn initial(&self) -> &ScalarField {
        &self.slices[0]
    }
}

/// `(1/2β)Δv + ⟨c, ∂v⟩ + β(P + |c|²/2 - A) v`.
pub fn twisted_generator_apply(
    v: &ScalarField,
    p: &ScalarField,
    a: f64,
    spec: &PotentialSpec,
) -> Result<ScalarField> {
    v.check_grid(p)?;
    spec.check_grid(v.grid())?;
    let d = spec.diffusion();
    let lap = laplacian(v);
    let shift = spec.half_c_squared() - a;
    let mut out: Vec<f64> = lap
        .values()
        .iter()
        .zip(v.values().iter().zip(p.values()))
        .map(|(l, (vi, pi))| d * l + spec.beta * (pi + shift) * vi)
        .collect();
    for axis in 0..v.grid().dim() {
        let c = spec.c_at(axis);
        if c != 0.0 {
            let dv = centered_difference(v, axis);
            for (o, g) in out.iter_mut().zip(dv.values()) {
                *o += c * g;
            }
        }
    }
    Ok(ScalarField::from_raw(v.grid(), out))
}

/// Pressure at time `t`: the matching slice, or linear interpolation between
/// the two neighbouring slices.
fn pressure_at(path: &ScalarPath, t: f64) -> ScalarField {
    if let Some(k) = path.time.index_of(t) {
        return path.slices[k].clone();
    }
    let s = ((t - path.time.start) / path.time.dt).clamp(0.0, path.time.steps as f64);
    let k = (s.floor() as usize).min(path.time.steps - 1);
    let w = s - k as f64;
    path.slices[k]
        .zip_map(&path.slices[k + 1], |a, b| (1.0 - w) * a + w * b)
        .expect("slices share the grid")
}

/// Pressure at the midpoint of step `k` (between nodes `k` and `k+1`):
/// four-point cubic interpolation where the neighbours exist (wrapping when
/// `periodic`), linear otherwise.
fn midpoint_pressure(path: &ScalarPath, k: usize, periodic: bool) -> ScalarField {
    let steps = path.time.steps;
    let node = |j: isize| -> Option<&ScalarField> {
        if periodic {
            Some(&path.slices[j.rem_euclid(steps as isize) as usize])
        } else if j < 0 || j as usize > steps {
            None
        } else {
            Some(&path.slices[j as usize])
        }
    };
    let k = k as isize;
    let (a, b) = (&path.slices[k as usize], &path.slices[k as usize + 1]);
    match (node(k - 1), node(k + 2)) {
        (Some(l), Some(r)) if steps >= 3 => {
            let vals = (0..a.values().len())
                .map(|i| {
                    (9.0 * (a.values()[i] + b.values()[i]) - l.values()[i] - r.values()[i]) / 16.0
                })
                .collect();
            ScalarField::from_raw(a.grid(), vals)
        }
        _ => a
            .zip_map(b, |x, y| 0.5 * (x + y))
            .expect("slices share the grid"),
    }
}

/// Backward propagator for the twisted equation, one step at a time.
///
/// Fourth-order factorization with positive coefficients:
/// `e^{εB/6} e^{εA/2} e^{2εB̃/3} e^{εA/2} e^{εB/6}`, `B̃ = B + (ε²/48)[B,[A,B]]`,
/// where `A = (1/2β)Δ_h + ⟨c, ∂_h⟩` is exponentiated exactly (circulant) and
/// `B = β(P + |c|²/2 - A_shift)` is a multiplication. The double commutator is
/// the off-diagonal operator `-a_ij (b_i - b_j)²`, lumped onto the diagonal.
struct Propagator<'a> {
    grid: TorusGrid,
    spec: &'a PotentialSpec,
    dt: f64,
    kernels: Vec<CirculantExp>,
    /// `a_ij` of `A` towards the (-, +) neighbour along each axis.
    couplings: Vec<[f64; 2]>,
}

impl<'a> Propagator<'a> {
    fn new(grid: TorusGrid, spec: &'a PotentialSpec, dt: f64) -> Result<Self> {
        spec.check_grid(grid)?;
        let mut kernels = Vec::with_capacity(grid.dim());
        let mut couplings = Vec::with_capacity(grid.dim());
        let d = spec.diffusion();
        let h = grid.h();
        for axis in 0..grid.dim() {
            let c = spec.c_at(axis);
            let k = CirculantExp::new(grid.n(), h, d, c, 0.5 * dt);
            if k.min_relative_entry() < -1e-12 {
                return Err(Error::Instability(format!(
                    "heat kernel loses positivity (cell Péclet {:.3}); refine the grid",
                    c.abs() * h / (2.0 * d)
                )));
            }
            kernels.push(k);
            couplings.push([d / (h * h) - c / (2.0 * h), d / (h * h) + c / (2.0 * h)]);
        }
        Ok(Self {
            grid,
            spec,
            dt,
            kernels,
            couplings,
        })
    }

    fn multiply(&self, v: &mut [f64], p: &ScalarField, a: f64, weight: f64) {
        let shift = self.spec.half_c_squared() - a;
        let s = weight * self.dt * self.spec.beta;
        for (vi, pi) in v.iter_mut().zip(p.values()) {
            *vi *= (s * (pi + shift)).exp();
        }
    }

    /// `P` corrected by the lumped double commutator, in units of `P`.
    fn corrected_mid(&self, p_mid: &ScalarField) -> ScalarField {
        let g = self.grid;
        let beta = self.spec.beta;
        let pv = p_mid.values();
        // B̃ = βP̃ with P̃ = P - (ε²β/48) Σ_j a_ij (P_i - P_j)²
        let factor = (self.dt * self.dt / 48.0) * beta;
        let vals = (0..g.len())
            .map(|i| {
                let mut m = 0.0;
                for (axis, a) in self.couplings.iter().enumerate() {
                    let l = pv[g.shift(i, axis, -1)] - pv[i];
                    let r = pv[g.shift(i, axis, 1)] - pv[i];
                    m += a[0] * l * l + a[1] * r * r;
                }
                pv[i] - factor * m
            })
            .collect();
        ScalarField::from_raw(g, vals)
    }

    fn diffuse(&self, v: &mut [f64]) {
        for (axis, k) in self.kernels.iter().enumerate() {
            k.apply_axis(self.grid, axis, v);
        }
    }

    /// One step from the later node to the earlier one; returns the log of
    /// the normalising factor taken out.
    fn step(
        &self,
        v: &mut [f64],
        p_late: &ScalarField,
        p_mid: &ScalarField,
        p_early: &ScalarField,
        a: f64,
    ) -> Result<f64> {
        self.multiply(v, p_late, a, 1.0 / 6.0);
        self.diffuse(v);
        self.multiply(v, &self.corrected_mid(p_mid), a, 2.0 / 3.0);
        self.diffuse(v);
        self.multiply(v, p_early, a, 1.0 / 6.0);
        let m = v.iter().copied().fold(0.0_f64, f64::max);
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Instability(
                "propagated field is not positive and finite".into(),
            ));
        }
        for x in v.iter_mut() {
            *x = (*x / m).max(f64::MIN_POSITIVE);
        }
        Ok(m.ln())
    }
}

/// Field together with a log scale: represents `e^{log_scale} · field`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledField {
    pub field: ScalarField,
    pub log_scale: f64,
}

impl ScaledField {
    pub fn to_field(&self) -> Result<ScalarField> {
        let s = self.log_scale.exp();
        if !s.is_finite() || s == 0.0 {
            return Err(Error::Instability(format!(
                "scale e^{} out of range",
                self.log_scale
            )));
        }
        Ok(self.field.map(|x| x * s))
    }

    /// `-(1/β) log` of the represented field.
    pub fn neg_log(&self, beta: f64) -> ScalarField {
        self.field.map(|x| -(x.ln() + self.log_scale) / beta)
    }
}

/// Propagate backward across the whole grid of `p_path`, returning the value
/// at every node (index `k` holds time `t_k`). `terminal` sits at the last node.
/// With `periodic` the pressure path is treated as one period (slice `K` = slice 0).
pub fn propagate_path(
    terminal: ScaledField,
    p_path: &ScalarPath,
    a: f64,
    spec: &PotentialSpec,
    periodic: bool,
) -> Result<Vec<ScaledField>> {
    let g = terminal.field.grid();
    if p_path.grid() != g {
        return Err(Error::GridMismatch);
    }
    let prop = Propagator::new(g, spec, p_path.time.dt)?;
    let steps = p_path.time.steps;
    let mut out = vec![terminal.clone(); steps + 1];
    let mut v = terminal.field.into_values();
    let mut ls = terminal.log_scale;
    for k in (0..steps).rev() {
        let mid = midpoint_pressure(p_path, k, periodic);
        ls += prop.step(&mut v, &p_path.slices[k + 1], &mid, &p_path.slices[k], a)?;
        out[k] = ScaledField {
            field: ScalarField::from_raw(g, v.clone()),
            log_scale: ls,
        };
    }
    Ok(out)
}

/// Solve the twisted equation backward over `duration` from `φ` given at the
/// final time of `p_path`, with `steps` uniform steps. `P` is read from
/// `p_path` (interpolated linearly in time between its nodes if needed).
pub fn propagate(
    phi: &ScalarField,
    p_path: &ScalarPath,
    a: f64,
    spec: &PotentialSpec,
    duration: f64,
    steps: usize,
) -> Result<ScalarField> {
    if !(duration > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "duration {duration} with {steps} steps"
        )));
    }
    if p_path.grid() != phi.grid() {
        return Err(Error::GridMismatch);
    }
    let end = p_path.time.end();
    if duration > p_path.time.duration() + 1e-9 {
        return Err(Error::InvalidArgument(
            "duration exceeds the pressure path".into(),
        ));
    }
    let time = TimeGrid::new(end - duration, end, steps)?;
    let slices = (0..=steps)
        .map(|k| pressure_at(p_path, time.node(k)))
        .collect();
    let resampled = ScalarPath { time, slices };
    let terminal = ScaledField {
        field: phi.clone(),
        log_scale: 0.0,
    };
    propagate_path(terminal, &resampled, a, spec, false)?[0].to_field()
}

/// `θ(v₁, v₂) = log(max(v₂/v₁) / min(v₂/v₁))`.
pub fn hilbert_metric(v1: &ScalarField, v2: &ScalarField) -> Result<f64> {
    v1.check_grid(v2)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, (a, b)) in v1.values().iter().zip(v2.values()).enumerate() {
        if !(*a > 0.0) {
            return Err(Error::NonPositive {
                index: i,
                value: *a,
            });
        }
        if !(*b > 0.0) {
            return Err(Error::NonPositive {
                index: i,
                value: *b,
            });
        }
        let r = b / a;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((hi / lo).ln())
}

pub const EIGEN_MAX_ITERATIONS: usize = 500;

/// Power iteration of the one-period map (with `A = 0`) in the Hilbert metric.
pub fn principal_eigenpair(
    p_path: &ScalarPath,
    spec: &PotentialSpec,
    tol: f64,
) -> Result<EigenPair> {
    principal_eigenpair_from(ScalarField::constant(p_path.grid(), 1.0), p_path, spec, tol)
}

/// Power iteration started from a given positive field.
pub fn principal_eigenpair_from(
    start: ScalarField,
    p_path: &ScalarPath,
    spec: &PotentialSpec,
    tol: f64,
) -> Result<EigenPair> {
    if (p_path.time.duration() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "pressure path must span one period".into(),
        ));
    }
    let g = p_path.grid();
    let prop = Propagator::new(g, spec, p_path.time.dt)?;
    let mids: Vec<ScalarField> = (0..p_path.time.steps)
        .map(|k| midpoint_pressure(p_path, k, true))
        .collect();
    let mut v = start.map(|x| x / start.integral());
    let mut history = Vec::new();
    for _ in 0..EIGEN_MAX_ITERATIONS {
        let mut w = v.values().to_vec();
        let mut ls = 0.0;
        for (k, mid) in mids.iter().enumerate().rev() {
            ls += prop.step(&mut w, &p_path.slices[k + 1], mid, &p_path.slices[k], 0.0)?;
        }
        let w = ScalarField::from_raw(g, w);
        let theta = hilbert_metric(&v, &w)?;
        history.push(theta);
        // B = Σ Lv / Σ v with Σ v normalised to 1/h^p
        let log_b = ls + w.integral().ln() - v.integral().ln();
        let mass = w.integral();
        v = w.map(|x| x / mass);
        if theta < tol {
            return Ok(EigenPair {
                v,
                b: log_b.exp(),
                theta_history: history,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "principal eigenpair",
        iterations: EIGEN_MAX_ITERATIONS,
        gap: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Pressure slices `P_ψ(t_k,·)` along a density path.
pub fn pressure_path(psi: &DensityPath, spec: &PotentialSpec) -> ScalarPath {
    let slices = psi
        .slices
        .iter()
        .enumerate()
        .map(|(k, rho)| compose_pressure(spec, rho, psi.time.node(k)))
        .collect();
    ScalarPath {
        time: psi.time,
        slices,
    }
}

/// Nodewise residual of `(1/2β)Δu + ∂_t u - ½|c - ∂u|² - P + H̄`.
///
/// Time derivatives are centered; with `periodic` the last node is identified
/// with the first, otherwise second-order one-sided differences are used at both ends.
pub fn hj_residual(
    u: &ValuePath,
    p: &ScalarPath,
    spec: &PotentialSpec,
    hbar: f64,
    periodic: bool,
) -> Result<Vec<ScalarField>> {
    if !u.time.same_as(&p.time) {
        return Err(Error::TimeGridMismatch);
    }
    let steps = u.time.steps;
    if !periodic && steps < 2 {
        return Err(Error::InvalidArgument("residual needs at least two time steps".into()));
    }
    let dt = u.time.dt;
    let d = spec.diffusion();
    let g = u.grid();
    let count = if periodic { steps } else { steps + 1 };
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        // centered inside, second-order one-sided at the ends of a horizon
        let stencil: [(usize, f64); 3] = if periodic {
            [((k + steps - 1) % steps, -0.5), ((k + 1) % steps, 0.5), (k, 0.0)]
        } else if k == 0 {
            [(0, -1.5), (1, 2.0), (2.min(steps), -0.5)]
        } else if k == steps {
            [(steps, 1.5), (steps - 1, -2.0), (steps.saturating_sub(2), 0.5)]
        } else {
            [(k - 1, -0.5), (k + 1, 0.5), (k, 0.0)]
        };
        let lap = laplacian(&u.slices[k]);
        let grad = gradient(&u.slices[k]);
        let vals = (0..g.len())
            .map(|i| {
                let mut kin = 0.0;
                for axis in 0..g.dim() {
                    let y = spec.c_at(axis) - grad.component(axis).values()[i];
                    kin += y * y;
                }
                let dtu = stencil.iter().map(|&(j, w)| w * u.slices[j].values()[i]).sum::<f64>() / dt;
                d * lap.values()[i] + dtu - 0.5 * kin - p.slices[k].values()[i] + hbar
            })
            .collect();
        out.push(ScalarField::from_raw(g, vals));
    }
    Ok(out)
}

fn sup_of(fields: &[ScalarField]) -> f64 {
    fields.iter().map(ScalarField::sup_norm).fold(0.0, f64::max)
}

/// Periodic HJ corrector `u_ψ` and effective Hamiltonian `H̄_ψ(c)`.
pub fn solve_hj_periodic(psi: &DensityPath, spec: &PotentialSpec, tol: f64) -> Result<ValuePath> {
    let p = pressure_path(psi, spec);
    solve_hj_periodic_with(&p, spec, tol, None)
}

/// As [`solve_hj_periodic`] with precomputed pressure and an optional warm
/// start for the eigenfunction.
pub fn solve_hj_periodic_with(
    p: &ScalarPath,
    spec: &PotentialSpec,
    tol: f64,
    warm: Option<&ScalarField>,
) -> Result<ValuePath> {
    let g = p.grid();
    let start = warm
        .cloned()
        .unwrap_or_else(|| ScalarField::constant(g, 1.0));
    let eig = principal_eigenpair_from(start, p, spec, tol)?;
    let a = eig.shift(spec.beta);
    let swept = propagate_path(
        ScaledField {
            field: eig.v.clone(),
            log_scale: 0.0,
        },
        p,
        a,
        spec,
        true,
    )?;
    let mut slices: Vec<ScalarField> = swept.iter().map(|s| s.neg_log(spec.beta)).collect();
    let steps = p.time.steps;
    slices[steps] = slices[0].clone();
    let shift = slices[0].mean();
    for s in &mut slices {
        *s = s.map(|x| x - shift);
    }
    let mut value = ValuePath {
        time: p.time,
        slices,
        hbar: None,
        diagnostics: None,
    };
    let raw = hj_residual(&value, p, spec, 0.0, true)?;
    let mean = raw.iter().map(ScalarField::mean).sum::<f64>() / raw.len() as f64;
    let hbar = -mean;
    let residual = sup_of(&hj_residual(&value, p, spec, hbar, true)?);
    if !residual.is_finite() {
        return Err(Error::NonFinite);
    }
    let p_size = p.slices.iter().map(c3_norm).fold(0.0, f64::max);
    let expected = (1.0 + p_size) * (g.h() * g.h() + p.time.dt);
    if residual > 10.0 * expected {
        return Err(Error::NonConvergence {
            what: "periodic HJ residual",
            iterations: eig.iterations(),
            gap: residual,
        });
    }
    log::debug!("periodic HJ: hbar {hbar}, eigen {a}, residual {residual:.3e}");
    value.hbar = Some(hbar);
    value.diagnostics = Some(PeriodicDiagnostics {
        hbar_eigen: a,
        hbar_alternative: -a,
        residual,
        eigen_iterations: eig.iterations(),
        theta_history: eig.theta_history,
    });
    Ok(value)
}

/// Terminal-value HJ solve on the time grid of `rho`, with `u(end,·) = f`.
pub fn solve_hj_terminal(
    rho: &DensityPath,
    f: &ScalarField,
    spec: &PotentialSpec,
) -> Result<ValuePath> {
    let p = pressure_path(rho, spec);
    solve_hj_terminal_with(&p, f, spec)
}

/// As [`solve_hj_terminal`] with precomputed pressure slices.
pub fn solve_hj_terminal_with(
    p: &ScalarPath,
    f: &ScalarField,
    spec: &PotentialSpec,
) -> Result<ValuePath> {
    if p.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let fmin = f.min();
    let spread = spec.beta * (f.max() - fmin);
    if spread > 700.0 {
        return Err(Error::Instability(format!(
            "terminal data too large: β·osc f = {spread:.1} underflows e^{{-βf}} (max |f| = {})",
            f.sup_norm()
        )));
    }
    let terminal = ScaledField {
        field: f.map(|x| (-spec.beta * (x - fmin)).exp()),
        log_scale: -spec.beta * fmin,
    };
    let swept = propagate_path(terminal, p, 0.0, spec, false)?;
    let mut slices: Vec<ScalarField> = swept.iter().map(|s| s.neg_log(spec.beta)).collect();
    *slices.last_mut().expect("nonempty") = f.clone();
    Ok(ValuePath {
        time: p.time,
        slices,
        hbar: None,
        diagnostics: None,
    })
}

/// `Y(t,·) = c - ∂u(t,·)`.
pub fn optimal_drift(u: &ValuePath, spec: &PotentialSpec) -> Result<DriftPath> {
    spec.check_grid(u.grid())?;
    let slices = u
        .slices
        .iter()
        .map(|s| {
            let grad = gradient(s);
            let comps = (0..s.grid().dim())
                .map(|a| grad.component(a).map(|x| spec.c_at(a) - x))
                .collect();
            VectorField::new(comps)
        })
        .collect::<Result<Vec<_>>>()?;
    DriftPath::new(u.time, slices)
}
