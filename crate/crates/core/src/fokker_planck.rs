//! Forward Kolmogorov (Fokker–Planck) equation `∂_t ρ = (1/2β)Δρ - div(ρY)`.
//!
//! Both schemes are written in flux form on the grid edges, so mass is
//! conserved exactly. The main scheme uses centered fluxes with
//! Crank–Nicolson in time; edges whose cell Péclet number reaches one switch
//! to the exponentially fitted (Scharfetter–Gummel) flux, which keeps the
//! off-diagonal coefficients positive. A few backward-Euler half steps at the
//! start damp the stiff modes of rough initial data. The second scheme, used
//! as an independent cross-check, is fully fitted (upwind) with backward Euler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CirculantExp, StencilMatrix};
use crate::torus::{
    divergence, laplacian, DensityField, DensityPath, DriftPath, InitialTag, PotentialSpec,
    ScalarField, TimeGrid, TorusGrid, VectorField,
};

/// Negative values above this are round-off and are zeroed silently.
pub const CLIP_ROUNDOFF: f64 = -1e-13;
/// Hard limit on the total mass removed by clipping in one solve.
pub const CLIP_LIMIT: f64 = 1e-10;
/// Dirac mollification time in units of `h²β`.
pub const MOLLIFY_FACTOR: f64 = 4.0;
pub const STEADY_MAX_PERIODS: usize = 500;

/// Initial condition of a forward solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialMeasure {
    Density(DensityField),
    /// Point masses `(x, weight)`, weights summing to one.
    Diracs(Vec<([f64; 2], f64)>),
    /// Convex combination of measures.
    Mixture(Vec<(f64, InitialMeasure)>),
}

impl InitialMeasure {
    pub fn dirac(x: [f64; 2]) -> Self {
        Self::Diracs(vec![(x, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        let check_weights = |w: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let mut sum = 0.0;
            for x in w {
                if !(x >= 0.0) {
                    return Err(Error::InvalidArgument(format!("negative weight {x}")));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "weights sum to {sum}, not 1"
                )));
            }
            Ok(())
        };
        match self {
            Self::Density(_) => Ok(()),
            Self::Diracs(d) => {
                if d.iter().flat_map(|(x, _)| x).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite);
                }
                check_weights(&mut d.iter().map(|(_, w)| *w))
            }
            Self::Mixture(parts) => {
                check_weights(&mut parts.iter().map(|(w, _)| *w))?;
                parts.iter().try_for_each(|(_, m)| m.validate())
            }
        }
    }

    fn tag(&self) -> InitialTag {
        match self {
            Self::Density(_) => InitialTag::Density,
            Self::Diracs(d) => InitialTag::Diracs(d.clone()),
            Self::Mixture(_) => InitialTag::Mixture,
        }
    }
}

/// Grid density for a measure: Diracs are deposited on the surrounding nodes
/// with multilinear weights and then smoothed by the exact discrete heat
/// flow for time `ε = 4h²β`.
pub fn mollify(
    measure: &InitialMeasure,
    grid: TorusGrid,
    spec: &PotentialSpec,
) -> Result<DensityField> {
    measure.validate()?;
    let values = raw_mollify(measure, grid, spec)?;
    DensityField::normalize(ScalarField::new(grid, values)?)
}

fn raw_mollify(
    measure: &InitialMeasure,
    grid: TorusGrid,
    spec: &PotentialSpec,
) -> Result<Vec<f64>> {
    match measure {
        InitialMeasure::Density(d) => {
            if d.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Ok(d.values().to_vec())
        }
        InitialMeasure::Diracs(points) => {
            let mut v = vec![0.0; grid.len()];
            let n = grid.n() as f64;
            let vol = grid.cell_volume();
            for (x, w) in points {
                let x = grid.wrap_point(*x);
                let s: Vec<(usize, f64)> = (0..grid.dim())
                    .map(|a| {
                        let f = x[a] * n;
                        let i = f.floor();
                        (i as usize % grid.n(), f - i)
                    })
                    .collect();
                let corners = 1 << grid.dim();
                for corner in 0..corners {
                    let mut mi = [0usize; 2];
                    let mut weight = *w / vol;
                    for (a, &(i, frac)) in s.iter().enumerate() {
                        if corner >> a & 1 == 1 {
                            mi[a] = (i + 1) % grid.n();
                            weight *= frac;
                        } else {
                            mi[a] = i;
                            weight *= 1.0 - frac;
                        }
                    }
                    v[grid.flat_index(mi)] += weight;
                }
            }
            let eps = MOLLIFY_FACTOR * grid.h() * grid.h() * spec.beta;
            let heat = CirculantExp::new(grid.n(), grid.h(), spec.diffusion(), 0.0, eps);
            for axis in 0..grid.dim() {
                heat.apply_axis(grid, axis, &mut v);
            }
            for x in &mut v {
                *x = x.max(0.0);
            }
            Ok(v)
        }
        InitialMeasure::Mixture(parts) => {
            let mut v = vec![0.0; grid.len()];
            for (w, m) in parts {
                for (o, x) in v.iter_mut().zip(raw_mollify(m, grid, spec)?) {
                    *o += w * x;
                }
            }
            Ok(v)
        }
    }
}

/// Space-time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FpScheme {
    /// Centered fluxes (fitted on high-Péclet edges), Crank–Nicolson in time.
    CenteredCrankNicolson,
    /// Scharfetter–Gummel fluxes on every edge, backward Euler in time.
    FittedImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpOptions {
    pub scheme: FpScheme,
    /// Number of initial steps taken as two backward-Euler half steps.
    pub damping_steps: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            scheme: FpScheme::CenteredCrankNicolson,
            damping_steps: 2,
        }
    }
}

/// Bookkeeping of one forward solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FpStats {
    /// Largest `|h^p Σ ρ - 1|` before the per-step renormalization.
    pub mass_defect: f64,
    /// Total mass removed by clipping negative values.
    pub clipped: f64,
}

/// `B(a) = a / (e^a - 1)`.
fn bernoulli(a: f64) -> f64 {
    if a.abs() < 1e-8 {
        1.0 - 0.5 * a
    } else {
        a / a.exp_m1()
    }
}

/// Generator matrix of the semi-discrete equation for drift `y`.
///
/// Each edge `(i, i+)` carries the flux `α ρ_i - γ ρ_{i+}`.
pub fn fp_generator(y: &VectorField, spec: &PotentialSpec, scheme: FpScheme) -> StencilMatrix {
    let g = y.grid();
    let h = g.h();
    let d = spec.diffusion();
    let mut m = StencilMatrix::zeros(g);
    for axis in 0..g.dim() {
        let ya = y.component(axis).values();
        for i in 0..g.len() {
            let ip = g.shift(i, axis, 1);
            let peclet = ya[i].abs().max(ya[ip].abs()) * h / (2.0 * d);
            let (alpha, gamma) = if scheme == FpScheme::CenteredCrankNicolson && peclet < 1.0 {
                (d / h + 0.5 * ya[i], d / h - 0.5 * ya[ip])
            } else {
                let q = 0.5 * (ya[i] + ya[ip]) * h / d;
                ((d / h) * bernoulli(-q), (d / h) * bernoulli(q))
            };
            m.diag[i] -= alpha / h;
            m.nb[i][2 * axis + 1] += gamma / h;
            m.nb[ip][2 * axis] += alpha / h;
            m.diag[ip] -= gamma / h;
        }
    }
    m
}

struct Stepper<'a> {
    spec: &'a PotentialSpec,
    options: FpOptions,
    stats: FpStats,
}

impl Stepper<'_> {
    fn finish(&mut self, mut rho: Vec<f64>, grid: TorusGrid) -> Result<Vec<f64>> {
        let vol = grid.cell_volume();
        let mut clipped = 0.0;
        for x in &mut rho {
            if !x.is_finite() {
                return Err(Error::Instability("non-finite density".into()));
            }
            if *x < 0.0 {
                if *x < CLIP_ROUNDOFF {
                    clipped -= *x * vol;
                }
                *x = 0.0;
            }
        }
        self.stats.clipped += clipped;
        if clipped > 0.0 {
            log::debug!("clipped {clipped:e} of negative mass");
        }
        if self.stats.clipped > CLIP_LIMIT {
            return Err(Error::ExcessiveClipping {
                clipped: self.stats.clipped,
            });
        }
        let mass = rho.iter().sum::<f64>() * vol;
        self.stats.mass_defect = self.stats.mass_defect.max((mass - 1.0).abs());
        for x in &mut rho {
            *x /= mass;
        }
        Ok(rho)
    }

    fn backward_euler(&mut self, rho: &[f64], g_new: &StencilMatrix, dt: f64) -> Result<Vec<f64>> {
        let out = g_new.solve_shifted(dt, rho)?;
        self.finish(out, g_new.grid())
    }

    fn crank_nicolson(
        &mut self,
        rho: &[f64],
        g_old: &StencilMatrix,
        g_new: &StencilMatrix,
        dt: f64,
    ) -> Result<Vec<f64>> {
        let rhs = g_old.apply_shifted(0.5 * dt, rho);
        let out = g_new.solve_shifted(0.5 * dt, &rhs)?;
        self.finish(out, g_new.grid())
    }

    /// One step from `t` to `t + dt`; `damp` selects the backward-Euler start.
    fn step(
        &mut self,
        rho: &[f64],
        y: &DriftPath,
        t: f64,
        dt: f64,
        damp: bool,
    ) -> Result<Vec<f64>> {
        let scheme = self.options.scheme;
        let gen = |s: f64| fp_generator(&y.at_time(s), self.spec, scheme);
        match scheme {
            FpScheme::FittedImplicit => self.backward_euler(rho, &gen(t + dt), dt),
            FpScheme::CenteredCrankNicolson if damp => {
                let half = self.backward_euler(rho, &gen(t + 0.5 * dt), 0.5 * dt)?;
                self.backward_euler(&half, &gen(t + dt), 0.5 * dt)
            }
            FpScheme::CenteredCrankNicolson => self.crank_nicolson(rho, &gen(t), &gen(t + dt), dt),
        }
    }
}

fn check_inputs(rho0: &DensityField, y: &DriftPath, spec: &PotentialSpec) -> Result<()> {
    if y.grid() != rho0.grid() {
        return Err(Error::GridMismatch);
    }
    spec.check_grid(rho0.grid())?;
    DensityField::new(rho0.field().clone())?;
    Ok(())
}

/// Evolve `ρ₀` from `t₀` to `t₁` in `steps` steps with the default scheme.
pub fn fp_evolve(
    rho0: &DensityField,
    y: &DriftPath,
    spec: &PotentialSpec,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<DensityPath> {
    Ok(fp_evolve_with(
        rho0,
        y,
        spec,
        TimeGrid::new(t0, t1, steps)?,
        FpOptions::default(),
    )?
    .0)
}

/// Evolve on an explicit time grid with explicit options.
pub fn fp_evolve_with(
    rho0: &DensityField,
    y: &DriftPath,
    spec: &PotentialSpec,
    time: TimeGrid,
    options: FpOptions,
) -> Result<(DensityPath, FpStats)> {
    check_inputs(rho0, y, spec)?;
    let g = rho0.grid();
    let mut stepper = Stepper {
        spec,
        options,
        stats: FpStats::default(),
    };
    let mut slices = Vec::with_capacity(time.len());
    slices.push(rho0.clone());
    let mut rho = rho0.values().to_vec();
    for k in 0..time.steps {
        rho = stepper.step(&rho, y, time.node(k), time.dt, k < options.damping_steps)?;
        slices.push(DensityField::new(ScalarField::new(g, rho.clone())?)?);
    }
    log::debug!(
        "fp solve: mass defect {:e}, clipped {:e}",
        stepper.stats.mass_defect,
        stepper.stats.clipped
    );
    Ok((DensityPath::new(time, slices)?, stepper.stats))
}

/// Transpose of the whole evolution map of [`fp_evolve_with`] applied to a
/// test function `f` (a discrete backward Kolmogorov solve).
///
/// Mass renormalization and clipping are not part of this linear map; they
/// are round-off level for the forward solve.
pub fn fp_adjoint(
    f: &ScalarField,
    y: &DriftPath,
    spec: &PotentialSpec,
    time: TimeGrid,
    options: FpOptions,
) -> Result<ScalarField> {
    let gen = |s: f64| fp_generator(&y.at_time(s), spec, options.scheme).transpose();
    let mut v = f.values().to_vec();
    for k in (0..time.steps).rev() {
        let (t, dt) = (time.node(k), time.dt);
        v = match options.scheme {
            FpScheme::FittedImplicit => gen(t + dt).solve_shifted(dt, &v)?,
            FpScheme::CenteredCrankNicolson if k < options.damping_steps => {
                let w = gen(t + dt).solve_shifted(0.5 * dt, &v)?;
                gen(t + 0.5 * dt).solve_shifted(0.5 * dt, &w)?
            }
            FpScheme::CenteredCrankNicolson => {
                let w = gen(t + dt).solve_shifted(0.5 * dt, &v)?;
                gen(t).apply_shifted(0.5 * dt, &w)
            }
        };
    }
    ScalarField::new(f.grid(), v)
}

/// Evolve a measure over the time grid of `y` (typically `[-m, 0]`).
pub fn fp_from_measure(
    mu: &InitialMeasure,
    y: &DriftPath,
    spec: &PotentialSpec,
) -> Result<DensityPath> {
    Ok(fp_from_measure_with(mu, y, spec, FpOptions::default())?.0)
}

pub fn fp_from_measure_with(
    mu: &InitialMeasure,
    y: &DriftPath,
    spec: &PotentialSpec,
    options: FpOptions,
) -> Result<(DensityPath, FpStats)> {
    let rho0 = mollify(mu, y.grid(), spec)?;
    let (path, stats) = fp_evolve_with(&rho0, y, spec, y.time, options)?;
    Ok((path.with_tag(mu.tag()), stats))
}

/// Time-periodic solution for a drift given over one period: iterate the
/// period map from the uniform density until successive period-start slices
/// are within `tol` in `L¹`.
pub fn fp_periodic_steady(y: &DriftPath, spec: &PotentialSpec, tol: f64) -> Result<DensityPath> {
    fp_periodic_steady_from(
        &DensityField::uniform(y.grid()),
        y,
        spec,
        tol,
        FpScheme::CenteredCrankNicolson,
    )
}

pub fn fp_periodic_steady_from(
    start: &DensityField,
    y: &DriftPath,
    spec: &PotentialSpec,
    tol: f64,
    scheme: FpScheme,
) -> Result<DensityPath> {
    if (y.time.duration() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("drift must span one period".into()));
    }
    // only the first period gets the damped start; later periods begin from
    // smooth data, and the returned path is always an undamped period
    let options = |period: usize| FpOptions {
        scheme,
        damping_steps: if period == 0 { 2 } else { 0 },
    };
    let mut rho = start.clone();
    let mut gap = f64::INFINITY;
    for period in 0..STEADY_MAX_PERIODS {
        let (path, _) = fp_evolve_with(&rho, y, spec, y.time, options(period))?;
        gap = path.last().total_variation(&rho)?;
        if gap < tol {
            let mut path = if period == 0 {
                fp_evolve_with(&rho, y, spec, y.time, options(1))?.0
            } else {
                path
            };
            let avg = DensityField::mix(path.first(), path.last(), 0.5)?;
            let k = path.time.steps;
            path.slices[0] = avg.clone();
            path.slices[k] = avg;
            log::debug!(
                "periodic FP converged after {} periods (gap {gap:e})",
                period + 1
            );
            return Ok(path.with_tag(InitialTag::Periodic));
        }
        rho = path.last().clone();
    }
    Err(Error::NonConvergence {
        what: "periodic Fokker-Planck",
        iterations: STEADY_MAX_PERIODS,
        gap,
    })
}

/// Nodewise residual `∂_t ρ - (1/2β)Δρ + div(ρY)` with centered differences
/// in space and time; with `periodic` the last node wraps to the first and
/// the residual is reported for nodes `0..K`, otherwise for interior nodes.
pub fn fp_residual(
    rho: &DensityPath,
    y: &DriftPath,
    spec: &PotentialSpec,
    periodic: bool,
) -> Result<Vec<ScalarField>> {
    if !rho.time.same_as(&y.time) {
        return Err(Error::TimeGridMismatch);
    }
    let steps = rho.time.steps;
    let dt = rho.time.dt;
    let d = spec.diffusion();
    let g = rho.grid();
    let range: Vec<usize> = if periodic {
        (0..steps).collect()
    } else {
        (1..steps).collect()
    };
    let mut out = Vec::with_capacity(range.len());
    for k in range {
        let (prev, next) = if periodic {
            ((k + steps - 1) % steps, (k + 1) % steps)
        } else {
            (k - 1, k + 1)
        };
        let r = rho.slices[k].field();
        let flux = VectorField::new(
            (0..g.dim())
                .map(|a| r.zip_map(y.slices[k].component(a), |p, q| p * q))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let lap = laplacian(r);
        let div = divergence(&flux);
        let vals = (0..g.len())
            .map(|i| {
                let dt_rho =
                    (rho.slices[next].values()[i] - rho.slices[prev].values()[i]) / (2.0 * dt);
                dt_rho - d * lap.values()[i] + div.values()[i]
            })
            .collect();
        out.push(ScalarField::new(g, vals)?);
    }
    Ok(out)
}

/// Sup of the FP residual over all reported nodes.
pub fn fp_residual_sup(
    rho: &DensityPath,
    y: &DriftPath,
    spec: &PotentialSpec,
    periodic: bool,
) -> Result<f64> {
    Ok(fp_residual(rho, y, spec, periodic)?
        .iter()
        .map(ScalarField::sup_norm)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{gradient, Potential};
    use std::f64::consts::PI;

    fn spec1(c: f64) -> PotentialSpec {
        PotentialSpec::free(1.0, vec![c]).unwrap()
    }

    fn const_drift(g: TorusGrid, time: TimeGrid, c: f64) -> DriftPath {
        DriftPath::constant(time, VectorField::constant(g, &[c, 0.0]))
    }

    #[test]
    fn uniform_stays_uniform() {
        let g = TorusGrid::new(1, 64).unwrap();
        for c in [0.0, 1.3] {
            let time = TimeGrid::unit_period(64).unwrap();
            let path = fp_evolve(
                &DensityField::uniform(g),
                &const_drift(g, time, c),
                &spec1(c),
                0.0,
                1.0,
                64,
            )
            .unwrap();
            for s in &path.slices {
                assert!(s.values().iter().all(|x| (x - 1.0).abs() < 1e-13));
            }
        }
    }

    #[test]
    fn generators_are_conservative() {
        let g = TorusGrid::new(2, 8).unwrap();
        let y = VectorField::new(vec![
            ScalarField::from_fn(g, |x| (2.0 * PI * x[1]).sin()),
            ScalarField::from_fn(g, |x| 0.5 * (2.0 * PI * x[0]).cos()),
        ])
        .unwrap();
        for scheme in [FpScheme::CenteredCrankNicolson, FpScheme::FittedImplicit] {
            let m = fp_generator(&y, &spec1(0.0), scheme);
            assert!(m.column_sums().iter().all(|s| s.abs() < 1e-10));
        }
    }

    #[test]
    fn fitted_flux_limits() {
        assert!((bernoulli(0.0) - 1.0).abs() < 1e-15);
        assert!((bernoulli(1e-9) - (1.0 - 0.5e-9)).abs() < 1e-15);
        // B(a) - B(-a) = -a
        for a in [0.3, 2.0, 15.0] {
            assert!((bernoulli(a) - bernoulli(-a) + a).abs() < 1e-12);
        }
    }

    #[test]
    fn dirac_mixture_is_linear() {
        let g = TorusGrid::new(1, 64).unwrap();
        let time = TimeGrid::horizon(1, 64).unwrap();
        let y = DriftPath::constant(
            time,
            VectorField::new(vec![ScalarField::from_fn(g, |x| {
                0.4 * (2.0 * PI * x[0]).sin()
            })])
            .unwrap(),
        );
        let spec = spec1(0.0);
        let a = InitialMeasure::dirac([0.2, 0.0]);
        let b = InitialMeasure::dirac([0.63, 0.0]);
        let mix = InitialMeasure::Mixture(vec![(0.5, a.clone()), (0.5, b.clone())]);
        let pa = fp_from_measure(&a, &y, &spec).unwrap();
        let pb = fp_from_measure(&b, &y, &spec).unwrap();
        let pm = fp_from_measure(&mix, &y, &spec).unwrap();
        let avg = DensityPath::mix(&pa, &pb, 0.5).unwrap();
        assert!(pm.sup_distance(&avg).unwrap() < 1e-12);
        let two = InitialMeasure::Diracs(vec![([0.2, 0.0], 0.5), ([0.63, 0.0], 0.5)]);
        assert!(
            fp_from_measure(&two, &y, &spec)
                .unwrap()
                .sup_distance(&avg)
                .unwrap()
                < 1e-12
        );
    }

    fn circular_variance(rho: &DensityField, x0: f64) -> f64 {
        let g = rho.grid();
        let h = g.h();
        rho.values()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut d = g.coords(i)[0] - x0;
                d -= d.round();
                d * d * r * h
            })
            .sum()
    }

    #[test]
    fn dirac_spreads_like_heat_kernel() {
        let g = TorusGrid::new(1, 128).unwrap();
        for beta in [1.0, 2.0] {
            let spec = PotentialSpec::free(beta, vec![0.0]).unwrap();
            let time = TimeGrid::new(0.0, 0.02, 40).unwrap();
            let y = const_drift(g, time, 0.0);
            let x0 = 0.5;
            let path = fp_from_measure(&InitialMeasure::dirac([x0, 0.0]), &y, &spec).unwrap();
            let eps = MOLLIFY_FACTOR * g.h() * g.h() * beta;
            for k in [0, 20, 40] {
                let t = time.node(k);
                let expect = (t + eps) / beta;
                let var = circular_variance(&path.slices[k], x0);
                assert!(
                    (var - expect).abs() < 0.05 * expect,
                    "beta {beta} t {t}: {var} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn adjoint_duality_with_drift() {
        let g = TorusGrid::new(1, 32).unwrap();
        let time = TimeGrid::new(0.0, 0.5, 40).unwrap();
        let y = DriftPath::new(
            time,
            (0..=40)
                .map(|k| {
                    let t = time.node(k);
                    VectorField::new(vec![ScalarField::from_fn(g, |x| {
                        0.5 * (2.0 * PI * (x[0] - t)).sin()
                    })])
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let spec = spec1(0.0);
        let rho0 = DensityField::normalize(ScalarField::from_fn(g, |x| {
            1.0 + 0.8 * (2.0 * PI * x[0]).cos()
        }))
        .unwrap();
        let f = ScalarField::from_fn(g, |x| (4.0 * PI * x[0]).sin() + 0.3);
        for options in [
            FpOptions::default(),
            FpOptions {
                scheme: FpScheme::FittedImplicit,
                damping_steps: 0,
            },
        ] {
            let (path, _) = fp_evolve_with(&rho0, &y, &spec, time, options).unwrap();
            let lhs = path.last().field().dot(&f).unwrap();
            let rhs = rho0
                .field()
                .dot(&fp_adjoint(&f, &y, &spec, time, options).unwrap())
                .unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn gibbs_density_is_steady() {
        let g = TorusGrid::new(1, 128).unwrap();
        let spec = spec1(0.0);
        let phi = Potential::cosine(0.3).sample(g, 0.0);
        let drift = gradient(&phi);
        let y = DriftPath::constant(
            TimeGrid::unit_period(256).unwrap(),
            VectorField::new(vec![drift.component(0).map(|x| -x)]).unwrap(),
        );
        let steady = fp_periodic_steady(&y, &spec, 1e-12).unwrap();
        let gibbs = DensityField::normalize(phi.map(|p| (-2.0 * spec.beta * p).exp())).unwrap();
        let l1 = steady.first().total_variation(&gibbs).unwrap();
        assert!(l1 < 1e-3, "{l1}");
        let r = fp_residual_sup(&steady, &y, &spec, true).unwrap();
        assert!(r < 3e-3, "{r}");
    }

    #[test]
    fn clipping_limit_is_enforced() {
        let g = TorusGrid::new(1, 16).unwrap();
        let spec = spec1(0.0);
        let mut s = Stepper {
            spec: &spec,
            options: FpOptions::default(),
            stats: FpStats::default(),
        };
        let mut rho = vec![1.0; 16];
        rho[3] = -1e-6;
        assert!(matches!(
            s.finish(rho, g),
            Err(Error::ExcessiveClipping { .. })
        ));
        let mut s = Stepper {
            spec: &spec,
            options: FpOptions::default(),
            stats: FpStats::default(),
        };
        let mut rho = vec![1.0; 16];
        rho[3] = -1e-15;
        let out = s.finish(rho, g).unwrap();
        assert_eq!(out[3], 0.0);
    }
}
