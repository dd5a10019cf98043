//! The `n`-particle game: Jacobi best-response iteration for the Nash
//! equilibrium, Euler–Maruyama paths, a Monte-Carlo Feynman–Kac estimator and
//! the mean-field convergence and Lipschitz experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fokker_planck::{fp_from_measure, mollify, InitialMeasure};
use crate::mfg::{hopf_lax, running_cost, MfgOptions};
use crate::torus::{
    circle_distance, compose_pressure_weighted, DensityField, DensityPath, DriftPath, Interaction,
    PotentialSpec, ScalarField, ScalarPath, TimeGrid, TorusGrid, VectorField,
};
use crate::transfer::{optimal_drift, solve_hj_terminal_with, ValuePath};
use crate::wasserstein::{curve_distance, w1_empirical, EmpiricalMeasure};

/// Seed plus named streams; a stream is a ChaCha8 counter-mode sequence, so
/// every (purpose, index) pair gets an independent reproducible source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

/// Stream families.
pub mod streams {
    pub const SAMPLING: u64 = 1;
    pub const PATHS: u64 = 2;
    pub const TRIALS: u64 = 3;
    pub const FEYNMAN_KAC: u64 = 4;
    pub const STARTS: u64 = 5;
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, family: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((family << 48) ^ index);
        rng
    }
}

/// Euler–Maruyama for `dX = Y(t,X) dt + β^{-1/2} dw` from `t₀` to `t₁`.
///
/// The returned positions are unwrapped (lifted to `R^p`); `Y` is evaluated
/// at the wrapped point. Unused second coordinates stay zero when `p = 1`.
pub fn euler_maruyama<R: Rng + ?Sized>(
    z0: [f64; 2],
    y: &DriftPath,
    spec: &PotentialSpec,
    t0: f64,
    t1: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    let steps = ((t1 - t0) / dt).round();
    if !(dt > 0.0)
        || steps < 1.0
        || (steps * dt - (t1 - t0)).abs() > 1e-9 * (t1 - t0).abs().max(1.0)
    {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} does not divide [{t0}, {t1}]"
        )));
    }
    let dim = y.grid().dim();
    let sigma = (dt / spec.beta).sqrt();
    let mut x = z0;
    let mut path = Vec::with_capacity(steps as usize + 1);
    path.push(x);
    for k in 0..steps as usize {
        let t = t0 + k as f64 * dt;
        let v = y.eval(t, x);
        for a in 0..dim {
            let xi: f64 = rng.sample(StandardNormal);
            x[a] += v[a] * dt + sigma * xi;
        }
        path.push(x);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashOptions {
    pub damping: f64,
    /// Stop when the largest nodewise drift update is below this.
    pub tol: f64,
    pub max_iterations: usize,
    pub steps_per_unit: usize,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-6,
            max_iterations: 200,
            steps_per_unit: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub z: Vec<[f64; 2]>,
    pub drifts: Vec<DriftPath>,
    pub densities: Vec<DensityPath>,
    /// `ρⁿ = (1/n) Σ ρ_i`.
    pub mean_density: DensityPath,
    pub value: f64,
    pub nash_gap: f64,
    pub iterations: usize,
}

impl ParticleSystem {
    pub fn n(&self) -> usize {
        self.z.len()
    }
}

fn mean_path(paths: &[DensityPath]) -> Result<DensityPath> {
    let n = paths.len() as f64;
    let time = paths[0].time;
    let g = paths[0].grid();
    let slices = (0..time.len())
        .map(|k| {
            let mut acc = vec![0.0; g.len()];
            for p in paths {
                for (a, v) in acc.iter_mut().zip(p.slices[k].values()) {
                    *a += v / n;
                }
            }
            DensityField::normalize(ScalarField::new(g, acc)?)
        })
        .collect::<Result<Vec<_>>>()?;
    DensityPath::new(time, slices)
}

/// `(1/n) Σ_j ρ_j - ρ_i / n` slice by slice, i.e. the others' mass seen by `i`.
fn others_pressure(
    spec: &PotentialSpec,
    sum: &[ScalarField],
    own: &DensityPath,
    n: usize,
) -> Result<ScalarPath> {
    let time = own.time;
    let slices = (0..time.len())
        .map(|k| {
            let others = sum[k].zip_map(own.slices[k].field(), |s, r| s - r)?;
            Ok(compose_pressure_weighted(
                spec,
                &others,
                time.node(k),
                1.0 / n as f64,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarPath::new(time, slices)
}

fn slice_sums(paths: &[DensityPath]) -> Result<Vec<ScalarField>> {
    let time = paths[0].time;
    let g = paths[0].grid();
    (0..time.len())
        .map(|k| {
            let mut acc = vec![0.0; g.len()];
            for p in paths {
                for (a, v) in acc.iter_mut().zip(p.slices[k].values()) {
                    *a += v;
                }
            }
            ScalarField::new(g, acc)
        })
        .collect()
}

/// Single-particle cost against a frozen pressure:
/// `∫∫ [½|Y|² - ⟨c,Y⟩ - P] ρ + h^p Σ f ρ(0)`, trapezoid in time.
fn particle_cost(
    rho: &DensityPath,
    y: &DriftPath,
    p: &ScalarPath,
    f: &ScalarField,
    spec: &PotentialSpec,
) -> Result<f64> {
    let time = rho.time;
    let g = rho.grid();
    let vals: Vec<f64> = (0..time.len())
        .map(|k| {
            let (r, yk, pk) = (rho.slices[k].values(), &y.slices[k], p.slices[k].values());
            let mut acc = 0.0;
            for i in 0..g.len() {
                let mut l = -pk[i];
                for a in 0..g.dim() {
                    let v = yk.component(a).values()[i];
                    l += 0.5 * v * v - spec.c_at(a) * v;
                }
                acc += l * r[i];
            }
            acc * g.cell_volume()
        })
        .collect();
    let inner: f64 = vals[1..time.steps].iter().sum();
    Ok(time.dt * (inner + 0.5 * (vals[0] + vals[time.steps])) + rho.last().field().dot(f)?)
}

struct BestResponse {
    drift: DriftPath,
    pressure: ScalarPath,
}

fn best_response(
    spec: &PotentialSpec,
    sums: &[ScalarField],
    own: &DensityPath,
    n: usize,
    f: &ScalarField,
) -> Result<BestResponse> {
    let pressure = others_pressure(spec, sums, own, n)?;
    let u: ValuePath = solve_hj_terminal_with(&pressure, f, spec)?;
    Ok(BestResponse {
        drift: optimal_drift(&u, spec)?,
        pressure,
    })
}

fn blend_drift(a: &DriftPath, b: &DriftPath, s: f64) -> Result<DriftPath> {
    let slices = a
        .slices
        .iter()
        .zip(&b.slices)
        .map(|(x, y)| VectorField::blend(x, y, s))
        .collect::<Result<Vec<_>>>()?;
    DriftPath::new(a.time, slices)
}

/// Jacobi best-response iteration from drifts `Y_i ≡ c`.
pub fn nash_best_response(
    z: &[[f64; 2]],
    f: &ScalarField,
    spec: &PotentialSpec,
    m: usize,
    options: &NashOptions,
) -> Result<ParticleSystem> {
    let g = f.grid();
    let time = TimeGrid::horizon(m, options.steps_per_unit)?;
    let c: Vec<f64> = (0..g.dim()).map(|a| spec.c_at(a)).collect();
    let start = vec![DriftPath::constant(time, VectorField::constant(g, &c)); z.len()];
    nash_best_response_from(z, start, f, spec, options)
}

/// Same as [`nash_best_response`] with explicit starting drifts.
pub fn nash_best_response_from(
    z: &[[f64; 2]],
    mut drifts: Vec<DriftPath>,
    f: &ScalarField,
    spec: &PotentialSpec,
    options: &NashOptions,
) -> Result<ParticleSystem> {
    let n = z.len();
    if n == 0 || drifts.len() != n {
        return Err(Error::InvalidArgument(
            "need one starting drift per particle, n ≥ 1".into(),
        ));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            options.damping
        )));
    }
    spec.check_grid(f.grid())?;
    // without interaction one exact sweep is already the equilibrium
    let tau = if spec.w.is_zero() {
        1.0
    } else {
        options.damping
    };
    let measures: Vec<InitialMeasure> = z.iter().map(|&x| InitialMeasure::dirac(x)).collect();
    let mut densities = drifts
        .par_iter()
        .zip(&measures)
        .map(|(y, mu)| fp_from_measure(mu, y, spec))
        .collect::<Result<Vec<_>>>()?;

    let mut change = f64::INFINITY;
    for it in 1..=options.max_iterations {
        let sums = slice_sums(&densities)?;
        let updated = drifts
            .par_iter()
            .zip(&densities)
            .map(|(y, rho)| {
                let br = best_response(spec, &sums, rho, n, f)?;
                let next = blend_drift(y, &br.drift, tau)?;
                let d = next.sup_distance(y)?;
                Ok((next, d))
            })
            .collect::<Result<Vec<_>>>()?;
        change = updated.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        drifts = updated.into_iter().map(|(y, _)| y).collect();
        densities = drifts
            .par_iter()
            .zip(&measures)
            .map(|(y, mu)| fp_from_measure(mu, y, spec))
            .collect::<Result<Vec<_>>>()?;
        log::debug!("nash sweep {it}: drift change {change:e}");
        if change < options.tol {
            let nash_gap = nash_gap(&drifts, &densities, &measures, f, spec)?;
            let mean_density = mean_path(&densities)?;
            let mut sys = ParticleSystem {
                z: z.to_vec(),
                drifts,
                densities,
                mean_density,
                value: 0.0,
                nash_gap,
                iterations: it,
            };
            sys.value = particle_value(&sys, f, spec)?;
            return Ok(sys);
        }
    }
    Err(Error::NonConvergence {
        what: "Nash best response",
        iterations: options.max_iterations,
        gap: change,
    })
}

/// Largest cost decrease any single particle could obtain by switching to its
/// exact best response against the frozen others.
fn nash_gap(
    drifts: &[DriftPath],
    densities: &[DensityPath],
    measures: &[InitialMeasure],
    f: &ScalarField,
    spec: &PotentialSpec,
) -> Result<f64> {
    let n = drifts.len();
    let sums = slice_sums(densities)?;
    let gaps = drifts
        .par_iter()
        .zip(densities)
        .zip(measures)
        .map(|((y, rho), mu)| {
            let br = best_response(spec, &sums, rho, n, f)?;
            let current = particle_cost(rho, y, &br.pressure, f, spec)?;
            let rho_br = fp_from_measure(mu, &br.drift, spec)?;
            let best = particle_cost(&rho_br, &br.drift, &br.pressure, f, spec)?;
            Ok(current - best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gaps.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `Uⁿ` from densities:
/// `(1/n) Σ_i [∫∫ L_c(Y_i) ρ_i + h^p Σ f ρ_i(0)] - (1/2n²) Σ_{i≠j} ∫∫∫ W ρ_i ρ_j - (m/2n) W(0)`.
///
/// The interaction enters with the sign of the mean-field Lagrangian; pairs
/// `i = j` contribute `W(0)` because a particle sits at distance zero from
/// itself.
pub fn particle_value(sys: &ParticleSystem, f: &ScalarField, spec: &PotentialSpec) -> Result<f64> {
    let n = sys.n();
    let nf = n as f64;
    let time = sys.densities[0].time;
    let uncoupled = PotentialSpec {
        w: Interaction::zero(),
        ..spec.clone()
    };
    let mut own = 0.0;
    for (rho, y) in sys.densities.iter().zip(&sys.drifts) {
        own += running_cost(rho, y, &uncoupled)? + rho.last().field().dot(f)?;
    }
    own /= nf;

    let mut pair = 0.0;
    if !spec.w.is_zero() {
        let sums = slice_sums(&sys.densities)?;
        let per_slice: Vec<f64> = (0..time.len())
            .map(|k| {
                let total = spec.w.convolve(&sums[k]).dot(&sums[k]).expect("same grid");
                let diag: f64 = sys
                    .densities
                    .iter()
                    .map(|r| {
                        spec.w
                            .convolve(r.slices[k].field())
                            .dot(r.slices[k].field())
                            .expect("same grid")
                    })
                    .sum();
                total - diag
            })
            .collect();
        let inner: f64 = per_slice[1..time.steps].iter().sum();
        pair = time.dt * (inner + 0.5 * (per_slice[0] + per_slice[time.steps]));
    }
    let self_term = time.duration() * spec.w.eval([0.0; 2]) / nf;
    Ok(own - 0.5 * pair / (nf * nf) - 0.5 * self_term)
}

/// Points representing `μ`: quantiles of the mollified density when `p = 1`
/// (cells centered at the nodes, constant inside), i.i.d. draws otherwise.
pub fn sample_measure(
    mu: &InitialMeasure,
    grid: TorusGrid,
    spec: &PotentialSpec,
    n: usize,
    rng: &RngSpec,
) -> Result<Vec<[f64; 2]>> {
    let rho = mollify(mu, grid, spec)?;
    let h = grid.h();
    let w: Vec<f64> = rho
        .values()
        .iter()
        .map(|v| v * grid.cell_volume())
        .collect();
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for v in &w {
        acc += v;
        cdf.push(acc);
    }
    let total = acc;
    let locate = |q: f64| -> (usize, f64) {
        let q = q * total;
        let i = cdf.partition_point(|&c| c < q).min(w.len() - 1);
        let before = if i == 0 { 0.0 } else { cdf[i - 1] };
        let frac = if w[i] > 0.0 {
            ((q - before) / w[i]).clamp(0.0, 1.0)
        } else {
            0.5
        };
        (i, frac)
    };
    if grid.dim() == 1 {
        return Ok((0..n)
            .map(|k| {
                let (i, frac) = locate((k as f64 + 0.5) / n as f64);
                [
                    (grid.coords(i)[0] - 0.5 * h + frac * h).rem_euclid(1.0),
                    0.0,
                ]
            })
            .collect());
    }
    let mut r = rng.stream(streams::SAMPLING, n as u64);
    Ok((0..n)
        .map(|_| {
            let (i, _) = locate(r.random::<f64>());
            let x = grid.coords(i);
            [
                (x[0] + (r.random::<f64>() - 0.5) * h).rem_euclid(1.0),
                (x[1] + (r.random::<f64>() - 0.5) * h).rem_euclid(1.0),
            ]
        })
        .collect())
}

/// `out[i] = f(x_i + d)` by multilinear interpolation. Every node is moved
/// by the same `d`, so the cell offset and weights are shared.
fn shifted_into(out: &mut [f64], f: &ScalarField, d: [f64; 2]) {
    let g = f.grid();
    let n = g.n();
    let v = f.values();
    let locate = |c: f64| {
        let s = c * n as f64;
        let j = s.floor();
        ((j as i64).rem_euclid(n as i64) as usize, s - j)
    };
    let (jx, fx) = locate(d[0]);
    if g.dim() == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (1.0 - fx) * v[(i + jx) % n] + fx * v[(i + jx + 1) % n];
        }
        return;
    }
    let (jy, fy) = locate(d[1]);
    for k in 0..n {
        let (r0, r1) = (n * ((k + jy) % n), n * ((k + jy + 1) % n));
        for i in 0..n {
            let (i0, i1) = ((i + jx) % n, (i + jx + 1) % n);
            out[i + n * k] = (1.0 - fy) * ((1.0 - fx) * v[r0 + i0] + fx * v[r0 + i1])
                + fy * ((1.0 - fx) * v[r1 + i0] + fx * v[r1 + i1]);
        }
    }
}

/// Monte-Carlo estimate of `v(t₀,x) = E[φ(X_T) exp(β ∫ (P + |c|²/2 - A)(s,X_s) ds)]`
/// with `dX = c ds + β^{-1/2} dw`, `T = t₀ + duration`, the same quantity that
/// the transfer propagator computes. `P` is interpolated multilinearly in
/// space and linearly in time; the exponent uses the trapezoid rule along
/// the discrete path on the time grid of `p_path`.
///
/// All nodes share the Brownian increments of a path (the dynamics are
/// translation invariant), so per-node estimates are unbiased but correlated.
/// Returns the estimate and its standard error per node.
pub fn feynman_kac_mc(
    phi: &ScalarField,
    p_path: &ScalarPath,
    a: f64,
    spec: &PotentialSpec,
    duration: f64,
    n_paths: usize,
    rng: &RngSpec,
) -> Result<(ScalarField, ScalarField)> {
    if n_paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let g = phi.grid();
    let time = p_path.time;
    let steps = (duration / time.dt).round() as usize;
    if steps == 0 || steps > time.steps || (steps as f64 * time.dt - duration).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "duration must be a multiple of the pressure time step within its span".into(),
        ));
    }
    let k0 = time.steps - steps;
    let dt = time.dt;
    let dim = g.dim();
    let beta = spec.beta;
    let sigma = (dt / beta).sqrt();
    let shift = spec.half_c_squared() - a;
    let c = [spec.c_at(0), if dim == 2 { spec.c_at(1) } else { 0.0 }];

    // chunks of paths keep the reduction order fixed
    const CHUNK: usize = 1024;
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let mut sum = vec![0.0; g.len()];
            let mut sq = vec![0.0; g.len()];
            let mut disp = vec![[0.0f64; 2]; steps + 1];
            let mut expo = vec![0.0; g.len()];
            let mut scratch = vec![0.0; g.len()];
            for path in ci * CHUNK..((ci + 1) * CHUNK).min(n_paths) {
                let mut r = rng.stream(streams::FEYNMAN_KAC, path as u64);
                for k in 1..=steps {
                    let mut d = disp[k - 1];
                    for (ax, dv) in d.iter_mut().enumerate().take(dim) {
                        let xi: f64 = r.sample(StandardNormal);
                        *dv += c[ax] * dt + sigma * xi;
                    }
                    disp[k] = d;
                }
                expo.iter_mut().for_each(|e| *e = 0.0);
                for (k, d) in disp.iter().enumerate() {
                    let w = if k == 0 || k == steps { 0.5 * dt } else { dt };
                    shifted_into(&mut scratch, &p_path.slices[k0 + k], *d);
                    for (e, p) in expo.iter_mut().zip(&scratch) {
                        *e += w * (p + shift);
                    }
                }
                shifted_into(&mut scratch, phi, disp[steps]);
                for i in 0..g.len() {
                    let val = scratch[i] * (beta * expo[i]).exp();
                    sum[i] += val;
                    sq[i] += val * val;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; g.len()];
    let mut sq = vec![0.0; g.len()];
    for (s, q) in chunks {
        for i in 0..g.len() {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let nf = n_paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se: Vec<f64> = (0..g.len())
        .map(|i| ((sq[i] / nf - mean[i] * mean[i]).max(0.0) * nf / (nf - 1.0) / nf).sqrt())
        .collect();
    Ok((ScalarField::new(g, mean)?, ScalarField::new(g, se)?))
}

/// One row of the mean-field convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub u_n: f64,
    pub reference_value: f64,
    pub abs_error: f64,
    pub curve_d1: f64,
    pub nash_gap: f64,
    pub seed: u64,
}

/// `|Uⁿ - Λ^m U(μ)|` along `n_schedule` with `μ` sampled by [`sample_measure`].
#[allow(clippy::too_many_arguments)]
pub fn convergence_experiment(
    mu: &InitialMeasure,
    f: &ScalarField,
    spec: &PotentialSpec,
    m: usize,
    n_schedule: &[usize],
    nash: &NashOptions,
    mfg: &MfgOptions,
    rng: &RngSpec,
) -> Result<Vec<ConvergenceRow>> {
    if n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "n_schedule must be increasing".into(),
        ));
    }
    let reference = hopf_lax(mu, f, spec, m, mfg)?;
    let value = reference.value.expect("horizon solve sets the value");
    n_schedule
        .iter()
        .map(|&n| {
            let z = sample_measure(mu, f.grid(), spec, n, rng)?;
            let sys = nash_best_response(&z, f, spec, m, nash)?;
            Ok(ConvergenceRow {
                n,
                u_n: sys.value,
                reference_value: value,
                abs_error: (sys.value - value).abs(),
                curve_d1: curve_distance(&sys.mean_density, &reference.rho)?,
                nash_gap: sys.nash_gap,
                seed: rng.seed,
            })
        })
        .collect()
}

/// One perturbation trial of the Lipschitz experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub n: usize,
    pub trial: usize,
    pub moved: usize,
    pub dz_l1: f64,
    pub du: f64,
    /// `n |ΔUⁿ| / |Δz|₁`.
    pub ratio: f64,
    /// `|ΔUⁿ| / d₁` of the empirical measures.
    pub measure_ratio: f64,
}

/// Perturb one or a few coordinates of a quantile-sampled `z` and record the
/// value ratios. Trial `k` moves `1 + k % 3` particles by sizes drawn from
/// `sizes` with random signs.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_experiment(
    n: usize,
    trials: usize,
    sizes: &[f64],
    spec: &PotentialSpec,
    f: &ScalarField,
    m: usize,
    nash: &NashOptions,
    rng: &RngSpec,
) -> Result<Vec<LipschitzRow>> {
    if sizes.is_empty() || sizes.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(
            "perturbation sizes must be positive".into(),
        ));
    }
    let g = f.grid();
    let dim = g.dim();
    let mu = InitialMeasure::Density(DensityField::uniform(g));
    let z = sample_measure(&mu, g, spec, n, rng)?;
    let base = nash_best_response(&z, f, spec, m, nash)?;
    let emp = |pts: &[[f64; 2]]| EmpiricalMeasure::new(dim, pts.to_vec());
    let base_emp = emp(&z)?;
    let plans: Vec<Vec<[f64; 2]>> = (0..trials)
        .map(|t| {
            let mut r = rng.stream(streams::TRIALS, (n as u64) << 20 | t as u64);
            let mut zt = z.clone();
            let moved = (1 + t % 3).min(n);
            let mut chosen: Vec<usize> = Vec::new();
            while chosen.len() < moved {
                let i = r.random_range(0..n);
                if !chosen.contains(&i) {
                    chosen.push(i);
                }
            }
            for i in chosen {
                let axis = r.random_range(0..dim);
                let size = sizes[r.random_range(0..sizes.len())];
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                zt[i][axis] = (zt[i][axis] + sign * size).rem_euclid(1.0);
            }
            zt
        })
        .collect();
    plans
        .iter()
        .enumerate()
        .map(|(t, zt)| {
            let sys = nash_best_response_from(zt, base.drifts.clone(), f, spec, nash)?;
            let mut dz = 0.0;
            let mut moved = 0;
            for (a, b) in z.iter().zip(zt) {
                let d: f64 = (0..dim).map(|k| circle_distance(a[k], b[k])).sum();
                if d > 0.0 {
                    moved += 1;
                }
                dz += d;
            }
            let du = (sys.value - base.value).abs();
            let w1 = w1_empirical(&base_emp, &emp(zt)?)?;
            Ok(LipschitzRow {
                n,
                trial: t,
                moved,
                dz_l1: dz,
                du,
                ratio: if dz > 0.0 { n as f64 * du / dz } else { 0.0 },
                measure_ratio: if w1 > 0.0 { du / w1 } else { 0.0 },
            })
        })
        .collect()
}
