//! Long-horizon diagnostics: value iteration `Λⁿ_{c,0} 0` at probe measures,
//! the ergodic constant `λ`, the shifted sequence approximating `Û`, the
//! dynamic-programming residual of the semigroup and drift concatenation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fokker_planck::{fp_from_measure, mollify, InitialMeasure};
use crate::mfg::{hopf_lax, running_cost, MfgOptions};
use crate::torus::{DensityField, DriftPath, PotentialSpec, ScalarField, TimeGrid, TorusGrid, VectorField};
use crate::wasserstein::w1_density;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub measure: InitialMeasure,
}

/// Finite stand-in for the space of probability measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub probes: Vec<Probe>,
}

impl ProbeSet {
    /// Uniform, two Diracs and an even bimodal mixture.
    pub fn standard(grid: TorusGrid) -> Self {
        let at = |x: f64| if grid.dim() == 2 { [x, x] } else { [x, 0.0] };
        let probes = vec![
            Probe {
                label: "uniform".into(),
                measure: InitialMeasure::Density(DensityField::uniform(grid)),
            },
            Probe {
                label: "dirac_0.25".into(),
                measure: InitialMeasure::dirac(at(0.25)),
            },
            Probe {
                label: "dirac_0.6".into(),
                measure: InitialMeasure::dirac(at(0.6)),
            },
            Probe {
                label: "bimodal".into(),
                measure: InitialMeasure::Diracs(vec![(at(0.2), 0.5), (at(0.7), 0.5)]),
            },
        ];
        Self { probes }
    }

    pub fn labels(&self) -> Vec<String> {
        self.probes.iter().map(|p| p.label.clone()).collect()
    }
}

/// `(Λⁿ_{c,0} 0)(μ)` for every probe and `n = 1..=N`; failed cells are
/// `None` with the error kept in `errors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub errors: Vec<String>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `a_n = min over probes`, `None` if every probe failed at `n`.
    pub fn minima(&self) -> Vec<Option<f64>> {
        (0..self.horizon())
            .map(|k| {
                self.values
                    .iter()
                    .filter_map(|row| row[k])
                    .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
            })
            .collect()
    }
}

pub fn value_iteration(
    probes: &ProbeSet,
    spec: &PotentialSpec,
    grid: TorusGrid,
    horizon: usize,
    options: &MfgOptions,
) -> Result<ValueTable> {
    if horizon == 0 || horizon > 20 {
        return Err(Error::InvalidArgument(format!("horizon must lie in 1..=20, got {horizon}")));
    }
    let zero = ScalarField::zeros(grid);
    let cells: Vec<(usize, usize)> = (0..probes.probes.len())
        .flat_map(|p| (1..=horizon).map(move |n| (p, n)))
        .collect();
    let results: Vec<std::result::Result<f64, String>> = cells
        .par_iter()
        .map(|&(p, n)| {
            hopf_lax(&probes.probes[p].measure, &zero, spec, n, options)
                .map(|s| s.value.expect("horizon solve sets the value"))
                .map_err(|e| format!("{} n={n}: {e}", probes.probes[p].label))
        })
        .collect();
    let mut values = vec![vec![None; horizon]; probes.probes.len()];
    let mut errors = Vec::new();
    for (&(p, n), r) in cells.iter().zip(results) {
        match r {
            Ok(v) => values[p][n - 1] = Some(v),
            Err(e) => {
                log::warn!("{e}");
                errors.push(e);
            }
        }
    }
    Ok(ValueTable {
        labels: probes.labels(),
        values,
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    /// `-(a_N - a_{N/2}) / (N - N/2)`.
    pub lambda: f64,
    /// `-a_N / N`.
    pub raw: f64,
}

/// Ergodic constant from `a_1, …, a_N`.
pub fn estimate_lambda(a: &[f64]) -> Result<LambdaEstimate> {
    let n = a.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 terms, got {n}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let half = n / 2;
    Ok(LambdaEstimate {
        lambda: -(a[n - 1] - a[half - 1]) / (n - half) as f64,
        raw: -a[n - 1] / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFixedPoint {
    pub label: String,
    /// `(Λⁿ_{c,0} 0)(μ) + λ n` for `n = 1..=N`.
    pub shifted: Vec<Option<f64>>,
    pub u_hat: Option<f64>,
    /// Oscillation over the last `⌈N/3⌉` terms.
    pub cauchy_gap: Option<f64>,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzDiagnostic {
    pub pair: (String, String),
    pub d1: f64,
    /// `|ΔΛⁿ| / d₁` for `n = 1..=N`.
    pub ratios: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub table: ValueTable,
    pub minima: Vec<Option<f64>>,
    pub lambda: Option<LambdaEstimate>,
    pub lambda_used: f64,
    pub probes: Vec<ProbeFixedPoint>,
    /// Largest `|shifted value|` over probes and `n`.
    pub max_shifted: f64,
    /// First `n` at which some shifted value leaves the bound.
    pub diverged_at: Option<usize>,
    pub bound: f64,
    pub lipschitz: Vec<LipschitzDiagnostic>,
    /// `max_n ratio / ratio at n = 3`, worst pair.
    pub lipschitz_growth: Option<f64>,
}

/// Shifted sequences with a given `λ`, boundedness against `bound` and the
/// probe-pair Lipschitz ratios.
pub fn fixed_point_probe(
    table: &ValueTable,
    probes: &ProbeSet,
    spec: &PotentialSpec,
    grid: TorusGrid,
    lambda: f64,
    bound: f64,
) -> Result<ErgodicReport> {
    let big_n = table.horizon();
    let tail = big_n.div_ceil(3);
    let mut max_shifted = 0.0_f64;
    let mut diverged_at: Option<usize> = None;
    let fixed: Vec<ProbeFixedPoint> = table
        .values
        .iter()
        .zip(&table.labels)
        .map(|(row, label)| {
            let shifted: Vec<Option<f64>> = row
                .iter()
                .enumerate()
                .map(|(k, v)| v.map(|v| v + lambda * (k + 1) as f64))
                .collect();
            for (k, s) in shifted.iter().enumerate() {
                if let Some(s) = s {
                    max_shifted = max_shifted.max(s.abs());
                    if s.abs() > bound && diverged_at.is_none_or(|d| k + 1 < d) {
                        diverged_at = Some(k + 1);
                    }
                }
            }
            let last: Vec<f64> = shifted[big_n - tail..].iter().flatten().copied().collect();
            let cauchy_gap = (last.len() == tail).then(|| {
                last.iter().copied().fold(f64::NEG_INFINITY, f64::max) - last.iter().copied().fold(f64::INFINITY, f64::min)
            });
            ProbeFixedPoint {
                label: label.clone(),
                u_hat: shifted[big_n - 1],
                bounded: shifted.iter().flatten().all(|s| s.abs() <= bound),
                shifted,
                cauchy_gap,
            }
        })
        .collect();

    let densities = probes
        .probes
        .iter()
        .map(|p| mollify(&p.measure, grid, spec))
        .collect::<Result<Vec<_>>>()?;
    let mut lipschitz = Vec::new();
    for a in 0..densities.len() {
        for b in a + 1..densities.len() {
            let d1 = w1_density(&densities[a], &densities[b])?;
            let ratios = (0..big_n)
                .map(|k| match (table.values[a][k], table.values[b][k]) {
                    (Some(x), Some(y)) if d1 > 0.0 => Some((x - y).abs() / d1),
                    _ => None,
                })
                .collect();
            lipschitz.push(LipschitzDiagnostic {
                pair: (table.labels[a].clone(), table.labels[b].clone()),
                d1,
                ratios,
            });
        }
    }
    let lipschitz_growth = if big_n >= 3 {
        lipschitz
            .iter()
            .filter_map(|l| {
                let at3 = l.ratios[2]?;
                let max = l.ratios.iter().flatten().copied().fold(0.0, f64::max);
                (at3 > 1e-12).then(|| max / at3)
            })
            .reduce(f64::max)
    } else {
        None
    };

    Ok(ErgodicReport {
        minima: table.minima(),
        table: table.clone(),
        lambda: None,
        lambda_used: lambda,
        probes: fixed,
        max_shifted,
        diverged_at,
        bound,
        lipschitz,
        lipschitz_growth,
    })
}

/// Value iteration, `λ` from the probe minima, then the shifted sequences.
pub fn ergodic_report(
    probes: &ProbeSet,
    spec: &PotentialSpec,
    grid: TorusGrid,
    horizon: usize,
    bound: f64,
    options: &MfgOptions,
) -> Result<ErgodicReport> {
    let table = value_iteration(probes, spec, grid, horizon, options)?;
    let minima = table
        .minima()
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::NonConvergence {
            what: "value iteration",
            iterations: horizon,
            gap: f64::NAN,
        })?;
    let est = estimate_lambda(&minima)?;
    let mut report = fixed_point_probe(&table, probes, spec, grid, est.lambda, bound)?;
    report.lambda = Some(est);
    Ok(report)
}

/// Blend of `y1` on `[-(n+m), -n]` and `y2` on `[-n, 0]`: `y1` up to `-n`,
/// `y2` from `-n + δ`, and `(1-s) y1(-n) + s y2(t)` with `s = (t + n)/δ`
/// in between.
pub fn concatenate_drifts(y1: &DriftPath, y2: &DriftPath, delta: f64) -> Result<DriftPath> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("junction width must lie in (0, 1), got {delta}")));
    }
    let (t1, t2) = (y1.time, y2.time);
    if y1.grid() != y2.grid() {
        return Err(Error::GridMismatch);
    }
    if (t1.dt - t2.dt).abs() > 1e-12 * t1.dt || (t1.end() - t2.start).abs() > 1e-9 {
        return Err(Error::TimeGridMismatch);
    }
    let junction = t2.start;
    let time = TimeGrid::new(t1.start, t2.end(), t1.steps + t2.steps)?;
    let last = &y1.slices[t1.steps];
    let mut slices: Vec<VectorField> = y1.slices.clone();
    for k in 1..=t2.steps {
        let s = ((t2.node(k) - junction) / delta).min(1.0);
        slices.push(if s >= 1.0 {
            y2.slices[k].clone()
        } else {
            VectorField::blend(last, &y2.slices[k], s)?
        });
    }
    DriftPath::new(time, slices)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppResidual {
    pub full_value: f64,
    pub head_action: f64,
    pub tail_value: f64,
    pub residual: f64,
}

/// Dynamic-programming residual of the semigroup `Ψ^{n+m} = Ψ^n ∘ Ψ^m`:
/// the horizon-`n+m` value against the head action over `[-(n+m), -n]`
/// plus the horizon-`n` value from the intermediate measure.
pub fn semigroup_check(
    mu: &InitialMeasure,
    f: &ScalarField,
    spec: &PotentialSpec,
    n: usize,
    m: usize,
    options: &MfgOptions,
) -> Result<DppResidual> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be at least 1".into()));
    }
    let full = hopf_lax(mu, f, spec, n + m, options)?;
    let split = m * options.steps_per_unit;
    let head_rho = full.rho.sub_path(0, split)?;
    let head_y = DriftPath::new(head_rho.time, full.drift.slices[..=split].to_vec())?;
    let head_action = running_cost(&head_rho, &head_y, spec)?;
    let middle = InitialMeasure::Density(full.rho.slices[split].clone());
    let tail = hopf_lax(&middle, f, spec, n, options)?;
    let full_value = full.value.expect("horizon solve sets the value");
    let tail_value = tail.value.expect("horizon solve sets the value");
    Ok(DppResidual {
        full_value,
        head_action,
        tail_value,
        residual: (full_value - head_action - tail_value).abs(),
    })
}

/// Action of the measure curve driven by `y` from `μ`, terminal term included.
pub fn path_action(mu: &InitialMeasure, y: &DriftPath, f: &ScalarField, spec: &PotentialSpec) -> Result<f64> {
    let rho = fp_from_measure(mu, y, spec)?;
    Ok(running_cost(&rho, y, spec)? + rho.last().field().dot(f)?)
}
