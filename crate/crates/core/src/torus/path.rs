use serde::{Deserialize, Serialize};

use super::field::{DensityField, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Uniform time grid `start + k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "time grid needs end > start and steps > 0 (got [{start}, {end}], {steps})"
            )));
        }
        Ok(Self {
            start,
            dt: (end - start) / steps as f64,
            steps,
        })
    }

    /// One period `[0, 1]`.
    pub fn unit_period(steps: usize) -> Result<Self> {
        Self::new(0.0, 1.0, steps)
    }

    /// Horizon `[-m, 0]` with `steps_per_unit` steps per unit time.
    pub fn horizon(m: usize, steps_per_unit: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Self::new(-(m as f64), 0.0, m * steps_per_unit)
    }

    pub fn end(&self) -> f64 {
        self.start + self.dt * self.steps as f64
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start + self.dt * k as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sub-grid of nodes `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.steps {
            return Err(Error::InvalidArgument(format!(
                "bad node range {from}..={to}"
            )));
        }
        Ok(Self {
            start: self.node(from),
            dt: self.dt,
            steps: to - from,
        })
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.steps == other.steps
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.abs()
            && (self.start - other.start).abs() <= 1e-9
    }

    /// Index of the node closest to `t`, if it is within `1e-9` of a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.dt).round();
        if k < 0.0 || k as usize > self.steps {
            return None;
        }
        ((self.node(k as usize) - t).abs() < 1e-9).then_some(k as usize)
    }
}

/// Where a density path came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialTag {
    Density,
    Diracs(Vec<([f64; 2], f64)>),
    Mixture,
    Periodic,
}

/// A curve of densities sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPath {
    pub time: TimeGrid,
    pub slices: Vec<DensityField>,
    pub initial: Option<InitialTag>,
}

impl DensityPath {
    pub fn new(time: TimeGrid, slices: Vec<DensityField>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::TimeGridMismatch);
        }
        let g = slices[0].grid();
        if slices.iter().any(|s| s.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            time,
            slices,
            initial: None,
        })
    }

    /// The same density at every time node.
    pub fn constant(time: TimeGrid, rho: DensityField) -> Self {
        Self {
            time,
            slices: vec![rho; time.len()],
            initial: None,
        }
    }

    pub fn with_tag(mut self, tag: InitialTag) -> Self {
        self.initial = Some(tag);
        self
    }

    pub fn grid(&self) -> super::TorusGrid {
        self.slices[0].grid()
    }

    pub fn first(&self) -> &DensityField {
        &self.slices[0]
    }

    pub fn last(&self) -> &DensityField {
        self.slices.last().expect("path is nonempty")
    }

    pub fn is_periodic(&self, tol: f64) -> bool {
        self.first()
            .sup_distance(self.last())
            .map(|d| d <= tol)
            .unwrap_or(false)
    }

    /// Pointwise convex combination `(1-s) a + s b`.
    pub fn mix(a: &Self, b: &Self, s: f64) -> Result<Self> {
        if !a.time.same_as(&b.time) {
            return Err(Error::TimeGridMismatch);
        }
        let slices = a
            .slices
            .iter()
            .zip(&b.slices)
            .map(|(x, y)| DensityField::mix(x, y, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            time: a.time,
            slices,
            initial: a.initial.clone(),
        })
    }

    /// Largest nodewise difference over all slices.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if !self.time.same_as(&other.time) {
            return Err(Error::TimeGridMismatch);
        }
        let mut m = 0.0_f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            m = m.max(a.sup_distance(b)?);
        }
        Ok(m)
    }

    /// Nodes `from..=to` as a new path.
    pub fn sub_path(&self, from: usize, to: usize) -> Result<Self> {
        let time = self.time.slice(from, to)?;
        Ok(Self {
            time,
            slices: self.slices[from..=to].to_vec(),
            initial: None,
        })
    }
}

/// A time-sampled scalar field, e.g. `P(t,·)` or `u(t,·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPath {
    pub time: TimeGrid,
    pub slices: Vec<ScalarField>,
}

impl ScalarPath {
    pub fn new(time: TimeGrid, slices: Vec<ScalarField>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::TimeGridMismatch);
        }
        let g = slices[0].grid();
        if slices.iter().any(|s| s.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { time, slices })
    }

    pub fn constant(time: TimeGrid, f: ScalarField) -> Self {
        Self {
            time,
            slices: vec![f; time.len()],
        }
    }

    pub fn grid(&self) -> super::TorusGrid {
        self.slices[0].grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(ScalarField::sup_norm)
            .fold(0.0, f64::max)
    }
}

/// A time-sampled vector field (drift).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPath {
    pub time: TimeGrid,
    pub slices: Vec<VectorField>,
}

impl DriftPath {
    pub fn new(time: TimeGrid, slices: Vec<VectorField>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::TimeGridMismatch);
        }
        let g = slices[0].grid();
        if slices.iter().any(|s| s.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { time, slices })
    }

    pub fn constant(time: TimeGrid, y: VectorField) -> Self {
        Self {
            time,
            slices: vec![y; time.len()],
        }
    }

    pub fn grid(&self) -> super::TorusGrid {
        self.slices[0].grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(VectorField::sup_norm)
            .fold(0.0, f64::max)
    }

    /// Drift at an arbitrary time, linear between nodes and clamped at the ends.
    pub fn at_time(&self, t: f64) -> VectorField {
        let s = ((t - self.time.start) / self.time.dt).clamp(0.0, self.time.steps as f64);
        let k = (s.floor() as usize).min(self.time.steps.saturating_sub(1));
        let frac = s - k as f64;
        if frac <= 0.0 {
            return self.slices[k].clone();
        }
        if self.time.steps == 0 {
            return self.slices[0].clone();
        }
        VectorField::blend(&self.slices[k], &self.slices[k + 1], frac)
            .expect("slices share the grid")
    }

    /// Evaluate at `(t, x)` by multilinear interpolation.
    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let s = ((t - self.time.start) / self.time.dt).clamp(0.0, self.time.steps as f64);
        let k = (s.floor() as usize).min(self.time.steps.saturating_sub(1));
        let frac = s - k as f64;
        let a = self.slices[k].interpolate(x);
        if frac <= 0.0 {
            return a;
        }
        let b = self.slices[k + 1].interpolate(x);
        [
            (1.0 - frac) * a[0] + frac * b[0],
            (1.0 - frac) * a[1] + frac * b[1],
        ]
    }

    /// Largest nodewise difference `|Y_a - Y_b|` over all slices.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if !self.time.same_as(&other.time) {
            return Err(Error::TimeGridMismatch);
        }
        let mut m = 0.0_f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            for (ca, cb) in a.components().iter().zip(b.components()) {
                m = m.max(ca.zip_map(cb, |p, q| (p - q).abs())?.max());
            }
        }
        Ok(m)
    }
}
