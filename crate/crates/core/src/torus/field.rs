use serde::{Deserialize, Serialize};

use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Absolute tolerance on the mass of a density.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample `f` at the grid nodes.
    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rectangle-rule integral `h^p Σ f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `h^p Σ f g`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    /// Multilinear interpolation at an arbitrary point of the torus.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let g = self.grid;
        let n = g.n();
        let nf = n as f64;
        let locate = |c: f64| {
            let s = c.rem_euclid(1.0) * nf;
            let i = s.floor();
            let frac = s - i;
            let i = (i as usize) % n;
            (i, (i + 1) % n, frac)
        };
        match g.dim() {
            1 => {
                let (i0, i1, f) = locate(x[0]);
                (1.0 - f) * self.values[i0] + f * self.values[i1]
            }
            _ => {
                let (i0, i1, fx) = locate(x[0]);
                let (j0, j1, fy) = locate(x[1]);
                let v = |i: usize, j: usize| self.values[i + n * j];
                (1.0 - fy) * ((1.0 - fx) * v(i0, j0) + fx * v(i1, j0))
                    + fy * ((1.0 - fx) * v(i0, j1) + fx * v(i1, j1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid = components.first().ok_or(Error::GridMismatch)?.grid();
        if components.len() != grid.dim() || components.iter().any(|c| c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, components })
    }

    pub fn constant(grid: TorusGrid, c: &[f64]) -> Self {
        let components = (0..grid.dim())
            .map(|a| ScalarField::constant(grid, c.get(a).copied().unwrap_or(0.0)))
            .collect();
        Self { grid, components }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, &[0.0, 0.0])
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    /// `|Y|^2` at every node.
    pub fn norm_squared(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += v * v;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_squared()
            .values()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.sqrt()))
    }

    pub fn interpolate(&self, x: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, c) in self.components.iter().enumerate() {
            out[a] = c.interpolate(x);
        }
        out
    }

    /// Convex combination `(1-s) a + s b`.
    pub fn blend(a: &Self, b: &Self, s: f64) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        let components = a
            .components
            .iter()
            .zip(&b.components)
            .map(|(x, y)| x.zip_map(y, |p, q| (1.0 - s) * p + s * q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: a.grid,
            components,
        })
    }
}

/// A probability density on the grid: nonnegative with `h^p Σ ρ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField(ScalarField);

impl DensityField {
    pub fn new(field: ScalarField) -> Result<Self> {
        let mass = field.integral();
        let min = field.min();
        if min < 0.0 || (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotNormalized { mass, min });
        }
        Ok(Self(field))
    }

    /// Rescale a nonnegative field to unit mass.
    pub fn normalize(field: ScalarField) -> Result<Self> {
        let mass = field.integral();
        let min = field.min();
        if min < 0.0 || mass <= 0.0 || !mass.is_finite() {
            return Err(Error::NotNormalized { mass, min });
        }
        Self::new(field.map(|v| v / mass))
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        Self(ScalarField::constant(grid, 1.0))
    }

    /// Unit mass concentrated on one node (value `1/h^p` there).
    pub fn grid_dirac(grid: TorusGrid, node: usize) -> Self {
        let mut values = vec![0.0; grid.len()];
        values[node] = 1.0 / grid.cell_volume();
        Self(ScalarField::from_raw(grid, values))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn grid(&self) -> TorusGrid {
        self.0.grid()
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    /// Convex combination of two densities (stays normalized).
    pub fn mix(a: &Self, b: &Self, s: f64) -> Result<Self> {
        let f = a.0.zip_map(&b.0, |p, q| (1.0 - s) * p + s * q)?;
        Ok(Self(f))
    }

    /// `h^p Σ |μ - ν|`.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        let d = self.0.zip_map(&other.0, |a, b| (a - b).abs())?;
        Ok(d.integral())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.0.zip_map(&other.0, |a, b| (a - b).abs())?.max())
    }
}
