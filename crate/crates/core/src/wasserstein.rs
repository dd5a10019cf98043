//! Wasserstein-1 distances with the periodic (circle) ground cost.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{
    circle_distance, torus_distance, DensityField, DensityPath, ScalarField, TorusGrid,
};

/// Largest point count accepted by the two-dimensional assignment solver.
pub const MAX_ASSIGNMENT: usize = 64;

/// Equal-weight point cloud `(1/n) Σ δ_{z_i}` on `T^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<[f64; 2]>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<[f64; 2]>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical measure needs at least one point".into(),
            ));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let points = points
            .into_iter()
            .map(|p| {
                let mut q = [p[0].rem_euclid(1.0), 0.0];
                if dim == 2 {
                    q[1] = p[1].rem_euclid(1.0);
                }
                q.map(|x| if x >= 1.0 { 0.0 } else { x })
            })
            .collect();
        Ok(Self { dim, points })
    }

    /// One-dimensional convenience constructor.
    pub fn on_circle(points: &[f64]) -> Result<Self> {
        Self::new(1, points.iter().map(|&x| [x, 0.0]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Assign each point to its nearest grid node.
    pub fn bin(&self, grid: TorusGrid) -> Result<DensityField> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch);
        }
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        let w = 1.0 / (self.len() as f64 * grid.cell_volume());
        for p in &self.points {
            let mut mi = [0usize; 2];
            for a in 0..self.dim {
                mi[a] = ((p[a] * n as f64).round() as usize) % n;
            }
            values[grid.flat_index(mi)] += w;
        }
        DensityField::normalize(ScalarField::new(grid, values)?)
    }
}

fn check_pair(mu: &DensityField, nu: &DensityField) -> Result<()> {
    if mu.grid() != nu.grid() {
        return Err(Error::GridMismatch);
    }
    for d in [mu, nu] {
        DensityField::new(d.field().clone())?;
    }
    Ok(())
}

/// `d₁(μ, ν)` between grid densities.
///
/// On the circle this is exact for the node masses: `min_t h Σ |G_k - t|`
/// with `G` the cumulative mass difference, minimised at a median of `G`.
/// On `T²` it is the grid transport distance ("grid-d₁"): a min-cost flow
/// along nearest-neighbour edges of length `h`, solved as a linear program.
/// Its ground cost is the periodic Manhattan distance between nodes, so it
/// bounds the Euclidean `d₁` from above.
pub fn w1_density(mu: &DensityField, nu: &DensityField) -> Result<f64> {
    check_pair(mu, nu)?;
    match mu.grid().dim() {
        1 => Ok(w1_circle(mu, nu)),
        _ => w1_grid_flow(mu, nu),
    }
}

fn w1_circle(mu: &DensityField, nu: &DensityField) -> f64 {
    let h = mu.grid().h();
    let mut acc = 0.0;
    let mut g: Vec<f64> = mu
        .values()
        .iter()
        .zip(nu.values())
        .map(|(a, b)| {
            acc += h * (a - b);
            acc
        })
        .collect();
    let mut sorted = g.clone();
    let mid = sorted.len() / 2;
    let (_, median, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    let t = *median;
    for x in &mut g {
        *x = (*x - t).abs();
    }
    h * g.iter().sum::<f64>()
}

fn w1_grid_flow(mu: &DensityField, nu: &DensityField) -> Result<f64> {
    let grid = mu.grid();
    let h = grid.h();
    let vol = grid.cell_volume();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let inf = f64::INFINITY;
    // per node and axis: flow forward and backward along the edge to the + neighbour
    let vars: Vec<[minilp::Variable; 4]> = (0..grid.len())
        .map(|_| {
            [
                lp.add_var(h, (0.0, inf)),
                lp.add_var(h, (0.0, inf)),
                lp.add_var(h, (0.0, inf)),
                lp.add_var(h, (0.0, inf)),
            ]
        })
        .collect();
    // drop the last node: the balance equations sum to zero
    for i in 0..grid.len() - 1 {
        let mut terms = Vec::with_capacity(8);
        for axis in 0..2 {
            let (fwd, bwd) = (2 * axis, 2 * axis + 1);
            let prev = grid.shift(i, axis, -1);
            terms.push((vars[i][fwd], 1.0));
            terms.push((vars[i][bwd], -1.0));
            terms.push((vars[prev][fwd], -1.0));
            terms.push((vars[prev][bwd], 1.0));
        }
        let supply = vol * (mu.values()[i] - nu.values()[i]);
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, supply);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?;
    Ok(sol.objective().max(0.0))
}

/// `(1/n) min_σ Σ dist(a_i, b_σ(i))`.
pub fn w1_empirical(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "point counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch);
    }
    let n = a.len();
    if a.dim() == 1 {
        let mut x: Vec<f64> = a.points.iter().map(|p| p[0]).collect();
        let mut y: Vec<f64> = b.points.iter().map(|p| p[0]).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        // the optimal matching on the circle is a cyclic shift of the sorted order
        let best = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| circle_distance(x[i], y[(i + k) % n]))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        return Ok(best / n as f64);
    }
    if n > MAX_ASSIGNMENT {
        return Err(Error::InvalidArgument(format!(
            "exact assignment limited to {MAX_ASSIGNMENT} points, got {n}"
        )));
    }
    let cost: Vec<Vec<f64>> = a
        .points
        .iter()
        .map(|p| b.points.iter().map(|q| torus_distance(2, *p, *q)).collect())
        .collect();
    Ok(assignment_cost(&cost) / n as f64)
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials).
pub fn assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

/// `sup_t d₁(R₁(t), R₂(t))` over the shared time nodes.
pub fn curve_distance(r1: &DensityPath, r2: &DensityPath) -> Result<f64> {
    if !r1.time.same_as(&r2.time) {
        return Err(Error::TimeGridMismatch);
    }
    let mut m = 0.0_f64;
    for (a, b) in r1.slices.iter().zip(&r2.slices) {
        m = m.max(w1_density(a, b)?);
    }
    Ok(m)
}
