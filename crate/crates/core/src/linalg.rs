//! Small linear-algebra kernels used by the solvers: exact exponentials of
//! constant-coefficient circulant operators, the cyclic tridiagonal solve, and
//! nearest-neighbour stencil matrices with a BiCGSTAB fallback for `p = 2`.

use crate::error::{Error, Result};
use crate::torus::TorusGrid;

/// `exp(τ (D Δ_h + c ∂_h))` in one dimension, stored as the first column of
/// the circulant matrix.
#[derive(Debug, Clone)]
pub struct CirculantExp {
    kernel: Vec<f64>,
}

impl CirculantExp {
    pub fn new(n: usize, h: f64, diffusion: f64, drift: f64, tau: f64) -> Self {
        let nf = n as f64;
        let mut kernel = vec![0.0; n];
        let modes: Vec<(f64, f64, f64)> = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / nf;
                let re = diffusion * 2.0 * (theta.cos() - 1.0) / (h * h);
                let im = drift * theta.sin() / h;
                ((tau * re).exp(), tau * im, theta)
            })
            .collect();
        for (m, slot) in kernel.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(mag, phase, theta) in &modes {
                acc += mag * (phase + theta * m as f64).cos();
            }
            *slot = acc / nf;
        }
        // the zero mode has symbol 0, so the row sum is exactly 1
        let sum: f64 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= sum;
        }
        Self { kernel }
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Smallest kernel entry relative to the largest; negative means the
    /// exponential is not positivity preserving.
    pub fn min_relative_entry(&self) -> f64 {
        let max = self
            .kernel
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        self.kernel.iter().copied().fold(f64::INFINITY, f64::min) / max
    }

    /// `out_j = Σ_m kernel[m] f_{(j - m) mod n}` over a strided 1-D line.
    fn apply_line(&self, input: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.kernel.len();
        scratch.clear();
        scratch.extend_from_slice(input);
        scratch.extend_from_slice(input);
        // f_{(j-m) mod n} = scratch[j - m + n]
        for (j, o) in out.iter_mut().enumerate() {
            let window = &scratch[j + 1..j + n + 1];
            // window[n - 1 - m] = f_{j - m + n}
            let mut acc = 0.0;
            for (kv, fv) in self.kernel.iter().zip(window.iter().rev()) {
                acc += kv * fv;
            }
            *o = acc;
        }
    }

    /// Apply along `axis` of a field stored on `grid`.
    pub fn apply_axis(&self, grid: TorusGrid, axis: usize, values: &mut [f64]) {
        let n = grid.n();
        let mut scratch = Vec::with_capacity(2 * n);
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        match (grid.dim(), axis) {
            (1, _) => {
                line.copy_from_slice(values);
                self.apply_line(&line, &mut out, &mut scratch);
                values.copy_from_slice(&out);
            }
            (_, 0) => {
                for row in values.chunks_mut(n) {
                    line.copy_from_slice(row);
                    self.apply_line(&line, &mut out, &mut scratch);
                    row.copy_from_slice(&out);
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        line[j] = values[i + n * j];
                    }
                    self.apply_line(&line, &mut out, &mut scratch);
                    for j in 0..n {
                        values[i + n * j] = out[j];
                    }
                }
            }
        }
    }
}

/// Solve a tridiagonal system with corner entries (periodic wrap).
///
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// with indices taken modulo `n`.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    let alpha = upper[n - 1]; // A[n-1][0]
    let beta = lower[0]; // A[0][n-1]
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;

    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;

    let (x, z) = thomas_pair(lower, &bb, upper, rhs, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Thomas algorithm on two right-hand sides sharing one factorization.
fn thomas_pair(a: &[f64], b: &[f64], c: &[f64], r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut bet = b[0];
    x[0] = r1[0] / bet;
    z[0] = r2[0] / bet;
    for i in 1..n {
        cp[i] = c[i - 1] / bet;
        bet = b[i] - a[i] * cp[i];
        x[i] = (r1[i] - a[i] * x[i - 1]) / bet;
        z[i] = (r2[i] - a[i] * z[i - 1]) / bet;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i + 1] * x[i + 1];
        z[i] -= cp[i + 1] * z[i + 1];
    }
    (x, z)
}

/// Nearest-neighbour operator on a periodic grid:
/// `(A f)_i = diag_i f_i + Σ_k nb_i[k] f_{neighbour k of i}` with neighbours
/// ordered `(-x, +x, -y, +y)`.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    grid: TorusGrid,
    pub diag: Vec<f64>,
    pub nb: Vec<[f64; 4]>,
}

impl StencilMatrix {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            diag: vec![0.0; grid.len()],
            nb: vec![[0.0; 4]; grid.len()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    fn neighbours(&self, i: usize) -> [usize; 4] {
        let g = self.grid;
        if g.dim() == 1 {
            let n = g.n();
            [(i + n - 1) % n, (i + 1) % n, i, i]
        } else {
            [
                g.shift(i, 0, -1),
                g.shift(i, 0, 1),
                g.shift(i, 1, -1),
                g.shift(i, 1, 1),
            ]
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let k = 2 * self.grid.dim();
        (0..f.len())
            .map(|i| {
                let nbs = self.neighbours(i);
                let mut acc = self.diag[i] * f[i];
                for j in 0..k {
                    acc += self.nb[i][j] * f[nbs[j]];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let k = 2 * self.grid.dim();
        let mut t = Self::zeros(self.grid);
        t.diag.clone_from(&self.diag);
        for i in 0..self.diag.len() {
            let nbs = self.neighbours(i);
            for j in 0..k {
                // i is the opposite-direction neighbour of nbs[j]
                t.nb[nbs[j]][j ^ 1] = self.nb[i][j];
            }
        }
        t
    }

    /// `(I + τ A) f`.
    pub fn apply_shifted(&self, tau: f64, f: &[f64]) -> Vec<f64> {
        let af = self.apply(f);
        f.iter().zip(af).map(|(x, a)| x + tau * a).collect()
    }

    /// Column sums; zero for a conservative generator.
    pub fn column_sums(&self) -> Vec<f64> {
        let k = 2 * self.grid.dim();
        let mut s = self.diag.clone();
        for i in 0..self.diag.len() {
            let nbs = self.neighbours(i);
            for j in 0..k {
                s[nbs[j]] += self.nb[i][j];
            }
        }
        s
    }

    /// Solve `(I - τ A) x = rhs`.
    pub fn solve_shifted(&self, tau: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.grid.dim() == 1 {
            let lower: Vec<f64> = self.nb.iter().map(|c| -tau * c[0]).collect();
            let upper: Vec<f64> = self.nb.iter().map(|c| -tau * c[1]).collect();
            let diag: Vec<f64> = self.diag.iter().map(|d| 1.0 - tau * d).collect();
            Ok(solve_cyclic_tridiagonal(&lower, &diag, &upper, rhs))
        } else {
            self.bicgstab_shifted(tau, rhs)
        }
    }

    fn bicgstab_shifted(&self, tau: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let op = |x: &[f64]| -> Vec<f64> {
            let ax = self.apply(x);
            x.iter().zip(ax).map(|(xi, a)| xi - tau * a).collect()
        };
        let pdiag: Vec<f64> = self.diag.iter().map(|d| 1.0 / (1.0 - tau * d)).collect();
        let precond =
            |v: &[f64]| -> Vec<f64> { v.iter().zip(&pdiag).map(|(a, p)| a * p).collect() };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let norm_b = dot(b, b).sqrt();
        if norm_b == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = precond(b);
        let ax = op(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let tol = 1e-15 * norm_b;
        for _ in 0..2000 {
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let p_hat = precond(&p);
            v = op(&p_hat);
            alpha = rho_new / dot(&r_hat, &v);
            let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            if dot(&s, &s).sqrt() < tol {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                return Ok(x);
            }
            let s_hat = precond(&s);
            let t = op(&s_hat);
            omega = dot(&t, &s) / dot(&t, &t);
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            rho = rho_new;
            if dot(&r, &r).sqrt() < tol {
                return Ok(x);
            }
        }
        Err(Error::NonConvergence {
            what: "BiCGSTAB",
            iterations: 2000,
            gap: dot(&r, &r).sqrt() / norm_b,
        })
    }
}
