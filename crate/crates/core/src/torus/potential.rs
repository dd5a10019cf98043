use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::field::{DensityField, ScalarField};
use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// One term `amp · cos(2π(k·x) + phase) · cos(2π kt t)` of the external potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub amp: f64,
    pub k: [i32; 2],
    pub kt: i32,
    pub phase: f64,
}

impl PotentialTerm {
    pub fn new(amp: f64, k: [i32; 2], kt: i32) -> Self {
        Self {
            amp,
            k,
            kt,
            phase: 0.0,
        }
    }

    fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        let arg = 2.0 * PI * (self.k[0] as f64 * x[0] + self.k[1] as f64 * x[1]) + self.phase;
        self.amp * arg.cos() * (2.0 * PI * self.kt as f64 * t).cos()
    }
}

/// External potential `V(t,x)`, a finite trigonometric series with period 1 in `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub terms: Vec<PotentialTerm>,
}

impl Potential {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(p0: f64) -> Self {
        Self {
            terms: vec![PotentialTerm::new(p0, [0, 0], 0)],
        }
    }

    /// `amp · cos(2π x₁)`, time independent.
    pub fn cosine(amp: f64) -> Self {
        Self {
            terms: vec![PotentialTerm::new(amp, [1, 0], 0)],
        }
    }

    /// `amp · cos(2π x₁) · (1 + mod_amp · cos(2π t))`.
    pub fn modulated_cosine(amp: f64, mod_amp: f64) -> Self {
        Self {
            terms: vec![
                PotentialTerm::new(amp, [1, 0], 0),
                PotentialTerm::new(amp * mod_amp, [1, 0], 1),
            ],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.kt == 0 || t.amp == 0.0)
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|term| term.eval(t, x)).sum()
    }

    pub fn sample(&self, grid: TorusGrid, t: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(t, x))
    }
}

/// One term `amp · (1 - cos(2π k·x))` of the pair interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub amp: f64,
    pub k: [i32; 2],
}

/// Pair interaction `W(x) = Σ amp (1 - cos 2π k·x)`; even with `W(0) = 0` by construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub terms: Vec<InteractionTerm>,
}

impl Interaction {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `eps · (1 - cos 2π x₁)`.
    pub fn cosine(eps: f64) -> Self {
        Self {
            terms: vec![InteractionTerm {
                amp: eps,
                k: [1, 0],
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let arg = 2.0 * PI * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
                t.amp * (1.0 - arg.cos())
            })
            .sum()
    }

    pub fn sample(&self, grid: TorusGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }

    /// Discrete circular convolution `h^p Σ_y W(x - y) ψ(y)` for any grid
    /// function `ψ`, evaluated through the Fourier coefficients of `ψ` at the
    /// interaction frequencies; equal to the direct sum up to round-off.
    pub fn convolve(&self, psi: &ScalarField) -> ScalarField {
        let g = psi.grid();
        let vol = g.cell_volume();
        let mass = psi.integral();
        let mut out = vec![0.0; g.len()];
        for term in &self.terms {
            if term.amp == 0.0 {
                continue;
            }
            let freq = |x: [f64; 2]| 2.0 * PI * (term.k[0] as f64 * x[0] + term.k[1] as f64 * x[1]);
            // ψ̂(k) = h^p Σ ψ_j e^{-i 2π k·x_j}
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &p) in psi.values().iter().enumerate() {
                let a = freq(g.coords(j));
                re += p * a.cos();
                im -= p * a.sin();
            }
            re *= vol;
            im *= vol;
            for (i, o) in out.iter_mut().enumerate() {
                let a = freq(g.coords(i));
                // Re[e^{i a} ψ̂]
                *o += term.amp * (mass - (a.cos() * re - a.sin() * im));
            }
        }
        ScalarField::from_raw(g, out)
    }
}

/// Problem data: potential `V`, interaction `W`, viscosity parameter `β` and
/// cohomology class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v: Potential,
    pub w: Interaction,
    pub beta: f64,
    pub c: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(v: Potential, w: Interaction, beta: f64, c: Vec<f64>) -> Result<Self> {
        let spec = Self { v, w, beta, c };
        spec.validate()?;
        Ok(spec)
    }

    /// No potential and no interaction.
    pub fn free(beta: f64, c: Vec<f64>) -> Result<Self> {
        Self::new(Potential::zero(), Interaction::zero(), beta, c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.c.is_empty() || self.c.len() > 2 || self.c.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "c must have 1 or 2 finite entries".into(),
            ));
        }
        Ok(())
    }

    /// Diffusion coefficient `1/(2β)`.
    pub fn diffusion(&self) -> f64 {
        0.5 / self.beta
    }

    /// Component `a` of `c` (zero beyond its length).
    pub fn c_at(&self, a: usize) -> f64 {
        self.c.get(a).copied().unwrap_or(0.0)
    }

    /// `|c|^2 / 2`.
    pub fn half_c_squared(&self) -> f64 {
        0.5 * self.c.iter().map(|c| c * c).sum::<f64>()
    }

    pub fn check_grid(&self, grid: TorusGrid) -> Result<()> {
        if self.c.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "c has {} components but the grid has dimension {}",
                self.c.len(),
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// `P_ψ(t,·) = V(t,·) + W * ψ`.
pub fn compose_pressure(spec: &PotentialSpec, psi: &DensityField, t: f64) -> ScalarField {
    compose_pressure_weighted(spec, psi.field(), t, 1.0)
}

/// `V(t,·) + weight · (W * ψ)` for an arbitrary grid function `ψ`.
pub fn compose_pressure_weighted(
    spec: &PotentialSpec,
    psi: &ScalarField,
    t: f64,
    weight: f64,
) -> ScalarField {
    let g = psi.grid();
    let mut p = spec.v.sample(g, t);
    if !spec.w.is_zero() && weight != 0.0 {
        let conv = spec.w.convolve(psi);
        for (pv, cv) in p.values_mut().iter_mut().zip(conv.values()) {
            *pv += weight * cv;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::ops::c3_norm;

    fn direct_convolution(w: &ScalarField, psi: &ScalarField) -> ScalarField {
        let g = psi.grid();
        let n = g.n();
        let out = (0..g.len())
            .map(|i| {
                let mi = g.multi_index(i);
                (0..g.len())
                    .map(|j| {
                        let mj = g.multi_index(j);
                        let d = g.flat_index([(mi[0] + n - mj[0]) % n, (mi[1] + n - mj[1]) % n]);
                        w.values()[d] * psi.values()[j]
                    })
                    .sum::<f64>()
                    * g.cell_volume()
            })
            .collect();
        ScalarField::new(g, out).unwrap()
    }

    #[test]
    fn no_interaction_gives_external_potential() {
        let g = TorusGrid::new(1, 32).unwrap();
        let spec = PotentialSpec::new(
            Potential::modulated_cosine(0.3, 0.5),
            Interaction::zero(),
            1.0,
            vec![0.0],
        )
        .unwrap();
        let psi = DensityField::grid_dirac(g, 5);
        assert_eq!(compose_pressure(&spec, &psi, 0.3), spec.v.sample(g, 0.3));
    }

    #[test]
    fn uniform_density_adds_mean_of_w() {
        let g = TorusGrid::new(1, 32).unwrap();
        let eps = 0.1;
        let spec = PotentialSpec::new(
            Potential::cosine(0.3),
            Interaction::cosine(eps),
            1.0,
            vec![0.0],
        )
        .unwrap();
        let p = compose_pressure(&spec, &DensityField::uniform(g), 0.0);
        let v = spec.v.sample(g, 0.0);
        for (a, b) in p.values().iter().zip(v.values()) {
            assert!((a - b - eps).abs() < 1e-14);
        }
    }

    #[test]
    fn dirac_translates_w() {
        let g = TorusGrid::new(2, 16).unwrap();
        let w = Interaction {
            terms: vec![
                InteractionTerm {
                    amp: 0.1,
                    k: [1, 0],
                },
                InteractionTerm {
                    amp: 0.05,
                    k: [1, 2],
                },
            ],
        };
        let spec = PotentialSpec::new(Potential::zero(), w, 1.0, vec![0.0, 0.0]).unwrap();
        let node = g.flat_index([3, 11]);
        let x0 = g.coords(node);
        let p = compose_pressure(&spec, &DensityField::grid_dirac(g, node), 0.0);
        for (i, v) in p.values().iter().enumerate() {
            let x = g.coords(i);
            let expect = spec.w.eval([x[0] - x0[0], x[1] - x0[1]]);
            assert!((v - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn fourier_convolution_matches_direct_sum() {
        let g = TorusGrid::new(1, 32).unwrap();
        let w = Interaction::cosine(0.2);
        let psi = ScalarField::from_fn(g, |x| {
            1.0 + 0.5 * (2.0 * PI * x[0]).sin() + 0.2 * (6.0 * PI * x[0]).cos()
        });
        let a = w.convolve(&psi);
        let b = direct_convolution(&w.sample(g), &psi);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn pressure_c3_bound() {
        let g = TorusGrid::new(1, 64).unwrap();
        let spec = PotentialSpec::new(
            Potential::modulated_cosine(0.3, 0.5),
            Interaction::cosine(0.1),
            1.0,
            vec![0.0],
        )
        .unwrap();
        let w = spec.w.sample(g);
        for t in [0.0, 0.25, 0.6] {
            for psi in [DensityField::uniform(g), DensityField::grid_dirac(g, 7)] {
                let p = compose_pressure(&spec, &psi, t);
                assert!(c3_norm(&p) <= c3_norm(&spec.v.sample(g, t)) + c3_norm(&w) + 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(PotentialSpec::free(-1.0, vec![0.0]).is_err());
        assert!(PotentialSpec::free(0.0, vec![0.0]).is_err());
    }
}
