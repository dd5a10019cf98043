//! Periodic finite-difference operators.
//!
//! `gradient` and `divergence` use the centered two-point stencil, `laplacian`
//! the compact three-point stencil per axis. The staggered pair
//! `forward_gradient` / `backward_divergence` composes to `laplacian` exactly.

use super::field::{ScalarField, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Gradient,
    Divergence,
    Laplacian,
    ForwardGradient,
    BackwardDivergence,
}

#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl FieldValue {
    pub fn into_scalar(self) -> Option<ScalarField> {
        match self {
            FieldValue::Scalar(s) => Some(s),
            FieldValue::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<VectorField> {
        match self {
            FieldValue::Vector(v) => Some(v),
            FieldValue::Scalar(_) => None,
        }
    }
}

pub fn apply_operator(kind: OperatorKind, f: FieldRef<'_>) -> Result<FieldValue> {
    use OperatorKind::*;
    match (kind, f) {
        (Gradient, FieldRef::Scalar(s)) => Ok(FieldValue::Vector(gradient(s))),
        (ForwardGradient, FieldRef::Scalar(s)) => Ok(FieldValue::Vector(forward_gradient(s))),
        (Laplacian, FieldRef::Scalar(s)) => Ok(FieldValue::Scalar(laplacian(s))),
        (Divergence, FieldRef::Vector(v)) => Ok(FieldValue::Scalar(divergence(v))),
        (BackwardDivergence, FieldRef::Vector(v)) => Ok(FieldValue::Scalar(backward_divergence(v))),
        _ => Err(Error::InvalidArgument(format!(
            "operator {kind:?} does not accept this field type"
        ))),
    }
}

/// Centered difference `(f(x+h e_a) - f(x-h e_a)) / 2h`.
pub fn centered_difference(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let inv = 0.5 / g.h();
    let v = f.values();
    let out = (0..g.len())
        .map(|i| (v[g.shift(i, axis, 1)] - v[g.shift(i, axis, -1)]) * inv)
        .collect();
    ScalarField::from_raw(g, out)
}

/// Compact second difference along one axis.
pub fn second_difference(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let inv = 1.0 / (g.h() * g.h());
    let v = f.values();
    let out = (0..g.len())
        .map(|i| (v[g.shift(i, axis, 1)] - 2.0 * v[i] + v[g.shift(i, axis, -1)]) * inv)
        .collect();
    ScalarField::from_raw(g, out)
}

fn one_sided_difference(f: &ScalarField, axis: usize, forward: bool) -> ScalarField {
    let g = f.grid();
    let inv = 1.0 / g.h();
    let v = f.values();
    let out = (0..g.len())
        .map(|i| {
            if forward {
                (v[g.shift(i, axis, 1)] - v[i]) * inv
            } else {
                (v[i] - v[g.shift(i, axis, -1)]) * inv
            }
        })
        .collect();
    ScalarField::from_raw(g, out)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim())
        .map(|a| centered_difference(f, a))
        .collect();
    VectorField::new(comps).expect("components share the grid")
}

pub fn forward_gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim())
        .map(|a| one_sided_difference(f, a, true))
        .collect();
    VectorField::new(comps).expect("components share the grid")
}

fn sum_components(y: &VectorField, op: impl Fn(&ScalarField, usize) -> ScalarField) -> ScalarField {
    let g = y.grid();
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dim() {
        let d = op(y.component(a), a);
        for (o, v) in out.iter_mut().zip(d.values()) {
            *o += v;
        }
    }
    ScalarField::from_raw(g, out)
}

pub fn divergence(y: &VectorField) -> ScalarField {
    sum_components(y, centered_difference)
}

pub fn backward_divergence(y: &VectorField) -> ScalarField {
    sum_components(y, |f, a| one_sided_difference(f, a, false))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dim() {
        let d = second_difference(f, a);
        for (o, v) in out.iter_mut().zip(d.values()) {
            *o += v;
        }
    }
    ScalarField::from_raw(g, out)
}

/// Discrete C^3 norm: sup of |f| plus the sups of all first, second and third
/// difference quotients (third = centered difference of a second difference).
pub fn c3_norm(f: &ScalarField) -> f64 {
    let dim = f.grid().dim();
    let mut total = f.sup_norm();

    let firsts: Vec<ScalarField> = (0..dim).map(|a| centered_difference(f, a)).collect();
    total += firsts.iter().map(ScalarField::sup_norm).fold(0.0, f64::max);

    // second derivatives: pure ones compact, mixed ones centered∘centered
    let mut seconds: Vec<(usize, usize, ScalarField)> = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            let d = if a == b {
                second_difference(f, a)
            } else {
                centered_difference(&firsts[a], b)
            };
            seconds.push((a, b, d));
        }
    }
    total += seconds.iter().map(|s| s.2.sup_norm()).fold(0.0, f64::max);

    let mut third = 0.0_f64;
    for (_, _, s) in &seconds {
        for c in 0..dim {
            third = third.max(centered_difference(s, c).sup_norm());
        }
    }
    total + third
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::grid::TorusGrid;
    use std::f64::consts::PI;

    fn cosine(g: TorusGrid, a: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| a * (2.0 * PI * x[0]).cos())
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = TorusGrid::new(2, 16).unwrap();
        let y = gradient(&ScalarField::constant(g, 3.5));
        assert_eq!(y.sup_norm(), 0.0);
    }

    #[test]
    fn laplacian_symbol_on_cosine() {
        let g = TorusGrid::new(1, 128).unwrap();
        let h = g.h();
        let f = cosine(g, 1.0);
        let lap = laplacian(&f);
        let symbol = -(2.0 / (h * h)) * (1.0 - (2.0 * PI * h).cos());
        for (i, v) in lap.values().iter().enumerate() {
            let x = g.coords(i)[0];
            assert!((v - symbol * (2.0 * PI * x).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_stencil_on_sine() {
        let g = TorusGrid::new(1, 64).unwrap();
        let h = g.h();
        let y =
            VectorField::new(vec![ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin())]).unwrap();
        let d = divergence(&y);
        for (i, v) in d.values().iter().enumerate() {
            let x = g.coords(i)[0];
            let expect = ((2.0 * PI * (x + h)).sin() - (2.0 * PI * (x - h)).sin()) / (2.0 * h);
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn staggered_pair_composes_to_laplacian() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + x[0] * x[1]
        });
        let lhs = backward_divergence(&forward_gradient(&f));
        let rhs = laplacian(&f);
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn apply_operator_rejects_wrong_field_kind() {
        let g = TorusGrid::new(1, 8).unwrap();
        let f = ScalarField::zeros(g);
        assert!(apply_operator(OperatorKind::Divergence, FieldRef::Scalar(&f)).is_err());
        let out = apply_operator(OperatorKind::Laplacian, FieldRef::Scalar(&f)).unwrap();
        assert!(out.into_scalar().is_some());
    }

    #[test]
    fn c3_norm_examples() {
        let g = TorusGrid::new(1, 64).unwrap();
        assert_eq!(c3_norm(&ScalarField::zeros(g)), 0.0);
        assert_eq!(c3_norm(&ScalarField::constant(g, 5.0)), 5.0);
        let h = g.h();
        let a = 0.7;
        let s1 = (2.0 * PI * h).sin() / h;
        let s2 = 2.0 * (1.0 - (2.0 * PI * h).cos()) / (h * h);
        let s3 = s2 * s1;
        let expect = a * (1.0 + s1 + s2 + s3);
        assert!((c3_norm(&cosine(g, a)) - expect).abs() < 1e-9 * expect);
    }
}
