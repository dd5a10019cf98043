//! Forward solver against a dense matrix exponential, the second scheme and
//! long-run evolution.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use viscous_mather::fokker_planck::{
    fp_evolve, fp_evolve_with, fp_periodic_steady, fp_periodic_steady_from, FpOptions, FpScheme,
};
use viscous_mather::torus::{
    DensityField, DriftPath, PotentialSpec, ScalarField, TimeGrid, TorusGrid, VectorField,
};

/// Centered conservative generator written out densely.
fn dense_generator(y: &[f64], d: f64, h: f64) -> DMatrix<f64> {
    let n = y.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let (l, r) = ((i + n - 1) % n, (i + 1) % n);
        g[(i, i)] = -2.0 * d / (h * h);
        g[(i, r)] = d / (h * h) - y[r] / (2.0 * h);
        g[(i, l)] = d / (h * h) + y[l] / (2.0 * h);
    }
    g
}

fn drift_1d(g: TorusGrid, time: TimeGrid, f: impl Fn(f64, f64) -> f64) -> DriftPath {
    let slices = (0..time.len())
        .map(|k| {
            let t = time.node(k);
            VectorField::new(vec![ScalarField::from_fn(g, |x| f(t, x[0]))]).unwrap()
        })
        .collect();
    DriftPath::new(time, slices).unwrap()
}

#[test]
fn matches_dense_exponential() {
    let g = TorusGrid::new(1, 32).unwrap();
    let spec = PotentialSpec::free(1.0, vec![0.0]).unwrap();
    let time = TimeGrid::new(0.0, 0.5, 128).unwrap();
    let y = drift_1d(g, time, |_, x| 0.8 * (2.0 * PI * x).sin());
    let rho0 = DensityField::normalize(ScalarField::from_fn(g, |x| {
        1.0 + 0.7 * (2.0 * PI * x[0]).cos()
    }))
    .unwrap();
    let path = fp_evolve(&rho0, &y, &spec, 0.0, 0.5, 128).unwrap();

    let gen = dense_generator(y.slices[0].component(0).values(), spec.diffusion(), g.h());
    let exact = (gen * 0.5).exp() * DVector::from_column_slice(rho0.values());
    let l1: f64 = path
        .last()
        .values()
        .iter()
        .zip(exact.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * g.h();
    assert!(l1 < 1e-6, "{l1:e}");
}

#[test]
fn mass_is_conserved_at_every_step() {
    let g = TorusGrid::new(1, 128).unwrap();
    let spec = PotentialSpec::free(1.0, vec![1.0]).unwrap();
    let time = TimeGrid::horizon(1, 256).unwrap();
    let y = drift_1d(g, time, |t, x| 1.0 + 0.5 * (2.0 * PI * (x + t)).sin());
    let rho0 = DensityField::grid_dirac(g, 17);
    for scheme in [FpScheme::CenteredCrankNicolson, FpScheme::FittedImplicit] {
        let options = FpOptions {
            scheme,
            damping_steps: 2,
        };
        let (path, stats) = fp_evolve_with(&rho0, &y, &spec, time, options).unwrap();
        assert!(stats.mass_defect < 1e-12, "{:e}", stats.mass_defect);
        for s in &path.slices {
            assert!((s.field().integral() - 1.0).abs() < 1e-12);
            assert!(s.field().min() >= 0.0);
        }
    }
}

#[test]
fn two_schemes_agree_to_first_order() {
    for n in [64usize, 128] {
        let g = TorusGrid::new(1, n).unwrap();
        let spec = PotentialSpec::free(1.0, vec![0.0]).unwrap();
        let steps = 2 * n;
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let y = drift_1d(g, time, |t, x| {
            0.6 * (2.0 * PI * x).sin() * (1.0 + 0.5 * (2.0 * PI * t).cos())
        });
        let rho0 = DensityField::normalize(ScalarField::from_fn(g, |x| {
            (2.0 * (2.0 * PI * x[0]).cos()).exp()
        }))
        .unwrap();
        let main = fp_evolve_with(&rho0, &y, &spec, time, FpOptions::default())
            .unwrap()
            .0;
        let second = fp_evolve_with(
            &rho0,
            &y,
            &spec,
            time,
            FpOptions {
                scheme: FpScheme::FittedImplicit,
                damping_steps: 0,
            },
        )
        .unwrap()
        .0;
        let bound = 5.0 * (g.h() + time.dt);
        for (a, b) in main.slices.iter().zip(&second.slices) {
            assert!(a.total_variation(b).unwrap() <= bound);
        }
    }
}

#[test]
fn periodic_state_is_unique_across_starts() {
    let g = TorusGrid::new(1, 64).unwrap();
    let spec = PotentialSpec::free(1.0, vec![0.0]).unwrap();
    let time = TimeGrid::unit_period(128).unwrap();
    let y = drift_1d(g, time, |t, x| 0.3 * (2.0 * PI * (x - t)).sin());
    let tol = 1e-10;
    let steady = fp_periodic_steady(&y, &spec, tol).unwrap();
    let starts = [
        DensityField::uniform(g),
        DensityField::grid_dirac(g, 5),
        DensityField::normalize(ScalarField::from_fn(g, |x| {
            1.0 + 0.9 * (6.0 * PI * x[0]).sin()
        }))
        .unwrap(),
    ];
    for start in &starts {
        // brute force: 50 periods of plain evolution
        let mut rho = start.clone();
        for _ in 0..50 {
            let (path, _) = fp_evolve_with(&rho, &y, &spec, time, FpOptions::default()).unwrap();
            rho = path.last().clone();
        }
        assert!(rho.total_variation(steady.first()).unwrap() < 1e-8);
        let again = fp_periodic_steady_from(start, &y, &spec, tol, FpScheme::CenteredCrankNicolson)
            .unwrap();
        assert!(again.first().total_variation(steady.first()).unwrap() < 1e-8);
    }
}

#[test]
fn constant_drift_keeps_uniform_periodic_state() {
    let g = TorusGrid::new(2, 16).unwrap();
    let spec = PotentialSpec::free(1.0, vec![0.7, -0.2]).unwrap();
    let time = TimeGrid::unit_period(32).unwrap();
    let y = DriftPath::constant(time, VectorField::constant(g, &[0.7, -0.2]));
    let steady = fp_periodic_steady(&y, &spec, 1e-12).unwrap();
    for s in &steady.slices {
        assert!(s.values().iter().all(|x| (x - 1.0).abs() < 1e-10));
    }
}
