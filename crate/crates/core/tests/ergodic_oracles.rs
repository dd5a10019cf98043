use viscous_mather::ergodic::{
    concatenate_drifts, ergodic_report, fixed_point_probe, path_action, semigroup_check, value_iteration, ProbeSet,
};
use viscous_mather::fokker_planck::InitialMeasure;
use viscous_mather::mfg::{hopf_lax, running_cost, solve_periodic_mfg, MfgOptions};
use viscous_mather::torus::{DriftPath, Interaction, TimeGrid, Potential, PotentialSpec, ScalarField, TorusGrid};

fn opts(steps: usize) -> MfgOptions {
    MfgOptions {
        steps_per_unit: steps,
        ..MfgOptions::default()
    }
}

fn cosine_terminal(g: TorusGrid) -> ScalarField {
    ScalarField::from_fn(g, |x| 0.2 * (std::f64::consts::TAU * x[0]).cos())
}

#[test]
fn free_case_values_are_linear() {
    let g = TorusGrid::new(1, 32).unwrap();
    let spec = PotentialSpec::free(1.0, vec![1.0]).unwrap();
    let probes = ProbeSet::standard(g);
    let report = ergodic_report(&probes, &spec, g, 8, 0.5, &opts(32)).unwrap();
    for row in &report.table.values {
        for (k, v) in row.iter().enumerate() {
            assert!((v.unwrap() + 0.5 * (k + 1) as f64).abs() < 1e-10);
        }
    }
    assert!((report.lambda.unwrap().lambda - 0.5).abs() < 1e-3);
    assert!(report.max_shifted < 1e-9);
    assert_eq!(report.diverged_at, None);
}

#[test]
fn constant_potential_values() {
    let g = TorusGrid::new(1, 32).unwrap();
    let spec = PotentialSpec::new(Potential::constant(0.4), Interaction::zero(), 1.0, vec![0.0]).unwrap();
    let table = value_iteration(&ProbeSet::standard(g), &spec, g, 5, &opts(32)).unwrap();
    for row in &table.values {
        for (k, v) in row.iter().enumerate() {
            assert!((v.unwrap() + 0.4 * (k + 1) as f64).abs() < 1e-10);
        }
    }
}

#[test]
fn decoupled_lambda_matches_effective_hamiltonian() {
    let g = TorusGrid::new(1, 64).unwrap();
    let spec = PotentialSpec::new(Potential::modulated_cosine(0.3, 0.5), Interaction::zero(), 1.0, vec![0.4]).unwrap();
    let o = opts(128);
    let hbar = solve_periodic_mfg(&spec, g, &o).unwrap().hbar.unwrap();
    let probes = ProbeSet::standard(g);
    let report = ergodic_report(&probes, &spec, g, 15, 0.5, &o).unwrap();
    let ten: Vec<f64> = report.minima[..10].iter().map(|v| v.unwrap()).collect();
    let lambda10 = viscous_mather::ergodic::estimate_lambda(&ten).unwrap().lambda;
    assert!((lambda10 - hbar).abs() < 0.02, "{lambda10} vs {hbar}");

    // with the oracle λ the shifted sequences settle
    let oracle = fixed_point_probe(&report.table, &probes, &spec, g, hbar, 0.5).unwrap();
    assert!(oracle.max_shifted <= 1.0);
    for p in &oracle.probes {
        assert!(p.cauchy_gap.unwrap() <= 0.05, "{}: {:?}", p.label, p.cauchy_gap);
    }
    // and drift off linearly with a wrong one
    let wrong = fixed_point_probe(&report.table, &probes, &spec, g, hbar + 0.1, 0.5).unwrap();
    assert!(wrong.diverged_at.is_some_and(|n| n <= 10));
    assert!(oracle.lipschitz_growth.unwrap() <= 1.5);
}

#[test]
fn free_semigroup_residual_vanishes_and_ignores_shifts() {
    let g = TorusGrid::new(1, 32).unwrap();
    let spec = PotentialSpec::free(1.0, vec![0.7]).unwrap();
    let mu = InitialMeasure::dirac([0.3, 0.0]);
    let f = cosine_terminal(g);
    let r = semigroup_check(&mu, &f, &spec, 1, 1, &opts(32)).unwrap();
    assert!(r.residual < 1e-10, "{r:?}");

    let spec = PotentialSpec::new(Potential::modulated_cosine(0.3, 0.5), Interaction::cosine(0.1), 1.0, vec![0.0]).unwrap();
    let a = semigroup_check(&mu, &f, &spec, 1, 1, &opts(32)).unwrap();
    let b = semigroup_check(&mu, &f.map(|v| v + 0.8), &spec, 1, 1, &opts(32)).unwrap();
    assert!((a.residual - b.residual).abs() < 1e-10);
}

#[test]
fn interacting_semigroup_residual_is_small_and_shrinks() {
    let spec = PotentialSpec::new(Potential::modulated_cosine(0.3, 0.5), Interaction::cosine(0.1), 1.0, vec![0.0]).unwrap();
    let mu = InitialMeasure::dirac([0.3, 0.0]);
    let mut residuals = Vec::new();
    for (n, k) in [(32, 64), (64, 128)] {
        let g = TorusGrid::new(1, n).unwrap();
        let o = MfgOptions { tol: 1e-11, starts: 1, ..opts(k) };
        let r = semigroup_check(&mu, &cosine_terminal(g), &spec, 1, 1, &o).unwrap();
        assert!(r.residual <= 5.0 * (g.h() + 1.0 / k as f64), "{r:?}");
        residuals.push(r.residual);
    }
    assert!(residuals[0] / residuals[1] >= 2.0, "{residuals:?}");
}

#[test]
fn concatenation_costs_at_most_the_split_actions() {
    let g = TorusGrid::new(1, 32).unwrap();
    let spec = PotentialSpec::free(1.0, vec![0.5]).unwrap();
    let o = opts(64);
    let f = cosine_terminal(g);
    let mu = InitialMeasure::dirac([0.3, 0.0]);
    // head: free motion for one unit; tail: optimal from where the head ends
    let head = hopf_lax(&mu, &ScalarField::zeros(g), &spec, 1, &o).unwrap();
    let middle = InitialMeasure::Density(head.rho.last().clone());
    let tail = hopf_lax(&middle, &f, &spec, 1, &o).unwrap();
    let split = running_cost(&head.rho, &head.drift, &spec).unwrap() + tail.value.unwrap();
    // the free problem is autonomous, so the head may be moved to [-2, -1]
    let head_y = DriftPath::new(TimeGrid::new(-2.0, -1.0, 64).unwrap(), head.drift.slices.clone()).unwrap();
    let mut excess = Vec::new();
    for delta in [0.2, 0.1, 0.05] {
        let y = concatenate_drifts(&head_y, &tail.drift, delta).unwrap();
        let total = path_action(&mu, &y, &f, &spec).unwrap();
        excess.push((total - split).max(0.0));
    }
    assert!(excess[2] <= excess[0] + 1e-12, "{excess:?}");
    assert!(excess[2] < 2e-2, "{excess:?}");
}
