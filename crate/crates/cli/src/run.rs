use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use viscous_mather::ergodic::{ergodic_report, ProbeSet};
use viscous_mather::mfg::{hopf_lax, solve_periodic_mfg, MfgRecord, MfgSolution};
use viscous_mather::particles::{convergence_experiment, lipschitz_experiment, LipschitzRow, RngSpec};
use viscous_mather::torus::DensityPath;
use viscous_mather::Error;

use crate::checks::{run_checks, CheckRow};
use crate::config::{ConfigError, RunConfig};
use crate::output::{num, opt, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Periodic,
    HopfLax,
    Particles,
    Ergodic,
    Check,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Periodic => "periodic",
            Self::HopfLax => "hopf-lax",
            Self::Particles => "particles",
            Self::Ergodic => "ergodic",
            Self::Check => "check",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} invariant check(s) failed")]
    ChecksFailed { failed: usize },
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self::Solver(e)
    }
}

impl RunError {
    /// 2 for configuration problems, 3 when a solver did not converge.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(Error::NonConvergence { .. }) => 3,
            _ => 1,
        }
    }
}

#[derive(Serialize)]
struct Solved<'a> {
    subcommand: &'static str,
    #[serde(flatten)]
    record: MfgRecord,
    fixed_point_gap: f64,
    mass_error: f64,
    config: &'a RunConfig,
}

fn mass_error(rho: &DensityPath) -> f64 {
    rho.slices
        .iter()
        .map(|s| (s.field().integral() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn write_solution(out: &mut Output, which: Subcommand, sol: &MfgSolution, cfg: &RunConfig) -> Result<(), RunError> {
    out.json(
        "result.json",
        &Solved {
            subcommand: which.name(),
            record: sol.record(),
            fixed_point_gap: sol.residuals.fixed_point_gap,
            mass_error: mass_error(&sol.rho),
            config: cfg,
        },
    )?;
    let rho: Vec<_> = sol.rho.slices.iter().map(|s| s.field()).collect();
    out.slices("rho.csv", &sol.rho.time, &rho)?;
    let u: Vec<_> = sol.u.slices.iter().collect();
    out.slices("u.csv", &sol.u.time, &u)?;
    for a in 0..cfg.problem.dim {
        let y: Vec<_> = sol.drift.slices.iter().map(|y| y.component(a)).collect();
        let name = if cfg.problem.dim == 1 {
            "drift.csv".to_owned()
        } else {
            format!("drift_{a}.csv")
        };
        out.slices(&name, &sol.drift.time, &y)?;
    }
    Ok(())
}

fn lipschitz_rows(rows: &[LipschitzRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.trial.to_string(),
                r.moved.to_string(),
                num(r.dz_l1),
                num(r.du),
                num(r.ratio),
                num(r.measure_ratio),
            ]
        })
        .collect()
}

fn check_rows(rows: &[CheckRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.name.clone(),
                num(r.value),
                num(r.limit),
                r.comparison.to_owned(),
                if r.pass { "PASS" } else { "FAIL" }.to_owned(),
            ]
        })
        .collect()
}

/// Run one subcommand and write its artifacts into `dir`.
///
/// `meta.json` is written last, so its presence marks a complete run.
pub fn run(which: Subcommand, cfg: &RunConfig, dir: &Path, threads: usize) -> Result<(), RunError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let mut out = Output::new(dir, &hash)?;
    let grid = cfg.grid();
    let spec = cfg.spec();
    let options = cfg.mfg_options();
    let rng = RngSpec::new(cfg.solver.seed);
    log::info!("{} with config {hash}", which.name());

    match which {
        Subcommand::Periodic => {
            let sol = solve_periodic_mfg(&spec, grid, &options)?;
            log::info!("H̄ = {:?}, action {}", sol.hbar, sol.action);
            write_solution(&mut out, which, &sol, cfg)?;
        }
        Subcommand::HopfLax => {
            let sol = hopf_lax(&cfg.initial(), &cfg.terminal(), &spec, cfg.problem.horizon, &options)?;
            log::info!("value {:?}", sol.value);
            write_solution(&mut out, which, &sol, cfg)?;
        }
        Subcommand::Particles => {
            let exp = &cfg.experiment;
            let nash = cfg.nash_options();
            let f = cfg.terminal();
            let mu = cfg.initial();
            let rows = convergence_experiment(&mu, &f, &spec, cfg.problem.horizon, &exp.n_schedule, &nash, &options, &rng)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        num(r.u_n),
                        num(r.reference_value),
                        num(r.abs_error),
                        num(r.curve_d1),
                        num(r.nash_gap),
                        r.seed.to_string(),
                    ]
                })
                .collect();
            out.table(
                "convergence.csv",
                &["n", "U_n", "reference_value", "abs_error", "curve_d1", "nash_gap", "seed"],
                &table,
            )?;
            let mut lipschitz = Vec::new();
            for &n in &exp.lipschitz_n {
                lipschitz.extend(lipschitz_experiment(n, exp.trials, &exp.sizes, &spec, &f, cfg.problem.horizon, &nash, &rng)?);
            }
            out.table(
                "lipschitz.csv",
                &["n", "trial", "moved", "dz_l1", "du", "ratio", "measure_ratio"],
                &lipschitz_rows(&lipschitz),
            )?;
            let max_ratio: Vec<(usize, f64)> = exp
                .lipschitz_n
                .iter()
                .map(|&n| {
                    let m = lipschitz.iter().filter(|r| r.n == n).map(|r| r.ratio).fold(0.0, f64::max);
                    (n, m)
                })
                .collect();
            out.json(
                "result.json",
                &serde_json::json!({
                    "subcommand": which.name(),
                    "convergence": rows,
                    "lipschitz_max_ratio": max_ratio,
                    "config": cfg,
                }),
            )?;
        }
        Subcommand::Ergodic => {
            let probes = ProbeSet::standard(grid);
            let report = ergodic_report(
                &probes,
                &spec,
                grid,
                cfg.experiment.ergodic_horizon,
                cfg.experiment.divergence_bound,
                &options,
            )?;
            let mut columns = vec!["n".to_owned()];
            columns.extend(report.table.labels.iter().cloned());
            columns.push("min".to_owned());
            let table: Vec<Vec<String>> = (0..report.table.horizon())
                .map(|k| {
                    let mut row = vec![(k + 1).to_string()];
                    row.extend(report.table.values.iter().map(|v| opt(v[k])));
                    row.push(opt(report.minima[k]));
                    row
                })
                .collect();
            let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
            out.table("values.csv", &columns, &table)?;
            out.json(
                "result.json",
                &serde_json::json!({ "subcommand": which.name(), "report": report, "config": cfg }),
            )?;
        }
        Subcommand::Check => {
            let rows = run_checks(cfg)?;
            for r in &rows {
                println!(
                    "{} {}: {:.3e} {} {:.3e}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.value,
                    r.comparison,
                    r.limit
                );
            }
            out.table("checks.csv", &["check", "value", "limit", "comparison", "status"], &check_rows(&rows))?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            out.json(
                "result.json",
                &serde_json::json!({
                    "subcommand": which.name(),
                    "checks": rows,
                    "failed": failed,
                    "config": cfg,
                }),
            )?;
            out.meta(which.name(), cfg.solver.seed, threads, started.elapsed().as_secs_f64())?;
            if failed > 0 {
                return Err(RunError::ChecksFailed { failed });
            }
            return Ok(());
        }
    }
    out.meta(which.name(), cfg.solver.seed, threads, started.elapsed().as_secs_f64())?;
    Ok(())
}
