//! Run configuration: a flat key-value text with section headers.
//!
//! ```text
//! # comment
//! [problem]
//! dim = 1
//! v_term = 0.3 1 0 0        # amp kx ky kt [phase]
//! [solver]
//! starts = 5
//! ```
//!
//! Blank lines and `#`/`;` comments are ignored. Keys are unique within
//! their section except the repeatable `v_term`, `w_term`, `terminal_term`
//! and `dirac`. Unknown sections or keys are errors.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use viscous_mather::fokker_planck::InitialMeasure;
use viscous_mather::mfg::MfgOptions;
use viscous_mather::particles::NashOptions;
use viscous_mather::torus::{
    DensityField, Interaction, InteractionTerm, Potential, PotentialSpec, PotentialTerm, ScalarField, TorusGrid,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

fn err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.map(str::to_owned),
        message: message.into(),
    }
}

/// `amp · cos(2π k·x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalTerm {
    pub amp: f64,
    pub k: [i32; 2],
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub dim: usize,
    pub n_grid: usize,
    pub beta: f64,
    pub c: Vec<f64>,
    pub v_terms: Vec<PotentialTerm>,
    pub w_terms: Vec<InteractionTerm>,
    pub horizon: usize,
    pub terminal_terms: Vec<TerminalTerm>,
    /// Point masses of the initial measure; empty means uniform.
    pub diracs: Vec<([f64; 2], f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub steps_per_unit: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub starts: usize,
    pub eigen_tol: f64,
    pub steady_tol: f64,
    pub nash_damping: f64,
    pub nash_tol: f64,
    pub nash_max_iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_schedule: Vec<usize>,
    pub lipschitz_n: Vec<usize>,
    pub trials: usize,
    pub sizes: Vec<f64>,
    pub ergodic_horizon: usize,
    pub divergence_bound: f64,
    pub mc_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
    /// Output directory; not part of the hash.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig {
                dim: 1,
                n_grid: 128,
                beta: 1.0,
                c: vec![0.0],
                v_terms: Vec::new(),
                w_terms: Vec::new(),
                horizon: 1,
                terminal_terms: Vec::new(),
                diracs: Vec::new(),
            },
            solver: SolverConfig {
                steps_per_unit: 256,
                damping: 0.5,
                tol: 1e-9,
                max_iterations: 500,
                starts: 5,
                eigen_tol: 1e-10,
                steady_tol: 1e-12,
                nash_damping: 0.5,
                nash_tol: 1e-6,
                nash_max_iterations: 200,
                seed: 0,
            },
            experiment: ExperimentConfig {
                n_schedule: vec![8, 16, 32, 64],
                lipschitz_n: vec![8, 64],
                trials: 20,
                sizes: vec![0.01, 0.02, 0.05],
                ergodic_horizon: 15,
                divergence_bound: 0.5,
                mc_paths: 100_000,
            },
            output_dir: None,
        }
    }
}

fn numbers<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| err(Some(line), Some(key), format!("cannot parse `{s}`"))))
        .collect()
}

fn one<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    let v: Vec<T> = numbers(line, key, value)?;
    match v.len() {
        1 => Ok(v.into_iter().next().expect("length checked")),
        n => Err(err(Some(line), Some(key), format!("expected one value, got {n}"))),
    }
}

fn terms(line: usize, key: &str, value: &str, min: usize, max: usize) -> Result<Vec<f64>, ConfigError> {
    let v: Vec<f64> = numbers(line, key, value)?;
    if v.len() < min || v.len() > max {
        return Err(err(Some(line), Some(key), format!("expected {min} to {max} numbers, got {}", v.len())));
    }
    Ok(v)
}

fn wave(line: usize, key: &str, v: f64) -> Result<i32, ConfigError> {
    if v.fract() != 0.0 || v.abs() > 1000.0 {
        return Err(err(Some(line), Some(key), format!("frequency must be an integer, got {v}")));
    }
    Ok(v as i32)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        let mut seen: HashSet<(String, String)> = HashSet::new();
        let mut lines_of: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !["problem", "solver", "experiment", "output"].contains(&name) {
                    return Err(err(Some(line), None, format!("unknown section [{name}]")));
                }
                section = Some(name.to_owned());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(Some(line), None, format!("expected `key = value`, got `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                return Err(err(Some(line), Some(key), "key outside of any section"));
            };
            let repeatable = matches!(key, "v_term" | "w_term" | "terminal_term" | "dirac");
            if !repeatable && !seen.insert((sec.to_owned(), key.to_owned())) {
                return Err(err(Some(line), Some(key), "duplicate key"));
            }
            lines_of.insert(key.to_owned(), line);
            let l = Some(line);
            match (sec, key) {
                ("problem", "dim") => cfg.problem.dim = one(line, key, value)?,
                ("problem", "n_grid") => cfg.problem.n_grid = one(line, key, value)?,
                ("problem", "beta") => cfg.problem.beta = one(line, key, value)?,
                ("problem", "c") => cfg.problem.c = numbers(line, key, value)?,
                ("problem", "horizon") => cfg.problem.horizon = one(line, key, value)?,
                ("problem", "v_term") => {
                    let v = terms(line, key, value, 4, 5)?;
                    let mut t = PotentialTerm::new(v[0], [wave(line, key, v[1])?, wave(line, key, v[2])?], wave(line, key, v[3])?);
                    t.phase = v.get(4).copied().unwrap_or(0.0);
                    cfg.problem.v_terms.push(t);
                }
                ("problem", "w_term") => {
                    let v = terms(line, key, value, 3, 3)?;
                    cfg.problem.w_terms.push(InteractionTerm {
                        amp: v[0],
                        k: [wave(line, key, v[1])?, wave(line, key, v[2])?],
                    });
                }
                ("problem", "terminal_term") => {
                    let v = terms(line, key, value, 3, 4)?;
                    cfg.problem.terminal_terms.push(TerminalTerm {
                        amp: v[0],
                        k: [wave(line, key, v[1])?, wave(line, key, v[2])?],
                        phase: v.get(3).copied().unwrap_or(0.0),
                    });
                }
                ("problem", "dirac") => {
                    let v = terms(line, key, value, 3, 3)?;
                    if !(v[2] > 0.0) {
                        return Err(err(l, Some(key), "weight must be positive"));
                    }
                    cfg.problem.diracs.push(([v[0], v[1]], v[2]));
                }
                ("solver", "steps_per_unit") => cfg.solver.steps_per_unit = one(line, key, value)?,
                ("solver", "damping") => cfg.solver.damping = one(line, key, value)?,
                ("solver", "tol") => cfg.solver.tol = one(line, key, value)?,
                ("solver", "max_iterations") => cfg.solver.max_iterations = one(line, key, value)?,
                ("solver", "starts") => cfg.solver.starts = one(line, key, value)?,
                ("solver", "eigen_tol") => cfg.solver.eigen_tol = one(line, key, value)?,
                ("solver", "steady_tol") => cfg.solver.steady_tol = one(line, key, value)?,
                ("solver", "nash_damping") => cfg.solver.nash_damping = one(line, key, value)?,
                ("solver", "nash_tol") => cfg.solver.nash_tol = one(line, key, value)?,
                ("solver", "nash_max_iterations") => cfg.solver.nash_max_iterations = one(line, key, value)?,
                ("solver", "seed") => cfg.solver.seed = one(line, key, value)?,
                ("experiment", "n_schedule") => cfg.experiment.n_schedule = numbers(line, key, value)?,
                ("experiment", "lipschitz_n") => cfg.experiment.lipschitz_n = numbers(line, key, value)?,
                ("experiment", "trials") => cfg.experiment.trials = one(line, key, value)?,
                ("experiment", "sizes") => cfg.experiment.sizes = numbers(line, key, value)?,
                ("experiment", "ergodic_horizon") => cfg.experiment.ergodic_horizon = one(line, key, value)?,
                ("experiment", "divergence_bound") => cfg.experiment.divergence_bound = one(line, key, value)?,
                ("experiment", "mc_paths") => cfg.experiment.mc_paths = one(line, key, value)?,
                ("output", "dir") => cfg.output_dir = Some(PathBuf::from(value)),
                _ => return Err(err(l, Some(key), format!("unknown key in [{sec}]"))),
            }
        }
        if !lines_of.contains_key("c") {
            cfg.problem.c = vec![0.0; cfg.problem.dim];
        }
        cfg.validate(&lines_of)?;
        Ok(cfg)
    }

    fn validate(&self, lines: &HashMap<String, usize>) -> Result<(), ConfigError> {
        let p = &self.problem;
        let s = &self.solver;
        let e = &self.experiment;
        let at = |k: &'static str| lines.get(k).copied();
        let check = |ok: bool, key: &'static str, msg: String| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(err(at(key), Some(key), msg))
            }
        };
        check(p.dim == 1 || p.dim == 2, "dim", format!("must be 1 or 2, got {}", p.dim))?;
        check(TorusGrid::new(p.dim, p.n_grid).is_ok(), "n_grid", format!("unsupported grid size {}", p.n_grid))?;
        check(p.beta > 0.0 && p.beta.is_finite(), "beta", format!("must be positive, got {}", p.beta))?;
        check(p.c.len() == p.dim, "c", format!("needs {} components, got {}", p.dim, p.c.len()))?;
        check(p.horizon >= 1, "horizon", "must be at least 1".into())?;
        let mass: f64 = p.diracs.iter().map(|d| d.1).sum();
        check(p.diracs.is_empty() || (mass - 1.0).abs() < 1e-9, "dirac", format!("weights must sum to 1, got {mass}"))?;
        check(s.steps_per_unit >= 2, "steps_per_unit", "must be at least 2".into())?;
        check(s.damping > 0.0 && s.damping <= 1.0, "damping", format!("must lie in (0, 1], got {}", s.damping))?;
        check(s.nash_damping > 0.0 && s.nash_damping <= 1.0, "nash_damping", format!("must lie in (0, 1], got {}", s.nash_damping))?;
        for (v, k) in [(s.tol, "tol"), (s.eigen_tol, "eigen_tol"), (s.steady_tol, "steady_tol"), (s.nash_tol, "nash_tol")] {
            check(v > 0.0, k, format!("must be positive, got {v}"))?;
        }
        for (v, k) in [
            (s.max_iterations, "max_iterations"),
            (s.starts, "starts"),
            (s.nash_max_iterations, "nash_max_iterations"),
            (e.trials, "trials"),
            (e.mc_paths, "mc_paths"),
        ] {
            check(v >= 1, k, "must be at least 1".into())?;
        }
        check(
            !e.n_schedule.is_empty() && e.n_schedule.windows(2).all(|w| w[0] < w[1]) && e.n_schedule[0] >= 1,
            "n_schedule",
            "must be a nonempty increasing list of positive integers".into(),
        )?;
        check(e.lipschitz_n.iter().all(|&n| n >= 1), "lipschitz_n", "entries must be positive".into())?;
        check(!e.sizes.is_empty() && e.sizes.iter().all(|&x| x > 0.0), "sizes", "must be positive".into())?;
        check((4..=20).contains(&e.ergodic_horizon), "ergodic_horizon", "must lie in 4..=20".into())?;
        check(e.divergence_bound > 0.0, "divergence_bound", "must be positive".into())?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (comments, layout and the output
    /// directory do not matter).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.problem.dim, self.problem.n_grid).expect("validated")
    }

    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec::new(
            Potential {
                terms: self.problem.v_terms.clone(),
            },
            Interaction {
                terms: self.problem.w_terms.clone(),
            },
            self.problem.beta,
            self.problem.c.clone(),
        )
        .expect("validated")
    }

    pub fn terminal(&self) -> ScalarField {
        let terms = self.problem.terminal_terms.clone();
        ScalarField::from_fn(self.grid(), move |x| {
            terms
                .iter()
                .map(|t| {
                    let arg = std::f64::consts::TAU * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]) + t.phase;
                    t.amp * arg.cos()
                })
                .sum()
        })
    }

    pub fn initial(&self) -> InitialMeasure {
        if self.problem.diracs.is_empty() {
            InitialMeasure::Density(DensityField::uniform(self.grid()))
        } else {
            InitialMeasure::Diracs(self.problem.diracs.clone())
        }
    }

    pub fn mfg_options(&self) -> MfgOptions {
        let s = &self.solver;
        MfgOptions {
            starts: s.starts,
            damping: s.damping,
            tol: s.tol,
            max_iterations: s.max_iterations,
            seed: s.seed,
            steps_per_unit: s.steps_per_unit,
            eigen_tol: s.eigen_tol,
            steady_tol: s.steady_tol,
        }
    }

    pub fn nash_options(&self) -> NashOptions {
        let s = &self.solver;
        NashOptions {
            damping: s.nash_damping,
            tol: s.nash_tol,
            max_iterations: s.nash_max_iterations,
            steps_per_unit: s.steps_per_unit,
        }
    }
}
