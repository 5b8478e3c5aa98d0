//! Batch runner: one directory per run, a summary and a hashed manifest.
//!
//! Layout of `<output>/<name>/`:
//!
//! ```text
//! manifest.json       artifacts with sha256 and size
//! summary.json        config, per-run summaries, aggregates, metadata
//! <i>/trajectory.csv  plot-ready rows (see regretlab::export)
//! <i>/run.json        the run's summary
//! <i>/<analysis>.json analysis reports
//! ```
//!
//! Only `summary.json` carries a timestamp, so reruns with the same config and
//! seed reproduce every other file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use regretlab::continuous::{
    best_reply_violation, cfp_integrate, cont_no_regret_integrate, regret_conservation_residual, CfpOptions,
    StepControl,
};
use regretlab::discrete::{run, DynamicsKind, Initial, PlayerRule, RunConfig, StepDiagnostics, Trajectory};
use regretlab::equilibrium::nash_support_enumeration;
use regretlab::export::{write_cfp_csv, write_flow_csv, write_trajectory_csv};
use regretlab::game::DEFAULT_MEMBERSHIP_TOL;
use regretlab::perturbation::{limit_set_estimate, payoff_perturbation_series};
use regretlab::rng::{interior_profile, RngStream};
use regretlab::strategy::Strategy;
use regretlab::{Error, Game, JointDistribution, MixedAction, MixedProfile, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Analysis, Dynamics, ExperimentConfig, Resolved};

/// Tail share of the snapshots used by the `limit_set` analysis.
pub const LIMIT_SET_TAIL: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Replaces the config's master seed.
    pub seed_override: Option<u64>,
    /// Replaces the config's output directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowStats {
    pub rejected_steps: usize,
    pub positivity_violations: usize,
    pub min_r_max: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub index: usize,
    pub game: String,
    pub dynamics: Dynamics,
    pub seed: u64,
    pub stream: u64,
    pub final_t: f64,
    pub final_r_max: [f64; 2],
    pub final_beliefs: [Vec<f64>; 2],
    pub csv_rows: usize,
    pub expected_rows: usize,
    /// `min_{t >= 2} max_i R_i,max(t)`, discrete dynamics only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_max_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<StepDiagnostics>,
    /// `max_t |t R_max(t) - R_max(1)| / max(1, R_max(1))` per player.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation_residual: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_reply_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_beliefs: Option<[Vec<f64>; 2]>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    /// Share of runs where both final maximal regrets are at most 0.05.
    pub share_final_r_max_le_0_05: f64,
    pub mean_final_r_max: [f64; 2],
    pub max_final_r_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_min_max_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_conservation_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub created_unix: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub metadata: Metadata,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub summary: Summary,
}

/// Machine-readable error record.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(e: &Error) -> Self {
        let kind = match e {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidGame(_) => "invalid_game",
            Error::InvalidPeriod(_) => "invalid_period",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ZeroGradient => "zero_gradient",
            Error::StalledIntegration { .. } => "stalled_integration",
            Error::PreconditionViolated(_) => "precondition_violated",
            Error::Parse(_) => "parse",
            Error::UnknownGame(_) => "unknown_game",
            Error::OversizedGame { .. } => "oversized_game",
            Error::Lp(_) => "linear_program",
            Error::MissingRecords => "missing_records",
            Error::TailTooShort(_) => "tail_too_short",
            Error::Construction(_) => "construction",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        };
        ErrorRecord { kind, message: e.to_string() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, bytes.len() as u64))
}

/// Runs a configuration, writing all artifacts. Failures after the
/// experiment directory exists also leave an `error.json` there.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let resolved = cfg.resolve()?;
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed_override {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.output {
        cfg.output = out.clone();
    }
    let dir = cfg.output.join(&cfg.name);
    fs::create_dir_all(&dir)?;
    let result = execute(&cfg, &resolved, &dir, opts.workers);
    if let Err(e) = &result {
        let _ = write_json(&dir.join("error.json"), &serde_json::json!({ "error": ErrorRecord::new(e) }));
    }
    result.map(|summary| Outcome { dir, summary })
}

fn execute(cfg: &ExperimentConfig, res: &Resolved, dir: &Path, workers: Option<usize>) -> Result<Summary> {
    let stale = dir.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let equilibria = if cfg.analyses.iter().any(|a| matches!(a, Analysis::LimitSet | Analysis::Equilibria)) {
        nash_support_enumeration(&res.game, 1e-9)?
    } else {
        Vec::new()
    };
    let runs = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let run_dir = dir.join(i.to_string());
                fs::create_dir_all(&run_dir)?;
                let summary = execute_run(cfg, res, &equilibria, i, &run_dir)?;
                write_json(&run_dir.join("run.json"), &summary)?;
                Ok(summary)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary = Summary {
        metadata: Metadata {
            tool: "regretlab",
            version: env!("CARGO_PKG_VERSION"),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        },
        config: cfg.clone(),
        aggregate: aggregate(&runs),
        runs,
    };
    write_json(&dir.join("summary.json"), &summary)?;

    let mut paths: Vec<String> = vec!["summary.json".into()];
    for r in &summary.runs {
        paths.push(format!("{}/run.json", r.index));
        paths.extend(r.artifacts.iter().map(|a| format!("{}/{a}", r.index)));
    }
    let artifacts = paths
        .into_iter()
        .map(|p| {
            let (sha256, bytes) = sha256_file(&dir.join(&p))?;
            Ok(Artifact { path: p, sha256, bytes })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&dir.join("manifest.json"), &Manifest { experiment: cfg.name.clone(), artifacts })?;
    Ok(summary)
}

fn aggregate(runs: &[RunSummary]) -> Aggregate {
    let n = runs.len().max(1) as f64;
    let ok = runs.iter().filter(|r| r.final_r_max[0] <= 0.05 && r.final_r_max[1] <= 0.05).count();
    let mut mean = [0.0; 2];
    for r in runs {
        mean[0] += r.final_r_max[0] / n;
        mean[1] += r.final_r_max[1] / n;
    }
    let fold_opt = |it: &mut dyn Iterator<Item = f64>, f: fn(f64, f64) -> f64| it.reduce(f);
    Aggregate {
        runs: runs.len(),
        share_final_r_max_le_0_05: ok as f64 / n,
        mean_final_r_max: mean,
        max_final_r_max: runs.iter().map(|r| r.final_r_max[0].max(r.final_r_max[1])).fold(f64::NEG_INFINITY, f64::max),
        min_min_max_regret: fold_opt(&mut runs.iter().filter_map(|r| r.min_max_regret), f64::min),
        max_conservation_residual: fold_opt(
            &mut runs.iter().filter_map(|r| r.conservation_residual.map(|c| c[0].max(c[1]))),
            f64::max,
        ),
    }
}

fn pair(p: &MixedProfile) -> [Vec<f64>; 2] {
    [p.get(regretlab::Player::One).weights().to_vec(), p.get(regretlab::Player::Two).weights().to_vec()]
}

fn start_profile(cfg: &ExperimentConfig, game: &Game, index: usize) -> Result<MixedProfile> {
    match (&cfg.continuous.x1, &cfg.continuous.x2) {
        (Some(a), Some(b)) => {
            let p = MixedProfile::new(MixedAction::new(a.clone())?, MixedAction::new(b.clone())?);
            p.check(game)?;
            Ok(p)
        }
        (None, None) => Ok(interior_profile(game, RngStream::new(cfg.seed, index as u64))),
        _ => Err(Error::InvalidParameter("give both x1 and x2 or neither".into())),
    }
}

fn execute_run(
    cfg: &ExperimentConfig,
    res: &Resolved,
    equilibria: &[MixedProfile],
    index: usize,
    dir: &Path,
) -> Result<RunSummary> {
    let game = &res.game;
    let stream = index as u64;
    let mut artifacts = vec!["trajectory.csv".to_string()];
    let csv = fs::File::create(dir.join("trajectory.csv"))?;
    let mut summary = RunSummary {
        index,
        game: cfg.game.clone(),
        dynamics: cfg.dynamics,
        seed: cfg.seed,
        stream,
        final_t: 0.0,
        final_r_max: [0.0; 2],
        final_beliefs: [Vec::new(), Vec::new()],
        csv_rows: 0,
        expected_rows: 0,
        min_max_regret: None,
        diagnostics: None,
        conservation_residual: None,
        best_reply_violation: None,
        flow: None,
        start_beliefs: None,
        artifacts: Vec::new(),
    };
    let final_z: JointDistribution;
    match cfg.dynamics {
        Dynamics::Stochastic | Dynamics::Expected | Dynamics::Dfp => {
            let kind = match cfg.dynamics {
                Dynamics::Stochastic => DynamicsKind::Stochastic,
                Dynamics::Expected => DynamicsKind::Expected,
                _ => DynamicsKind::Dfp,
            };
            let rules = [
                PlayerRule::new(res.strategies[0].clone(), res.fallbacks[0]),
                PlayerRule::new(res.strategies[1].clone(), res.fallbacks[1]),
            ];
            let mut rc = RunConfig::new(kind, rules, cfg.horizon, cfg.seed);
            rc.rng = RngStream::new(cfg.seed, stream);
            rc.initial = match res.profile {
                Some((a1, a2)) => Initial::Profile(a1, a2),
                None => Initial::Uniform,
            };
            rc.schedule = res.schedule.clone();
            rc.tie_rule = res.tie_rule;
            rc.record_periods = cfg.record.periods || cfg.analyses.contains(&Analysis::Perturbation);
            rc.diagnostics = kind != DynamicsKind::Dfp;
            let traj = run(game, &rc)?;
            summary.csv_rows = write_trajectory_csv(game, &traj, csv)?;
            summary.expected_rows = res.schedule.periods(traj.first().t, cfg.horizon)?.len();
            let last = traj.last();
            summary.final_t = last.t as f64;
            summary.final_r_max = last.r_max;
            summary.final_beliefs = pair(&last.beliefs);
            if cfg.horizon >= 2 {
                summary.min_max_regret = Some(traj.diagnostics.min_max_regret);
            }
            if rc.diagnostics {
                summary.diagnostics = Some(traj.diagnostics.clone());
            }
            final_z = last.z.clone();
            discrete_analyses(cfg, game, &traj, equilibria, dir, &mut artifacts)?;
        }
        Dynamics::Cfp => {
            let x0 = start_profile(cfg, game, index)?;
            let z0 = JointDistribution::product(&x0);
            let opts = CfpOptions { tie_policy: res.tie_policy, ..CfpOptions::default() };
            let traj = cfp_integrate(game, &x0, &z0, cfg.horizon as f64, opts)?;
            summary.csv_rows = write_cfp_csv(game, &traj, csv)?;
            summary.expected_rows = traj.breakpoints.len();
            let first = traj.breakpoints[0].r_max;
            let resid = regret_conservation_residual(&traj);
            summary.conservation_residual = Some([resid[0] / first[0].max(1.0), resid[1] / first[1].max(1.0)]);
            summary.best_reply_violation = Some(best_reply_violation(game, &traj));
            let last = traj.last();
            summary.final_t = last.t;
            summary.final_r_max = last.r_max;
            summary.final_beliefs = last.x.clone();
            summary.start_beliefs = Some(pair(&x0));
            final_z = JointDistribution::new(game.rows(), game.cols(), last.z.clone())?;
        }
        Dynamics::ContNoregret => {
            let specs = match (&res.strategies[0], &res.strategies[1]) {
                (Strategy::Potential(a), Strategy::Potential(b)) => [a, b],
                _ => {
                    return Err(Error::InvalidParameter(
                        "continuous no-regret flow needs potential strategies for both players".into(),
                    ))
                }
            };
            let x0 = start_profile(cfg, game, index)?;
            let z0 = JointDistribution::product(&x0);
            let ctl = StepControl { rtol: cfg.continuous.rtol, atol: cfg.continuous.atol, ..StepControl::default() };
            let traj = cont_no_regret_integrate(game, specs, &z0, cfg.horizon as f64, &ctl)?;
            summary.csv_rows = write_flow_csv(game, &traj, csv)?;
            summary.expected_rows = traj.records.len();
            summary.flow = Some(FlowStats {
                rejected_steps: traj.rejected_steps,
                positivity_violations: traj.positivity_violations,
                min_r_max: traj.min_r_max(),
            });
            let last = traj.last();
            summary.final_t = last.t;
            summary.final_r_max = last.r_max;
            final_z = JointDistribution::new(game.rows(), game.cols(), last.z.clone())?;
            summary.final_beliefs = pair(&final_z.marginals());
            summary.start_beliefs = Some(pair(&x0));
        }
    }
    for a in &cfg.analyses {
        let file = format!("{}.json", a.name());
        match a {
            Analysis::Hannan => {
                write_json(&dir.join(&file), &game.hannan_status(&final_z, DEFAULT_MEMBERSHIP_TOL)?)?;
            }
            Analysis::Equilibria => {
                let beliefs = final_z.marginals();
                let report: Vec<_> = equilibria
                    .iter()
                    .map(|e| serde_json::json!({ "equilibrium": pair(e), "distance": beliefs.sup_distance(e) }))
                    .collect();
                write_json(&dir.join(&file), &report)?;
            }
            Analysis::LimitSet | Analysis::Perturbation => continue,
        }
        artifacts.push(file);
    }
    artifacts.sort();
    summary.artifacts = artifacts;
    Ok(summary)
}

fn discrete_analyses(
    cfg: &ExperimentConfig,
    game: &Game,
    traj: &Trajectory,
    equilibria: &[MixedProfile],
    dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    for a in &cfg.analyses {
        match a {
            Analysis::LimitSet => {
                write_json(&dir.join("limit_set.json"), &limit_set_estimate(game, traj, LIMIT_SET_TAIL, equilibria)?)?;
                artifacts.push("limit_set.json".into());
            }
            Analysis::Perturbation => {
                let s = payoff_perturbation_series(game, traj)?;
                let mut w = csv::Writer::from_path(dir.join("perturbation.csv"))?;
                w.write_record(["t", "epsilon", "delta"])?;
                for j in 0..s.t.len() {
                    w.write_record([s.t[j].to_string(), s.epsilon[j].to_string(), s.delta[j].to_string()])?;
                }
                w.flush()?;
                let decade = cfg.horizon / 10;
                let tail_eps = s.t.iter().zip(&s.epsilon).filter(|(t, _)| **t > decade).map(|(_, e)| *e);
                write_json(
                    &dir.join("perturbation.json"),
                    &serde_json::json!({
                        "periods": s.t.len(),
                        "max_epsilon": s.epsilon.iter().copied().fold(0.0, f64::max),
                        "max_delta": s.delta.iter().copied().fold(0.0, f64::max),
                        "tail_max_epsilon": tail_eps.fold(0.0, f64::max),
                        "regret_bound_excess": s.regret_bound_excess(),
                    }),
                )?;
                artifacts.push("perturbation.csv".into());
                artifacts.push("perturbation.json".into());
            }
            _ => {}
        }
    }
    Ok(())
}
