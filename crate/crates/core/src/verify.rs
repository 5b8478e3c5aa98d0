//! Acceptance checks for the library's headline claims, grouped into a
//! fast exact suite and a Monte Carlo suite with pinned seeds.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{build, fig2_eta};
use crate::continuous::{
    cfp_integrate, cfp_integrate_scripted, cont_no_regret_integrate, regret_conservation_residual, CfpOptions,
    OpponentScript, StepControl,
};
use crate::discrete::{batch_map, run, Initial, RunConfig, Schedule, Snapshot, StepDiagnostics};
use crate::equilibrium::{
    curb_attraction_experiment, curb_constants, curb_enumerate, delta_b, nash_support_enumeration,
    CurbExperimentConfig, CurbSet,
};
use crate::error::{Error, Result};
use crate::game::{Game, HannanClass, JointDistribution, MixedAction, MixedProfile, Player};
use crate::perturbation::{graph_br_distance, limit_set_estimate, payoff_perturbation_series, LimitClass};
use crate::rng::RngStream;
use crate::strategy::PotentialSpec;

/// Which criteria to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Exact and deterministic checks.
    Static,
    /// Monte Carlo and long-horizon checks.
    Dynamics,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Suite::Static),
            "dynamics" => Ok(Suite::Dynamics),
            "all" => Ok(Suite::All),
            _ => Err(Error::Parse(format!("unknown suite '{s}', expected static, dynamics or all"))),
        }
    }
}

const STATIC: [u8; 6] = [1, 2, 3, 8, 9, 11];
const DYNAMICS: [u8; 10] = [4, 5, 6, 7, 10, 12, 13, 14, 15, 16];

impl Suite {
    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Static => STATIC.to_vec(),
            Suite::Dynamics => DYNAMICS.to_vec(),
            Suite::All => (1..=16).collect(),
        }
    }
}

/// One measured quantity against its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub claim: String,
    pub measured: String,
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    fn le(claim: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            claim: claim.into(),
            measured: format!("{measured:.6e}"),
            threshold: format!("<= {bound:e}"),
            passed: measured <= bound,
        }
    }

    fn ge(claim: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            claim: claim.into(),
            measured: format!("{measured:.6e}"),
            threshold: format!(">= {bound:e}"),
            passed: measured >= bound,
        }
    }

    fn near(claim: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Check {
            claim: claim.into(),
            measured: format!("{measured:.12}"),
            threshold: format!("{target} +/- {tol:e}"),
            passed: (measured - target).abs() <= tol,
        }
    }

    fn is(claim: impl Into<String>, measured: impl Into<String>, expected: impl Into<String>) -> Self {
        let (measured, expected) = (measured.into(), expected.into());
        Check { claim: claim.into(), passed: measured == expected, measured, threshold: expected }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub seconds: f64,
    pub passed: bool,
}

impl CriterionResult {
    /// `criterion NN PASS|FAIL title (seconds)`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("criterion {:>2} {verdict} {} ({:.1} s)", self.id, self.title, self.seconds);
        if let Some(e) = &self.error {
            s.push_str(&format!(": error: {e}"));
        } else if !self.passed {
            let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.claim.as_str()).collect();
            s.push_str(&format!(": failed {}", failed.join("; ")));
        }
        s
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "fig1 DFP regret lock-in",
        2 => "CFP scaled regret conservation",
        3 => "unilateral conservation against a scripted opponent",
        4 => "regret matching reaches the reduced Hannan set",
        5 => "zero-sum beliefs approach the equilibrium",
        6 => "strictly dominated actions vanish",
        7 => "potential game beliefs and payoffs converge",
        8 => "Hannan membership of exact distributions",
        9 => "graph-perturbed best reply distances",
        10 => "payoff slack bounded by maximal regret",
        11 => "curb constants and enumeration",
        12 => "H_B attracts regret matching",
        13 => "Shapley beliefs cycle or approach the equilibrium",
        14 => "beliefs approach the Nash edges of a2ex2",
        15 => "per-step regret identities",
        16 => "continuous no-regret flow",
        _ => "unknown criterion",
    }
}

/// Runs one criterion; errors are reported as a failed result.
pub fn run_criterion(id: u8) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => c01_dfp_lock_in(),
        2 => c02_cfp_conservation(),
        3 => c03_scripted_conservation(),
        4 => c04_reduced_hannan(),
        5 => c05_zero_sum(),
        6 => c06_dominated(),
        7 => c07_potential(),
        8 => c08_hannan_exact(),
        9 => c09_graph_distance(),
        10 => c10_slack_bound(),
        11 => c11_curb(),
        12 => c12_curb_attraction(),
        13 => c13_shapley(),
        14 => c14_a2ex2(),
        15 => c15_identities(),
        16 => c16_flow(),
        _ => Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(checks) => CriterionResult {
            id,
            title: title(id),
            passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
            checks,
            error: None,
            seconds,
        },
        Err(e) => {
            CriterionResult { id, title: title(id), checks: Vec::new(), error: Some(e.to_string()), seconds, passed: false }
        }
    }
}

pub fn run_suite(suite: Suite) -> Vec<CriterionResult> {
    suite.criteria().into_iter().map(run_criterion).collect()
}

/// Table of claim, measured value, threshold and verdict.
pub fn format_table(results: &[CriterionResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&r.line());
        out.push('\n');
        for c in &r.checks {
            out.push_str(&format!(
                "    [{}] {} | measured {} | threshold {}\n",
                if c.passed { "ok" } else { "!!" },
                c.claim,
                c.measured,
                c.threshold
            ));
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    out.push_str(&format!("{passed}/{} criteria passed\n", results.len()));
    out
}

const MC_SEED: u64 = 20_240_601;
const MC_RUNS: usize = 50;
const MC_HORIZON: u64 = 100_000;

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut yes, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        yes += f as usize;
    }
    if n == 0 {
        0.0
    } else {
        yes as f64 / n as f64
    }
}

fn c01_dfp_lock_in() -> Result<Vec<Check>> {
    let g = build("fig1", &[])?;
    let mut cfg = RunConfig::dfp(10_000);
    cfg.initial = Initial::Profile(0, 1);
    let tr = run(&g, &cfg)?;
    let bound = fig2_eta() - 1e-6;
    Ok(vec![Check::ge("min over t >= 2 of max_i R_i,max(t)", tr.diagnostics.min_max_regret, bound)])
}

fn interior_start(game: &Game, stream: RngStream) -> Result<(MixedProfile, JointDistribution)> {
    let mut rng = stream.rng();
    let w: Vec<f64> = (0..game.profiles()).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let z = JointDistribution::new(game.rows(), game.cols(), w.into_iter().map(|v| v / s).collect())?;
    Ok((z.marginals(), z))
}

fn c02_cfp_conservation() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for name in ["matching_pennies", "shapley", "fig3i"] {
        let g = build(name, &[])?;
        let worst = (0..5u64)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let (x0, z0) = interior_start(&g, RngStream::new(MC_SEED, i))?;
                let tr = cfp_integrate(&g, &x0, &z0, 1000.0, CfpOptions::default())?;
                let first = tr.breakpoints[0].r_max;
                let res = regret_conservation_residual(&tr);
                Ok((0..2).map(|p| res[p] / first[p].max(1.0)).fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(Check::le(format!("{name}: |t R_max(t) - R_max(1)| / max(1, R_max(1))"), worst, 1e-6));
    }
    Ok(checks)
}

fn c03_scripted_conservation() -> Result<Vec<Check>> {
    let g = build("matching_pennies", &[])?;
    let script = OpponentScript::oscillating(
        Player::Two,
        MixedAction::new(vec![0.9, 0.1])?,
        MixedAction::new(vec![0.2, 0.8])?,
        1.5,
        1000.0,
    );
    let mut worst: f64 = 0.0;
    for i in 0..5u64 {
        let (x0, z0) = interior_start(&g, RngStream::new(MC_SEED + 3, i))?;
        let tr = cfp_integrate_scripted(&g, &x0, &z0, 1000.0, CfpOptions::default(), &script)?;
        let first = tr.breakpoints[0].r_max[0];
        worst = worst.max(regret_conservation_residual(&tr)[0] / first.max(1.0));
    }
    Ok(vec![Check::le("player 1: |t R_max(t) - R_max(1)| / max(1, R_max(1))", worst, 1e-6)])
}

/// Final state and diagnostics of one regret-matching run.
#[derive(Debug, Clone)]
struct RunEnd {
    last: Snapshot,
    diagnostics: StepDiagnostics,
}

type BatchCache = Mutex<HashMap<String, Arc<Vec<RunEnd>>>>;

/// Regret-matching batches shared by several criteria, computed once.
fn rm_batch(reference: &str) -> Result<Arc<Vec<RunEnd>>> {
    static CACHE: OnceLock<BatchCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(v) = guard.get(reference) {
        return Ok(v.clone());
    }
    let g = crate::catalog::resolve(reference)?;
    let mut cfg = RunConfig::regret_matching(MC_HORIZON, MC_SEED);
    cfg.diagnostics = true;
    cfg.schedule = Schedule::FinalOnly;
    let ends = batch_map(&g, &cfg, MC_RUNS, |_, tr| RunEnd { last: tr.last().clone(), diagnostics: tr.diagnostics })?;
    let ends = Arc::new(ends);
    guard.insert(reference.to_string(), ends.clone());
    Ok(ends)
}

const RM_GAMES: [&str; 3] = ["matching_pennies", "shapley", "fig3i"];

fn c04_reduced_hannan() -> Result<Vec<Check>> {
    RM_GAMES
        .iter()
        .map(|name| {
            let runs = rm_batch(name)?;
            let f = fraction(runs.iter().map(|r| r.last.r_max[0] <= 0.05 && r.last.r_max[1] <= 0.05));
            Ok(Check::ge(format!("{name}: share of runs with both R_max(T) <= 0.05"), f, 0.95))
        })
        .collect()
}

fn c05_zero_sum() -> Result<Vec<Check>> {
    let runs = rm_batch("matching_pennies")?;
    let u = MixedProfile::uniform(&build("matching_pennies", &[])?);
    let f = fraction(runs.iter().map(|r| r.last.beliefs.sup_distance(&u) <= 0.05));
    Ok(vec![Check::ge("share of runs with beliefs within 0.05 of (1/2, 1/2)", f, 0.9)])
}

fn c06_dominated() -> Result<Vec<Check>> {
    let g = build("fig3ii", &[0.25])?;
    let mut cfg = RunConfig::regret_matching(MC_HORIZON, MC_SEED + 6);
    cfg.schedule = Schedule::FinalOnly;
    let weights = batch_map(&g, &cfg, MC_RUNS, |_, tr| {
        let b = &tr.last().beliefs;
        [Player::One, Player::Two].map(|p| b.get(p).weights()[1] + b.get(p).weights()[3])
    })?;
    let f = fraction(weights.iter().map(|w| w[0] <= 0.05 && w[1] <= 0.05));
    Ok(vec![Check::ge("share of runs with weight on {A-, B-} <= 0.05 for both players", f, 0.9)])
}

fn c07_potential() -> Result<Vec<Check>> {
    let g = build("fig3i", &[])?;
    let runs = rm_batch("fig3i")?;
    let on_a = fraction(runs.iter().map(|r| {
        r.last.beliefs.get(Player::One).weights()[0] >= 0.9 && r.last.beliefs.get(Player::Two).weights()[0] >= 0.9
    }));
    let mut payoff_ok = Vec::new();
    for r in runs.iter() {
        let (u1, u2) = g.expected_payoffs(&r.last.z)?;
        payoff_ok.push((u1 - 2.0).abs() <= 0.1 && (u2 - 2.0).abs() <= 0.1);
    }
    Ok(vec![
        Check::ge("share of runs with belief weight on A >= 0.9 for both players", on_a, 0.9),
        Check::ge("share of runs with average payoffs within 0.1 of 2", fraction(payoff_ok.into_iter()), 0.9),
    ])
}

fn c08_hannan_exact() -> Result<Vec<Check>> {
    let g = build("fig3i", &[])?;
    let third = 1.0 / 3.0;
    let diag = JointDistribution::from_points(3, 3, &[((0, 0), third), ((1, 1), third), ((2, 2), third)])?;
    let s = g.hannan_status(&diag, 1e-12)?;
    let z = JointDistribution::from_points(4, 4, &[((1, 1), 0.5), ((3, 3), 0.5)])?;
    let half = build("fig3ii", &[0.5])?.hannan_status(&z, 1e-12)?;
    let six = build("fig3ii", &[0.6])?.hannan_status(&z, 1e-12)?;
    Ok(vec![
        Check::is("fig3i diagonal thirds class", format!("{:?}", s.class), format!("{:?}", HannanClass::ReducedHR)),
        Check::near("fig3i diagonal thirds margin", s.margin, 0.0, 1e-12),
        Check::is("fig3ii(0.5) in H", half.in_hannan_set().to_string(), "true"),
        Check::le("fig3ii(0.5) margin", half.margin, 1e-12),
        Check::is("fig3ii(0.6) class", format!("{:?}", six.class), format!("{:?}", HannanClass::Outside)),
        Check::near("fig3ii(0.6) margin", six.margin, 0.1, 1e-12),
    ])
}

fn c09_graph_distance() -> Result<Vec<Check>> {
    let g = build("fig5", &[0.1])?;
    let y = MixedAction::new(vec![0.8, 0.2])?;
    let c = graph_br_distance(&g, Player::One, &MixedAction::pure(3, 1), &y)?;
    let b = graph_br_distance(&g, Player::One, &MixedAction::pure(3, 2), &y)?;
    Ok(vec![
        Check::near("distance of C at (0.8, 0.2)", c, 0.3, 1e-9),
        Check::near("distance of B at (0.8, 0.2)", b, 1.0, 1e-9),
    ])
}

fn c10_slack_bound() -> Result<Vec<Check>> {
    let g = build("shapley", &[])?;
    let mut cfg = RunConfig::regret_matching(10_000, MC_SEED + 10);
    cfg.record_periods = true;
    cfg.schedule = Schedule::FinalOnly;
    let excess = batch_map(&g, &cfg, 20, |_, tr| {
        payoff_perturbation_series(&g, &tr).map(|s| s.regret_bound_excess().unwrap_or(f64::NEG_INFINITY))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![Check::le("max over runs and periods of epsilon_t - max_i R_i,max(t-1)", excess, 1e-12)])
}

fn c11_curb() -> Result<Vec<Check>> {
    let g = build("fig3i", &[])?;
    let b = CurbSet::new(vec![0], vec![0]);
    let rm = PotentialSpec::regret_matching();
    let consts = curb_constants(&g, &b, [&rm, &rm], 4.0)?;
    let describe = |game: &Game, sets: &[CurbSet]| sets.iter().map(|c| c.describe(game)).collect::<Vec<_>>().join(" ");
    let found = curb_enumerate(&g)?;
    let expected = [CurbSet::new(vec![0], vec![0]), CurbSet::new(vec![0, 1], vec![0, 1]), CurbSet::full(&g)];
    let mp = build("matching_pennies", &[])?;
    let mp_found = curb_enumerate(&mp)?;
    Ok(vec![
        Check::near("delta_B for {A}x{A}", delta_b(&g, &b)?, 1.0, 1e-10),
        Check::near("gamma_B for {A}x{A}, l2, U = 4", consts.gamma_b, 0.1, 1e-10),
        Check::is("curb sets of fig3i", describe(&g, &found), describe(&g, &expected)),
        Check::is("curb sets of matching_pennies", describe(&mp, &mp_found), describe(&mp, &[CurbSet::full(&mp)])),
    ])
}

fn c12_curb_attraction() -> Result<Vec<Check>> {
    let g = build("fig3i", &[])?;
    let rm = PotentialSpec::regret_matching();
    let cfg = CurbExperimentConfig { t0: 1_000, horizon: 100_000, runs: 200, gamma: 0.05, seed: MC_SEED + 12 };
    let stats = curb_attraction_experiment(&g, &CurbSet::new(vec![0], vec![0]), [&rm, &rm], &cfg)?;
    Ok(vec![
        Check::ge("stay-in-B frequency", stats.stay_frequency, 0.95),
        Check::le("90th percentile of terminal distance to H_B", stats.terminal_h_b_distances.p90, 0.05),
    ])
}

fn c13_shapley() -> Result<Vec<Check>> {
    let g = build("shapley", &[])?;
    let eq = nash_support_enumeration(&g, 1e-9)?;
    let mut cfg = RunConfig::regret_matching(1_000_000, MC_SEED + 13);
    cfg.schedule = Schedule::Geometric(1.01);
    let out = batch_map(&g, &cfg, 20, |_, tr| {
        limit_set_estimate(&g, &tr, 0.5, &eq).map(|rep| (rep.class, tr.last().r_max))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let unclassified = out.iter().filter(|(c, _)| *c == LimitClass::Unclassified).count();
    let bound = fraction(out.iter().map(|(_, r)| r[0] <= 0.05 && r[1] <= 0.05));
    Ok(vec![
        Check::le("runs classified neither near the equilibrium nor cycling", unclassified as f64, 0.0),
        Check::ge("share of runs with both R_max(T) <= 0.05", bound, 0.95),
    ])
}

fn c14_a2ex2() -> Result<Vec<Check>> {
    let g = build("a2ex2", &[])?;
    let mut cfg = RunConfig::regret_matching(MC_HORIZON, MC_SEED + 14);
    cfg.schedule = Schedule::FinalOnly;
    // the Nash set is {x_B = 0} union {y_R = 0}
    let d = batch_map(&g, &cfg, MC_RUNS, |_, tr| {
        let b = &tr.last().beliefs;
        b.get(Player::One).weights()[1].min(b.get(Player::Two).weights()[1])
    })?;
    let f = fraction(d.iter().map(|&v| v <= 0.05));
    Ok(vec![Check::ge("share of runs within 0.05 of the Nash set", f, 0.9)])
}

fn c15_identities() -> Result<Vec<Check>> {
    let mut orth: f64 = 0.0;
    let mut sign = 0u64;
    let mut drift: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for name in RM_GAMES {
        for r in rm_batch(name)?.iter() {
            orth = orth.max(r.diagnostics.orthogonality);
            sign += r.diagnostics.sign_violations;
            drift = drift.max(r.diagnostics.constant_fallback_drift);
            gap = gap.max(r.diagnostics.recompute_gap);
        }
    }
    Ok(vec![
        Check::le("orthogonality residual", orth, 1e-12),
        Check::le("regret sign violations", sign as f64, 0.0),
        Check::le("t R_i,c drift under the constant fallback", drift, 1e-10),
        Check::le("running vs recomputed regrets", gap, 1e-9),
    ])
}

fn c16_flow() -> Result<Vec<Check>> {
    let rm = PotentialSpec::regret_matching();
    let starts = [
        ("matching_pennies", vec![0.9, 0.1], vec![0.2, 0.8]),
        ("fig3i", vec![0.1, 0.3, 0.6], vec![0.5, 0.2, 0.3]),
    ];
    let mut checks = Vec::new();
    for (name, x1, x2) in starts {
        let g = build(name, &[])?;
        let z = JointDistribution::product(&MixedProfile::new(MixedAction::new(x1)?, MixedAction::new(x2)?));
        let tr = cont_no_regret_integrate(&g, [&rm, &rm], &z, 10_000.0, &StepControl::default())?;
        let last = tr.last().r_max;
        checks.push(Check::le(format!("{name}: max_i R_i,max(T)"), last[0].max(last[1]), 0.02));
        let low = tr.min_r_max();
        checks.push(Check::ge(
            format!("{name}: min over records of min_i R_i,max(t)"),
            low[0].min(low[1]),
            f64::MIN_POSITIVE,
        ));
    }
    Ok(checks)
}
