//! Discrete-time dynamics: stochastic no-regret play, its expected
//! (mean-field) version and discrete fictitious play.
//!
//! The state keeps `t * R_{i,k}(t)` as compensated running sums. Exact zero
//! increments are skipped, which keeps the regret of the action just played
//! bit-for-bit unchanged.

use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, JointDistribution, MixedAction, MixedProfile, Player, RegretVector};
use crate::rng::RngStream;
use crate::strategy::{exp_weights_action, next_action, FallbackPolicy, PotentialSpec, Strategy};

const RECOMPUTE_EVERY: u64 = 1000;
const RENORM_DRIFT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Stochastic,
    Expected,
    Dfp,
}

impl FromStr for DynamicsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(DynamicsKind::Stochastic),
            "expected" => Ok(DynamicsKind::Expected),
            "dfp" => Ok(DynamicsKind::Dfp),
            _ => Err(Error::Parse(format!("unknown discrete dynamics '{s}'"))),
        }
    }
}

/// How fictitious play picks among tied best replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    LowestIndex,
    StayWithPrevious,
    Random,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" | "lowest_index" => Ok(TieRule::LowestIndex),
            "stay" | "stay_with_previous" => Ok(TieRule::StayWithPrevious),
            "random" => Ok(TieRule::Random),
            _ => Err(Error::Parse(format!("unknown tie rule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlayerRule {
    pub strategy: Strategy,
    pub fallback: FallbackPolicy,
}

impl PlayerRule {
    pub fn new(strategy: Strategy, fallback: FallbackPolicy) -> Self {
        PlayerRule { strategy, fallback }
    }

    pub fn regret_matching() -> Self {
        Self::new(Strategy::Potential(PotentialSpec::regret_matching()), FallbackPolicy::default())
    }

    pub fn fictitious_play() -> Self {
        Self::new(Strategy::FictitiousPlay, FallbackPolicy::BestReply)
    }

    /// Potential-based rules are the class whose regret identities the
    /// diagnostics check.
    fn is_potential(&self) -> bool {
        matches!(self.strategy, Strategy::Potential(_))
    }
}

/// Play before the first simulated step.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// One uniformly random profile at `t = 1`, drawn from the run's stream.
    Uniform,
    Profile(usize, usize),
    /// An explicit history; the run starts at `t = history.len()`.
    History(Vec<(usize, usize)>),
}

/// Periods at which full snapshots are kept. The first and last periods of
/// a run are always included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Geometric(f64),
    Every(u64),
    Explicit(Vec<u64>),
    FinalOnly,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric(1.1)
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `geometric:<ratio>`, `every:<n>`, `list:<t1>,<t2>,...` or `final`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad recording schedule '{s}'"));
        if s == "final" {
            return Ok(Schedule::FinalOnly);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "geometric" => Ok(Schedule::Geometric(arg.parse().map_err(|_| bad())?)),
            "every" => Ok(Schedule::Every(arg.parse().map_err(|_| bad())?)),
            "list" => arg
                .split(',')
                .map(|v| v.trim().parse().map_err(|_| bad()))
                .collect::<Result<Vec<u64>>>()
                .map(Schedule::Explicit),
            _ => Err(bad()),
        }
    }
}

impl Schedule {
    pub fn periods(&self, start: u64, horizon: u64) -> Result<Vec<u64>> {
        if start > horizon {
            return Ok(vec![start]);
        }
        let mut out = vec![start];
        match self {
            Schedule::Geometric(r) => {
                if !(*r > 1.0) {
                    return Err(Error::InvalidParameter(format!("geometric ratio must exceed 1, got {r}")));
                }
                let mut t = 1u64;
                while t <= horizon {
                    if t > start {
                        out.push(t);
                    }
                    t = (t + 1).max((t as f64 * r).ceil() as u64);
                }
            }
            Schedule::Every(n) => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("recording interval must be positive".into()));
                }
                out.extend((1..=horizon / n).map(|k| k * n).filter(|&t| t > start));
            }
            Schedule::Explicit(ts) => {
                let mut ts: Vec<u64> = ts.iter().copied().filter(|&t| t > start && t <= horizon).collect();
                ts.sort_unstable();
                ts.dedup();
                out.extend(ts);
            }
            Schedule::FinalOnly => {}
        }
        if *out.last().unwrap() != horizon {
            out.push(horizon);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: DynamicsKind,
    pub rules: [PlayerRule; 2],
    pub horizon: u64,
    pub rng: RngStream,
    pub initial: Initial,
    pub schedule: Schedule,
    pub tie_rule: TieRule,
    /// Keep `(a(t), R_max(t))` for every period.
    pub record_periods: bool,
    /// Also keep the mixed actions `q(t)` in the per-period records.
    pub record_mixed: bool,
    /// Check the per-step regret identities while running.
    pub diagnostics: bool,
}

impl RunConfig {
    pub fn new(kind: DynamicsKind, rules: [PlayerRule; 2], horizon: u64, seed: u64) -> Self {
        RunConfig {
            kind,
            rules,
            horizon,
            rng: RngStream::new(seed, 0),
            initial: Initial::Uniform,
            schedule: Schedule::default(),
            tie_rule: TieRule::default(),
            record_periods: false,
            record_mixed: false,
            diagnostics: false,
        }
    }

    pub fn regret_matching(horizon: u64, seed: u64) -> Self {
        Self::new(
            DynamicsKind::Stochastic,
            [PlayerRule::regret_matching(), PlayerRule::regret_matching()],
            horizon,
            seed,
        )
    }

    pub fn dfp(horizon: u64) -> Self {
        Self::new(
            DynamicsKind::Dfp,
            [PlayerRule::fictitious_play(), PlayerRule::fictitious_play()],
            horizon,
            0,
        )
    }
}

#[derive(Debug, Clone)]
struct Compensated {
    sum: Vec<f64>,
    carry: Vec<f64>,
}

impl Compensated {
    fn zeros(n: usize) -> Self {
        Compensated { sum: vec![0.0; n], carry: vec![0.0; n] }
    }

    #[inline]
    fn add(&mut self, k: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let y = v - self.carry[k];
        let s = self.sum[k] + y;
        self.carry[k] = (s - self.sum[k]) - y;
        self.sum[k] = s;
    }

    fn max(&self) -> f64 {
        self.sum.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// State of a discrete run after period `t`.
#[derive(Debug, Clone)]
pub struct SimState {
    t: u64,
    rows: usize,
    cols: usize,
    z: Vec<f64>,
    sums: [Compensated; 2],
    beliefs: [Vec<f64>; 2],
    last_realized: Option<(usize, usize)>,
    last_mixed: [Vec<f64>; 2],
}

impl SimState {
    /// `t = 1` after the pure profile `(a1, a2)`.
    pub fn from_profile(game: &Game, a1: usize, a2: usize) -> Result<Self> {
        if a1 >= game.rows() || a2 >= game.cols() {
            return Err(Error::InvalidParameter(format!("profile ({a1}, {a2}) is outside the game")));
        }
        let mut s = SimState {
            t: 0,
            rows: game.rows(),
            cols: game.cols(),
            z: vec![0.0; game.profiles()],
            sums: [Compensated::zeros(game.rows()), Compensated::zeros(game.cols())],
            beliefs: [vec![0.0; game.rows()], vec![0.0; game.cols()]],
            last_realized: None,
            last_mixed: [vec![0.0; game.rows()], vec![0.0; game.cols()]],
        };
        let q = [pure(game.rows(), a1), pure(game.cols(), a2)];
        s.advance(game, &q, Some((a1, a2)));
        Ok(s)
    }

    pub fn period(&self) -> u64 {
        self.t
    }

    pub fn z(&self) -> JointDistribution {
        JointDistribution::from_raw(self.rows, self.cols, self.z.clone())
    }

    pub fn z_weights(&self) -> &[f64] {
        &self.z
    }

    /// `t * R_i(t)`.
    pub fn scaled_regrets(&self, player: Player) -> &[f64] {
        &self.sums[player.index()].sum
    }

    pub fn regrets(&self, player: Player) -> RegretVector {
        let t = self.t as f64;
        RegretVector::new(player, self.sums[player.index()].sum.iter().map(|s| s / t).collect())
    }

    pub fn max_regret(&self, player: Player) -> f64 {
        self.sums[player.index()].max() / self.t as f64
    }

    pub fn belief(&self, player: Player) -> &[f64] {
        &self.beliefs[player.index()]
    }

    pub fn beliefs(&self) -> MixedProfile {
        MixedProfile::new(
            MixedAction::from_raw(self.beliefs[0].clone()),
            MixedAction::from_raw(self.beliefs[1].clone()),
        )
    }

    pub fn last_realized(&self) -> Option<(usize, usize)> {
        self.last_realized
    }

    pub fn last_mixed(&self) -> MixedProfile {
        MixedProfile::new(
            MixedAction::from_raw(self.last_mixed[0].clone()),
            MixedAction::from_raw(self.last_mixed[1].clone()),
        )
    }

    pub fn snapshot(&self) -> Snapshot {
        let regrets = [self.regrets(Player::One).values, self.regrets(Player::Two).values];
        Snapshot {
            t: self.t,
            r_max: [self.max_regret(Player::One), self.max_regret(Player::Two)],
            regrets,
            z: self.z(),
            beliefs: self.beliefs(),
            last_realized: self.last_realized,
            last_mixed: self.last_mixed(),
        }
    }

    /// Moves from `t` to `t + 1` with mixed actions `q` and, for realized
    /// play, the drawn profile.
    fn advance(&mut self, game: &Game, q: &[Vec<f64>; 2], realized: Option<(usize, usize)>) {
        self.t += 1;
        let inv = 1.0 / self.t as f64;
        let cols = self.cols;
        match realized {
            Some((a1, a2)) => {
                let hit = a1 * cols + a2;
                for (i, w) in self.z.iter_mut().enumerate() {
                    let target = if i == hit { 1.0 } else { 0.0 };
                    *w += (target - *w) * inv;
                }
                let base1 = game.payoff(Player::One, a1, a2);
                let base2 = game.payoff(Player::Two, a1, a2);
                for k in 0..self.rows {
                    self.sums[0].add(k, game.payoff(Player::One, k, a2) - base1);
                }
                for k in 0..cols {
                    self.sums[1].add(k, game.payoff(Player::Two, a1, k) - base2);
                }
            }
            None => {
                for a1 in 0..self.rows {
                    for a2 in 0..cols {
                        let w = &mut self.z[a1 * cols + a2];
                        *w += (q[0][a1] * q[1][a2] - *w) * inv;
                    }
                }
                for player in Player::BOTH {
                    let i = player.index();
                    let pay = game.reply_payoffs(player, &q[1 - i]);
                    let base: f64 = pay.iter().zip(&q[i]).map(|(u, w)| u * w).sum();
                    for (k, u) in pay.iter().enumerate() {
                        self.sums[i].add(k, u - base);
                    }
                }
            }
        }
        let mass: f64 = self.z.iter().sum();
        if (mass - 1.0).abs() > RENORM_DRIFT {
            self.z.iter_mut().for_each(|w| *w /= mass);
        }
        for b in self.beliefs.iter_mut() {
            b.iter_mut().for_each(|w| *w = 0.0);
        }
        for a1 in 0..self.rows {
            for a2 in 0..cols {
                let w = self.z[a1 * cols + a2];
                self.beliefs[0][a1] += w;
                self.beliefs[1][a2] += w;
            }
        }
        self.last_realized = realized;
        self.last_mixed = q.clone();
    }
}

fn pure(n: usize, a: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// Which branch of the strategy produced a mixed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Normalized potential gradient at positive regrets.
    Gradient,
    Fallback(FallbackPolicy),
    /// Exponential weights or a best reply.
    Other,
}

/// What happened in one step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub mixed: [Vec<f64>; 2],
    pub choices: [Choice; 2],
    pub realized: Option<(usize, usize)>,
}

fn best_reply_with(
    game: &Game,
    player: Player,
    state: &SimState,
    tie_rule: TieRule,
    rng: &mut ChaCha8Rng,
) -> usize {
    let pay = game.reply_payoffs(player, state.belief(player.opponent()));
    let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..pay.len()).filter(|&k| pay[k] == best).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    match tie_rule {
        TieRule::LowestIndex => tied[0],
        TieRule::StayWithPrevious => {
            let prev = state.last_realized.map(|(a1, a2)| if player == Player::One { a1 } else { a2 });
            match prev {
                Some(p) if tied.contains(&p) => p,
                _ => tied[0],
            }
        }
        TieRule::Random => tied[rng.gen_range(0..tied.len())],
    }
}

fn plan(
    game: &Game,
    rules: &[PlayerRule; 2],
    state: &SimState,
    tie_rule: TieRule,
    rng: &mut ChaCha8Rng,
) -> Result<([Vec<f64>; 2], [Choice; 2])> {
    let mut mixed: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut choices = [Choice::Other; 2];
    for player in Player::BOTH {
        let i = player.index();
        let rule = &rules[i];
        let opp = MixedAction::from_raw(state.beliefs[1 - i].clone());
        mixed[i] = match &rule.strategy {
            Strategy::Potential(spec) => {
                let r = state.regrets(player);
                choices[i] = if r.max() > 0.0 { Choice::Gradient } else { Choice::Fallback(rule.fallback) };
                next_action(spec, rule.fallback, &r, &opp, game, player)?.into_inner()
            }
            Strategy::ExpWeights { alpha } => {
                let beta = (state.t as f64).powf(*alpha);
                exp_weights_action(game, player, &opp, beta)?.into_inner()
            }
            Strategy::FictitiousPlay => {
                pure(game.actions(player), best_reply_with(game, player, state, tie_rule, rng))
            }
        };
    }
    Ok((mixed, choices))
}

fn draw(q: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in q.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// One step of stochastic play: each player draws from her mixed action.
pub fn step_no_regret(
    game: &Game,
    rules: &[PlayerRule; 2],
    state: &mut SimState,
    rng: &mut ChaCha8Rng,
) -> Result<StepInfo> {
    step_with(game, rules, state, DynamicsKind::Stochastic, TieRule::LowestIndex, rng)
}

/// One step of the expected dynamics: the increment is `q1 x q2`.
pub fn step_expected(game: &Game, rules: &[PlayerRule; 2], state: &mut SimState) -> Result<StepInfo> {
    // no draws happen, any generator will do
    let mut rng = RngStream::new(0, 0).rng();
    step_with(game, rules, state, DynamicsKind::Expected, TieRule::LowestIndex, &mut rng)
}

/// One step of discrete fictitious play.
pub fn step_dfp(game: &Game, state: &mut SimState, tie_rule: TieRule, rng: &mut ChaCha8Rng) -> StepInfo {
    let rules = [PlayerRule::fictitious_play(), PlayerRule::fictitious_play()];
    step_with(game, &rules, state, DynamicsKind::Dfp, tie_rule, rng).expect("best replies cannot fail")
}

fn step_with(
    game: &Game,
    rules: &[PlayerRule; 2],
    state: &mut SimState,
    kind: DynamicsKind,
    tie_rule: TieRule,
    rng: &mut ChaCha8Rng,
) -> Result<StepInfo> {
    let (mixed, choices) = plan(game, rules, state, tie_rule, rng)?;
    let realized = match kind {
        DynamicsKind::Expected => None,
        _ => Some((draw(&mixed[0], rng), draw(&mixed[1], rng))),
    };
    state.advance(game, &mixed, realized);
    Ok(StepInfo { mixed, choices, realized })
}

/// Full state at a recorded period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub z: JointDistribution,
    pub regrets: [Vec<f64>; 2],
    pub r_max: [f64; 2],
    pub beliefs: MixedProfile,
    pub last_realized: Option<(usize, usize)>,
    pub last_mixed: MixedProfile,
}

/// Light record kept for every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: u64,
    pub actions: Option<(usize, usize)>,
    pub r_max: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixed: Option<[Vec<f64>; 2]>,
}

/// Worst values of the per-step regret identities seen during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `max |sum_k q_k (u(k, b) - u(q, b))|` over gradient steps and opponent actions `b`.
    pub orthogonality: f64,
    /// Periods where a positive maximal regret became nonpositive.
    pub sign_violations: u64,
    /// Largest drift of `t R_{i,c}(t)` while a constant fallback `c` is played.
    pub constant_fallback_drift: f64,
    /// Largest gap between running and recomputed regrets.
    pub recompute_gap: f64,
    pub recompute_checks: u64,
    /// `min_{t >= 2} max_i R_{i,max}(t)`.
    pub min_max_regret: f64,
}

impl Default for StepDiagnostics {
    fn default() -> Self {
        StepDiagnostics {
            orthogonality: 0.0,
            sign_violations: 0,
            constant_fallback_drift: 0.0,
            recompute_gap: 0.0,
            recompute_checks: 0,
            min_max_regret: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: DynamicsKind,
    pub strategies: [String; 2],
    pub rng: RngStream,
    pub horizon: u64,
    pub snapshots: Vec<Snapshot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<PeriodRecord>>,
    pub diagnostics: StepDiagnostics,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory always holds its initial state")
    }

    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }
}

/// Runs a configuration to its horizon.
pub fn run(game: &Game, cfg: &RunConfig) -> Result<Trajectory> {
    run_observed(game, cfg, |_, _| {})
}

/// Like [`run`], calling `observer` after every simulated step.
pub fn run_observed(
    game: &Game,
    cfg: &RunConfig,
    mut observer: impl FnMut(&SimState, &StepInfo),
) -> Result<Trajectory> {
    if cfg.horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut rng = cfg.rng.rng();
    let history: Vec<(usize, usize)> = match &cfg.initial {
        Initial::Uniform => vec![(rng.gen_range(0..game.rows()), rng.gen_range(0..game.cols()))],
        Initial::Profile(a1, a2) => vec![(*a1, *a2)],
        Initial::History(h) if h.is_empty() => {
            return Err(Error::InvalidParameter("initial history is empty".into()))
        }
        Initial::History(h) => h.clone(),
    };
    let rules = match cfg.kind {
        DynamicsKind::Dfp => [PlayerRule::fictitious_play(), PlayerRule::fictitious_play()],
        _ => cfg.rules.clone(),
    };
    let first_mixed = match cfg.initial {
        Initial::Uniform => [
            vec![1.0 / game.rows() as f64; game.rows()],
            vec![1.0 / game.cols() as f64; game.cols()],
        ],
        _ => [pure(game.rows(), history[0].0), pure(game.cols(), history[0].1)],
    };

    let mut periods = cfg.record_periods.then(Vec::new);
    let record = |state: &SimState, mixed: &[Vec<f64>; 2], periods: &mut Option<Vec<PeriodRecord>>| {
        if let Some(p) = periods {
            p.push(PeriodRecord {
                t: state.t,
                actions: state.last_realized,
                r_max: [state.max_regret(Player::One), state.max_regret(Player::Two)],
                mixed: cfg.record_mixed.then(|| mixed.clone()),
            });
        }
    };

    let mut state = SimState::from_profile(game, history[0].0, history[0].1)?;
    state.last_mixed = first_mixed.clone();
    record(&state, &first_mixed, &mut periods);
    for &(a1, a2) in &history[1..] {
        if a1 >= game.rows() || a2 >= game.cols() {
            return Err(Error::InvalidParameter(format!("history profile ({a1}, {a2}) is outside the game")));
        }
        let q = [pure(game.rows(), a1), pure(game.cols(), a2)];
        state.advance(game, &q, Some((a1, a2)));
        record(&state, &q, &mut periods);
    }

    let schedule = cfg.schedule.periods(state.t, cfg.horizon)?;
    let mut next_snap = 0;
    let mut snapshots = Vec::with_capacity(schedule.len());
    let snap = |state: &SimState, snapshots: &mut Vec<Snapshot>, next_snap: &mut usize| {
        if *next_snap < schedule.len() && schedule[*next_snap] == state.t {
            snapshots.push(state.snapshot());
            *next_snap += 1;
        }
    };
    snap(&state, &mut snapshots, &mut next_snap);

    let mut diag = StepDiagnostics::default();
    let mut anchors: [Option<(usize, f64)>; 2] = [None, None];
    while state.t < cfg.horizon {
        let (mixed, choices) = plan(game, &rules, &state, cfg.tie_rule, &mut rng)?;
        let before = [state.max_regret(Player::One), state.max_regret(Player::Two)];
        if cfg.diagnostics {
            for player in Player::BOTH {
                let i = player.index();
                match choices[i] {
                    Choice::Fallback(FallbackPolicy::ConstantAction(c)) => {
                        if anchors[i].map(|a| a.0) != Some(c) {
                            anchors[i] = Some((c, state.sums[i].sum[c]));
                        }
                    }
                    _ => anchors[i] = None,
                }
                if choices[i] == Choice::Gradient {
                    diag.orthogonality = diag.orthogonality.max(orthogonality_residual(game, player, &mixed[i]));
                }
            }
        }
        let realized = match cfg.kind {
            DynamicsKind::Expected => None,
            _ => Some((draw(&mixed[0], &mut rng), draw(&mixed[1], &mut rng))),
        };
        state.advance(game, &mixed, realized);
        let after = [state.max_regret(Player::One), state.max_regret(Player::Two)];
        diag.min_max_regret = diag.min_max_regret.min(after[0].max(after[1]));
        if cfg.diagnostics {
            for i in 0..2 {
                if rules[i].is_potential() && before[i] > 0.0 && after[i] <= 0.0 {
                    diag.sign_violations += 1;
                }
                if let Some((c, s0)) = anchors[i] {
                    diag.constant_fallback_drift = diag.constant_fallback_drift.max((state.sums[i].sum[c] - s0).abs());
                }
            }
            if state.t % RECOMPUTE_EVERY == 0 {
                let z = state.z();
                for player in Player::BOTH {
                    let fresh = game.regret_vector(player, &z)?;
                    let running = state.regrets(player);
                    let gap = crate::game::sup_distance(&fresh.values, &running.values);
                    diag.recompute_gap = diag.recompute_gap.max(gap);
                }
                diag.recompute_checks += 1;
            }
        }
        record(&state, &mixed, &mut periods);
        let info = StepInfo { mixed, choices, realized };
        observer(&state, &info);
        snap(&state, &mut snapshots, &mut next_snap);
    }

    Ok(Trajectory {
        kind: cfg.kind,
        strategies: [rules[0].strategy.descriptor(), rules[1].strategy.descriptor()],
        rng: cfg.rng,
        horizon: cfg.horizon,
        snapshots,
        periods,
        diagnostics: diag,
    })
}

/// `max_b |sum_k q_k (u_i(k, b) - u_i(q, b))|`.
pub fn orthogonality_residual(game: &Game, player: Player, q: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for b in 0..game.actions(player.opponent()) {
        let mean: f64 = q.iter().enumerate().map(|(k, w)| w * game.payoff_vs(player, k, b)).sum();
        let res: f64 = q
            .iter()
            .enumerate()
            .map(|(k, w)| w * (game.payoff_vs(player, k, b) - mean))
            .sum();
        worst = worst.max(res.abs());
    }
    worst
}

/// Runs `runs` copies of `cfg` in parallel; run `i` uses stream `i` of the
/// configured seed. Each trajectory is reduced by `f` as soon as it ends.
pub fn batch_map<R: Send>(
    game: &Game,
    cfg: &RunConfig,
    runs: usize,
    f: impl Fn(usize, Trajectory) -> R + Sync,
) -> Result<Vec<R>> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.rng = RngStream::new(cfg.rng.seed, i as u64);
            run(game, &c).map(|tr| f(i, tr))
        })
        .collect()
}

pub fn run_batch(game: &Game, cfg: &RunConfig, runs: usize) -> Result<Vec<Trajectory>> {
    batch_map(game, cfg, runs, |_, tr| tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn schedule_strings() {
        assert_eq!("final".parse::<Schedule>().unwrap(), Schedule::FinalOnly);
        assert_eq!("every:10".parse::<Schedule>().unwrap(), Schedule::Every(10));
        assert_eq!("geometric:1.5".parse::<Schedule>().unwrap(), Schedule::Geometric(1.5));
        assert_eq!("list:5,1".parse::<Schedule>().unwrap(), Schedule::Explicit(vec![5, 1]));
        assert!("weekly".parse::<Schedule>().is_err());
    }

    fn pennies() -> Game {
        catalog::build("matching_pennies", &[]).unwrap()
    }

    #[test]
    fn schedule_periods() {
        let p = Schedule::Geometric(1.1).periods(1, 30).unwrap();
        assert_eq!(&p[..12], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 13]);
        assert_eq!(*p.last().unwrap(), 30);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Schedule::Every(10).periods(1, 25).unwrap(), vec![1, 10, 20, 25]);
        assert_eq!(Schedule::FinalOnly.periods(1, 1).unwrap(), vec![1]);
        assert_eq!(Schedule::Explicit(vec![50, 5, 5]).periods(3, 10).unwrap(), vec![3, 5, 10]);
    }

    #[test]
    fn horizon_one_keeps_only_the_initial_state() {
        let tr = run(&pennies(), &RunConfig::regret_matching(1, 3)).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.last().t, 1);
    }

    #[test]
    fn runs_are_reproducible() {
        let g = catalog::build("shapley", &[]).unwrap();
        let mut cfg = RunConfig::regret_matching(5000, 11);
        cfg.record_periods = true;
        let a = run(&g, &cfg).unwrap();
        let b = run(&g, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        cfg.rng = RngStream::new(11, 1);
        let c = run(&g, &cfg).unwrap();
        assert_ne!(a.periods, c.periods);
    }

    #[test]
    fn negative_regrets_play_the_constant_pair() {
        // after the strict equilibrium (0, 0) of a coordination game no regret is positive
        let g = catalog::build("coordination", &[]).unwrap();
        let mut s = SimState::from_profile(&g, 0, 0).unwrap();
        assert!(s.max_regret(Player::One) <= 0.0 && s.max_regret(Player::Two) <= 0.0);
        let rules = [PlayerRule::regret_matching(), PlayerRule::regret_matching()];
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..50 {
            let info = step_no_regret(&g, &rules, &mut s, &mut rng).unwrap();
            assert_eq!(info.realized, Some((0, 0)));
        }
    }

    #[test]
    fn single_positive_regret_is_played_for_sure() {
        let r = RegretVector::new(Player::One, vec![1.0, 0.0, -1.0]);
        let q = crate::strategy::regret_matching(&r).unwrap();
        assert_eq!(q.weights(), &[1.0, 0.0, 0.0]);
        let mut rng = RngStream::new(5, 0).rng();
        assert!((0..1000).all(|_| draw(q.weights(), &mut rng) == 0));
    }

    #[test]
    fn first_step_matches_direct_averaging() {
        let g = pennies();
        let mut s = SimState::from_profile(&g, 0, 0).unwrap();
        let rules = [PlayerRule::regret_matching(), PlayerRule::regret_matching()];
        let mut rng = RngStream::new(42, 0).rng();
        let info = step_no_regret(&g, &rules, &mut s, &mut rng).unwrap();
        let (a1, a2) = info.realized.unwrap();
        let direct = crate::update_average(
            &JointDistribution::point_in(&g, 0, 0),
            &JointDistribution::point_in(&g, a1, a2),
            2,
        )
        .unwrap();
        assert_eq!(s.z(), direct);
        let mut expected = vec![0.0; 4];
        expected[0] += 0.5;
        expected[a1 * 2 + a2] += 0.5;
        assert_eq!(s.z_weights(), &expected[..]);
        for p in Player::BOTH {
            let fresh = g.regret_vector(p, &s.z()).unwrap();
            assert!(crate::game::sup_distance(&fresh.values, &s.regrets(p).values) < 1e-15);
        }
    }

    #[test]
    fn expected_dynamics_fixed_point_and_symmetry() {
        // uniform play in pennies: q-bar equals z, so z does not move
        let g = pennies();
        let mut s = SimState::from_profile(&g, 0, 0).unwrap();
        s.z = vec![0.25; 4];
        s.beliefs = [vec![0.5; 2], vec![0.5; 2]];
        s.sums = [Compensated::zeros(2), Compensated::zeros(2)];
        let uniform_rules = [
            PlayerRule::new(Strategy::ExpWeights { alpha: 0.5 }, FallbackPolicy::default()),
            PlayerRule::new(Strategy::ExpWeights { alpha: 0.5 }, FallbackPolicy::default()),
        ];
        let before = s.z_weights().to_vec();
        step_expected(&g, &uniform_rules, &mut s).unwrap();
        assert!(crate::game::sup_distance(&before, s.z_weights()) < 1e-15);

        // all regrets are zero at uniform play, so regret matching falls back
        let rules = [PlayerRule::regret_matching(), PlayerRule::regret_matching()];
        let info = step_expected(&g, &rules, &mut s).unwrap();
        assert!(matches!(info.choices, [Choice::Fallback(_), Choice::Fallback(_)]));
        assert_eq!(info.realized, None);
    }

    #[test]
    fn dfp_locks_fig1_off_diagonal() {
        let g = catalog::build("fig1", &[]).unwrap();
        let mut cfg = RunConfig::dfp(2000);
        cfg.initial = Initial::Profile(0, 1);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        let bound = 2f64.sqrt() / (1.0 + 2f64.sqrt());
        for r in tr.periods.as_ref().unwrap() {
            let (a1, a2) = r.actions.unwrap();
            assert_ne!(a1, a2, "diagonal play at t = {}", r.t);
            if r.t >= 2 {
                assert!(r.r_max[0].max(r.r_max[1]) >= bound - 1e-12);
            }
        }
        assert!(tr.diagnostics.min_max_regret >= bound - 1e-12);
    }

    #[test]
    fn dfp_strict_equilibrium_is_absorbing() {
        let g = catalog::build("fig3i", &[]).unwrap();
        let mut cfg = RunConfig::dfp(200);
        cfg.initial = Initial::Profile(0, 0);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        assert!(tr.periods.unwrap().iter().all(|r| r.actions == Some((0, 0))));
    }

    #[test]
    fn dfp_never_picks_c_in_fig2() {
        let g = catalog::build("fig2", &[]).unwrap();
        for (a1, a2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for tie_rule in [TieRule::LowestIndex, TieRule::StayWithPrevious, TieRule::Random] {
                let mut cfg = RunConfig::dfp(3000);
                cfg.initial = Initial::Profile(a1, a2);
                cfg.tie_rule = tie_rule;
                cfg.record_periods = true;
                let tr = run(&g, &cfg).unwrap();
                for r in &tr.periods.unwrap()[1..] {
                    assert_ne!(r.actions.unwrap().0, 2, "C played at t = {}", r.t);
                }
            }
        }
    }

    #[test]
    fn inline_identities_hold() {
        let g = catalog::build("shapley", &[]).unwrap();
        let mut cfg = RunConfig::regret_matching(20_000, 9);
        cfg.diagnostics = true;
        let tr = run(&g, &cfg).unwrap();
        let d = &tr.diagnostics;
        assert!(d.orthogonality <= 1e-12);
        assert_eq!(d.sign_violations, 0);
        assert!(d.constant_fallback_drift <= 1e-10);
        assert_eq!(d.recompute_checks, 20);
        assert!(d.recompute_gap <= 1e-9);
    }

    #[test]
    fn expected_regret_matching_on_fig3i_moves_to_aa() {
        let g = catalog::build("fig3i", &[]).unwrap();
        let mut cfg = RunConfig::regret_matching(1000, 0);
        cfg.kind = DynamicsKind::Expected;
        cfg.initial = Initial::Profile(1, 1);
        cfg.schedule = Schedule::Every(100);
        let tr = run(&g, &cfg).unwrap();
        let w: Vec<f64> = tr.snapshots.iter().map(|s| s.z.weight(0, 0)).collect();
        assert!(w.windows(2).all(|p| p[1] >= p[0]), "{w:?}");
        assert!(*w.last().unwrap() > 0.5, "{w:?}");
    }

    #[test]
    fn history_start_and_batch_streams() {
        let g = pennies();
        let mut cfg = RunConfig::regret_matching(100, 4);
        cfg.initial = Initial::History(vec![(0, 0), (1, 1), (0, 1)]);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        assert_eq!(tr.first().t, 3);
        assert_eq!(tr.periods.as_ref().unwrap().len(), 100);
        let finals = batch_map(&g, &cfg, 4, |_, tr| tr.last().z.clone()).unwrap();
        assert_eq!(finals.len(), 4);
        assert_ne!(finals[0], finals[1]);
    }
}
