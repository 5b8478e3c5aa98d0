//! Continuous-time dynamics.
//!
//! Continuous fictitious play is integrated piece by piece. On a piece the
//! mixed reply `q` is constant, so `t x(t)` and `t z(t)` are affine in `t`
//! and the payoff-difference numerators `t (u(k, x) - u(k', x))` are affine
//! too. Switch times are located by bisection on those numerators.
//!
//! The no-regret flow `z' = (q(z) - z) / t` is smooth while regrets are
//! positive and is integrated with an embedded Dormand-Prince 5(4) pair.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{some_equilibrium, subgame};
use crate::error::{Error, Result};
use crate::game::{sup_distance, Game, JointDistribution, MixedAction, MixedProfile, Player};
use crate::strategy::{q1_action, PotentialSpec};

/// Bisection stops once the bracket is this narrow (in `t`).
const BISECTION_WIDTH: f64 = 1e-12;
/// Slopes below this count as "not catching up".
const SLOPE_EPS: f64 = 1e-13;
/// Consecutive pieces shrinking by at least this factor signal accumulating switches.
const ACCUMULATION_RATIO: f64 = 0.5;
const ACCUMULATION_RUN: usize = 8;
/// Tie tolerance used when re-entering at an accumulation point.
const REENTRY_TIE_TOL: f64 = 1e-7;
const STALL_LENGTH: f64 = 1e-14;
const STALL_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Play a Nash equilibrium of the game restricted to the tied actions.
    #[default]
    RestrictedEquilibrium,
    /// Play the lowest-index tied action. Cheaper, but may chatter.
    LowestIndex,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "restricted_equilibrium" | "restricted" | "equilibrium" => Ok(TiePolicy::RestrictedEquilibrium),
            "lowest_index" | "lowest" => Ok(TiePolicy::LowestIndex),
            _ => Err(Error::Parse(format!("unknown tie policy '{s}'"))),
        }
    }
}

/// A piecewise-constant mixed path for one player, used in place of that
/// player's best replies.
#[derive(Debug, Clone)]
pub struct OpponentScript {
    pub player: Player,
    /// `(start time, action)` with increasing start times, the first at `t <= 1`.
    pub pieces: Vec<(f64, MixedAction)>,
}

impl OpponentScript {
    fn at(&self, t: f64) -> &MixedAction {
        let idx = self.pieces.partition_point(|(s, _)| *s <= t);
        &self.pieces[idx.saturating_sub(1)].1
    }

    fn next_change(&self, t: f64) -> Option<f64> {
        self.pieces.iter().map(|(s, _)| *s).find(|&s| s > t)
    }

    /// Alternates between two actions on pieces of geometrically growing length.
    pub fn oscillating(player: Player, a: MixedAction, b: MixedAction, ratio: f64, horizon: f64) -> Self {
        let mut pieces = vec![(1.0, a.clone())];
        let mut t = 1.0;
        let mut flip = true;
        while t < horizon {
            t *= ratio;
            pieces.push((t, if flip { b.clone() } else { a.clone() }));
            flip = !flip;
        }
        OpponentScript { player, pieces }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakKind {
    Start,
    Switch,
    Script,
    Accumulation,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub kind: BreakKind,
    pub x: [Vec<f64>; 2],
    pub z: Vec<f64>,
    pub r_max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub q: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// Original time `t`.
    Linear,
    /// `tau = ln t`, the best-reply-dynamics clock.
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuousTrajectory {
    pub rows: usize,
    pub cols: usize,
    pub time_scale: TimeScale,
    pub breakpoints: Vec<Breakpoint>,
    pub pieces: Vec<Piece>,
    pub tie_policy: TiePolicy,
    /// Player whose play was scripted, if any.
    pub scripted: Option<Player>,
}

impl ContinuousTrajectory {
    pub fn last(&self) -> &Breakpoint {
        self.breakpoints.last().expect("trajectory has a start point")
    }

    /// Beliefs at time `t` in the original clock, from the closed form of
    /// the piece containing `t`.
    pub fn beliefs_at(&self, t: f64) -> Option<[Vec<f64>; 2]> {
        if self.time_scale != TimeScale::Linear {
            return None;
        }
        let idx = self.pieces.iter().position(|p| p.start <= t && t <= p.end)?;
        let p = &self.pieces[idx];
        let s = &self.breakpoints[idx];
        let mix = |x: &[f64], q: &[f64]| -> Vec<f64> {
            x.iter().zip(q).map(|(x, q)| (p.start * x + (t - p.start) * q) / t).collect()
        };
        Some([mix(&s.x[0], &p.q[0]), mix(&s.x[1], &p.q[1])])
    }
}

fn max_regret(game: &Game, player: Player, x: &[Vec<f64>; 2], z: &[f64]) -> f64 {
    let i = player.index();
    let pay = game.reply_payoffs(player, &x[1 - i]);
    let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let realized: f64 = game.table(player).iter().zip(z).map(|(u, w)| u * w).sum();
    best - realized
}

fn tied(pay: &[f64], tol: f64) -> Vec<usize> {
    let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..pay.len()).filter(|&k| pay[k] >= best - tol).collect()
}

fn pure(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Lowest-index action of `set` maximizing `values`.
fn best_in(set: &[usize], values: &[f64]) -> usize {
    let mut best = set[0];
    for &k in &set[1..] {
        if values[k] > values[best] {
            best = k;
        }
    }
    best
}

fn select(
    game: &Game,
    x: &[Vec<f64>; 2],
    t: f64,
    policy: TiePolicy,
    script: Option<&OpponentScript>,
    tie_tol: f64,
) -> Result<[Vec<f64>; 2]> {
    let dims = [game.rows(), game.cols()];
    let sets = [
        tied(&game.reply_payoffs(Player::One, &x[1]), tie_tol),
        tied(&game.reply_payoffs(Player::Two, &x[0]), tie_tol),
    ];
    if let Some(s) = script {
        let j = s.player.index();
        let i = 1 - j;
        let qs = s.at(t).weights().to_vec();
        let mover = if j == 0 { Player::Two } else { Player::One };
        let k = match policy {
            TiePolicy::LowestIndex => sets[i][0],
            TiePolicy::RestrictedEquilibrium => best_in(&sets[i], &game.reply_payoffs(mover, &qs)),
        };
        let mut q = [Vec::new(), Vec::new()];
        q[i] = pure(dims[i], k);
        q[j] = qs;
        return Ok(q);
    }
    if policy == TiePolicy::LowestIndex || (sets[0].len() == 1 && sets[1].len() == 1) {
        return Ok([pure(dims[0], sets[0][0]), pure(dims[1], sets[1][0])]);
    }
    let reduced = subgame(game, &sets[0], &sets[1])?;
    let ne = some_equilibrium(&reduced)?;
    let lift = |i: usize, w: &[f64]| {
        let mut v = vec![0.0; dims[i]];
        for (j, &k) in sets[i].iter().enumerate() {
            v[k] = w[j];
        }
        v
    };
    Ok([lift(0, ne.get(Player::One).weights()), lift(1, ne.get(Player::Two).weights())])
}

/// First time in `(t, limit]` at which an action outside the support of
/// `q_i` catches up with the support, if any.
fn next_switch(game: &Game, player: Player, x: &[Vec<f64>; 2], q: &[Vec<f64>; 2], t: f64, limit: f64) -> Option<f64> {
    let i = player.index();
    let a = game.reply_payoffs(player, &x[1 - i]);
    let b = game.reply_payoffs(player, &q[1 - i]);
    let support: Vec<usize> = (0..q[i].len()).filter(|&k| q[i][k] > 0.0).collect();
    let r = best_in(&support, &a);
    let mut earliest: Option<f64> = None;
    for k in (0..a.len()).filter(|k| q[i][*k] == 0.0) {
        let slope = b[k] - b[r];
        if slope <= SLOPE_EPS {
            continue;
        }
        let lim = earliest.unwrap_or(limit);
        let d = |s: f64| t * (a[k] - a[r]) + (s - t) * slope;
        if d(lim) <= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (t, lim);
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if d(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        earliest = Some(hi);
    }
    earliest
}

fn advance(x: &mut [Vec<f64>; 2], z: &mut [f64], q: &[Vec<f64>; 2], t: f64, t_next: f64, cols: usize) {
    let dt = t_next - t;
    for i in 0..2 {
        for (xv, qv) in x[i].iter_mut().zip(&q[i]) {
            *xv = (t * *xv + dt * qv) / t_next;
        }
    }
    for (idx, w) in z.iter_mut().enumerate() {
        let inc = q[0][idx / cols] * q[1][idx % cols];
        *w = (t * *w + dt * inc) / t_next;
    }
}

/// Options of [`cfp_integrate`].
#[derive(Debug, Clone, Copy)]
pub struct CfpOptions {
    pub tie_policy: TiePolicy,
    /// Payoff tolerance under which actions count as tied.
    pub root_tol: f64,
}

impl Default for CfpOptions {
    fn default() -> Self {
        CfpOptions { tie_policy: TiePolicy::RestrictedEquilibrium, root_tol: 1e-10 }
    }
}

/// Continuous fictitious play on `[1, horizon]` from beliefs `x0` and
/// correlated average `z0`.
pub fn cfp_integrate(
    game: &Game,
    x0: &MixedProfile,
    z0: &JointDistribution,
    horizon: f64,
    opts: CfpOptions,
) -> Result<ContinuousTrajectory> {
    integrate(game, x0, z0, horizon, opts, None)
}

/// As [`cfp_integrate`], with one player following `script` instead of
/// best-replying.
pub fn cfp_integrate_scripted(
    game: &Game,
    x0: &MixedProfile,
    z0: &JointDistribution,
    horizon: f64,
    opts: CfpOptions,
    script: &OpponentScript,
) -> Result<ContinuousTrajectory> {
    if script.pieces.is_empty() || script.pieces[0].0 > 1.0 {
        return Err(Error::InvalidParameter("script must start at or before t = 1".into()));
    }
    if script.pieces.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("script start times must increase".into()));
    }
    let n = game.actions(script.player);
    if script.pieces.iter().any(|(_, a)| a.len() != n) {
        return Err(Error::DimensionMismatch("scripted action has the wrong size".into()));
    }
    integrate(game, x0, z0, horizon, opts, Some(script))
}

fn integrate(
    game: &Game,
    x0: &MixedProfile,
    z0: &JointDistribution,
    horizon: f64,
    opts: CfpOptions,
    script: Option<&OpponentScript>,
) -> Result<ContinuousTrajectory> {
    if !(horizon > 1.0) {
        return Err(Error::InvalidParameter(format!("horizon must exceed 1, got {horizon}")));
    }
    if !(opts.root_tol > 0.0) {
        return Err(Error::InvalidParameter("root tolerance must be positive".into()));
    }
    x0.check(game)?;
    if z0.rows() != game.rows() || z0.cols() != game.cols() {
        return Err(Error::DimensionMismatch("initial distribution does not fit the game".into()));
    }
    if z0.marginals().sup_distance(x0) > 1e-9 {
        return Err(Error::PreconditionViolated("x0 must be the marginals of z0".into()));
    }
    let cols = game.cols();
    let mut x = [x0.get(Player::One).weights().to_vec(), x0.get(Player::Two).weights().to_vec()];
    let mut z = z0.weights().to_vec();
    let mut t = 1.0;
    let bp = |t: f64, kind: BreakKind, x: &[Vec<f64>; 2], z: &[f64]| Breakpoint {
        t,
        kind,
        x: x.clone(),
        z: z.to_vec(),
        r_max: [max_regret(game, Player::One, x, z), max_regret(game, Player::Two, x, z)],
    };
    let mut breakpoints = vec![bp(t, BreakKind::Start, &x, &z)];
    let mut pieces: Vec<Piece> = Vec::new();
    let mut tie_tol = opts.root_tol;
    let mut shrinking = 0usize;
    let mut tiny = 0usize;

    while t < horizon {
        let q = select(game, &x, t, opts.tie_policy, script, tie_tol)?;
        tie_tol = opts.root_tol;
        let mut t_next = horizon;
        let mut kind = BreakKind::End;
        if let Some(s) = script {
            if let Some(c) = s.next_change(t) {
                if c < t_next {
                    t_next = c;
                    kind = BreakKind::Script;
                }
            }
        }
        for pl in Player::BOTH {
            if script.is_some_and(|s| s.player == pl) {
                continue;
            }
            if let Some(ts) = next_switch(game, pl, &x, &q, t, t_next) {
                if ts < t_next {
                    t_next = ts;
                    kind = BreakKind::Switch;
                }
            }
        }

        let len = t_next - t;
        if len < STALL_LENGTH * t.max(1.0) {
            tiny += 1;
            if tiny > STALL_LIMIT {
                return Err(Error::StalledIntegration { t });
            }
        } else {
            tiny = 0;
        }
        if let Some(prev) = pieces.last() {
            let prev_len = prev.end - prev.start;
            shrinking = if len <= ACCUMULATION_RATIO * prev_len { shrinking + 1 } else { 0 };
        }
        advance(&mut x, &mut z, &q, t, t_next, cols);
        pieces.push(Piece { start: t, end: t_next, q: q.clone() });
        t = t_next;
        breakpoints.push(bp(t, kind, &x, &z));

        if shrinking >= ACCUMULATION_RUN && t < horizon {
            // geometric extrapolation of the switching times; the state moves
            // with the length-weighted average reply of the recent pieces
            let recent = &pieces[pieces.len() - ACCUMULATION_RUN..];
            let l1 = recent[recent.len() - 1].end - recent[recent.len() - 1].start;
            let l0 = recent[recent.len() - 2].end - recent[recent.len() - 2].start;
            let r = (l1 / l0).min(ACCUMULATION_RATIO);
            let t_star = (t + l1 * r / (1.0 - r)).min(horizon);
            let total: f64 = recent.iter().map(|p| p.end - p.start).sum();
            let mut q_bar = [vec![0.0; game.rows()], vec![0.0; cols]];
            for p in recent {
                let w = (p.end - p.start) / total;
                for i in 0..2 {
                    for (a, b) in q_bar[i].iter_mut().zip(&p.q[i]) {
                        *a += w * b;
                    }
                }
            }
            // the correlated increment of a sliding phase is the average of the products
            let mut inc = vec![0.0; z.len()];
            for p in recent {
                let w = (p.end - p.start) / total;
                for (idx, v) in inc.iter_mut().enumerate() {
                    *v += w * p.q[0][idx / cols] * p.q[1][idx % cols];
                }
            }
            let dt = t_star - t;
            for i in 0..2 {
                for (xv, qv) in x[i].iter_mut().zip(&q_bar[i]) {
                    *xv = (t * *xv + dt * qv) / t_star;
                }
            }
            for (w, v) in z.iter_mut().zip(&inc) {
                *w = (t * *w + dt * v) / t_star;
            }
            pieces.push(Piece { start: t, end: t_star, q: q_bar });
            t = t_star;
            breakpoints.push(bp(t, BreakKind::Accumulation, &x, &z));
            tie_tol = REENTRY_TIE_TOL;
            shrinking = 0;
        }
    }
    Ok(ContinuousTrajectory {
        rows: game.rows(),
        cols,
        time_scale: TimeScale::Linear,
        breakpoints,
        pieces,
        tie_policy: opts.tie_policy,
        scripted: script.map(|s| s.player),
    })
}

/// Per player, `max |t R_max(t) - R_max(1)|` over breakpoints.
pub fn regret_conservation_residual(traj: &ContinuousTrajectory) -> [f64; 2] {
    let first = &traj.breakpoints[0];
    let mut out = [0.0_f64; 2];
    for b in &traj.breakpoints {
        let t = match traj.time_scale {
            TimeScale::Linear => b.t,
            TimeScale::Log => b.t.exp(),
        };
        for i in 0..2 {
            out[i] = out[i].max((t * b.r_max[i] - first.r_max[i]).abs());
        }
    }
    out
}

/// Worst amount by which a piece's reply falls short of the best payoff at
/// either end of the piece. Scripted players are skipped.
pub fn best_reply_violation(game: &Game, traj: &ContinuousTrajectory) -> f64 {
    let mut worst = 0.0_f64;
    for (idx, p) in traj.pieces.iter().enumerate() {
        for end in [&traj.breakpoints[idx], &traj.breakpoints[idx + 1]] {
            for pl in Player::BOTH {
                if traj.scripted == Some(pl) {
                    continue;
                }
                let i = pl.index();
                let pay = game.reply_payoffs(pl, &end.x[1 - i]);
                let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (k, w) in p.q[i].iter().enumerate() {
                    if *w > 0.0 {
                        worst = worst.max(best - pay[k]);
                    }
                }
            }
        }
    }
    worst
}

/// Reparameterizes by `tau = ln t`.
pub fn rescale_to_br_dynamics(traj: &ContinuousTrajectory) -> ContinuousTrajectory {
    remap(traj, TimeScale::Log, f64::ln)
}

/// Inverse of [`rescale_to_br_dynamics`].
pub fn unrescale(traj: &ContinuousTrajectory) -> ContinuousTrajectory {
    remap(traj, TimeScale::Linear, f64::exp)
}

fn remap(traj: &ContinuousTrajectory, scale: TimeScale, f: fn(f64) -> f64) -> ContinuousTrajectory {
    if traj.time_scale == scale {
        return traj.clone();
    }
    let mut out = traj.clone();
    out.time_scale = scale;
    for b in &mut out.breakpoints {
        b.t = f(b.t);
    }
    for p in &mut out.pieces {
        p.start = f(p.start);
        p.end = f(p.end);
    }
    out
}

/// Step-size control of [`cont_no_regret_integrate`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Steps are clamped to at most this fraction of `t`.
    pub max_step_fraction: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-8, atol: 1e-12, max_step_fraction: 0.01, initial_step: 1e-3, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub z: Vec<f64>,
    pub r_max: [f64; 2],
    pub potential: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub rows: usize,
    pub cols: usize,
    pub records: Vec<FlowRecord>,
    pub rejected_steps: usize,
    /// Accepted steps at which some maximal regret was not positive.
    pub positivity_violations: usize,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("flow has a start point")
    }

    pub fn min_r_max(&self) -> [f64; 2] {
        let mut m = [f64::INFINITY; 2];
        for r in &self.records {
            for i in 0..2 {
                m[i] = m[i].min(r.r_max[i]);
            }
        }
        m
    }
}

fn flow_regrets(game: &Game, z: &[f64]) -> [Vec<f64>; 2] {
    let (m, n) = (game.rows(), game.cols());
    let mut x = [vec![0.0; m], vec![0.0; n]];
    for (idx, w) in z.iter().enumerate() {
        x[0][idx / n] += w;
        x[1][idx % n] += w;
    }
    let mut out = [Vec::new(), Vec::new()];
    for pl in Player::BOTH {
        let i = pl.index();
        let realized: f64 = game.table(pl).iter().zip(z).map(|(u, w)| u * w).sum();
        out[i] = game.reply_payoffs(pl, &x[1 - i]).into_iter().map(|v| v - realized).collect();
    }
    out
}

fn flow_rhs(game: &Game, specs: [&PotentialSpec; 2], t: f64, z: &[f64]) -> Result<Vec<f64>> {
    let r = flow_regrets(game, z);
    let mut q = [Vec::new(), Vec::new()];
    for pl in Player::BOTH {
        let i = pl.index();
        let rv = crate::RegretVector::new(pl, r[i].clone());
        q[i] = q1_action(specs[i], &rv)
            .map_err(|_| Error::StalledIntegration { t })?
            .into_inner();
    }
    let n = game.cols();
    Ok(z.iter()
        .enumerate()
        .map(|(idx, w)| (q[0][idx / n] * q[1][idx % n] - w) / t)
        .collect())
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Trial {
    y: Vec<f64>,
    k: Vec<Vec<f64>>,
    k_last: Vec<f64>,
}

fn dp_trial(game: &Game, specs: [&PotentialSpec; 2], t: f64, z: &[f64], k0: &[f64], h: f64) -> Option<Trial> {
    let dim = z.len();
    let mut k = vec![k0.to_vec()];
    let mut y = vec![0.0; dim];
    for s in 1..7 {
        for j in 0..dim {
            y[j] = z[j] + h * (0..s).map(|l| A[s][l] * k[l][j]).sum::<f64>();
        }
        k.push(flow_rhs(game, specs, t + C[s] * h, &y).ok()?);
    }
    // the last stage is evaluated at the fifth-order solution
    let k_last = k[6].clone();
    Some(Trial { y, k, k_last })
}

fn trial_error(trial: &Trial, z: &[f64], h: f64, ctl: &StepControl) -> f64 {
    let mut err: f64 = 0.0;
    for j in 0..z.len() {
        let e = h * (0..7).map(|l| (B5[l] - B4[l]) * trial.k[l][j]).sum::<f64>();
        let scale = ctl.atol + ctl.rtol * z[j].abs().max(trial.y[j].abs());
        err = err.max((e / scale).abs());
    }
    err
}

fn sign_pattern(r: &[Vec<f64>; 2]) -> Vec<bool> {
    r.iter().flat_map(|v| v.iter().map(|x| *x > 0.0)).collect()
}

/// Integrates `z' = (q1(z) x q2(z) - z) / t` on `[1, horizon]`, where `q_i`
/// is the normalized potential gradient at player `i`'s regrets.
pub fn cont_no_regret_integrate(
    game: &Game,
    specs: [&PotentialSpec; 2],
    z1: &JointDistribution,
    horizon: f64,
    ctl: &StepControl,
) -> Result<FlowTrajectory> {
    if !(horizon > 1.0) {
        return Err(Error::InvalidParameter(format!("horizon must exceed 1, got {horizon}")));
    }
    if z1.rows() != game.rows() || z1.cols() != game.cols() {
        return Err(Error::DimensionMismatch("initial distribution does not fit the game".into()));
    }
    let potentials = |r: &[Vec<f64>; 2]| [specs[0].value(&r[0]), specs[1].value(&r[1])];
    let r_max = |r: &[Vec<f64>; 2]| {
        [
            r[0].iter().copied().fold(f64::NEG_INFINITY, f64::max),
            r[1].iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ]
    };
    let mut z = z1.weights().to_vec();
    let r0 = flow_regrets(game, &z);
    let m0 = r_max(&r0);
    if m0[0] <= 0.0 || m0[1] <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "both players need a positive regret at the start, got maxima {} and {}",
            m0[0], m0[1]
        )));
    }
    let mut records = vec![FlowRecord { t: 1.0, z: z.clone(), r_max: m0, potential: potentials(&r0) }];
    let mut t = 1.0_f64;
    let mut h = ctl.initial_step.min(ctl.max_step_fraction);
    let mut rejected = 0;
    let mut violations = 0;
    let mut k0 = flow_rhs(game, specs, t, &z)?;
    let mut pattern = sign_pattern(&r0);
    let mut steps = 0;
    while t < horizon {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::StalledIntegration { t });
        }
        h = h.min(ctl.max_step_fraction * t).min(horizon - t);
        if h < 1e-14 * t {
            return Err(Error::StalledIntegration { t });
        }
        let Some(mut trial) = dp_trial(game, specs, t, &z, &k0, h) else {
            // a trial stage left the region with positive regrets
            rejected += 1;
            h *= 0.25;
            continue;
        };
        let mut taken = h;
        let mut r = flow_regrets(game, &trial.y);
        if sign_pattern(&r) != pattern {
            // The gradient map has a kink where a regret changes sign. Land
            // just past the crossing so no step straddles it.
            let (mut lo, mut hi) = (0.0, h);
            let mut best = None;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match dp_trial(game, specs, t, &z, &k0, mid) {
                    Some(tr) => {
                        let rm = flow_regrets(game, &tr.y);
                        if sign_pattern(&rm) == pattern {
                            lo = mid;
                        } else {
                            hi = mid;
                            best = Some((tr, rm));
                        }
                    }
                    None => hi = mid,
                }
            }
            if let Some((tr, rm)) = best {
                trial = tr;
                r = rm;
                taken = hi;
            }
        }
        let err = trial_error(&trial, &z, taken, ctl);
        if err > 1.0 {
            rejected += 1;
            h = taken * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            continue;
        }
        t += taken;
        z = trial.y;
        k0 = trial.k_last;
        pattern = sign_pattern(&r);
        let m = r_max(&r);
        if m[0] <= 0.0 || m[1] <= 0.0 {
            violations += 1;
        }
        records.push(FlowRecord { t, z: z.clone(), r_max: m, potential: potentials(&r) });
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).max(taken);
    }
    Ok(FlowTrajectory { rows: game.rows(), cols: game.cols(), records, rejected_steps: rejected, positivity_violations: violations })
}

/// Sup-norm distance between two belief pairs.
pub fn belief_distance(a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> f64 {
    sup_distance(&a[0], &b[0]).max(sup_distance(&a[1], &b[1]))
}
