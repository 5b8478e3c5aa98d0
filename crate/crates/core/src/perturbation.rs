//! Perturbation diagnostics along discrete trajectories, interpolated belief
//! paths and empirical limit sets of beliefs.

use serde::{Deserialize, Serialize};

use crate::discrete::{PeriodRecord, Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::game::{sup_distance, Game, JointDistribution, MixedAction, MixedProfile, Player};
use crate::lp::{LpProblem, LpStatus, Relation, Sense};

const MAX_GRAPH_ACTIONS: usize = 12;
const MIN_TAIL: usize = 20;

/// Per-period perturbation levels of a realized trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSeries {
    pub t: Vec<u64>,
    /// Smallest payoff slack making the realized actions best replies to the
    /// previous beliefs, maximized over players.
    pub epsilon: Vec<f64>,
    /// Graph distance of the realized actions to the best-reply graph at the
    /// previous beliefs, maximized over players.
    pub delta: Vec<f64>,
    /// Both players' maximal regrets in the previous period.
    pub prior_r_max: Vec<[f64; 2]>,
}

impl PerturbationSeries {
    /// Largest `epsilon_t - max_i R_i,max(t-1)` over periods where both
    /// previous maxima are positive, or `None` if there is no such period.
    pub fn regret_bound_excess(&self) -> Option<f64> {
        self.epsilon
            .iter()
            .zip(&self.prior_r_max)
            .filter(|(_, r)| r[0] > 0.0 && r[1] > 0.0)
            .map(|(e, r)| e - r[0].max(r[1]))
            .reduce(f64::max)
    }
}

/// Perturbation levels of every period after the first.
///
/// Beliefs are rebuilt from the recorded realized actions, so the trajectory
/// must have been run with per-period records of a realized-play kind.
pub fn payoff_perturbation_series(game: &Game, traj: &Trajectory) -> Result<PerturbationSeries> {
    perturbation_from_records(game, traj.periods.as_deref().ok_or(Error::MissingRecords)?)
}

/// [`payoff_perturbation_series`] over consecutive period records.
pub fn perturbation_from_records(game: &Game, periods: &[PeriodRecord]) -> Result<PerturbationSeries> {
    let first = periods.first().ok_or(Error::MissingRecords)?;
    let mut counts = [vec![0.0; game.rows()], vec![0.0; game.cols()]];
    let mut out = PerturbationSeries { t: Vec::new(), epsilon: Vec::new(), delta: Vec::new(), prior_r_max: Vec::new() };
    for (idx, rec) in periods.iter().enumerate() {
        if rec.t != first.t + idx as u64 {
            return Err(Error::MissingRecords);
        }
        let (a1, a2) = rec.actions.ok_or(Error::MissingRecords)?;
        if idx > 0 {
            let n = idx as f64;
            let beliefs = [
                counts[0].iter().map(|c| c / n).collect::<Vec<_>>(),
                counts[1].iter().map(|c| c / n).collect::<Vec<_>>(),
            ];
            let mut eps: f64 = 0.0;
            let mut del: f64 = 0.0;
            for (player, own) in [(Player::One, a1), (Player::Two, a2)] {
                let opp = &beliefs[player.opponent().index()];
                let payoffs = game.reply_payoffs(player, opp);
                let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                eps = eps.max((best - payoffs[own]).max(0.0));
                del = del.max(pure_graph_distance(game, player, own, opp)?);
            }
            out.t.push(rec.t);
            out.epsilon.push(eps);
            out.delta.push(del);
            out.prior_r_max.push(periods[idx - 1].r_max);
        }
        counts[0][a1] += 1.0;
        counts[1][a2] += 1.0;
    }
    Ok(out)
}

/// Sup-norm distance from `x` to the face of the simplex spanned by `face`.
fn face_distance(x: &[f64], face: &[usize]) -> f64 {
    let mut inside = vec![false; x.len()];
    face.iter().for_each(|&k| inside[k] = true);
    let outside = x.iter().zip(&inside).filter(|(_, i)| !**i).map(|(v, _)| *v).fold(0.0, f64::max);
    let mass: f64 = face.iter().map(|&k| x[k]).sum();
    outside.max((1.0 - mass) / face.len() as f64).max(0.0)
}

/// Sup-norm distance from the opponent belief `y` to the set of beliefs
/// against which every action in `tied` is a best reply (infinite if empty).
fn region_distance(game: &Game, player: Player, tied: &[usize], y: &[f64]) -> Result<f64> {
    let own = game.actions(player);
    let payoffs = game.reply_payoffs(player, y);
    let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tied.iter().all(|&k| payoffs[k] == best) {
        return Ok(0.0);
    }
    let n = y.len();
    let s = n;
    let mut obj = vec![0.0; n + 1];
    obj[s] = 1.0;
    let mut lp = LpProblem::new(obj, Sense::Minimize);
    for (j, &yj) in y.iter().enumerate() {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        row[s] = -1.0;
        lp.constrain(row.clone(), Relation::Le, yj);
        row[j] = -1.0;
        lp.constrain(row, Relation::Le, -yj);
    }
    let mut row = vec![1.0; n + 1];
    row[s] = 0.0;
    lp.constrain(row, Relation::Eq, 1.0);
    for &k in tied {
        for j in (0..own).filter(|j| !tied.contains(j)) {
            // u(k, y') - u(j, y') >= 0
            let mut row: Vec<f64> = (0..n).map(|b| game.payoff_vs(player, k, b) - game.payoff_vs(player, j, b)).collect();
            row.push(0.0);
            lp.constrain(row, Relation::Ge, 0.0);
        }
        if let Some(&k0) = tied.first() {
            if k != k0 {
                let mut row: Vec<f64> =
                    (0..n).map(|b| game.payoff_vs(player, k, b) - game.payoff_vs(player, k0, b)).collect();
                row.push(0.0);
                lp.constrain(row, Relation::Eq, 0.0);
            }
        }
    }
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value.max(0.0)),
        LpStatus::Infeasible => Ok(f64::INFINITY),
        LpStatus::Unbounded => Err(Error::Lp("region distance unbounded".into())),
    }
}

fn pure_graph_distance(game: &Game, player: Player, k: usize, y: &[f64]) -> Result<f64> {
    // a pure action is 1 away from every face that omits it, and the region
    // of any tie set containing k lies inside the region of k alone
    Ok(region_distance(game, player, &[k], y)?.min(1.0))
}

/// Smallest `delta` such that `(x_i, x_opp)` lies within sup-norm `delta` of
/// the graph of player `player`'s best-reply correspondence.
pub fn graph_br_distance(game: &Game, player: Player, x_i: &MixedAction, x_opp: &MixedAction) -> Result<f64> {
    let own = game.actions(player);
    let opp = game.actions(player.opponent());
    if x_i.len() != own || x_opp.len() != opp {
        return Err(Error::DimensionMismatch(format!(
            "graph distance for {player} needs actions of sizes {own} and {opp}"
        )));
    }
    let x = x_i.weights();
    let y = x_opp.weights();
    if let Some(k) = x.iter().position(|&v| v == 1.0) {
        return pure_graph_distance(game, player, k, y);
    }
    if own > MAX_GRAPH_ACTIONS {
        return Err(Error::OversizedGame { op: "graph_br_distance", rows: game.rows(), cols: game.cols() });
    }
    let mut best: f64 = 1.0;
    for mask in 1u32..(1u32 << own) {
        let face: Vec<usize> = (0..own).filter(|k| mask & (1 << k) != 0).collect();
        let dx = face_distance(x, &face);
        if dx >= best {
            continue;
        }
        let dy = region_distance(game, player, &face, y)?;
        best = best.min(dx.max(dy));
    }
    Ok(best)
}

/// All points of the simplex of dimension `n - 1` with coordinates in
/// multiples of `1 / steps`.
pub fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn fill(n: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            fill(n, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        fill(n, steps, steps, &mut Vec::new(), &mut out);
    }
    out
}

/// Outcome of the grid check that small payoff slack implies small graph
/// distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlackInclusion {
    pub player: Player,
    pub delta: f64,
    /// A slack for which every grid pair with that much payoff slack is within
    /// graph distance `delta`; positive whenever the inclusion holds.
    pub epsilon: f64,
    /// Smallest slack among grid pairs farther than `delta` from the graph.
    pub threshold: f64,
    pub pairs: usize,
}

/// For each `delta`, finds `epsilon > 0` such that on the grid every own
/// mixed action that is an `epsilon`-best reply is within graph distance
/// `delta` of the best-reply graph.
///
/// Distances do not depend on `epsilon`, so the largest admissible slack on
/// the grid is the smallest slack among pairs violating `delta`, and half of
/// it is returned.
pub fn slack_inclusion_check(
    game: &Game,
    player: Player,
    deltas: &[f64],
    own_steps: usize,
    opp_steps: usize,
) -> Result<Vec<SlackInclusion>> {
    let own = game.actions(player);
    let opp = game.actions(player.opponent());
    let xs = simplex_grid(own, own_steps);
    let ys = simplex_grid(opp, opp_steps);
    let mut pairs = Vec::with_capacity(xs.len() * ys.len());
    for y in &ys {
        let payoffs = game.reply_payoffs(player, y);
        let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ym = MixedAction::from_raw(y.clone());
        for x in &xs {
            let value: f64 = x.iter().zip(&payoffs).map(|(a, b)| a * b).sum();
            let d = graph_br_distance(game, player, &MixedAction::from_raw(x.clone()), &ym)?;
            pairs.push((best - value, d));
        }
    }
    let slack_cap = 2.0 * game.payoff_bound() + 1.0;
    Ok(deltas
        .iter()
        .map(|&delta| {
            let threshold = pairs.iter().filter(|(_, d)| *d > delta).map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
            SlackInclusion {
                player,
                delta,
                epsilon: if threshold.is_finite() { 0.5 * threshold } else { slack_cap },
                threshold,
                pairs: pairs.len(),
            }
        })
        .collect())
}

/// Beliefs of both players, flattened as `x1 ++ x2`, for every recorded
/// period. Returns the first period and the sequence.
pub fn belief_sequence(game: &Game, traj: &Trajectory) -> Result<(u64, Vec<Vec<f64>>)> {
    let periods = traj.periods.as_ref().ok_or(Error::MissingRecords)?;
    let first = periods.first().ok_or(Error::MissingRecords)?;
    let (m, n) = (game.rows(), game.cols());
    let mut sum = vec![0.0; m + n];
    let mut out = Vec::with_capacity(periods.len());
    for (idx, rec) in periods.iter().enumerate() {
        if rec.t != first.t + idx as u64 {
            return Err(Error::MissingRecords);
        }
        match (rec.actions, &rec.mixed) {
            (Some((a1, a2)), _) => {
                sum[a1] += 1.0;
                sum[m + a2] += 1.0;
            }
            (None, Some([q1, q2])) => {
                q1.iter().chain(q2).zip(sum.iter_mut()).for_each(|(q, s)| *s += q);
            }
            (None, None) => return Err(Error::MissingRecords),
        }
        let k = (idx + 1) as f64;
        out.push(sum.iter().map(|s| s / k).collect());
    }
    Ok((first.t, out))
}

/// Piecewise path through a belief sequence with
/// `t x(t) = n x(n) + (t - n) q(n)` on `[n, n + 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolatedPath {
    pub start: u64,
    pub points: Vec<Vec<f64>>,
    pub increments: Vec<Vec<f64>>,
    /// Largest `||x(t) - x(n)|| - 1 / (n + 1)` over the intervals.
    pub max_excess: f64,
}

impl InterpolatedPath {
    pub fn end(&self) -> u64 {
        self.start + self.points.len() as u64 - 1
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.start as f64, self.end() as f64);
        let j = ((t.floor() as u64).saturating_sub(self.start) as usize).min(self.increments.len().saturating_sub(1));
        if self.increments.is_empty() {
            return self.points[0].clone();
        }
        let n = (self.start + j as u64) as f64;
        self.points[j].iter().zip(&self.increments[j]).map(|(x, q)| (n * x + (t - n) * q) / t).collect()
    }
}

/// Interpolates a belief sequence starting at period `start`.
///
/// The increments `q(n) = (n + 1) x(n + 1) - n x(n)` must be probability
/// vectors per player block up to rounding; `blocks` gives the block sizes.
pub fn interpolate(start: u64, beliefs: &[Vec<f64>], blocks: &[usize]) -> Result<InterpolatedPath> {
    if start < 1 || beliefs.is_empty() {
        return Err(Error::InvalidParameter("interpolation needs a nonempty sequence from period 1 on".into()));
    }
    let dim = beliefs[0].len();
    if blocks.iter().sum::<usize>() != dim || beliefs.iter().any(|b| b.len() != dim) {
        return Err(Error::DimensionMismatch("belief blocks do not fit the sequence".into()));
    }
    let mut increments = Vec::with_capacity(beliefs.len().saturating_sub(1));
    let mut max_excess = f64::NEG_INFINITY;
    for (j, w) in beliefs.windows(2).enumerate() {
        let n = (start + j as u64) as f64;
        let q: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| (n + 1.0) * b - n * a).collect();
        let mut off = 0;
        for &len in blocks {
            let block = &q[off..off + len];
            let mass: f64 = block.iter().sum();
            if block.iter().any(|&v| v < -1e-9) || (mass - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!("increment at period {n} is not a probability vector")));
            }
            off += len;
        }
        // the displacement grows with t inside the interval
        max_excess = max_excess.max(sup_distance(&w[1], &w[0]) - 1.0 / (n + 1.0));
        increments.push(q);
    }
    Ok(InterpolatedPath { start, points: beliefs.to_vec(), increments, max_excess })
}

/// Sup-norm distance from `z` to the reduced Hannan set, where both players'
/// maximal regrets are exactly zero.
pub fn distance_to_reduced_hannan(game: &Game, z: &JointDistribution) -> Result<f64> {
    let (m, n) = (game.rows(), game.cols());
    let nw = m * n;
    let regret_row = |player: Player, k: usize| -> Vec<f64> {
        let mut row = vec![0.0; nw + 1];
        for a1 in 0..m {
            for a2 in 0..n {
                let dev = match player {
                    Player::One => game.payoff(player, k, a2),
                    Player::Two => game.payoff(player, a1, k),
                };
                row[a1 * n + a2] = dev - game.payoff(player, a1, a2);
            }
        }
        row
    };
    let mut best = f64::INFINITY;
    for k1 in 0..m {
        for k2 in 0..n {
            let mut obj = vec![0.0; nw + 1];
            obj[nw] = 1.0;
            let mut lp = LpProblem::new(obj, Sense::Minimize);
            for (j, &w) in z.weights().iter().enumerate() {
                let mut row = vec![0.0; nw + 1];
                row[j] = 1.0;
                row[nw] = -1.0;
                lp.constrain(row.clone(), Relation::Le, w);
                row[j] = -1.0;
                lp.constrain(row, Relation::Le, -w);
            }
            let mut row = vec![1.0; nw + 1];
            row[nw] = 0.0;
            lp.constrain(row, Relation::Eq, 1.0);
            for (player, tight) in [(Player::One, k1), (Player::Two, k2)] {
                for k in 0..game.actions(player) {
                    let rel = if k == tight { Relation::Eq } else { Relation::Le };
                    lp.constrain(regret_row(player, k), rel, 0.0);
                }
            }
            let sol = lp.solve()?;
            if sol.status == LpStatus::Optimal {
                best = best.min(sol.value.max(0.0));
            }
        }
    }
    Ok(best)
}

/// Knobs of [`limit_set_estimate_with`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSetOptions {
    /// Linkage radius for clustering tail beliefs.
    pub radius: f64,
    /// Tail-wide distance under which the tail counts as near an equilibrium.
    pub ne_tol: f64,
    /// Coefficient of variation of return times under which the tail counts
    /// as cycling.
    pub cycle_cv: f64,
}

impl Default for LimitSetOptions {
    fn default() -> Self {
        LimitSetOptions { radius: 0.02, ne_tol: 0.05, cycle_cv: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub center: [Vec<f64>; 2],
    pub size: usize,
    /// Largest sup distance from a member to the center.
    pub spread: f64,
}

/// Recurrence summary of the tail. `cycling` is a reporting heuristic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycling: bool,
    pub returns: usize,
    /// Mean return time in snapshots.
    pub mean_return: f64,
    pub cv: f64,
    /// Mean return time measured in `ln t`.
    pub period_log_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    NeProximal,
    Cycling,
    Unclassified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSetReport {
    pub tail_fraction: f64,
    pub tail_snapshots: usize,
    pub tail_start: u64,
    pub clusters: Vec<Cluster>,
    /// Per equilibrium, the largest sup distance from a tail belief to it.
    pub ne_distances: Vec<f64>,
    /// Per equilibrium, the distance from the final beliefs.
    pub final_ne_distances: Vec<f64>,
    pub h_r_distance: f64,
    pub cycle: CycleReport,
    pub class: LimitClass,
    pub options: LimitSetOptions,
}

/// [`limit_set_estimate_with`] under default options.
pub fn limit_set_estimate(
    game: &Game,
    traj: &Trajectory,
    tail_fraction: f64,
    equilibria: &[MixedProfile],
) -> Result<LimitSetReport> {
    limit_set_estimate_with(game, traj, tail_fraction, equilibria, &LimitSetOptions::default())
}

/// Summarizes the beliefs of the last `tail_fraction` of the snapshots.
///
/// With a geometric recording schedule the tail is a fraction of `ln t`,
/// which is the natural clock of fictitious-play-like cycles.
pub fn limit_set_estimate_with(
    game: &Game,
    traj: &Trajectory,
    tail_fraction: f64,
    equilibria: &[MixedProfile],
    opts: &LimitSetOptions,
) -> Result<LimitSetReport> {
    limit_set_from_snapshots(game, &traj.snapshots, tail_fraction, equilibria, opts)
}

/// [`limit_set_estimate_with`] over recorded snapshots.
pub fn limit_set_from_snapshots(
    game: &Game,
    snapshots: &[Snapshot],
    tail_fraction: f64,
    equilibria: &[MixedProfile],
    opts: &LimitSetOptions,
) -> Result<LimitSetReport> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("tail fraction must lie in (0, 1), got {tail_fraction}")));
    }
    let len = snapshots.len();
    let take = ((len as f64) * tail_fraction).ceil() as usize;
    if take < MIN_TAIL {
        return Err(Error::TailTooShort(take));
    }
    let tail = &snapshots[len - take..];
    let m = game.rows();
    let points: Vec<Vec<f64>> = tail.iter().map(|s| s.beliefs.flat()).collect();

    let clusters = cluster(&points, opts.radius, m);
    let ne_distances: Vec<f64> = equilibria
        .iter()
        .map(|e| tail.iter().map(|s| s.beliefs.sup_distance(e)).fold(0.0, f64::max))
        .collect();
    let last = tail.last().expect("tail is nonempty");
    let final_ne_distances = equilibria.iter().map(|e| last.beliefs.sup_distance(e)).collect();
    let h_r_distance = distance_to_reduced_hannan(game, &last.z)?;
    let times: Vec<f64> = tail.iter().map(|s| (s.t as f64).ln()).collect();
    let cycle = recurrence(&points, &times, opts);
    let class = if ne_distances.iter().any(|&d| d <= opts.ne_tol) {
        LimitClass::NeProximal
    } else if cycle.cycling {
        LimitClass::Cycling
    } else {
        LimitClass::Unclassified
    };
    Ok(LimitSetReport {
        tail_fraction,
        tail_snapshots: take,
        tail_start: tail[0].t,
        clusters,
        ne_distances,
        final_ne_distances,
        h_r_distance,
        cycle,
        class,
        options: opts.clone(),
    })
}

fn cluster(points: &[Vec<f64>], radius: f64, split: usize) -> Vec<Cluster> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if sup_distance(&points[i], &points[j]) <= radius {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Cluster> = groups
        .into_values()
        .map(|members| {
            let dim = points[0].len();
            let mut c = vec![0.0; dim];
            for &i in &members {
                c.iter_mut().zip(&points[i]).for_each(|(a, b)| *a += b);
            }
            c.iter_mut().for_each(|a| *a /= members.len() as f64);
            let spread = members.iter().map(|&i| sup_distance(&points[i], &c)).fold(0.0, f64::max);
            let second = c.split_off(split);
            Cluster { center: [c, second], size: members.len(), spread }
        })
        .collect();
    out.sort_by(|a, b| b.size.cmp(&a.size));
    out
}

fn recurrence(points: &[Vec<f64>], times: &[f64], opts: &LimitSetOptions) -> CycleReport {
    let diameter = points
        .iter()
        .flat_map(|p| points.iter().map(move |q| sup_distance(p, q)))
        .fold(0.0, f64::max);
    let back = opts.radius.max(0.1 * diameter);
    let away = 2.0 * back;
    let mut steps = Vec::new();
    let mut spans = Vec::new();
    for i in 0..points.len() {
        let mut left = false;
        for j in i + 1..points.len() {
            let d = sup_distance(&points[i], &points[j]);
            if !left {
                left = d > away;
            } else if d <= back {
                steps.push((j - i) as f64);
                spans.push(times[j] - times[i]);
                break;
            }
        }
    }
    let returns = steps.len();
    if returns < 3 {
        return CycleReport { cycling: false, returns, mean_return: f64::NAN, cv: f64::NAN, period_log_t: None };
    }
    let mean = steps.iter().sum::<f64>() / returns as f64;
    let var = steps.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / returns as f64;
    let cv = var.sqrt() / mean;
    let period = spans.iter().sum::<f64>() / returns as f64;
    CycleReport { cycling: cv < opts.cycle_cv, returns, mean_return: mean, cv, period_log_t: Some(period) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build;
    use crate::discrete::{run, Initial, RunConfig, Schedule};
    use crate::equilibrium::nash_support_enumeration;

    fn mixed(v: &[f64]) -> MixedAction {
        MixedAction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fig5_graph_distances() {
        let g = build("fig5", &[0.1]).unwrap();
        let y = mixed(&[0.8, 0.2]);
        let c = graph_br_distance(&g, Player::One, &MixedAction::pure(3, 1), &y).unwrap();
        let b = graph_br_distance(&g, Player::One, &MixedAction::pure(3, 2), &y).unwrap();
        assert!((c - 0.3).abs() <= 1e-9, "{c}");
        assert!((b - 1.0).abs() <= 1e-9, "{b}");
    }

    #[test]
    fn exact_best_reply_has_zero_distance() {
        let g = build("shapley", &[]).unwrap();
        let y = mixed(&[0.5, 0.3, 0.2]);
        let k = g.best_reply(Player::One, y.weights());
        assert_eq!(graph_br_distance(&g, Player::One, &MixedAction::pure(3, k), &y).unwrap(), 0.0);
        // a mixture of tied replies at the uniform belief
        let u = MixedAction::uniform(3);
        let d = graph_br_distance(&g, Player::One, &mixed(&[0.2, 0.3, 0.5]), &u).unwrap();
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn mixed_point_off_the_graph() {
        // matching pennies: mixing is a best reply only at y = (1/2, 1/2)
        let g = build("matching_pennies", &[]).unwrap();
        let d = graph_br_distance(&g, Player::One, &mixed(&[0.5, 0.5]), &mixed(&[0.9, 0.1])).unwrap();
        assert!((d - 0.4).abs() <= 1e-9, "{d}");
    }

    #[test]
    fn face_distance_closed_form() {
        assert_eq!(face_distance(&[0.2, 0.3, 0.5], &[0, 1, 2]), 0.0);
        assert!((face_distance(&[0.2, 0.3, 0.5], &[2]) - 0.5).abs() < 1e-15);
        assert!((face_distance(&[0.6, 0.4, 0.0], &[2]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dfp_series_is_zero() {
        let g = build("shapley", &[]).unwrap();
        let mut cfg = RunConfig::dfp(300);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        let s = payoff_perturbation_series(&g, &tr).unwrap();
        assert_eq!(s.t.len(), 299);
        assert!(s.epsilon.iter().all(|&e| e == 0.0));
        assert!(s.delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn regret_matching_series_respects_regret_bound() {
        let g = build("shapley", &[]).unwrap();
        let mut cfg = RunConfig::regret_matching(2000, 3);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        let s = payoff_perturbation_series(&g, &tr).unwrap();
        assert!(s.regret_bound_excess().unwrap() <= 1e-12);
    }

    #[test]
    fn series_needs_records() {
        let g = build("shapley", &[]).unwrap();
        let tr = run(&g, &RunConfig::regret_matching(50, 1)).unwrap();
        assert!(matches!(payoff_perturbation_series(&g, &tr), Err(Error::MissingRecords)));
    }

    #[test]
    fn interpolation_bound_and_endpoints() {
        let g = build("shapley", &[]).unwrap();
        let mut cfg = RunConfig::regret_matching(100, 9);
        cfg.record_periods = true;
        let tr = run(&g, &cfg).unwrap();
        let (start, seq) = belief_sequence(&g, &tr).unwrap();
        let path = interpolate(start, &seq, &[3, 3]).unwrap();
        assert!(path.max_excess <= 1e-12);
        for (j, p) in seq.iter().enumerate() {
            let e = path.eval((start + j as u64) as f64);
            assert!(sup_distance(&e, p) <= 1e-12);
        }
        let constant = interpolate(1, &vec![vec![1.0, 0.0]; 5], &[2]).unwrap();
        assert_eq!(constant.eval(3.5), vec![1.0, 0.0]);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert!(simplex_grid(2, 3).iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn slack_inclusion_is_positive() {
        for name in ["matching_pennies", "shapley"] {
            let g = build(name, &[]).unwrap();
            for r in slack_inclusion_check(&g, Player::One, &[0.1, 0.05, 0.01], 4, 8).unwrap() {
                assert!(r.epsilon > 0.0, "{name} {r:?}");
            }
        }
    }

    #[test]
    fn strict_ne_limit_set() {
        let g = build("coordination", &[]).unwrap();
        let mut cfg = RunConfig::dfp(2000);
        cfg.initial = Initial::Profile(1, 1);
        cfg.schedule = Schedule::Every(10);
        let tr = run(&g, &cfg).unwrap();
        let eq = nash_support_enumeration(&g, 1e-9).unwrap();
        let rep = limit_set_estimate(&g, &tr, 0.5, &eq).unwrap();
        assert_eq!(rep.clusters.len(), 1);
        assert_eq!(rep.class, LimitClass::NeProximal);
        assert!(rep.final_ne_distances.iter().any(|&d| d == 0.0));
        assert_eq!(rep.h_r_distance, 0.0);
    }

    #[test]
    fn short_tail_is_rejected() {
        let g = build("coordination", &[]).unwrap();
        let tr = run(&g, &RunConfig::dfp(100)).unwrap();
        assert!(matches!(limit_set_estimate(&g, &tr, 0.5, &[]), Err(Error::TailTooShort(_))));
    }

    #[test]
    fn reduced_hannan_distance() {
        let g = build("matching_pennies", &[]).unwrap();
        let u = JointDistribution::uniform(2, 2);
        assert!(distance_to_reduced_hannan(&g, &u).unwrap() <= 1e-12);
        let p = JointDistribution::point(2, 2, 0, 0);
        assert!(distance_to_reduced_hannan(&g, &p).unwrap() > 0.1);
    }
}
