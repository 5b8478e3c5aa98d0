//! Static solution concepts and curb-set machinery.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{run_observed, Initial, PlayerRule, RunConfig, Schedule};
use crate::error::{Error, Result};
use crate::game::{Game, JointDistribution, MixedAction, MixedProfile, Player};
use crate::lp::{LpProblem, LpStatus, Relation, Sense};
use crate::rng::RngStream;
use crate::strategy::{FallbackPolicy, PotentialSpec, Strategy};

const MAX_NASH_ACTIONS: usize = 12;
const MAX_CURB_ACTIONS: usize = 8;
/// Support pairs of every size combination are tried up to this many profiles.
const FULL_SUPPORT_SEARCH: usize = 36;
const DOMINANCE_EPS: f64 = 1e-9;

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1u32 << n)).map(move |mask| (0..n).filter(|k| mask & (1 << k) != 0).collect())
}

/// The game restricted to `b1 x b2`, labels carried over.
pub fn subgame(game: &Game, b1: &[usize], b2: &[usize]) -> Result<Game> {
    let mut u = [Vec::new(), Vec::new()];
    for &a1 in b1 {
        for &a2 in b2 {
            u[0].push(game.payoff(Player::One, a1, a2));
            u[1].push(game.payoff(Player::Two, a1, a2));
        }
    }
    let [u1, u2] = u;
    let g = Game::new(b1.len(), b2.len(), u1, u2)?;
    match game.labels() {
        Some([l1, l2]) => g.with_labels(
            b1.iter().map(|&k| l1[k].clone()).collect(),
            b2.iter().map(|&k| l2[k].clone()).collect(),
        ),
        None => Ok(g),
    }
}

/// Equilibrium with the given supports that maximizes its smallest support
/// probability, if that probability exceeds `tol`.
fn support_equilibrium(game: &Game, s1: &[usize], s2: &[usize], tol: f64) -> Result<Option<MixedProfile>> {
    let (m, n) = (game.rows(), game.cols());
    // variables: x (m), y (n), v1, v2, s
    let nv = m + n + 3;
    let (v1, v2, s) = (m + n, m + n + 1, m + n + 2);
    let mut obj = vec![0.0; nv];
    obj[s] = 1.0;
    let mut lp = LpProblem::new(obj, Sense::Maximize);
    lp.free(v1).free(v2).bound(s, f64::NEG_INFINITY, 1.0);
    let mut row = vec![0.0; nv];
    for &k in s1 {
        row[k] = 1.0;
    }
    lp.constrain(row, Relation::Eq, 1.0);
    let mut row = vec![0.0; nv];
    for &k in s2 {
        row[m + k] = 1.0;
    }
    lp.constrain(row, Relation::Eq, 1.0);
    for k in 0..m {
        if !s1.contains(&k) {
            lp.bound(k, 0.0, 0.0);
        } else {
            let mut row = vec![0.0; nv];
            row[k] = 1.0;
            row[s] = -1.0;
            lp.constrain(row, Relation::Ge, 0.0);
        }
        // u1(k, y) - v1, = 0 on the support and <= 0 off it
        let mut row = vec![0.0; nv];
        for &b in s2 {
            row[m + b] = game.payoff(Player::One, k, b);
        }
        row[v1] = -1.0;
        lp.constrain(row, if s1.contains(&k) { Relation::Eq } else { Relation::Le }, 0.0);
    }
    for k in 0..n {
        if !s2.contains(&k) {
            lp.bound(m + k, 0.0, 0.0);
        } else {
            let mut row = vec![0.0; nv];
            row[m + k] = 1.0;
            row[s] = -1.0;
            lp.constrain(row, Relation::Ge, 0.0);
        }
        let mut row = vec![0.0; nv];
        for &a in s1 {
            row[a] = game.payoff(Player::Two, a, k);
        }
        row[v2] = -1.0;
        lp.constrain(row, if s2.contains(&k) { Relation::Eq } else { Relation::Le }, 0.0);
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal || sol.x[s] <= tol {
        return Ok(None);
    }
    let x = MixedAction::normalized(sol.x[..m].iter().map(|v| v.max(0.0)).collect())?;
    let y = MixedAction::normalized(sol.x[m..m + n].iter().map(|v| v.max(0.0)).collect())?;
    Ok(Some(MixedProfile::new(x, y)))
}

/// Largest gain from a unilateral pure deviation at a mixed profile.
pub fn nash_gap(game: &Game, p: &MixedProfile) -> f64 {
    Player::BOTH
        .iter()
        .map(|&pl| {
            let own = p.get(pl).weights();
            let opp = p.get(pl.opponent()).weights();
            let best = game.reply_payoffs(pl, opp).into_iter().fold(f64::NEG_INFINITY, f64::max);
            best - game.mixed_payoff(pl, own, opp)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Nash equilibria by support enumeration.
///
/// Each support pair is checked with one LP over the indifference and
/// no-profitable-deviation conditions. All pairs are tried for games with
/// at most 36 profiles; larger games only try equal-size supports, which
/// finds every equilibrium of a nondegenerate game.
pub fn nash_support_enumeration(game: &Game, tol: f64) -> Result<Vec<MixedProfile>> {
    let (m, n) = (game.rows(), game.cols());
    if m > MAX_NASH_ACTIONS || n > MAX_NASH_ACTIONS {
        return Err(Error::OversizedGame { op: "nash_support_enumeration", rows: m, cols: n });
    }
    let full = m * n <= FULL_SUPPORT_SEARCH;
    let s2s: Vec<Vec<usize>> = subsets(n).collect();
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = subsets(m)
        .flat_map(|s1| {
            s2s.iter()
                .filter(|s2| full || s2.len() == s1.len())
                .map(|s2| (s1.clone(), s2.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let found: Vec<Option<MixedProfile>> = pairs
        .par_iter()
        .map(|(s1, s2)| support_equilibrium(game, s1, s2, tol))
        .collect::<Result<_>>()?;
    let dedup = tol.max(1e-8);
    let mut out: Vec<MixedProfile> = Vec::new();
    for p in found.into_iter().flatten() {
        if nash_gap(game, &p) <= 1e-9 && !out.iter().any(|q| q.sup_distance(&p) <= dedup) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Any one Nash equilibrium of the game, preferring small supports.
pub fn some_equilibrium(game: &Game) -> Result<MixedProfile> {
    let (m, n) = (game.rows(), game.cols());
    for size in 1..=m.max(n) {
        for s1 in subsets(m).filter(|s| s.len() <= size) {
            for s2 in subsets(n).filter(|s| s.len() <= size && (s.len() == size || s1.len() == size)) {
                if let Some(p) = support_equilibrium(game, &s1, &s2, 1e-12)? {
                    if nash_gap(game, &p) <= 1e-9 {
                        return Ok(p);
                    }
                }
            }
        }
    }
    Err(Error::Lp("no equilibrium found".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScanOrder {
    #[default]
    PlayerOneFirst,
    PlayerTwoFirst,
}

#[derive(Debug, Clone, Serialize)]
pub struct Elimination {
    /// Surviving action indices of each player in the original game.
    pub surviving: [Vec<usize>; 2],
    /// Eliminated actions in the order they were removed.
    pub order: Vec<(Player, usize)>,
    #[serde(skip)]
    pub reduced: Game,
}

/// Smallest payoff gap by which a mixture of `candidates` beats `k` against
/// every opponent action in `opp`.
fn mixed_dominance_gap(game: &Game, player: Player, k: usize, candidates: &[usize], opp: &[usize]) -> Result<f64> {
    let c = candidates.len();
    let mut obj = vec![0.0; c + 1];
    obj[c] = 1.0;
    let mut lp = LpProblem::new(obj, Sense::Maximize);
    lp.free(c);
    let mut row = vec![1.0; c + 1];
    row[c] = 0.0;
    lp.constrain(row, Relation::Eq, 1.0);
    for &b in opp {
        let mut row: Vec<f64> = candidates.iter().map(|&s| game.payoff_vs(player, s, b)).collect();
        row.push(-1.0);
        lp.constrain(row, Relation::Ge, game.payoff_vs(player, k, b));
    }
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        _ => Err(Error::Lp("dominance program has no optimum".into())),
    }
}

/// Iterated elimination of strictly dominated actions.
pub fn strict_dominance_eliminate(game: &Game, allow_mixed: bool, scan: ScanOrder) -> Result<Elimination> {
    let mut alive = [(0..game.rows()).collect::<Vec<_>>(), (0..game.cols()).collect::<Vec<_>>()];
    let mut order = Vec::new();
    let players = match scan {
        ScanOrder::PlayerOneFirst => [Player::One, Player::Two],
        ScanOrder::PlayerTwoFirst => [Player::Two, Player::One],
    };
    loop {
        let mut changed = false;
        for &pl in &players {
            let i = pl.index();
            let opp = alive[1 - i].clone();
            let mut dominated = Vec::new();
            for &k in &alive[i] {
                let others: Vec<usize> = alive[i].iter().copied().filter(|&s| s != k).collect();
                if others.is_empty() {
                    continue;
                }
                let pure = others.iter().any(|&s| {
                    opp.iter()
                        .all(|&b| game.payoff_vs(pl, s, b) > game.payoff_vs(pl, k, b))
                });
                let hit = pure || (allow_mixed && mixed_dominance_gap(game, pl, k, &others, &opp)? > DOMINANCE_EPS);
                if hit {
                    dominated.push(k);
                }
            }
            // remove one at a time so a dominator is never itself removed in the same pass
            if let Some(&k) = dominated.first() {
                alive[i].retain(|&s| s != k);
                order.push((pl, k));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let reduced = subgame(game, &alive[0], &alive[1])?;
    Ok(Elimination { surviving: alive, order, reduced })
}

/// A product set `B1 x B2` of action profiles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurbSet {
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
}

impl CurbSet {
    pub fn new(mut b1: Vec<usize>, mut b2: Vec<usize>) -> Self {
        b1.sort_unstable();
        b1.dedup();
        b2.sort_unstable();
        b2.dedup();
        CurbSet { b1, b2 }
    }

    pub fn full(game: &Game) -> Self {
        CurbSet::new((0..game.rows()).collect(), (0..game.cols()).collect())
    }

    pub fn get(&self, player: Player) -> &[usize] {
        match player {
            Player::One => &self.b1,
            Player::Two => &self.b2,
        }
    }

    pub fn contains(&self, a1: usize, a2: usize) -> bool {
        self.b1.contains(&a1) && self.b2.contains(&a2)
    }

    pub fn is_full(&self, game: &Game) -> bool {
        self.b1.len() == game.rows() && self.b2.len() == game.cols()
    }

    pub fn describe(&self, game: &Game) -> String {
        let side = |pl: Player| {
            let names: Vec<String> = self.get(pl).iter().map(|&k| game.label(pl, k)).collect();
            format!("{{{}}}", names.join(","))
        };
        format!("{}x{}", side(Player::One), side(Player::Two))
    }
}

/// Whether `k` is an exact best reply of `player` to some belief supported
/// on `opp_support`.
pub fn is_best_reply_somewhere(game: &Game, player: Player, k: usize, opp_support: &[usize]) -> Result<bool> {
    let n = game.actions(player.opponent());
    let mut lp = LpProblem::feasibility(n);
    let mut row = vec![0.0; n];
    for &b in opp_support {
        row[b] = 1.0;
    }
    lp.constrain(row, Relation::Eq, 1.0);
    for b in (0..n).filter(|b| !opp_support.contains(b)) {
        lp.bound(b, 0.0, 0.0);
    }
    for s in (0..game.actions(player)).filter(|&s| s != k) {
        let row: Vec<f64> = (0..n)
            .map(|b| game.payoff_vs(player, k, b) - game.payoff_vs(player, s, b))
            .collect();
        lp.constrain(row, Relation::Ge, 0.0);
    }
    Ok(lp.solve()?.status == LpStatus::Optimal)
}

/// Actions of `player` that are best replies to some belief on `opp_support`.
pub fn best_reply_closure(game: &Game, player: Player, opp_support: &[usize]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for k in 0..game.actions(player) {
        if is_best_reply_somewhere(game, player, k, opp_support)? {
            out.push(k);
        }
    }
    Ok(out)
}

pub fn is_curb(game: &Game, b: &CurbSet) -> Result<bool> {
    for pl in Player::BOTH {
        let own = b.get(pl);
        for k in (0..game.actions(pl)).filter(|k| !own.contains(k)) {
            if is_best_reply_somewhere(game, pl, k, b.get(pl.opponent()))? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All curb product sets, in increasing order of `(|B1| + |B2|, B1, B2)`.
pub fn curb_enumerate(game: &Game) -> Result<Vec<CurbSet>> {
    let (m, n) = (game.rows(), game.cols());
    if m > MAX_CURB_ACTIONS || n > MAX_CURB_ACTIONS {
        return Err(Error::OversizedGame { op: "curb_enumerate", rows: m, cols: n });
    }
    let closure = |pl: Player, subsets: Vec<Vec<usize>>| -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        subsets
            .into_par_iter()
            .map(|c| best_reply_closure(game, pl, &c).map(|w| (c, w)))
            .collect()
    };
    // W1(C2) for every C2, W2(C1) for every C1
    let w1 = closure(Player::One, subsets(n).collect())?;
    let w2 = closure(Player::Two, subsets(m).collect())?;
    let mut out = Vec::new();
    for (b2, w1_b2) in &w1 {
        for (b1, w2_b1) in &w2 {
            if w1_b2.iter().all(|k| b1.contains(k)) && w2_b1.iter().all(|k| b2.contains(k)) {
                out.push(CurbSet::new(b1.clone(), b2.clone()));
            }
        }
    }
    out.sort_by(|a, b| (a.b1.len() + a.b2.len(), &a.b1, &a.b2).cmp(&(b.b1.len() + b.b2.len(), &b.b1, &b.b2)));
    Ok(out)
}

/// `delta_B`: the least margin by which the best payoff beats every action
/// outside `B`, over beliefs supported on `B`. `+inf` when `B` is the full
/// set.
pub fn delta_b(game: &Game, b: &CurbSet) -> Result<f64> {
    let mut best = f64::INFINITY;
    for pl in Player::BOTH {
        let own = b.get(pl);
        let opp = b.get(pl.opponent());
        let outside: Vec<usize> = (0..game.actions(pl)).filter(|k| !own.contains(k)).collect();
        let n = game.actions(pl.opponent());
        for &k in &outside {
            // variables: x (n), t (free); minimize t - u(k, x)
            let mut obj: Vec<f64> = (0..n).map(|c| -game.payoff_vs(pl, k, c)).collect();
            obj.push(1.0);
            let mut lp = LpProblem::new(obj, Sense::Minimize);
            lp.free(n);
            let mut row = vec![0.0; n + 1];
            for &c in opp {
                row[c] = 1.0;
            }
            lp.constrain(row, Relation::Eq, 1.0);
            for c in (0..n).filter(|c| !opp.contains(c)) {
                lp.bound(c, 0.0, 0.0);
            }
            for s in 0..game.actions(pl) {
                let mut row: Vec<f64> = (0..n).map(|c| -game.payoff_vs(pl, s, c)).collect();
                row.push(1.0);
                lp.constrain(row, Relation::Ge, 0.0);
            }
            for &k2 in outside.iter().filter(|&&k2| k2 != k) {
                let mut row: Vec<f64> = (0..n)
                    .map(|c| game.payoff_vs(pl, k, c) - game.payoff_vs(pl, k2, c))
                    .collect();
                row.push(0.0);
                lp.constrain(row, Relation::Ge, 0.0);
            }
            let sol = lp.solve()?;
            if sol.is_optimal() {
                best = best.min(sol.value);
            }
        }
    }
    Ok(best)
}

/// Grid estimate of `delta_B` with simplex step `1/steps`; `None` when some
/// `B_i` has more than three actions.
pub fn delta_b_grid(game: &Game, b: &CurbSet, steps: usize) -> Option<f64> {
    let mut best = f64::INFINITY;
    for pl in Player::BOTH {
        let own = b.get(pl);
        let opp = b.get(pl.opponent());
        let outside: Vec<usize> = (0..game.actions(pl)).filter(|k| !own.contains(k)).collect();
        if outside.is_empty() {
            continue;
        }
        if opp.len() > 3 {
            return None;
        }
        let n = game.actions(pl.opponent());
        for w in simplex_grid(opp.len(), steps) {
            let mut x = vec![0.0; n];
            for (j, &c) in opp.iter().enumerate() {
                x[c] = w[j];
            }
            let pay = game.reply_payoffs(pl, &x);
            let top = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = outside.iter().map(|&k| pay[k]).fold(f64::NEG_INFINITY, f64::max);
            best = best.min(top - out);
        }
    }
    Some(best)
}

fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if dim == 1 {
            cur.push(left as f64 / steps as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k as f64 / steps as f64);
            rec(dim - 1, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// `rho(gamma)`: the largest maximal regret compatible with potential
/// value `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoValue {
    pub value: f64,
    pub exact: bool,
    /// Grid spacing of the search; zero when exact.
    pub resolution: f64,
}

const RHO_GRID: usize = 40;

pub fn rho_of_gamma(spec: &PotentialSpec, gamma: f64, dims: usize, u_bar: f64) -> Result<RhoValue> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(RhoValue { value: 0.0, exact: true, resolution: 0.0 });
    }
    match spec {
        PotentialSpec::LpNorm { .. } => Ok(RhoValue { value: gamma, exact: true, resolution: 0.0 }),
        PotentialSpec::Custom { .. } => {
            let lo = -2.0 * u_bar;
            let step = 4.0 * u_bar / RHO_GRID as f64;
            let mut best: f64 = 0.0;
            let mut point = vec![0usize; dims];
            let mut x = vec![0.0; dims];
            let total = (RHO_GRID + 1).pow(dims.min(4) as u32);
            if dims > 4 {
                return Err(Error::InvalidParameter("grid search for rho supports at most 4 actions".into()));
            }
            for _ in 0..total {
                for (xi, pi) in x.iter_mut().zip(&point) {
                    *xi = lo + step * *pi as f64;
                }
                if spec.value(&x) <= gamma {
                    best = best.max(x.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                }
                for p in point.iter_mut() {
                    *p += 1;
                    if *p <= RHO_GRID {
                        break;
                    }
                    *p = 0;
                }
            }
            Ok(RhoValue { value: best, exact: false, resolution: step })
        }
    }
}

/// Root of `(2 U + delta) gamma + rho(gamma) - delta = 0` on `[0, delta]`.
pub fn gamma_b_with(delta: f64, u_bar: f64, rho: impl Fn(f64) -> f64) -> Result<f64> {
    if !delta.is_finite() || !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta_B must be finite and positive, got {delta}")));
    }
    let f = |g: f64| (2.0 * u_bar + delta) * g + rho(g) - delta;
    let (mut lo, mut hi) = (0.0, delta);
    while hi - lo > 1e-15 * delta.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The curb constants of `B` for potentials of the given kind and payoff
/// bound `u_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurbConstants {
    pub delta_b: f64,
    pub gamma_b: f64,
    pub u_bar: f64,
    pub rho_exact: bool,
}

pub fn curb_constants(game: &Game, b: &CurbSet, specs: [&PotentialSpec; 2], u_bar: f64) -> Result<CurbConstants> {
    let delta = delta_b(game, b)?;
    let dims = [game.rows(), game.cols()];
    let exact = specs.iter().all(|s| matches!(s, PotentialSpec::LpNorm { .. }));
    let rho = |g: f64| {
        (0..2)
            .map(|i| rho_of_gamma(specs[i], g, dims[i], u_bar).map(|r| r.value).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    };
    let gamma = gamma_b_with(delta, u_bar, rho)?;
    Ok(CurbConstants { delta_b: delta, gamma_b: gamma, u_bar, rho_exact: exact })
}

/// Membership of `z` in `U_gamma(H_B)`.
pub fn in_u_gamma(game: &Game, b: &CurbSet, specs: [&PotentialSpec; 2], z: &JointDistribution, gamma: f64) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let outside = outside_mass(b, z);
    if outside >= gamma {
        return Ok(false);
    }
    for pl in Player::BOTH {
        let r = game.regret_vector(pl, z)?;
        if specs[pl.index()].value(&r.values) >= gamma {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn outside_mass(b: &CurbSet, z: &JointDistribution) -> f64 {
    let mut s = 0.0;
    for a1 in 0..z.rows() {
        for a2 in 0..z.cols() {
            if !b.contains(a1, a2) {
                s += z.weight(a1, a2);
            }
        }
    }
    s
}

/// LP over `w` in `H_B` with an extra epigraph variable; returns the
/// problem and the profile index of each `w` variable.
fn h_b_program(game: &Game, b: &CurbSet, objective_w: &[f64], extra: f64) -> (LpProblem, Vec<(usize, usize)>) {
    let profiles: Vec<(usize, usize)> = b.b1.iter().flat_map(|&a1| b.b2.iter().map(move |&a2| (a1, a2))).collect();
    let nw = profiles.len();
    let mut obj = objective_w.to_vec();
    obj.push(extra);
    let mut lp = LpProblem::new(obj, Sense::Minimize);
    let mut row = vec![1.0; nw + 1];
    row[nw] = 0.0;
    lp.constrain(row, Relation::Eq, 1.0);
    for pl in Player::BOTH {
        for s in 0..game.actions(pl) {
            let mut row: Vec<f64> = profiles
                .iter()
                .map(|&(a1, a2)| {
                    let (own, opp) = if pl == Player::One { (a1, a2) } else { (a2, a1) };
                    game.payoff_vs(pl, s, opp) - game.payoff_vs(pl, own, opp)
                })
                .collect();
            row.push(0.0);
            lp.constrain(row, Relation::Le, 0.0);
        }
    }
    (lp, profiles)
}

/// Sup-norm distance from `z` to `H_B`; `+inf` if `H_B` is empty.
pub fn distance_to_h_b(game: &Game, b: &CurbSet, z: &JointDistribution) -> Result<f64> {
    let (mut lp, profiles) = h_b_program(game, b, &vec![0.0; b.b1.len() * b.b2.len()], 1.0);
    let nw = profiles.len();
    let e = nw;
    for (j, &(a1, a2)) in profiles.iter().enumerate() {
        let zv = z.weight(a1, a2);
        let mut row = vec![0.0; nw + 1];
        row[j] = 1.0;
        row[e] = -1.0;
        lp.constrain(row.clone(), Relation::Le, zv);
        row[j] = -1.0;
        lp.constrain(row, Relation::Le, -zv);
    }
    let outside_max = (0..z.rows())
        .flat_map(|a1| (0..z.cols()).map(move |a2| (a1, a2)))
        .filter(|&(a1, a2)| !b.contains(a1, a2))
        .map(|(a1, a2)| z.weight(a1, a2))
        .fold(0.0, f64::max);
    let mut row = vec![0.0; nw + 1];
    row[e] = 1.0;
    lp.constrain(row, Relation::Ge, outside_max);
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        LpStatus::Infeasible => Ok(f64::INFINITY),
        LpStatus::Unbounded => Err(Error::Lp("distance program unbounded".into())),
    }
}

/// A point of `H_B` minimizing the random linear objective `c` (a vertex
/// for generic `c`).
pub fn h_b_point(game: &Game, b: &CurbSet, c: &[f64]) -> Result<Option<JointDistribution>> {
    let (lp, profiles) = h_b_program(game, b, c, 0.0);
    let sol = lp.solve()?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let mut w = vec![0.0; game.profiles()];
    for (j, &(a1, a2)) in profiles.iter().enumerate() {
        w[a1 * game.cols() + a2] = sol.x[j].max(0.0);
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Ok(Some(JointDistribution::new(game.rows(), game.cols(), w)?))
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical quantile with linear interpolation.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurbExperimentConfig {
    pub t0: u64,
    pub horizon: u64,
    pub runs: usize,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurbExperimentStats {
    pub stay_frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub terminal_h_b_distances: Quantiles,
    pub runs: usize,
    pub stayed: usize,
    pub gamma_b: Option<f64>,
    pub parameters: CurbExperimentConfig,
    pub curb_set: CurbSet,
}

/// Length-`t0` history whose empirical distribution is within `1/t0` of
/// `w`: largest-remainder quotas, then shuffled.
fn quota_history(game: &Game, w: &JointDistribution, t0: u64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let cols = game.cols();
    let raw: Vec<f64> = w.weights().iter().map(|v| v * t0 as f64).collect();
    let mut counts: Vec<u64> = raw.iter().map(|v| v.floor() as u64).collect();
    let mut left = t0 - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if w.weights()[j] > 0.0 {
            counts[j] += 1;
            left -= 1;
        }
    }
    let mut hist: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(j, &c)| std::iter::repeat((j / cols, j % cols)).take(c as usize))
        .collect();
    hist.shuffle(rng);
    hist
}

/// Starts each run from a synthetic history near `H_B` and checks whether
/// play after `t0` stays in `B`. Both players use their potential with the
/// best-reply fallback.
pub fn curb_attraction_experiment(
    game: &Game,
    b: &CurbSet,
    specs: [&PotentialSpec; 2],
    cfg: &CurbExperimentConfig,
) -> Result<CurbExperimentStats> {
    if !is_curb(game, b)? {
        return Err(Error::PreconditionViolated(format!("{} is not curb", b.describe(game))));
    }
    if cfg.t0 < 1 || cfg.horizon < cfg.t0 || cfg.runs == 0 || !(cfg.gamma > 0.0) {
        return Err(Error::InvalidParameter("need 1 <= t0 <= T, runs >= 1 and gamma > 0".into()));
    }
    let gamma_b = if b.is_full(game) {
        None
    } else {
        let c = curb_constants(game, b, specs, game.payoff_bound())?;
        if cfg.gamma >= c.gamma_b {
            return Err(Error::PreconditionViolated(format!(
                "gamma {} is not below gamma_B {}",
                cfg.gamma, c.gamma_b
            )));
        }
        Some(c.gamma_b)
    };
    let rules = [
        PlayerRule::new(Strategy::Potential(specs[0].clone()), FallbackPolicy::BestReply),
        PlayerRule::new(Strategy::Potential(specs[1].clone()), FallbackPolicy::BestReply),
    ];
    let outcomes: Vec<(bool, f64)> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64)> {
            let stream = RngStream::new(cfg.seed, i as u64);
            let mut rng = stream.rng();
            let c: Vec<f64> = (0..b.b1.len() * b.b2.len()).map(|_| rng.gen::<f64>()).collect();
            let w = h_b_point(game, b, &c)?
                .ok_or_else(|| Error::Construction(format!("H_B is empty for {}", b.describe(game))))?;
            let history = quota_history(game, &w, cfg.t0, &mut rng);
            let z0 = empirical(game, &history);
            if !in_u_gamma(game, b, specs, &z0, cfg.gamma)? {
                return Err(Error::Construction(format!(
                    "synthetic history of run {i} does not land in U_gamma(H_B)"
                )));
            }
            let mut run_cfg = RunConfig::new(crate::discrete::DynamicsKind::Stochastic, rules.clone(), cfg.horizon, 0);
            run_cfg.rng = RngStream::new(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
            run_cfg.initial = Initial::History(history);
            run_cfg.schedule = Schedule::FinalOnly;
            let mut stayed = true;
            let tr = run_observed(game, &run_cfg, |_, info| {
                if let Some((a1, a2)) = info.realized {
                    stayed &= b.contains(a1, a2);
                }
            })?;
            Ok((stayed, distance_to_h_b(game, b, &tr.last().z)?))
        })
        .collect::<Result<_>>()?;
    let stayed = outcomes.iter().filter(|o| o.0).count();
    let dists: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let (ci_low, ci_high) = wilson_interval(stayed, cfg.runs);
    Ok(CurbExperimentStats {
        stay_frequency: stayed as f64 / cfg.runs as f64,
        ci_low,
        ci_high,
        terminal_h_b_distances: Quantiles {
            p50: quantile(&dists, 0.5),
            p90: quantile(&dists, 0.9),
            max: dists.iter().copied().fold(0.0, f64::max),
        },
        runs: cfg.runs,
        stayed,
        gamma_b,
        parameters: cfg.clone(),
        curb_set: b.clone(),
    })
}

fn empirical(game: &Game, history: &[(usize, usize)]) -> JointDistribution {
    let mut w = vec![0.0; game.profiles()];
    for &(a1, a2) in history {
        w[a1 * game.cols() + a2] += 1.0;
    }
    let n = history.len() as f64;
    w.iter_mut().for_each(|v| *v /= n);
    JointDistribution::from_raw(game.rows(), game.cols(), w)
}

/// Outcome of sampling `U_{gamma_B}(H_B)` and checking that every action
/// with positive regret lies in `B`.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaUReport {
    pub samples: usize,
    pub violations: usize,
    pub gamma_b: f64,
}

pub fn lemma_u_check(game: &Game, b: &CurbSet, spec: &PotentialSpec, samples: usize, seed: u64) -> Result<LemmaUReport> {
    let specs = [spec, spec];
    let c = curb_constants(game, b, specs, game.payoff_bound())?;
    let mut rng = RngStream::new(seed, 0).rng();
    let mut checked = 0;
    let mut violations = 0;
    let mut attempts = 0;
    while checked < samples {
        attempts += 1;
        if attempts > 200 * samples.max(1) {
            return Err(Error::Construction("could not sample points of U_gamma(H_B)".into()));
        }
        let cvec: Vec<f64> = (0..b.b1.len() * b.b2.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let Some(w) = h_b_point(game, b, &cvec)? else {
            return Err(Error::Construction("H_B is empty".into()));
        };
        let noise: Vec<f64> = (0..game.profiles()).map(|_| rng.gen::<f64>()).collect();
        let ns: f64 = noise.iter().sum();
        let lambda = rng.gen::<f64>() * c.gamma_b;
        let weights: Vec<f64> = w
            .weights()
            .iter()
            .zip(&noise)
            .map(|(a, n)| (1.0 - lambda) * a + lambda * n / ns)
            .collect();
        let z = JointDistribution::from_raw(game.rows(), game.cols(), weights);
        if !in_u_gamma(game, b, specs, &z, c.gamma_b)? {
            continue;
        }
        checked += 1;
        for pl in Player::BOTH {
            let r = game.regret_vector(pl, &z)?;
            let own = b.get(pl);
            if r.values.iter().enumerate().any(|(k, v)| *v > 0.0 && !own.contains(&k)) {
                violations += 1;
            }
        }
    }
    Ok(LemmaUReport { samples: checked, violations, gamma_b: c.gamma_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build;

    fn close(p: &MixedProfile, x: &[f64], y: &[f64]) -> bool {
        crate::game::sup_distance(p.get(Player::One).weights(), x) < 1e-9
            && crate::game::sup_distance(p.get(Player::Two).weights(), y) < 1e-9
    }

    #[test]
    fn nash_examples() {
        let ne = nash_support_enumeration(&build("matching_pennies", &[]).unwrap(), 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(close(&ne[0], &[0.5, 0.5], &[0.5, 0.5]));
        let t = 1.0 / 3.0;
        let ne = nash_support_enumeration(&build("shapley", &[]).unwrap(), 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(close(&ne[0], &[t, t, t], &[t, t, t]));
        let ne = nash_support_enumeration(&build("fig3i", &[]).unwrap(), 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(close(&ne[0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]));
        // coordination: two pure and one mixed equilibrium
        let ne = nash_support_enumeration(&build("coordination", &[]).unwrap(), 1e-9).unwrap();
        assert_eq!(ne.len(), 3);
    }

    #[test]
    fn dominance_examples() {
        let g = build("fig3i", &[]).unwrap();
        let e = strict_dominance_eliminate(&g, false, ScanOrder::PlayerOneFirst).unwrap();
        assert_eq!(e.surviving, [vec![0], vec![0]]);
        assert_eq!(e.order[0], (Player::One, 2));

        let g = build("fig3ii", &[0.25]).unwrap();
        let e = strict_dominance_eliminate(&g, true, ScanOrder::PlayerOneFirst).unwrap();
        for pl in Player::BOTH {
            let names: Vec<String> = e.surviving[pl.index()].iter().map(|&k| g.label(pl, k)).collect();
            assert_eq!(names, vec!["A", "B"]);
        }

        let g = build("matching_pennies", &[]).unwrap();
        let e = strict_dominance_eliminate(&g, true, ScanOrder::PlayerOneFirst).unwrap();
        assert!(e.order.is_empty());
    }

    #[test]
    fn mixed_dominance_needs_lp() {
        // row 2 is beaten by the half-half mixture of rows 0 and 1 but by neither alone
        let g = Game::from_tables(
            &[vec![3.0, 0.0], vec![0.0, 3.0], vec![1.0, 1.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let pure = strict_dominance_eliminate(&g, false, ScanOrder::PlayerOneFirst).unwrap();
        assert_eq!(pure.surviving[0], vec![0, 1, 2]);
        let mixed = strict_dominance_eliminate(&g, true, ScanOrder::PlayerOneFirst).unwrap();
        assert_eq!(mixed.surviving[0], vec![0, 1]);
    }

    #[test]
    fn curb_sets_of_small_games() {
        let g = build("matching_pennies", &[]).unwrap();
        assert_eq!(curb_enumerate(&g).unwrap(), vec![CurbSet::full(&g)]);
        let g = build("fig3i", &[]).unwrap();
        let all = curb_enumerate(&g).unwrap();
        assert_eq!(all[0], CurbSet::new(vec![0], vec![0]));
        assert!(all.contains(&CurbSet::new(vec![0, 1], vec![0, 1])));
        assert!(all.contains(&CurbSet::full(&g)));
        for b in &all {
            assert!(is_curb(&g, b).unwrap());
        }
    }

    #[test]
    fn curb_constants_examples() {
        let g = build("fig3i", &[]).unwrap();
        let b = CurbSet::new(vec![0], vec![0]);
        assert!((delta_b(&g, &b).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(delta_b_grid(&g, &b, 64), Some(1.0));
        let rm = PotentialSpec::regret_matching();
        let c = curb_constants(&g, &b, [&rm, &rm], 4.0).unwrap();
        assert!((c.gamma_b - 0.1).abs() < 1e-12);
        assert_eq!(delta_b(&g, &CurbSet::full(&g)).unwrap(), f64::INFINITY);

        let coord = build("coordination", &[]).unwrap();
        let b = CurbSet::new(vec![0], vec![0]);
        assert!((delta_b(&coord, &b).unwrap() - 1.0).abs() < 1e-10);
        let c = curb_constants(&coord, &b, [&rm, &rm], 1.0).unwrap();
        assert!((c.gamma_b - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rho_values() {
        let rm = PotentialSpec::regret_matching();
        assert_eq!(rho_of_gamma(&rm, 0.3, 3, 1.0).unwrap().value, 0.3);
        assert_eq!(rho_of_gamma(&PotentialSpec::lp(4.0).unwrap(), 1.0, 3, 1.0).unwrap().value, 1.0);
        assert_eq!(rho_of_gamma(&rm, 0.0, 3, 1.0).unwrap().value, 0.0);
        // a custom copy of the l2 potential: the grid value approaches gamma from below
        let custom = PotentialSpec::custom(
            "l2",
            |x: &[f64]| x.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt(),
            |x: &[f64]| x.iter().map(|v| v.max(0.0)).collect(),
        );
        let r = rho_of_gamma(&custom, 0.5, 2, 1.0).unwrap();
        assert!(!r.exact && r.value <= 0.5 && r.value >= 0.5 - r.resolution);
        assert_eq!(rho_of_gamma(&custom, 0.0, 2, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn u_gamma_membership() {
        let g = build("fig3i", &[]).unwrap();
        let b = CurbSet::new(vec![0], vec![0]);
        let rm = PotentialSpec::regret_matching();
        let z = JointDistribution::point_in(&g, 0, 0);
        assert!(in_u_gamma(&g, &b, [&rm, &rm], &z, 1e-6).unwrap());
        let z = JointDistribution::from_points(3, 3, &[((0, 0), 0.95), ((1, 1), 0.05)]).unwrap();
        assert!(outside_mass(&b, &z) < 0.1);
        // regrets of (A, A)-heavy play with a little (B, B) are all nonpositive
        assert!(in_u_gamma(&g, &b, [&rm, &rm], &z, 0.1).unwrap());
        let z = JointDistribution::from_points(3, 3, &[((0, 0), 0.9), ((1, 1), 0.1)]).unwrap();
        assert!(!in_u_gamma(&g, &b, [&rm, &rm], &z, 0.1).unwrap());
        assert!(distance_to_h_b(&g, &b, &z).unwrap() - 0.1 < 1e-12);
    }

    #[test]
    fn wilson_and_quantiles() {
        let (lo, hi) = wilson_interval(95, 100);
        assert!(lo < 0.95 && hi > 0.95 && lo > 0.88 && hi < 0.99);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
    }

    #[test]
    fn full_set_experiment_stays() {
        let g = build("coordination", &[]).unwrap();
        let rm = PotentialSpec::regret_matching();
        let cfg = CurbExperimentConfig { t0: 100, horizon: 2000, runs: 8, gamma: 0.05, seed: 1 };
        let s = curb_attraction_experiment(&g, &CurbSet::full(&g), [&rm, &rm], &cfg).unwrap();
        assert_eq!(s.stay_frequency, 1.0);
    }

    #[test]
    fn lemma_u_on_coordination() {
        let g = build("coordination", &[]).unwrap();
        let rep = lemma_u_check(&g, &CurbSet::new(vec![0], vec![0]), &PotentialSpec::regret_matching(), 200, 3)
            .unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.samples, 200);
    }
}
