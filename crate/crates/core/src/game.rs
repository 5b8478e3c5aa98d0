//! Finite two-player games and the exact algebra on them: payoffs,
//! marginals, regrets, best replies, Hannan-set membership and the
//! average-play recursion.
//!
//! Actions are dense zero-based indices. A [`JointDistribution`] is stored
//! row-major over player 1's actions, so weight `(a1, a2)` lives at
//! `a1 * cols + a2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;

/// Mass drift above which [`update_average`] renormalizes.
const RENORM_DRIFT: f64 = 1e-14;

/// Default tolerance for Hannan-set membership.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "player {}", self.index() + 1)
    }
}

/// A bimatrix game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    rows: usize,
    cols: usize,
    payoffs: [Vec<f64>; 2],
    bound: f64,
    labels: Option<[Vec<String>; 2]>,
}

impl Game {
    /// Builds a game from two row-major `rows x cols` payoff tables.
    pub fn new(rows: usize, cols: usize, payoff_1: Vec<f64>, payoff_2: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGame("both players need at least one action".into()));
        }
        for (i, table) in [&payoff_1, &payoff_2].into_iter().enumerate() {
            if table.len() != rows * cols {
                return Err(Error::InvalidGame(format!(
                    "payoff table of player {} has {} entries, expected {}",
                    i + 1,
                    table.len(),
                    rows * cols
                )));
            }
            if table.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!("player {} has a non-finite payoff", i + 1)));
            }
        }
        let bound = payoff_1
            .iter()
            .chain(payoff_2.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(Game {
            rows,
            cols,
            payoffs: [payoff_1, payoff_2],
            bound,
            labels: None,
        })
    }

    /// Builds a game from nested rows, `u1[a1][a2]` and `u2[a1][a2]`.
    pub fn from_tables(u1: &[Vec<f64>], u2: &[Vec<f64>]) -> Result<Self> {
        let rows = u1.len();
        let cols = u1.first().map_or(0, Vec::len);
        if u2.len() != rows || u1.iter().chain(u2.iter()).any(|r| r.len() != cols) {
            return Err(Error::InvalidGame("ragged or mismatched payoff tables".into()));
        }
        Game::new(rows, cols, u1.concat(), u2.concat())
    }

    /// A game whose second table is the transpose of the first, i.e. a
    /// symmetric game given by the row player's payoffs.
    pub fn symmetric(u: &[Vec<f64>]) -> Result<Self> {
        let n = u.len();
        if u.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGame("symmetric game needs a square table".into()));
        }
        let transposed: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| u[b][a]).collect()).collect();
        Game::from_tables(u, &transposed)
    }

    pub fn with_labels(mut self, labels_1: Vec<String>, labels_2: Vec<String>) -> Result<Self> {
        if labels_1.len() != self.rows || labels_2.len() != self.cols {
            return Err(Error::InvalidGame("label count does not match action count".into()));
        }
        self.labels = Some([labels_1, labels_2]);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pure actions of `player`.
    pub fn actions(&self, player: Player) -> usize {
        match player {
            Player::One => self.rows,
            Player::Two => self.cols,
        }
    }

    /// Number of pure action profiles.
    pub fn profiles(&self) -> usize {
        self.rows * self.cols
    }

    /// Max over players and profiles of `|u_i(a)|`.
    pub fn payoff_bound(&self) -> f64 {
        self.bound
    }

    pub fn table(&self, player: Player) -> &[f64] {
        &self.payoffs[player.index()]
    }

    pub fn label(&self, player: Player, action: usize) -> String {
        match &self.labels {
            Some(l) => l[player.index()][action].clone(),
            None => action.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[Vec<String>; 2]> {
        self.labels.as_ref()
    }

    /// `u_i(a1, a2)`.
    #[inline]
    pub fn payoff(&self, player: Player, a1: usize, a2: usize) -> f64 {
        self.payoffs[player.index()][a1 * self.cols + a2]
    }

    /// Payoff of `player` for own action `own` against opponent action `opp`.
    #[inline]
    pub fn payoff_vs(&self, player: Player, own: usize, opp: usize) -> f64 {
        match player {
            Player::One => self.payoff(player, own, opp),
            Player::Two => self.payoff(player, opp, own),
        }
    }

    /// `u_i(k, x_{-i})` for a vector of opponent weights.
    pub fn reply_payoff(&self, player: Player, own: usize, opp: &[f64]) -> f64 {
        opp.iter()
            .enumerate()
            .map(|(b, w)| w * self.payoff_vs(player, own, b))
            .sum()
    }

    /// `u_i(k, x_{-i})` for every own action `k`.
    pub fn reply_payoffs(&self, player: Player, opp: &[f64]) -> Vec<f64> {
        (0..self.actions(player))
            .map(|k| self.reply_payoff(player, k, opp))
            .collect()
    }

    /// `u_i(x_i, x_{-i})` for mixed actions.
    pub fn mixed_payoff(&self, player: Player, own: &[f64], opp: &[f64]) -> f64 {
        own.iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, w)| w * self.reply_payoff(player, k, opp))
            .sum()
    }

    fn check_joint(&self, z: &JointDistribution) -> Result<()> {
        if z.rows != self.rows || z.cols != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "distribution is {}x{}, game is {}x{}",
                z.rows, z.cols, self.rows, self.cols
            )));
        }
        Ok(())
    }

    fn check_opp(&self, player: Player, opp: &MixedAction) -> Result<()> {
        let n = self.actions(player.opponent());
        if opp.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "opponent of {player} has {n} actions, mixed action has {}",
                opp.len()
            )));
        }
        Ok(())
    }

    /// `(u_1(z), u_2(z))`.
    pub fn expected_payoffs(&self, z: &JointDistribution) -> Result<(f64, f64)> {
        self.check_joint(z)?;
        let dot = |t: &[f64]| t.iter().zip(&z.weights).map(|(u, w)| u * w).sum::<f64>();
        Ok((dot(&self.payoffs[0]), dot(&self.payoffs[1])))
    }

    /// Regrets `R_{i,k}(z) = u_i(k, z_{-i}) - u_i(z)`.
    pub fn regret_vector(&self, player: Player, z: &JointDistribution) -> Result<RegretVector> {
        self.check_joint(z)?;
        let (u1, u2) = self.expected_payoffs(z)?;
        let realized = if player == Player::One { u1 } else { u2 };
        let opp = z.marginal(player.opponent());
        let values = self
            .reply_payoffs(player, opp.weights())
            .into_iter()
            .map(|v| v - realized)
            .collect();
        Ok(RegretVector { player, values })
    }

    /// Pure actions `k` with `u_i(k, opp) >= max_s u_i(s, opp) - epsilon`,
    /// each paired with its payoff.
    pub fn best_replies(&self, player: Player, opp: &MixedAction, epsilon: f64) -> Result<Vec<(usize, f64)>> {
        self.check_opp(player, opp)?;
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let pay = self.reply_payoffs(player, opp.weights());
        let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(pay
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v >= best - epsilon)
            .collect())
    }

    /// Lowest-index exact best reply.
    pub fn best_reply(&self, player: Player, opp: &[f64]) -> usize {
        let pay = self.reply_payoffs(player, opp);
        argmax_lowest(&pay)
    }

    /// Classifies `z` against the Hannan set `H` and the reduced set `H_R`.
    pub fn hannan_status(&self, z: &JointDistribution, tol: f64) -> Result<HannanStatus> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("membership tolerance must be > 0, got {tol}")));
        }
        let r1 = self.regret_vector(Player::One, z)?.max();
        let r2 = self.regret_vector(Player::Two, z)?.max();
        let margin = r1.max(r2);
        let class = if margin > tol {
            HannanClass::Outside
        } else if r1 >= -tol && r2 >= -tol {
            HannanClass::ReducedHR
        } else {
            HannanClass::InteriorH
        };
        Ok(HannanStatus {
            class,
            margin,
            max_regrets: [r1, r2],
        })
    }
}

/// Index of the first maximal entry.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// A probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedAction(Vec<f64>);

impl MixedAction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_simplex(&weights)?;
        Ok(MixedAction(weights))
    }

    /// Normalizes nonnegative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(MixedAction(weights))
    }

    /// Wraps weights already known to lie on the simplex.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        MixedAction(weights)
    }

    pub fn pure(n: usize, action: usize) -> Self {
        let mut w = vec![0.0; n];
        w[action] = 1.0;
        MixedAction(w)
    }

    pub fn uniform(n: usize) -> Self {
        MixedAction(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&k| self.0[k] > 0.0).collect()
    }

    /// Sup-norm distance to another mixed action of the same size.
    pub fn sup_distance(&self, other: &MixedAction) -> f64 {
        sup_distance(&self.0, &other.0)
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn validate_simplex(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidDistribution("empty weight vector".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidDistribution(format!("weight {w} is negative or not finite")));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!("weights sum to {s}")));
    }
    Ok(())
}

/// Beliefs or mixed actions of both players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub x1: MixedAction,
    pub x2: MixedAction,
}

impl MixedProfile {
    pub fn new(x1: MixedAction, x2: MixedAction) -> Self {
        MixedProfile { x1, x2 }
    }

    pub fn pure(game: &Game, a1: usize, a2: usize) -> Self {
        MixedProfile {
            x1: MixedAction::pure(game.rows(), a1),
            x2: MixedAction::pure(game.cols(), a2),
        }
    }

    pub fn uniform(game: &Game) -> Self {
        MixedProfile {
            x1: MixedAction::uniform(game.rows()),
            x2: MixedAction::uniform(game.cols()),
        }
    }

    pub fn get(&self, player: Player) -> &MixedAction {
        match player {
            Player::One => &self.x1,
            Player::Two => &self.x2,
        }
    }

    /// Checks the dimensions against a game.
    pub fn check(&self, game: &Game) -> Result<()> {
        if self.x1.len() != game.rows() || self.x2.len() != game.cols() {
            return Err(Error::DimensionMismatch(format!(
                "profile is {}x{}, game is {}x{}",
                self.x1.len(),
                self.x2.len(),
                game.rows(),
                game.cols()
            )));
        }
        Ok(())
    }

    /// Sup-norm distance on the product of simplices.
    pub fn sup_distance(&self, other: &MixedProfile) -> f64 {
        self.x1.sup_distance(&other.x1).max(self.x2.sup_distance(&other.x2))
    }

    /// Both coordinates concatenated.
    pub fn flat(&self) -> Vec<f64> {
        self.x1.weights().iter().chain(self.x2.weights()).copied().collect()
    }
}

/// A correlated action: a distribution over action profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a {rows}x{cols} grid",
                weights.len()
            )));
        }
        validate_simplex(&weights)?;
        Ok(JointDistribution { rows, cols, weights })
    }

    /// Point mass on `(a1, a2)`.
    pub fn point(rows: usize, cols: usize, a1: usize, a2: usize) -> Self {
        let mut weights = vec![0.0; rows * cols];
        weights[a1 * cols + a2] = 1.0;
        JointDistribution { rows, cols, weights }
    }

    pub fn point_in(game: &Game, a1: usize, a2: usize) -> Self {
        Self::point(game.rows(), game.cols(), a1, a2)
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        JointDistribution {
            rows,
            cols,
            weights: vec![1.0 / (rows * cols) as f64; rows * cols],
        }
    }

    /// The product distribution `x1 ⊗ x2`.
    pub fn product(p: &MixedProfile) -> Self {
        let (rows, cols) = (p.x1.len(), p.x2.len());
        let mut weights = Vec::with_capacity(rows * cols);
        for a in p.x1.weights() {
            for b in p.x2.weights() {
                weights.push(a * b);
            }
        }
        JointDistribution { rows, cols, weights }
    }

    /// Mixture `sum_j c_j * point(profile_j)`; coefficients must sum to one.
    pub fn from_points(rows: usize, cols: usize, points: &[((usize, usize), f64)]) -> Result<Self> {
        let mut weights = vec![0.0; rows * cols];
        for &((a1, a2), c) in points {
            if a1 >= rows || a2 >= cols {
                return Err(Error::DimensionMismatch(format!("profile ({a1},{a2}) outside {rows}x{cols}")));
            }
            weights[a1 * cols + a2] += c;
        }
        JointDistribution::new(rows, cols, weights)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, a1: usize, a2: usize) -> f64 {
        self.weights[a1 * self.cols + a2]
    }

    pub fn marginal(&self, player: Player) -> MixedAction {
        let w = match player {
            Player::One => (0..self.rows)
                .map(|a| self.weights[a * self.cols..(a + 1) * self.cols].iter().sum())
                .collect(),
            Player::Two => (0..self.cols)
                .map(|b| (0..self.rows).map(|a| self.weights[a * self.cols + b]).sum())
                .collect(),
        };
        MixedAction(w)
    }

    /// Beliefs `(z_1, z_2)`.
    pub fn marginals(&self) -> MixedProfile {
        MixedProfile {
            x1: self.marginal(Player::One),
            x2: self.marginal(Player::Two),
        }
    }

    pub fn sup_distance(&self, other: &JointDistribution) -> f64 {
        sup_distance(&self.weights, &other.weights)
    }

    /// Builds from raw weights after clamping rounding-level negatives and
    /// rescaling to unit mass.
    pub(crate) fn from_raw(rows: usize, cols: usize, mut weights: Vec<f64>) -> Self {
        weights.iter_mut().for_each(|w| {
            if *w < 0.0 {
                *w = 0.0
            }
        });
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > RENORM_DRIFT {
            weights.iter_mut().for_each(|w| *w /= s);
        }
        JointDistribution { rows, cols, weights }
    }
}

/// `marginals(z)`.
pub fn marginals(z: &JointDistribution) -> MixedProfile {
    z.marginals()
}

/// `x1 ⊗ x2`.
pub fn product_distribution(p: &MixedProfile) -> JointDistribution {
    JointDistribution::product(p)
}

/// One step of the average-play recursion
/// `z(t) = z(t-1) + (increment - z(t-1)) / t`.
pub fn update_average(z_prev: &JointDistribution, increment: &JointDistribution, t: u64) -> Result<JointDistribution> {
    if t < 2 {
        return Err(Error::InvalidPeriod(t));
    }
    if z_prev.rows != increment.rows || z_prev.cols != increment.cols {
        return Err(Error::DimensionMismatch("increment and average have different shapes".into()));
    }
    let inv = 1.0 / t as f64;
    let weights = z_prev
        .weights
        .iter()
        .zip(&increment.weights)
        .map(|(z, a)| z + (a - z) * inv)
        .collect();
    Ok(JointDistribution::from_raw(z_prev.rows, z_prev.cols, weights))
}

/// Per-action regrets of one player at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretVector {
    pub player: Player,
    pub values: Vec<f64>,
}

impl RegretVector {
    pub fn new(player: Player, values: Vec<f64>) -> Self {
        RegretVector { player, values }
    }

    /// `R_{i,max}`.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HannanClass {
    Outside,
    InteriorH,
    ReducedHR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HannanStatus {
    pub class: HannanClass,
    /// Max over players of `R_{i,max}(z)`.
    pub margin: f64,
    pub max_regrets: [f64; 2],
}

impl HannanStatus {
    pub fn in_hannan_set(&self) -> bool {
        self.class != HannanClass::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pennies() -> Game {
        Game::from_tables(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    fn fig3i() -> Game {
        Game::symmetric(&[
            vec![2.0, 1.0, -4.0],
            vec![1.0, 0.0, -1.0],
            vec![-4.0, -1.0, -2.0],
        ])
        .unwrap()
    }

    fn fig1() -> Game {
        let s = 2f64.sqrt();
        Game::from_tables(&[vec![1.0, 0.0], vec![0.0, s]], &[vec![s, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn diag_thirds() -> JointDistribution {
        JointDistribution::from_points(3, 3, &[((0, 0), 1.0 / 3.0), ((1, 1), 1.0 / 3.0), ((2, 2), 1.0 / 3.0)])
            .unwrap()
    }

    #[test]
    fn game_rejects_bad_tables() {
        assert!(Game::new(2, 2, vec![0.0; 4], vec![0.0; 3]).is_err());
        assert!(Game::new(0, 2, vec![], vec![]).is_err());
        assert!(Game::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
        assert_eq!(fig3i().payoff_bound(), 4.0);
    }

    #[test]
    fn expected_payoff_examples() {
        let z = JointDistribution::uniform(2, 2);
        assert_eq!(pennies().expected_payoffs(&z).unwrap(), (0.0, 0.0));
        let (u1, u2) = fig3i().expected_payoffs(&diag_thirds()).unwrap();
        assert!(u1.abs() < 1e-15 && u2.abs() < 1e-15);
        let g = fig1();
        let z = JointDistribution::point_in(&g, 1, 1);
        assert_eq!(g.expected_payoffs(&z).unwrap(), (2f64.sqrt(), 1.0));
        assert!(g.expected_payoffs(&JointDistribution::uniform(3, 2)).is_err());
    }

    #[test]
    fn marginals_and_products() {
        let m = JointDistribution::point(2, 3, 0, 1).marginals();
        assert_eq!(m.x1.weights(), &[1.0, 0.0]);
        assert_eq!(m.x2.weights(), &[0.0, 1.0, 0.0]);
        let u = JointDistribution::uniform(2, 2).marginals();
        assert_eq!(u.x1.weights(), &[0.5, 0.5]);
        let p = MixedProfile::new(
            MixedAction::new(vec![1.0, 0.0]).unwrap(),
            MixedAction::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap(),
        );
        assert_eq!(product_distribution(&p).weights(), &[1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0]);
        let half = MixedAction::uniform(2);
        let q = product_distribution(&MixedProfile::new(half.clone(), half));
        assert_eq!(q, JointDistribution::uniform(2, 2));
    }

    #[test]
    fn regret_examples() {
        let g = fig1();
        let z = JointDistribution::point_in(&g, 0, 1);
        let s = 2f64.sqrt();
        assert_eq!(g.regret_vector(Player::One, &z).unwrap().values, vec![0.0, s]);
        assert_eq!(g.regret_vector(Player::Two, &z).unwrap().values, vec![s, 0.0]);

        let r = fig3i().regret_vector(Player::One, &diag_thirds()).unwrap();
        let expect = [-1.0 / 3.0, 0.0, -7.0 / 3.0];
        for (a, b) in r.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{:?}", r.values);
        }
        assert!(r.max().abs() < 1e-15);
    }

    #[test]
    fn strict_nash_point_has_no_positive_regret() {
        let g = fig3i();
        let z = JointDistribution::point_in(&g, 0, 0);
        for p in Player::BOTH {
            let r = g.regret_vector(p, &z).unwrap();
            assert_eq!(r.max(), 0.0);
            assert!(r.values[1] < 0.0 && r.values[2] < 0.0);
        }
    }

    #[test]
    fn best_reply_sets() {
        let g = pennies();
        let opp = MixedAction::pure(2, 0);
        assert_eq!(g.best_replies(Player::One, &opp, 0.0).unwrap(), vec![(0, 1.0)]);
        assert_eq!(g.best_replies(Player::One, &opp, 2.0).unwrap().len(), 2);
        assert!(g.best_replies(Player::One, &opp, -1.0).is_err());
        assert!(g.best_replies(Player::One, &MixedAction::uniform(3), 0.0).is_err());
    }

    #[test]
    fn hannan_examples() {
        let s = fig3i().hannan_status(&diag_thirds(), 1e-9).unwrap();
        assert_eq!(s.class, HannanClass::ReducedHR);
        assert!(s.margin.abs() < 1e-12);
        let z = JointDistribution::point(3, 3, 0, 0);
        assert_eq!(fig3i().hannan_status(&z, 1e-9).unwrap().class, HannanClass::ReducedHR);
        assert!(fig3i().hannan_status(&z, 0.0).is_err());
    }

    #[test]
    fn update_average_examples() {
        let z = JointDistribution::point(2, 2, 0, 0);
        for t in [2, 3, 1000] {
            assert_eq!(update_average(&z, &z, t).unwrap(), z);
        }
        let a = JointDistribution::point(2, 2, 0, 1);
        let b = JointDistribution::point(2, 2, 1, 0);
        assert_eq!(update_average(&a, &b, 2).unwrap().weights(), &[0.0, 0.5, 0.5, 0.0]);
        assert!(matches!(update_average(&a, &b, 1), Err(Error::InvalidPeriod(1))));

        // three plays: (0,0), (0,1), (1,0)
        let mut z = JointDistribution::point(2, 2, 0, 0);
        z = update_average(&z, &JointDistribution::point(2, 2, 0, 1), 2).unwrap();
        z = update_average(&z, &JointDistribution::point(2, 2, 1, 0), 3).unwrap();
        for (w, e) in z.weights().iter().zip([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_action_validation() {
        assert!(MixedAction::new(vec![0.5, 0.6]).is_err());
        assert!(MixedAction::new(vec![1.5, -0.5]).is_err());
        assert!(MixedAction::new(vec![]).is_err());
        assert!(MixedAction::normalized(vec![0.0, 0.0]).is_err());
        assert_eq!(MixedAction::normalized(vec![1.0, 3.0]).unwrap().weights(), &[0.25, 0.75]);
    }
}
