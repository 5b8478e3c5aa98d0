//! Potential-based action rules and their fallbacks.
//!
//! A potential is a convex generalized distance from a regret vector to the
//! nonpositive orthant. When a player has some positive regret, the next
//! mixed action is the normalized gradient of her potential at the current
//! regret vector. When all regrets are nonpositive a [`FallbackPolicy`]
//! decides.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, MixedAction, Player, RegretVector};

/// Normalizers below this are treated as zero.
const GRADIENT_FLOOR: f64 = 1e-300;

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum PotentialSpec {
    /// `P(x) = (sum_k [x_k]_+^p)^(1/p)` with `1 < p < inf`.
    LpNorm { p: f64 },
    Custom {
        name: String,
        value: PotentialFn,
        gradient: GradientFn,
    },
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::LpNorm { p } => write!(f, "LpNorm({p})"),
            PotentialSpec::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PotentialSpec {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("l_p exponent must lie in (1, inf), got {p}")));
        }
        Ok(PotentialSpec::LpNorm { p })
    }

    /// The l2 potential, i.e. regret matching.
    pub fn regret_matching() -> Self {
        PotentialSpec::LpNorm { p: 2.0 }
    }

    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        PotentialSpec::Custom {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            PotentialSpec::LpNorm { p } => lp_value(*p, x),
            PotentialSpec::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PotentialSpec::LpNorm { p } => {
                let norm = lp_value(*p, x);
                if norm == 0.0 {
                    return vec![0.0; x.len()];
                }
                x.iter()
                    .map(|&v| if v > 0.0 { (v / norm).powf(p - 1.0) } else { 0.0 })
                    .collect()
            }
            PotentialSpec::Custom { gradient, .. } => gradient(x),
        }
    }

    /// The (P4') constant when it is known in closed form.
    pub fn rho2(&self) -> Option<f64> {
        match self {
            // degree-1 homogeneous: grad P(x) . x = P(x)
            PotentialSpec::LpNorm { .. } => Some(1.0),
            PotentialSpec::Custom { .. } => None,
        }
    }
}

fn lp_value(p: f64, x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(0.0_f64, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    // scale by the largest entry so large p does not overflow
    let s: f64 = x.iter().filter(|v| **v > 0.0).map(|v| (v / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// `P(x)` for a regret vector.
pub fn potential_value(spec: &PotentialSpec, x: &RegretVector) -> f64 {
    spec.value(&x.values)
}

/// Rule (Q1): the normalized potential gradient at `r`.
pub fn q1_action(spec: &PotentialSpec, r: &RegretVector) -> Result<MixedAction> {
    let x = &r.values;
    let weights = match spec {
        PotentialSpec::LpNorm { p } if *p == 2.0 => x.iter().map(|v| v.max(0.0)).collect::<Vec<_>>(),
        PotentialSpec::LpNorm { p } => {
            let m = x.iter().copied().fold(0.0_f64, f64::max);
            if m == 0.0 {
                return Err(Error::ZeroGradient);
            }
            x.iter()
                .map(|&v| if v > 0.0 { (v / m).powf(p - 1.0) } else { 0.0 })
                .collect()
        }
        PotentialSpec::Custom { gradient, .. } => {
            let g = gradient(x);
            if g.len() != x.len() {
                return Err(Error::DimensionMismatch("custom gradient has the wrong length".into()));
            }
            if g.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter("custom gradient has a negative entry".into()));
            }
            g
        }
    };
    let total: f64 = weights.iter().sum();
    if !(total >= GRADIENT_FLOOR) {
        return Err(Error::ZeroGradient);
    }
    MixedAction::normalized(weights)
}

/// Regret matching: play proportionally to positive regrets.
pub fn regret_matching(r: &RegretVector) -> Result<MixedAction> {
    q1_action(&PotentialSpec::regret_matching(), r)
}

/// Softmax of reply payoffs at inverse temperature `beta`.
pub fn exp_weights_action(game: &Game, player: Player, opp_belief: &MixedAction, beta: f64) -> Result<MixedAction> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    if opp_belief.len() != game.actions(player.opponent()) {
        return Err(Error::DimensionMismatch("belief size does not match the opponent".into()));
    }
    let pay = game.reply_payoffs(player, opp_belief.weights());
    Ok(softmax(&pay, beta))
}

fn softmax(values: &[f64], beta: f64) -> MixedAction {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (beta * (v - m)).exp()).collect();
    let s: f64 = w.iter().sum();
    MixedAction::normalized(w.into_iter().map(|v| v / s).collect())
        .expect("softmax weights are positive at the maximizer")
}

/// What a player does when no regret is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FallbackPolicy {
    /// Rule (Q2): a fixed pure action.
    ConstantAction(usize),
    /// Rule (Q2'): lowest-index exact best reply to the belief.
    BestReply,
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        FallbackPolicy::ConstantAction(0)
    }
}

impl FallbackPolicy {
    pub fn action(&self, game: &Game, player: Player, opp_belief: &MixedAction) -> Result<usize> {
        match *self {
            FallbackPolicy::ConstantAction(c) => {
                if c >= game.actions(player) {
                    return Err(Error::InvalidParameter(format!("{player} has no action {c}")));
                }
                Ok(c)
            }
            FallbackPolicy::BestReply => Ok(game.best_reply(player, opp_belief.weights())),
        }
    }
}

impl FromStr for FallbackPolicy {
    type Err = Error;

    /// `const:<c>` or `br`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "br" {
            return Ok(FallbackPolicy::BestReply);
        }
        if let Some(c) = s.strip_prefix("const:") {
            return c
                .parse()
                .map(FallbackPolicy::ConstantAction)
                .map_err(|_| Error::Parse(format!("bad fallback action '{c}'")));
        }
        Err(Error::Parse(format!("unknown fallback '{s}', expected const:<c> or br")))
    }
}

impl fmt::Display for FallbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FallbackPolicy::ConstantAction(c) => write!(f, "const:{c}"),
            FallbackPolicy::BestReply => write!(f, "br"),
        }
    }
}

/// Q1 when some regret is positive, the fallback otherwise.
pub fn next_action(
    spec: &PotentialSpec,
    fallback: FallbackPolicy,
    r: &RegretVector,
    opp_belief: &MixedAction,
    game: &Game,
    player: Player,
) -> Result<MixedAction> {
    if r.max() > 0.0 {
        q1_action(spec, r)
    } else {
        let a = fallback.action(game, player, opp_belief)?;
        Ok(MixedAction::pure(game.actions(player), a))
    }
}

/// Strategy descriptors accepted in experiment configurations.
#[derive(Debug, Clone)]
pub enum Strategy {
    Potential(PotentialSpec),
    /// Exponential weights with `beta_t = t^alpha`.
    ExpWeights { alpha: f64 },
    /// Exact best reply to the belief (discrete fictitious play).
    FictitiousPlay,
}

impl Strategy {
    pub fn descriptor(&self) -> String {
        match self {
            Strategy::Potential(PotentialSpec::LpNorm { p }) if *p == 2.0 => "rm".into(),
            Strategy::Potential(PotentialSpec::LpNorm { p }) => format!("lp:{p}"),
            Strategy::Potential(PotentialSpec::Custom { name, .. }) => format!("custom:{name}"),
            Strategy::ExpWeights { alpha } => format!("expw:{alpha}"),
            Strategy::FictitiousPlay => "fp".into(),
        }
    }

    pub fn potential(&self) -> Option<&PotentialSpec> {
        match self {
            Strategy::Potential(p) => Some(p),
            _ => None,
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{v}' in strategy '{s}'")))
        };
        match s {
            "rm" => Ok(Strategy::Potential(PotentialSpec::regret_matching())),
            "fp" => Ok(Strategy::FictitiousPlay),
            _ => {
                if let Some(p) = s.strip_prefix("lp:") {
                    Ok(Strategy::Potential(PotentialSpec::lp(num(p)?)?))
                } else if let Some(a) = s.strip_prefix("expw:") {
                    let alpha = num(a)?;
                    if !(alpha > 0.0 && alpha < 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "exponential weights need alpha in (0, 1), got {alpha}"
                        )));
                    }
                    Ok(Strategy::ExpWeights { alpha })
                } else {
                    Err(Error::Parse(format!("unknown strategy '{s}'")))
                }
            }
        }
    }
}

/// Outcome of a Monte Carlo check of conditions (R1)-(R3) and (P4').
#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub passed: bool,
    pub samples_checked: usize,
    /// Largest observed `grad P(x) . x / P(x)`.
    pub rho2_estimate: f64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub condition: &'static str,
    pub point: Vec<f64>,
    pub detail: String,
}

/// Samples `x` uniformly in `[-bound, bound]^dims` (a third of them folded
/// into the nonpositive orthant) and checks the potential conditions.
/// Points within 1e-9 of a coordinate hyperplane are skipped, since the
/// l_p potentials are not differentiable there.
pub fn validate_potential(spec: &PotentialSpec, dims: usize, samples: usize, bound: f64, seed: u64) -> PotentialReport {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho2 = 0.0_f64;
    let mut checked = 0;
    let fail = |condition, point: &[f64], detail: String, checked, rho2| PotentialReport {
        passed: false,
        samples_checked: checked,
        rho2_estimate: rho2,
        counterexample: Some(Counterexample {
            condition,
            point: point.to_vec(),
            detail,
        }),
    };
    for s in 0..samples {
        let mut x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-bound..=bound)).collect();
        if s % 3 == 0 {
            x.iter_mut().for_each(|v| *v = -v.abs());
        }
        if x.iter().any(|v| v.abs() < 1e-9) {
            continue;
        }
        checked += 1;
        let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let p = spec.value(&x);
        let g = spec.gradient(&x);
        let in_orthant = x.iter().all(|v| *v <= 0.0);
        if !(p >= -TOL * scale) || (in_orthant && p.abs() > TOL * scale) {
            return fail("R1", &x, format!("P = {p}"), checked, rho2);
        }
        if g.len() != dims || g.iter().any(|v| !(*v >= -TOL)) {
            return fail("R2", &x, format!("gradient {g:?} has a negative entry"), checked, rho2);
        }
        let gx: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        if !in_orthant {
            if !(gx > 0.0) {
                return fail("R2", &x, format!("grad P . x = {gx}"), checked, rho2);
            }
            if let Some(k) = (0..dims).find(|&k| x[k] <= 0.0 && g[k].abs() > TOL) {
                return fail("R3", &x, format!("partial {k} = {} at x_{k} <= 0", g[k]), checked, rho2);
            }
        }
        if p > TOL {
            rho2 = rho2.max(gx / p);
        } else if gx > TOL * scale {
            return fail("P4'", &x, format!("grad P . x = {gx} while P = {p}"), checked, rho2);
        }
    }
    PotentialReport {
        passed: rho2.is_finite(),
        samples_checked: checked,
        rho2_estimate: rho2,
        counterexample: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Strategy;

    fn rv(v: &[f64]) -> RegretVector {
        RegretVector::new(Player::One, v.to_vec())
    }

    fn pennies() -> Game {
        Game::from_tables(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    #[test]
    fn potential_values() {
        let l2 = PotentialSpec::regret_matching();
        assert!((potential_value(&l2, &rv(&[0.3, 0.1, -0.2])) - 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!(potential_value(&l2, &rv(&[-0.3, 0.0, -0.2])), 0.0);
        let l3 = PotentialSpec::lp(3.0).unwrap();
        assert!((potential_value(&l3, &rv(&[1.0, 1.0, 0.0])) - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!(PotentialSpec::lp(1.5).is_ok());
        assert!(PotentialSpec::lp(1.0).is_err());
        assert!(PotentialSpec::lp(f64::INFINITY).is_err());
    }

    #[test]
    fn q1_examples() {
        let l2 = PotentialSpec::regret_matching();
        let q = q1_action(&l2, &rv(&[0.3, 0.1, -0.2])).unwrap();
        assert!((q.weights()[0] - 0.75).abs() < 1e-15 && (q.weights()[1] - 0.25).abs() < 1e-15);
        assert_eq!(q.weights()[2], 0.0);
        assert_eq!(regret_matching(&rv(&[0.5, -0.1])).unwrap().weights(), &[1.0, 0.0]);
        let q = q1_action(&PotentialSpec::lp(100.0).unwrap(), &rv(&[0.3, 0.1, -0.2])).unwrap();
        assert!(q.weights()[0] >= 1.0 - 1e-40);
        assert!(matches!(q1_action(&l2, &rv(&[-1.0, 0.0])), Err(Error::ZeroGradient)));
    }

    #[test]
    fn custom_zero_gradient_is_an_error() {
        let flat = PotentialSpec::custom("flat", |_| 0.0, |x| vec![0.0; x.len()]);
        assert!(matches!(q1_action(&flat, &rv(&[1.0, 2.0])), Err(Error::ZeroGradient)));
    }

    #[test]
    fn exp_weights_examples() {
        let g = pennies();
        let opp = MixedAction::pure(2, 0);
        assert_eq!(exp_weights_action(&g, Player::One, &opp, 0.0).unwrap(), MixedAction::uniform(2));
        let mut last = 0.5;
        for beta in [0.5, 1.0, 5.0, 50.0, 800.0] {
            let w = exp_weights_action(&g, Player::One, &opp, beta).unwrap().weights()[0];
            assert!(w >= last && w > 0.5);
            last = w;
        }
        assert!(last > 1.0 - 1e-15);
        let two = Game::new(2, 1, vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let q = exp_weights_action(&two, Player::One, &MixedAction::pure(1, 0), 3f64.ln()).unwrap();
        assert!((q.weights()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn next_action_branches() {
        let g = Game::new(3, 2, vec![0.0; 6], vec![0.0; 6]).unwrap();
        let l2 = PotentialSpec::regret_matching();
        let opp = MixedAction::uniform(2);
        for fb in [FallbackPolicy::ConstantAction(2), FallbackPolicy::BestReply] {
            let q = next_action(&l2, fb, &rv(&[0.3, 0.1, -0.2]), &opp, &g, Player::One).unwrap();
            assert!((q.weights()[0] - 0.75).abs() < 1e-15);
        }
        let q = next_action(&l2, FallbackPolicy::ConstantAction(0), &rv(&[-1.0, 0.0, -0.1]), &opp, &g, Player::One);
        assert_eq!(q.unwrap(), MixedAction::pure(3, 0));
        let p = pennies();
        let q = next_action(
            &l2,
            FallbackPolicy::BestReply,
            &rv(&[-1.0, 0.0]),
            &MixedAction::pure(2, 0),
            &p,
            Player::One,
        );
        assert_eq!(q.unwrap(), MixedAction::pure(2, 0));
        let q = next_action(&l2, FallbackPolicy::BestReply, &rv(&[-1.0, 0.0]), &MixedAction::pure(2, 0), &p, Player::Two);
        assert_eq!(q.unwrap(), MixedAction::pure(2, 1));
    }

    #[test]
    fn descriptors() {
        assert!(matches!("rm".parse::<Strategy>().unwrap(), Strategy::Potential(PotentialSpec::LpNorm { p }) if p == 2.0));
        assert!(matches!("lp:4".parse::<Strategy>().unwrap(), Strategy::Potential(PotentialSpec::LpNorm { p }) if p == 4.0));
        assert!(matches!("expw:0.5".parse::<Strategy>().unwrap(), Strategy::ExpWeights { alpha } if alpha == 0.5));
        assert!(matches!("fp".parse::<Strategy>().unwrap(), Strategy::FictitiousPlay));
        assert!("lp:1".parse::<Strategy>().is_err());
        assert!("expw:2".parse::<Strategy>().is_err());
        assert!("nope".parse::<Strategy>().is_err());
        assert_eq!("lp:3".parse::<Strategy>().unwrap().descriptor(), "lp:3");
        assert_eq!("br".parse::<FallbackPolicy>().unwrap(), FallbackPolicy::BestReply);
        assert_eq!("const:2".parse::<FallbackPolicy>().unwrap(), FallbackPolicy::ConstantAction(2));
    }

    #[test]
    fn validation_reports() {
        let r = validate_potential(&PotentialSpec::regret_matching(), 4, 3000, 2.0, 1);
        assert!(r.passed, "{r:?}");
        assert!((r.rho2_estimate - 1.0).abs() < 1e-9);
        let r = validate_potential(&PotentialSpec::lp(4.0).unwrap(), 3, 3000, 2.0, 2);
        assert!(r.passed, "{r:?}");
        let shifted = PotentialSpec::custom(
            "sum-minus-const",
            |x| x.iter().map(|v| v.max(0.0)).sum::<f64>() - 0.5,
            |x| x.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect(),
        );
        let r = validate_potential(&shifted, 3, 100, 2.0, 3);
        assert!(!r.passed);
        assert_eq!(r.counterexample.unwrap().condition, "R1");
    }

    proptest! {
        #[test]
        fn q1_is_a_simplex_point_on_positive_support(
            r in prop::collection::vec(-2.0f64..2.0, 1..6),
            p in 1.1f64..8.0,
        ) {
            prop_assume!(r.iter().any(|v| *v > 1e-6));
            let spec = PotentialSpec::lp(p).unwrap();
            let q = q1_action(&spec, &rv(&r)).unwrap();
            let s: f64 = q.weights().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for (w, x) in q.weights().iter().zip(&r) {
                prop_assert!(*w >= 0.0);
                if *x <= 0.0 { prop_assert_eq!(*w, 0.0); }
            }
        }

        #[test]
        fn q1_is_scale_invariant(
            r in prop::collection::vec(-2.0f64..2.0, 1..6),
            p in 1.1f64..8.0,
            lambda in 0.01f64..100.0,
        ) {
            prop_assume!(r.iter().any(|v| *v > 1e-6));
            let spec = PotentialSpec::lp(p).unwrap();
            let a = q1_action(&spec, &rv(&r)).unwrap();
            let scaled: Vec<f64> = r.iter().map(|v| v * lambda).collect();
            let b = q1_action(&spec, &rv(&scaled)).unwrap();
            prop_assert!(a.sup_distance(&b) < 1e-12);
        }

        #[test]
        fn l2_rule_is_positive_part_normalized(r in prop::collection::vec(-2.0f64..2.0, 1..6)) {
            prop_assume!(r.iter().any(|v| *v > 0.0));
            let q = regret_matching(&rv(&r)).unwrap();
            let s: f64 = r.iter().map(|v| v.max(0.0)).sum();
            for (w, x) in q.weights().iter().zip(&r) {
                prop_assert_eq!(*w, x.max(0.0) / s);
            }
        }

        #[test]
        fn softmax_is_shift_invariant(
            pay in prop::collection::vec(-3.0f64..3.0, 2..5),
            shift in -10.0f64..10.0,
            beta in 0.0f64..20.0,
        ) {
            let n = pay.len();
            let g = Game::new(n, 1, pay.clone(), vec![0.0; n]).unwrap();
            let h = Game::new(n, 1, pay.iter().map(|v| v + shift).collect(), vec![0.0; n]).unwrap();
            let opp = MixedAction::pure(1, 0);
            let a = exp_weights_action(&g, Player::One, &opp, beta).unwrap();
            let b = exp_weights_action(&h, Player::One, &opp, beta).unwrap();
            prop_assert!(a.sup_distance(&b) < 1e-12);
        }
    }
}
