//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "pennies-rm"
//! game = "matching_pennies"      # catalog reference or path to a game file
//! dynamics = "stochastic"        # stochastic | expected | dfp | cfp | cont_noregret
//! horizon = 100000
//! runs = 50
//! seed = 7
//! analyses = ["hannan", "limit_set"]
//! output = "out"
//!
//! [strategy]
//! player1 = "rm"
//! player2 = "rm"
//! fallback1 = "const:0"
//! fallback2 = "const:0"
//!
//! [record]
//! schedule = "geometric:1.1"
//! periods = false
//!
//! [initial]
//! profile = ["H", "T"]           # labels or indices; seeded uniform if absent
//! tie_rule = "lowest"
//!
//! [continuous]
//! x1 = [0.9, 0.1]                # starting beliefs; seeded interior if absent
//! x2 = [0.2, 0.8]
//! tie_policy = "restricted"
//! rtol = 1e-8
//! atol = 1e-12
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use regretlab::continuous::TiePolicy;
use regretlab::discrete::{Schedule, TieRule};
use regretlab::strategy::{FallbackPolicy, Strategy};
use regretlab::{Error, Game, Player, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Stochastic,
    Expected,
    Dfp,
    Cfp,
    ContNoregret,
}

impl Dynamics {
    pub fn is_discrete(self) -> bool {
        matches!(self, Dynamics::Stochastic | Dynamics::Expected | Dynamics::Dfp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Hannan status of the final joint distribution.
    Hannan,
    /// Empirical limit set of the beliefs.
    LimitSet,
    /// Payoff and graph perturbation levels per period.
    Perturbation,
    /// Distance of the final beliefs to each Nash equilibrium.
    Equilibria,
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hannan" => Ok(Analysis::Hannan),
            "limit_set" => Ok(Analysis::LimitSet),
            "perturbation" => Ok(Analysis::Perturbation),
            "equilibria" => Ok(Analysis::Equilibria),
            _ => Err(Error::Parse(format!(
                "unknown analysis '{s}', expected hannan, limit_set, perturbation or equilibria"
            ))),
        }
    }
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Hannan => "hannan",
            Analysis::LimitSet => "limit_set",
            Analysis::Perturbation => "perturbation",
            Analysis::Equilibria => "equilibria",
        }
    }
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    pub player1: String,
    pub player2: String,
    pub fallback1: String,
    pub fallback2: String,
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection {
            player1: "rm".into(),
            player2: "rm".into(),
            fallback1: "const:0".into(),
            fallback2: "const:0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordSection {
    pub schedule: String,
    /// Keep a light record of every period, needed by `perturbation`.
    pub periods: bool,
}

impl Default for RecordSection {
    fn default() -> Self {
        RecordSection { schedule: "geometric:1.1".into(), periods: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub profile: Option<[String; 2]>,
    pub tie_rule: String,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { profile: None, tie_rule: "lowest".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousSection {
    pub x1: Option<Vec<f64>>,
    pub x2: Option<Vec<f64>>,
    pub tie_policy: String,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ContinuousSection {
    fn default() -> Self {
        ContinuousSection { x1: None, x2: None, tie_policy: "restricted".into(), rtol: 1e-8, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub game: String,
    pub dynamics: Dynamics,
    pub horizon: u64,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub record: RecordSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub continuous: ContinuousSection,
}

/// Parsed and checked pieces of a configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub game: Game,
    pub strategies: [Strategy; 2],
    pub fallbacks: [FallbackPolicy; 2],
    pub schedule: Schedule,
    pub tie_rule: TieRule,
    pub tie_policy: TiePolicy,
    pub profile: Option<(usize, usize)>,
}

/// A catalog reference, or else a path to a game file.
pub fn resolve_game(reference: &str) -> Result<Game> {
    match regretlab::catalog::resolve(reference) {
        Ok(g) => Ok(g),
        Err(e @ Error::UnknownGame(_)) => {
            let path = Path::new(reference);
            if path.is_file() {
                regretlab::gamefile::read_game(path)
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

fn action_index(game: &Game, player: Player, s: &str) -> Result<usize> {
    (0..game.actions(player))
        .find(|&k| game.label(player, k) == s)
        .or_else(|| s.parse().ok().filter(|&k: &usize| k < game.actions(player)))
        .ok_or_else(|| Error::InvalidParameter(format!("no action '{s}' for {player}")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks every reference and parameter.
    pub fn resolve(&self) -> Result<Resolved> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidParameter(format!("experiment name '{}' is not a plain file name", self.name)));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.runs < 1 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        let game = resolve_game(&self.game)?;
        let strategies = [self.strategy.player1.parse()?, self.strategy.player2.parse()?];
        let fallbacks: [FallbackPolicy; 2] = [self.strategy.fallback1.parse()?, self.strategy.fallback2.parse()?];
        for (player, f) in Player::BOTH.into_iter().zip(&fallbacks) {
            if let FallbackPolicy::ConstantAction(c) = f {
                if *c >= game.actions(player) {
                    return Err(Error::InvalidParameter(format!("{player} has no fallback action {c}")));
                }
            }
        }
        let schedule: Schedule = self.record.schedule.parse()?;
        schedule.periods(1, self.horizon)?;
        let profile = match &self.initial.profile {
            Some([a, b]) => Some((action_index(&game, Player::One, a)?, action_index(&game, Player::Two, b)?)),
            None => None,
        };
        for a in &self.analyses {
            let ok = match a {
                Analysis::LimitSet | Analysis::Perturbation => self.dynamics.is_discrete(),
                Analysis::Hannan | Analysis::Equilibria => true,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "analysis '{}' needs discrete dynamics",
                    a.name()
                )));
            }
            if *a == Analysis::Perturbation && self.dynamics == Dynamics::Expected {
                return Err(Error::InvalidParameter("perturbation needs realized play".into()));
            }
        }
        Ok(Resolved {
            game,
            strategies,
            fallbacks,
            schedule,
            tie_rule: self.initial.tie_rule.parse()?,
            tie_policy: self.continuous.tie_policy.parse()?,
            profile,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"x\"\ngame = \"fig1\"\ndynamics = \"dfp\"\nhorizon = 10\n";

    #[test]
    fn defaults_fill_sections() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.runs, 1);
        assert_eq!(c.strategy, StrategySection::default());
        assert!(c.resolve().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}colour = 3\n")).is_err());
    }

    #[test]
    fn bad_references_are_caught() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.game = "no_such_game".into();
        assert!(matches!(c.resolve(), Err(Error::UnknownGame(_))));
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.runs = 0;
        assert!(c.resolve().is_err());
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.initial.profile = Some(["L".into(), "Q".into()]);
        assert!(c.resolve().is_err());
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.dynamics = Dynamics::Cfp;
        c.analyses = vec![Analysis::LimitSet];
        assert!(c.resolve().is_err());
    }

    #[test]
    fn labels_and_indices_both_work() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.initial.profile = Some(["L".into(), "1".into()]);
        assert_eq!(c.resolve().unwrap().profile, Some((0, 1)));
    }
}
