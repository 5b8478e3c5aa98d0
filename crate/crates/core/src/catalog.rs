//! Named games and random game generators.
//!
//! Names accepted by [`resolve`]:
//! `fig1`, `fig2`, `fig3i`, `fig3ii:<eps>`, `shapley`, `fig5:<eta>`, `a2ex1`,
//! `a2ex2`, `matching_pennies`, `coordination`, and
//! `generate:<class>:<dims>:<seed>` where `<dims>` is `n` or `RxC`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Player};

/// `sqrt(2) / (1 + sqrt(2))`, the belief weight on `L` that makes `C` a
/// best reply in `fig2`.
pub fn fig2_eta() -> f64 {
    let s = std::f64::consts::SQRT_2;
    s / (1.0 + s)
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub provenance: &'static str,
}

pub const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "fig1",
        params: &[],
        provenance: "2x2 game with payoffs 1 and sqrt(2) on the diagonal; discrete fictitious play locks off the diagonal",
    },
    CatalogEntry {
        name: "fig2",
        params: &[],
        provenance: "3x2 game where C is a best reply only at the irrational belief (eta, 1 - eta)",
    },
    CatalogEntry {
        name: "fig3i",
        params: &[],
        provenance: "symmetric 3x3 identical-interest game, strictly dominance solvable to (A, A)",
    },
    CatalogEntry {
        name: "fig3ii",
        params: &["eps >= 0"],
        provenance: "symmetric 4x4 coordination game with duplicates A-, B- penalized by eps",
    },
    CatalogEntry {
        name: "shapley",
        params: &[],
        provenance: "Shapley's 3x3 game with unique uniform equilibrium",
    },
    CatalogEntry {
        name: "fig5",
        params: &["eta in (0, 1/2)"],
        provenance: "3x2 game separating epsilon-best replies from graph-perturbed best replies; \
                     only player 1's payoffs are specified, player 2's are set to zero",
    },
    CatalogEntry {
        name: "a2ex1",
        params: &[],
        provenance: "symmetric one-population 3x3 example stored as the bimatrix (u, u^T); \
                     whole state space is internally chain transitive",
    },
    CatalogEntry {
        name: "a2ex2",
        params: &[],
        provenance: "2x2 game whose Nash set is the union of the edges x_B = 0 and y_R = 0; \
                     only player 1's payoffs are nonzero",
    },
    CatalogEntry {
        name: "matching_pennies",
        params: &[],
        provenance: "2x2 zero-sum game with unique equilibrium (1/2, 1/2)",
    },
    CatalogEntry {
        name: "coordination",
        params: &[],
        provenance: "2x2 pure coordination game, 1 on the diagonal and 0 elsewhere",
    },
];

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn one_param(name: &str, params: &[f64]) -> Result<f64> {
    match params {
        [v] => Ok(*v),
        _ => Err(Error::InvalidParameter(format!("{name} takes exactly one parameter"))),
    }
}

fn no_params(name: &str, params: &[f64]) -> Result<()> {
    if params.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} takes no parameters")))
    }
}

/// Builds a catalog game by name.
pub fn build(name: &str, params: &[f64]) -> Result<Game> {
    let s = std::f64::consts::SQRT_2;
    match name {
        "fig1" => {
            no_params(name, params)?;
            Game::from_tables(&[vec![1.0, 0.0], vec![0.0, s]], &[vec![s, 0.0], vec![0.0, 1.0]])?
                .with_labels(labels(&["L", "R"]), labels(&["L", "R"]))
        }
        "fig2" => {
            no_params(name, params)?;
            let eta = fig2_eta();
            Game::from_tables(
                &[vec![1.0, 0.0], vec![0.0, s], vec![eta, eta]],
                &[vec![0.0, s], vec![1.0, 0.0], vec![0.0, 0.0]],
            )?
            .with_labels(labels(&["L", "R", "C"]), labels(&["L", "R"]))
        }
        "fig3i" => {
            no_params(name, params)?;
            let abc = labels(&["A", "B", "C"]);
            Game::symmetric(&[
                vec![2.0, 1.0, -4.0],
                vec![1.0, 0.0, -1.0],
                vec![-4.0, -1.0, -2.0],
            ])?
            .with_labels(abc.clone(), abc)
        }
        "fig3ii" => {
            let e = one_param(name, params)?;
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter(format!("fig3ii needs eps >= 0, got {e}")));
            }
            let l = labels(&["A", "A-", "B", "B-"]);
            Game::symmetric(&[
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0 - e, 1.0 - e, -e, -e],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![-e, -e, 1.0 - e, 1.0 - e],
            ])?
            .with_labels(l.clone(), l)
        }
        "shapley" => {
            no_params(name, params)?;
            let abc = labels(&["A", "B", "C"]);
            Game::from_tables(
                &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
                &[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            )?
            .with_labels(abc.clone(), abc)
        }
        "fig5" => {
            let eta = one_param(name, params)?;
            if !(eta > 0.0 && eta < 0.5) {
                return Err(Error::InvalidParameter(format!("fig5 needs eta in (0, 1/2), got {eta}")));
            }
            let b = 0.5 - eta;
            Game::from_tables(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![b, b]], &vec![vec![0.0; 2]; 3])?
                .with_labels(labels(&["T", "C", "B"]), labels(&["L", "R"]))
        }
        "a2ex1" => {
            no_params(name, params)?;
            let abc = labels(&["A", "B", "C"]);
            Game::symmetric(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]])?
                .with_labels(abc.clone(), abc)
        }
        "a2ex2" => {
            no_params(name, params)?;
            Game::from_tables(&[vec![0.0, 0.0], vec![0.0, -1.0]], &vec![vec![0.0; 2]; 2])?
                .with_labels(labels(&["T", "B"]), labels(&["L", "R"]))
        }
        "matching_pennies" => {
            no_params(name, params)?;
            Game::from_tables(&[vec![1.0, -1.0], vec![-1.0, 1.0]], &[vec![-1.0, 1.0], vec![1.0, -1.0]])?
                .with_labels(labels(&["H", "T"]), labels(&["H", "T"]))
        }
        "coordination" => {
            no_params(name, params)?;
            Game::symmetric(&[vec![1.0, 0.0], vec![0.0, 1.0]])?.with_labels(labels(&["A", "B"]), labels(&["A", "B"]))
        }
        _ => Err(Error::UnknownGame(name.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameClass {
    ZeroSum,
    IdenticalInterest,
    WeightedPotential,
}

impl std::str::FromStr for GameClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_sum" => Ok(GameClass::ZeroSum),
            "identical_interest" => Ok(GameClass::IdenticalInterest),
            "weighted_potential" => Ok(GameClass::WeightedPotential),
            _ => Err(Error::Parse(format!("unknown game class '{s}'"))),
        }
    }
}

/// A random weighted potential game together with its potential.
#[derive(Debug, Clone)]
pub struct WeightedPotentialGame {
    pub game: Game,
    pub weights: [f64; 2],
    /// Row-major potential table.
    pub potential: Vec<f64>,
}

/// Random game of the given class with payoffs drawn from `[-1, 1]`.
pub fn generate(class: GameClass, rows: usize, cols: usize, seed: u64) -> Result<Game> {
    match class {
        GameClass::WeightedPotential => Ok(generate_weighted_potential(rows, cols, seed)?.game),
        _ => {
            check_dims(rows, cols)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u1: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let u2 = match class {
                GameClass::ZeroSum => u1.iter().map(|v| -v).collect(),
                _ => u1.clone(),
            };
            Game::new(rows, cols, u1, u2)
        }
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows > 12 || cols > 12 {
        return Err(Error::InvalidParameter(format!(
            "generated games need 1..=12 actions per player, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// `u_i(a) = w_i P(a) + d_i(a_{-i})` with positive weights and dummy terms.
pub fn generate_weighted_potential(rows: usize, cols: usize, seed: u64) -> Result<WeightedPotentialGame> {
    check_dims(rows, cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let potential: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let weights = [rng.gen_range(0.25..=2.0), rng.gen_range(0.25..=2.0)];
    let d1: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let d2: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut u1 = Vec::with_capacity(rows * cols);
    let mut u2 = Vec::with_capacity(rows * cols);
    for a in 0..rows {
        for b in 0..cols {
            let p = potential[a * cols + b];
            u1.push(weights[0] * p + d1[b]);
            u2.push(weights[1] * p + d2[a]);
        }
    }
    Ok(WeightedPotentialGame {
        game: Game::new(rows, cols, u1, u2)?,
        weights,
        potential,
    })
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

/// Resolves a catalog reference such as `fig3ii:0.25` or
/// `generate:zero_sum:3x4:7`.
pub fn resolve(reference: &str) -> Result<Game> {
    let parts: Vec<&str> = reference.split(':').collect();
    match parts.as_slice() {
        ["generate", class, dims, seed] => {
            let class: GameClass = class.parse()?;
            let (rows, cols) = match dims.split_once('x') {
                Some((r, c)) => (parse_usize(r)?, parse_usize(c)?),
                None => {
                    let n = parse_usize(dims)?;
                    (n, n)
                }
            };
            let seed = seed
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad seed '{seed}'")))?;
            generate(class, rows, cols, seed)
        }
        [name, rest @ ..] => {
            let params = rest.iter().map(|p| parse_f64(p)).collect::<Result<Vec<_>>>()?;
            build(name, &params)
        }
        [] => Err(Error::UnknownGame(reference.to_string())),
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("bad dimension '{s}'")))
}

/// Checks the defining identity of a weighted potential game on every
/// unilateral deviation; returns the largest violation.
pub fn weighted_potential_violation(wp: &WeightedPotentialGame) -> f64 {
    let g = &wp.game;
    let (rows, cols) = (g.rows(), g.cols());
    let pot = |a: usize, b: usize| wp.potential[a * cols + b];
    let mut worst = 0.0_f64;
    for a in 0..rows {
        for b in 0..cols {
            for a2 in 0..rows {
                let lhs = g.payoff(Player::One, a, b) - g.payoff(Player::One, a2, b);
                let rhs = wp.weights[0] * (pot(a, b) - pot(a2, b));
                worst = worst.max((lhs - rhs).abs());
            }
            for b2 in 0..cols {
                let lhs = g.payoff(Player::Two, a, b) - g.payoff(Player::Two, a, b2);
                let rhs = wp.weights[1] * (pot(a, b) - pot(a, b2));
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}
