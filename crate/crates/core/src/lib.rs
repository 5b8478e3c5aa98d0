//! Simulation and analysis of no-regret learning dynamics and fictitious
//! play in finite two-player games.

pub mod catalog;
pub mod continuous;
pub mod discrete;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod game;
pub mod gamefile;
pub mod lp;
pub mod perturbation;
pub mod rng;
pub mod strategy;
pub mod verify;

pub use error::{Error, Result};
pub use game::{
    marginals, product_distribution, update_average, Game, HannanClass, HannanStatus, JointDistribution,
    MixedAction, MixedProfile, Player, RegretVector,
};
