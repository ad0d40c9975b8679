//! Ranking models over permutations: a pairwise-preference baseline,
//! factored and latent-community Plackett-Luce models, and log-linear
//! energy models with MCMC learning, plus data formats and an exact
//! evaluation oracle.

pub mod data;
pub mod error;
pub mod eval;
pub mod factored_pl;
pub mod insertion;
pub mod latent_pl;
pub mod loglinear;
pub mod model;
pub mod optim;
pub mod pairwise;
pub mod rng;
pub mod scores;
pub mod types;

#[doc(hidden)]
pub mod cli;

pub use error::{Error, Result, Violation};
pub use model::{Model, ModelKind};
pub use types::{Dataset, FactorPair, ItemId, RankedList, UserId};
