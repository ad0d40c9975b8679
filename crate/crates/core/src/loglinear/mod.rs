//! Log-linear permutation models.
//!
//! `P(pi | u) = exp(-E(pi, u)) / Z(u)`, where the energy is a sum of
//! position-wise and pairwise component energies. `Z(u)` sums over all
//! `n_u!` orderings, so learning and inference go through local moves:
//! Metropolis-Hastings sampling, contrastive divergence, pseudo-likelihood,
//! and single-pass insertion for prediction.

mod learn;
mod mcmc;
mod moves;
mod pairwise;
mod positional;
mod predict;

pub use learn::{
    cd_train, local_laws, pl_train, pseudo_likelihood, pseudo_likelihood_gradient, relocation_energies,
    CdConfig, LocalLaw, Structure,
};
pub use mcmc::{acceptance_probability, metropolis_step, run_chain, ChainState, REVALIDATE_EVERY};
pub use moves::{Move, ProposalMix};
pub use pairwise::{build_pairwise_params, PairTable, PairwiseModel};
pub use positional::PositionalModel;
pub use predict::{predict_insert, rank_by_insertion, EnergyInsertion};

pub(crate) use moves::{for_each_displacement, for_each_flipped_pair};

use crate::error::Result;
use crate::pairwise::RegWeights;
use crate::types::{check_distinct, check_items, ItemId, UserId};

/// A log-linear parameterisation: energies, move deltas, and gradients with
/// respect to a flat parameter vector.
pub trait EnergyModel {
    fn num_items(&self) -> usize;

    /// Errors when the model has no parameters for `user`.
    fn check_user(&self, user: UserId) -> Result<()>;

    /// Total energy of `items` in the given order. Unchecked.
    fn energy(&self, user: UserId, items: &[ItemId]) -> f64;

    /// `E(apply(mv, items)) - E(items)`, touching only what the move
    /// changes. Unchecked: `mv` must be valid for `items`.
    fn delta_energy(&self, user: UserId, items: &[ItemId], mv: &Move) -> f64;

    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);

    /// `grad += coeff * dE(items)/dtheta`.
    fn accumulate_energy_grad(&self, user: UserId, items: &[ItemId], coeff: f64, grad: &mut [f64]);

    /// `grad += coeff * d[E(apply(mv, items)) - E(items)]/dtheta`.
    fn accumulate_delta_grad(&self, user: UserId, items: &[ItemId], mv: &Move, coeff: f64, grad: &mut [f64]);

    /// L2 penalty on the parameters.
    fn penalty(&self, reg: RegWeights) -> f64;

    /// `grad += coeff * d penalty / dtheta`.
    fn accumulate_penalty_grad(&self, reg: RegWeights, coeff: f64, grad: &mut [f64]);
}

/// Checked total energy.
pub fn energy<M: EnergyModel + ?Sized>(model: &M, user: UserId, items: &[ItemId]) -> Result<f64> {
    check_list(model, user, items)?;
    Ok(model.energy(user, items))
}

/// Checked energy change of a move.
pub fn delta_energy<M: EnergyModel + ?Sized>(model: &M, user: UserId, items: &[ItemId], mv: &Move) -> Result<f64> {
    check_list(model, user, items)?;
    mv.validate(items.len())?;
    Ok(model.delta_energy(user, items, mv))
}

pub(crate) fn check_list<M: EnergyModel + ?Sized>(model: &M, user: UserId, items: &[ItemId]) -> Result<()> {
    model.check_user(user)?;
    check_items(items, model.num_items())?;
    check_distinct(items, model.num_items())
}
