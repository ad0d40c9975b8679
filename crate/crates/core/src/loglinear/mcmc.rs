use rand::Rng;

use super::{check_list, EnergyModel, ProposalMix};
use crate::error::Result;
use crate::types::{ItemId, UserId};

/// Accepted moves between full recomputations of the cached energy.
pub const REVALIDATE_EVERY: u64 = 10_000;

/// `min(1, exp(-delta))`.
pub fn acceptance_probability(delta: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta).exp()
    }
}

/// A random-walk state over orderings of one user's items.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub user: UserId,
    items: Vec<ItemId>,
    energy: f64,
    accepted: u64,
    proposed: u64,
}

impl ChainState {
    pub fn new<M: EnergyModel + ?Sized>(model: &M, user: UserId, items: Vec<ItemId>) -> Result<Self> {
        check_list(model, user, &items)?;
        let energy = model.energy(user, &items);
        Ok(ChainState {
            user,
            items,
            energy,
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    /// Accepted fraction of proposals so far; 0 before any proposal.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One Metropolis-Hastings step. Returns whether the proposed move was
/// accepted. Lists shorter than two items never move and count no proposal.
///
/// A uniform draw is consumed on every proposal, accepted or not, so the
/// stream position depends only on the number of proposals.
pub fn metropolis_step<M, R>(model: &M, state: &mut ChainState, proposal: &ProposalMix, rng: &mut R) -> bool
where
    M: EnergyModel + ?Sized,
    R: Rng + ?Sized,
{
    let Some(mv) = proposal.propose(state.items.len(), rng) else {
        return false;
    };
    state.proposed += 1;
    let delta = model.delta_energy(state.user, &state.items, &mv);
    let u: f64 = rng.random();
    if u >= acceptance_probability(delta) {
        return false;
    }
    mv.apply(&mut state.items);
    state.energy += delta;
    state.accepted += 1;
    if state.accepted.is_multiple_of(REVALIDATE_EVERY) {
        state.energy = model.energy(state.user, &state.items);
    }
    true
}

/// Runs `steps` Metropolis steps, calling `visit` on the state after each.
pub fn run_chain<M, R>(
    model: &M,
    state: &mut ChainState,
    proposal: &ProposalMix,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(&ChainState),
) where
    M: EnergyModel + ?Sized,
    R: Rng + ?Sized,
{
    for _ in 0..steps {
        metropolis_step(model, state, proposal, rng);
        visit(state);
    }
}
