use std::fmt;
use std::str::FromStr;

use super::{check_list, metropolis_step, ChainState, EnergyModel, Move, ProposalMix};
use crate::error::{Error, Result};
use crate::eval::next_permutation;
use crate::optim::{ascent_step, Schedule, Step, Trained};
use crate::pairwise::RegWeights;
use crate::rng::substream;
use crate::scores::{log_sum_exp, sigmoid, softplus};
use crate::types::{Dataset, ItemId, UserId};

/// Largest sublist width whose orderings are enumerated.
pub const MAX_SUBLIST_WIDTH: usize = 6;

/// Family of local perturbations a pseudo-likelihood conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Each item against every position it could be moved to.
    Relocation,
    /// Each pair of positions against its swapped version.
    Swapping,
    /// Each window of the given width against all of its orderings.
    Sublist(usize),
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::Relocation => "relocation",
            Structure::Swapping => "swapping",
            Structure::Sublist(_) => "sublist",
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Structure::Sublist(width) = *self {
            if !(2..=MAX_SUBLIST_WIDTH).contains(&width) {
                return Err(Error::argument(format!(
                    "sublist width {width} outside 2..={MAX_SUBLIST_WIDTH}"
                )));
            }
            if width > n {
                return Err(Error::argument(format!("sublist width {width} exceeds list length {n}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Sublist(w) => write!(f, "sublist({w})"),
            s => f.write_str(s.name()),
        }
    }
}

/// Parses `relocation`, `swapping`, `sublist` (width 3) or `sublist(W)`.
impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relocation" => Ok(Structure::Relocation),
            "swapping" => Ok(Structure::Swapping),
            "sublist" => Ok(Structure::Sublist(3)),
            _ => s
                .strip_prefix("sublist(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|w| w.parse().ok())
                .map(Structure::Sublist)
                .ok_or_else(|| Error::argument(format!("unknown structure '{s}'"))),
        }
    }
}

/// Energies relative to `items` of every placement of `items[i]`, with the
/// other items kept in order: entry `j` is `E(item i at j) - E(items)`.
///
/// Computed in one pass: relocate the item to the front, then walk it back
/// one adjacent swap at a time, accumulating swap deltas.
pub fn relocation_energies<M: EnergyModel + ?Sized>(
    model: &M,
    user: UserId,
    items: &[ItemId],
    i: usize,
) -> Result<Vec<f64>> {
    check_list(model, user, items)?;
    if i >= items.len() {
        return Err(Error::Index {
            what: "position",
            index: i,
            size: items.len(),
        });
    }
    Ok(relocation_sweep(model, user, items, i))
}

fn relocation_sweep<M: EnergyModel + ?Sized>(model: &M, user: UserId, items: &[ItemId], i: usize) -> Vec<f64> {
    let n = items.len();
    let mut work = items.to_vec();
    let mut e = Vec::with_capacity(n);
    if i == 0 {
        e.push(0.0);
    } else {
        let to_front = Move::Relocate { from: i, to: 0 };
        e.push(model.delta_energy(user, items, &to_front));
        to_front.apply(&mut work);
    }
    for j in 0..n - 1 {
        let step = Move::Swap { l: j, m: j + 1 };
        let d = model.delta_energy(user, &work, &step);
        e.push(e[j] + d);
        work.swap(j, j + 1);
    }
    e
}

/// Local configurations of one list under a structure: for each local law,
/// the moves reaching each alternative and the index of the identity.
fn for_each_law<M, F>(model: &M, user: UserId, items: &[ItemId], structure: Structure, mut law: F)
where
    M: EnergyModel + ?Sized,
    F: FnMut(&[f64], usize, &dyn Fn(usize) -> Option<Move>),
{
    let n = items.len();
    match structure {
        Structure::Relocation => {
            for i in 0..n {
                let e = relocation_sweep(model, user, items, i);
                let mv = move |j: usize| (j != i).then_some(Move::Relocate { from: i, to: j });
                law(&e, i, &mv);
            }
        }
        Structure::Swapping => {
            for l in 0..n {
                for m in l + 1..n {
                    let mv = Move::Swap { l, m };
                    let e = [0.0, model.delta_energy(user, items, &mv)];
                    let pick = move |j: usize| (j == 1).then_some(Move::Swap { l, m });
                    law(&e, 0, &pick);
                }
            }
        }
        Structure::Sublist(width) => {
            let mut orders = Vec::new();
            let mut order: Vec<usize> = (0..width).collect();
            loop {
                orders.push(order.clone());
                if !next_permutation(&mut order) {
                    break;
                }
            }
            for start in 0..=n - width {
                let e: Vec<f64> = orders
                    .iter()
                    .map(|o| {
                        let mv = Move::SublistPerm { start, order: o.clone() };
                        model.delta_energy(user, items, &mv)
                    })
                    .collect();
                let orders = &orders;
                let pick = move |j: usize| {
                    (j != 0).then(|| Move::SublistPerm {
                        start,
                        order: orders[j].clone(),
                    })
                };
                // the identity ordering is first lexicographically
                law(&e, 0, &pick);
            }
        }
    }
}

/// Pseudo-log-likelihood of one list, adding `d/dtheta` to `grad` when given.
fn list_pseudo<M: EnergyModel + ?Sized>(
    model: &M,
    user: UserId,
    items: &[ItemId],
    structure: Structure,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let mut total = 0.0;
    for_each_law(model, user, items, structure, |e, current, mv| {
        if structure == Structure::Swapping {
            // two-configuration law: P(current) = 1 / (1 + exp(-dE))
            let d = e[1];
            total -= softplus(-d);
            if let (Some(g), Some(m)) = (grad.as_deref_mut(), mv(1)) {
                model.accumulate_delta_grad(user, items, &m, sigmoid(-d), g);
            }
            return;
        }
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        let lse = log_sum_exp(&neg);
        total += -e[current] - lse;
        if let Some(g) = grad.as_deref_mut() {
            for (j, &ej) in e.iter().enumerate() {
                if let Some(m) = mv(j) {
                    let p = (-ej - lse).exp();
                    model.accumulate_delta_grad(user, items, &m, p, g);
                }
            }
        }
    });
    total
}

fn check_data<M: EnergyModel + ?Sized>(model: &M, data: &Dataset, structure: Structure) -> Result<()> {
    if model.num_items() != data.num_items() {
        return Err(Error::argument(format!(
            "model has {} items, data has {}",
            model.num_items(),
            data.num_items()
        )));
    }
    for list in data.lists() {
        check_list(model, list.user, &list.items)?;
        structure.check(list.len())?;
    }
    Ok(())
}

/// `sum_u sum_c log P(pi_c | pi_not_c, u)` over the local laws of `structure`.
pub fn pseudo_likelihood<M: EnergyModel + ?Sized>(model: &M, data: &Dataset, structure: Structure) -> Result<f64> {
    check_data(model, data, structure)?;
    Ok(data
        .lists()
        .iter()
        .map(|l| list_pseudo(model, l.user, &l.items, structure, None))
        .sum())
}

/// Gradient of [`pseudo_likelihood`] with respect to the flat parameters.
pub fn pseudo_likelihood_gradient<M: EnergyModel + ?Sized>(
    model: &M,
    data: &Dataset,
    structure: Structure,
) -> Result<Vec<f64>> {
    check_data(model, data, structure)?;
    let mut grad = vec![0.0; model.num_params()];
    for l in data.lists() {
        list_pseudo(model, l.user, &l.items, structure, Some(&mut grad));
    }
    Ok(grad)
}

/// One local conditional law: probabilities over a local configuration
/// set, and which configuration is the observed one.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLaw {
    pub current: usize,
    pub probs: Vec<f64>,
}

/// Every local law of one list under `structure`, in the order the
/// pseudo-likelihood visits them: relocation by item position; swapping by
/// pair `(l, m)` with the observed order first; sublist by window start
/// with the orderings in lexicographic order (identity first).
pub fn local_laws<M: EnergyModel + ?Sized>(
    model: &M,
    user: UserId,
    items: &[ItemId],
    structure: Structure,
) -> Result<Vec<LocalLaw>> {
    check_list(model, user, items)?;
    structure.check(items.len())?;
    let mut laws = Vec::new();
    for_each_law(model, user, items, structure, |e, current, _| {
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        let lse = log_sum_exp(&neg);
        laws.push(LocalLaw {
            current,
            probs: neg.iter().map(|x| (x - lse).exp()).collect(),
        });
    });
    Ok(laws)
}

/// Maximizes `pseudo_likelihood - penalty` by full-batch gradient ascent
/// with backtracking. Stops early once no step size improves the objective.
pub fn pl_train<M: EnergyModel + Clone>(
    init: M,
    data: &Dataset,
    structure: Structure,
    reg: RegWeights,
    schedule: &Schedule,
) -> Result<Trained<M>> {
    check_data(&init, data, structure)?;
    let objective = |m: &M| -> f64 {
        data.lists()
            .iter()
            .map(|l| list_pseudo(m, l.user, &l.items, structure, None))
            .sum::<f64>()
            - m.penalty(reg)
    };
    let mut model = init;
    let mut scratch = model.clone();
    let mut params = model.params();
    let mut current = objective(&model);
    let mut trace = vec![current];
    for it in 0..schedule.iterations {
        let mut grad = vec![0.0; params.len()];
        for l in data.lists() {
            list_pseudo(&model, l.user, &l.items, structure, Some(&mut grad));
        }
        model.accumulate_penalty_grad(reg, -1.0, &mut grad);
        let step = ascent_step(&mut params, &grad, current, schedule, "pseudo-likelihood", it, |p| {
            scratch.set_params(p);
            objective(&scratch)
        })?;
        match step {
            Step::Accepted(v) => {
                current = v;
                model.set_params(&params);
                trace.push(current);
            }
            Step::Stalled => break,
        }
    }
    Ok(Trained { model, trace })
}

/// Contrastive-divergence settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Swap steps per chain; `None` uses the list length.
    pub chain_len: Option<usize>,
    pub reg: RegWeights,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            epochs: 100,
            learning_rate: 0.01,
            chain_len: None,
            reg: RegWeights::default(),
            seed: 0,
        }
    }
}

/// Contrastive divergence: every epoch, each list seeds a swap-only chain at
/// the observed order and the parameters move along
/// `dE/dtheta(chain end) - dE/dtheta(data) - d penalty/dtheta`, summed over
/// lists, scaled by the learning rate.
///
/// The chain for list `u` in epoch `e` draws from its own substream, so
/// results depend only on the seed. The trace holds, per epoch, the mean of
/// `E(chain end) - E(data)` before the update.
pub fn cd_train<M: EnergyModel + Clone>(init: M, data: &Dataset, config: &CdConfig) -> Result<Trained<M>> {
    check_data(&init, data, Structure::Swapping)?;
    let mut model = init;
    let proposal = ProposalMix::swap_only();
    let mut trace = Vec::with_capacity(config.epochs);
    let lists = data.lists();
    for epoch in 0..config.epochs {
        let mut grad = vec![0.0; model.num_params()];
        let mut gap = 0.0;
        for list in lists {
            let stream = ((epoch as u64 + 1) << 32) | u64::from(list.user.0);
            let mut rng = substream(config.seed, stream);
            let mut state = ChainState::new(&model, list.user, list.items.clone())?;
            for _ in 0..config.chain_len.unwrap_or(list.len()) {
                metropolis_step(&model, &mut state, &proposal, &mut rng);
            }
            if state.items() == list.items.as_slice() {
                continue;
            }
            gap += model.energy(list.user, state.items()) - model.energy(list.user, &list.items);
            model.accumulate_energy_grad(list.user, &list.items, -1.0, &mut grad);
            model.accumulate_energy_grad(list.user, state.items(), 1.0, &mut grad);
        }
        model.accumulate_penalty_grad(config.reg, -1.0, &mut grad);
        trace.push(if lists.is_empty() { 0.0 } else { gap / lists.len() as f64 });
        let mut params = model.params();
        for (p, g) in params.iter_mut().zip(&grad) {
            *p += config.learning_rate * g;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::divergence("CD", epoch));
        }
        model.set_params(&params);
    }
    Ok(Trained { model, trace })
}
