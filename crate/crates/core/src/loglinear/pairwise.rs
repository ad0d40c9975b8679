use std::collections::{BTreeMap, HashMap};

use super::{for_each_displacement, for_each_flipped_pair, EnergyModel, Move};
use crate::error::{Error, Result};
use crate::pairwise::RegWeights;
use crate::types::{Dataset, ItemId, UserId};

/// Sparse asymmetric table of pair parameters `lambda[(y, y')]`, stored in
/// sorted key order. Missing pairs read as zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairTable {
    keys: Vec<(ItemId, ItemId)>,
    values: Vec<f64>,
    index: HashMap<(ItemId, ItemId), usize>,
}

impl PairTable {
    /// Builds a table from `(y, y', value)` entries; duplicate keys are an error.
    pub fn from_entries(entries: impl IntoIterator<Item = (ItemId, ItemId, f64)>) -> Result<Self> {
        let mut sorted = BTreeMap::new();
        for (a, b, v) in entries {
            if sorted.insert((a, b), v).is_some() {
                return Err(Error::argument(format!("pair ({a}, {b}) listed twice")));
            }
        }
        let keys: Vec<_> = sorted.keys().copied().collect();
        let values: Vec<_> = sorted.values().copied().collect();
        let index = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Ok(PairTable { keys, values, index })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, a: ItemId, b: ItemId) -> f64 {
        self.slot(a, b).map_or(0.0, |i| self.values[i])
    }

    pub fn contains(&self, a: ItemId, b: ItemId) -> bool {
        self.index.contains_key(&(a, b))
    }

    fn slot(&self, a: ItemId, b: ItemId) -> Option<usize> {
        self.index.get(&(a, b)).copied()
    }

    /// Entries in ascending key order.
    pub fn entries(&self) -> impl Iterator<Item = (ItemId, ItemId, f64)> + '_ {
        self.keys.iter().zip(&self.values).map(|(&(a, b), &v)| (a, b, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Pairwise model: `E(pi) = -sum_i gamma[pi_i] g(i, n) - sum_{i<j} lambda[pi_i, pi_j]`
/// with `g(i, n) = 1 - i/n` for 1-based `i`. There are no user-specific
/// parameters; the list length and order carry the user.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    pub gamma: Vec<f64>,
    pub lambda: PairTable,
    /// Co-occurrence threshold the pair table was built with.
    pub tau: usize,
}

impl PairwiseModel {
    /// Position weight for 0-based position `pos` in an `n`-item list.
    pub fn position_weight(pos: usize, n: usize) -> f64 {
        1.0 - (pos + 1) as f64 / n as f64
    }

    /// Swap delta written out term by term, with items substituted for the
    /// positions they occupy (`a = pi_l`, `b = pi_m`, `c` between them):
    ///
    /// `(gamma_a - gamma_b)(g_l - g_m) + lambda_ab - lambda_ba
    ///  + sum_c (lambda_ac + lambda_cb - lambda_ca - lambda_bc)`
    pub fn swap_delta_closed_form(&self, items: &[ItemId], l: usize, m: usize) -> f64 {
        let n = items.len();
        let (a, b) = (items[l], items[m]);
        let lam = |x, y| self.lambda.get(x, y);
        let mut d = (self.gamma[a.index()] - self.gamma[b.index()])
            * (Self::position_weight(l, n) - Self::position_weight(m, n))
            + lam(a, b)
            - lam(b, a);
        for &c in &items[l + 1..m] {
            d += lam(a, c) + lam(c, b) - lam(c, a) - lam(b, c);
        }
        d
    }
}

/// Allocates `lambda[y, y']` and `lambda[y', y]` (both zero) for every item
/// pair ranked together by at least `tau` users, and a zero `gamma` per item.
pub fn build_pairwise_params(data: &Dataset, tau: usize) -> Result<PairwiseModel> {
    if tau == 0 {
        return Err(Error::argument("co-occurrence threshold must be at least 1"));
    }
    let mut counts: BTreeMap<(ItemId, ItemId), usize> = BTreeMap::new();
    for list in data.lists() {
        for (i, &a) in list.items.iter().enumerate() {
            for &b in &list.items[i + 1..] {
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
    }
    let entries = counts
        .into_iter()
        .filter(|&(_, c)| c >= tau)
        .flat_map(|((a, b), _)| [(a, b, 0.0), (b, a, 0.0)]);
    Ok(PairwiseModel {
        gamma: vec![0.0; data.num_items()],
        lambda: PairTable::from_entries(entries)?,
        tau,
    })
}

impl EnergyModel for PairwiseModel {
    fn num_items(&self) -> usize {
        self.gamma.len()
    }

    fn check_user(&self, _user: UserId) -> Result<()> {
        Ok(())
    }

    fn energy(&self, _user: UserId, items: &[ItemId]) -> f64 {
        let n = items.len();
        let mut e = 0.0;
        for (i, &a) in items.iter().enumerate() {
            e -= self.gamma[a.index()] * Self::position_weight(i, n);
            if !self.lambda.is_empty() {
                for &b in &items[i + 1..] {
                    e -= self.lambda.get(a, b);
                }
            }
        }
        e
    }

    fn delta_energy(&self, _user: UserId, items: &[ItemId], mv: &Move) -> f64 {
        let n = items.len();
        let mut delta = 0.0;
        for_each_displacement(items, mv, |y, old, new| {
            delta -= self.gamma[y.index()] * (Self::position_weight(new, n) - Self::position_weight(old, n));
        });
        if !self.lambda.is_empty() {
            for_each_flipped_pair(items, mv, |a, b| {
                delta -= self.lambda.get(b, a) - self.lambda.get(a, b);
            });
        }
        delta
    }

    fn num_params(&self) -> usize {
        self.gamma.len() + self.lambda.len()
    }

    fn params(&self) -> Vec<f64> {
        self.gamma.iter().chain(self.lambda.values()).copied().collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        let m = self.gamma.len();
        self.gamma.copy_from_slice(&params[..m]);
        self.lambda.values_mut().copy_from_slice(&params[m..]);
    }

    fn accumulate_energy_grad(&self, _user: UserId, items: &[ItemId], coeff: f64, grad: &mut [f64]) {
        let n = items.len();
        let m = self.gamma.len();
        for (i, &a) in items.iter().enumerate() {
            grad[a.index()] -= coeff * Self::position_weight(i, n);
            for &b in &items[i + 1..] {
                if let Some(s) = self.lambda.slot(a, b) {
                    grad[m + s] -= coeff;
                }
            }
        }
    }

    fn accumulate_delta_grad(&self, _user: UserId, items: &[ItemId], mv: &Move, coeff: f64, grad: &mut [f64]) {
        let n = items.len();
        let m = self.gamma.len();
        for_each_displacement(items, mv, |y, old, new| {
            grad[y.index()] -= coeff * (Self::position_weight(new, n) - Self::position_weight(old, n));
        });
        for_each_flipped_pair(items, mv, |a, b| {
            if let Some(s) = self.lambda.slot(b, a) {
                grad[m + s] -= coeff;
            }
            if let Some(s) = self.lambda.slot(a, b) {
                grad[m + s] += coeff;
            }
        });
    }

    /// `alpha * |gamma|^2 + beta * |lambda|^2`.
    fn penalty(&self, reg: RegWeights) -> f64 {
        reg.alpha * self.gamma.iter().map(|g| g * g).sum::<f64>()
            + reg.beta * self.lambda.values().iter().map(|l| l * l).sum::<f64>()
    }

    fn accumulate_penalty_grad(&self, reg: RegWeights, coeff: f64, grad: &mut [f64]) {
        let m = self.gamma.len();
        for (g, v) in grad.iter_mut().zip(&self.gamma) {
            *g += coeff * 2.0 * reg.alpha * v;
        }
        for (g, v) in grad[m..].iter_mut().zip(self.lambda.values()) {
            *g += coeff * 2.0 * reg.beta * v;
        }
    }
}
