use ndarray::ArrayView2;

use super::{for_each_displacement, EnergyModel, Move};
use crate::error::Result;
use crate::factored_pl::sort_by_score;
use crate::pairwise::RegWeights;
use crate::scores::user_scores;
use crate::types::{FactorPair, ItemId, UserId};

/// Factored position-wise model: `E(pi, u) = -sum_i s[u][pi_i] * g(i, n_u)`
/// with `g(i, n) = (1 + n - 2i) / n` for 1-based `i`.
///
/// Because `g` sums to zero over a list, this equals
/// `-(1/n) sum_{i<j} (s[pi_i] - s[pi_j])`: every correctly ordered pair
/// lowers the energy by its score gap.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalModel {
    pub factors: FactorPair,
}

impl PositionalModel {
    pub fn new(factors: FactorPair) -> Self {
        PositionalModel { factors }
    }

    /// Position weight for 0-based position `pos` in an `n`-item list.
    pub fn position_weight(pos: usize, n: usize) -> f64 {
        (n as f64 - 1.0 - 2.0 * pos as f64) / n as f64
    }

    /// Constant-time swap delta `(s_l - s_m)(g_l - g_m)`.
    pub fn swap_delta(&self, user: UserId, items: &[ItemId], l: usize, m: usize) -> f64 {
        let n = items.len();
        let (sl, sm) = (self.factors.score(user, items[l]), self.factors.score(user, items[m]));
        (sl - sm) * (Self::position_weight(l, n) - Self::position_weight(m, n))
    }

    /// Unseen items ranked by score, ties by item id.
    pub fn predict_sort(&self, user: UserId, candidates: &[ItemId]) -> Result<Vec<ItemId>> {
        let s = user_scores(&self.factors, user, candidates)?;
        Ok(sort_by_score(candidates, &s))
    }

    fn w_len(&self) -> usize {
        self.factors.w.len()
    }

    /// `grad += sum_y c_y * d s[u][y] / dtheta`.
    fn accumulate_score_coeffs(&self, user: UserId, coeffs: &[(ItemId, f64)], grad: &mut [f64]) {
        let k = self.factors.rank();
        let m = self.factors.num_items();
        let u = user.index();
        let (w, h) = (&self.factors.w, &self.factors.h);
        let off = self.w_len();
        for &(y, c) in coeffs {
            let y = y.index();
            for kk in 0..k {
                grad[u * k + kk] += c * h[[kk, y]];
                grad[off + kk * m + y] += c * w[[u, kk]];
            }
        }
    }
}

impl EnergyModel for PositionalModel {
    fn num_items(&self) -> usize {
        self.factors.num_items()
    }

    fn check_user(&self, user: UserId) -> Result<()> {
        self.factors.check_user(user)
    }

    fn energy(&self, user: UserId, items: &[ItemId]) -> f64 {
        let n = items.len();
        -items
            .iter()
            .enumerate()
            .map(|(i, &y)| self.factors.score(user, y) * Self::position_weight(i, n))
            .sum::<f64>()
    }

    fn delta_energy(&self, user: UserId, items: &[ItemId], mv: &Move) -> f64 {
        if let Move::Swap { l, m } = *mv {
            return self.swap_delta(user, items, l, m);
        }
        let n = items.len();
        let mut delta = 0.0;
        for_each_displacement(items, mv, |y, old, new| {
            delta -= self.factors.score(user, y) * (Self::position_weight(new, n) - Self::position_weight(old, n));
        });
        delta
    }

    fn num_params(&self) -> usize {
        self.factors.w.len() + self.factors.h.len()
    }

    fn params(&self) -> Vec<f64> {
        self.factors.w.iter().chain(self.factors.h.iter()).copied().collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        let split = self.w_len();
        let (n, k, m) = (self.factors.num_users(), self.factors.rank(), self.factors.num_items());
        self.factors.w.assign(&ArrayView2::from_shape((n, k), &params[..split]).unwrap());
        self.factors.h.assign(&ArrayView2::from_shape((k, m), &params[split..]).unwrap());
    }

    fn accumulate_energy_grad(&self, user: UserId, items: &[ItemId], coeff: f64, grad: &mut [f64]) {
        let n = items.len();
        let coeffs: Vec<(ItemId, f64)> = items
            .iter()
            .enumerate()
            .map(|(i, &y)| (y, -coeff * Self::position_weight(i, n)))
            .collect();
        self.accumulate_score_coeffs(user, &coeffs, grad);
    }

    fn accumulate_delta_grad(&self, user: UserId, items: &[ItemId], mv: &Move, coeff: f64, grad: &mut [f64]) {
        let n = items.len();
        let mut coeffs = Vec::new();
        for_each_displacement(items, mv, |y, old, new| {
            coeffs.push((y, -coeff * (Self::position_weight(new, n) - Self::position_weight(old, n))));
        });
        self.accumulate_score_coeffs(user, &coeffs, grad);
    }

    fn penalty(&self, reg: RegWeights) -> f64 {
        reg.penalty(self.factors.w.view(), self.factors.h.view())
    }

    fn accumulate_penalty_grad(&self, reg: RegWeights, coeff: f64, grad: &mut [f64]) {
        let off = self.w_len();
        for (g, w) in grad.iter_mut().zip(self.factors.w.iter()) {
            *g += coeff * 2.0 * reg.alpha * w;
        }
        for (g, h) in grad[off..].iter_mut().zip(self.factors.h.iter()) {
            *g += coeff * 2.0 * reg.beta * h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::items;
    use ndarray::array;

    #[test]
    fn two_item_energy() {
        let (a, b) = (1.7, -0.4);
        let m = PositionalModel::new(FactorPair::new(array![[1.0], [0.0]], array![[a, b]]).unwrap());
        let e = m.energy(UserId(0), &items(&[0, 1]));
        assert!((e + (a - b) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn weights_decrease_and_sum_to_zero() {
        for n in 1..10 {
            let g: Vec<f64> = (0..n).map(|i| PositionalModel::position_weight(i, n)).collect();
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
            assert!(g.windows(2).all(|w| w[0] > w[1]));
        }
    }
}
