use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::types::{check_rank, Dataset, FactorPair, ItemId, RankedList, UserId};

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub rank: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of the true scores `s = W H`.
    pub scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        check_rank(self.rank, self.num_users, self.num_items)?;
        if self.min_len == 0 || self.min_len > self.max_len || self.max_len > self.num_items {
            return Err(Error::argument(format!(
                "list lengths [{}, {}] must satisfy 1 <= min <= max <= items ({})",
                self.min_len, self.max_len, self.num_items
            )));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::argument("score scale must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Draws `n` of the scored indices without replacement, each stage choosing
/// among the remaining indices with probability proportional to `exp(s)`.
///
/// Each stage uses one uniform draw and inverts the cumulative weights in
/// index order.
pub fn sample_pl_permutation<R: Rng + ?Sized>(scores: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > scores.len() {
        return Err(Error::argument(format!(
            "cannot draw {n} items from a pool of {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::argument("scores must be finite"));
    }
    let mut pool: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let top = pool.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = pool.iter().map(|&i| (scores[i] - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = pool.len() - 1;
        for (slot, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                pick = slot;
                break;
            }
        }
        out.push(pool.remove(pick));
    }
    Ok(out)
}

/// Draws true factors and one list per user.
///
/// Factor entries are i.i.d. normal with variance `scale / sqrt(K)`, so each
/// true score has standard deviation `scale`. Each user gets a length
/// uniform in `[min_len, max_len]`, a uniformly random item subset of that
/// size, and a full stage-wise ordering of the subset. All randomness comes
/// from one stream seeded by `spec.seed`, consumed in that order.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, FactorPair)> {
    spec.validate()?;
    let mut rng = rng::root(spec.seed);
    let sigma = (spec.scale / (spec.rank as f64).sqrt()).sqrt();
    let mut normal = |_| sigma * rng.sample::<f64, _>(StandardNormal);
    let w = Array2::from_shape_fn((spec.num_users, spec.rank), &mut normal);
    let h = Array2::from_shape_fn((spec.rank, spec.num_items), &mut normal);
    let truth = FactorPair::new(w, h)?;
    let mut lists = Vec::with_capacity(spec.num_users);
    for u in 0..spec.num_users {
        let user = UserId(u as u32);
        let n = rng.random_range(spec.min_len..=spec.max_len);
        let mut subset = index::sample(&mut rng, spec.num_items, n).into_vec();
        subset.sort_unstable();
        let scores: Vec<f64> = subset.iter().map(|&y| truth.score(user, ItemId(y as u32))).collect();
        let order = sample_pl_permutation(&scores, n, &mut rng)?;
        lists.push(RankedList {
            user,
            items: order.into_iter().map(|i| ItemId(subset[i] as u32)).collect(),
        });
    }
    Ok((Dataset::new(spec.num_users, spec.num_items, lists)?, truth))
}
