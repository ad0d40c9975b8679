//! Exact distributions over small permutation spaces and ranking metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::scores::log_sum_exp;
use crate::types::{check_distinct, Dataset, ItemId, RankedList, UserId};

/// Largest list length the exact oracle enumerates (8! = 40320 orderings).
pub const MAX_EXACT_ITEMS: usize = 8;

/// Rearranges `v` into its lexicographic successor. Returns `false`, leaving
/// `v` sorted ascending, when `v` was the last permutation.
pub(crate) fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every ordering of `items`, in lexicographic order of item ids.
pub fn enumerate_orderings(items: &[ItemId]) -> Result<Vec<Vec<ItemId>>> {
    if items.len() > MAX_EXACT_ITEMS {
        return Err(Error::argument(format!(
            "refusing to enumerate {}! orderings (limit {MAX_EXACT_ITEMS} items)",
            items.len()
        )));
    }
    let mut current = items.to_vec();
    current.sort();
    if current.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::argument("items to enumerate must be distinct"));
    }
    let mut out = vec![current.clone()];
    while next_permutation(&mut current) {
        out.push(current.clone());
    }
    Ok(out)
}

/// Probability of every ordering of an item set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    orderings: Vec<Vec<ItemId>>,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn orderings(&self) -> &[Vec<ItemId>] {
        &self.orderings
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Index of `ordering` in the lexicographic table.
    pub fn index_of(&self, ordering: &[ItemId]) -> Option<usize> {
        self.orderings.binary_search_by(|o| o.as_slice().cmp(ordering)).ok()
    }

    pub fn prob(&self, ordering: &[ItemId]) -> Option<f64> {
        self.index_of(ordering).map(|i| self.probs[i])
    }
}

/// Exact distribution of a model over the orderings of `items` for `user`.
///
/// Log-linear kinds are normalized by enumerating the partition function;
/// Plackett-Luce kinds use their own product formula with no
/// renormalization, so the total checks that formula. The pairwise baseline
/// defines no distribution and is rejected.
pub fn exact_distribution(model: &Model, user: UserId, items: &[ItemId]) -> Result<ExactDistribution> {
    check_distinct(items, model.num_items())?;
    model.check_user(user)?;
    let orderings = enumerate_orderings(items)?;
    let probs = if let Some(energy) = model.as_energy() {
        let neg: Vec<f64> = orderings.iter().map(|o| -energy.energy(user, o)).collect();
        let log_z = log_sum_exp(&neg);
        neg.iter().map(|x| (x - log_z).exp()).collect()
    } else {
        orderings
            .iter()
            .map(|o| {
                let list = RankedList {
                    user,
                    items: o.clone(),
                };
                match model.log_likelihood(&list) {
                    Some(ll) => ll.map(f64::exp),
                    None => Err(Error::argument(format!(
                        "{} models define no distribution over orderings",
                        model.kind()
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ExactDistribution { orderings, probs })
}

/// `(concordant - discordant) / C(n, 2)` between two orderings of one set.
pub fn kendall_tau(a: &[ItemId], b: &[ItemId]) -> Result<f64> {
    let n = a.len();
    if n < 2 {
        return Err(Error::argument("Kendall tau needs at least two items"));
    }
    let pos_b: BTreeMap<ItemId, usize> = b.iter().enumerate().map(|(i, &y)| (y, i)).collect();
    if b.len() != n || pos_b.len() != n {
        return Err(Error::argument("orderings are not over the same item set"));
    }
    let ranks = a
        .iter()
        .map(|y| pos_b.get(y).copied())
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| Error::argument("orderings are not over the same item set"))?;
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            score += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

/// Relevance of each predicted item: `n_held - p` for the item at 1-based
/// position `p` of the held-out order, 0 for items not held out.
pub fn held_out_relevance(predicted: &[ItemId], held_out: &[ItemId]) -> Vec<f64> {
    let n = held_out.len();
    predicted
        .iter()
        .map(|y| {
            held_out
                .iter()
                .position(|h| h == y)
                .map_or(0.0, |p| (n - (p + 1)) as f64)
        })
        .collect()
}

/// NDCG@k with linear gains and `1 / log2(1 + position)` discounts.
/// `relevance[i]` belongs to `predicted[i]`. An all-zero ideal DCG scores 1.
pub fn ndcg_at_k(relevance: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::argument("NDCG cutoff k must be at least 1"));
    }
    let dcg = |rel: &[f64]| -> f64 {
        rel.iter()
            .take(k)
            .enumerate()
            .map(|(i, r)| r / ((i + 2) as f64).log2())
            .sum()
    };
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal);
    if idcg == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg(relevance) / idcg)
}

/// Half the L1 distance between empirical frequencies and an exact
/// distribution. Every counted ordering must be in the exact support.
pub fn tv_distance(counts: &BTreeMap<Vec<ItemId>, u64>, exact: &ExactDistribution) -> Result<f64> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::argument("no samples to compare"));
    }
    let mut empirical = vec![0.0; exact.probs.len()];
    for (ordering, &c) in counts {
        let i = exact
            .index_of(ordering)
            .ok_or_else(|| Error::argument(format!("sampled ordering {ordering:?} outside the exact support")))?;
        empirical[i] += c as f64 / total as f64;
    }
    Ok(0.5 * empirical.iter().zip(&exact.probs).map(|(e, p)| (e - p).abs()).sum::<f64>())
}

/// Metrics for one evaluated user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserEval {
    pub user: UserId,
    pub held_out: usize,
    pub kendall_tau: f64,
    pub ndcg: f64,
    pub log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ndcg_k: usize,
    pub users: Vec<UserEval>,
    /// Users whose held-out tail had fewer than two items.
    pub skipped: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    pub fn mean_tau(&self) -> Option<f64> {
        mean(self.users.iter().map(|u| u.kendall_tau))
    }

    pub fn mean_ndcg(&self) -> Option<f64> {
        mean(self.users.iter().map(|u| u.ndcg))
    }

    pub fn mean_log_likelihood(&self) -> Option<f64> {
        if self.users.iter().any(|u| u.log_likelihood.is_none()) {
            return None;
        }
        mean(self.users.iter().filter_map(|u| u.log_likelihood))
    }

    /// `key<TAB>value` summary lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "users_evaluated\t{}", self.users.len());
        let _ = writeln!(out, "users_skipped\t{}", self.skipped);
        let _ = writeln!(out, "mean_kendall_tau\t{}", show(self.mean_tau()));
        let _ = writeln!(out, "mean_ndcg@{}\t{}", self.ndcg_k, show(self.mean_ndcg()));
        let _ = writeln!(out, "mean_heldout_log_likelihood\t{}", show(self.mean_log_likelihood()));
        out
    }

    /// One row per user plus a final `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("user,held_out,kendall_tau,ndcg@{},log_likelihood\n", self.ndcg_k);
        for u in &self.users {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{}",
                u.user,
                u.held_out,
                u.kendall_tau,
                u.ndcg,
                show(u.log_likelihood)
            );
        }
        let _ = writeln!(
            out,
            "mean,,{},{},{}",
            show(self.mean_tau()),
            show(self.mean_ndcg()),
            show(self.mean_log_likelihood())
        );
        out
    }
}

/// Holds out the last `ceil(split * n_u)` items of every list, predicts
/// their order given the rest of the list, and scores the prediction.
pub fn evaluate(model: &Model, data: &Dataset, split: f64, ndcg_k: usize) -> Result<EvalReport> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::argument(format!("split {split} must lie strictly between 0 and 1")));
    }
    if ndcg_k == 0 {
        return Err(Error::argument("NDCG cutoff k must be at least 1"));
    }
    let (heads, tails) = data.split_tails(split)?;
    let mut users = Vec::new();
    let mut skipped = 0;
    for (user, tail) in tails {
        if tail.len() < 2 {
            skipped += 1;
            continue;
        }
        let seen = heads.list_for(user).map_or(&[][..], |l| l.items.as_slice());
        let predicted = model.predict(user, seen, &tail)?;
        let relevance = held_out_relevance(&predicted, &tail);
        let list = RankedList {
            user,
            items: tail.clone(),
        };
        users.push(UserEval {
            user,
            held_out: tail.len(),
            kendall_tau: kendall_tau(&predicted, &tail)?,
            ndcg: ndcg_at_k(&relevance, ndcg_k)?,
            log_likelihood: model.log_likelihood(&list).transpose()?,
        });
    }
    Ok(EvalReport {
        ndcg_k,
        users,
        skipped,
    })
}
