//! Latent-community Plackett-Luce.
//!
//! Each stage of a user's list is chosen by a mixture of community
//! Plackett-Luce choices:
//!
//! ```text
//! P(pi | u) = prod_i sum_z P(z|u) * exp(s[z][pi_i]) / sum_{j >= i} exp(s[z][pi_j])
//! ```
//!
//! The community mixes inside the product, so responsibilities are kept per
//! (user, position). Suffix denominators are computed once per community,
//! which makes the likelihood `O(n K)`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::insertion::{first_argmax, rank_placements, Placement};
use crate::optim::{ascent_step, Schedule, Step, Trained};
use crate::rng;
use crate::scores::{log_add, log_sum_exp, suffix_lse};
use crate::types::{check_distinct, check_items, check_rank, Dataset, ItemId, RankedList, UserId};

/// Mixture weights below this are raised to it before renormalizing.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    /// users x K, rows are P(z | u)
    pub mixture: Array2<f64>,
    /// K x items, community scores s[z][y]
    pub scores: Array2<f64>,
}

impl MixtureModel {
    pub fn new(mixture: Array2<f64>, scores: Array2<f64>) -> Result<Self> {
        let m = MixtureModel { mixture, scores };
        m.validate()?;
        Ok(m)
    }

    /// Rows drawn from a symmetric Dirichlet(1) and scores uniform in
    /// `[-0.01, 0.01]`.
    pub fn random<R: Rng + ?Sized>(num_users: usize, num_items: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("need at least one community"));
        }
        let mut mixture = Array2::from_shape_fn((num_users, k), |_| {
            let e: f64 = Exp1.sample(rng);
            e.max(WEIGHT_FLOOR)
        });
        for mut row in mixture.rows_mut() {
            let total = row.sum();
            row.mapv_inplace(|p| p / total);
        }
        let scores = Array2::from_shape_fn((k, num_items), |_| rng.random_range(-0.01..=0.01));
        Self::new(mixture, scores)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mixture.ncols() != self.scores.nrows() || self.mixture.ncols() == 0 {
            return Err(Error::argument(format!(
                "mixture is {:?} but community scores are {:?}",
                self.mixture.dim(),
                self.scores.dim()
            )));
        }
        for (u, row) in self.mixture.rows().into_iter().enumerate() {
            if row.iter().any(|p| p.is_nan() || *p < 0.0) || (row.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::argument(format!("mixture row {u} is not a distribution")));
            }
        }
        if !self.scores.iter().all(|s| s.is_finite()) {
            return Err(Error::argument("community scores must be finite"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.mixture.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.scores.ncols()
    }

    pub fn num_communities(&self) -> usize {
        self.mixture.ncols()
    }

    fn check_user(&self, user: UserId) -> Result<()> {
        if user.index() >= self.num_users() {
            return Err(Error::Index {
                what: "user",
                index: user.index(),
                size: self.num_users(),
            });
        }
        Ok(())
    }

    fn check_list(&self, list: &RankedList) -> Result<()> {
        self.check_user(list.user)?;
        check_items(&list.items, self.num_items())?;
        check_distinct(&list.items, self.num_items())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.num_users() != self.num_users() || data.num_items() != self.num_items() {
            return Err(Error::argument("dataset and model dimensions disagree"));
        }
        Ok(())
    }

    /// `P_i(pi | z, u)` for 0-based stage `stage` and community `z`.
    pub fn stage_prob(&self, list: &RankedList, stage: usize, z: usize) -> Result<f64> {
        self.check_list(list)?;
        if stage >= list.len() || z >= self.num_communities() {
            return Err(Error::argument(format!(
                "stage {stage} / community {z} out of range for a {}-item list and K={}",
                list.len(),
                self.num_communities()
            )));
        }
        let logs = community_stage_logs(self.scores.view(), &list.items);
        Ok(logs[[stage, z]].exp())
    }

    pub fn log_likelihood(&self, list: &RankedList) -> Result<f64> {
        self.check_list(list)?;
        Ok(list_log_lik(self.mixture.view(), self.scores.view(), list))
    }

    /// `sum_u log P(pi_u | u)` over the dataset.
    pub fn incomplete_log_likelihood(&self, data: &Dataset) -> Result<f64> {
        self.check_dataset(data)?;
        Ok(data
            .lists()
            .iter()
            .map(|l| list_log_lik(self.mixture.view(), self.scores.view(), l))
            .sum())
    }
}

/// `[i, z] -> log P_i(pi | z)`, one suffix recursion per community.
fn community_stage_logs(scores: ArrayView2<'_, f64>, items: &[ItemId]) -> Array2<f64> {
    let k = scores.nrows();
    let mut out = Array2::zeros((items.len(), k));
    let mut s = vec![0.0; items.len()];
    for z in 0..k {
        for (i, y) in items.iter().enumerate() {
            s[i] = scores[[z, y.index()]];
        }
        let denom = suffix_lse(&s);
        for i in 0..items.len() {
            out[[i, z]] = s[i] - denom[i];
        }
    }
    out
}

fn log_weights(mixture: ArrayView2<'_, f64>, user: UserId) -> Vec<f64> {
    mixture.row(user.index()).iter().map(|p| p.ln()).collect()
}

fn list_log_lik(mixture: ArrayView2<'_, f64>, scores: ArrayView2<'_, f64>, list: &RankedList) -> f64 {
    let lw = log_weights(mixture, list.user);
    let logs = community_stage_logs(scores, &list.items);
    let mut buf = vec![0.0; lw.len()];
    let mut total = 0.0;
    for row in logs.rows() {
        for (b, (w, l)) in buf.iter_mut().zip(lw.iter().zip(row.iter())) {
            *b = w + l;
        }
        total += log_sum_exp(&buf);
    }
    total
}

/// Posterior community weights per (user, stage), aligned with `data.lists()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    /// One `n_u x K` table per list.
    pub per_list: Vec<Array2<f64>>,
}

/// `Q_i(z) = P(z|u) P_i(pi|z,u) / sum_z' P(z'|u) P_i(pi|z',u)`.
pub fn e_step(model: &MixtureModel, data: &Dataset) -> Result<Responsibilities> {
    model.check_dataset(data)?;
    let per_list = data
        .lists()
        .iter()
        .map(|list| {
            let lw = log_weights(model.mixture.view(), list.user);
            let mut q = community_stage_logs(model.scores.view(), &list.items);
            for mut row in q.rows_mut() {
                for (v, w) in row.iter_mut().zip(&lw) {
                    *v += w;
                }
                let lse = log_sum_exp(row.as_slice().unwrap());
                row.mapv_inplace(|v| (v - lse).exp());
            }
            q
        })
        .collect();
    Ok(Responsibilities { per_list })
}

/// Closed-form mixture update `P(z|u) = (1/n_u) sum_i Q_i(z)`, one row per
/// list in `data` order, floored at [`WEIGHT_FLOOR`] and renormalized.
pub fn m_step_mixture(resp: &Responsibilities, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    if resp.per_list.len() != data.lists().len() {
        return Err(Error::argument("responsibilities do not match the dataset"));
    }
    Ok(resp
        .per_list
        .iter()
        .map(|q| {
            let n = q.nrows() as f64;
            let mut row: Vec<f64> = q.columns().into_iter().map(|c| (c.sum() / n).max(WEIGHT_FLOOR)).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        })
        .collect())
}

/// The EM surrogate `sum_u sum_i sum_z Q_i(z) log(P(z|u) P_i(pi|z,u))`.
pub fn lower_bound(model: &MixtureModel, resp: &Responsibilities, data: &Dataset) -> Result<f64> {
    model.check_dataset(data)?;
    Ok(bound_of(model.mixture.view(), model.scores.view(), resp, data))
}

fn bound_of(
    mixture: ArrayView2<'_, f64>,
    scores: ArrayView2<'_, f64>,
    resp: &Responsibilities,
    data: &Dataset,
) -> f64 {
    let mut total = 0.0;
    for (list, q) in data.lists().iter().zip(&resp.per_list) {
        let lw = log_weights(mixture, list.user);
        let logs = community_stage_logs(scores, &list.items);
        for (qrow, lrow) in q.rows().into_iter().zip(logs.rows()) {
            for z in 0..lw.len() {
                if qrow[z] > 0.0 {
                    total += qrow[z] * (lw[z] + lrow[z]);
                }
            }
        }
    }
    total
}

/// Gradient of [`lower_bound`] with respect to the community scores:
/// `sum_i Q_i(z) [delta(y = pi_i) - softmax_{j >= i}(y)]`, summed over users.
pub fn m_step_scores_grad(model: &MixtureModel, resp: &Responsibilities, data: &Dataset) -> Result<Array2<f64>> {
    model.check_dataset(data)?;
    if resp.per_list.len() != data.lists().len() {
        return Err(Error::argument("responsibilities do not match the dataset"));
    }
    Ok(bound_gradient(model.scores.view(), resp, data))
}

fn bound_gradient(scores: ArrayView2<'_, f64>, resp: &Responsibilities, data: &Dataset) -> Array2<f64> {
    let k = scores.nrows();
    let mut grad = Array2::zeros(scores.dim());
    let mut s = Vec::new();
    for (list, q) in data.lists().iter().zip(&resp.per_list) {
        let n = list.len();
        for z in 0..k {
            s.clear();
            s.extend(list.items.iter().map(|y| scores[[z, y.index()]]));
            let denom = suffix_lse(&s);
            // log sum_{i <= j} Q_i(z) / A_i, accumulated left to right
            let mut acc = f64::NEG_INFINITY;
            for j in 0..n {
                let qz = q[[j, z]];
                if qz > 0.0 {
                    acc = log_add(acc, qz.ln() - denom[j]);
                }
                let y = list.items[j].index();
                grad[[z, y]] += qz - (s[j] + acc).exp();
            }
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub iterations: usize,
    /// Backtracking ascent steps on the community scores per M-step.
    pub inner_steps: usize,
    pub step: f64,
    pub max_halvings: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            iterations: 50,
            inner_steps: 3,
            step: 0.05,
            max_halvings: 30,
        }
    }
}

pub fn em_train(data: &Dataset, k: usize, config: &EmConfig, seed: u64) -> Result<Trained<MixtureModel>> {
    check_rank(k, data.num_users(), data.num_items())?;
    let init = MixtureModel::random(data.num_users(), data.num_items(), k, &mut rng::substream(seed, 1))?;
    em_train_from(init, data, config)
}

/// EM: E-step, closed-form mixture update, then `inner_steps` backtracking
/// ascent steps on the scores. The trace holds the incomplete
/// log-likelihood, starting at the initialization.
pub fn em_train_from(init: MixtureModel, data: &Dataset, config: &EmConfig) -> Result<Trained<MixtureModel>> {
    init.check_dataset(data)?;
    let mut model = init;
    let schedule = Schedule {
        iterations: config.inner_steps,
        step: config.step,
        max_halvings: config.max_halvings,
    };
    let mut ll = model.incomplete_log_likelihood(data)?;
    if !ll.is_finite() {
        return Err(Error::divergence("E-step", 0));
    }
    let mut trace = vec![ll];
    let (k, m) = model.scores.dim();
    for it in 0..config.iterations {
        let resp = e_step(&model, data)?;
        for (list, row) in data.lists().iter().zip(m_step_mixture(&resp, data)?) {
            for (z, p) in row.into_iter().enumerate() {
                model.mixture[[list.user.index(), z]] = p;
            }
        }
        let mixture = model.mixture.view();
        let mut bound = bound_of(mixture, model.scores.view(), &resp, data);
        for _ in 0..config.inner_steps {
            let grad = bound_gradient(model.scores.view(), &resp, data);
            let params = model.scores.as_slice_mut().expect("standard layout");
            let step = ascent_step(params, grad.as_slice().unwrap(), bound, &schedule, "M-step", it, |p| {
                bound_of(mixture, ArrayView2::from_shape((k, m), p).unwrap(), &resp, data)
            })?;
            match step {
                Step::Accepted(v) => bound = v,
                Step::Stalled => break,
            }
        }
        ll = model.incomplete_log_likelihood(data)?;
        if !ll.is_finite() {
            return Err(Error::divergence("E-step", it + 1));
        }
        trace.push(ll);
    }
    Ok(Trained { model, trace })
}

/// Result of placing one new item into a user's seen list.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    /// 0-based index into the seen list where the item goes (0 = front).
    pub position: usize,
    pub log_prob: f64,
    /// Log-probability of the extended list for every position `0..=n`.
    pub log_probs: Vec<f64>,
    /// Number of (stage, community) factor terms evaluated.
    pub evaluations: usize,
}

/// Best position for `item` in `seen`, keeping the seen order fixed.
///
/// Position 0 is evaluated in full; every later position is reached from
/// the previous one through the odds of the two stage factors that change,
/// so the sweep is linear in the list length. Ties go to the smaller
/// position.
pub fn insert_position(model: &MixtureModel, user: UserId, seen: &[ItemId], item: ItemId) -> Result<Insertion> {
    model.check_user(user)?;
    check_items(seen, model.num_items())?;
    check_items(&[item], model.num_items())?;
    check_distinct(seen, model.num_items())?;
    if seen.contains(&item) {
        return Err(Error::argument(format!("item {item} is already in the seen list")));
    }
    let k = model.num_communities();
    let n = seen.len();
    let lw = log_weights(model.mixture.view(), user);
    let sy: Vec<f64> = (0..k).map(|z| model.scores[[z, item.index()]]).collect();
    // suffix[z][j] = log sum_{i >= j} exp(s[z][seen_i]), with suffix[z][n] = -inf
    let suffix: Vec<Vec<f64>> = (0..k)
        .map(|z| {
            let s: Vec<f64> = seen.iter().map(|x| model.scores[[z, x.index()]]).collect();
            let mut d = suffix_lse(&s);
            d.push(f64::NEG_INFINITY);
            d
        })
        .collect();

    let mut evaluations = 0;
    let mut buf = vec![0.0; k];
    // log sum_z P(z|u) exp(s_z - den_z)
    let mut factor = |score: &dyn Fn(usize) -> f64, den: &dyn Fn(usize) -> f64| {
        for z in 0..k {
            buf[z] = lw[z] + score(z) - den(z);
        }
        evaluations += k;
        log_sum_exp(&buf)
    };
    let seen_score = |x: usize| move |z: usize| model.scores[[z, seen[x].index()]];
    let with_new = |j: usize| {
        let suffix = &suffix;
        let sy = &sy;
        move |z: usize| log_add(sy[z], suffix[z][j])
    };

    let mut log_probs = Vec::with_capacity(n + 1);
    let mut current = factor(&|z| sy[z], &with_new(0));
    for i in 0..n {
        current += factor(&seen_score(i), &|z| suffix[z][i]);
    }
    log_probs.push(current);
    for j in 0..n {
        // moving the new item from j to j + 1 swaps it with seen[j]
        let before = factor(&|z| sy[z], &with_new(j)) + factor(&seen_score(j), &|z| suffix[z][j]);
        let after = factor(&seen_score(j), &with_new(j)) + factor(&|z| sy[z], &with_new(j + 1));
        current += after - before;
        log_probs.push(current);
    }
    let position = first_argmax(&log_probs);
    Ok(Insertion {
        position,
        log_prob: log_probs[position],
        log_probs,
        evaluations,
    })
}

/// Places every candidate independently and orders them by position, then
/// by the log-probability of their placement, then by item id.
pub fn rank_unseen(model: &MixtureModel, user: UserId, seen: &[ItemId], candidates: &[ItemId]) -> Result<Vec<ItemId>> {
    check_distinct(candidates, model.num_items())?;
    let placements = candidates
        .iter()
        .map(|&item| {
            insert_position(model, user, seen, item).map(|ins| Placement {
                item,
                position: ins.position,
                score: ins.log_prob,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_placements(placements))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::items;
    use ndarray::array;

    fn list(user: u32, ids: &[u32], m: usize) -> RankedList {
        RankedList::new(UserId(user), items(ids), m).unwrap()
    }

    #[test]
    fn stage_prob_examples() {
        let model = MixtureModel::new(array![[0.5, 0.5]], Array2::from_elem((2, 4), 0.3)).unwrap();
        let l = list(0, &[3, 1, 0, 2], 4);
        assert!((model.stage_prob(&l, 0, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((model.stage_prob(&l, 3, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(model.stage_prob(&l, 4, 0).is_err());
    }

    #[test]
    fn identical_communities_give_uniform_orderings() {
        let model = MixtureModel::new(array![[0.2, 0.3, 0.5]], Array2::from_elem((3, 3), -1.0)).unwrap();
        let ll = model.log_likelihood(&list(0, &[1, 2, 0], 3)).unwrap();
        assert!((ll + 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn identical_communities_leave_prior_as_posterior() {
        let model = MixtureModel::new(array![[0.2, 0.8], [0.6, 0.4]], Array2::from_elem((2, 3), 0.7)).unwrap();
        let data = Dataset::new(2, 3, vec![list(0, &[1, 2, 0], 3), list(1, &[2, 0], 3)]).unwrap();
        let resp = e_step(&model, &data).unwrap();
        for (l, q) in data.lists().iter().zip(&resp.per_list) {
            for row in q.rows() {
                for z in 0..2 {
                    assert!((row[z] - model.mixture[[l.user.index(), z]]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_community_responsibilities_are_one() {
        let model = MixtureModel::new(array![[1.0]], array![[0.1, -2.0, 0.4]]).unwrap();
        let data = Dataset::new(1, 3, vec![list(0, &[1, 2, 0], 3)]).unwrap();
        let resp = e_step(&model, &data).unwrap();
        assert!(resp.per_list[0].iter().all(|&q| q == 1.0));
    }

    #[test]
    fn mixture_update_examples() {
        let data = Dataset::new(2, 3, vec![list(0, &[1, 2, 0], 3), list(1, &[2], 3)]).unwrap();
        let resp = Responsibilities {
            per_list: vec![
                array![[0.25, 0.75], [0.25, 0.75], [0.25, 0.75]],
                array![[0.9, 0.1]],
            ],
        };
        let rows = m_step_mixture(&resp, &data).unwrap();
        assert!((rows[0][0] - 0.25).abs() < 1e-15 && (rows[0][1] - 0.75).abs() < 1e-15);
        assert!((rows[1][0] - 0.9).abs() < 1e-15 && (rows[1][1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_community_gets_zero_gradient() {
        let model = MixtureModel::new(array![[0.5, 0.5]], array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.0]]).unwrap();
        let data = Dataset::new(1, 3, vec![list(0, &[1, 2, 0], 3)]).unwrap();
        let resp = Responsibilities {
            per_list: vec![array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]],
        };
        let g = m_step_scores_grad(&model, &resp, &data).unwrap();
        assert!(g.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_community_two_equal_scores_gradient() {
        let model = MixtureModel::new(array![[1.0]], array![[0.4, 0.4]]).unwrap();
        let data = Dataset::new(1, 2, vec![list(0, &[1, 0], 2)]).unwrap();
        let resp = e_step(&model, &data).unwrap();
        let g = m_step_scores_grad(&model, &resp, &data).unwrap();
        assert!((g[[0, 1]] - 0.5).abs() < 1e-15);
        assert!((g[[0, 0]] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn insertion_into_empty_list_is_front() {
        let model = MixtureModel::new(array![[0.5, 0.5]], array![[0.1, 0.2], [1.0, -1.0]]).unwrap();
        let ins = insert_position(&model, UserId(0), &[], ItemId(1)).unwrap();
        assert_eq!(ins.position, 0);
        assert!(ins.log_prob.abs() < 1e-15);
    }

    #[test]
    fn dominant_item_goes_first() {
        let model = MixtureModel::new(array![[1.0]], array![[0.1, 0.2, -0.3, 50.0]]).unwrap();
        let ins = insert_position(&model, UserId(0), &items(&[1, 0, 2]), ItemId(3)).unwrap();
        assert_eq!(ins.position, 0);
    }

    #[test]
    fn insertion_rejects_seen_items() {
        let model = MixtureModel::new(array![[1.0]], array![[0.1, 0.2, -0.3]]).unwrap();
        assert!(matches!(
            insert_position(&model, UserId(0), &items(&[1, 0]), ItemId(1)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn rank_unseen_orders_by_position() {
        let model = MixtureModel::new(array![[1.0]], array![[3.0, 0.0, 5.0, -5.0]]).unwrap();
        assert_eq!(
            rank_unseen(&model, UserId(0), &items(&[0, 1]), &items(&[3, 2])).unwrap(),
            items(&[2, 3])
        );
        assert_eq!(rank_unseen(&model, UserId(0), &items(&[0]), &items(&[3])).unwrap(), items(&[3]));
    }
}
