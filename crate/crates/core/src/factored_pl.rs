//! Factored Plackett-Luce with optional per-stage damping.
//!
//! A user's list is generated stage by stage: at stage `i` the next item is
//! drawn from the remaining ones with probability proportional to
//! `exp(rho_i * s_y)`, where `s_y = W[u] . H[:, y]`. Damping weights
//! `rho_1 >= rho_2 >= ...` make early positions count more.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::optim::{ascent_step, Schedule, Step, Trained};
use crate::pairwise::RegWeights;
use crate::rng;
use crate::scores::{log_sum_exp, suffix_lse, user_scores};
use crate::types::{check_distinct, Dataset, FactorPair, ItemId, RankedList, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingSchedule {
    /// `rho_i = 1`
    None,
    /// `rho_i = 1 / ln(1 + i)` for 1-based stage `i`
    Logarithmic,
}

impl DampingSchedule {
    /// Weight of 0-based stage `stage`.
    pub fn weight(self, stage: usize) -> f64 {
        match self {
            DampingSchedule::None => 1.0,
            DampingSchedule::Logarithmic => 1.0 / ((stage + 2) as f64).ln(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DampingSchedule::None => "none",
            DampingSchedule::Logarithmic => "log",
        }
    }
}

impl fmt::Display for DampingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DampingSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DampingSchedule::None),
            "log" | "logarithmic" => Ok(DampingSchedule::Logarithmic),
            _ => Err(Error::argument(format!("unknown damping rule `{s}`"))),
        }
    }
}

/// Damped stage-wise log-probability of scores given in list order.
pub fn list_log_prob(scores: &[f64], damping: DampingSchedule) -> f64 {
    match damping {
        DampingSchedule::None => {
            let denom = suffix_lse(scores);
            scores.iter().zip(&denom).map(|(s, d)| s - d).sum()
        }
        _ => weighted_log_prob(scores, |i| damping.weight(i)),
    }
}

/// Stage-wise log-probability with an arbitrary weight per 0-based stage:
/// `sum_i [rho_i s_i - log sum_{j >= i} exp(rho_i s_j)]`.
pub fn weighted_log_prob(scores: &[f64], rho: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(scores.len());
    for i in 0..scores.len() {
        let r = rho(i);
        buf.clear();
        buf.extend(scores[i..].iter().map(|s| r * s));
        total += buf[0] - log_sum_exp(&buf);
    }
    total
}

/// Gradient of [`list_log_prob`] with respect to the scores.
pub fn list_log_prob_grad(scores: &[f64], damping: DampingSchedule) -> Vec<f64> {
    weighted_log_prob_grad(scores, |i| damping.weight(i))
}

/// `d/ds_j = sum_{i <= j} rho_i * (delta_ij - softmax_i(j))`, the softmax at
/// stage `i` running over positions `j >= i`.
pub fn weighted_log_prob_grad(scores: &[f64], rho: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = scores.len();
    let mut grad = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    for i in 0..n {
        let r = rho(i);
        if r == 0.0 {
            continue;
        }
        buf.clear();
        buf.extend(scores[i..].iter().map(|s| r * s));
        let lse = log_sum_exp(&buf);
        grad[i] += r;
        for (j, v) in buf.iter().enumerate() {
            grad[i + j] -= r * (v - lse).exp();
        }
    }
    grad
}

/// Gradient of one list's log-likelihood, restricted to what it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct ListGradient {
    pub user: UserId,
    /// d/dW[user, k]
    pub d_w: Vec<f64>,
    /// d/dH[:, y] for every item y in the list, in list order
    pub d_h: Vec<(ItemId, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FplModel {
    pub factors: FactorPair,
    pub damping: DampingSchedule,
    pub reg: RegWeights,
}

impl FplModel {
    pub fn log_likelihood(&self, list: &RankedList) -> Result<f64> {
        let s = user_scores(&self.factors, list.user, &list.items)?;
        check_distinct(&list.items, self.factors.num_items())?;
        Ok(list_log_prob(&s, self.damping))
    }

    /// Unregularized gradient of [`Self::log_likelihood`].
    pub fn grad_log_likelihood(&self, list: &RankedList) -> Result<ListGradient> {
        let s = user_scores(&self.factors, list.user, &list.items)?;
        check_distinct(&list.items, self.factors.num_items())?;
        let ds = list_log_prob_grad(&s, self.damping);
        let (w, h) = (&self.factors.w, &self.factors.h);
        let u = list.user.index();
        let k = self.factors.rank();
        let mut d_w = vec![0.0; k];
        let mut d_h = Vec::with_capacity(list.len());
        for (pos, &y) in list.items.iter().enumerate() {
            let mut col = vec![0.0; k];
            for kk in 0..k {
                d_w[kk] += ds[pos] * h[[kk, y.index()]];
                col[kk] = ds[pos] * w[[u, kk]];
            }
            d_h.push((y, col));
        }
        Ok(ListGradient {
            user: list.user,
            d_w,
            d_h,
        })
    }

    /// `sum_u log P(pi_u | u) - alpha |W|^2 - beta |H|^2`.
    pub fn objective(&self, data: &Dataset) -> Result<f64> {
        self.factors.check_dataset(data)?;
        Ok(objective_of(
            self.factors.w.view(),
            self.factors.h.view(),
            data,
            self.damping,
            self.reg,
        ))
    }

    /// Gradient of [`Self::objective`] including the penalty terms.
    pub fn objective_gradient(&self, data: &Dataset) -> Result<(Array2<f64>, Array2<f64>)> {
        self.factors.check_dataset(data)?;
        Ok(gradient_of(
            self.factors.w.view(),
            self.factors.h.view(),
            data,
            self.damping,
            self.reg,
        ))
    }

    /// Candidates by descending score, ties by ascending item id. Damping is
    /// not applied: a positive per-stage temperature never changes the order.
    pub fn predict_sort(&self, user: UserId, candidates: &[ItemId]) -> Result<Vec<ItemId>> {
        let s = user_scores(&self.factors, user, candidates)?;
        Ok(sort_by_score(candidates, &s))
    }
}

pub(crate) fn sort_by_score(candidates: &[ItemId], scores: &[f64]) -> Vec<ItemId> {
    let mut order: Vec<(ItemId, f64)> = candidates.iter().copied().zip(scores.iter().copied()).collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    order.into_iter().map(|(y, _)| y).collect()
}

fn scores_of(w: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>, u: usize, items: &[ItemId]) -> Vec<f64> {
    items
        .iter()
        .map(|y| w.row(u).dot(&h.column(y.index())))
        .collect()
}

fn objective_of(
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    data: &Dataset,
    damping: DampingSchedule,
    reg: RegWeights,
) -> f64 {
    let ll: f64 = data
        .lists()
        .iter()
        .map(|l| list_log_prob(&scores_of(w, h, l.user.index(), &l.items), damping))
        .sum();
    ll - reg.penalty(w, h)
}

fn gradient_of(
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    data: &Dataset,
    damping: DampingSchedule,
    reg: RegWeights,
) -> (Array2<f64>, Array2<f64>) {
    let mut gw = w.mapv(|x| -2.0 * reg.alpha * x);
    let mut gh = h.mapv(|x| -2.0 * reg.beta * x);
    for list in data.lists() {
        let u = list.user.index();
        let ds = list_log_prob_grad(&scores_of(w, h, u, &list.items), damping);
        for (pos, y) in list.items.iter().enumerate() {
            let y = y.index();
            for k in 0..w.ncols() {
                gw[[u, k]] += ds[pos] * h[[k, y]];
                gh[[k, y]] += ds[pos] * w[[u, k]];
            }
        }
    }
    (gw, gh)
}

/// Which factor blocks the trainer updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phases {
    /// W-phase with H fixed, then H-phase with W fixed, every iteration.
    Alternating,
    /// Only H moves; with K = 1 and W fixed at 1 this is plain item-score
    /// Plackett-Luce shared by all users.
    ItemsOnly,
}

/// Trains from entries uniform in `[-0.01, 0.01]` drawn from `seed`.
pub fn train_fpl(
    data: &Dataset,
    rank: usize,
    damping: DampingSchedule,
    reg: RegWeights,
    schedule: &Schedule,
    seed: u64,
) -> Result<Trained<FplModel>> {
    let factors = FactorPair::random(
        data.num_users(),
        data.num_items(),
        rank,
        0.01,
        &mut rng::substream(seed, 1),
    )?;
    let init = FplModel {
        factors,
        damping,
        reg,
    };
    train_fpl_from(init, data, schedule, Phases::Alternating)
}

/// Alternating full-batch gradient ascent on the regularized log-likelihood,
/// with step halving so the objective never decreases. Stops early once no
/// phase can improve.
pub fn train_fpl_from(
    init: FplModel,
    data: &Dataset,
    schedule: &Schedule,
    phases: Phases,
) -> Result<Trained<FplModel>> {
    init.factors.check_dataset(data)?;
    let FplModel {
        factors,
        damping,
        reg,
    } = init;
    let (n, k, m) = (factors.num_users(), factors.rank(), factors.num_items());
    let mut w = factors.w;
    let mut h = factors.h;
    let mut current = objective_of(w.view(), h.view(), data, damping, reg);
    let mut trace = vec![current];
    for it in 0..schedule.iterations {
        let mut moved = false;
        if phases == Phases::Alternating {
            let (gw, _) = gradient_of(w.view(), h.view(), data, damping, reg);
            let hv = h.view();
            let params = w.as_slice_mut().expect("standard layout");
            let step = ascent_step(params, gw.as_slice().unwrap(), current, schedule, "W-phase", it, |p| {
                objective_of(ArrayView2::from_shape((n, k), p).unwrap(), hv, data, damping, reg)
            })?;
            if let Step::Accepted(v) = step {
                current = v;
                moved = true;
            }
        }
        let (_, gh) = gradient_of(w.view(), h.view(), data, damping, reg);
        let wv = w.view();
        let params = h.as_slice_mut().expect("standard layout");
        let step = ascent_step(params, gh.as_slice().unwrap(), current, schedule, "H-phase", it, |p| {
            objective_of(wv, ArrayView2::from_shape((k, m), p).unwrap(), data, damping, reg)
        })?;
        if let Step::Accepted(v) = step {
            current = v;
            moved = true;
        }
        if !moved {
            break;
        }
        trace.push(current);
    }
    Ok(Trained {
        model: FplModel {
            factors: FactorPair::new(w, h)?,
            damping,
            reg,
        },
        trace,
    })
}
