//! Pairwise-preference baseline: margins between in-list item pairs, three
//! surrogate losses, and gradient training of the factor pair.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::optim::{ascent_step, Schedule, Step, Trained};
use crate::rng;
use crate::scores::{sigmoid, softplus};
use crate::types::{Dataset, FactorPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `(1 - d)^2`
    Squared,
    /// `max(0, 1 - d)`
    Hinge,
    /// `log(1 + exp(-d))`
    Logistic,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            _ => Err(Error::argument(format!("unknown loss `{s}`"))),
        }
    }
}

/// Frobenius penalties `alpha * |W|^2 + beta * |H|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl RegWeights {
    pub const NONE: RegWeights = RegWeights {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::argument("regularization weights must be finite and non-negative"));
        }
        Ok(RegWeights { alpha, beta })
    }

    pub(crate) fn penalty(&self, w: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>) -> f64 {
        self.alpha * w.iter().map(|x| x * x).sum::<f64>()
            + self.beta * h.iter().map(|x| x * x).sum::<f64>()
    }
}

impl Default for RegWeights {
    fn default() -> Self {
        RegWeights {
            alpha: 0.01,
            beta: 0.01,
        }
    }
}

/// `d_ij = sign(j - i) * (s[i] - s[j])` for 0-based list positions `i < j`;
/// `scores` are given in list order.
pub fn margin(scores: &[f64], i: usize, j: usize) -> Result<f64> {
    if i >= j {
        return Err(Error::argument(format!("margin needs i < j, got i={i}, j={j}")));
    }
    if j >= scores.len() {
        return Err(Error::Index {
            what: "position",
            index: j,
            size: scores.len(),
        });
    }
    let sign = (j as f64 - i as f64).signum();
    Ok(sign * (scores[i] - scores[j]))
}

pub fn loss(kind: LossKind, d: f64) -> f64 {
    match kind {
        LossKind::Squared => (1.0 - d).powi(2),
        LossKind::Hinge => (1.0 - d).max(0.0),
        LossKind::Logistic => softplus(-d),
    }
}

/// dL/dd. The hinge subgradient at the kink `d = 1` is 0.
pub fn loss_derivative(kind: LossKind, d: f64) -> f64 {
    match kind {
        LossKind::Squared => -2.0 * (1.0 - d),
        LossKind::Hinge => {
            if d < 1.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Logistic => -sigmoid(-d),
    }
}

/// Regularized empirical risk `(1/N) sum_u sum_{i<j} L(d_ij) + Omega(W, H)`.
pub fn risk(factors: &FactorPair, data: &Dataset, kind: LossKind, reg: RegWeights) -> Result<f64> {
    factors.check_dataset(data)?;
    Ok(risk_of(factors.w.view(), factors.h.view(), data, kind, reg))
}

/// Gradient of [`risk`] with respect to (W, H).
pub fn risk_gradient(
    factors: &FactorPair,
    data: &Dataset,
    kind: LossKind,
    reg: RegWeights,
) -> Result<(Array2<f64>, Array2<f64>)> {
    factors.check_dataset(data)?;
    Ok(gradient_of(factors.w.view(), factors.h.view(), data, kind, reg))
}

fn list_scores(w: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>, u: usize, items: &[crate::ItemId]) -> Vec<f64> {
    items
        .iter()
        .map(|y| w.row(u).dot(&h.column(y.index())))
        .collect()
}

fn risk_of(
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    data: &Dataset,
    kind: LossKind,
    reg: RegWeights,
) -> f64 {
    let mut total = 0.0;
    for list in data.lists() {
        let s = list_scores(w, h, list.user.index(), &list.items);
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                total += loss(kind, s[i] - s[j]);
            }
        }
    }
    total / data.num_users() as f64 + reg.penalty(w, h)
}

fn gradient_of(
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    data: &Dataset,
    kind: LossKind,
    reg: RegWeights,
) -> (Array2<f64>, Array2<f64>) {
    let mut gw = w.mapv(|x| 2.0 * reg.alpha * x);
    let mut gh = h.mapv(|x| 2.0 * reg.beta * x);
    let inv_n = 1.0 / data.num_users() as f64;
    for list in data.lists() {
        let u = list.user.index();
        let s = list_scores(w, h, u, &list.items);
        let mut ds = vec![0.0; s.len()];
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let g = loss_derivative(kind, s[i] - s[j]) * inv_n;
                ds[i] += g;
                ds[j] -= g;
            }
        }
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

/// Trains from the default initialization: entries uniform in
/// `[-0.01, 0.01]` drawn from `seed`.
pub fn train_pairwise(
    data: &Dataset,
    rank: usize,
    kind: LossKind,
    reg: RegWeights,
    schedule: &Schedule,
    seed: u64,
) -> Result<Trained<FactorPair>> {
    let init = FactorPair::random(
        data.num_users(),
        data.num_items(),
        rank,
        0.01,
        &mut rng::substream(seed, 1),
    )?;
    train_pairwise_from(init, data, kind, reg, schedule)
}

/// Full-batch gradient descent on the risk, jointly in W and H, halving the
/// step whenever the risk would increase. The trace holds risks.
pub fn train_pairwise_from(
    init: FactorPair,
    data: &Dataset,
    kind: LossKind,
    reg: RegWeights,
    schedule: &Schedule,
) -> Result<Trained<FactorPair>> {
    init.check_dataset(data)?;
    let (n, k, m) = (init.num_users(), init.rank(), init.num_items());
    let split = n * k;
    let mut params: Vec<f64> = init.w.iter().chain(init.h.iter()).copied().collect();
    let views = |p: &[f64]| {
        (
            ArrayView2::from_shape((n, k), &p[..split]).unwrap().to_owned(),
            ArrayView2::from_shape((k, m), &p[split..]).unwrap().to_owned(),
        )
    };
    let mut current = risk_of(init.w.view(), init.h.view(), data, kind, reg);
    let mut trace = vec![current];
    for it in 0..schedule.iterations {
        let (w, h) = views(&params);
        let (gw, gh) = gradient_of(w.view(), h.view(), data, kind, reg);
        let ascent: Vec<f64> = gw.iter().chain(gh.iter()).map(|g| -g).collect();
        let step = ascent_step(&mut params, &ascent, -current, schedule, "descent", it, |p| {
            let w = ArrayView2::from_shape((n, k), &p[..split]).unwrap();
            let h = ArrayView2::from_shape((k, m), &p[split..]).unwrap();
            -risk_of(w, h, data, kind, reg)
        })?;
        match step {
            Step::Accepted(v) => {
                current = -v;
                trace.push(current);
            }
            Step::Stalled => break,
        }
    }
    let (w, h) = views(&params);
    Ok(Trained {
        model: FactorPair::new(w, h)?,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{items, RankedList, UserId};

    #[test]
    fn margin_examples() {
        assert_eq!(margin(&[1.5, 1.5], 0, 1).unwrap(), 0.0);
        assert_eq!(margin(&[2.0, 1.0], 0, 1).unwrap(), 1.0);
        assert!(matches!(margin(&[2.0, 1.0], 1, 1), Err(Error::Argument(_))));
        assert!(matches!(margin(&[2.0, 1.0], 1, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(LossKind::Hinge, 1.0), 0.0);
        assert!((loss(LossKind::Logistic, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(loss(LossKind::Squared, 3.0), 4.0);
        assert_eq!(loss_derivative(LossKind::Hinge, 1.0), 0.0);
    }

    #[test]
    fn zero_items_give_unit_hinge_per_pair() {
        let data = Dataset::new(
            2,
            4,
            vec![
                RankedList::new(UserId(0), items(&[0, 1, 2]), 4).unwrap(),
                RankedList::new(UserId(1), items(&[3, 1]), 4).unwrap(),
            ],
        )
        .unwrap();
        let mut f = FactorPair::random(2, 4, 2, 1.0, &mut rng::root(3)).unwrap();
        f.h.fill(0.0);
        let r = risk(&f, &data, LossKind::Hinge, RegWeights::NONE).unwrap();
        assert!((r - (3.0 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_lists_leave_only_the_penalty() {
        let data = Dataset::new(
            2,
            3,
            vec![
                RankedList::new(UserId(0), items(&[2]), 3).unwrap(),
                RankedList::new(UserId(1), items(&[0]), 3).unwrap(),
            ],
        )
        .unwrap();
        let f = FactorPair::random(2, 3, 1, 1.0, &mut rng::root(5)).unwrap();
        let reg = RegWeights::new(0.3, 0.7).unwrap();
        let r = risk(&f, &data, LossKind::Logistic, reg).unwrap();
        assert!((r - reg.penalty(f.w.view(), f.h.view())).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let data = Dataset::new(2, 3, vec![]).unwrap();
        let f = FactorPair::zeros(3, 3, 1).unwrap();
        assert!(risk(&f, &data, LossKind::Hinge, RegWeights::NONE).is_err());
    }

    #[test]
    fn zero_iterations_return_initialization() {
        let data = Dataset::new(
            2,
            3,
            vec![RankedList::new(UserId(0), items(&[2, 0, 1]), 3).unwrap()],
        )
        .unwrap();
        let init = FactorPair::zeros(2, 3, 1).unwrap();
        let s = Schedule {
            iterations: 0,
            ..Schedule::default()
        };
        let t = train_pairwise_from(init.clone(), &data, LossKind::Logistic, RegWeights::default(), &s)
            .unwrap();
        assert_eq!(t.model, init);
        assert_eq!(t.trace.len(), 1);
    }
}
