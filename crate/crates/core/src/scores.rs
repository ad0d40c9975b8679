//! Score evaluation and log-space helpers.

use crate::error::{Error, Result};
use crate::types::{FactorPair, ItemId, UserId};

/// `log(sum(exp(xs)))`, `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scores of `items` for `user`: the inner product of row `user` of W with
/// each requested column of H.
pub fn user_scores(factors: &FactorPair, user: UserId, items: &[ItemId]) -> Result<Vec<f64>> {
    factors.check_user(user)?;
    factors.check_items(items)?;
    Ok(items.iter().map(|&y| factors.score(user, y)).collect())
}

/// `out[i] = log(sum_{j >= i} exp(scores[j]))`, built right to left in one
/// pass as a streaming log-sum-exp.
pub fn suffix_log_denominators(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::argument("suffix denominators need at least one score"));
    }
    Ok(suffix_lse(scores))
}

pub(crate) fn suffix_lse(scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    let mut acc = f64::NEG_INFINITY;
    for i in (0..scores.len()).rev() {
        acc = log_add(acc, scores[i]);
        out[i] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn equal_scores_give_log_counts() {
        let d = suffix_log_denominators(&[0.0, 0.0, 0.0]).unwrap();
        let want = [3f64.ln(), 2f64.ln(), 0.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn singleton_suffix_is_the_score() {
        assert_eq!(suffix_log_denominators(&[1.7]).unwrap(), vec![1.7]);
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(matches!(suffix_log_denominators(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn matches_direct_summation() {
        let s = [1.0, -0.5, 2.0];
        let d = suffix_log_denominators(&s).unwrap();
        for i in 0..s.len() {
            let direct: f64 = s[i..].iter().map(|x| x.exp()).sum::<f64>().ln();
            assert!((d[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let d = suffix_log_denominators(&[1000.0, 1000.0]).unwrap();
        assert!((d[0] - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn zero_row_gives_zero_scores() {
        let f = FactorPair::new(array![[0.0, 0.0], [1.0, 2.0]], array![[1.0, 5.0], [3.0, -2.0]])
            .unwrap();
        assert_eq!(
            user_scores(&f, UserId(0), &[ItemId(0), ItemId(1)]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn scalar_factor_scores() {
        let f = FactorPair::new(array![[2.0], [1.0]], array![[1.0, 3.0]]).unwrap();
        assert_eq!(
            user_scores(&f, UserId(0), &[ItemId(0), ItemId(1)]).unwrap(),
            vec![2.0, 6.0]
        );
    }

    #[test]
    fn out_of_range_ids_are_index_errors() {
        let f = FactorPair::new(array![[2.0], [1.0]], array![[1.0, 3.0]]).unwrap();
        assert!(matches!(
            user_scores(&f, UserId(2), &[ItemId(0)]),
            Err(Error::Index { what: "user", .. })
        ));
        assert!(matches!(
            user_scores(&f, UserId(0), &[ItemId(2)]),
            Err(Error::Index { what: "item", .. })
        ));
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }
}
