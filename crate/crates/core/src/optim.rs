//! Full-batch gradient ascent with backtracking step halving, shared by all
//! trainers.

use crate::error::{Error, Result};

/// Fixed step size `step`, halved up to `max_halvings` times whenever a
/// candidate step fails to improve the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub iterations: usize,
    pub step: f64,
    pub max_halvings: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            iterations: 100,
            step: 0.05,
            max_halvings: 30,
        }
    }
}

/// A trained model with its objective trace; `trace[0]` is the objective at
/// initialization, then one entry per iteration.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Step {
    /// Parameters moved; carries the new objective value.
    Accepted(f64),
    /// No tried step size improved the objective; parameters untouched.
    Stalled,
}

/// Tries `params + eta * grad` for `eta = step, step/2, ...` and keeps the
/// first candidate whose objective is finite and not below `current`.
///
/// A non-finite candidate on the last allowed attempt is reported as
/// divergence.
pub(crate) fn ascent_step<F>(
    params: &mut [f64],
    grad: &[f64],
    current: f64,
    schedule: &Schedule,
    phase: &str,
    iteration: usize,
    mut objective: F,
) -> Result<Step>
where
    F: FnMut(&[f64]) -> f64,
{
    if !current.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::divergence(phase, iteration));
    }
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(Step::Stalled);
    }
    let mut eta = schedule.step;
    let mut candidate = vec![0.0; params.len()];
    let mut saw_finite = false;
    for _ in 0..=schedule.max_halvings {
        for ((c, p), g) in candidate.iter_mut().zip(params.iter()).zip(grad) {
            *c = p + eta * g;
        }
        let value = objective(&candidate);
        if value.is_finite() {
            saw_finite = true;
            if value >= current {
                params.copy_from_slice(&candidate);
                return Ok(Step::Accepted(value));
            }
        }
        eta *= 0.5;
    }
    if saw_finite {
        Ok(Step::Stalled)
    } else {
        Err(Error::divergence(phase, iteration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn climbs_a_concave_bowl() {
        let f = |x: &[f64]| -(x[0] - 3.0).powi(2);
        let mut x = vec![0.0];
        let s = Schedule {
            iterations: 0,
            step: 10.0,
            max_halvings: 20,
        };
        let mut value = f(&x);
        for it in 0..50 {
            let g = vec![-2.0 * (x[0] - 3.0)];
            match ascent_step(&mut x, &g, value, &s, "test", it, f).unwrap() {
                Step::Accepted(v) => {
                    assert!(v >= value);
                    value = v;
                }
                Step::Stalled => break,
            }
        }
        assert!((x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_everywhere_is_divergence() {
        let s = Schedule {
            iterations: 1,
            step: 1.0,
            max_halvings: 3,
        };
        let mut x = vec![0.0];
        let err = ascent_step(&mut x, &[1.0], 0.0, &s, "W-phase", 7, |_| f64::NAN).unwrap_err();
        assert!(matches!(err, Error::Divergence { ref phase, step: 7 } if phase == "W-phase"));
    }

    #[test]
    fn zero_gradient_stalls() {
        let s = Schedule::default();
        let mut x = vec![1.0];
        assert_eq!(
            ascent_step(&mut x, &[0.0], 1.0, &s, "p", 0, |_| 2.0).unwrap(),
            Step::Stalled
        );
        assert_eq!(x, vec![1.0]);
    }
}
