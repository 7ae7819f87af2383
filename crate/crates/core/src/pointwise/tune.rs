//! Seeded random search.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{MlpSpec, TrainSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial<S> {
    pub index: usize,
    pub spec: S,
    /// `None` when the trial failed or scored NaN.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<S> {
    pub best: S,
    pub best_index: usize,
    pub best_score: f64,
    pub trials: Vec<Trial<S>>,
}

/// Draws `budget` specs from one seeded stream and keeps the highest score
/// (the earliest on ties). Because the stream is shared, the first `n` trials
/// are identical for every budget `>= n`.
pub fn random_search<S: Clone>(
    budget: usize,
    seed: u64,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> S,
    mut evaluate: impl FnMut(&S) -> Result<f64>,
) -> Result<SearchResult<S>> {
    if budget == 0 {
        return Err(Error::invalid("search budget", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64)> = None;
    for index in 0..budget {
        let spec = sample(&mut rng);
        let (score, error) = match evaluate(&spec) {
            Ok(s) if s.is_finite() => (Some(s), None),
            Ok(s) => (None, Some(format!("score {s}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((index, s));
            }
        }
        trials.push(Trial {
            index,
            spec,
            score,
            error,
        });
    }
    let (best_index, best_score) = best.ok_or_else(|| {
        Error::Numerical(format!("all {budget} search trials failed or scored NaN"))
    })?;
    Ok(SearchResult {
        best: trials[best_index].spec.clone(),
        best_index,
        best_score,
        trials,
    })
}

/// Box of perceptron hyperparameters; rates are sampled log-uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSearchSpace {
    pub layers: (usize, usize),
    pub width: (usize, usize),
    pub learning_rate: (f64, f64),
    pub dropout: (f64, f64),
    pub l2: (f64, f64),
    pub base: TrainSpec,
}

impl Default for MlpSearchSpace {
    fn default() -> Self {
        MlpSearchSpace {
            layers: (1, 4),
            width: (8, 64),
            learning_rate: (1e-4, 1e-2),
            dropout: (0.0, 0.2),
            l2: (1e-7, 1e-3),
            base: TrainSpec::default(),
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

impl MlpSearchSpace {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> MlpSpec {
        let layers = rng.random_range(self.layers.0..=self.layers.1);
        let hidden_sizes = (0..layers)
            .map(|_| rng.random_range(self.width.0..=self.width.1))
            .collect();
        let dropout = if self.dropout.0 < self.dropout.1 {
            rng.random_range(self.dropout.0..self.dropout.1)
        } else {
            self.dropout.0
        };
        MlpSpec {
            hidden_sizes,
            train: TrainSpec {
                learning_rate: log_uniform(rng, self.learning_rate),
                dropout,
                l2: log_uniform(rng, self.l2),
                ..self.base.clone()
            },
        }
    }
}

/// Plain coefficient of determination over every entry.
pub fn r2_score(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> f64 {
    let mean = truth.mean();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res = (truth - pred).norm_squared();
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(budget: usize, seed: u64) -> SearchResult<f64> {
        random_search(budget, seed, |r| r.random_range(-1.0..1.0), |x: &f64| Ok(-(x - 0.3).powi(2))).unwrap()
    }

    #[test]
    fn single_trial_is_returned() {
        let r = toy(1, 5);
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best, r.trials[0].spec);
    }

    #[test]
    fn larger_budget_never_worse_and_prefix_stable() {
        let mut last = f64::NEG_INFINITY;
        for b in 1..20 {
            let r = toy(b, 9);
            assert!(r.best_score >= last);
            last = r.best_score;
            let full = toy(20, 9);
            assert_eq!(r.trials[..], full.trials[..b]);
        }
        assert_eq!(toy(7, 3), toy(7, 3));
    }

    #[test]
    fn all_nan_is_an_error() {
        let err = random_search(3, 0, |_| 0u8, |_| Ok(f64::NAN)).unwrap_err();
        assert!(err.to_string().contains("all 3"));
        assert!(random_search(0, 0, |_| 0u8, |_| Ok(1.0)).is_err());
    }

    #[test]
    fn failing_trials_are_logged() {
        let mut calls = 0;
        let r = random_search(
            4,
            0,
            |_| (),
            |_| {
                calls += 1;
                if calls == 2 {
                    Ok(1.0)
                } else {
                    Err(Error::Numerical("boom".into()))
                }
            },
        )
        .unwrap();
        assert_eq!(r.best_index, 1);
        assert_eq!(r.trials.iter().filter(|t| t.error.is_some()).count(), 3);
    }

    #[test]
    fn space_samples_valid_specs() {
        let space = MlpSearchSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = space.sample(&mut rng);
            s.validate().unwrap();
            assert!((1..=4).contains(&s.hidden_sizes.len()));
        }
    }

    #[test]
    fn r2_of_perfect_prediction() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r2_score(&t, &t), 1.0);
        let mean = DMatrix::from_element(2, 2, 2.5);
        assert_eq!(r2_score(&t, &mean), 0.0);
    }
}
