//! Per-step performance indices and their aggregation.

use serde::{Deserialize, Serialize};

use crate::inference::Belief;
use crate::predictor::PredictionResult;

/// Mean distance between the forecast means and the realized future
/// positions over the available horizon; `None` when nothing remains.
pub fn prediction_error(pred: &PredictionResult, reference: &[[f64; 2]]) -> Option<f64> {
    let q = pred.means.len().min(reference.len());
    if q == 0 {
        return None;
    }
    let total: f64 = pred
        .means
        .iter()
        .zip(reference)
        .map(|(m, r)| ((m[0] - r[0]).powi(2) + (m[1] - r[1]).powi(2)).sqrt())
        .sum();
    Some(total / q as f64)
}

pub fn true_goal_prob(b: &Belief, true_goal: usize) -> f64 {
    b.goal_post()[true_goal]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub prediction_error: f64,
    pub true_goal_prob: f64,
    pub alpha_hat: f64,
    pub alpha_error: f64,
}

/// Location and spread summary of a pooled sample, population std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Summarizes a sample; the result does not depend on the input order.
pub fn aggregate(values: &[f64]) -> Summary {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std: f64::NAN,
            min: f64::NAN,
            q1: f64::NAN,
            median: f64::NAN,
            q3: f64::NAN,
            max: f64::NAN,
        };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    Summary {
        n,
        mean,
        std: var.sqrt(),
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[n - 1],
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    aggregate(values).median
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Cell;
    use crate::predictor::Cov2;

    fn pred(means: Vec<[f64; 2]>) -> PredictionResult {
        PredictionResult {
            horizon: means.len(),
            covs: vec![Cov2::default(); means.len()],
            means,
            counts: vec![1],
            samples: None,
        }
    }

    #[test]
    fn prediction_error_examples() {
        let p = pred(vec![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        assert_eq!(prediction_error(&p, &[[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), Some(0.0));
        assert_eq!(prediction_error(&p, &[[1.0, 0.5], [2.0, 0.5], [3.0, 0.5]]), Some(0.5));
        assert_eq!(prediction_error(&p, &[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]), Some(2.0));
        // truncated horizon
        assert_eq!(prediction_error(&p, &[[1.0, 1.0]]), Some(1.0));
        assert_eq!(prediction_error(&p, &[]), None);
    }

    #[test]
    fn true_goal_prob_examples() {
        let b = Belief::from_parts(vec![0.25; 4], vec![vec![1.0]; 4], Cell::new(0, 0)).unwrap();
        assert_eq!(true_goal_prob(&b, 2), 0.25);
        let b = Belief::from_parts(vec![0.0, 1.0], vec![vec![1.0]; 2], Cell::new(0, 0)).unwrap();
        assert_eq!(true_goal_prob(&b, 1), 1.0);
        assert_eq!(true_goal_prob(&b, 0), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[3.0; 5]);
        assert_eq!((s.mean, s.std), (3.0, 0.0));
        let s = aggregate(&[0.0, 2.0]);
        assert_eq!((s.mean, s.std, s.median), (1.0, 1.0, 1.0));
        let s = aggregate(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.q1, s.median, s.q3, s.min, s.max), (2.0, 3.0, 4.0, 1.0, 5.0));
    }
}
