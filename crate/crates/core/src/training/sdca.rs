//! Stochastic dual coordinate ascent for the regularized weighted hinge loss
//!
//! ```text
//! P(theta) = mu/2 |theta|^2 + sum_i c_i max(0, 1 - y_i theta . x_i)
//! D(alpha) = sum_i alpha_i - 1/(2 mu) |sum_i alpha_i y_i x_i|^2,   0 <= alpha_i <= c_i
//! ```
//!
//! with `theta = (1/mu) sum_i alpha_i y_i x_i`. Each coordinate step maximizes
//! `D` exactly along `alpha_i`, so the dual never decreases.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainingSample;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sequence::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdcaConfig {
    pub mu: f64,
    pub max_epochs: usize,
    /// Stop once `P - D <= tolerance * P`.
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdcaReport {
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub converged: bool,
    /// Dual objective after every epoch.
    pub dual_history: Vec<f64>,
}

/// `mu/2 |theta|^2 + sum_i c_i hinge(y_i theta . x_i)`.
pub fn primal_objective(samples: &[TrainingSample], theta: &[f64], mu: f64) -> f64 {
    let loss: f64 = samples
        .iter()
        .map(|s| s.weight * (1.0 - s.y() * s.x.dot(theta)).max(0.0))
        .sum();
    0.5 * mu * dot(theta, theta) + loss
}

pub fn solve(samples: &[TrainingSample], config: &SdcaConfig) -> Result<(Vec<f64>, SdcaReport)> {
    if !(config.mu > 0.0 && config.mu.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "mu must be positive, got {}",
            config.mu
        )));
    }
    if config.max_epochs == 0 {
        return Err(Error::InvalidConfig("sdca epochs must be positive".into()));
    }
    let first = samples.first().ok_or(Error::DegenerateData)?;
    let has_pos = samples.iter().any(|s| s.y() > 0.0);
    let has_neg = samples.iter().any(|s| s.y() < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::DegenerateData);
    }
    let dim = first.x.dim();
    if let Some(s) = samples.iter().find(|s| s.x.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: s.x.dim(),
        });
    }
    if let Some(s) = samples
        .iter()
        .find(|s| !(s.weight >= 0.0 && s.weight.is_finite()))
    {
        return Err(Error::InvalidConfig(format!(
            "invalid sample weight {}",
            s.weight
        )));
    }

    let mu = config.mu;
    let sq_norms: Vec<f64> = samples
        .iter()
        .map(|s| dot(s.x.as_slice(), s.x.as_slice()))
        .collect();
    let mut alpha = vec![0.0; samples.len()];
    let mut theta = vec![0.0; dim];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng_from_seed(config.seed);
    let mut history = Vec::new();
    let mut report = SdcaReport {
        epochs: 0,
        primal: f64::NAN,
        dual: 0.0,
        gap: f64::INFINITY,
        converged: false,
        dual_history: Vec::new(),
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let q = sq_norms[i];
            if q == 0.0 {
                continue;
            }
            let s = &samples[i];
            let y = s.y();
            let grad = 1.0 - y * s.x.dot(&theta);
            let next = (alpha[i] + mu * grad / q).clamp(0.0, s.weight);
            let step = next - alpha[i];
            if step != 0.0 {
                alpha[i] = next;
                let scale = step * y / mu;
                for (t, x) in theta.iter_mut().zip(s.x.as_slice()) {
                    *t += scale * x;
                }
            }
        }

        let dual = alpha.iter().sum::<f64>() - 0.5 * mu * dot(&theta, &theta);
        let primal = primal_objective(samples, &theta, mu);
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        history.push(dual);
        let gap = primal - dual;
        report.epochs = epoch;
        report.primal = primal;
        report.dual = dual;
        report.gap = gap;
        if gap <= config.tolerance * primal.max(f64::MIN_POSITIVE) {
            report.converged = true;
            break;
        }
    }
    report.dual_history = history;
    Ok((theta, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{FeatureVector, Label};

    fn sample(x: &[f64], y: f64) -> TrainingSample {
        let label = if y > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        };
        TrainingSample::new(FeatureVector::new(x.to_vec()).unwrap(), label)
    }

    fn config(mu: f64) -> SdcaConfig {
        SdcaConfig {
            mu,
            max_epochs: 1000,
            tolerance: 1e-9,
            seed: 0,
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // P(t) = t^2/2 + 2 max(0, 1 - t) is minimized at t = 1 (subgradient
        // t - 2 s with s in [0, 1] contains 0 at t = 1), P(1) = 0.5
        let samples = [sample(&[1.0], 1.0), sample(&[-1.0], -1.0)];
        let (theta, report) = solve(&samples, &config(1.0)).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-6, "{theta:?}");
        assert!((report.primal - 0.5).abs() < 1e-6);
        for s in &samples {
            assert!((1.0 - s.y() * s.x.dot(&theta)).max(0.0) < 1.0);
        }
    }

    #[test]
    fn weights_cap_the_dual() {
        // doubling every weight equals halving mu up to a factor 2 on P
        let samples = [
            sample(&[1.0], 1.0),
            sample(&[-1.0], -1.0),
            sample(&[0.3], -1.0),
        ];
        let mut doubled = samples.to_vec();
        doubled.iter_mut().for_each(|s| s.weight = 2.0);
        let (a, _) = solve(&doubled, &config(1.0)).unwrap();
        let (b, _) = solve(&samples, &config(0.5)).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-6);
    }

    #[test]
    fn rejects_single_class() {
        let samples = [sample(&[1.0], 1.0), sample(&[2.0], 1.0)];
        assert_eq!(
            solve(&samples, &config(1.0)).unwrap_err(),
            Error::DegenerateData
        );
        assert_eq!(solve(&[], &config(1.0)).unwrap_err(), Error::DegenerateData);
    }

    #[test]
    fn rejects_bad_mu() {
        let samples = [sample(&[1.0], 1.0), sample(&[-1.0], -1.0)];
        assert!(matches!(
            solve(&samples, &config(0.0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn dual_never_decreases() {
        let samples: Vec<_> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.37;
                let x = [t.sin(), t.cos(), (2.0 * t).sin()];
                let y = if x[0] + 0.3 * x[1] + 0.2 * (5.0 * t).cos() > 0.0 {
                    1.0
                } else {
                    -1.0
                };
                sample(&x, y)
            })
            .collect();
        let (_, report) = solve(&samples, &config(0.1)).unwrap();
        for w in report.dual_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
        }
        assert!(report.primal >= report.dual - 1e-12);
        assert!(report.converged);
    }
}
