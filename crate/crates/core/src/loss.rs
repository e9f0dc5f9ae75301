//! Pointwise losses and their first/second derivatives with respect to the raw score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bound on the mean target used for the log-odds initial score.
pub const LOGODDS_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Binary cross-entropy on the raw (log-odds) score.
    #[serde(rename = "logloss")]
    LogLoss,
    /// `½ (ŷ − y)²`.
    #[serde(rename = "mse")]
    SquaredError,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logloss" => Ok(LossKind::LogLoss),
            "mse" | "squared_error" => Ok(LossKind::SquaredError),
            other => Err(Error::InvalidParameter(format!("unknown loss {other:?}"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::LogLoss => "logloss",
            LossKind::SquaredError => "mse",
        })
    }
}

/// Per-row derivatives of the loss at the current predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess<T> {
    pub g: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> GradHess<T> {
    pub fn new(g: Vec<T>, h: Vec<T>) -> Result<Self> {
        if g.len() != h.len() {
            return Err(Error::LengthMismatch {
                what: "hessians",
                found: h.len(),
                expected: g.len(),
            });
        }
        Ok(GradHess { g, h })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Replaces every hessian by one (first-order fitting).
    pub fn unit_hessians(mut self) -> Self {
        self.h.iter_mut().for_each(|h| *h = T::one());
        self
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl LossKind {
    /// Loss of a single prediction.
    pub fn value<T: Scalar>(self, target: T, raw: T) -> T {
        match self {
            LossKind::SquaredError => {
                let d = raw - target;
                T::lit(0.5) * d * d
            }
            // log(1 + e^ŷ) − yŷ, written to avoid overflow for large |ŷ|.
            LossKind::LogLoss => {
                let softplus = raw.max(T::zero()) + (-raw.abs()).exp().ln_1p();
                softplus - target * raw
            }
        }
    }

    pub fn mean_value<T: Scalar>(self, targets: &[T], raw: &[T]) -> T {
        let total: T = targets
            .iter()
            .zip(raw)
            .map(|(&y, &f)| self.value(y, f))
            .sum();
        total / T::from_count(targets.len().max(1))
    }

    /// First and second derivatives with respect to the raw score.
    pub fn derivatives<T: Scalar>(self, targets: &[T], raw: &[T]) -> Result<GradHess<T>> {
        if targets.len() != raw.len() {
            return Err(Error::LengthMismatch {
                what: "predictions",
                found: raw.len(),
                expected: targets.len(),
            });
        }
        let (g, h) = match self {
            LossKind::SquaredError => (
                targets.iter().zip(raw).map(|(&y, &f)| f - y).collect(),
                vec![T::one(); targets.len()],
            ),
            LossKind::LogLoss => targets
                .iter()
                .zip(raw)
                .map(|(&y, &f)| {
                    let p = sigmoid(f);
                    (p - y, p * (T::one() - p))
                })
                .unzip(),
        };
        Ok(GradHess { g, h })
    }

    /// Best constant raw score on the targets.
    pub fn initial_guess<T: Scalar>(self, targets: &[T]) -> T {
        let n = T::from_count(targets.len().max(1));
        let mean = targets.iter().copied().sum::<T>() / n;
        match self {
            LossKind::SquaredError => mean,
            LossKind::LogLoss => {
                let eps = T::lit(LOGODDS_CLAMP);
                let p = mean.max(eps).min(T::one() - eps);
                (p / (T::one() - p)).ln()
            }
        }
    }

    /// Maps a raw score to the output scale (probability for log-loss).
    pub fn transform<T: Scalar>(self, raw: T) -> T {
        match self {
            LossKind::LogLoss => sigmoid(raw),
            LossKind::SquaredError => raw,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn logloss_at_zero() {
        let gh = LossKind::LogLoss.derivatives(&[1.0], &[0.0]).unwrap();
        assert_eq!(gh.g, vec![-0.5]);
        assert_eq!(gh.h, vec![0.25]);
    }

    #[test]
    fn squared_error_direct() {
        let gh = LossKind::SquaredError.derivatives(&[3.0], &[5.0]).unwrap();
        assert_eq!(gh.g, vec![2.0]);
        assert_eq!(gh.h, vec![1.0]);
    }

    #[test]
    fn logloss_matches_finite_difference() {
        let loss = |f: f64| LossKind::LogLoss.value(0.0, f);
        let step = 1e-6;
        let fd_g = (loss(2.0 + step) - loss(2.0 - step)) / (2.0 * step);
        let fd_h = (loss(2.0 + 1e-4) - 2.0 * loss(2.0) + loss(2.0 - 1e-4)) / 1e-8;
        let gh = LossKind::LogLoss.derivatives(&[0.0], &[2.0]).unwrap();
        assert!((gh.g[0] - fd_g).abs() < 1e-4);
        assert!((gh.h[0] - fd_h).abs() < 1e-4);
        assert!((gh.g[0] - 0.880797).abs() < 1e-6);
        assert!((gh.h[0] - 0.104994).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch() {
        assert!(LossKind::SquaredError.derivatives(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn initial_guesses() {
        assert_eq!(LossKind::SquaredError.initial_guess(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(LossKind::LogLoss.initial_guess(&[0.0, 1.0]), 0.0);

        // Oracle: golden-section search of the empirical loss over constants.
        let ys = [1.0, 1.0, 1.0, 0.0];
        let total = |c: f64| ys.iter().map(|&y| LossKind::LogLoss.value(y, c)).sum::<f64>();
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if total(a) < total(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let searched = 0.5 * (lo + hi);
        let c = LossKind::LogLoss.initial_guess(&ys);
        assert!((c - searched).abs() < 1e-6);
        assert!((c - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_class_initial_guess_is_finite() {
        let c = LossKind::LogLoss.initial_guess(&[1.0f64, 1.0]);
        assert!(c.is_finite());
        assert!((c - ((1.0 - 1e-9) / 1e-9f64).ln()).abs() < 1e-6);
        assert!(LossKind::LogLoss.initial_guess(&[0.0f32; 3]).is_finite());
    }

    #[test]
    fn loss_names_round_trip() {
        for kind in [LossKind::LogLoss, LossKind::SquaredError] {
            assert_eq!(kind.to_string().parse::<LossKind>().unwrap(), kind);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(y in 0u8..2, f in -8.0f64..8.0, t in -50.0f64..50.0) {
            for (kind, target) in [(LossKind::LogLoss, y as f64), (LossKind::SquaredError, t)] {
                let gh = kind.derivatives(&[target], &[f]).unwrap();
                let l = |x: f64| kind.value(target, x);
                let s1 = 1e-5;
                let fd_g = (l(f + s1) - l(f - s1)) / (2.0 * s1);
                let s2 = 1e-4;
                let fd_h = (l(f + s2) - 2.0 * l(f) + l(f - s2)) / (s2 * s2);
                prop_assert!(close(gh.g[0], fd_g, 1e-5), "g {} vs {}", gh.g[0], fd_g);
                prop_assert!(close(gh.h[0], fd_h, 1e-4), "h {} vs {}", gh.h[0], fd_h);
                if kind == LossKind::LogLoss {
                    prop_assert!(gh.h[0] > 0.0 && gh.h[0] <= 0.25);
                }
            }
        }

        #[test]
        fn initial_guess_is_a_minimum(ys in prop::collection::vec(0u8..2, 1..50), ts in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
            for (kind, targets) in [(LossKind::LogLoss, &ys), (LossKind::SquaredError, &ts)] {
                let c = kind.initial_guess(targets);
                let total = |c: f64| targets.iter().map(|&y| kind.value(y, c)).sum::<f64>();
                let base = total(c);
                // Single-class targets sit at the clamp; only the interior direction must not improve.
                let single_class = kind == LossKind::LogLoss && targets.iter().all(|&y| y == targets[0]);
                for d in [-1e-3, 1e-3] {
                    if single_class && (d > 0.0) == (targets[0] == 1.0) {
                        continue;
                    }
                    prop_assert!(total(c + d) >= base - 1e-9 * base.abs().max(1.0));
                }
            }
        }
    }
}
