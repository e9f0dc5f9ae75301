//! Per-iteration row sampling.
//!
//! Every strategy yields a [`SampleSelection`]: the chosen rows, an
//! inverse-probability weight per chosen row, and the inclusion probabilities
//! that produced them. The tree builder only ever sees weighted rows, so all
//! strategies share one code path downstream.

mod threshold;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::GradHess;
use crate::scalar::Scalar;

pub use threshold::{
    expected_sample_size, threshold_by_partition, threshold_by_partition_counted,
    threshold_by_sort, threshold_by_sort_counted,
};

pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Probability given to rows whose regularized gradient is exactly zero when
/// the budget is already spent on the positive rows.
pub const ZERO_PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    None,
    Sgb,
    Goss,
    Mvs,
    MvsAdaptive,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "sgb" => Ok(Strategy::Sgb),
            "goss" => Ok(Strategy::Goss),
            "mvs" => Ok(Strategy::Mvs),
            "mvs-adaptive" | "mvs_adaptive" => Ok(Strategy::MvsAdaptive),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampling strategy {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Sgb => "sgb",
            Strategy::Goss => "goss",
            Strategy::Mvs => "mvs",
            Strategy::MvsAdaptive => "mvs-adaptive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig<T> {
    pub strategy: Strategy,
    /// Expected fraction of rows per iteration. Ignored by GOSS, which uses
    /// `top_rate + other_rate`.
    pub sample_rate: T,
    /// Hessian weight inside the regularized gradient (fixed-λ MVS only).
    pub lambda: T,
    pub top_rate: T,
    pub other_rate: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SamplingConfig<T> {
    fn default() -> Self {
        SamplingConfig {
            strategy: Strategy::None,
            sample_rate: T::one(),
            lambda: T::lit(DEFAULT_LAMBDA),
            top_rate: T::lit(0.2),
            other_rate: T::lit(0.1),
            seed: 0,
        }
    }
}

impl<T: Scalar> SamplingConfig<T> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn sgb(sample_rate: T, seed: u64) -> Self {
        SamplingConfig {
            strategy: Strategy::Sgb,
            sample_rate,
            seed,
            ..Self::default()
        }
    }

    pub fn mvs(sample_rate: T, lambda: T, seed: u64) -> Self {
        SamplingConfig {
            strategy: Strategy::Mvs,
            sample_rate,
            lambda,
            seed,
            ..Self::default()
        }
    }

    pub fn mvs_adaptive(sample_rate: T, seed: u64) -> Self {
        SamplingConfig {
            strategy: Strategy::MvsAdaptive,
            sample_rate,
            seed,
            ..Self::default()
        }
    }

    pub fn goss(top_rate: T, other_rate: T, seed: u64) -> Self {
        SamplingConfig {
            strategy: Strategy::Goss,
            sample_rate: top_rate + other_rate,
            top_rate,
            other_rate,
            seed,
            ..Self::default()
        }
    }

    pub fn effective_rate(&self) -> T {
        match self.strategy {
            Strategy::None => T::one(),
            Strategy::Goss => self.top_rate + self.other_rate,
            _ => self.sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit_open = |x: T| x > T::zero() && x < T::one();
        match self.strategy {
            Strategy::None => Ok(()),
            Strategy::Goss => {
                if !unit_open(self.top_rate) || !unit_open(self.other_rate) {
                    return Err(Error::InvalidParameter(
                        "goss rates must lie in (0, 1)".into(),
                    ));
                }
                if self.top_rate + self.other_rate > T::one() + T::epsilon() {
                    return Err(Error::InvalidParameter(
                        "top_rate + other_rate must not exceed 1".into(),
                    ));
                }
                Ok(())
            }
            _ => {
                if !(self.sample_rate > T::zero() && self.sample_rate <= T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "sample rate must lie in (0, 1], got {}",
                        self.sample_rate
                    )));
                }
                if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must be a nonnegative real, got {}",
                        self.lambda
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Rows chosen for one tree, with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSelection<T> {
    /// Strictly increasing row ids.
    pub indices: Vec<usize>,
    /// Weight of `indices[k]`.
    pub weights: Vec<T>,
    /// Inclusion probability of every row of the dataset.
    pub probs: Vec<T>,
    /// MVS threshold `μ`.
    pub threshold: Option<T>,
    /// λ actually used by MVS this iteration.
    pub lambda: Option<T>,
}

impl<T: Scalar> SampleSelection<T> {
    /// Every row with weight one.
    pub fn full(n: usize) -> Self {
        SampleSelection {
            indices: (0..n).collect(),
            weights: vec![T::one(); n],
            probs: vec![T::one(); n],
            threshold: None,
            lambda: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `sqrt(g_i² + λ h_i²)` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedGradients<T>(pub Vec<T>);

impl<T> Deref for RegularizedGradients<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

pub fn regularized_abs<T: Scalar>(gh: &GradHess<T>, lambda: T) -> RegularizedGradients<T> {
    let values = if lambda == T::zero() {
        gh.g.iter().map(|g| g.abs()).collect()
    } else {
        gh.g
            .iter()
            .zip(&gh.h)
            .map(|(&g, &h)| (g * g + lambda * h * h).sqrt())
            .collect()
    };
    RegularizedGradients(values)
}

/// Squared root-leaf value `(Σg / Σh)²` of the current iteration.
pub fn adaptive_lambda<T: Scalar>(gh: &GradHess<T>) -> T {
    let sum_g: T = gh.g.iter().copied().sum();
    let sum_h: T = gh.h.iter().copied().sum();
    if sum_h == T::zero() {
        return T::zero();
    }
    let c = sum_g / sum_h;
    c * c
}

/// `p_i = min(1, v_i / μ)`, with the degenerate cases described in [`threshold_by_sort`].
pub fn mvs_probabilities<T: Scalar>(values: &[T], rate: T, mu: T) -> Vec<T> {
    let n = values.len();
    if mu.is_infinite() {
        return vec![rate; n];
    }
    let positives = values.iter().filter(|&&v| v > T::zero()).count();
    let target = rate * T::from_count(n);
    let zero_prob = if target > T::from_count(positives) {
        // Positive rows are all taken; spread what is left of the budget.
        (target - T::from_count(positives)) / T::from_count(n - positives)
    } else {
        T::lit(ZERO_PROBABILITY_FLOOR)
    };
    values
        .iter()
        .map(|&v| {
            if v > T::zero() {
                (v / mu).min(T::one())
            } else {
                zero_prob
            }
        })
        .collect()
}

/// Independent Bernoulli draw per row, in row order; weight `1 / p_i`.
pub fn bernoulli_select<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> (Vec<usize>, Vec<T>) {
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        let u: f64 = rng.random();
        if u < p.as_f64() {
            indices.push(i);
            weights.push(if p >= T::one() { T::one() } else { T::one() / p });
        }
    }
    (indices, weights)
}

/// Stages of one MVS selection, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvsStage {
    Lambda,
    RegularizedGradients,
    Threshold,
    Probabilities,
    Weights,
    Select,
}

pub fn mvs_select<T: Scalar, R: Rng + ?Sized>(
    gh: &GradHess<T>,
    cfg: &SamplingConfig<T>,
    rng: &mut R,
) -> SampleSelection<T> {
    mvs_select_traced(gh, cfg, rng, &mut |_| {})
}

/// [`mvs_select`] reporting each stage to `trace` as it runs.
pub fn mvs_select_traced<T: Scalar, R: Rng + ?Sized>(
    gh: &GradHess<T>,
    cfg: &SamplingConfig<T>,
    rng: &mut R,
    trace: &mut dyn FnMut(MvsStage),
) -> SampleSelection<T> {
    let lambda = match cfg.strategy {
        Strategy::MvsAdaptive => adaptive_lambda(gh),
        _ => cfg.lambda,
    };
    trace(MvsStage::Lambda);
    let reg = regularized_abs(gh, lambda);
    trace(MvsStage::RegularizedGradients);
    let mu = threshold_by_partition(&reg, cfg.sample_rate, rng);
    trace(MvsStage::Threshold);
    let probs = mvs_probabilities(&reg, cfg.sample_rate, mu);
    trace(MvsStage::Probabilities);
    // Weights are fixed by the probabilities; selection only picks which rows keep them.
    trace(MvsStage::Weights);
    let (indices, weights) = bernoulli_select(&probs, rng);
    trace(MvsStage::Select);
    SampleSelection {
        indices,
        weights,
        probs,
        threshold: Some(mu),
        lambda: Some(lambda),
    }
}

/// `⌈rate · n⌉`, ignoring representation error just above an integer.
fn ceil_count<T: Scalar>(rate: T, n: usize) -> usize {
    let x = rate.as_f64() * n as f64;
    ((x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize).min(n)
}

pub fn goss_select<T: Scalar, R: Rng + ?Sized>(
    gh: &GradHess<T>,
    cfg: &SamplingConfig<T>,
    rng: &mut R,
) -> SampleSelection<T> {
    let n = gh.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        gh.g[b]
            .abs()
            .partial_cmp(&gh.g[a].abs())
            .expect("finite gradients")
            .then(a.cmp(&b))
    });
    let n_top = ceil_count(cfg.top_rate, n);
    let rest = &order[n_top..];
    let n_other = ceil_count(cfg.other_rate, n).min(rest.len());
    let other_weight = (T::one() - cfg.top_rate) / cfg.other_rate;

    let mut probs = vec![T::zero(); n];
    let mut weight_of = vec![T::zero(); n];
    for &i in &order[..n_top] {
        probs[i] = T::one();
        weight_of[i] = T::one();
    }
    if !rest.is_empty() {
        let p_rest = T::from_count(n_other) / T::from_count(rest.len());
        for &i in rest {
            probs[i] = p_rest;
        }
        for j in index::sample(rng, rest.len(), n_other) {
            weight_of[rest[j]] = other_weight;
        }
    }
    let indices: Vec<usize> = (0..n).filter(|&i| weight_of[i] > T::zero()).collect();
    let weights = indices.iter().map(|&i| weight_of[i]).collect();
    SampleSelection {
        indices,
        weights,
        probs,
        threshold: None,
        lambda: None,
    }
}

/// Uniform draw of `round(s·N)` rows without replacement, each weighted `1/s`.
pub fn sgb_select<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    cfg: &SamplingConfig<T>,
    rng: &mut R,
) -> SampleSelection<T> {
    let rate = cfg.sample_rate;
    let k = ((rate.as_f64() * n as f64).round() as usize).clamp(n.min(1), n);
    let mut indices = index::sample(rng, n, k).into_vec();
    indices.sort_unstable();
    let weight = if rate >= T::one() { T::one() } else { T::one() / rate };
    SampleSelection {
        weights: vec![weight; indices.len()],
        indices,
        probs: vec![rate.min(T::one()); n],
        threshold: None,
        lambda: None,
    }
}

/// Generator for one boosting iteration: a pure function of `(seed, iteration)`.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Dispatches on the configured strategy.
pub fn select<T: Scalar, R: Rng + ?Sized>(
    gh: &GradHess<T>,
    cfg: &SamplingConfig<T>,
    rng: &mut R,
) -> SampleSelection<T> {
    match cfg.strategy {
        Strategy::None => SampleSelection::full(gh.len()),
        Strategy::Sgb => sgb_select(gh.len(), cfg, rng),
        Strategy::Goss => goss_select(gh, cfg, rng),
        Strategy::Mvs | Strategy::MvsAdaptive => mvs_select(gh, cfg, rng),
    }
}
