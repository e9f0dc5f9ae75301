//! The boosting loop.
//!
//! Each iteration computes derivatives on the full dataset, draws a weighted
//! subsample, fits one tree to it and appends the tree to the ensemble.

mod model;

use std::fmt;
use std::str::FromStr;

use crate::data::BinnedDataset;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::sampling::{self, iteration_rng, MvsStage, SamplingConfig, Strategy};
use crate::scalar::Scalar;
use crate::tree::{build_tree, TreeParams};

pub use model::{Ensemble, OutputKind, MODEL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Trees fit with every hessian replaced by one.
    First,
    /// Trees fit with the true hessians.
    Second,
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Order::First),
            "second" => Ok(Order::Second),
            other => Err(Error::InvalidParameter(format!("unknown order {other:?}"))),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::First => "first",
            Order::Second => "second",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams<T> {
    pub n_iterations: usize,
    pub learning_rate: T,
    pub order: Order,
    pub loss: LossKind,
    pub tree: TreeParams<T>,
    pub sampling: SamplingConfig<T>,
}

impl<T: Scalar> Default for BoostParams<T> {
    fn default() -> Self {
        BoostParams {
            n_iterations: 100,
            learning_rate: T::lit(0.1),
            order: Order::Second,
            loss: LossKind::LogLoss,
            tree: TreeParams::default(),
            sampling: SamplingConfig::none(),
        }
    }
}

impl<T: Scalar> BoostParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidParameter("n_iterations must be at least 1".into()));
        }
        if !(self.learning_rate > T::zero() && self.learning_rate <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        self.tree.validate()?;
        self.sampling.validate()
    }
}

/// One step of the training loop, reported to a [`TrainObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    InitialGuess,
    Predict,
    Derivatives,
    Lambda,
    RegularizedGradients,
    Threshold,
    Probabilities,
    Weights,
    Select,
    TrainTree,
    Append,
}

impl From<MvsStage> for Step {
    fn from(stage: MvsStage) -> Self {
        match stage {
            MvsStage::Lambda => Step::Lambda,
            MvsStage::RegularizedGradients => Step::RegularizedGradients,
            MvsStage::Threshold => Step::Threshold,
            MvsStage::Probabilities => Step::Probabilities,
            MvsStage::Weights => Step::Weights,
            MvsStage::Select => Step::Select,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog<T> {
    pub iteration: usize,
    pub sampled: usize,
    pub threshold: Option<T>,
    pub lambda: Option<T>,
    pub train_loss: T,
}

/// Hook into the training loop; both methods default to doing nothing.
pub trait TrainObserver<T> {
    fn step(&mut self, _iteration: usize, _step: Step) {}
    fn iteration(&mut self, _log: &IterationLog<T>) {}
}

impl<T> TrainObserver<T> for () {}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub ensemble: Ensemble<T>,
    pub log: Vec<IterationLog<T>>,
}

pub fn train<T: Scalar>(
    binned: &BinnedDataset<T>,
    targets: &[T],
    params: &BoostParams<T>,
) -> Result<TrainOutput<T>> {
    train_observed(binned, targets, params, &mut ())
}

pub fn train_observed<T: Scalar>(
    binned: &BinnedDataset<T>,
    targets: &[T],
    params: &BoostParams<T>,
    observer: &mut dyn TrainObserver<T>,
) -> Result<TrainOutput<T>> {
    params.validate()?;
    let n = binned.n_rows();
    if targets.len() != n {
        return Err(Error::LengthMismatch {
            what: "targets",
            found: targets.len(),
            expected: n,
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(row) = targets.iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter(format!("target in row {row} is not finite")));
    }
    if params.loss == LossKind::LogLoss {
        if let Some(row) = targets.iter().position(|&y| y != T::zero() && y != T::one()) {
            return Err(Error::NonBinaryTarget {
                row,
                value: targets[row].as_f64(),
            });
        }
    }

    let initial = params.loss.initial_guess(targets);
    observer.step(0, Step::InitialGuess);
    let mut ensemble = Ensemble::new(
        initial,
        params.learning_rate,
        params.loss,
        binned.bin_edges.clone(),
    );
    let mut predictions = vec![initial; n];
    let mut log = Vec::with_capacity(params.n_iterations);

    for it in 0..params.n_iterations {
        observer.step(it, Step::Predict);
        let mut gh = params.loss.derivatives(targets, &predictions)?;
        if let Some(row) = gh
            .g
            .iter()
            .zip(&gh.h)
            .position(|(g, h)| !g.is_finite() || !h.is_finite())
        {
            return Err(Error::NonFiniteDerivative { iteration: it, row });
        }
        if params.order == Order::First {
            gh = gh.unit_hessians();
        }
        observer.step(it, Step::Derivatives);

        let cfg = &params.sampling;
        let mut rng = iteration_rng(cfg.seed, it as u64);
        let selection = match cfg.strategy {
            Strategy::Mvs | Strategy::MvsAdaptive => {
                sampling::mvs_select_traced(&gh, cfg, &mut rng, &mut |stage| {
                    observer.step(it, stage.into())
                })
            }
            _ => {
                let sel = sampling::select(&gh, cfg, &mut rng);
                observer.step(it, Step::Select);
                sel
            }
        };

        let tree = build_tree(&selection, binned, &gh, &params.tree);
        observer.step(it, Step::TrainTree);
        for (i, p) in predictions.iter_mut().enumerate() {
            *p = *p + params.learning_rate * tree.predict_binned(binned, i);
        }
        ensemble.trees.push(tree);
        observer.step(it, Step::Append);

        let entry = IterationLog {
            iteration: it,
            sampled: selection.len(),
            threshold: selection.threshold,
            lambda: selection.lambda,
            train_loss: params.loss.mean_value(targets, &predictions),
        };
        observer.iteration(&entry);
        log.push(entry);
    }
    Ok(TrainOutput { ensemble, log })
}

#[cfg(test)]
mod tests;
