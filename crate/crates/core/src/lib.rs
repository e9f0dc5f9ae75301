//! Gradient-boosted decision trees with minimal variance row sampling.
//!
//! The library is generic over the floating-point type through [`Scalar`];
//! the `*64` and `*32` aliases below fix it to `f64` or `f32`.

pub mod boost;
pub mod data;
pub mod error;
pub mod lab;
pub mod loss;
pub mod metrics;
pub mod sampling;
pub mod scalar;
pub mod tree;

pub use boost::{train, BoostParams, Ensemble, Order, OutputKind, TrainOutput};
pub use data::{load_csv, load_features_csv, quantize, BinnedDataset, CsvOptions, MissingPolicy, RawDataset, TargetColumn};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use metrics::{evaluate, roc_auc, EvalReport, Metric};
pub use sampling::{SamplingConfig, Strategy};
pub use scalar::Scalar;
pub use tree::{Tree, TreeParams};

pub type RawDataset64 = RawDataset<f64>;
pub type BinnedDataset64 = BinnedDataset<f64>;
pub type BoostParams64 = BoostParams<f64>;
pub type SamplingConfig64 = SamplingConfig<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type Tree64 = Tree<f64>;
pub type LabScenario64 = lab::LabScenario<f64>;

pub type RawDataset32 = RawDataset<f32>;
pub type BinnedDataset32 = BinnedDataset<f32>;
pub type BoostParams32 = BoostParams<f32>;
pub type SamplingConfig32 = SamplingConfig<f32>;
pub type Ensemble32 = Ensemble<f32>;
pub type Tree32 = Tree<f32>;
pub type LabScenario32 = lab::LabScenario<f32>;
