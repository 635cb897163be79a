//! Outlier detection with a learned outlier representation.
//!
//! Raw features are concatenated with the outputs of many unsupervised
//! outlier scoring functions (kNN distance, LOF and friends). A bagged
//! logistic-regression ensemble trained on class-balanced subsamples of
//! that representation then ranks points by outlier probability. When only
//! a limited prediction-time budget is available, cost-weighted orthogonal
//! matching pursuit plus stability selection picks an affordable subset of
//! scoring functions.
//!
//! ```no_run
//! use bore_core::{data, pipeline};
//!
//! let ds = data::load_csv("data/ionosphere.csv", "label")?;
//! let cfg = pipeline::PipelineConfig::default().with_seed(7);
//! let (model, _) = pipeline::train_model(&ds, &cfg, None)?;
//! let probs = model.predict(ds.features.view())?.probabilities;
//! # Ok::<(), bore_core::Error>(())
//! ```

pub mod budget;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod neighbors;
pub mod osf;
pub mod pipeline;

pub use budget::{CostVector, SelectionTrace, Strategy};
pub use data::{Bag, BagSpec, LabeledDataset, ScaleParams};
pub use error::{Error, Result};
pub use eval::{MetricReport, RocCurve};
pub use model::{BaggedEnsemble, FitOptions, LogisticModel};
pub use neighbors::{Metric, NeighborIndex, NeighborList};
pub use osf::{ColumnKind, ColumnMeta, OsfFamily, OsfScores, OsfSpec, OutlierRepresentation};
pub use pipeline::{ModelFile, OsfGrid, PipelineConfig};
