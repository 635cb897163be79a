//! End-to-end glue: featurization of a split dataset, training, and the
//! persisted model file used to score new data.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::budget::{apply_costs, assign_costs, train_bore_budget, SelectionTrace, DEFAULT_COST_POOL};
use crate::data::{split_indices, BagSpec, LabeledDataset, ScaleParams};
use crate::error::{Error, Result};
use crate::model::{train_bore, BaggedEnsemble, FitOptions};
use crate::osf::{
    build_representation, default_osf_grid, score_external_subset, subspace_osf_grid, OsfSpec, OutlierRepresentation,
};

/// Version written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Which scoring functions make up the representation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OsfGrid {
    /// Every family crossed with the default neighborhood sizes.
    #[default]
    Default,
    /// Feature bagging: `count` random column subsets.
    Subspace { count: usize },
}

impl OsfGrid {
    pub fn specs(&self, n_train: usize, k_raw: usize, seed: u64) -> Result<Vec<OsfSpec>> {
        match *self {
            OsfGrid::Default => Ok(default_osf_grid(n_train)),
            OsfGrid::Subspace { count } => subspace_osf_grid(n_train, k_raw, count, seed),
        }
    }
}

impl std::str::FromStr for OsfGrid {
    type Err = Error;

    /// `default` or `subspace:<count>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "default" {
            return Ok(OsfGrid::Default);
        }
        s.strip_prefix("subspace:")
            .and_then(|c| c.parse().ok())
            .filter(|&count: &usize| count > 0)
            .map(|count| OsfGrid::Subspace { count })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grid {s:?}; use default or subspace:<count>")))
    }
}

/// Knobs of the whole pipeline. Defaults follow the standard protocol:
/// 60/40 split, 50 bags with 70% of the outliers each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub bags: BagSpec,
    pub grid: OsfGrid,
    pub fit: FitOptions,
    pub cost_pool: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            seed: 0,
            bags: BagSpec::default(),
            grid: OsfGrid::Default,
            fit: FitOptions::default(),
            cost_pool: DEFAULT_COST_POOL.to_vec(),
        }
    }
}

impl PipelineConfig {
    /// Same seed everywhere unless overridden: the split, the bags, the
    /// subspace draw and the cost draw each derive their own stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.bags.seed = seed;
        self
    }

    pub fn grid_seed(&self) -> u64 {
        self.seed.wrapping_add(0x9e37_79b9)
    }

    pub fn cost_seed(&self) -> u64 {
        self.seed.wrapping_add(0x7f4a_7c15)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.bags.validate()?;
        self.fit.validate()?;
        if self.cost_pool.is_empty() {
            return Err(Error::InvalidArgument("cost pool is empty".into()));
        }
        Ok(())
    }
}

/// Scaling plus representation fitted on training rows.
#[derive(Debug, Clone)]
pub struct FittedRepresentation {
    pub scale: ScaleParams,
    /// Training rows after scaling; the neighborhood pool for new points.
    pub reference: Array2<f64>,
    pub rep: OutlierRepresentation,
}

impl FittedRepresentation {
    pub fn fit(train: &LabeledDataset, grid: &OsfGrid, grid_seed: u64) -> Result<Self> {
        let scale = ScaleParams::fit(train.features.view())?;
        let reference = scale.apply(train.features.view())?;
        let specs = grid.specs(train.n_rows(), train.n_features(), grid_seed)?;
        let rep = build_representation(reference.view(), &train.feature_names, &specs)?;
        Ok(Self { scale, reference, rep })
    }

    /// Representation of new raw rows (all columns evaluated).
    pub fn transform(&self, raw: ArrayView2<'_, f64>) -> Result<OutlierRepresentation> {
        let scaled = self.scale.apply(raw)?;
        let m = score_external_subset(&self.rep.columns, self.reference.view(), scaled.view(), None)?;
        Ok(OutlierRepresentation {
            matrix: m.matrix,
            columns: self.rep.columns.clone(),
        })
    }
}

/// Train and test parts of a dataset mapped into one representation.
#[derive(Debug, Clone)]
pub struct Featurized {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub fitted: FittedRepresentation,
    pub rep_test: OutlierRepresentation,
}

impl Featurized {
    pub fn rep_train(&self) -> &OutlierRepresentation {
        &self.fitted.rep
    }
}

/// Stratified split, scaling and scoring fitted on the training part, test
/// part scored against the training rows.
pub fn featurize(data: &LabeledDataset, cfg: &PipelineConfig) -> Result<Featurized> {
    cfg.validate()?;
    let (tr, te) = split_indices(&data.labels, cfg.train_fraction, cfg.seed)?;
    let train = data.select(&tr);
    let test = data.select(&te);
    let fitted = FittedRepresentation::fit(&train, &cfg.grid, cfg.grid_seed())?;
    let rep_test = fitted.transform(test.features.view())?;
    Ok(Featurized {
        train,
        test,
        fitted,
        rep_test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub bags: u64,
    pub grid: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<u64>,
}

/// Everything needed to score new raw rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub scale: ScaleParams,
    /// Scaled training rows, the neighborhood pool for scoring new points.
    pub reference_rows: Vec<Vec<f64>>,
    pub ensemble: BaggedEnsemble,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub train_fraction: f64,
    pub seeds: Seeds,
}

/// Probabilities for new rows plus how many scoring columns were computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub osf_evaluated: usize,
}

/// Fits the representation on `train` and trains the ensemble. With a
/// budget, costs are drawn from the pool and the budgeted trainer is used.
pub fn train_model(
    train: &LabeledDataset,
    cfg: &PipelineConfig,
    budget: Option<f64>,
) -> Result<(ModelFile, Option<SelectionTrace>)> {
    cfg.validate()?;
    let mut fitted = FittedRepresentation::fit(train, &cfg.grid, cfg.grid_seed())?;
    let (ensemble, trace, cost_seed) = match budget {
        None => (
            train_bore(&fitted.rep, &train.labels, &cfg.bags, &cfg.fit, None)?,
            None,
            None,
        ),
        Some(c) => {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!("budget must be nonnegative, got {c}")));
            }
            let costs = assign_costs(&fitted.rep.columns, &cfg.cost_pool, cfg.cost_seed())?;
            apply_costs(&mut fitted.rep.columns, &costs);
            let (ens, trace) =
                train_bore_budget(&fitted.rep, &train.labels, &cfg.bags, &costs.with_budget(c), &cfg.fit)?;
            (ens, Some(trace), Some(cfg.cost_seed()))
        }
    };
    let model = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: train.feature_names.clone(),
        scale: fitted.scale,
        reference_rows: fitted.reference.rows().into_iter().map(|r| r.to_vec()).collect(),
        ensemble,
        budget,
        train_fraction: cfg.train_fraction,
        seeds: Seeds {
            split: cfg.seed,
            bags: cfg.bags.seed,
            grid: cfg.grid_seed(),
            costs: cost_seed,
        },
    };
    Ok((model, trace))
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let k = self.feature_names.len();
        if self.scale.n_columns() != k || self.reference_rows.iter().any(|r| r.len() != k) {
            return Err(Error::Model(
                "scaling or reference rows disagree with feature names".into(),
            ));
        }
        let d = self.ensemble.d();
        if self.ensemble.models.iter().any(|m| m.d() != d) {
            return Err(Error::Model("model dimensions disagree with columns".into()));
        }
        Ok(())
    }

    pub fn reference(&self) -> Array2<f64> {
        let k = self.feature_names.len();
        let flat: Vec<f64> = self.reference_rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.reference_rows.len(), k), flat).expect("checked row lengths")
    }

    /// Reorders the columns of `raw` (named `names`) into the model's
    /// feature order.
    pub fn align(&self, raw: ArrayView2<'_, f64>, names: &[String]) -> Result<Array2<f64>> {
        let mut positions = Vec::with_capacity(self.feature_names.len());
        let mut missing = Vec::new();
        for f in &self.feature_names {
            match names.iter().position(|n| n == f) {
                Some(p) => positions.push(p),
                None => missing.push(f.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::SchemaMismatch(missing));
        }
        Ok(raw.select(Axis(1), &positions))
    }

    /// Scores raw rows in the model's feature order. Only scoring columns
    /// the ensemble can use are computed.
    pub fn predict(&self, raw: ArrayView2<'_, f64>) -> Result<Prediction> {
        let scaled = self.scale.apply(raw)?;
        let used = self.ensemble.used_columns();
        let reference = self.reference();
        let ext = score_external_subset(&self.ensemble.columns, reference.view(), scaled.view(), Some(&used))?;
        Ok(Prediction {
            probabilities: self.ensemble.predict_proba(ext.matrix.view())?,
            osf_evaluated: ext.osf_evaluated,
        })
    }
}
