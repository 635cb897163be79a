use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bore_core::budget::DEFAULT_RANDOM_DRAWS;
use bore_core::{BagSpec, OsfGrid, PipelineConfig, Strategy};
use clap::Args;
use serde::Deserialize;

use crate::UsageError;

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Structured TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Name of the 0/1 label column.
    #[arg(long = "label-col", global = true)]
    pub label_col: Option<String>,
    /// Column holding row identifiers (rows are numbered otherwise).
    #[arg(long = "id-col", global = true)]
    pub id_col: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of balanced bags.
    #[arg(long, global = true)]
    pub bags: Option<usize>,
    /// Share of labeled outliers drawn into each bag.
    #[arg(long = "outlier-frac", global = true)]
    pub outlier_frac: Option<f64>,
    #[arg(long = "train-fraction", global = true)]
    pub train_fraction: Option<f64>,
    /// `default` or `subspace:<count>`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// On-disk config file layout.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub label_col: Option<String>,
    pub id_col: Option<String>,
    pub seed: Option<u64>,
    pub bags: Option<usize>,
    pub outlier_frac: Option<f64>,
    pub train_fraction: Option<f64>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub cost_pool: Option<Vec<f64>>,
    pub budgets: Option<Vec<f64>>,
    pub budget_fractions: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub random_draws: Option<usize>,
    pub strategies: Option<Vec<String>>,
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub label_col: String,
    pub id_col: Option<String>,
    pub out: PathBuf,
    pub pipeline: PipelineConfig,
    pub budgets: Vec<f64>,
    pub budget_fractions: Vec<f64>,
    pub replicates: usize,
    pub random_draws: usize,
    pub strategies: Vec<Strategy>,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = args.seed.or(file.seed).unwrap_or(0);
        let defaults = PipelineConfig::default();
        let grid = match args.grid.as_ref().or(file.grid.as_ref()) {
            Some(g) => g.parse::<OsfGrid>().map_err(|e| UsageError(e.to_string()))?,
            None => OsfGrid::Default,
        };
        let mut pipeline = PipelineConfig {
            train_fraction: args
                .train_fraction
                .or(file.train_fraction)
                .unwrap_or(defaults.train_fraction),
            bags: BagSpec {
                num_bags: args.bags.or(file.bags).unwrap_or(defaults.bags.num_bags),
                outlier_fraction: args
                    .outlier_frac
                    .or(file.outlier_frac)
                    .unwrap_or(defaults.bags.outlier_fraction),
                seed,
            },
            grid,
            cost_pool: file.cost_pool.clone().unwrap_or(defaults.cost_pool),
            ..defaults
        }
        .with_seed(seed);
        if let Some(it) = file.max_iterations {
            pipeline.fit.max_iterations = it;
        }
        if let Some(tol) = file.gradient_tolerance {
            pipeline.fit.gradient_tolerance = tol;
        }
        pipeline.validate().map_err(|e| UsageError(e.to_string()))?;

        let strategies = match &file.strategies {
            Some(names) => names
                .iter()
                .map(|s| s.parse::<Strategy>().map_err(|e| UsageError(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
            None => Strategy::ALL.to_vec(),
        };
        let cfg = RunConfig {
            data: args.data.clone().or(file.data),
            label_col: args
                .label_col
                .clone()
                .or(file.label_col)
                .unwrap_or_else(|| "label".into()),
            id_col: args.id_col.clone().or(file.id_col),
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            pipeline,
            budgets: file.budgets.unwrap_or_default(),
            budget_fractions: file.budget_fractions.unwrap_or_default(),
            replicates: file.replicates.unwrap_or(20),
            random_draws: file.random_draws.unwrap_or(DEFAULT_RANDOM_DRAWS),
            strategies,
        };
        Ok(cfg)
    }

    pub fn data_path(&self) -> anyhow::Result<&Path> {
        match &self.data {
            Some(p) => Ok(p),
            None => bail!(UsageError(
                "no input data; pass --data or set `data` in the config".into()
            )),
        }
    }

    pub fn ensure_out_dir(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))
    }
}
