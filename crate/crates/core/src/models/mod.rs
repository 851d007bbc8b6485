//! The five classifiers behind one fit / predict-probability contract.
//!
//! Every pipeline z-scores its continuous columns with parameters fitted on
//! the training rows it sees, then fits one of:
//!
//! | kind | model                                   | class weights |
//! |------|-----------------------------------------|---------------|
//! | LR   | L2 logistic regression, C = 1           | balanced      |
//! | DT   | CART, depth 4, 5 samples per leaf       | balanced      |
//! | RF   | 200 bagged CART trees, sqrt(p) features | balanced      |
//! | GBT  | 200 Newton-boosted depth-3 trees, lr 0.1| none          |
//! | KNN  | k = 7, inverse-distance vote            | none          |
//!
//! Hyperparameters come from [`ModelSpec::fixed`]; the only knob exposed to
//! configuration is the boosting subsample fractions.

pub mod boost;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod standardize;
pub mod tree;

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Substream;
use boost::{BoostParams, BoostedModel};
use forest::{ForestModel, ForestParams};
use knn::{KnnModel, KnnParams};
use logistic::{LogisticModel, LogisticParams};
use standardize::{fit_standardizer, ColumnKind, StandardizerParams};
use tree::{Entry, Gini, Grower, Stats, Tree};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("degenerate fold: training labels contain a single class ({n_pos} positive, {n_neg} negative)")]
    DegenerateFold { n_pos: usize, n_neg: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("column mismatch: pipeline expects {expected} features, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("cannot fit on an empty training set")]
    EmptyTrainingSet,
    #[error("invalid pipeline file: {0}")]
    Persist(#[from] serde_json::Error),
    #[error("unsupported pipeline format `{format}` version {version}")]
    UnsupportedFormat { format: String, version: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "GBT", alias = "XGB")]
    Gbt,
    #[serde(rename = "KNN")]
    Knn,
}

impl ModelKind {
    /// Table order.
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::Dt,
        ModelKind::Rf,
        ModelKind::Gbt,
        ModelKind::Knn,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::Lr => "LR",
            Self::Dt => "DT",
            Self::Rf => "RF",
            Self::Gbt => "GBT",
            Self::Knn => "KNN",
        }
    }

    /// Row label in the results tables; boosting is shown as "XGB".
    pub fn table_label(self) -> &'static str {
        match self {
            Self::Gbt => "XGB",
            other => other.code(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_uppercase().as_str() {
            "LR" => Some(Self::Lr),
            "DT" => Some(Self::Dt),
            "RF" => Some(Self::Rf),
            "GBT" | "XGB" => Some(Self::Gbt),
            "KNN" => Some(Self::Knn),
            _ => None,
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub balanced: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_samples_leaf: 5,
            balanced: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelSpec {
    #[serde(rename = "LR")]
    Logistic(LogisticParams),
    #[serde(rename = "DT")]
    DecisionTree(TreeParams),
    #[serde(rename = "RF")]
    RandomForest(ForestParams),
    #[serde(rename = "GBT")]
    GradientBoosting(BoostParams),
    #[serde(rename = "KNN")]
    Knn(KnnParams),
}

impl ModelSpec {
    /// The fixed, a-priori hyperparameters for a model kind.
    pub fn fixed(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lr => Self::Logistic(LogisticParams::default()),
            ModelKind::Dt => Self::DecisionTree(TreeParams::default()),
            ModelKind::Rf => Self::RandomForest(ForestParams::default()),
            ModelKind::Gbt => Self::GradientBoosting(BoostParams::default()),
            ModelKind::Knn => Self::Knn(KnnParams::default()),
        }
    }

    /// Overrides the boosting row/column subsample fractions; other kinds are
    /// returned unchanged.
    pub fn with_boost_subsample(self, row: f64, col: f64) -> Self {
        match self {
            Self::GradientBoosting(p) => Self::GradientBoosting(BoostParams {
                row_subsample: row,
                col_subsample: col,
                ..p
            }),
            other => other,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Logistic(_) => ModelKind::Lr,
            Self::DecisionTree(_) => ModelKind::Dt,
            Self::RandomForest(_) => ModelKind::Rf,
            Self::GradientBoosting(_) => ModelKind::Gbt,
            Self::Knn(_) => ModelKind::Knn,
        }
    }
}

/// Per-class sample weights `n / (2 n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_pos: f64,
    pub w_neg: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        w_pos: 1.0,
        w_neg: 1.0,
    };

    pub fn for_label(&self, y: u8) -> f64 {
        if y == 1 {
            self.w_pos
        } else {
            self.w_neg
        }
    }
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    (n_pos, labels.len() - n_pos)
}

pub fn compute_class_weights(labels: &[u8]) -> Result<ClassWeights, ModelError> {
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(ModelError::DegenerateFold { n_pos, n_neg });
    }
    let n = labels.len() as f64;
    Ok(ClassWeights {
        w_pos: n / (2.0 * n_pos as f64),
        w_neg: n / (2.0 * n_neg as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedModel {
    #[serde(rename = "LR")]
    Logistic(LogisticModel),
    #[serde(rename = "DT")]
    DecisionTree(Tree),
    #[serde(rename = "RF")]
    RandomForest(ForestModel),
    #[serde(rename = "GBT")]
    GradientBoosting(BoostedModel),
    #[serde(rename = "KNN")]
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: ModelSpec,
    pub standardizer: StandardizerParams,
    pub model: FittedModel,
}

pub(crate) fn fit_tree(
    x: ArrayView2<f64>,
    y: &[u8],
    weights: &ClassWeights,
    params: &TreeParams,
) -> Tree {
    let entries = y
        .iter()
        .enumerate()
        .map(|(row, &label)| {
            let w = weights.for_label(label);
            Entry {
                row,
                stats: Stats {
                    a: if label == 1 { w } else { 0.0 },
                    b: if label == 1 { 0.0 } else { w },
                    count: 1,
                },
            }
        })
        .collect();
    Grower {
        x,
        criterion: &Gini {
            min_samples_leaf: params.min_samples_leaf,
        },
        max_depth: params.max_depth,
        features: (0..x.ncols()).collect(),
        sampler: None,
    }
    .grow(entries)
}

fn check_finite(x: ArrayView2<f64>) -> Result<(), ModelError> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Fits the model part on already-standardized features.
pub fn fit_model(
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    y: &[u8],
    stream: Substream,
) -> Result<FittedModel, ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::LabelMismatch {
            labels: y.len(),
            rows: x.nrows(),
        });
    }
    if y.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    check_finite(x)?;
    let balanced = compute_class_weights(y)?;
    let pick = |on: bool| if on { balanced } else { ClassWeights::UNIT };
    Ok(match spec {
        ModelSpec::Logistic(p) => FittedModel::Logistic(logistic::fit(x, y, &pick(p.balanced), p)),
        ModelSpec::DecisionTree(p) => FittedModel::DecisionTree(fit_tree(x, y, &pick(p.balanced), p)),
        ModelSpec::RandomForest(p) => {
            FittedModel::RandomForest(forest::fit(x, y, &pick(p.tree.balanced), p, stream))
        }
        ModelSpec::GradientBoosting(p) => FittedModel::GradientBoosting(boost::fit(x, y, p, stream)),
        ModelSpec::Knn(p) => FittedModel::Knn(KnnModel::fit(x, y, p)),
    })
}

/// Fits standardizer and model on the given training rows only.
pub fn fit_pipeline(
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    y: &[u8],
    stream: Substream,
) -> Result<FittedPipeline, ModelError> {
    check_finite(x)?;
    let kinds = ColumnKind::infer_all(x);
    let standardizer = fit_standardizer(x, &kinds);
    let z = standardizer.apply(x);
    let model = fit_model(spec, z.view(), y, stream)?;
    Ok(FittedPipeline {
        spec: spec.clone(),
        standardizer,
        model,
    })
}

impl FittedModel {
    pub fn predict_standardized(&self, z: ArrayView2<f64>) -> Vec<f64> {
        z.rows()
            .into_iter()
            .map(|row| match self {
                Self::Logistic(m) => m.predict_row(row),
                Self::DecisionTree(t) => t.predict_row(row),
                Self::RandomForest(m) => m.predict_row(row),
                Self::GradientBoosting(m) => m.predict_row(row),
                Self::Knn(m) => m.predict_row(row),
            })
            .collect()
    }
}

const PIPELINE_FORMAT: &str = "ptrs-fitted-pipeline";
const PIPELINE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    format: String,
    version: u32,
    pipeline: FittedPipeline,
}

impl FittedPipeline {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.n_features() {
            return Err(ModelError::ColumnMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        check_finite(x)?;
        let z: Array2<f64> = self.standardizer.apply(x);
        Ok(self.model.predict_standardized(z.view()))
    }

    /// Versioned JSON; floats are written in shortest round-trip form so a
    /// reloaded pipeline predicts bit-for-bit identically.
    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string(&PipelineFile {
            format: PIPELINE_FORMAT.into(),
            version: PIPELINE_VERSION,
            pipeline: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: PipelineFile = serde_json::from_str(text)?;
        if file.format != PIPELINE_FORMAT || file.version != PIPELINE_VERSION {
            return Err(ModelError::UnsupportedFormat {
                format: file.format,
                version: file.version,
            });
        }
        Ok(file.pipeline)
    }
}
