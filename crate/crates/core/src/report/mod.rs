//! Experiment orchestration and the on-disk report bundle.
//!
//! Bundle layout under the output directory:
//!
//! | path | contents |
//! |---|---|
//! | `oof/<group>_<model>.csv` | `record_id,fold,y,p_hat` |
//! | `reports/<group>_<model>.json` | metric report with the effective config |
//! | `curation_report.json`, `cohort_summary.json` | audit trail and cohort summary |
//! | `tables/table_<group>.tsv` | AUC, precision, F1 with intervals |
//! | `tables/table_<group>_extended.tsv` | sensitivity, specificity, confusion counts |
//! | `plotdata/age_histogram.tsv`, `plotdata/auc_ci.tsv`, `plotdata/sens_spec.tsv` | plot data |
//! | `manifest.json` | SHA-256 of every file above, config digest, tool version |

pub mod config;
pub mod render;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::ExperimentConfig;

use crate::curation::{cohort_summary, curate, CohortSummary, CuratedDataset, CurationError, CurationReport, GroupTag};
use crate::evaluation::{metric_report, run_oof, stratified_kfold, EvalError, MetricReport, OofPredictions, Protocol};
use crate::ingest::{load_raw, qc_partition, IngestError, RawRecord};
use crate::models::{ModelKind, ModelSpec};
use crate::rng::Substream;
use crate::synth::{self, SynthConfig, SynthError};

pub const TOOL_NAME: &str = "ptrs";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("curation: {0}")]
    Curation(#[from] CurationError),
    #[error("evaluation of {model} on {group}: {source}")]
    Evaluation {
        group: GroupTag,
        model: ModelKind,
        #[source]
        source: EvalError,
    },
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("incomplete bundle, missing: {}", .0.join(", "))]
    IncompleteBundle(Vec<String>),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal: {0}")]
    Internal(String),
}

impl ReportError {
    /// 1 config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Synth(SynthError::InvalidConfig(_)) => 1,
            Self::Ingest(_) | Self::Curation(_) | Self::Evaluation { .. } | Self::IncompleteBundle(_) => 2,
            Self::Synth(_) | Self::Io { .. } | Self::Json(_) | Self::Internal(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything the tables and plot data are rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub protocol: Protocol,
    pub models: Vec<ModelKind>,
    pub groups: Vec<GroupTag>,
    pub reports: BTreeMap<(GroupTag, ModelKind), MetricReport>,
    pub summary: CohortSummary,
}

pub struct RunOutput {
    pub dataset: CuratedDataset,
    pub curation: CurationReport,
    pub oof: BTreeMap<(GroupTag, ModelKind), OofPredictions>,
    pub bundle: Bundle,
}

pub fn cell_name(group: GroupTag, model: ModelKind) -> String {
    format!("{group}_{}", model.code())
}

/// Substream for one (model, group) cell; folds branch off it.
pub fn cell_stream(seed: u64, group: GroupTag, model: ModelKind) -> Substream {
    Substream::root(seed)
        .named("model-fit")
        .child(model.index())
        .child(group as u64)
}

pub type GridResults = BTreeMap<(GroupTag, ModelKind), (OofPredictions, MetricReport)>;

/// Out-of-fold predictions and metric reports for every requested cell.
/// All cells share one fold assignment.
pub fn run_grid(
    ds: &CuratedDataset,
    config: &ExperimentConfig,
) -> Result<GridResults, ReportError> {
    let protocol = config.protocol;
    let folds = stratified_kfold(&ds.labels, protocol.k, protocol.seed).map_err(|source| ReportError::Evaluation {
        group: config.groups()[0],
        model: config.models()[0],
        source,
    })?;
    let cells: Vec<(GroupTag, ModelKind)> = config
        .groups()
        .into_iter()
        .flat_map(|g| config.models().into_iter().map(move |m| (g, m)))
        .collect();

    let work = || {
        cells
            .par_iter()
            .map(|&(group, model)| {
                let oof = run_oof(
                    ds.matrix(group).view(),
                    &ds.labels,
                    &ds.row_ids,
                    &ModelSpec::fixed(model),
                    &folds,
                    group,
                    cell_stream(protocol.seed, group, model),
                )?;
                let report = metric_report(&oof, &protocol)?;
                Ok((oof, report))
            })
            .collect::<Vec<Result<_, EvalError>>>()
    };
    let results = match config.run.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| ReportError::Internal(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut out = BTreeMap::new();
    for (&(group, model), result) in cells.iter().zip(results) {
        let pair = result.map_err(|source| ReportError::Evaluation { group, model, source })?;
        out.insert((group, model), pair);
    }
    Ok(out)
}

/// Curation, grid and reports on already-loaded records.
pub fn execute(config: &ExperimentConfig, records: Vec<RawRecord>) -> Result<RunOutput, ReportError> {
    let n_loaded = records.len();
    let flags = config.qc_flags();
    let (kept, rejected) = qc_partition(records, &flags);
    let dataset = curate(&kept, &config.curation)?;
    let curation = CurationReport::new(
        &dataset,
        &config.curation,
        n_loaded,
        flags.iter().map(String::from).collect(),
        rejected,
    );
    let summary = cohort_summary(&dataset, &config.curation.encoding, config.curation.age_bin_width);
    let grid = run_grid(&dataset, config)?;
    let mut oof = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (key, (o, r)) in grid {
        oof.insert(key, o);
        reports.insert(key, r);
    }
    Ok(RunOutput {
        dataset,
        curation,
        oof,
        bundle: Bundle {
            protocol: config.protocol,
            models: config.models(),
            groups: config.groups(),
            reports,
            summary,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub complete: bool,
    pub error: Option<String>,
    /// Relative path -> SHA-256 of the file contents.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(out_dir: &Path) -> Result<Self, ReportError> {
        let path = out_dir.join(Self::FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under an output directory and records their digests.
pub struct BundleWriter {
    root: PathBuf,
    config_sha256: String,
    files: BTreeMap<String, String>,
}

impl BundleWriter {
    pub fn new(root: &Path, config: &ExperimentConfig) -> Result<Self, ReportError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            config_sha256: config.digest(),
            files: BTreeMap::new(),
        })
    }

    /// Continues an existing manifest (for re-rendering tables or plot data).
    pub fn resume(root: &Path, config: &ExperimentConfig) -> Result<Self, ReportError> {
        let mut w = Self::new(root, config)?;
        if root.join(Manifest::FILE).exists() {
            w.files = Manifest::load(root)?.files;
        }
        Ok(w)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), ReportError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn finish(self, complete: bool, error: Option<String>) -> Result<Manifest, ReportError> {
        let manifest = Manifest {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            config_sha256: self.config_sha256,
            complete,
            error,
            files: self.files,
        };
        let path = self.root.join(Manifest::FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: ExperimentConfig,
    pub oof_path: String,
    pub report: MetricReport,
}

fn report_path(group: GroupTag, model: ModelKind) -> String {
    format!("reports/{}.json", cell_name(group, model))
}

fn oof_path(group: GroupTag, model: ModelKind) -> String {
    format!("oof/{}.csv", cell_name(group, model))
}

pub fn write_tables(bundle: &Bundle, w: &mut BundleWriter) -> Result<(), ReportError> {
    for &g in &bundle.groups {
        w.write(&format!("tables/table_{g}.tsv"), render::group_table(bundle, g).as_bytes())?;
        w.write(
            &format!("tables/table_{g}_extended.tsv"),
            render::extended_table(bundle, g).as_bytes(),
        )?;
    }
    Ok(())
}

pub fn write_plotdata(bundle: &Bundle, w: &mut BundleWriter) -> Result<(), ReportError> {
    w.write("plotdata/age_histogram.tsv", render::age_histogram_data(bundle).as_bytes())?;
    w.write("plotdata/auc_ci.tsv", render::auc_plot_data(bundle).as_bytes())?;
    w.write("plotdata/sens_spec.tsv", render::sens_spec_plot_data(bundle).as_bytes())?;
    Ok(())
}

fn run_into(config: &ExperimentConfig, w: &mut BundleWriter) -> Result<(), ReportError> {
    let records = load_raw(&config.input_path()?, &config.schema)?;
    let out = execute(config, records)?;
    w.write_json("curation_report.json", &out.curation)?;
    w.write_json("cohort_summary.json", &out.bundle.summary)?;
    for (&(g, m), oof) in &out.oof {
        let mut buf = Vec::new();
        oof.write_csv(&mut buf)
            .map_err(|source| ReportError::Evaluation { group: g, model: m, source })?;
        w.write(&oof_path(g, m), &buf)?;
    }
    for (&(g, m), report) in &out.bundle.reports {
        w.write_json(
            &report_path(g, m),
            &ReportFile {
                config: config.clone(),
                oof_path: oof_path(g, m),
                report: report.clone(),
            },
        )?;
    }
    write_tables(&out.bundle, w)?;
    write_plotdata(&out.bundle, w)
}

/// Full pipeline into `out_dir`. On failure the manifest is still written,
/// marked incomplete, listing what was produced before the error.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, ReportError> {
    let mut w = BundleWriter::new(out_dir, config)?;
    match run_into(config, &mut w) {
        Ok(()) => w.finish(true, None),
        Err(e) => {
            w.finish(false, Some(e.to_string()))?;
            Err(e)
        }
    }
}

/// Reads the bundle written by [`cmd_run`] for the config's grid.
pub fn load_bundle(config: &ExperimentConfig, out_dir: &Path) -> Result<Bundle, ReportError> {
    let mut missing = Vec::new();
    let mut reports = BTreeMap::new();
    for g in config.groups() {
        for m in config.models() {
            let path = out_dir.join(report_path(g, m));
            match fs::read_to_string(&path) {
                Ok(text) => {
                    let file: ReportFile = serde_json::from_str(&text)?;
                    reports.insert((g, m), file.report);
                }
                Err(_) => missing.push(cell_name(g, m)),
            }
        }
    }
    let summary_path = out_dir.join("cohort_summary.json");
    let summary = match fs::read_to_string(&summary_path) {
        Ok(text) => Some(serde_json::from_str::<CohortSummary>(&text)?),
        Err(_) => {
            missing.push("cohort_summary".into());
            None
        }
    };
    if !missing.is_empty() {
        return Err(ReportError::IncompleteBundle(missing));
    }
    Ok(Bundle {
        protocol: config.protocol,
        models: config.models(),
        groups: config.groups(),
        reports,
        summary: summary.expect("checked above"),
    })
}

pub fn cmd_tables(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, ReportError> {
    let bundle = load_bundle(config, out_dir)?;
    let mut w = BundleWriter::resume(out_dir, config)?;
    write_tables(&bundle, &mut w)?;
    let complete = Manifest::load(out_dir).map(|m| m.complete).unwrap_or(false);
    w.finish(complete, None)
}

pub fn cmd_plotdata(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, ReportError> {
    let bundle = load_bundle(config, out_dir)?;
    let mut w = BundleWriter::resume(out_dir, config)?;
    write_plotdata(&bundle, &mut w)?;
    let complete = Manifest::load(out_dir).map(|m| m.complete).unwrap_or(false);
    w.finish(complete, None)
}

pub const COHORT_FILE: &str = "cohort.csv";
pub const SIDECAR_FILE: &str = "cohort.sidecar.json";

/// Writes `cohort.csv` and its ground-truth sidecar into `out_dir`.
pub fn cmd_synth(config: &SynthConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf), ReportError> {
    let cohort = synth::generate(config)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join(COHORT_FILE);
    fs::write(&csv_path, &cohort.csv).map_err(io_err(&csv_path))?;
    let side_path = out_dir.join(SIDECAR_FILE);
    let mut text = serde_json::to_string_pretty(&cohort.sidecar)?;
    text.push('\n');
    fs::write(&side_path, text).map_err(io_err(&side_path))?;
    Ok((csv_path, side_path))
}
