//! Synthetic raw cohorts in the ingestion format, with planted signal.
//!
//! Continuous biomarkers are class-conditional Gaussians: a designated column
//! is `mean + sd * (z + delta * y)`, all others `mean + sd * z`. Designated
//! questionnaire binaries are Bernoulli with `logit p = logit p0 + beta * y`.
//! Both families have closed-form large-sample AUCs, written to the sidecar.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ingest::{Cloudiness, Color, KeywordTable, Schema};
use crate::models::logistic::sigmoid;
use crate::rng::{StreamRng, Substream};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic cohort config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub prevalence: f64,
    /// Standardized mean shift between classes on the designated biomarkers.
    pub biomarker_signal: f64,
    /// Log-odds shift on the designated questionnaire binaries.
    pub reported_signal: f64,
    pub missing_rate: f64,
    /// Fraction of biomarker cells written as `<x` or `>x`.
    pub semiquant_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 93,
            prevalence: 0.80,
            biomarker_signal: 0.954,
            reported_signal: 1.0,
            missing_rate: 0.0,
            semiquant_rate: 0.05,
            seed: 42,
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl SynthConfig {
    pub fn n_positive(&self) -> usize {
        (self.n as f64 * self.prevalence).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n < 2 {
            return Err(SynthError::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        check_rate("prevalence", self.prevalence)?;
        check_rate("missing_rate", self.missing_rate)?;
        check_rate("semiquant_rate", self.semiquant_rate)?;
        for (name, v) in [
            ("biomarker_signal", self.biomarker_signal),
            ("reported_signal", self.reported_signal),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let pos = self.n_positive();
        if pos == 0 || pos == self.n {
            return Err(SynthError::InvalidConfig(format!(
                "prevalence {} with n = {} yields {pos} positives; both classes are required",
                self.prevalence, self.n
            )));
        }
        Ok(())
    }
}

struct Biomarker {
    name: &'static str,
    mean: f64,
    sd: f64,
    decimals: usize,
    signal: bool,
}

const BIOMARKERS: [Biomarker; 9] = [
    Biomarker { name: "leukocytes", mean: 40.0, sd: 15.0, decimals: 2, signal: true },
    Biomarker { name: "bilirubin", mean: 8.0, sd: 3.0, decimals: 3, signal: false },
    Biomarker { name: "protein", mean: 20.0, sd: 8.0, decimals: 2, signal: true },
    Biomarker { name: "specific_gravity", mean: 1.015, sd: 0.006, decimals: 5, signal: false },
    Biomarker { name: "ph", mean: 6.0, sd: 0.7, decimals: 3, signal: false },
    Biomarker { name: "ascorbic_acid", mean: 10.0, sd: 4.0, decimals: 3, signal: false },
    Biomarker { name: "microalbumin", mean: 30.0, sd: 12.0, decimals: 2, signal: true },
    Biomarker { name: "calcium", mean: 4.0, sd: 1.5, decimals: 3, signal: false },
    Biomarker { name: "creatinine", mean: 9.0, sd: 3.5, decimals: 3, signal: false },
];

struct Indicator {
    name: &'static str,
    base_rate: f64,
    signal: bool,
}

const INDICATORS: [Indicator; 11] = [
    Indicator { name: "new_sexual_partner", base_rate: 0.35, signal: true },
    Indicator { name: "recent_unprotected_intercourse", base_rate: 0.45, signal: false },
    Indicator { name: "unprotected_new_partner_12m", base_rate: 0.30, signal: true },
    Indicator { name: "prior_std", base_rate: 0.15, signal: false },
    Indicator { name: "recent_painkiller_use", base_rate: 0.25, signal: false },
    Indicator { name: "chronic_disease", base_rate: 0.12, signal: false },
    Indicator { name: "dysuria", base_rate: 0.30, signal: true },
    Indicator { name: "abnormal_discharge", base_rate: 0.25, signal: true },
    Indicator { name: "intermenstrual_bleeding", base_rate: 0.15, signal: false },
    Indicator { name: "genital_irritation", base_rate: 0.20, signal: false },
    Indicator { name: "urinary_urgency", base_rate: 0.30, signal: false },
];

const FEMALE_SHARE: f64 = 0.73;
const NOISE: [&str; 6] = ["(lab note)", "(recheck)", "(as reported)", "(sample 2)", "(tech: ok)", "(see (form) B)"];
const SEPARATORS: [&str; 5] = [", ", "; ", " / ", ",", " ;  "];

/// Designated signal biomarkers, in column order.
pub fn signal_biomarkers() -> Vec<&'static str> {
    BIOMARKERS.iter().filter(|b| b.signal).map(|b| b.name).collect()
}

/// Designated signal questionnaire binaries, in column order.
pub fn signal_indicators() -> Vec<&'static str> {
    INDICATORS.iter().filter(|b| b.signal).map(|b| b.name).collect()
}

/// Large-sample AUC of one unit-variance Gaussian column shifted by `delta`.
pub fn binormal_auc(delta: f64) -> f64 {
    Normal::standard().cdf(delta / std::f64::consts::SQRT_2)
}

/// Large-sample AUC of a binary column, ties counted one half.
pub fn bernoulli_auc(p0: f64, beta: f64) -> f64 {
    let p1 = shifted_rate(p0, beta);
    0.5 + (p1 - p0) / 2.0
}

fn shifted_rate(p0: f64, beta: f64) -> f64 {
    sigmoid((p0 / (1.0 - p0)).ln() + beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFamily {
    Gaussian { mean: f64, sd: f64, shift: f64 },
    Bernoulli { base_rate: f64, positive_rate: f64, log_odds_shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedColumn {
    pub name: String,
    pub family: SignalFamily,
    pub implied_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: SynthConfig,
    pub n_positive: usize,
    pub n_negative: usize,
    pub columns: Vec<PlantedColumn>,
}

impl Sidecar {
    pub fn implied_auc(&self, column: &str) -> Option<f64> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.implied_auc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    /// Cohort file contents in the default ingestion schema.
    pub csv: String,
    pub sidecar: Sidecar,
    pub labels: Vec<u8>,
}

fn sidecar(config: &SynthConfig) -> Sidecar {
    let n_positive = config.n_positive();
    let mut columns = Vec::new();
    for b in &BIOMARKERS {
        let shift = if b.signal { config.biomarker_signal } else { 0.0 };
        columns.push(PlantedColumn {
            name: b.name.into(),
            family: SignalFamily::Gaussian {
                mean: b.mean,
                sd: b.sd,
                shift,
            },
            implied_auc: binormal_auc(shift),
        });
    }
    for ind in &INDICATORS {
        let beta = if ind.signal { config.reported_signal } else { 0.0 };
        columns.push(PlantedColumn {
            name: ind.name.into(),
            family: SignalFamily::Bernoulli {
                base_rate: ind.base_rate,
                positive_rate: shifted_rate(ind.base_rate, beta),
                log_odds_shift: beta,
            },
            implied_auc: bernoulli_auc(ind.base_rate, beta),
        });
    }
    Sidecar {
        config: config.clone(),
        n_positive,
        n_negative: config.n - n_positive,
        columns,
    }
}

fn pick<'a, T>(rng: &mut StreamRng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn render_visual(rng: &mut StreamRng, table: &KeywordTable) -> String {
    let mut parts: Vec<String> = Vec::new();
    // one in ten axes is left out and parses as unknown
    if rng.random::<f64>() >= 0.1 {
        let c = *pick(rng, &Color::KNOWN);
        let kws: Vec<&str> = table.color_keywords().filter(|(_, v)| *v == c).map(|(k, _)| k).collect();
        parts.push(pick(rng, &kws).to_string());
    }
    if rng.random::<f64>() >= 0.1 {
        let c = *pick(rng, &Cloudiness::KNOWN);
        let kws: Vec<&str> = table
            .cloudiness_keywords()
            .filter(|(_, v)| *v == c)
            .map(|(k, _)| k)
            .collect();
        parts.push(pick(rng, &kws).to_string());
    }
    for part in &mut parts {
        if rng.random::<f64>() < 0.3 {
            *part = part.to_uppercase();
        }
        if rng.random::<f64>() < 0.25 {
            part.push(' ');
            part.push_str(pick(rng, &NOISE));
        }
    }
    let sep = *pick(rng, &SEPARATORS);
    parts.join(sep)
}

fn format_value(v: f64, decimals: usize, decimal_comma: bool) -> String {
    let s = format!("{v:.decimals$}");
    if decimal_comma {
        s.replace('.', ",")
    } else {
        s
    }
}

/// Builds the cohort in memory. Same config, same bytes.
pub fn generate(config: &SynthConfig) -> Result<SynthCohort, SynthError> {
    config.validate()?;
    let n = config.n;
    let root = Substream::root(config.seed).named("synth");

    let n_pos = config.n_positive();
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut root.named("labels").rng());

    let schema = Schema::default();
    let table = KeywordTable::default();
    let mut header = vec![
        schema.record_id.clone(),
        schema.source_cohort.clone(),
        schema.qc_flag.clone(),
        schema.pcr_result.clone(),
        schema.visual_text.clone(),
        "gender".into(),
        "age".into(),
    ];
    header.extend(INDICATORS.iter().map(|i| i.name.to_string()));
    header.extend(BIOMARKERS.iter().map(|b| b.name.to_string()));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    let width = (n as f64).log10().floor() as usize + 1;
    for (i, &y) in labels.iter().enumerate() {
        let mut rng = root.named("row").child(i as u64).rng();
        let yf = f64::from(y);
        let leipzig = rng.random::<f64>() < 0.5;
        let missing = |rng: &mut StreamRng| config.missing_rate > 0.0 && rng.random::<f64>() < config.missing_rate;

        let mut row = vec![
            format!("S{:0width$}", i + 1),
            if leipzig { "LeipzigCE2019" } else { "UT2018" }.to_string(),
            "OK".to_string(),
            if y == 1 { "POS" } else { "NEG" }.to_string(),
            render_visual(&mut rng, &table),
        ];

        let female = rng.random::<f64>() < FEMALE_SHARE;
        let gender = if female { "female" } else { "male" };
        row.push(if missing(&mut rng) { String::new() } else { gender.into() });
        let z: f64 = rng.sample(StandardNormal);
        let age = (27.0 + 6.0 * z).clamp(16.0, 60.0).round();
        row.push(if missing(&mut rng) { String::new() } else { format!("{age}") });

        for ind in &INDICATORS {
            let beta = if ind.signal { config.reported_signal } else { 0.0 };
            let p = shifted_rate(ind.base_rate, beta * yf);
            let yes = rng.random::<f64>() < p;
            let cell = if missing(&mut rng) {
                String::new()
            } else if yes {
                "yes".into()
            } else {
                "no".into()
            };
            row.push(cell);
        }

        for b in &BIOMARKERS {
            let shift = if b.signal { config.biomarker_signal } else { 0.0 };
            let z: f64 = rng.sample(StandardNormal);
            let v = b.mean + b.sd * (z + shift * yf);
            let mut cell = format_value(v, b.decimals, leipzig);
            if config.semiquant_rate > 0.0 && rng.random::<f64>() < config.semiquant_rate {
                let marker = if z < 0.0 { "<" } else { ">" };
                cell = format!("{marker}{cell}");
            }
            if missing(&mut rng) {
                cell.clear();
            }
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| SynthError::Csv(e.into_error().into()))?;
    Ok(SynthCohort {
        csv: String::from_utf8(bytes).expect("csv writer emits utf-8"),
        sidecar: sidecar(config),
        labels,
    })
}
