//! Feature engineering and row-aligned assembly of the F1/F2/F3 matrices.
//!
//! The flow is `encode_features` → `aggregate_proxies` → `exclude_features`
//! → `assemble`. Nothing here ever fills in a missing value: rows that are
//! incomplete on the combined feature set are dropped and recorded instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    parse_semiquant, parse_visual_with, Cloudiness, Color, KeywordTable, PcrResult, QcRejection,
    RawRecord,
};

pub const F1_DEFAULT: [&str; 13] = [
    "gender",
    "age",
    "new_sexual_partner",
    "recent_unprotected_intercourse",
    "unprotected_new_partner_12m",
    "prior_std",
    "recent_painkiller_use",
    "chronic_disease",
    "dysuria",
    "abnormal_discharge",
    "intermenstrual_bleeding",
    "genital_irritation",
    "urinary_urgency",
];

pub const F2_DEFAULT: [&str; 9] = [
    "leukocytes",
    "bilirubin",
    "protein",
    "specific_gravity",
    "ph",
    "ascorbic_acid",
    "microalbumin",
    "calcium",
    "creatinine",
];

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("proxy source column `{column}` is not binary (found {value})")]
    NonBinarySource { column: String, value: f64 },
    #[error("proxy source column `{column}` does not exist")]
    MissingSource { column: String },
    #[error("record `{0}` has no usable PCR label; run the QC filter first")]
    UnlabeledRecord(String),
    #[error("label vector has {labels} entries but the table has {rows} rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("feature `{0}` is assigned to both F1 and F2")]
    OverlappingGroups(String),
    #[error("no feature survived curation")]
    NoFeatures,
    #[error("no row survived curation")]
    NoRowsSurvive,
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupTag {
    F1,
    F2,
    F3,
}

impl GroupTag {
    pub const ALL: [GroupTag; 3] = [GroupTag::F1, GroupTag::F2, GroupTag::F3];

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "F1",
            Self::F2 => "F2",
            Self::F3 => "F3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_uppercase().as_str() {
            "F1" => Some(Self::F1),
            "F2" => Some(Self::F2),
            "F3" => Some(Self::F3),
            _ => None,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub tag: GroupTag,
    pub feature_names: Vec<String>,
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderCoding {
    /// male = 1, female = 0
    #[default]
    Male,
    /// female = 1, male = 0
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub gender_one: GenderCoding,
    pub male_values: Vec<String>,
    pub female_values: Vec<String>,
    pub yes_values: Vec<String>,
    pub no_values: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            gender_one: GenderCoding::Male,
            male_values: strings(&["male", "m", "man"]),
            female_values: strings(&["female", "f", "woman"]),
            yes_values: strings(&["yes", "y", "true", "1"]),
            no_values: strings(&["no", "n", "false", "0"]),
        }
    }
}

fn lookup(values: &[String], key: &str) -> bool {
    values.iter().any(|v| v.trim().to_lowercase() == key)
}

impl EncodingConfig {
    pub fn binary(&self, raw: &str) -> Option<f64> {
        let key = raw.trim().to_lowercase();
        if lookup(&self.yes_values, &key) {
            Some(1.0)
        } else if lookup(&self.no_values, &key) {
            Some(0.0)
        } else {
            None
        }
    }

    pub fn gender(&self, raw: &str) -> Option<f64> {
        let key = raw.trim().to_lowercase();
        let male = if lookup(&self.male_values, &key) {
            true
        } else if lookup(&self.female_values, &key) {
            false
        } else {
            return None;
        };
        let one = match self.gender_one {
            GenderCoding::Male => male,
            GenderCoding::Female => !male,
        };
        Some(if one { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyOp {
    #[default]
    Or,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyRule {
    pub target: String,
    pub sources: Vec<String>,
    #[serde(default)]
    pub op: ProxyOp,
}

/// Extra visual keywords, appended to the built-in lexicon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualKeywords {
    pub light: Vec<String>,
    pub average: Vec<String>,
    pub dark: Vec<String>,
    pub cloudless: Vec<String>,
    pub cloudy: Vec<String>,
    pub very_cloudy: Vec<String>,
}

impl VisualKeywords {
    pub fn table(&self) -> KeywordTable {
        let mut table = KeywordTable::default();
        for (words, color) in [
            (&self.light, Color::Light),
            (&self.average, Color::Average),
            (&self.dark, Color::Dark),
        ] {
            for w in words {
                table.add_color(w, color);
            }
        }
        for (words, c) in [
            (&self.cloudless, Cloudiness::Cloudless),
            (&self.cloudy, Cloudiness::Cloudy),
            (&self.very_cloudy, Cloudiness::VeryCloudy),
        ] {
            for w in words {
                table.add_cloudiness(w, c);
            }
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub f1_features: Vec<String>,
    pub f2_features: Vec<String>,
    pub max_missing_fraction: f64,
    pub drop_zero_variance: bool,
    pub blocklist: Vec<String>,
    pub encoding: EncodingConfig,
    pub proxy_rules: Vec<ProxyRule>,
    pub visual_keywords: VisualKeywords,
    pub age_bin_width: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            f1_features: strings(&F1_DEFAULT),
            f2_features: strings(&F2_DEFAULT),
            max_missing_fraction: 0.30,
            drop_zero_variance: true,
            blocklist: Vec::new(),
            encoding: EncodingConfig::default(),
            proxy_rules: Vec::new(),
            visual_keywords: VisualKeywords::default(),
            age_bin_width: 5.0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(CurationError::InvalidConfig(format!(
                "max_missing_fraction {} outside [0, 1]",
                self.max_missing_fraction
            )));
        }
        if !(self.age_bin_width > 0.0 && self.age_bin_width.is_finite()) {
            return Err(CurationError::InvalidConfig(format!(
                "age_bin_width {} must be positive",
                self.age_bin_width
            )));
        }
        let f1: BTreeSet<&String> = self.f1_features.iter().collect();
        if let Some(dup) = self.f2_features.iter().find(|n| f1.contains(n)) {
            return Err(CurationError::OverlappingGroups(dup.clone()));
        }
        if self.f1_features.is_empty() && self.f2_features.is_empty() {
            return Err(CurationError::NoFeatures);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Feature table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|v| v.is_none()).count() as f64 / self.values.len() as f64
    }

    /// True when all present values are equal (vacuously true when none are).
    pub fn is_constant(&self) -> bool {
        let mut present = self.values.iter().flatten();
        match present.next() {
            None => true,
            Some(first) => present.all(|v| v == first),
        }
    }
}

/// Columns of optional values over a shared row order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub row_ids: Vec<String>,
    pub columns: Vec<Column>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    fn push(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        debug_assert_eq!(values.len(), self.row_ids.len());
        self.columns.push(Column {
            name: name.into(),
            values,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DropReason {
    ZeroVariance,
    Missingness { fraction: f64, threshold: f64 },
    Blocklisted,
    AbsentFromData,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroVariance => f.write_str("zero variance"),
            Self::Missingness {
                fraction,
                threshold,
            } => write!(f, "missingness {fraction:.2} > {threshold:.2}"),
            Self::Blocklisted => f.write_str("blocklisted"),
            Self::AbsentFromData => f.write_str("absent from data"),
        }
    }
}

impl Serialize for DropReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedRow {
    pub record_id: String,
    pub reason: String,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

pub fn labels_from(records: &[RawRecord]) -> Result<Vec<u8>, CurationError> {
    records
        .iter()
        .map(|r| match r.pcr_result {
            PcrResult::Positive => Ok(1),
            PcrResult::Negative => Ok(0),
            PcrResult::Invalid => Err(CurationError::UnlabeledRecord(r.record_id.clone())),
        })
        .collect()
}

pub const VISUAL_COLUMNS: [&str; 6] = [
    "color_light",
    "color_average",
    "color_dark",
    "cloudiness_cloudless",
    "cloudiness_cloudy",
    "cloudiness_very_cloudy",
];

fn one_hot<T: PartialEq + Copy>(values: &[T], level: T) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|v| Some(if *v == level { 1.0 } else { 0.0 }))
        .collect()
}

fn encode_generic(
    name: &str,
    raw: &[Option<&str>],
    encoding: &EncodingConfig,
    table: &mut FeatureTable,
) {
    let present: Vec<&str> = raw
        .iter()
        .flatten()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    fn cell<'s>(v: &Option<&'s str>) -> Option<&'s str> {
        v.map(str::trim).filter(|s| !s.is_empty())
    }

    if present.iter().all(|s| !parse_semiquant(s).is_missing()) {
        let values = raw
            .iter()
            .map(|v| cell(v).and_then(|s| parse_semiquant(s).value()))
            .collect();
        table.push(name, values);
    } else if present.iter().all(|s| encoding.binary(s).is_some()) {
        let values = raw
            .iter()
            .map(|v| cell(v).and_then(|s| encoding.binary(s)))
            .collect();
        table.push(name, values);
    } else {
        // one-hot, dropping the first level alphabetically as reference
        let levels: BTreeSet<String> = present.iter().map(|s| s.to_lowercase()).collect();
        for level in levels.iter().skip(1) {
            let values = raw
                .iter()
                .map(|v| cell(v).map(|s| if s.to_lowercase() == *level { 1.0 } else { 0.0 }))
                .collect();
            table.push(format!("{name}_{level}"), values);
        }
    }
}

/// Encodes parsed records into a numeric table with missing markers.
///
/// Column order: configured F1 names, configured F2 names, the visual one-hot
/// block (reference level `unknown` dropped), then any further questionnaire
/// and biomarker fields by name.
pub fn encode_features(records: &[RawRecord], config: &CurationConfig) -> FeatureTable {
    let enc = &config.encoding;
    let mut table = FeatureTable {
        row_ids: records.iter().map(|r| r.record_id.clone()).collect(),
        columns: Vec::new(),
    };
    let nonempty = |s: &String| -> Option<String> {
        let t = s.trim();
        (!t.is_empty()).then(|| t.to_string())
    };

    for name in &config.f1_features {
        let values = records
            .iter()
            .map(|r| {
                let raw = r.questionnaire.get(name).and_then(nonempty)?;
                match name.as_str() {
                    "gender" => enc.gender(&raw),
                    "age" => parse_semiquant(&raw).value(),
                    _ => enc.binary(&raw),
                }
            })
            .collect();
        table.push(name.clone(), values);
    }

    for name in &config.f2_features {
        let values = records
            .iter()
            .map(|r| {
                r.biomarkers_raw
                    .get(name)
                    .and_then(|raw| parse_semiquant(raw).value())
            })
            .collect();
        table.push(name.clone(), values);
    }

    let keywords = config.visual_keywords.table();
    let visuals: Vec<_> = records
        .iter()
        .map(|r| parse_visual_with(&r.visual_text, &keywords))
        .collect();
    let colors: Vec<Color> = visuals.iter().map(|v| v.color).collect();
    let clouds: Vec<Cloudiness> = visuals.iter().map(|v| v.cloudiness).collect();
    for c in Color::KNOWN {
        table.push(format!("color_{}", c.name()), one_hot(&colors, c));
    }
    for c in Cloudiness::KNOWN {
        table.push(format!("cloudiness_{}", c.ident()), one_hot(&clouds, c));
    }

    let grouped: BTreeSet<&String> = config
        .f1_features
        .iter()
        .chain(&config.f2_features)
        .collect();
    let extra_q: BTreeSet<&String> = records
        .iter()
        .flat_map(|r| r.questionnaire.keys())
        .filter(|k| !grouped.contains(k))
        .collect();
    for name in extra_q {
        let raw: Vec<Option<&str>> = records
            .iter()
            .map(|r| r.questionnaire.get(name).map(String::as_str))
            .collect();
        encode_generic(name, &raw, enc, &mut table);
    }
    let extra_b: BTreeSet<&String> = records
        .iter()
        .flat_map(|r| r.biomarkers_raw.keys())
        .filter(|k| !grouped.contains(k))
        .collect();
    for name in extra_b {
        let values = records
            .iter()
            .map(|r| {
                r.biomarkers_raw
                    .get(name)
                    .and_then(|raw| parse_semiquant(raw).value())
            })
            .collect();
        table.push(name.clone(), values);
    }
    table
}

/// Replaces each rule's binary source columns by their logical OR.
/// The result is missing only when every source is missing.
pub fn aggregate_proxies(
    mut table: FeatureTable,
    rules: &[ProxyRule],
) -> Result<FeatureTable, CurationError> {
    for rule in rules {
        let mut sources = Vec::with_capacity(rule.sources.len());
        for name in &rule.sources {
            let col = table
                .column(name)
                .ok_or_else(|| CurationError::MissingSource {
                    column: name.clone(),
                })?;
            if let Some(&bad) = col.values.iter().flatten().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(CurationError::NonBinarySource {
                    column: name.clone(),
                    value: bad,
                });
            }
            sources.push(col.values.clone());
        }
        let target: Vec<Option<f64>> = (0..table.n_rows())
            .map(|i| match rule.op {
                ProxyOp::Or => {
                    let mut any_present = false;
                    for src in &sources {
                        match src[i] {
                            Some(1.0) => return Some(1.0),
                            Some(_) => any_present = true,
                            None => {}
                        }
                    }
                    any_present.then_some(0.0)
                }
            })
            .collect();
        table.columns.retain(|c| !rule.sources.contains(&c.name));
        table.columns.retain(|c| c.name != rule.target);
        table.push(rule.target.clone(), target);
    }
    Ok(table)
}

/// Drops blocklisted, overly missing, and constant columns (checked in that
/// order; each column is recorded once with the first reason that applies).
pub fn exclude_features(
    table: FeatureTable,
    max_missing_fraction: f64,
    drop_zero_variance: bool,
    blocklist: &[String],
) -> (FeatureTable, Vec<DroppedFeature>) {
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for col in table.columns {
        let fraction = col.missing_fraction();
        let reason = if blocklist.contains(&col.name) {
            Some(DropReason::Blocklisted)
        } else if fraction > max_missing_fraction {
            Some(DropReason::Missingness {
                fraction,
                threshold: max_missing_fraction,
            })
        } else if drop_zero_variance && col.is_constant() {
            Some(DropReason::ZeroVariance)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedFeature {
                name: col.name,
                reason,
            }),
            None => kept.push(col),
        }
    }
    (
        FeatureTable {
            row_ids: table.row_ids,
            columns: kept,
        },
        dropped,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedDataset {
    pub row_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub groups: BTreeMap<GroupTag, FeatureGroup>,
    pub matrices: BTreeMap<GroupTag, Array2<f64>>,
    pub dropped_features: BTreeMap<GroupTag, Vec<DroppedFeature>>,
    /// Dropped columns that belong to no feature group.
    pub dropped_other: Vec<DroppedFeature>,
    /// Surviving columns that belong to no feature group.
    pub unused_columns: Vec<String>,
    pub dropped_rows: Vec<DroppedRow>,
}

impl CuratedDataset {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn matrix(&self, tag: GroupTag) -> &Array2<f64> {
        &self.matrices[&tag]
    }

    pub fn feature_names(&self, tag: GroupTag) -> &[String] {
        &self.groups[&tag].feature_names
    }

    pub fn prevalence(&self) -> f64 {
        self.labels.iter().map(|&y| f64::from(y)).sum::<f64>() / self.labels.len() as f64
    }
}

/// Drops every row that is incomplete on F3 = F1 ++ F2 and builds the three
/// matrices from the same surviving rows. `prior_drops` are column drops from
/// earlier stages; they are filed under the group(s) the column belonged to.
pub fn assemble(
    table: FeatureTable,
    labels: &[u8],
    f1_names: &[String],
    f2_names: &[String],
    prior_drops: Vec<DroppedFeature>,
) -> Result<CuratedDataset, CurationError> {
    if labels.len() != table.n_rows() {
        return Err(CurationError::LabelMismatch {
            labels: labels.len(),
            rows: table.n_rows(),
        });
    }
    let f1_set: BTreeSet<&String> = f1_names.iter().collect();
    if let Some(dup) = f2_names.iter().find(|n| f1_set.contains(n)) {
        return Err(CurationError::OverlappingGroups(dup.clone()));
    }

    let mut drops = prior_drops;
    let mut select = |names: &[String]| -> Vec<usize> {
        let mut idx = Vec::new();
        for name in names {
            match table.columns.iter().position(|c| &c.name == name) {
                Some(i) => idx.push(i),
                None if drops.iter().any(|d| &d.name == name) => {}
                None => drops.push(DroppedFeature {
                    name: name.clone(),
                    reason: DropReason::AbsentFromData,
                }),
            }
        }
        idx
    };
    let f1_idx = select(f1_names);
    let f2_idx = select(f2_names);
    let f3_idx: Vec<usize> = f1_idx.iter().chain(&f2_idx).copied().collect();
    if f3_idx.is_empty() {
        return Err(CurationError::NoFeatures);
    }

    let mut keep_rows = Vec::new();
    let mut dropped_rows = Vec::new();
    for (r, id) in table.row_ids.iter().enumerate() {
        match f3_idx.iter().find(|&&c| table.columns[c].values[r].is_none()) {
            None => keep_rows.push(r),
            Some(&c) => dropped_rows.push(DroppedRow {
                record_id: id.clone(),
                reason: format!("missing {}", table.columns[c].name),
            }),
        }
    }
    if keep_rows.is_empty() {
        return Err(CurationError::NoRowsSurvive);
    }

    let build = |cols: &[usize]| -> Array2<f64> {
        Array2::from_shape_fn((keep_rows.len(), cols.len()), |(i, j)| {
            table.columns[cols[j]].values[keep_rows[i]].expect("row completeness checked")
        })
    };
    let names = |cols: &[usize]| -> Vec<String> {
        cols.iter().map(|&c| table.columns[c].name.clone()).collect()
    };

    let mut groups = BTreeMap::new();
    let mut matrices = BTreeMap::new();
    for (tag, cols) in [
        (GroupTag::F1, &f1_idx),
        (GroupTag::F2, &f2_idx),
        (GroupTag::F3, &f3_idx),
    ] {
        groups.insert(
            tag,
            FeatureGroup {
                tag,
                feature_names: names(cols),
            },
        );
        matrices.insert(tag, build(cols));
    }

    let f2_set: BTreeSet<&String> = f2_names.iter().collect();
    let mut dropped_features: BTreeMap<GroupTag, Vec<DroppedFeature>> =
        GroupTag::ALL.iter().map(|t| (*t, Vec::new())).collect();
    let mut dropped_other = Vec::new();
    for d in drops {
        let in_f1 = f1_set.contains(&d.name);
        let in_f2 = f2_set.contains(&d.name);
        if in_f1 {
            dropped_features.get_mut(&GroupTag::F1).unwrap().push(d.clone());
        }
        if in_f2 {
            dropped_features.get_mut(&GroupTag::F2).unwrap().push(d.clone());
        }
        if in_f1 || in_f2 {
            dropped_features.get_mut(&GroupTag::F3).unwrap().push(d);
        } else {
            dropped_other.push(d);
        }
    }
    let in_group: BTreeSet<usize> = f3_idx.iter().copied().collect();
    let unused_columns = table
        .columns
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_group.contains(i))
        .map(|(_, c)| c.name.clone())
        .collect();

    Ok(CuratedDataset {
        row_ids: keep_rows.iter().map(|&r| table.row_ids[r].clone()).collect(),
        labels: keep_rows.iter().map(|&r| labels[r]).collect(),
        groups,
        matrices,
        dropped_features,
        dropped_other,
        unused_columns,
        dropped_rows,
    })
}

/// Runs the whole curation chain on QC-filtered records.
pub fn curate(
    records: &[RawRecord],
    config: &CurationConfig,
) -> Result<CuratedDataset, CurationError> {
    config.validate()?;
    let labels = labels_from(records)?;
    let table = encode_features(records, config);
    let table = aggregate_proxies(table, &config.proxy_rules)?;
    let (table, dropped) = exclude_features(
        table,
        config.max_missing_fraction,
        config.drop_zero_variance,
        &config.blocklist,
    );
    assemble(
        table,
        &labels,
        &config.f1_features,
        &config.f2_features,
        dropped,
    )
}

// ---------------------------------------------------------------------------
// Summary and audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub female: usize,
    pub male: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub n_positive: usize,
    pub prevalence: f64,
    pub gender: Option<GenderCounts>,
    pub age_bin_width: f64,
    pub age_histogram: Option<Vec<HistogramBin>>,
    pub warnings: Vec<String>,
}

/// Fixed-width bins `[start, start + width)` covering min..=max, with the
/// first edge at a multiple of `width`. Empty interior bins are kept.
pub fn histogram(values: &[f64], width: f64) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let origin = (min / width).floor() * width;
    let bin_of = |v: f64| ((v - origin) / width).floor() as usize;
    let n_bins = values.iter().map(|&v| bin_of(v)).max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        counts[bin_of(v)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            start: origin + i as f64 * width,
            end: origin + (i + 1) as f64 * width,
            count,
        })
        .collect()
}

pub fn cohort_summary(
    ds: &CuratedDataset,
    encoding: &EncodingConfig,
    age_bin_width: f64,
) -> CohortSummary {
    let n = ds.n_rows();
    let n_positive = ds.labels.iter().filter(|&&y| y == 1).count();
    let f3 = ds.matrix(GroupTag::F3);
    let names = ds.feature_names(GroupTag::F3);
    let col = |name: &str| names.iter().position(|n| n == name).map(|j| f3.column(j).to_vec());
    let mut warnings = Vec::new();

    let gender = match col("gender") {
        Some(values) => {
            let ones = values.iter().filter(|&&v| v == 1.0).count();
            let zeros = n - ones;
            Some(match encoding.gender_one {
                GenderCoding::Male => GenderCounts {
                    male: ones,
                    female: zeros,
                },
                GenderCoding::Female => GenderCounts {
                    female: ones,
                    male: zeros,
                },
            })
        }
        None => {
            warnings.push("gender column absent; gender counts omitted".to_string());
            None
        }
    };
    let age_histogram = match col("age") {
        Some(values) => Some(histogram(&values, age_bin_width)),
        None => {
            warnings.push("age column absent; age histogram omitted".to_string());
            None
        }
    };

    CohortSummary {
        n,
        n_positive,
        prevalence: n_positive as f64 / n as f64,
        gender,
        age_bin_width,
        age_histogram,
        warnings,
    }
}

/// Audit trail written next to the results.
#[derive(Debug, Clone, Serialize)]
pub struct CurationReport {
    pub n_records_loaded: usize,
    pub qc_valid_flags: Vec<String>,
    pub qc_rejected: Vec<QcRejectedRecord>,
    pub n_rows_after_qc: usize,
    pub n_rows_final: usize,
    pub dropped_rows: Vec<DroppedRow>,
    pub dropped_features: BTreeMap<GroupTag, Vec<DroppedFeature>>,
    pub dropped_other_features: Vec<DroppedFeature>,
    pub unused_columns: Vec<String>,
    pub feature_groups: BTreeMap<GroupTag, Vec<String>>,
    pub config: CurationConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct QcRejectedRecord {
    pub record_id: String,
    #[serde(flatten)]
    pub reason: QcRejection,
}

impl CurationReport {
    pub fn new(
        ds: &CuratedDataset,
        config: &CurationConfig,
        n_records_loaded: usize,
        qc_valid_flags: Vec<String>,
        qc_rejected: Vec<(String, QcRejection)>,
    ) -> Self {
        Self {
            n_records_loaded,
            qc_valid_flags,
            n_rows_after_qc: ds.n_rows() + ds.dropped_rows.len(),
            qc_rejected: qc_rejected
                .into_iter()
                .map(|(record_id, reason)| QcRejectedRecord { record_id, reason })
                .collect(),
            n_rows_final: ds.n_rows(),
            dropped_rows: ds.dropped_rows.clone(),
            dropped_features: ds.dropped_features.clone(),
            dropped_other_features: ds.dropped_other.clone(),
            unused_columns: ds.unused_columns.clone(),
            feature_groups: ds
                .groups
                .iter()
                .map(|(t, g)| (*t, g.feature_names.clone()))
                .collect(),
            config: config.clone(),
        }
    }
}
