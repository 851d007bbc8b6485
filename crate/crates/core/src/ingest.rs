//! Raw cohort ingestion and deterministic normalization of free-text and
//! semi-quantitative fields.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{F1_DEFAULT, F2_DEFAULT};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),
    #[error("input has no header line")]
    EmptyInput,
    #[error("schema error: column \"{header}\" for required field `{field}` not found in header")]
    MissingColumn { field: String, header: String },
    #[error("data row {row}: empty record_id")]
    EmptyRecordId { row: usize },
    #[error("duplicate record_id `{0}`")]
    DuplicateRecordId(String),
    #[error("the set of valid QC flags must not be empty")]
    EmptyFlagSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceCohort {
    #[serde(rename = "UT2018")]
    Ut2018,
    #[serde(rename = "LeipzigCE2019")]
    LeipzigCe2019,
    #[serde(rename = "BetaLAMP")]
    BetaLamp,
    Other,
}

impl SourceCohort {
    /// Case- and punctuation-insensitive match on the three known cohort names.
    pub fn parse(raw: &str) -> Self {
        let key: String = raw
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "ut2018" => Self::Ut2018,
            "leipzigce2019" => Self::LeipzigCe2019,
            "betalamp" => Self::BetaLamp,
            _ => Self::Other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ut2018 => "UT2018",
            Self::LeipzigCe2019 => "LeipzigCE2019",
            Self::BetaLamp => "BetaLAMP",
            Self::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcrResult {
    Positive,
    Negative,
    Invalid,
}

/// Maps raw PCR cells to results. Matching is on the trimmed, upper-cased cell;
/// anything not listed is `Invalid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcrValueMap {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl Default for PcrValueMap {
    fn default() -> Self {
        Self {
            positive: ["POS", "POSITIVE", "1", "+", "DETECTED"]
                .map(String::from)
                .to_vec(),
            negative: ["NEG", "NEGATIVE", "0", "-", "NOT DETECTED"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl PcrValueMap {
    pub fn classify(&self, raw: &str) -> PcrResult {
        let key = raw.trim().to_uppercase();
        if self.positive.iter().any(|v| v.trim().to_uppercase() == key) {
            PcrResult::Positive
        } else if self.negative.iter().any(|v| v.trim().to_uppercase() == key) {
            PcrResult::Negative
        } else {
            PcrResult::Invalid
        }
    }
}

/// Where columns that the schema does not name end up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnmappedColumns {
    #[default]
    Questionnaire,
    Biomarkers,
    Ignore,
}

/// Logical field → column header mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub record_id: String,
    pub source_cohort: String,
    pub qc_flag: String,
    pub visual_text: String,
    pub pcr_result: String,
    /// logical questionnaire field → header
    pub questionnaire: BTreeMap<String, String>,
    /// logical biomarker name → header
    pub biomarkers: BTreeMap<String, String>,
    pub unmapped: UnmappedColumns,
    pub pcr_values: PcrValueMap,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            record_id: "sample_id".into(),
            source_cohort: "cohort".into(),
            qc_flag: "qc_status".into(),
            visual_text: "visual_description".into(),
            pcr_result: "pcr".into(),
            questionnaire: F1_DEFAULT
                .iter()
                .map(|n| (n.to_string(), n.to_string()))
                .collect(),
            biomarkers: F2_DEFAULT
                .iter()
                .map(|n| (n.to_string(), n.to_string()))
                .collect(),
            unmapped: UnmappedColumns::Questionnaire,
            pcr_values: PcrValueMap::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub record_id: String,
    pub source_cohort: SourceCohort,
    pub qc_flag: String,
    pub visual_text: String,
    pub questionnaire: BTreeMap<String, String>,
    pub biomarkers_raw: BTreeMap<String, String>,
    pub pcr_result: PcrResult,
}

fn detect_delimiter(header_line: &str) -> u8 {
    let commas = header_line.matches(',').count();
    let semis = header_line.matches(';').count();
    if semis > commas {
        b';'
    } else {
        b','
    }
}

pub fn load_raw(path: &Path, schema: &Schema) -> Result<Vec<RawRecord>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_raw(&text, schema)
}

/// Parses delimited text (comma or semicolon, detected from the header line).
pub fn parse_raw(text: &str, schema: &Schema) -> Result<Vec<RawRecord>, IngestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or(IngestError::EmptyInput)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |field: &str, header: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == header)
            .ok_or_else(|| IngestError::MissingColumn {
                field: field.to_string(),
                header: header.to_string(),
            })
    };

    let id_col = find("record_id", &schema.record_id)?;
    let cohort_col = find("source_cohort", &schema.source_cohort)?;
    let qc_col = find("qc_flag", &schema.qc_flag)?;
    let visual_col = find("visual_text", &schema.visual_text)?;
    let pcr_col = find("pcr_result", &schema.pcr_result)?;

    let mut questionnaire_cols = Vec::new();
    for (logical, header) in &schema.questionnaire {
        questionnaire_cols.push((logical.clone(), find(logical, header)?));
    }
    let mut biomarker_cols = Vec::new();
    for (logical, header) in &schema.biomarkers {
        biomarker_cols.push((logical.clone(), find(logical, header)?));
    }

    let claimed: HashSet<usize> = [id_col, cohort_col, qc_col, visual_col, pcr_col]
        .into_iter()
        .chain(questionnaire_cols.iter().map(|(_, c)| *c))
        .chain(biomarker_cols.iter().map(|(_, c)| *c))
        .collect();
    let unmapped: Vec<(String, usize)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !claimed.contains(i))
        .map(|(i, h)| (h.clone(), i))
        .collect();

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let row = row + 1;
        let fields = result?;
        let cell = |i: usize| fields.get(i).unwrap_or("").to_string();

        let record_id = cell(id_col).trim().to_string();
        if record_id.is_empty() {
            return Err(IngestError::EmptyRecordId { row });
        }
        if !seen.insert(record_id.clone()) {
            return Err(IngestError::DuplicateRecordId(record_id));
        }

        let mut questionnaire: BTreeMap<String, String> = questionnaire_cols
            .iter()
            .map(|(name, i)| (name.clone(), cell(*i)))
            .collect();
        let mut biomarkers_raw: BTreeMap<String, String> = biomarker_cols
            .iter()
            .map(|(name, i)| (name.clone(), cell(*i)))
            .collect();
        match schema.unmapped {
            UnmappedColumns::Questionnaire => {
                for (name, i) in &unmapped {
                    questionnaire.entry(name.clone()).or_insert_with(|| cell(*i));
                }
            }
            UnmappedColumns::Biomarkers => {
                for (name, i) in &unmapped {
                    biomarkers_raw.entry(name.clone()).or_insert_with(|| cell(*i));
                }
            }
            UnmappedColumns::Ignore => {}
        }

        records.push(RawRecord {
            record_id,
            source_cohort: SourceCohort::parse(&cell(cohort_col)),
            qc_flag: cell(qc_col).trim().to_string(),
            visual_text: cell(visual_col),
            questionnaire,
            biomarkers_raw,
            pcr_result: schema.pcr_values.classify(&cell(pcr_col)),
        });
    }
    Ok(records)
}

/// Non-empty set of accepted QC flags, compared case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcFlags(BTreeSet<String>);

impl QcFlags {
    pub fn new<I, S>(flags: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = flags
            .into_iter()
            .map(|f| f.as_ref().trim().to_uppercase())
            .filter(|f| !f.is_empty())
            .collect();
        if set.is_empty() {
            return Err(IngestError::EmptyFlagSet);
        }
        Ok(Self(set))
    }

    pub fn contains(&self, flag: &str) -> bool {
        self.0.contains(&flag.trim().to_uppercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for QcFlags {
    fn default() -> Self {
        Self(["OK", "PASS", "VALID"].map(String::from).into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum QcRejection {
    BetaLampCohort,
    InvalidQcFlag { flag: String },
    InvalidPcr,
}

impl fmt::Display for QcRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BetaLampCohort => write!(f, "beta-stage LAMP cohort"),
            Self::InvalidQcFlag { flag } => write!(f, "qc flag \"{flag}\" not accepted"),
            Self::InvalidPcr => write!(f, "invalid PCR result"),
        }
    }
}

pub fn qc_rejection(record: &RawRecord, flags: &QcFlags) -> Option<QcRejection> {
    if record.source_cohort == SourceCohort::BetaLamp {
        Some(QcRejection::BetaLampCohort)
    } else if !flags.contains(&record.qc_flag) {
        Some(QcRejection::InvalidQcFlag {
            flag: record.qc_flag.clone(),
        })
    } else if record.pcr_result == PcrResult::Invalid {
        Some(QcRejection::InvalidPcr)
    } else {
        None
    }
}

/// Splits records into retained ones and rejected ids with the first failing rule.
pub fn qc_partition(
    records: Vec<RawRecord>,
    flags: &QcFlags,
) -> (Vec<RawRecord>, Vec<(String, QcRejection)>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for record in records {
        match qc_rejection(&record, flags) {
            None => kept.push(record),
            Some(reason) => rejected.push((record.record_id, reason)),
        }
    }
    (kept, rejected)
}

pub fn qc_filter(records: Vec<RawRecord>, flags: &QcFlags) -> Vec<RawRecord> {
    qc_partition(records, flags).0
}

// ---------------------------------------------------------------------------
// Visual appearance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Light,
    Average,
    Dark,
    Unknown,
}

impl Color {
    pub const KNOWN: [Color; 3] = [Color::Light, Color::Average, Color::Dark];

    pub fn name(self) -> &'static str {
        match self {
            Self::Light => "light",
            Self::Average => "average",
            Self::Dark => "dark",
            Self::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cloudiness {
    Cloudless,
    Cloudy,
    VeryCloudy,
    Unknown,
}

impl Cloudiness {
    pub const KNOWN: [Cloudiness; 3] = [
        Cloudiness::Cloudless,
        Cloudiness::Cloudy,
        Cloudiness::VeryCloudy,
    ];

    /// Human-readable name; parses back to the same category.
    pub fn name(self) -> &'static str {
        match self {
            Self::Cloudless => "cloudless",
            Self::Cloudy => "cloudy",
            Self::VeryCloudy => "very cloudy",
            Self::Unknown => "unknown",
        }
    }

    /// Identifier-safe name used in feature column names.
    pub fn ident(self) -> &'static str {
        match self {
            Self::VeryCloudy => "very_cloudy",
            other => other.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisualAppearance {
    pub color: Color,
    pub cloudiness: Cloudiness,
}

impl VisualAppearance {
    pub const UNKNOWN: VisualAppearance = VisualAppearance {
        color: Color::Unknown,
        cloudiness: Cloudiness::Unknown,
    };

    pub fn render(&self) -> String {
        format!("{}, {}", self.color.name(), self.cloudiness.name())
    }
}

/// Keyword lexicon for the two visual axes. Within an axis keywords are tried
/// longest first, so "very cloudy" wins over "cloudy".
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTable {
    color: Vec<(String, Color)>,
    cloudiness: Vec<(String, Cloudiness)>,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Default for KeywordTable {
    fn default() -> Self {
        let mut table = Self {
            color: Vec::new(),
            cloudiness: Vec::new(),
        };
        for kw in ["light", "pale", "clear-colored"] {
            table.add_color(kw, Color::Light);
        }
        for kw in ["average", "normal", "yellow"] {
            table.add_color(kw, Color::Average);
        }
        for kw in ["dark", "amber", "concentrated-color"] {
            table.add_color(kw, Color::Dark);
        }
        for kw in ["cloudless", "clear"] {
            table.add_cloudiness(kw, Cloudiness::Cloudless);
        }
        for kw in ["very cloudy", "turbid+strong"] {
            table.add_cloudiness(kw, Cloudiness::VeryCloudy);
        }
        for kw in ["cloudy", "slightly cloudy", "turbid"] {
            table.add_cloudiness(kw, Cloudiness::Cloudy);
        }
        table
    }
}

impl KeywordTable {
    /// Adds a colour keyword. Adding `Unknown` or an empty keyword is a no-op.
    pub fn add_color(&mut self, keyword: &str, color: Color) {
        let kw = normalize_ws(&keyword.to_lowercase());
        if kw.is_empty() || color == Color::Unknown {
            return;
        }
        self.color.push((kw, color));
        // stable: equal-length keywords keep insertion order
        self.color.sort_by_key(|e| std::cmp::Reverse(e.0.chars().count()));
    }

    pub fn add_cloudiness(&mut self, keyword: &str, cloudiness: Cloudiness) {
        let kw = normalize_ws(&keyword.to_lowercase());
        if kw.is_empty() || cloudiness == Cloudiness::Unknown {
            return;
        }
        self.cloudiness.push((kw, cloudiness));
        self.cloudiness.sort_by_key(|e| std::cmp::Reverse(e.0.chars().count()));
    }

    pub fn color_keywords(&self) -> impl Iterator<Item = (&str, Color)> {
        self.color.iter().map(|(k, c)| (k.as_str(), *c))
    }

    pub fn cloudiness_keywords(&self) -> impl Iterator<Item = (&str, Cloudiness)> {
        self.cloudiness.iter().map(|(k, c)| (k.as_str(), *c))
    }

    fn match_color(&self, token: &str) -> Option<Color> {
        self.color
            .iter()
            .find(|(kw, _)| contains_keyword(token, kw))
            .map(|(_, c)| *c)
    }

    fn match_cloudiness(&self, token: &str) -> Option<Cloudiness> {
        self.cloudiness
            .iter()
            .find(|(kw, _)| contains_keyword(token, kw))
            .map(|(_, c)| *c)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '+'
}

/// Keyword occurrence delimited by non-word characters (or the token edges).
fn contains_keyword(token: &str, keyword: &str) -> bool {
    token.match_indices(keyword).any(|(start, m)| {
        let before_ok = token[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = token[start + m.len()..]
            .chars()
            .next()
            .is_none_or(|c| !is_word_char(c));
        before_ok && after_ok
    })
}

/// Deletes parenthesized segments (nesting-aware). An unclosed `(` swallows
/// the rest of the string; a stray `)` is dropped.
fn strip_parentheticals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => {
                if depth == 0 {
                    out.push(' ');
                }
                depth += 1;
            }
            ')' => {
                if depth > 0 {
                    depth -= 1;
                } else {
                    out.push(' ');
                }
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

pub fn parse_visual(text: &str) -> VisualAppearance {
    parse_visual_with(text, &KeywordTable::default())
}

pub fn parse_visual_with(text: &str, table: &KeywordTable) -> VisualAppearance {
    let cleaned = strip_parentheticals(text).to_lowercase();
    let mut out = VisualAppearance::UNKNOWN;
    for token in cleaned.split([',', ';', '/']) {
        let token = normalize_ws(token);
        if token.is_empty() {
            continue;
        }
        if out.color == Color::Unknown {
            if let Some(c) = table.match_color(&token) {
                out.color = c;
            }
        }
        if out.cloudiness == Cloudiness::Unknown {
            if let Some(c) = table.match_cloudiness(&token) {
                out.cloudiness = c;
            }
        }
        if out.color != Color::Unknown && out.cloudiness != Cloudiness::Unknown {
            break;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Semi-quantitative values
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SemiQuantValue {
    Missing,
    Value { value: f64, was_inequality: bool },
}

impl SemiQuantValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Missing => None,
            Self::Value { value, .. } => Some(value),
        }
    }

    pub fn was_inequality(self) -> bool {
        matches!(
            self,
            Self::Value {
                was_inequality: true,
                ..
            }
        )
    }

    pub fn is_missing(self) -> bool {
        matches!(self, Self::Missing)
    }
}

// Two-character markers first so "<=" is not read as "<" followed by "=5".
const INEQUALITY_MARKERS: [&str; 6] = ["<=", ">=", "≤", "≥", "<", ">"];

/// `"<x"` and `">x"` map to `x` itself; a decimal comma is accepted.
pub fn parse_semiquant(text: &str) -> SemiQuantValue {
    let mut s = text.trim();
    let mut was_inequality = false;
    if let Some(marker) = INEQUALITY_MARKERS.iter().find(|m| s.starts_with(**m)) {
        s = s[marker.len()..].trim_start();
        was_inequality = true;
    }
    if s.is_empty() {
        return SemiQuantValue::Missing;
    }

    let normalized;
    let s = if s.contains(',') {
        if s.contains('.') || s.matches(',').count() > 1 {
            return SemiQuantValue::Missing;
        }
        normalized = s.replace(',', ".");
        normalized.as_str()
    } else {
        s
    };

    let numeric_chars = s
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    if !numeric_chars || !s.chars().any(|c| c.is_ascii_digit()) {
        return SemiQuantValue::Missing;
    }
    match s.parse::<f64>() {
        Ok(value) if value.is_finite() => SemiQuantValue::Value {
            value,
            was_inequality,
        },
        _ => SemiQuantValue::Missing,
    }
}
