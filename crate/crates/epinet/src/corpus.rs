//! Corpus ingestion, validation, and stanza segmentation.
//!
//! A corpus is a flat list of utterance records, each tagged with the unit of
//! analysis it belongs to (typically a study participant), an experimental
//! condition, optional conversation/stanza labels, and one binary value per
//! code in the codebook. Everything downstream (adjacency, accumulation,
//! projection) consumes the segmented corpus produced here.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single concept in the coding scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    /// Short identifier used in CSV headers and JSON artifacts, e.g. `"PCC"`.
    pub id: String,
    /// Human-readable name, e.g. `"Person-Centered Care"`.
    #[serde(default)]
    pub label: String,
    /// Optional longer description of what the code captures.
    #[serde(default)]
    pub definition: String,
}

/// An ordered list of codes.
///
/// The order is significant: it fixes the row/column layout of every
/// adjacency matrix and the element order of every network vector, so two
/// codebooks with the same codes in different orders are different codebooks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    codes: Vec<Code>,
}

impl Codebook {
    /// Builds a codebook, rejecting duplicate or empty ids and fewer than
    /// two codes (a one-code network has no pairs to count).
    pub fn new(codes: Vec<Code>) -> Result<Self> {
        if codes.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "codebook needs at least 2 codes, got {}",
                codes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for code in &codes {
            if code.id.is_empty() {
                return Err(Error::InvalidParameter("empty code id".into()));
            }
            if !seen.insert(code.id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate code id `{}`",
                    code.id
                )));
            }
        }
        Ok(Codebook { codes })
    }

    /// Parses `{"codes": [{"id": ..., "label": ..., "definition": ...}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            codes: Vec<Code>,
        }
        let wire: Wire = serde_json::from_str(text)?;
        Codebook::new(wire.codes)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Codebook::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[Code] {
        &self.codes
    }

    /// Position of a code id in the canonical order, if present.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.codes.iter().position(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(|c| c.id.as_str())
    }

    /// Number of unordered code pairs, `k * (k - 1) / 2`.
    pub fn pair_count(&self) -> usize {
        self.codes.len() * (self.codes.len() - 1) / 2
    }
}

/// One utterance line of a transcript, with its binary code vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub unit_id: String,
    pub condition: String,
    /// Conversation/session the line belongs to; empty when the source CSV
    /// has no conversation column.
    #[serde(default)]
    pub conversation_id: String,
    /// Stanza label; empty until segmentation assigns one (or the source CSV
    /// carries an explicit stanza column).
    #[serde(default)]
    pub stanza_id: String,
    #[serde(default)]
    pub speaker: String,
    pub text: String,
    /// One 0/1 entry per codebook code, in codebook order.
    pub code_values: Vec<u8>,
}

/// Maps logical fields onto CSV column names.
///
/// Every column named here must exist in the file; optional fields
/// (`conversation`, `stanza`, `speaker`) may be left unset, in which case the
/// corresponding record fields stay empty. Code columns default to the code
/// ids themselves; `codes` overrides individual ids with other column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub unit: String,
    pub condition: String,
    #[serde(default)]
    pub conversation: Option<String>,
    #[serde(default)]
    pub stanza: Option<String>,
    #[serde(default)]
    pub speaker: Option<String>,
    pub text: String,
    /// code id -> column name, for codes whose column is not named after the id.
    #[serde(default)]
    pub codes: BTreeMap<String, String>,
}

impl Default for CsvSchema {
    /// Column names matching the transcript layout this tool was built
    /// around: `Subject`, `Condition`, `Stanza`, `Raw data`, plus one column
    /// per code id.
    fn default() -> Self {
        CsvSchema {
            unit: "Subject".into(),
            condition: "Condition".into(),
            conversation: None,
            stanza: Some("Stanza".into()),
            speaker: None,
            text: "Raw data".into(),
            codes: BTreeMap::new(),
        }
    }
}

impl CsvSchema {
    /// Column name holding the values for `code_id`.
    fn code_column<'a>(&'a self, code_id: &'a str) -> &'a str {
        self.codes.get(code_id).map(String::as_str).unwrap_or(code_id)
    }
}

/// A validated corpus: a codebook plus utterance records whose code vectors
/// all have codebook length and contain only 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    codebook: Codebook,
    records: Vec<UtteranceRecord>,
}

impl Corpus {
    pub fn new(codebook: Codebook, records: Vec<UtteranceRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for (idx, rec) in records.iter().enumerate() {
            if rec.code_values.len() != codebook.len() {
                return Err(Error::DimensionMismatch(format!(
                    "record {} has {} code values, codebook has {} codes",
                    idx + 1,
                    rec.code_values.len(),
                    codebook.len()
                )));
            }
            if let Some(v) = rec.code_values.iter().find(|v| **v > 1) {
                return Err(Error::InvalidValue {
                    row: idx + 1,
                    message: format!("code value {v} is not 0 or 1"),
                });
            }
        }
        Ok(Corpus { codebook, records })
    }

    /// Reads a coded transcript CSV. Row numbers in errors are 1-based data
    /// rows (header excluded).
    pub fn from_csv_reader(
        reader: impl Read,
        schema: &CsvSchema,
        codebook: &Codebook,
    ) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);

        let headers = csv_reader.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let column_index = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };

        let unit_col = column_index(&schema.unit)?;
        let condition_col = column_index(&schema.condition)?;
        let text_col = column_index(&schema.text)?;
        let conversation_col = schema.conversation.as_deref().map(&column_index).transpose()?;
        let stanza_col = schema.stanza.as_deref().map(&column_index).transpose()?;
        let speaker_col = schema.speaker.as_deref().map(&column_index).transpose()?;
        // Mapped code columns must name real codes and real columns.
        for id in schema.codes.keys() {
            if codebook.index_of(id).is_none() {
                return Err(Error::UnknownCode(id.clone()));
            }
        }
        let code_cols: Vec<usize> = codebook
            .ids()
            .map(|id| column_index(schema.code_column(id)))
            .collect::<Result<_>>()?;

        let mut records = Vec::new();
        for (i, row) in csv_reader.records().enumerate() {
            let row_number = i + 1;
            let row = row?;
            let field = |col: usize| row.get(col).unwrap_or("").trim().to_string();

            let mut code_values = Vec::with_capacity(code_cols.len());
            for (&col, id) in code_cols.iter().zip(codebook.ids()) {
                let cell = row.get(col).unwrap_or("").trim();
                match cell {
                    "0" => code_values.push(0),
                    "1" => code_values.push(1),
                    other => {
                        return Err(Error::InvalidValue {
                            row: row_number,
                            message: format!("code `{id}`: expected 0 or 1, got `{other}`"),
                        })
                    }
                }
            }

            records.push(UtteranceRecord {
                unit_id: field(unit_col),
                condition: field(condition_col),
                conversation_id: conversation_col.map(field).unwrap_or_default(),
                stanza_id: stanza_col.map(field).unwrap_or_default(),
                speaker: speaker_col.map(field).unwrap_or_default(),
                text: row.get(text_col).unwrap_or("").to_string(),
                code_values,
            });
        }

        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Corpus::new(codebook.clone(), records)
    }

    pub fn from_csv_path(
        path: impl AsRef<Path>,
        schema: &CsvSchema,
        codebook: &Codebook,
    ) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Corpus::from_csv_reader(file, schema, codebook)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: Corpus = serde_json::from_str(text)?;
        Corpus::new(corpus.codebook, corpus.records)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct conditions, sorted.
    pub fn conditions(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.condition.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Distinct unit ids, sorted.
    pub fn unit_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.unit_id.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

/// How stanza labels are assigned during segmentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentStrategy {
    /// Use the stanza labels already present on every record.
    #[default]
    ExplicitColumn,
    /// Treat each whole conversation as a single stanza
    /// (`stanza_id := conversation_id`).
    WholeConversation,
}

/// Segmentation parameters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    #[serde(default)]
    pub strategy: SegmentStrategy,
    /// Unit ids that are not units of analysis (e.g. a simulated interlocutor
    /// or an interviewer). Their lines are re-attributed to the one real unit
    /// present in the same stanza, so their codes count toward that unit's
    /// networks.
    #[serde(default)]
    pub non_units: BTreeSet<String>,
}

/// Assigns a stanza id to every record and re-attributes non-unit lines.
///
/// Record order, text, and code values are preserved; only `stanza_id`,
/// `unit_id` (for re-attributed lines), and `speaker` (set to the original
/// unit id of a re-attributed line when the speaker field was empty) change.
///
/// Errors when the chosen strategy finds no label for some rows, or when a
/// non-unit line sits in a stanza shared by more than one real unit (there is
/// no defensible owner to credit its codes to).
pub fn segment_stanzas(corpus: &Corpus, options: &SegmentOptions) -> Result<Corpus> {
    let mut records = corpus.records().to_vec();

    let mut missing = Vec::new();
    for (i, rec) in records.iter_mut().enumerate() {
        match options.strategy {
            SegmentStrategy::ExplicitColumn => {
                if rec.stanza_id.is_empty() {
                    missing.push(i + 1);
                }
            }
            SegmentStrategy::WholeConversation => {
                rec.stanza_id = rec.conversation_id.clone();
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Segmentation {
            rows: missing,
            message: "missing stanza label".into(),
        });
    }

    if !options.non_units.is_empty() {
        // Stanza key -> distinct real units observed in that stanza. The key
        // deliberately excludes unit_id: a non-unit line shares a stanza with
        // whatever real unit spoke in the same conversation and stanza.
        let mut units_in_stanza: BTreeMap<(String, String, String), BTreeSet<String>> =
            BTreeMap::new();
        for rec in &records {
            if !options.non_units.contains(&rec.unit_id) {
                units_in_stanza
                    .entry(stanza_group_key(rec))
                    .or_default()
                    .insert(rec.unit_id.clone());
            }
        }

        let mut ambiguous = Vec::new();
        for (i, rec) in records.iter_mut().enumerate() {
            if !options.non_units.contains(&rec.unit_id) {
                continue;
            }
            match units_in_stanza.get(&stanza_group_key(rec)) {
                Some(units) if units.len() == 1 => {
                    let owner = units.iter().next().unwrap().clone();
                    if rec.speaker.is_empty() {
                        rec.speaker = rec.unit_id.clone();
                    }
                    rec.unit_id = owner;
                }
                Some(_) => ambiguous.push(i + 1),
                // A stanza with no real unit at all: leave the line alone; it
                // will simply not contribute to any unit's networks.
                None => {}
            }
        }
        if !ambiguous.is_empty() {
            return Err(Error::Segmentation {
                rows: ambiguous,
                message: "non-unit line in a stanza shared by multiple units".into(),
            });
        }
    }

    Corpus::new(corpus.codebook().clone(), records)
}

fn stanza_group_key(rec: &UtteranceRecord) -> (String, String, String) {
    (
        rec.condition.clone(),
        rec.conversation_id.clone(),
        rec.stanza_id.clone(),
    )
}
