//! Pattern-based automated coding and inter-rater reliability.
//!
//! The classifier assigns binary codes to utterance text by regular-
//! expression match. Agreement between the classifier and a human-coded
//! handset is summarized by Cohen's kappa, raw percent agreement, and a
//! Monte-Carlo rho: the estimated probability that a handset drawn from a
//! population whose true kappa sits at the acceptance threshold would have
//! shown agreement at least as high as observed. A small rho means the
//! observed handset kappa is unlikely to be an overestimate artifact.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Per-code regular-expression patterns.
///
/// Codes absent from the map are treated as externally coded: the classifier
/// never touches them.
#[derive(Debug, Clone)]
pub struct PatternClassifier {
    patterns: BTreeMap<String, Vec<Regex>>,
    pub case_sensitive: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ClassifierOptions {
    #[serde(default)]
    case_sensitive: bool,
}

impl PatternClassifier {
    /// Compiles a pattern set. Every listed code needs at least one pattern,
    /// and every pattern must compile.
    pub fn new(
        patterns: BTreeMap<String, Vec<String>>,
        case_sensitive: bool,
    ) -> Result<Self> {
        let mut compiled = BTreeMap::new();
        for (code_id, sources) in patterns {
            if sources.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "code `{code_id}` has no patterns; omit it to leave it externally coded"
                )));
            }
            let mut regexes = Vec::with_capacity(sources.len());
            for source in &sources {
                let regex = RegexBuilder::new(source)
                    .case_insensitive(!case_sensitive)
                    .build()
                    .map_err(|e| {
                        Error::InvalidConfig(format!(
                            "code `{code_id}` pattern `{source}`: {e}"
                        ))
                    })?;
                regexes.push(regex);
            }
            compiled.insert(code_id, regexes);
        }
        Ok(PatternClassifier { patterns: compiled, case_sensitive })
    }

    /// Parses the JSON layout `{code_id: [patterns], "options": {...}}`.
    /// The key `"options"` is reserved and cannot name a code.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut options = ClassifierOptions::default();
        let mut patterns = BTreeMap::new();
        for (key, value) in raw {
            if key == "options" {
                options = serde_json::from_value(value)?;
            } else {
                let sources: Vec<String> = serde_json::from_value(value).map_err(|e| {
                    Error::InvalidConfig(format!(
                        "code `{key}`: expected an array of pattern strings ({e})"
                    ))
                })?;
                patterns.insert(key, sources);
            }
        }
        PatternClassifier::new(patterns, options.case_sensitive)
    }

    pub fn from_json_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        PatternClassifier::from_json(&std::fs::read_to_string(path)?)
    }

    /// Code ids the classifier knows patterns for, in sorted order.
    pub fn code_ids(&self) -> impl Iterator<Item = &str> {
        self.patterns.keys().map(String::as_str)
    }

    /// True when any pattern for `code_id` matches anywhere in `text`.
    pub fn matches(&self, code_id: &str, text: &str) -> Option<bool> {
        self.patterns
            .get(code_id)
            .map(|regexes| regexes.iter().any(|r| r.is_match(text)))
    }
}

/// Recodes `target_codes` on every record by pattern match; all other codes
/// keep their existing values.
pub fn apply_classifier(
    classifier: &PatternClassifier,
    corpus: &Corpus,
    target_codes: &[String],
) -> Result<Corpus> {
    let mut targets = Vec::with_capacity(target_codes.len());
    for code_id in target_codes {
        let index = corpus
            .codebook()
            .index_of(code_id)
            .ok_or_else(|| Error::UnknownCode(code_id.clone()))?;
        if !classifier.patterns.contains_key(code_id) {
            return Err(Error::InvalidConfig(format!(
                "classifier has no patterns for target code `{code_id}`"
            )));
        }
        targets.push((code_id.as_str(), index));
    }

    let mut records = corpus.records().to_vec();
    for rec in &mut records {
        for &(code_id, index) in &targets {
            let hit = classifier.matches(code_id, &rec.text).unwrap_or(false);
            rec.code_values[index] = u8::from(hit);
        }
    }
    Corpus::new(corpus.codebook().clone(), records)
}

/// 2x2 agreement table: `counts[a][b]` is the number of items rater 1 coded
/// `a` and rater 2 coded `b` (0 = absent, 1 = present).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Result<Self> {
        let n: u64 = counts.iter().flatten().sum();
        if n == 0 {
            return Err(Error::EmptyInput("confusion matrix has no observations".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    /// Tallies two aligned binary ratings of the same items.
    pub fn from_ratings(rater1: &[u8], rater2: &[u8]) -> Result<Self> {
        if rater1.len() != rater2.len() {
            return Err(Error::DimensionMismatch(format!(
                "ratings have different lengths: {} vs {}",
                rater1.len(),
                rater2.len()
            )));
        }
        let mut counts = [[0u64; 2]; 2];
        for (i, (&a, &b)) in rater1.iter().zip(rater2).enumerate() {
            if a > 1 || b > 1 {
                return Err(Error::InvalidValue {
                    row: i + 1,
                    message: format!("rating values must be 0 or 1, got ({a}, {b})"),
                });
            }
            counts[a as usize][b as usize] += 1;
        }
        ConfusionMatrix::new(counts)
    }

    pub fn counts(&self) -> &[[u64; 2]; 2] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Chance-corrected agreement for one confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Fraction of items in agreement, diagonal / N, in [0, 1].
    pub percent_agreement: f64,
    /// Set when chance agreement is 1 (both raters constant), where kappa's
    /// defining ratio is 0/0; the reported kappa is then 1 for perfect
    /// agreement and 0 otherwise.
    pub degenerate: bool,
}

/// Cohen's kappa, (p_o - p_e) / (1 - p_e).
///
/// Computed as an integer ratio before the single final division:
/// with S = row0*col0 + row1*col1, kappa = (N*diagonal - S) / (N^2 - S).
/// This keeps results exact for exactly-representable ratios; e.g. the
/// table [[8,2],[2,8]] yields kappa = 120/200 = 0.6 with no rounding
/// beyond the one division.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> KappaResult {
    let t = cm.counts;
    let n = (t[0][0] + t[0][1] + t[1][0] + t[1][1]) as u128;
    let diagonal = (t[0][0] + t[1][1]) as u128;
    let row0 = (t[0][0] + t[0][1]) as u128;
    let row1 = (t[1][0] + t[1][1]) as u128;
    let col0 = (t[0][0] + t[1][0]) as u128;
    let col1 = (t[0][1] + t[1][1]) as u128;
    let s = row0 * col0 + row1 * col1;

    let percent_agreement = diagonal as f64 / n as f64;
    let denominator = (n * n) as i128 - s as i128;
    if denominator == 0 {
        // Both raters constant: p_e = 1. All mass must sit in one diagonal
        // cell, so agreement is perfect, but keep the p_o < 1 branch anyway.
        let kappa = if diagonal == n { 1.0 } else { 0.0 };
        return KappaResult { kappa, percent_agreement, degenerate: true };
    }
    let numerator = (n * diagonal) as i128 - s as i128;
    KappaResult {
        kappa: numerator as f64 / denominator as f64,
        percent_agreement,
        degenerate: false,
    }
}

/// Monte-Carlo budget for [`shaffer_rho`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub replicates: u32,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { replicates: 1000, seed: 42 }
    }
}

/// The unique symmetric 2x2 probability table with marginal baserate `b`
/// and population kappa `k`:
///
/// ```text
/// p11 = b^2 + k*b*(1-b)        p10 = p01 = b*(1-b)*(1-k)
/// p00 = (1-b)^2 + k*b*(1-b)
/// ```
///
/// Setting k = 0 recovers the independence table; k = 1 puts all mass on
/// the diagonal. Cell probabilities stay non-negative for
/// k >= -min(b, 1-b) / max(b, 1-b), which covers every kappa a threshold
/// would realistically use.
fn population_cells(baserate: f64, kappa: f64) -> Result<[f64; 4]> {
    let b = baserate;
    let p11 = b * b + kappa * b * (1.0 - b);
    let p10 = b * (1.0 - b) * (1.0 - kappa);
    let p00 = (1.0 - b) * (1.0 - b) + kappa * b * (1.0 - b);
    let cells = [p00, p10, p10, p11]; // order: 00, 01, 10, 11
    if cells.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold kappa {kappa} is unreachable at baserate {b}"
        )));
    }
    Ok(cells)
}

fn splitmix64(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimates rho: the fraction of simulated handsets, drawn from a
/// population whose true kappa equals `threshold_kappa` at the given
/// baserate, whose sample kappa is at least `observed_kappa`.
///
/// Each replicate derives its own generator from (seed, replicate index),
/// so the estimate does not depend on evaluation order and replicates could
/// be computed in parallel without changing the result.
pub fn shaffer_rho(
    observed_kappa: f64,
    handset_size: usize,
    baserate: f64,
    threshold_kappa: f64,
    mc: &McSettings,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&baserate) || baserate == 0.0 || baserate == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "baserate must be strictly between 0 and 1, got {baserate}"
        )));
    }
    if !(-1.0..=1.0).contains(&observed_kappa) {
        return Err(Error::InvalidParameter(format!(
            "observed kappa must be in [-1, 1], got {observed_kappa}"
        )));
    }
    if handset_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "handset size must be at least 2, got {handset_size}"
        )));
    }
    if mc.replicates < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 Monte-Carlo replicates for a stable rho, got {}",
            mc.replicates
        )));
    }

    let cells = population_cells(baserate, threshold_kappa)?;
    let cumulative = [
        cells[0],
        cells[0] + cells[1],
        cells[0] + cells[1] + cells[2],
    ];

    let mut hits = 0u32;
    for replicate in 0..mc.replicates {
        // Two mixing rounds decorrelate nearby (seed, replicate) pairs.
        let stream = splitmix64(splitmix64(mc.seed ^ splitmix64(replicate as u64 + 1)));
        let mut rng = ChaCha8Rng::seed_from_u64(stream);

        let mut counts = [[0u64; 2]; 2];
        for _ in 0..handset_size {
            let u: f64 = rng.random();
            let cell = cumulative.iter().position(|&c| u < c).unwrap_or(3);
            counts[cell / 2][cell % 2] += 1;
        }
        let sample = cohen_kappa(&ConfusionMatrix { counts });
        if sample.kappa >= observed_kappa {
            hits += 1;
        }
    }
    Ok(hits as f64 / mc.replicates as f64)
}

/// Handset validation summary, serialized into pipeline reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrReport {
    pub kappa: f64,
    pub percent_agreement: f64,
    pub rho: f64,
    pub handset_size: usize,
    pub seed: u64,
}
