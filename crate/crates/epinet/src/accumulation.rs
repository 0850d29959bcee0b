//! Stanza-level co-occurrence adjacency and per-unit accumulation.
//!
//! For each stanza of a unit's conversation we form a binary adjacency
//! matrix over the codebook: entry (i, j) is 1 when codes i and j co-occur
//! in that stanza. Summing a unit's stanza matrices gives its cumulative
//! network of pair counts, which is then flattened to the row-major
//! upper-triangle vector and projected onto the unit sphere. All downstream
//! modeling consumes those normalized vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, UtteranceRecord};
use crate::error::{Error, Result};

/// Number of unordered code pairs for `k` codes.
pub fn pair_count(k: usize) -> usize {
    k * (k - 1) / 2
}

/// Position of pair `(i, j)` (with `i < j < k`) in the row-major
/// upper-triangle layout: all pairs (0,1), (0,2), ..., (0,k-1), (1,2), ...
pub fn pair_index(i: usize, j: usize, k: usize) -> usize {
    assert!(i < j && j < k, "pair_index requires i < j < k");
    // Pairs in rows 0..i come first: row r contributes k-1-r entries.
    i * (2 * k - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`]: the `(i, j)` pair stored at `index`.
pub fn pair_of(index: usize, k: usize) -> (usize, usize) {
    let mut remaining = index;
    for i in 0..k {
        let row_len = k - 1 - i;
        if remaining < row_len {
            return (i, i + 1 + remaining);
        }
        remaining -= row_len;
    }
    panic!("pair index {index} out of range for {k} codes");
}

/// What counts as a co-occurrence within a stanza.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CooccurrenceMode {
    /// Codes i and j co-occur when each appears somewhere in the stanza,
    /// not necessarily on the same line.
    #[default]
    StanzaUnion,
    /// Codes i and j co-occur only when some single line carries both.
    PerLine,
}

/// Identifies the stanza an adjacency matrix was built from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StanzaKey {
    pub unit_id: String,
    pub condition: String,
    pub conversation_id: String,
    pub stanza_id: String,
}

/// Binary co-occurrence matrix for one stanza: symmetric, zero diagonal.
///
/// `presence` records which individual codes appeared in the stanza at all;
/// it is carried along because group-level node sizes need per-code
/// frequencies, which cannot be recovered from pair counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub key: StanzaKey,
    size: usize,
    data: Vec<u8>,
    presence: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.size + j]
    }

    /// Per-code stanza presence (1 when the code appeared in the stanza).
    pub fn presence(&self) -> &[u8] {
        &self.presence
    }
}

/// Builds the adjacency matrix for one stanza's lines.
///
/// All lines must belong to the same stanza (same unit, condition,
/// conversation, stanza label) and carry `codebook_len` code values.
pub fn stanza_adjacency(
    lines: &[&UtteranceRecord],
    codebook_len: usize,
    mode: CooccurrenceMode,
) -> Result<AdjacencyMatrix> {
    let first = lines
        .first()
        .ok_or_else(|| Error::EmptyInput("stanza has no lines".into()))?;
    let key = StanzaKey {
        unit_id: first.unit_id.clone(),
        condition: first.condition.clone(),
        conversation_id: first.conversation_id.clone(),
        stanza_id: first.stanza_id.clone(),
    };
    for line in lines {
        if line.unit_id != key.unit_id
            || line.condition != key.condition
            || line.conversation_id != key.conversation_id
            || line.stanza_id != key.stanza_id
        {
            return Err(Error::InvalidParameter(
                "stanza_adjacency given lines from different stanzas".into(),
            ));
        }
        if line.code_values.len() != codebook_len {
            return Err(Error::DimensionMismatch(format!(
                "line has {} code values, expected {}",
                line.code_values.len(),
                codebook_len
            )));
        }
    }

    let k = codebook_len;
    let mut presence = vec![0u8; k];
    for line in lines {
        for (p, &v) in presence.iter_mut().zip(&line.code_values) {
            *p |= v;
        }
    }

    let mut data = vec![0u8; k * k];
    match mode {
        CooccurrenceMode::StanzaUnion => {
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        data[i * k + j] = presence[i] & presence[j];
                    }
                }
            }
        }
        CooccurrenceMode::PerLine => {
            for line in lines {
                for i in 0..k {
                    if line.code_values[i] == 0 {
                        continue;
                    }
                    for j in 0..k {
                        if i != j && line.code_values[j] == 1 {
                            data[i * k + j] = 1;
                        }
                    }
                }
            }
        }
    }

    Ok(AdjacencyMatrix { key, size: k, data, presence })
}

/// Sum of a unit's stanza adjacency matrices, stored as upper-triangle pair
/// counts, plus per-code stanza frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativeNetwork {
    pub unit_id: String,
    pub condition: String,
    size: usize,
    counts: Vec<u32>,
    code_counts: Vec<u32>,
    pub stanza_count: u32,
}

impl CumulativeNetwork {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Pair counts in row-major upper-triangle order.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of stanzas in which pair `(i, j)` co-occurred.
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[pair_index(i.min(j), i.max(j), self.size)]
    }

    /// Number of stanzas in which each individual code appeared.
    pub fn code_counts(&self) -> &[u32] {
        &self.code_counts
    }

    /// `(i, j, count)` triples in layout order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.counts.iter().enumerate().map(move |(p, &c)| {
            let (i, j) = pair_of(p, self.size);
            (i, j, c)
        })
    }

    pub fn vectorize(&self) -> NetworkVector {
        NetworkVector {
            size: self.size,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Sums stanza adjacency matrices belonging to one unit.
pub fn accumulate_unit(stanzas: &[AdjacencyMatrix]) -> Result<CumulativeNetwork> {
    let first = stanzas
        .first()
        .ok_or_else(|| Error::EmptyInput("no stanzas to accumulate".into()))?;
    let (unit_id, condition, k) =
        (first.key.unit_id.clone(), first.key.condition.clone(), first.size);

    let mut counts = vec![0u32; pair_count(k)];
    let mut code_counts = vec![0u32; k];
    for stanza in stanzas {
        if stanza.key.unit_id != unit_id || stanza.key.condition != condition {
            return Err(Error::InvalidParameter(
                "accumulate_unit given stanzas from different units".into(),
            ));
        }
        if stanza.size != k {
            return Err(Error::DimensionMismatch(format!(
                "stanza matrix is {}x{}, expected {}x{}",
                stanza.size, stanza.size, k, k
            )));
        }
        for (p, count) in counts.iter_mut().enumerate() {
            let (i, j) = pair_of(p, k);
            *count += u32::from(stanza.get(i, j));
        }
        for (cc, &p) in code_counts.iter_mut().zip(stanza.presence()) {
            *cc += u32::from(p);
        }
    }

    Ok(CumulativeNetwork {
        unit_id,
        condition,
        size: k,
        counts,
        code_counts,
        stanza_count: stanzas.len() as u32,
    })
}

/// Row-major upper-triangle flattening of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkVector {
    size: usize,
    values: Vec<f64>,
}

impl NetworkVector {
    /// Flattens a square symmetric matrix (diagonal entries are ignored).
    #[allow(clippy::needless_range_loop)] // (i, j) pairs mirror the matrix layout
    pub fn from_matrix(matrix: &[Vec<f64>]) -> Result<Self> {
        let k = matrix.len();
        for row in matrix {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "matrix row has {} entries, expected {}",
                    row.len(),
                    k
                )));
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut values = Vec::with_capacity(pair_count(k));
        for i in 0..k {
            for j in (i + 1)..k {
                values.push(matrix[i][j]);
            }
        }
        Ok(NetworkVector { size: k, values })
    }

    /// Number of codes the vector was built over.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebuilds the symmetric matrix (zero diagonal) from the flat vector.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.size;
        let mut matrix = vec![vec![0.0; k]; k];
        for (p, &v) in self.values.iter().enumerate() {
            let (i, j) = pair_of(p, k);
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
        matrix
    }
}

/// A network vector scaled to unit length, or flagged as the zero vector.
///
/// Projecting onto the unit sphere removes overall talkativeness: a unit
/// that produced the same relative pattern of connections twice as often
/// lands on the same point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedVector {
    size: usize,
    values: Vec<f64>,
    /// True when the input had no connections at all; the vector is all
    /// zeros rather than a point on the sphere.
    pub zero_flag: bool,
}

impl NormalizedVector {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Divides a vector by its Euclidean norm.
pub fn spherical_normalize(vector: &NetworkVector) -> NormalizedVector {
    let norm = vector.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return NormalizedVector {
            size: vector.size,
            values: vec![0.0; vector.values.len()],
            zero_flag: true,
        };
    }
    NormalizedVector {
        size: vector.size,
        values: vector.values.iter().map(|v| v / norm).collect(),
        zero_flag: false,
    }
}

/// Everything accumulation produces for one unit, bundled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitNetwork {
    pub cumulative: CumulativeNetwork,
    pub vector: NetworkVector,
    pub normalized: NormalizedVector,
}

impl UnitNetwork {
    pub fn unit_id(&self) -> &str {
        &self.cumulative.unit_id
    }

    pub fn condition(&self) -> &str {
        &self.cumulative.condition
    }
}

/// Runs adjacency and accumulation over a segmented corpus.
///
/// Records are grouped into stanzas by (unit, condition, conversation,
/// stanza label); each unit-within-condition yields one [`UnitNetwork`].
/// The result is sorted by (unit id, condition).
pub fn accumulate_corpus(corpus: &Corpus, mode: CooccurrenceMode) -> Result<Vec<UnitNetwork>> {
    let k = corpus.codebook().len();

    let mut stanza_lines: BTreeMap<StanzaKey, Vec<&UtteranceRecord>> = BTreeMap::new();
    for rec in corpus.records() {
        let key = StanzaKey {
            unit_id: rec.unit_id.clone(),
            condition: rec.condition.clone(),
            conversation_id: rec.conversation_id.clone(),
            stanza_id: rec.stanza_id.clone(),
        };
        stanza_lines.entry(key).or_default().push(rec);
    }

    let mut per_unit: BTreeMap<(String, String), Vec<AdjacencyMatrix>> = BTreeMap::new();
    for (key, lines) in &stanza_lines {
        let adjacency = stanza_adjacency(lines, k, mode)?;
        per_unit
            .entry((key.unit_id.clone(), key.condition.clone()))
            .or_default()
            .push(adjacency);
    }

    let mut units = Vec::with_capacity(per_unit.len());
    for stanzas in per_unit.values() {
        let cumulative = accumulate_unit(stanzas)?;
        let vector = cumulative.vectorize();
        let normalized = spherical_normalize(&vector);
        units.push(UnitNetwork { cumulative, vector, normalized });
    }
    Ok(units)
}
