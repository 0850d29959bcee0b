//! Condition-level aggregation of unit networks and comparison networks.
//!
//! A group network collapses all units of one condition into a single
//! weighted network, either by summing raw pair counts or by averaging the
//! units' normalized vectors (the latter weights every unit equally no
//! matter how much they talked, and is the right scale for subtraction).
//! Subtracting two group networks gives the signed comparison network used
//! in the difference plots.

use serde::{Deserialize, Serialize};

use crate::accumulation::{pair_of, UnitNetwork};
use crate::corpus::Codebook;
use crate::error::{Error, Result};

/// How unit networks are collapsed into a condition-level network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMode {
    /// Cell-wise sum of the units' raw pair counts.
    SumOfCounts,
    /// Arithmetic mean of the units' normalized vectors.
    #[default]
    MeanOfNormalized,
}

/// All units of one condition collapsed into one weighted network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNetwork {
    pub condition: String,
    pub mode: GroupMode,
    size: usize,
    weights: Vec<f64>,
    /// Per-code frequency used for node sizing: total stanza count in sum
    /// mode, mean relative stanza frequency in mean mode.
    node_frequencies: Vec<f64>,
    pub unit_count: usize,
}

impl GroupNetwork {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Edge weights in row-major upper-triangle order; non-negative.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_frequencies(&self) -> &[f64] {
        &self.node_frequencies
    }
}

/// Collapses `units` (all belonging to `condition`) into one network.
pub fn group_network(
    units: &[UnitNetwork],
    condition: &str,
    mode: GroupMode,
) -> Result<GroupNetwork> {
    if units.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no units to aggregate for condition `{condition}`"
        )));
    }
    let k = units[0].cumulative.size();
    for unit in units {
        if unit.condition() != condition {
            return Err(Error::InvalidParameter(format!(
                "unit `{}` belongs to condition `{}`, not `{condition}`",
                unit.unit_id(),
                unit.condition()
            )));
        }
        if unit.cumulative.size() != k {
            return Err(Error::DimensionMismatch(
                "units are over different code counts".into(),
            ));
        }
    }

    let pair_len = units[0].vector.len();
    let mut weights = vec![0.0; pair_len];
    let mut node_frequencies = vec![0.0; k];
    match mode {
        GroupMode::SumOfCounts => {
            for unit in units {
                for (w, &c) in weights.iter_mut().zip(unit.cumulative.counts()) {
                    *w += c as f64;
                }
                for (f, &c) in node_frequencies.iter_mut().zip(unit.cumulative.code_counts()) {
                    *f += c as f64;
                }
            }
        }
        GroupMode::MeanOfNormalized => {
            let n = units.len() as f64;
            for unit in units {
                for (w, &v) in weights.iter_mut().zip(unit.normalized.values()) {
                    *w += v / n;
                }
                let stanzas = unit.cumulative.stanza_count as f64;
                for (f, &c) in node_frequencies.iter_mut().zip(unit.cumulative.code_counts()) {
                    *f += c as f64 / stanzas / n;
                }
            }
        }
    }

    Ok(GroupNetwork {
        condition: condition.to_string(),
        mode,
        size: k,
        weights,
        node_frequencies,
        unit_count: units.len(),
    })
}

/// Edge-wise difference of two group networks, `a - b`. Positive weights
/// mark connections stronger in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtractedNetwork {
    pub condition_a: String,
    pub condition_b: String,
    pub mode: GroupMode,
    size: usize,
    weights: Vec<f64>,
}

impl SubtractedNetwork {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Signed edge weights in row-major upper-triangle order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn subtract_networks(a: &GroupNetwork, b: &GroupNetwork) -> Result<SubtractedNetwork> {
    if a.mode != b.mode {
        return Err(Error::InvalidParameter(format!(
            "cannot subtract networks built in different modes ({:?} vs {:?})",
            a.mode, b.mode
        )));
    }
    if a.size != b.size {
        return Err(Error::DimensionMismatch(
            "networks are over different code counts".into(),
        ));
    }
    Ok(SubtractedNetwork {
        condition_a: a.condition.clone(),
        condition_b: b.condition.clone(),
        mode: a.mode,
        size: a.size,
        weights: a.weights.iter().zip(&b.weights).map(|(x, y)| x - y).collect(),
    })
}

/// One edge of an exported network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: String,
    pub j: String,
    pub weight: f64,
}

/// Pair weights as an edge list over code ids, sorted by |weight|
/// descending with ties broken by (i, j) lexicographically. Exact-zero
/// edges are dropped.
pub fn sorted_edges(weights: &[f64], codebook: &Codebook) -> Vec<Edge> {
    let k = codebook.len();
    assert_eq!(weights.len(), codebook.pair_count(), "weights do not match codebook");
    let mut edges: Vec<Edge> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(p, &w)| {
            let (i, j) = pair_of(p, k);
            Edge {
                i: codebook.codes()[i].id.clone(),
                j: codebook.codes()[j].id.clone(),
                weight: w,
            }
        })
        .collect();
    edges.sort_by(|a, b| {
        b.weight
            .abs()
            .partial_cmp(&a.weight.abs())
            .expect("weights are finite")
            .then_with(|| (a.i.as_str(), a.j.as_str()).cmp(&(b.i.as_str(), b.j.as_str())))
    });
    edges
}
