//! Dimensional reduction of normalized network vectors and node placement.
//!
//! Units' normalized vectors are centered on the grand mean and decomposed
//! with an SVD; projections onto the leading right singular directions are
//! the per-unit scores used for plotting and statistics. Node positions for
//! the network graphs are then co-registered with the score space: we find
//! the per-code positions that minimize the summed squared distance between
//! each unit's score and the centroid of its network drawn at those
//! positions. With the centroid defined as the weight-normalized mean of
//! edge midpoints, that objective is linear least squares in the positions
//! and is solved exactly via a truncated-SVD pseudoinverse (minimum-norm
//! solution when the design matrix is rank deficient).

use serde::{Deserialize, Serialize};

use crate::accumulation::{pair_count, pair_of, NormalizedVector, UnitNetwork};
use crate::error::{Error, Result};
use crate::linalg::thin_svd;

/// Relative singular-value cutoff used both for rank decisions and for the
/// pseudoinverse truncation.
const SINGULAR_CUTOFF: f64 = 1e-10;

/// A unit's vector with its identity attached, the input to [`fit_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub unit_id: String,
    pub condition: String,
    pub values: Vec<f64>,
}

impl From<&UnitNetwork> for LabeledVector {
    fn from(unit: &UnitNetwork) -> Self {
        LabeledVector {
            unit_id: unit.unit_id().to_string(),
            condition: unit.condition().to_string(),
            values: unit.normalized.values().to_vec(),
        }
    }
}

/// The fitted projection: what was subtracted, the retained directions, and
/// how much variance each explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    /// Vector subtracted from every input before the SVD (the grand mean,
    /// or all zeros when fitting uncentered).
    pub grand_mean: Vec<f64>,
    /// Orthonormal direction vectors, one per retained dimension.
    pub basis: Vec<Vec<f64>>,
    /// Singular values of the centered matrix for the retained dimensions.
    pub singular_values: Vec<f64>,
    /// Fraction of total variance per retained dimension; fractions over
    /// all dimensions (retained or not) sum to 1.
    pub variance_explained: Vec<f64>,
    /// Numerical rank of the centered matrix.
    pub rank: usize,
    /// What the caller asked for; retained dimensions may be fewer when the
    /// rank is smaller.
    pub requested_dims: usize,
}

impl ModelSpace {
    pub fn retained_dims(&self) -> usize {
        self.basis.len()
    }

    /// Projects one vector (not yet centered) into the model space.
    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.grand_mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, model expects {}",
                values.len(),
                self.grand_mean.len()
            )));
        }
        Ok(self
            .basis
            .iter()
            .map(|direction| {
                values
                    .iter()
                    .zip(&self.grand_mean)
                    .zip(direction)
                    .map(|((v, m), d)| (v - m) * d)
                    .sum()
            })
            .collect())
    }
}

/// A unit's coordinates in the model space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnaScore {
    pub unit_id: String,
    pub condition: String,
    pub coordinates: Vec<f64>,
}

/// Per-code positions in the retained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub dims: usize,
    /// One point per code, in codebook order.
    pub positions: Vec<Vec<f64>>,
}

/// Fits the projection model on centered vectors. See [`fit_model_opts`].
pub fn fit_model(units: &[LabeledVector], dims: usize) -> Result<(ModelSpace, Vec<EnaScore>)> {
    fit_model_opts(units, dims, true)
}

/// Fits the projection model.
///
/// With `center` set (the default entry point), the grand mean is removed
/// first so the SVD directions maximize variance; uncentered mode
/// decomposes the raw vectors instead.
///
/// Sign convention: each basis vector is flipped, together with its score
/// column, so that its first entry larger than 1e-12 in magnitude is
/// positive. This makes the output independent of input order and of the
/// SVD routine's internal sign choices.
pub fn fit_model_opts(
    units: &[LabeledVector],
    dims: usize,
    center: bool,
) -> Result<(ModelSpace, Vec<EnaScore>)> {
    let n = units.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "model needs at least 2 units, got {n}"
        )));
    }
    if dims == 0 {
        return Err(Error::InvalidParameter("dims must be at least 1".into()));
    }
    let p = units[0].values.len();
    if p == 0 {
        return Err(Error::EmptyInput("unit vectors have no entries".into()));
    }
    for unit in units {
        if unit.values.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "unit `{}` has vector length {}, expected {}",
                unit.unit_id,
                unit.values.len(),
                p
            )));
        }
    }

    let grand_mean: Vec<f64> = if center {
        (0..p)
            .map(|j| units.iter().map(|u| u.values[j]).sum::<f64>() / n as f64)
            .collect()
    } else {
        vec![0.0; p]
    };

    let centered: Vec<Vec<f64>> = units
        .iter()
        .map(|u| u.values.iter().zip(&grand_mean).map(|(v, m)| v - m).collect())
        .collect();
    let svd = thin_svd(&centered);

    let sigma_max = svd.sigma[0];
    if sigma_max.is_nan() || sigma_max <= 1e-12 {
        return Err(Error::DegenerateModel(
            "all units are identical; nothing to project".into(),
        ));
    }
    let rank = svd
        .sigma
        .iter()
        .filter(|&&s| s > SINGULAR_CUTOFF * sigma_max)
        .count();
    let retained = dims.min(rank);

    let total_variance: f64 = svd.sigma.iter().map(|s| s * s).sum();

    let mut basis = Vec::with_capacity(retained);
    let mut singular_values = Vec::with_capacity(retained);
    let mut variance_explained = Vec::with_capacity(retained);
    for d in 0..retained {
        let mut direction = svd.v[d].clone();
        if let Some(first) = direction.iter().find(|e| e.abs() > 1e-12) {
            if *first < 0.0 {
                for e in &mut direction {
                    *e = -*e;
                }
            }
        }
        basis.push(direction);
        singular_values.push(svd.sigma[d]);
        variance_explained.push(svd.sigma[d].powi(2) / total_variance);
    }

    let scores = units
        .iter()
        .enumerate()
        .map(|(i, unit)| EnaScore {
            unit_id: unit.unit_id.clone(),
            condition: unit.condition.clone(),
            coordinates: basis
                .iter()
                .map(|direction| centered[i].iter().zip(direction).map(|(x, d)| x * d).sum())
                .collect(),
        })
        .collect();

    let space = ModelSpace {
        grand_mean,
        basis,
        singular_values,
        variance_explained,
        rank,
        requested_dims: dims,
    };
    Ok((space, scores))
}

/// Centroid of a network drawn at the given node positions: the
/// weight-normalized mean of edge midpoints. A zero network sits at the
/// origin.
///
/// `weights` is a pair vector (upper-triangle layout) over the same codes
/// as the layout; the lengths must correspond.
#[allow(clippy::needless_range_loop)] // dimension index spans several arrays
pub fn network_centroid(weights: &[f64], layout: &NodeLayout) -> Vec<f64> {
    let k = layout.positions.len();
    assert_eq!(
        weights.len(),
        pair_count(k),
        "weight vector does not match the layout's code count"
    );
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return vec![0.0; layout.dims];
    }
    let mut centroid = vec![0.0; layout.dims];
    for (p, &w) in weights.iter().enumerate() {
        let (i, j) = pair_of(p, k);
        for d in 0..layout.dims {
            centroid[d] += w * 0.5 * (layout.positions[i][d] + layout.positions[j][d]);
        }
    }
    for c in &mut centroid {
        *c /= total;
    }
    centroid
}

/// Sum over units of the squared distance between the unit's score and its
/// network centroid under `layout` — the quantity
/// [`optimize_node_positions`] minimizes.
pub fn layout_objective(
    scores: &[EnaScore],
    networks: &[NormalizedVector],
    layout: &NodeLayout,
) -> f64 {
    scores
        .iter()
        .zip(networks)
        .map(|(score, network)| {
            let centroid = network_centroid(network.values(), layout);
            score
                .coordinates
                .iter()
                .zip(&centroid)
                .map(|(p, c)| (p - c) * (p - c))
                .sum::<f64>()
        })
        .sum()
}

/// Places codes so network centroids land as close as possible to their
/// units' scores, per dimension:
///
/// minimize over positions x:  Σ_u (score_u[d] − Σ_i c_u(i)·x_i[d])²
///
/// where c_u(i) = Σ_{j≠i} w_u(i,j) / (2·Σ w_u) are the centroid
/// coefficients. The design matrix is shared across dimensions, so one SVD
/// serves all of them; singular values below 1e-10 of the largest are
/// truncated, yielding the minimum-norm solution. If every network is zero
/// the objective does not depend on the positions at all and everything is
/// placed at the origin.
#[allow(clippy::needless_range_loop)] // dimension index spans several arrays
pub fn optimize_node_positions(
    scores: &[EnaScore],
    networks: &[NormalizedVector],
) -> Result<NodeLayout> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no units to place nodes for".into()));
    }
    if scores.len() != networks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} networks",
            scores.len(),
            networks.len()
        )));
    }
    let dims = scores[0].coordinates.len();
    let k = networks[0].size();
    for score in scores {
        if score.coordinates.len() != dims {
            return Err(Error::DimensionMismatch(
                "scores have inconsistent dimension counts".into(),
            ));
        }
    }
    for network in networks {
        if network.size() != k {
            return Err(Error::DimensionMismatch(
                "networks are over different code counts".into(),
            ));
        }
    }

    let n = scores.len();
    let mut design = vec![vec![0.0f64; k]; n];
    for (u, network) in networks.iter().enumerate() {
        let total: f64 = network.values().iter().sum();
        if total == 0.0 {
            continue; // zero row: this unit's centroid is pinned at the origin
        }
        for (p, &w) in network.values().iter().enumerate() {
            let (i, j) = pair_of(p, k);
            design[u][i] += w / (2.0 * total);
            design[u][j] += w / (2.0 * total);
        }
    }

    let svd = thin_svd(&design);
    let sigma_max = svd.sigma[0];

    let mut positions = vec![vec![0.0; dims]; k];
    if sigma_max > 0.0 {
        for d in 0..dims {
            let y: Vec<f64> = scores.iter().map(|s| s.coordinates[d]).collect();
            for ((sigma, u_col), v_col) in svd.sigma.iter().zip(&svd.u).zip(&svd.v) {
                if *sigma > SINGULAR_CUTOFF * sigma_max {
                    let coefficient =
                        u_col.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sigma;
                    for i in 0..k {
                        positions[i][d] += coefficient * v_col[i];
                    }
                }
            }
        }
    }

    Ok(NodeLayout { dims, positions })
}
