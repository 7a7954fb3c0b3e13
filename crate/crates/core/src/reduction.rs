//! Data reduction preprocessing: farthest-first-seeded k-means on
//! normalized columns, cosine deduplication of the resulting candidates,
//! cluster-size column weights, and the similarity weight matrix.
//!
//! Candidate centers are always snapped back to actual data columns so
//! that everything downstream keeps selecting physical samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;

/// Reduced self-representation problem: fit `Xs` by nonnegative
/// combinations of the candidate columns `Y`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// Candidate endmembers, unit columns drawn from the data.
    pub y: Matrix,
    /// Fit target; the reduction uses `Xs = Y`.
    pub xs: Matrix,
    /// Diagonal of the column weight matrix, one entry per `Xs` column.
    /// Reduction output carries cluster fractions, which sum to one.
    pub col_weights: Vec<f64>,
    /// Similarity weights, `y.cols() x xs.cols()`.
    pub sigma: Matrix,
    /// Diagonal of the row weight matrix, one entry per `Y` column.
    pub row_weights: Vec<f64>,
    /// Number of data columns assigned to each candidate's cluster.
    pub cluster_sizes: Vec<usize>,
    /// Maximum distance from a cluster member to its (snapped) center.
    pub diameters: Vec<f64>,
    /// For each `Y` column, the index of the originating data column.
    pub source_index: Vec<usize>,
}

impl ReducedProblem {
    /// Number of candidate endmembers (`Y` columns).
    pub fn n_candidates(&self) -> usize {
        self.y.cols()
    }

    /// Number of fit targets (`Xs` columns).
    pub fn n_targets(&self) -> usize {
        self.xs.cols()
    }

    /// Self-representation instance `Y = Xs = x` with unit column weights,
    /// zero similarity weights, and identity row weights. This is the raw
    /// `X = XT` setting used by the exactness and stability experiments.
    pub fn self_expressive(x: &Matrix) -> Result<Self> {
        let n = x.cols();
        Ok(Self {
            y: x.clone(),
            xs: x.clone(),
            col_weights: vec![1.0; n],
            sigma: Matrix::zeros(n, n)?,
            row_weights: vec![1.0; n],
            cluster_sizes: vec![1; n],
            diameters: vec![0.0; n],
            source_index: (0..n).collect(),
        })
    }

    /// Recompute `sigma` from the current `Y` and `Xs` with the given
    /// parameters.
    pub fn set_similarity_weights(&mut self, nu: f64, h: f64) -> Result<()> {
        self.sigma = similarity_weights(&self.y, &self.xs, nu, h)?;
        Ok(())
    }

    /// Entrywise weight matrix `R_w sigma C_w` used by the linear penalty.
    pub fn penalty_weights(&self) -> Matrix {
        Matrix::from_fn(self.y.cols(), self.xs.cols(), |i, j| {
            self.row_weights[i] * self.sigma.get(i, j) * self.col_weights[j]
        })
        .expect("sigma dimensions are validated")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.cols();
        let d = self.xs.cols();
        if self.y.rows() != self.xs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "Y has {} rows but Xs has {}",
                self.y.rows(),
                self.xs.rows()
            )));
        }
        if self.sigma.rows() != n || self.sigma.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "sigma is {}x{}, expected {}x{}",
                self.sigma.rows(),
                self.sigma.cols(),
                n,
                d
            )));
        }
        if self.col_weights.len() != d || self.row_weights.len() != n {
            return Err(Error::DimensionMismatch(
                "weight vector lengths do not match Y/Xs".into(),
            ));
        }
        if self.col_weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidParameter(
                "column weights must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-cluster summary emitted alongside reduction results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_c: usize,
    pub cluster_sizes: Vec<usize>,
    pub diameters: Vec<f64>,
    pub source_index: Vec<usize>,
}

impl ClusterReport {
    pub fn from_problem(rp: &ReducedProblem) -> Self {
        Self {
            n_c: rp.n_candidates(),
            cluster_sizes: rp.cluster_sizes.clone(),
            diameters: rp.diameters.clone(),
            source_index: rp.source_index.clone(),
        }
    }
}

fn column_distance_sq(x: &Matrix, j: usize, center: &[f64]) -> f64 {
    x.col(j)
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Greedy farthest-first traversal: `seeds[0] = start`, and each subsequent
/// seed maximizes the minimum Euclidean distance to the seeds chosen so
/// far. Ties break toward the lowest column index.
pub fn farthest_first_seeds(x: &Matrix, k: usize, start: usize) -> Result<Vec<usize>> {
    let d = x.cols();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "seed count {k} must lie in [1, {d}]"
        )));
    }
    if start >= d {
        return Err(Error::IndexOutOfRange {
            what: "columns",
            index: start,
            len: d,
        });
    }
    let mut seeds = Vec::with_capacity(k);
    seeds.push(start);
    let mut min_dist: Vec<f64> = par::map_indexed(d, |j| column_distance_sq(x, j, x.col(start)));
    while seeds.len() < k {
        let mut best = 0;
        let mut best_dist = f64::NEG_INFINITY;
        for (j, &dist) in min_dist.iter().enumerate() {
            if dist > best_dist {
                best_dist = dist;
                best = j;
            }
        }
        seeds.push(best);
        let updates: Vec<f64> = par::map_indexed(d, |j| column_distance_sq(x, j, x.col(best)));
        for (j, dist) in updates.into_iter().enumerate() {
            if dist < min_dist[j] {
                min_dist[j] = dist;
            }
        }
    }
    Ok(seeds)
}

/// Similarity weight matrix
/// `sigma_{i,j} = nu * (1 - exp(-(1 - (Y^T Xs)_{i,j})^2 / (2 h^2)))`:
/// near zero when candidate `i` and target `j` point the same way, close to
/// `nu` when they are far apart.
pub fn similarity_weights(y: &Matrix, xs: &Matrix, nu: f64, h: f64) -> Result<Matrix> {
    if nu < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "nu must be nonnegative, got {nu}"
        )));
    }
    if h <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "h must be positive, got {h} (h = 0 divides by zero)"
        )));
    }
    if y.rows() != xs.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Y has {} rows but Xs has {}",
            y.rows(),
            xs.rows()
        )));
    }
    let gram = y.dmat().transpose() * xs.dmat();
    let denom = 2.0 * h * h;
    Matrix::from_fn(y.cols(), xs.cols(), |i, j| {
        let g = gram[(i, j)];
        nu * (1.0 - (-(1.0 - g) * (1.0 - g) / denom).exp())
    })
}

/// Run capped k-means from farthest-first seeds, snap each surviving
/// centroid to its nearest data column, and merge snapped centers whose
/// inner product reaches `cos_threshold` (the larger cluster keeps its
/// center). Returns the reduced problem with `Xs = Y`, cluster-fraction
/// column weights, identity row weights, and zero similarity weights.
pub fn kmeans_reduce(
    x: &Matrix,
    max_clusters: usize,
    cos_threshold: f64,
    iters: usize,
    seed_start: usize,
) -> Result<ReducedProblem> {
    if max_clusters == 0 {
        return Err(Error::InvalidParameter("max_clusters must be >= 1".into()));
    }
    if !(cos_threshold > 0.0 && cos_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cos_threshold must lie in (0, 1], got {cos_threshold}"
        )));
    }
    let d = x.cols();
    let m = x.rows();
    for j in 0..d {
        if (x.col_norm(j) - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "column {j} is not unit normalized"
            )));
        }
    }
    let k = max_clusters.min(d);
    let seeds = farthest_first_seeds(x, k, seed_start)?;
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&j| x.col(j).to_vec()).collect();
    let mut assignment: Vec<usize> = vec![0; d];

    for _ in 0..iters {
        let new_assignment: Vec<usize> = par::map_indexed(d, |j| {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = column_distance_sq(x, j, center);
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            best
        });
        let changed = new_assignment != assignment;
        assignment = new_assignment;

        // Mean update; empty clusters are dropped and indices compacted.
        let mut sums = vec![vec![0.0; m]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for j in 0..d {
            let c = assignment[j];
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x.col(j)) {
                *s += v;
            }
        }
        let mut remap = vec![usize::MAX; centers.len()];
        let mut next = Vec::new();
        for c in 0..centers.len() {
            if counts[c] == 0 {
                continue;
            }
            remap[c] = next.len();
            let inv = 1.0 / counts[c] as f64;
            next.push(sums[c].iter().map(|s| s * inv).collect());
        }
        centers = next;
        for a in &mut assignment {
            *a = remap[*a];
        }
        if !changed {
            break;
        }
    }

    // Snap each center to the nearest member column.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for j in 0..d {
        members[assignment[j]].push(j);
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for (c, member_list) in members.into_iter().enumerate() {
        debug_assert!(!member_list.is_empty());
        let mut snap = member_list[0];
        let mut best = f64::INFINITY;
        for &j in &member_list {
            let dist = column_distance_sq(x, j, &centers[c]);
            if dist < best {
                best = dist;
                snap = j;
            }
        }
        clusters.push(Cluster {
            source: snap,
            members: member_list,
        });
    }

    merge_similar(x, &mut clusters, cos_threshold);

    let n_c = clusters.len();
    let y = Matrix::from_fn(m, n_c, |r, c| x.get(r, clusters[c].source))?;
    // Data columns are unit already; renormalize to wash out rounding.
    let y = crate::matrix::normalize_columns(&y)?.x;
    let cluster_sizes: Vec<usize> = clusters.iter().map(|c| c.members.len()).collect();
    debug_assert_eq!(cluster_sizes.iter().sum::<usize>(), d);
    let diameters: Vec<f64> = clusters
        .iter()
        .enumerate()
        .map(|(c, cl)| {
            cl.members
                .iter()
                .map(|&j| column_distance_sq(x, j, y.col(c)).sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    let col_weights: Vec<f64> = cluster_sizes
        .iter()
        .map(|&s| s as f64 / d as f64)
        .collect();
    let source_index: Vec<usize> = clusters.iter().map(|c| c.source).collect();

    Ok(ReducedProblem {
        xs: y.clone(),
        sigma: Matrix::zeros(n_c, n_c)?,
        row_weights: vec![1.0; n_c],
        y,
        col_weights,
        cluster_sizes,
        diameters,
        source_index,
    })
}

struct Cluster {
    source: usize,
    members: Vec<usize>,
}

/// Repeatedly merge the most similar pair of snapped centers whose inner
/// product reaches the threshold. The cluster with more members keeps its
/// center; ties keep the lower index.
fn merge_similar(x: &Matrix, clusters: &mut Vec<Cluster>, cos_threshold: f64) {
    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let dot: f64 = x
                    .col(clusters[a].source)
                    .iter()
                    .zip(x.col(clusters[b].source))
                    .map(|(p, q)| p * q)
                    .sum();
                if dot >= cos_threshold {
                    let replace = match worst {
                        None => true,
                        Some((_, _, best_dot)) => dot > best_dot,
                    };
                    if replace {
                        worst = Some((a, b, dot));
                    }
                }
            }
        }
        let Some((a, b, _)) = worst else { break };
        let (keep, drop) = if clusters[a].members.len() >= clusters[b].members.len() {
            (a, b)
        } else {
            (b, a)
        };
        let absorbed = std::mem::take(&mut clusters[drop].members);
        clusters[keep].members.extend(absorbed);
        clusters[keep].members.sort_unstable();
        clusters.remove(drop);
    }
}
