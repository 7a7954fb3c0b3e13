//! Deterministic synthetic data generators: mixture grids with Gaussian
//! noise, spike outliers, pixel-pure source mixtures, and clustered cone
//! scenes.
//!
//! All generators draw from a seeded ChaCha8 stream, so identical
//! arguments reproduce identical matrices bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, Matrix};
use crate::refine::EndmemberSet;

/// Design of a mixed-pixel data set: per-endmember pure counts, per-pair
/// and per-triple mixture counts, and one batch of full mixtures.
#[derive(Debug, Clone)]
pub struct MixturePlan {
    /// Unit-column endmember matrix.
    pub endmembers: Matrix,
    /// Pure samples per endmember.
    pub pure_count: usize,
    /// Samples per unordered pair of endmembers.
    pub pair_count: usize,
    /// Samples per unordered triple of endmembers.
    pub triple_count: usize,
    /// Samples mixing all endmembers at once.
    pub full_count: usize,
    /// Entrywise Gaussian noise standard deviation.
    pub noise_std: f64,
    pub seed: u64,
}

impl MixturePlan {
    /// Total number of generated columns.
    pub fn total_columns(&self) -> usize {
        let n = self.endmembers.cols();
        let pairs = n * (n - 1) / 2;
        let triples = if n >= 3 { n * (n - 1) * (n - 2) / 6 } else { 0 };
        n * self.pure_count
            + pairs * self.pair_count
            + triples * self.triple_count
            + self.full_count
    }
}

/// Uniform sample from the probability simplex via sorted uniform gaps.
fn simplex_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut weights = Vec::with_capacity(k);
    let mut prev = 0.0;
    for &c in &cuts {
        weights.push(c - prev);
        prev = c;
    }
    weights.push(1.0 - prev);
    weights
}

/// Generate the mixed-pixel design: pure copies of each endmember, simplex
/// mixtures of every pair and triple, full mixtures, Gaussian noise,
/// clamping to nonnegative values, and column normalization.
///
/// The returned truth set carries the exact endmembers and, for each, the
/// index of its first pure sample.
pub fn gen_mixtures(plan: &MixturePlan) -> Result<(Matrix, EndmemberSet)> {
    let n = plan.endmembers.cols();
    let m = plan.endmembers.rows();
    if plan.triple_count > 0 && n < 3 {
        return Err(Error::InvalidParameter(format!(
            "triple mixtures need at least 3 endmembers, got {n}"
        )));
    }
    if plan.pair_count > 0 && n < 2 {
        return Err(Error::InvalidParameter(format!(
            "pair mixtures need at least 2 endmembers, got {n}"
        )));
    }
    if plan.noise_std < 0.0 {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    for j in 0..n {
        if (plan.endmembers.col_norm(j) - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "endmember {j} is not unit length"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(plan.total_columns());
    let mut pure_indices = Vec::with_capacity(n);
    for j in 0..n {
        pure_indices.push(cols.len());
        for _ in 0..plan.pure_count {
            cols.push(plan.endmembers.col(j).to_vec());
        }
    }
    let mix = |rng: &mut ChaCha8Rng, members: &[usize]| -> Vec<f64> {
        let weights = simplex_weights(rng, members.len());
        (0..m)
            .map(|i| {
                members
                    .iter()
                    .zip(&weights)
                    .map(|(&e, &w)| w * plan.endmembers.get(i, e))
                    .sum()
            })
            .collect()
    };
    for a in 0..n {
        for b in (a + 1)..n {
            for _ in 0..plan.pair_count {
                cols.push(mix(&mut rng, &[a, b]));
            }
        }
    }
    if plan.triple_count > 0 {
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    for _ in 0..plan.triple_count {
                        cols.push(mix(&mut rng, &[a, b, c]));
                    }
                }
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    for _ in 0..plan.full_count {
        cols.push(mix(&mut rng, &all));
    }

    if plan.noise_std > 0.0 {
        let normal = Normal::new(0.0, plan.noise_std).expect("valid std");
        for col in &mut cols {
            for v in col.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).max(0.0);
            }
        }
    }
    let x = normalize_columns(&Matrix::from_columns(&cols)?)?.x;
    let truth = EndmemberSet::new(
        plan.endmembers.clone(),
        (0..n).collect(),
        pure_indices,
        vec![0.0; n],
    )?;
    Ok((x, truth))
}

/// Append a spike column (one dominant band over a small baseline) and
/// remix `ceil(fraction * d)` randomly chosen columns with it at weight
/// 0.3, renormalizing. Returns the new matrix and the affected column
/// indices (remixed columns plus the appended spike).
pub fn gen_spike_outliers(
    x: &Matrix,
    spike_height: f64,
    fraction: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "fraction must lie in [0, 1), got {fraction}"
        )));
    }
    if spike_height <= 0.0 {
        return Err(Error::InvalidParameter("zero spike".into()));
    }
    let m = x.rows();
    let d = x.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = rng.gen_range(0..m);
    let baseline = 0.02;
    let mut spike: Vec<f64> = vec![baseline; m];
    spike[band] += spike_height;
    let norm: f64 = spike.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut spike {
        *v /= norm;
    }

    let mixed_count = (fraction * d as f64).ceil() as usize;
    let mut pool: Vec<usize> = (0..d).collect();
    let mut chosen = Vec::with_capacity(mixed_count);
    for _ in 0..mixed_count {
        let pick = rng.gen_range(0..pool.len());
        chosen.push(pool.swap_remove(pick));
    }
    chosen.sort_unstable();

    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| x.col(j).to_vec()).collect();
    for &j in &chosen {
        for (i, v) in cols[j].iter_mut().enumerate() {
            *v = 0.7 * *v + 0.3 * spike[i];
        }
    }
    cols.push(spike);
    let x_new = normalize_columns(&Matrix::from_columns(&cols)?)?.x;
    let mut spiked = chosen;
    spiked.push(d);
    Ok((x_new, spiked))
}

/// Generate pixel-pure sparse sources and their mixtures `X0 = A0 * S0`.
///
/// Each source row is a seeded sum of narrow raised-cosine bumps; one
/// reserved window per source holds a bump of that source alone, so every
/// mixing column appears unmixed somewhere.
pub fn gen_bss(
    a0: &Matrix,
    source_len: usize,
    active_density: f64,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    let n_src = a0.cols();
    if !(active_density > 0.0 && active_density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "active_density must lie in (0, 1], got {active_density}"
        )));
    }
    if source_len < 10 * a0.rows() {
        return Err(Error::InvalidParameter(format!(
            "source_len {} is shorter than 10 x {} mixture rows",
            source_len,
            a0.rows()
        )));
    }
    let window = (source_len / (4 * n_src)).clamp(12, 60);
    let window_start = |i: usize| i * source_len / n_src;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s0 = vec![vec![0.0f64; source_len]; n_src];
    let add_bump =
        |row: &mut [f64], center: usize, half_width: usize, height: f64| {
            let lo = center.saturating_sub(half_width);
            let hi = (center + half_width).min(row.len() - 1);
            for t in lo..=hi {
                let u = (t as f64 - center as f64) / half_width as f64;
                row[t] += height * (std::f64::consts::FRAC_PI_2 * u).cos().powi(2);
            }
        };

    let bumps_per_row = ((active_density * source_len as f64 / 20.0).round() as usize).max(1);
    for row in s0.iter_mut() {
        for _ in 0..bumps_per_row {
            let center = rng.gen_range(0..source_len);
            let half_width = rng.gen_range(4..12);
            let height = rng.gen_range(0.5..2.0);
            add_bump(row, center, half_width, height);
        }
    }
    // Reserved windows enforce pixel purity: inside window i only source i
    // is active.
    for i in 0..n_src {
        let start = window_start(i);
        let end = (start + window).min(source_len);
        for (k, row) in s0.iter_mut().enumerate() {
            if k != i {
                for t in start..end {
                    row[t] = 0.0;
                }
            }
        }
        let center = start + window / 2;
        let half_width = (window / 2).saturating_sub(1).max(3);
        let height = rng.gen_range(0.8..1.5);
        add_bump(&mut s0[i], center, half_width.min(center - start), height);
    }

    let s0 = Matrix::from_fn(n_src, source_len, |i, t| s0[i][t])?;
    let x0 = Matrix::new(a0.dmat() * s0.dmat())?;
    Ok((x0, s0))
}

/// One directional cluster of a synthetic cone scene.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    /// Cluster direction; normalized internally.
    pub direction: Vec<f64>,
    pub count: usize,
    /// Standard deviation of the additive perturbation before clamping to
    /// the nonnegative orthant and renormalizing.
    pub spread: f64,
}

/// Build unit columns grouped into directional clusters, returning the
/// matrix and the cluster label of each column in generation order.
pub fn gen_clustered_cone(specs: &[ClusterSpec], seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no clusters specified".into()));
    }
    let m = specs[0].direction.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid std");
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (ci, spec) in specs.iter().enumerate() {
        if spec.direction.len() != m {
            return Err(Error::DimensionMismatch(
                "cluster directions must share a dimension".into(),
            ));
        }
        if spec.count == 0 {
            return Err(Error::InvalidParameter("empty cluster".into()));
        }
        if spec.spread < 0.0 {
            return Err(Error::InvalidParameter("spread must be >= 0".into()));
        }
        let norm: f64 = spec.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cluster {ci} has a zero direction"
            )));
        }
        for _ in 0..spec.count {
            loop {
                let col: Vec<f64> = spec
                    .direction
                    .iter()
                    .map(|&v| (v / norm + spec.spread * normal.sample(&mut rng)).max(0.0))
                    .collect();
                if col.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                    cols.push(col);
                    labels.push(ci);
                    break;
                }
            }
        }
    }
    let x = normalize_columns(&Matrix::from_columns(&cols)?)?.x;
    Ok((x, labels))
}
