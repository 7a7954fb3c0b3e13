//! Metrics and ground-truth oracles: deviation angles with optimal
//! matching, cone-projection statistics, the brute-force minimal-support
//! oracle, and the noise-stability experiment driver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, Matrix};
use crate::par;
use crate::refine::nnls;
use crate::reduction::ReducedProblem;
use crate::solver::{l1_inf_norm, solve_basic, SolverConfig};

/// Unsigned angle between two vectors, in degrees.
pub fn angle_deg(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidParameter(
            "angle of a zero vector is undefined".into(),
        ));
    }
    // atan2 form is accurate near 0 and 180 degrees where acos loses bits.
    let mut diff_sq = 0.0;
    let mut sum_sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let u = x / na;
        let v = y / nb;
        diff_sq += (u - v) * (u - v);
        sum_sq += (u + v) * (u + v);
    }
    Ok((2.0 * diff_sq.sqrt().atan2(sum_sq.sqrt())).to_degrees())
}

/// Column matching between an estimate and a reference, with angle
/// statistics over the matched pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    /// Matched `(estimate column, reference column)` pairs, ascending in
    /// the estimate index.
    pub pairs: Vec<(usize, usize)>,
    /// Angle in degrees for each matched pair, aligned with `pairs`.
    pub angles_deg: Vec<f64>,
    pub avg_deg: f64,
    pub min_deg: f64,
    pub max_deg: f64,
    /// Estimate columns left unmatched when the counts differ.
    pub unmatched_est: Vec<usize>,
    /// Reference columns left unmatched when the counts differ.
    pub unmatched_true: Vec<usize>,
}

/// Match estimated columns to reference columns so the total deviation
/// angle is minimal (exhaustive for small square cases, assignment solver
/// otherwise), then report the angle statistics of the matched pairs.
pub fn match_and_score(a_est: &Matrix, a_true: &Matrix) -> Result<MatchReport> {
    if a_est.rows() != a_true.rows() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} rows but reference has {}",
            a_est.rows(),
            a_true.rows()
        )));
    }
    let n_est = a_est.cols();
    let n_true = a_true.cols();
    let mut cost = vec![vec![0.0; n_true]; n_est];
    for (i, row) in cost.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = angle_deg(a_est.col(i), a_true.col(j))?;
        }
    }

    let assignment = if n_est == n_true && n_est <= 8 {
        exhaustive_assignment(&cost)
    } else {
        hungarian_assignment(&cost)
    };

    let mut pairs: Vec<(usize, usize)> = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, &j)| j.map(|j| (i, j)))
        .collect();
    pairs.sort_unstable();
    let angles_deg: Vec<f64> = pairs.iter().map(|&(i, j)| cost[i][j]).collect();
    let avg_deg = angles_deg.iter().sum::<f64>() / angles_deg.len().max(1) as f64;
    let min_deg = angles_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_deg = angles_deg.iter().cloned().fold(0.0, f64::max);
    let matched_true: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    Ok(MatchReport {
        unmatched_est: (0..n_est)
            .filter(|i| !pairs.iter().any(|&(pi, _)| pi == *i))
            .collect(),
        unmatched_true: (0..n_true).filter(|j| !matched_true.contains(j)).collect(),
        pairs,
        angles_deg,
        avg_deg,
        min_deg: if min_deg.is_finite() { min_deg } else { 0.0 },
        max_deg,
    })
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Vec<usize> = perm.clone();
    let mut best_total = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if total < best_total {
            best_total = total;
            best = p.to_vec();
        }
    });
    best.into_iter().map(Some).collect()
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Minimal-cost assignment of rows to columns. Rectangular inputs are
/// padded with zero-cost dummies; rows assigned to a dummy come back as
/// `None`.
fn hungarian_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost[0].len();
    let size = rows.max(cols);
    // Potentials-based Hungarian algorithm on the padded square matrix.
    let cell = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };
    let mut u = vec![0.0f64; size + 1];
    let mut v = vec![0.0f64; size + 1];
    let mut assigned_col = vec![0usize; size + 1]; // row assigned to column, 1-based rows
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        assigned_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = cell(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[assigned_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_col[j0] = assigned_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![None; rows];
    for j in 1..=size {
        let i = assigned_col[j];
        if i >= 1 && i <= rows && j <= cols {
            result[i - 1] = Some(j - 1);
        }
    }
    result
}

/// Certificate for the minimal number of columns whose nonnegative cone
/// reproduces every column of the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row0Certificate {
    /// Lexicographically smallest feasible subset of minimal size.
    pub support: Vec<usize>,
    /// Worst per-column fit residual of the certified subset.
    pub residual: f64,
    /// Subsets examined in (size, lexicographic) order, including the
    /// certified one.
    pub enumerated: usize,
}

/// Reasonable feasibility tolerance for [`row0_oracle`] given the row count.
pub fn row0_default_tol(rows: usize) -> f64 {
    1e-6 * (rows as f64).sqrt()
}

/// Brute-force search for the smallest column subset that fits every
/// column of `x` by nonnegative least squares within `feas_tol`. Subsets
/// are enumerated by increasing size, lexicographic within a size; the
/// first feasible subset wins.
pub fn row0_oracle(x: &Matrix, feas_tol: f64, max_cols: usize) -> Result<Row0Certificate> {
    let n = x.cols();
    if n > max_cols {
        return Err(Error::InvalidParameter(format!(
            "{n} columns exceed the oracle cap {max_cols}"
        )));
    }
    if !(feas_tol >= 0.0) {
        return Err(Error::InvalidParameter("feas_tol must be >= 0".into()));
    }
    let mut examined = 0usize;
    for size in 1..=n {
        let combos = combinations(n, size);
        let feasible: Vec<Option<f64>> =
            par::map_slice(&combos, |combo| subset_residual(x, combo, feas_tol));
        for (idx, residual) in feasible.iter().enumerate() {
            if let Some(residual) = residual {
                return Ok(Row0Certificate {
                    support: combos[idx].clone(),
                    residual: *residual,
                    enumerated: examined + idx + 1,
                });
            }
        }
        examined += combos.len();
    }
    unreachable!("the full column set reproduces the matrix exactly");
}

/// Worst-column NNLS residual if the subset is feasible at `feas_tol`.
fn subset_residual(x: &Matrix, combo: &[usize], feas_tol: f64) -> Option<f64> {
    let sub = x.select_columns(combo).ok()?;
    let s = nnls(&sub, x).ok()?;
    let fit = sub.dmat() * s.dmat();
    let mut worst = 0.0f64;
    for j in 0..x.cols() {
        let mut res_sq = 0.0;
        for i in 0..x.rows() {
            let r = fit[(i, j)] - x.get(i, j);
            res_sq += r * r;
        }
        let res = res_sq.sqrt();
        if res > feas_tol {
            return None;
        }
        worst = worst.max(res);
    }
    Some(worst)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in (i + 1)..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Cone-projection statistics of data `x` against dictionary `a`:
/// squared Frobenius projection error and the fraction of nonzero
/// coefficients (absolute threshold 1e-8).
pub fn projection_stats(a: &Matrix, x: &Matrix) -> Result<(f64, f64)> {
    let s = nnls(a, x)?;
    let err = (a.dmat() * s.dmat() - x.dmat()).norm_squared();
    let nonzero = s.dmat().iter().filter(|v| v.abs() > 1e-8).count();
    let sparsity = nonzero as f64 / (a.cols() * x.cols()) as f64;
    Ok((err, sparsity))
}

/// Rule mapping a noise level to a regularization weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AlphaRule {
    /// `alpha = scale * delta^exponent`.
    PowerLaw { scale: f64, exponent: f64 },
}

impl AlphaRule {
    pub fn alpha(&self, delta: f64) -> f64 {
        match self {
            Self::PowerLaw { scale, exponent } => scale * delta.powf(*exponent),
        }
    }

    /// The regime the stability lemma covers: `alpha -> 0` while
    /// `delta^2 / alpha -> 0`, i.e. a power law with exponent in (0, 2).
    pub fn conforming(&self) -> bool {
        match self {
            Self::PowerLaw { scale, exponent } => {
                *scale > 0.0 && *exponent > 0.0 && *exponent < 2.0
            }
        }
    }
}

/// Configuration for the noise-stability experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Strictly decreasing noise levels; a trailing zero runs the
    /// noise-free regime.
    pub noise_levels: Vec<f64>,
    pub alpha_rule: AlphaRule,
    /// Independent noise draws averaged per level.
    pub trials: usize,
    pub seed: u64,
}

/// One averaged measurement per noise level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityLevel {
    pub delta: f64,
    pub alpha: f64,
    /// `||X T - X||_F` on the noisy, renormalized data.
    pub fidelity: f64,
    pub l1_inf: f64,
    /// `| ||T||_{1,inf} - |I| |` against the certified support size.
    pub support_gap: f64,
}

/// Output of [`run_stability`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub support: Vec<usize>,
    pub support_size: usize,
    /// Whether the alpha rule lies in the regime the theory covers.
    pub conforming: bool,
    pub levels: Vec<StabilityLevel>,
}

/// Perturb noise-free data at each configured level, solve the
/// self-representation model with the level's regularization weight, and
/// record fidelity and the row-max norm against the certified support.
pub fn run_stability(x_true: &Matrix, cfg: &StabilityConfig) -> Result<StabilityReport> {
    if cfg.noise_levels.is_empty() {
        return Err(Error::InvalidParameter("no noise levels given".into()));
    }
    if cfg
        .noise_levels
        .windows(2)
        .any(|pair| pair[1] >= pair[0])
        || cfg.noise_levels.iter().any(|&d| d < 0.0)
    {
        return Err(Error::InvalidParameter(
            "noise levels must be nonnegative and strictly decreasing".into(),
        ));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    for &delta in &cfg.noise_levels {
        if delta > 0.0 && !(cfg.alpha_rule.alpha(delta) > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha rule is not positive at delta = {delta}"
            )));
        }
    }

    let oracle = row0_oracle(x_true, row0_default_tol(x_true.rows()), 16)?;
    let support_size = oracle.support.len();
    let mut levels = Vec::with_capacity(cfg.noise_levels.len());
    for (li, &delta) in cfg.noise_levels.iter().enumerate() {
        let mut fidelity_sum = 0.0;
        let mut l1_sum = 0.0;
        for trial in 0..cfg.trials {
            let stream = cfg
                .seed
                .wrapping_add(((li * cfg.trials + trial) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let noisy = perturb(x_true, delta, stream)?;
            let alpha = cfg.alpha_rule.alpha(delta).max(1e-7);
            let rp = ReducedProblem::self_expressive(&noisy)?;
            // The solved objective is (1/alpha) (||XT - X||_F^2 + alpha ||T||_{1,inf}).
            let beta = 2.0 / alpha;
            let solver_cfg = SolverConfig {
                zeta: 1.0,
                beta,
                nu: 0.0,
                delta: beta.sqrt().max(1.0),
                tol: 1e-10,
                max_iter: 200_000,
                ..SolverConfig::default()
            };
            let result = solve_basic(&rp, &solver_cfg)?;
            fidelity_sum += (noisy.dmat() * result.t.dmat() - noisy.dmat()).norm();
            l1_sum += l1_inf_norm(&result.t);
        }
        let fidelity = fidelity_sum / cfg.trials as f64;
        let l1_inf = l1_sum / cfg.trials as f64;
        levels.push(StabilityLevel {
            delta,
            alpha: cfg.alpha_rule.alpha(delta),
            fidelity,
            l1_inf,
            support_gap: (l1_inf - support_size as f64).abs(),
        });
    }
    Ok(StabilityReport {
        support: oracle.support,
        support_size,
        conforming: cfg.alpha_rule.conforming(),
        levels,
    })
}

/// Add Gaussian noise rescaled to Frobenius norm `delta`, then renormalize
/// columns. `delta = 0` returns the data unchanged.
fn perturb(x: &Matrix, delta: f64, seed: u64) -> Result<Matrix> {
    if delta == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid std");
    let mut noise = vec![0.0; x.rows() * x.cols()];
    for v in &mut noise {
        *v = normal.sample(&mut rng);
    }
    let norm: f64 = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = delta / norm;
    let noisy = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        x.get(i, j) + scale * noise[j * x.rows() + i]
    })?;
    Ok(normalize_columns(&noisy)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn angle_basic_cases() {
        assert_abs_diff_eq!(angle_deg(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_deg(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_deg(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn angle_rejects_zero_vector() {
        assert!(angle_deg(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn match_permutation_scores_zero() {
        let a = Matrix::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let shuffled = a.select_columns(&[2, 0, 1]).unwrap();
        let report = match_and_score(&shuffled, &a).unwrap();
        assert_abs_diff_eq!(report.avg_deg, 0.0, epsilon = 1e-9);
        assert_eq!(report.pairs, vec![(0, 2), (1, 0), (2, 1)]);
    }

    #[test]
    fn match_single_rotated_column() {
        let theta = 5.0f64.to_radians();
        let mut cols = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        let a_true = Matrix::from_columns(&cols).unwrap();
        cols[0] = vec![theta.cos(), theta.sin(), 0.0, 0.0];
        let a_est = Matrix::from_columns(&cols).unwrap();
        let report = match_and_score(&a_est, &a_true).unwrap();
        assert_abs_diff_eq!(report.avg_deg, 5.0 / 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.max_deg, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn match_is_scale_invariant() {
        let a = Matrix::from_columns(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        let scaled = Matrix::from_fn(2, 2, |i, j| a.get(i, j) * [3.0, 0.25][j]).unwrap();
        let r1 = match_and_score(&a, &a).unwrap();
        let r2 = match_and_score(&scaled, &a).unwrap();
        assert_abs_diff_eq!(r1.avg_deg, r2.avg_deg, epsilon = 1e-9);
    }

    #[test]
    fn match_unequal_counts_reports_unmatched() {
        let a_true = Matrix::identity(3).unwrap();
        let a_est = a_true.select_columns(&[0, 1]).unwrap();
        let report = match_and_score(&a_est, &a_true).unwrap();
        assert_eq!(report.pairs.len(), 2);
        assert_eq!(report.unmatched_true, vec![2]);
        assert!(report.unmatched_est.is_empty());
    }

    #[test]
    fn hungarian_matches_exhaustive_on_random_costs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(2..7);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..90.0)).collect())
                .collect();
            let h = hungarian_assignment(&cost);
            let e = exhaustive_assignment(&cost);
            let total = |assign: &[Option<usize>]| -> f64 {
                assign
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| cost[i][j.unwrap()])
                    .sum()
            };
            assert_abs_diff_eq!(total(&h), total(&e), epsilon = 1e-9);
        }
    }

    /// Both matrices as printed in the source of the mixing experiment.
    #[test]
    fn printed_mixing_matrices_agree_closely() {
        let a0 = Matrix::from_rows_vec(
            4,
            4,
            &[
                0.3162, 0.6576, 0.3288, 0.5000, //
                0.3162, 0.3288, 0.6576, 0.5000, //
                0.6325, 0.1644, 0.1644, 0.5000, //
                0.6325, 0.6576, 0.6576, 0.5000,
            ],
        )
        .unwrap();
        let recovered = Matrix::from_rows_vec(
            4,
            4,
            &[
                0.3267, 0.6524, 0.3327, 0.4933, //
                0.3180, 0.3300, 0.6544, 0.5110, //
                0.6228, 0.1757, 0.1658, 0.4836, //
                0.6358, 0.6593, 0.6585, 0.5114,
            ],
        )
        .unwrap();
        let report = match_and_score(&recovered, &a0).unwrap();
        assert_eq!(report.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        let expected = [0.846865, 0.722596, 0.304365, 1.361749];
        for (angle, want) in report.angles_deg.iter().zip(expected) {
            assert_abs_diff_eq!(angle, &want, epsilon = 1e-5);
        }
        assert!(report.max_deg <= 1.4, "per-column max {}", report.max_deg);
        assert!(report.avg_deg <= 1.0, "avg {}", report.avg_deg);
    }

    #[test]
    fn oracle_finds_two_extremes() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        let cert = row0_oracle(&x, row0_default_tol(2), 16).unwrap();
        assert_eq!(cert.support, vec![0, 1]);
        // Sizes 1 and 2 in lexicographic order: {0},{1},{2},{0,1}.
        assert_eq!(cert.enumerated, 4);
    }

    #[test]
    fn oracle_needs_all_orthonormal_columns() {
        let x = Matrix::identity(4).unwrap();
        let cert = row0_oracle(&x, row0_default_tol(4), 16).unwrap();
        assert_eq!(cert.support, vec![0, 1, 2, 3]);
    }

    #[test]
    fn oracle_prefers_first_duplicate() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Matrix::from_columns(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![s, s],
        ])
        .unwrap();
        let cert = row0_oracle(&x, row0_default_tol(2), 16).unwrap();
        assert_eq!(cert.support, vec![0, 2]);
    }

    #[test]
    fn oracle_is_scale_invariant() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        let scaled = Matrix::from_fn(2, 3, |i, j| x.get(i, j) * [2.0, 0.5, 7.0][j]).unwrap();
        let cert = row0_oracle(&scaled, row0_default_tol(2), 16).unwrap();
        assert_eq!(cert.support, vec![0, 1]);
    }

    #[test]
    fn projection_stats_identity_case() {
        let a = Matrix::identity(4).unwrap();
        let (err, sparsity) = projection_stats(&a, &a).unwrap();
        assert!(err <= 1e-10);
        assert_abs_diff_eq!(sparsity, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn stability_flags_nonconforming_rule() {
        let x = Matrix::identity(3).unwrap();
        let cfg = StabilityConfig {
            noise_levels: vec![1e-1, 1e-2],
            alpha_rule: AlphaRule::PowerLaw {
                scale: 1.0,
                exponent: 3.0,
            },
            trials: 1,
            seed: 1,
        };
        let report = run_stability(&x, &cfg).unwrap();
        assert!(!report.conforming);
        let good = AlphaRule::PowerLaw {
            scale: 1.0,
            exponent: 1.0,
        };
        assert!(good.conforming());
    }

    #[test]
    fn stability_noise_free_level_recovers_support() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let third = (1.0f64 / 3.0).sqrt();
        let x = Matrix::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![s, s, 0.0],
            vec![third, third, third],
        ])
        .unwrap();
        let cfg = StabilityConfig {
            noise_levels: vec![0.0],
            alpha_rule: AlphaRule::PowerLaw {
                scale: 1.0,
                exponent: 1.0,
            },
            trials: 1,
            seed: 9,
        };
        let report = run_stability(&x, &cfg).unwrap();
        assert_eq!(report.support_size, 3);
        let level = &report.levels[0];
        assert!(level.support_gap <= 1e-3, "gap {}", level.support_gap);
        assert!(level.fidelity <= 1e-6, "fidelity {}", level.fidelity);
    }

    #[test]
    fn stability_rejects_increasing_levels() {
        let x = Matrix::identity(2).unwrap();
        let cfg = StabilityConfig {
            noise_levels: vec![1e-3, 1e-2],
            alpha_rule: AlphaRule::PowerLaw {
                scale: 1.0,
                exponent: 1.0,
            },
            trials: 1,
            seed: 0,
        };
        assert!(run_stability(&x, &cfg).is_err());
    }
}
