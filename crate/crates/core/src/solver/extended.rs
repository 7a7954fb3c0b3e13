//! Three-block splitting solver for the outlier-aware model
//! `min_{T >= 0, V_j in D_j, e in E} zeta * sum_i max_j T_{i,j} + <R_w sigma C_w, T>`
//! subject to `Y T - Xs = V - Xs diag(e)`,
//! where each `D_j` is a cylindrical disk around the target column and `E`
//! is the nonnegative region of a weighted l1 ball.
//!
//! The scheme updates `Z` by a stacked least-squares solve and then `T`,
//! `V`, `e` by damped proximal steps with factor `1/mu`; it requires
//! `mu > 2`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::projections::{
    project_disk, project_outlier_ball, prox_rowmax_nonneg, DiskConstraint, OutlierBall,
};
use crate::reduction::ReducedProblem;

use super::{select_endmembers, SolveResult, SolverConfig};

/// Objective of the extended model (the fit lives in the constraint, so
/// only the sparsity terms remain).
pub fn objective_extended(rp: &ReducedProblem, t: &Matrix, cfg: &SolverConfig) -> Result<f64> {
    rp.validate()?;
    if t.rows() != rp.n_candidates() || t.cols() != rp.n_targets() {
        return Err(Error::DimensionMismatch(format!(
            "T is {}x{}, expected {}x{}",
            t.rows(),
            t.cols(),
            rp.n_candidates(),
            rp.n_targets()
        )));
    }
    let min_entry = t.dmat().iter().cloned().fold(f64::INFINITY, f64::min);
    if min_entry < -1e-9 {
        return Err(Error::InvalidParameter(format!(
            "T has negative entry {min_entry}"
        )));
    }
    let w = rp.penalty_weights();
    let rowmax: f64 = (0..t.rows())
        .map(|i| (0..t.cols()).map(|j| t.get(i, j)).fold(0.0, f64::max))
        .sum();
    let linear: f64 = w
        .dmat()
        .iter()
        .zip(t.dmat().iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(cfg.zeta * rowmax + linear)
}

/// Frobenius norm of the constraint violation
/// `Y T - Xs - V + Xs diag(e)`.
pub fn feasibility_gap(rp: &ReducedProblem, t: &Matrix, v: &Matrix, e: &[f64]) -> Result<f64> {
    rp.validate()?;
    let (m, n, d) = (rp.y.rows(), rp.n_candidates(), rp.n_targets());
    if t.rows() != n || t.cols() != d || v.rows() != m || v.cols() != d || e.len() != d {
        return Err(Error::DimensionMismatch(
            "T, V, or e does not conform to the problem shape".into(),
        ));
    }
    let mut violation = rp.y.dmat() * t.dmat() - rp.xs.dmat() - v.dmat();
    for j in 0..d {
        for i in 0..m {
            violation[(i, j)] += rp.xs.get(i, j) * e[j];
        }
    }
    Ok(violation.norm())
}

/// Disk constraints for each target column: axis `Xs_j`, radius
/// `eta + diameters[j]` clamped just below one.
pub fn disks_from_problem(rp: &ReducedProblem, eta: f64) -> Result<Vec<DiskConstraint>> {
    if eta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta must be nonnegative, got {eta}"
        )));
    }
    (0..rp.n_targets())
        .map(|j| {
            let radius = (eta + rp.diameters.get(j).copied().unwrap_or(0.0)).min(1.0 - 1e-9);
            DiskConstraint::new(rp.xs.col(j).to_vec(), radius)
        })
        .collect()
}

/// Outlier ball carrying the problem's column weights and budget `gamma`.
pub fn ball_from_problem(rp: &ReducedProblem, gamma: f64) -> Result<OutlierBall> {
    OutlierBall::new(rp.col_weights.clone(), gamma)
}

struct ExtendedState {
    z: DMatrix<f64>,
    t: DMatrix<f64>,
    v: DMatrix<f64>,
    e: Vec<f64>,
    p1: DMatrix<f64>,
    p2: DMatrix<f64>,
}

struct StepMetrics {
    split: f64,
    gap: f64,
    e_change: f64,
}

struct ExtendedIteration<'a> {
    rp: &'a ReducedProblem,
    cfg: &'a SolverConfig,
    w: Matrix,
    disks: &'a [DiskConstraint],
    ball: &'a OutlierBall,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl ExtendedIteration<'_> {
    fn step(&self, state: &mut ExtendedState) -> StepMetrics {
        let (m, n, d) = (self.rp.y.rows(), state.t.nrows(), state.t.ncols());
        let delta = self.cfg.delta;
        let mu = self.cfg.mu;
        let dm = delta * mu;
        let xs = self.rp.xs.dmat();
        let y = self.rp.y.dmat();

        // Z-update: (I + Y^T Y) Z = (T - P1/delta) + Y^T (V - Xs diag(e) + Xs - P2/delta).
        let mut stacked = DMatrix::zeros(m, d);
        for j in 0..d {
            for i in 0..m {
                stacked[(i, j)] = state.v[(i, j)] - xs[(i, j)] * state.e[j] + xs[(i, j)]
                    - state.p2[(i, j)] / delta;
            }
        }
        let mut rhs = y.transpose() * stacked;
        for j in 0..d {
            for i in 0..n {
                rhs[(i, j)] += state.t[(i, j)] - state.p1[(i, j)] / delta;
            }
        }
        self.chol.solve_mut(&mut rhs);
        state.z = rhs;

        // T-update: damped prox step. The step must read the freshly
        // solved Z; the stale-Z variant of this sweep oscillates without
        // converging even on exact-fit instances.
        let t_rows: Vec<Vec<f64>> = par::map_indexed(n, |i| {
            let row: Vec<f64> = (0..d)
                .map(|j| {
                    state.t[(i, j)]
                        + (state.z[(i, j)] - state.t[(i, j)]) / mu
                        + state.p1[(i, j)] / dm
                        - self.w.get(i, j) / dm
                })
                .collect();
            prox_rowmax_nonneg(&row, self.cfg.zeta / dm).expect("validated weight")
        });

        let mut movement_sq = 0.0;
        for (i, row) in t_rows.into_iter().enumerate() {
            for (j, value) in row.into_iter().enumerate() {
                let step = value - state.t[(i, j)];
                movement_sq += step * step;
                state.t[(i, j)] = value;
            }
        }

        // Shared residual R2 = Y Z - V + Xs diag(e) - Xs at the new Z and
        // the old V, e.
        let yz = y * &state.z;
        let mut r2 = yz.clone();
        for j in 0..d {
            for i in 0..m {
                r2[(i, j)] += -state.v[(i, j)] + xs[(i, j)] * state.e[j] - xs[(i, j)];
            }
        }

        // V-update: damped step projected onto the disks, column by column.
        let v_cols: Vec<Vec<f64>> = par::map_indexed(d, |j| {
            let arg: Vec<f64> = (0..m)
                .map(|i| state.v[(i, j)] + r2[(i, j)] / mu + state.p2[(i, j)] / dm)
                .collect();
            project_disk(&arg, &self.disks[j])
        });
        for (j, col) in v_cols.into_iter().enumerate() {
            for (i, value) in col.into_iter().enumerate() {
                state.v[(i, j)] = value;
            }
        }

        // e-update: separable quadratic projected onto the outlier ball.
        let e_old = state.e.clone();
        let e_arg: Vec<f64> = (0..d)
            .map(|j| {
                let q: f64 = (0..m)
                    .map(|i| xs[(i, j)] * (state.p2[(i, j)] + delta * r2[(i, j)]))
                    .sum();
                state.e[j] - q / dm
            })
            .collect();
        state.e = project_outlier_ball(&e_arg, self.ball);

        // Multiplier ascent with step delta.
        let mut split_sq = 0.0;
        for j in 0..d {
            for i in 0..n {
                let gap = state.z[(i, j)] - state.t[(i, j)];
                state.p1[(i, j)] += delta * gap;
                split_sq += gap * gap;
            }
        }
        for j in 0..d {
            for i in 0..m {
                state.p2[(i, j)] += delta
                    * (yz[(i, j)] - state.v[(i, j)] - xs[(i, j)] + xs[(i, j)] * state.e[j]);
            }
        }

        // Stopping metrics at the new iterate.
        let mut gap_sq = 0.0;
        let yt = y * &state.t;
        for j in 0..d {
            for i in 0..m {
                let g = yt[(i, j)] - xs[(i, j)] - state.v[(i, j)] + xs[(i, j)] * state.e[j];
                gap_sq += g * g;
            }
        }
        let e_norm: f64 = e_old.iter().map(|x| x * x).sum::<f64>().sqrt();
        let e_diff: f64 = state
            .e
            .iter()
            .zip(&e_old)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 / (n * d) as f64;
        StepMetrics {
            split: ((split_sq * scale).sqrt()).max((movement_sq * scale).sqrt()),
            gap: gap_sq.sqrt(),
            e_change: e_diff / e_norm.max(1.0),
        }
    }
}

/// Solve the extended model from a zero start. Stops when the split
/// residual, the constraint gap, and the relative change of `e` all fall
/// below `cfg.tol`.
pub fn solve_extended(
    rp: &ReducedProblem,
    disks: &[DiskConstraint],
    ball: &OutlierBall,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    rp.validate()?;
    cfg.validate_extended()?;
    let (m, n, d) = (rp.y.rows(), rp.n_candidates(), rp.n_targets());
    if disks.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} disks for {} target columns",
            disks.len(),
            d
        )));
    }
    if disks.iter().any(|disk| disk.axis().len() != m) {
        return Err(Error::DimensionMismatch(
            "disk axis length does not match the band count".into(),
        ));
    }
    if ball.weights().len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} ball weights for {} target columns",
            ball.weights().len(),
            d
        )));
    }

    let mut system = rp.y.dmat().transpose() * rp.y.dmat();
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    let chol = nalgebra::Cholesky::new(system).ok_or_else(|| {
        Error::InvalidParameter("stacked Z-update system is not positive definite".into())
    })?;
    let iteration = ExtendedIteration {
        rp,
        cfg,
        w: rp.penalty_weights(),
        disks,
        ball,
        chol,
    };
    let mut state = ExtendedState {
        z: DMatrix::zeros(n, d),
        t: DMatrix::zeros(n, d),
        v: DMatrix::zeros(m, d),
        e: vec![0.0; d],
        p1: DMatrix::zeros(n, d),
        p2: DMatrix::zeros(m, d),
    };

    let mut residuals = Vec::new();
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iter {
        iterations = k;
        let metrics = iteration.step(&mut state);
        residuals.push(metrics.split);
        gaps.push(metrics.gap);
        if metrics.split.max(metrics.gap).max(metrics.e_change) <= cfg.tol {
            converged = true;
            break;
        }
    }

    let t = Matrix::new(state.t)?;
    let selected = select_endmembers(&t, cfg.select_threshold)?;
    let objective = objective_extended(rp, &t, cfg)?;
    Ok(SolveResult {
        t,
        v: Some(Matrix::new(state.v)?),
        e: Some(state.e),
        selected,
        primal_residuals: residuals,
        gap_history: Some(gaps),
        iterations,
        converged,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three_column_instance() -> ReducedProblem {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        ReducedProblem::self_expressive(&x).unwrap()
    }

    fn uniform_disks(rp: &ReducedProblem, radius: f64) -> Vec<DiskConstraint> {
        (0..rp.n_targets())
            .map(|j| DiskConstraint::new(rp.xs.col(j).to_vec(), radius).unwrap())
            .collect()
    }

    #[test]
    fn exact_fit_instance_at_disk_limit() {
        // With radius r the optimum tilts each extreme's fit toward the
        // midpoint atom up to the disk boundary: row 2 carries r*sqrt(2)
        // against columns 0 and 1, and the diagonal drops to
        // sqrt(1 - r^2) - r.
        let r = 0.07;
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, r);
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.0).unwrap();
        let cfg = SolverConfig {
            nu: 0.0,
            ..SolverConfig::extended()
        };
        let result = solve_extended(&rp, &disks, &ball, &cfg).unwrap();
        assert!(result.converged, "iterations {}", result.iterations);
        assert_eq!(result.selected, vec![0, 1, 2]);
        let diag = (1.0 - r * r).sqrt() - r;
        let leak = r * std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(result.t.get(0, 0), diag, epsilon = 1e-6);
        assert_abs_diff_eq!(result.t.get(1, 1), diag, epsilon = 1e-6);
        assert_abs_diff_eq!(result.t.get(2, 0), leak, epsilon = 1e-6);
        assert_abs_diff_eq!(result.t.get(2, 1), leak, epsilon = 1e-6);
        let e = result.e.as_ref().unwrap();
        assert!(e.iter().all(|&x| x == 0.0), "zero budget forces e = 0");
        let v = result.v.as_ref().unwrap();
        assert!(v.frobenius_norm() <= r * (3.0f64).sqrt());
        let gap = feasibility_gap(&rp, &result.t, v, e).unwrap();
        assert!(gap <= 1e-5, "constraint gap {gap}");
    }

    #[test]
    fn exact_fit_instance_small_radius_selects_extremes() {
        // At r = 0.05 the midpoint leak r*sqrt(2) stays below a tenth of
        // the diagonal, so only the true extremes clear the cutoff.
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, 0.05);
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.0).unwrap();
        let cfg = SolverConfig {
            nu: 0.0,
            ..SolverConfig::extended()
        };
        let result = solve_extended(&rp, &disks, &ball, &cfg).unwrap();
        assert!(result.converged, "iterations {}", result.iterations);
        assert_eq!(result.selected, vec![0, 1]);
        let e = result.e.as_ref().unwrap();
        assert!(e.iter().all(|&x| x == 0.0));
        let gap = feasibility_gap(&rp, &result.t, result.v.as_ref().unwrap(), e).unwrap();
        assert!(gap <= 1e-5, "constraint gap {gap}");
    }

    #[test]
    fn v_and_e_stay_feasible_after_solve() {
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, 0.1);
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.4).unwrap();
        let cfg = SolverConfig {
            nu: 0.0,
            max_iter: 2000,
            ..SolverConfig::extended()
        };
        let result = solve_extended(&rp, &disks, &ball, &cfg).unwrap();
        let v = result.v.as_ref().unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..2).map(|i| v.get(i, j)).collect();
            let axis = disks[j].axis();
            let par: f64 = col.iter().zip(axis).map(|(a, b)| a * b).sum();
            assert!(par >= disks[j].axial_floor() - 1e-10 && par <= 1e-10);
            let perp: f64 = col
                .iter()
                .zip(axis)
                .map(|(x, a)| x - par * a)
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            assert!(perp <= disks[j].radius() + 1e-10);
        }
        let e = result.e.as_ref().unwrap();
        assert!(e.iter().all(|&x| x >= 0.0));
        let mass: f64 = e.iter().zip(&rp.col_weights).map(|(a, w)| a * w).sum();
        assert!(mass <= 0.4 + 1e-10);
    }

    #[test]
    fn gap_identities() {
        let rp = three_column_instance();
        let t = Matrix::zeros(3, 3).unwrap();
        let v = Matrix::zeros(2, 3).unwrap();
        // Nothing represented, nothing excused: the gap is ||Xs||_F.
        let gap = feasibility_gap(&rp, &t, &v, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(gap, (3.0f64).sqrt(), epsilon = 1e-12);
        // Everything declared outlier satisfies the constraint exactly.
        let gap = feasibility_gap(&rp, &t, &v, &[1.0; 3]).unwrap();
        assert_abs_diff_eq!(gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_mu_at_two() {
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, 0.07);
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.0).unwrap();
        let cfg = SolverConfig {
            mu: 2.0,
            ..SolverConfig::extended()
        };
        let err = solve_extended(&rp, &disks, &ball, &cfg).unwrap_err();
        assert!(err.to_string().contains("mu > 2"), "{err}");
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, 0.07);
        let ball = OutlierBall::new(vec![1.0, 1.0], 0.0).unwrap();
        assert!(solve_extended(&rp, &disks, &ball, &SolverConfig::extended()).is_err());
        let short_disks = &disks[..2];
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.0).unwrap();
        assert!(solve_extended(&rp, short_disks, &ball, &SolverConfig::extended()).is_err());
    }

    #[test]
    fn combined_residual_trends_down() {
        let rp = three_column_instance();
        let disks = uniform_disks(&rp, 0.07);
        let ball = OutlierBall::new(rp.col_weights.clone(), 0.1).unwrap();
        let cfg = SolverConfig {
            nu: 0.0,
            tol: 1e-12,
            max_iter: 1000,
            ..SolverConfig::extended()
        };
        let result = solve_extended(&rp, &disks, &ball, &cfg).unwrap();
        let gaps = result.gap_history.as_ref().unwrap();
        for k in [10usize, 20, 50, 100] {
            if 10 * k <= result.iterations {
                let early = result.primal_residuals[k - 1] + gaps[k - 1];
                let late = result.primal_residuals[10 * k - 1] + gaps[10 * k - 1];
                assert!(late < early, "combined residual at {k} vs {}", 10 * k);
            }
        }
    }
}
