//! ADMM solver for the quadratic-fidelity selection model
//! `min_{T >= 0} zeta * sum_i max_j T_{i,j} + <R_w sigma C_w, T>
//!  + (beta/2) ||(Y T - Xs) C_w||_F^2`
//! using the split `Z = T`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::projections::prox_rowmax_nonneg;
use crate::reduction::ReducedProblem;

use super::{select_endmembers, SolveResult, SolverConfig};

/// Model objective at `t`. Entries below `-1e-9` are rejected.
pub fn objective_basic(rp: &ReducedProblem, t: &Matrix, cfg: &SolverConfig) -> Result<f64> {
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
    let min_entry = t
        .dmat()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_entry < -1e-9 {
        return Err(Error::InvalidParameter(format!(
            "T has negative entry {min_entry}"
        )));
    }
    let w = rp.penalty_weights();
    Ok(objective_unchecked(rp, &w, t.dmat(), cfg))
}

fn objective_unchecked(
    rp: &ReducedProblem,
    w: &Matrix,
    t: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> f64 {
    let rowmax: f64 = (0..t.nrows())
        .map(|i| (0..t.ncols()).map(|j| t[(i, j)]).fold(0.0, f64::max))
        .sum();
    let linear: f64 = w
        .dmat()
        .iter()
        .zip(t.iter())
        .map(|(a, b)| a * b)
        .sum();
    let residual = rp.y.dmat() * t - rp.xs.dmat();
    let fit: f64 = (0..residual.ncols())
        .map(|j| {
            let c = rp.col_weights[j];
            residual.column(j).norm_squared() * c * c
        })
        .sum();
    cfg.zeta * rowmax + linear + 0.5 * cfg.beta * fit
}

/// One factorization of `(beta c^2 Y^T Y + delta I)` per distinct column
/// weight `c`.
struct ColumnSolvers {
    chol: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    by_column: Vec<usize>,
    uniform: bool,
}

impl ColumnSolvers {
    fn build(yty: &DMatrix<f64>, col_weights: &[f64], beta: f64, delta: f64) -> Result<Self> {
        let n = yty.nrows();
        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        let mut chol = Vec::new();
        let mut by_column = Vec::with_capacity(col_weights.len());
        for &c in col_weights {
            let key = c.to_bits();
            let slot = match index.get(&key) {
                Some(&s) => s,
                None => {
                    let mut system = yty * (beta * c * c);
                    for i in 0..n {
                        system[(i, i)] += delta;
                    }
                    let factor = nalgebra::Cholesky::new(system).ok_or_else(|| {
                        Error::InvalidParameter(
                            "Z-update system is not positive definite".into(),
                        )
                    })?;
                    chol.push(factor);
                    index.insert(key, chol.len() - 1);
                    chol.len() - 1
                }
            };
            by_column.push(slot);
        }
        Ok(Self {
            uniform: chol.len() == 1,
            chol,
            by_column,
        })
    }
}

struct BasicState {
    z: DMatrix<f64>,
    t: DMatrix<f64>,
    p: DMatrix<f64>,
}

struct BasicIteration<'a> {
    rp: &'a ReducedProblem,
    cfg: &'a SolverConfig,
    w: &'a Matrix,
    ytx: DMatrix<f64>,
    solvers: ColumnSolvers,
}

impl BasicIteration<'_> {
    /// One full ADMM sweep; returns the normalized split residual.
    fn step(&self, state: &mut BasicState) -> f64 {
        let n = state.t.nrows();
        let d = state.t.ncols();
        let delta = self.cfg.delta;
        let beta = self.cfg.beta;

        // Z-update: (beta c_j^2 Y^T Y + delta I) z_j
        //            = beta c_j^2 (Y^T Xs)_j + delta t_j - p_j.
        let mut rhs = DMatrix::zeros(n, d);
        for j in 0..d {
            let c = self.rp.col_weights[j];
            let scale = beta * c * c;
            for i in 0..n {
                rhs[(i, j)] = scale * self.ytx[(i, j)] + delta * state.t[(i, j)] - state.p[(i, j)];
            }
        }
        if self.solvers.uniform {
            self.solvers.chol[0].solve_mut(&mut rhs);
            state.z = rhs;
        } else {
            let solved: Vec<DVector<f64>> = par::map_indexed(d, |j| {
                let mut col = DVector::from_column_slice(rhs.column(j).as_slice());
                self.solvers.chol[self.solvers.by_column[j]].solve_mut(&mut col);
                col
            });
            for (j, col) in solved.into_iter().enumerate() {
                state.z.set_column(j, &col);
            }
        }

        // T-update: per-row prox of the nonnegative row-max penalty around
        // Z + P/delta - W/delta with weight zeta/delta.
        let weight = self.cfg.zeta / delta;
        let rows: Vec<Vec<f64>> = par::map_indexed(n, |i| {
            let row: Vec<f64> = (0..d)
                .map(|j| state.z[(i, j)] + state.p[(i, j)] / delta - self.w.get(i, j) / delta)
                .collect();
            prox_rowmax_nonneg(&row, weight).expect("validated weight")
        });
        let mut movement_sq = 0.0;
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                let step = v - state.t[(i, j)];
                movement_sq += step * step;
                state.t[(i, j)] = v;
            }
        }

        // Multiplier ascent and split residual. The T movement joins the
        // stopping metric: the split residual alone can collapse once the
        // multiplier reaches its fixed point while T is still drifting.
        let mut split_sq = 0.0;
        for j in 0..d {
            for i in 0..n {
                let gap = state.z[(i, j)] - state.t[(i, j)];
                state.p[(i, j)] += delta * gap;
                split_sq += gap * gap;
            }
        }
        let scale = 1.0 / (n * d) as f64;
        ((split_sq * scale).sqrt()).max((movement_sq * scale).sqrt())
    }
}

/// Solve the basic model from a zero start. Non-convergence inside the
/// iteration cap is reported through [`SolveResult::converged`], not as an
/// error.
pub fn solve_basic(rp: &ReducedProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    rp.validate()?;
    cfg.validate_basic()?;
    let n = rp.n_candidates();
    let d = rp.n_targets();
    let w = rp.penalty_weights();
    let yty = rp.y.dmat().transpose() * rp.y.dmat();
    let ytx = rp.y.dmat().transpose() * rp.xs.dmat();
    let solvers = ColumnSolvers::build(&yty, &rp.col_weights, cfg.beta, cfg.delta)?;
    let iteration = BasicIteration {
        rp,
        cfg,
        w: &w,
        ytx,
        solvers,
    };
    let mut state = BasicState {
        z: DMatrix::zeros(n, d),
        t: DMatrix::zeros(n, d),
        p: DMatrix::zeros(n, d),
    };

    let mut residuals = Vec::new();
    let mut best_obj = f64::INFINITY;
    let mut best_t: Option<DMatrix<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iter {
        iterations = k;
        let residual = iteration.step(&mut state);
        residuals.push(residual);
        let obj = objective_unchecked(rp, &w, &state.t, cfg);
        if obj < best_obj {
            best_obj = obj;
            best_t = Some(state.t.clone());
        }
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }

    let final_obj = objective_unchecked(rp, &w, &state.t, cfg);
    let (t, objective) = if final_obj <= best_obj + 1e-6 * best_obj.abs().max(1e-300) {
        (state.t, final_obj)
    } else {
        (best_t.expect("at least one iteration ran"), best_obj)
    };
    let t = Matrix::new(t)?;
    let selected = select_endmembers(&t, cfg.select_threshold)?;
    Ok(SolveResult {
        t,
        v: None,
        e: None,
        selected,
        primal_residuals: residuals,
        gap_history: None,
        iterations,
        converged,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::nnls;
    use approx::assert_abs_diff_eq;

    fn three_column_instance() -> ReducedProblem {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        ReducedProblem::self_expressive(&x).unwrap()
    }

    #[test]
    fn scalar_instance_matches_closed_form() {
        let x = Matrix::from_rows_vec(1, 1, &[1.0]).unwrap();
        let rp = ReducedProblem::self_expressive(&x).unwrap();
        let cfg = SolverConfig {
            nu: 0.0,
            tol: 1e-12,
            max_iter: 20_000,
            ..SolverConfig::default()
        };
        let result = solve_basic(&rp, &cfg).unwrap();
        assert!(result.converged);
        // min zeta*t + (beta/2)(t-1)^2 has optimum 1 - zeta/beta = 0.996.
        assert_abs_diff_eq!(result.t.get(0, 0), 0.996, epsilon = 1e-6);
        let obj = objective_basic(&rp, &result.t, &cfg).unwrap();
        assert_abs_diff_eq!(obj, 0.998, epsilon = 1e-6);
    }

    #[test]
    fn midpoint_column_is_not_selected() {
        let rp = three_column_instance();
        let cfg = SolverConfig {
            nu: 0.0,
            tol: 1e-10,
            max_iter: 20_000,
            ..SolverConfig::default()
        };
        let result = solve_basic(&rp, &cfg).unwrap();
        assert!(result.converged);
        assert_eq!(result.selected, vec![0, 1]);
        // The optimum leaks a little mass onto the midpoint row: writing
        // e1 as a*e1 + g*u trades cost g against savings 2*g/sqrt(2), so
        // g = zeta (sqrt(2) - 1) / beta at stationarity.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let g = cfg.zeta * (std::f64::consts::SQRT_2 - 1.0) / cfg.beta;
        let a = 1.0 - cfg.zeta * (2.0 - s) / cfg.beta;
        let row2_max = (0..3).map(|j| result.t.get(2, j)).fold(0.0, f64::max);
        assert_abs_diff_eq!(row2_max, g, epsilon = 1e-8);
        assert_abs_diff_eq!(result.t.get(0, 0), a, epsilon = 1e-8);
        assert_abs_diff_eq!(result.t.get(1, 1), a, epsilon = 1e-8);
        assert_abs_diff_eq!(result.t.get(2, 2), 0.0, epsilon = 1e-8);
        let expected = [[1.0, 0.0, s], [0.0, 1.0, s], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (result.t.get(i, j) - expected[i][j]).abs() < 2e-2,
                    "T[{i}][{j}] = {} vs {}",
                    result.t.get(i, j),
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn zero_regularization_reduces_to_nnls() {
        let y = crate::matrix::normalize_columns(
            &Matrix::from_columns(&[
                vec![1.0, 0.2, 0.1],
                vec![0.1, 1.0, 0.2],
                vec![0.2, 0.1, 1.0],
            ])
            .unwrap(),
        )
        .unwrap()
        .x;
        let xs = crate::matrix::normalize_columns(
            &Matrix::from_columns(&[vec![0.5, 0.6, 0.3], vec![0.9, 0.1, 0.4]]).unwrap(),
        )
        .unwrap()
        .x;
        let mut rp = ReducedProblem::self_expressive(&y).unwrap();
        rp.xs = xs.clone();
        rp.sigma = Matrix::zeros(3, 2).unwrap();
        rp.col_weights = vec![1.0; 2];
        rp.cluster_sizes = vec![1; 2];
        rp.source_index = vec![0; 2];
        let cfg = SolverConfig {
            zeta: 0.0,
            nu: 0.0,
            tol: 1e-12,
            max_iter: 50_000,
            ..SolverConfig::default()
        };
        let result = solve_basic(&rp, &cfg).unwrap();
        assert!(result.converged);
        let reference = nnls(&y, &xs).unwrap();
        let res_admm = (y.dmat() * result.t.dmat() - xs.dmat()).norm();
        let res_nnls = (y.dmat() * reference.dmat() - xs.dmat()).norm();
        assert!(
            (res_admm - res_nnls).abs() < 1e-5,
            "residuals {res_admm} vs {res_nnls}"
        );
    }

    #[test]
    fn iterates_stay_feasible_and_fixed_point_is_stable() {
        let rp = three_column_instance();
        let cfg = SolverConfig {
            nu: 0.0,
            tol: 1e-10,
            max_iter: 20_000,
            ..SolverConfig::default()
        };
        // Re-run the converged state through one more sweep by hand.
        let w = rp.penalty_weights();
        let yty = rp.y.dmat().transpose() * rp.y.dmat();
        let ytx = rp.y.dmat().transpose() * rp.xs.dmat();
        let solvers = ColumnSolvers::build(&yty, &rp.col_weights, cfg.beta, cfg.delta).unwrap();
        let iteration = BasicIteration {
            rp: &rp,
            cfg: &cfg,
            w: &w,
            ytx,
            solvers,
        };
        let mut state = BasicState {
            z: DMatrix::zeros(3, 3),
            t: DMatrix::zeros(3, 3),
            p: DMatrix::zeros(3, 3),
        };
        let mut converged = false;
        for _ in 0..cfg.max_iter {
            let r = iteration.step(&mut state);
            let min_entry = state.t.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min_entry >= -1e-12, "T drifted negative: {min_entry}");
            if r <= cfg.tol {
                converged = true;
                break;
            }
        }
        assert!(converged);
        let frozen = state.t.clone();
        iteration.step(&mut state);
        let drift = (&state.t - &frozen).norm();
        assert!(drift <= 10.0 * cfg.tol, "fixed-point drift {drift}");
    }

    #[test]
    fn objective_of_zero_matrix_is_pure_fit() {
        let rp = three_column_instance();
        let cfg = SolverConfig::default();
        let t = Matrix::zeros(3, 3).unwrap();
        let obj = objective_basic(&rp, &t, &cfg).unwrap();
        // Unit columns with unit weights: (beta/2) * ||Xs||_F^2 = 125 * 3.
        assert_abs_diff_eq!(obj, 0.5 * cfg.beta * 3.0, epsilon = 1e-9);
    }

    #[test]
    fn objective_of_identity_on_orthonormal_fit() {
        let x = Matrix::identity(3).unwrap();
        let rp = ReducedProblem::self_expressive(&x).unwrap();
        let cfg = SolverConfig::default();
        let t = Matrix::identity(3).unwrap();
        let obj = objective_basic(&rp, &t, &cfg).unwrap();
        assert_abs_diff_eq!(obj, cfg.zeta * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_rejects_negative_entries() {
        let rp = three_column_instance();
        let cfg = SolverConfig::default();
        let t = Matrix::from_rows_vec(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1e-6])
            .unwrap();
        assert!(objective_basic(&rp, &t, &cfg).is_err());
    }
}
