//! ADMM solvers for the convex endmember selection models.
//!
//! `basic` handles the quadratic-fidelity model; `extended` handles the
//! constrained outlier model solved with a three-block splitting scheme.
//! Per-column and per-row updates inside an iteration run data-parallel;
//! iterations themselves are sequential and results do not depend on the
//! thread count.

mod basic;
mod extended;

pub use basic::{objective_basic, solve_basic};
pub use extended::{
    ball_from_problem, disks_from_problem, feasibility_gap, objective_extended, solve_extended,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Model and numerical parameters shared by both solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Row sparsity weight on `sum_i max_j T_{i,j}`.
    pub zeta: f64,
    /// Quadratic fidelity weight (basic model only).
    pub beta: f64,
    /// Similarity penalty scale.
    pub nu: f64,
    /// Similarity kernel width.
    pub h: f64,
    /// Augmented Lagrangian step.
    pub delta: f64,
    /// Proximal damping of the three-block scheme; must exceed 2.
    pub mu: f64,
    /// Outlier budget (extended model).
    pub gamma: f64,
    /// Base disk radius added to each cluster spread (extended model).
    pub eta: f64,
    /// Residual stopping threshold.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Relative row-max cutoff used when reading off selected rows.
    pub select_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            zeta: 1.0,
            beta: 250.0,
            nu: 50.0,
            h: 1.0 - (4.0f64.to_radians()).cos(),
            delta: 1.0,
            mu: 2.01,
            gamma: 0.01,
            eta: 0.07,
            tol: 1e-8,
            max_iter: 5000,
            select_threshold: 0.1,
        }
    }
}

impl SolverConfig {
    /// Defaults tuned for the extended solver's stopping rule.
    pub fn extended() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
            ..Self::default()
        }
    }

    pub fn validate_basic(&self) -> Result<()> {
        if self.zeta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "zeta must be nonnegative, got {}",
                self.zeta
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.select_threshold > 0.0 && self.select_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "select_threshold must lie in (0, 1), got {}",
                self.select_threshold
            )));
        }
        Ok(())
    }

    pub fn validate_extended(&self) -> Result<()> {
        self.validate_basic()?;
        if !(self.mu > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "HTY scheme requires mu > 2, got {}",
                self.mu
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eta must be nonnegative, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Output of either solver.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Nonnegative coefficient matrix, candidates by targets.
    pub t: Matrix,
    /// Noise matrix (extended solver only).
    pub v: Option<Matrix>,
    /// Outlier indicator vector (extended solver only).
    pub e: Option<Vec<f64>>,
    /// Rows of `t` whose maximum clears the relative cutoff, ascending.
    pub selected: Vec<usize>,
    /// Per-iteration stopping residual: the larger of the normalized split
    /// `||Z - T||_F / sqrt(n d)` and the normalized T movement.
    pub primal_residuals: Vec<f64>,
    /// Constraint gap per iteration (extended solver only).
    pub gap_history: Option<Vec<f64>>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Whether the stopping rule was met before the iteration cap.
    pub converged: bool,
    /// Model objective of the returned coefficients.
    pub objective: f64,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.primal_residuals.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.gap_history.as_ref().and_then(|g| g.last().copied())
    }

    /// Sum over rows of each row's maximum entry.
    pub fn l1_inf(&self) -> f64 {
        l1_inf_norm(&self.t)
    }
}

/// `sum_i max_j |T_{i,j}|`.
pub fn l1_inf_norm(t: &Matrix) -> f64 {
    (0..t.rows())
        .map(|i| (0..t.cols()).map(|j| t.get(i, j).abs()).fold(0.0, f64::max))
        .sum()
}

/// Rows whose maximum entry exceeds `select_threshold` times the global
/// maximum. An all-zero matrix selects nothing.
pub fn select_endmembers(t: &Matrix, select_threshold: f64) -> Result<Vec<usize>> {
    if !(select_threshold > 0.0 && select_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "select_threshold must lie in (0, 1), got {select_threshold}"
        )));
    }
    let row_max: Vec<f64> = (0..t.rows())
        .map(|i| (0..t.cols()).map(|j| t.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let global = row_max.iter().cloned().fold(0.0, f64::max);
    if global <= 0.0 {
        return Ok(Vec::new());
    }
    Ok((0..t.rows())
        .filter(|&i| row_max[i] > select_threshold * global)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_skips_zero_rows() {
        let t = Matrix::from_rows_vec(2, 2, &[1.0, 0.7, 0.0, 0.0]).unwrap();
        assert_eq!(select_endmembers(&t, 0.1).unwrap(), vec![0]);
    }

    #[test]
    fn select_takes_all_pure_rows() {
        let t = Matrix::identity(3).unwrap();
        assert_eq!(select_endmembers(&t, 0.1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn select_compares_row_maxima() {
        let t = Matrix::from_rows_vec(3, 2, &[1.0, 0.2, 0.05, 0.01, 0.5, 0.3]).unwrap();
        assert_eq!(select_endmembers(&t, 0.1).unwrap(), vec![0, 2]);
    }

    #[test]
    fn select_empty_for_zero_matrix() {
        let t = Matrix::zeros(3, 3).unwrap();
        assert!(select_endmembers(&t, 0.1).unwrap().is_empty());
    }

    #[test]
    fn select_validates_threshold() {
        let t = Matrix::identity(2).unwrap();
        assert!(select_endmembers(&t, 0.0).is_err());
        assert!(select_endmembers(&t, 1.0).is_err());
    }

    #[test]
    fn mu_at_two_is_rejected() {
        let cfg = SolverConfig {
            mu: 2.0,
            ..SolverConfig::extended()
        };
        let err = cfg.validate_extended().unwrap_err();
        assert!(err.to_string().contains("mu > 2"), "{err}");
    }
}
