//! Alternating refinement of selected endmembers inside per-column balls,
//! full-data abundance recovery, and the nonnegative least-squares routine
//! shared with the evaluation metrics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::reduction::ReducedProblem;
use crate::solver::SolverConfig;

/// Endmembers selected by a solver, with enough context to refine them.
#[derive(Debug, Clone)]
pub struct EndmemberSet {
    /// Unit-column endmember matrix.
    pub a: Matrix,
    /// Selection into the candidate matrix `Y`.
    pub indices_y: Vec<usize>,
    /// Nearest original data column for each endmember.
    pub indices_x: Vec<usize>,
    /// Refinement ball radius per endmember (the cluster spread).
    pub radii: Vec<f64>,
}

impl EndmemberSet {
    pub fn new(
        a: Matrix,
        indices_y: Vec<usize>,
        indices_x: Vec<usize>,
        radii: Vec<f64>,
    ) -> Result<Self> {
        let n = a.cols();
        for j in 0..n {
            if (a.col_norm(j) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "endmember column {j} is not unit length"
                )));
            }
        }
        if indices_y.len() != n || indices_x.len() != n || radii.len() != n {
            return Err(Error::DimensionMismatch(
                "index/radius lengths do not match the endmember count".into(),
            ));
        }
        if radii.iter().any(|&r| !(r.is_finite() && r >= 0.0)) {
            return Err(Error::InvalidParameter(
                "radii must be nonnegative".into(),
            ));
        }
        Ok(Self {
            a,
            indices_y,
            indices_x,
            radii,
        })
    }

    /// Assemble the endmember set picked out of a reduced problem by the
    /// given candidate rows.
    pub fn from_selection(rp: &ReducedProblem, selected: &[usize]) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::InvalidParameter("empty selection".into()));
        }
        let a = rp.y.select_columns(selected)?;
        let indices_x = selected
            .iter()
            .map(|&j| {
                rp.source_index.get(j).copied().ok_or(Error::IndexOutOfRange {
                    what: "candidates",
                    index: j,
                    len: rp.source_index.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let radii = selected.iter().map(|&j| rp.diameters[j]).collect();
        Self::new(a, selected.to_vec(), indices_x, radii)
    }
}

/// Euclidean projection onto `{ x >= 0, ||x - center|| <= radius }` by
/// Dykstra's alternating projections between the ball and the orthant
/// (100 cycles, or earlier once the iterate moves less than 1e-12).
pub fn project_ball_nonneg(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), center.len());
    debug_assert!(radius >= 0.0);
    debug_assert!(center.iter().all(|&c| c >= 0.0));
    let n = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for _ in 0..100 {
        let prev = x.clone();
        // Ball step with correction p.
        let shifted: Vec<f64> = (0..n).map(|i| x[i] + p[i]).collect();
        let dist: f64 = shifted
            .iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        let y: Vec<f64> = if dist <= radius {
            shifted.clone()
        } else {
            let scale = if dist > 0.0 { radius / dist } else { 0.0 };
            (0..n).map(|i| center[i] + scale * (shifted[i] - center[i])).collect()
        };
        for i in 0..n {
            p[i] = shifted[i] - y[i];
        }
        // Orthant step with correction q.
        for i in 0..n {
            let s = y[i] + q[i];
            let clamped = s.max(0.0);
            q[i] = s - clamped;
            x[i] = clamped;
        }
        let change: f64 = x
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if change <= 1e-12 {
            break;
        }
    }
    x
}

/// Per-column active-set solver for
/// `min_{s >= 0} 0.5 ||A s - x||^2 + <w, s>` in normal-equation form.
/// Exact up to the linear solves, so KKT residuals land at machine scale.
struct ActiveSetQp<'a> {
    q: &'a DMatrix<f64>,
    kkt_tol: f64,
}

impl ActiveSetQp<'_> {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = b.len();
        let mut s = DVector::zeros(n);
        let mut passive = vec![false; n];
        let max_outer = 10 * n + 10;
        for _ in 0..max_outer {
            let grad = self.q * &s - b;
            let mut enter = None;
            let mut most_negative = -self.kkt_tol;
            for j in 0..n {
                if !passive[j] && grad[j] < most_negative {
                    most_negative = grad[j];
                    enter = Some(j);
                }
            }
            let Some(enter) = enter else { break };
            passive[enter] = true;
            // Inner loop restores feasibility of the passive set.
            loop {
                let active: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
                let z = self.solve_subsystem(&active, b);
                if z.iter().all(|&v| v > 0.0) {
                    s.fill(0.0);
                    for (idx, &j) in active.iter().enumerate() {
                        s[j] = z[idx];
                    }
                    break;
                }
                let mut alpha = f64::INFINITY;
                for (idx, &j) in active.iter().enumerate() {
                    if z[idx] <= 0.0 {
                        let denom = s[j] - z[idx];
                        if denom > 0.0 {
                            alpha = alpha.min(s[j] / denom);
                        } else {
                            alpha = 0.0;
                        }
                    }
                }
                for (idx, &j) in active.iter().enumerate() {
                    s[j] += alpha * (z[idx] - s[j]);
                    if s[j] <= 1e-14 {
                        s[j] = 0.0;
                        passive[j] = false;
                    }
                }
                if !passive.iter().any(|&p| p) {
                    break;
                }
            }
        }
        s
    }

    fn solve_subsystem(&self, active: &[usize], b: &DVector<f64>) -> DVector<f64> {
        let p = active.len();
        let mut sub = DMatrix::zeros(p, p);
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                sub[(r, c)] = self.q[(i, j)];
            }
        }
        let mut rhs = DVector::zeros(p);
        for (r, &i) in active.iter().enumerate() {
            rhs[r] = b[i];
        }
        match nalgebra::Cholesky::new(sub.clone()) {
            Some(chol) => chol.solve(&rhs),
            None => {
                // Rank-deficient subsystem; a small ridge keeps the sweep moving.
                let ridge = 1e-12 * (1.0 + sub.diagonal().amax());
                for i in 0..p {
                    sub[(i, i)] += ridge;
                }
                nalgebra::Cholesky::new(sub)
                    .expect("ridge-regularized system is positive definite")
                    .solve(&rhs)
            }
        }
    }
}

fn columnwise_qp(a: &Matrix, x: &Matrix, linear: Option<&Matrix>) -> Result<Matrix> {
    if a.rows() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but X has {}",
            a.rows(),
            x.rows()
        )));
    }
    if let Some(w) = linear {
        if w.rows() != a.cols() || w.cols() != x.cols() {
            return Err(Error::DimensionMismatch(format!(
                "linear term is {}x{}, expected {}x{}",
                w.rows(),
                w.cols(),
                a.cols(),
                x.cols()
            )));
        }
    }
    let q = a.dmat().transpose() * a.dmat();
    if nalgebra::Cholesky::new(q.clone()).is_none() {
        log::warn!("dictionary is rank deficient; solutions may not be unique");
    }
    let atx = a.dmat().transpose() * x.dmat();
    let scale = atx.amax().max(1.0);
    let qp = ActiveSetQp {
        q: &q,
        kkt_tol: 1e-11 * scale,
    };
    let n = a.cols();
    let d = x.cols();
    let cols: Vec<DVector<f64>> = par::map_indexed(d, |j| {
        let mut b = DVector::from_column_slice(atx.column(j).as_slice());
        if let Some(w) = linear {
            for i in 0..n {
                b[i] -= w.get(i, j);
            }
        }
        qp.solve(&b)
    });
    let mut s = DMatrix::zeros(n, d);
    for (j, col) in cols.into_iter().enumerate() {
        s.set_column(j, &col);
    }
    Matrix::new(s)
}

/// Per-column nonnegative least squares `argmin_{S >= 0} ||A S - X||_F^2`.
pub fn nnls(a: &Matrix, x: &Matrix) -> Result<Matrix> {
    columnwise_qp(a, x, None)
}

/// Abundance solve `argmin_{S >= 0} 0.5 ||A S - X||_F^2 + <sigma, S>`.
/// `sigma_full` has one row per endmember and one column per data column.
pub fn solve_abundances(a: &Matrix, x: &Matrix, sigma_full: &Matrix) -> Result<Matrix> {
    columnwise_qp(a, x, Some(sigma_full))
}

/// Output of [`refine`].
#[derive(Debug, Clone)]
pub struct Refined {
    /// Refined endmembers, renormalized to unit columns.
    pub a: Matrix,
    /// Abundances compensated for the renormalization, so `a * s` equals
    /// the pre-renormalization product exactly.
    pub s: Matrix,
    /// Objective `0.5 ||A S - X||_F^2 + <sigma, S>` recorded before each
    /// renormalization.
    pub objectives: Vec<f64>,
    /// Endmembers from the last pass before renormalization.
    pub a_prenorm: Matrix,
    /// True when every radius is zero and the ball step was skipped.
    pub ball_step_skipped: bool,
}

fn fit_value(a: &DMatrix<f64>, s: &DMatrix<f64>, x: &Matrix) -> f64 {
    let r = a * s - x.dmat();
    0.5 * r.norm_squared()
}

fn linear_value(sigma: &Matrix, s: &DMatrix<f64>) -> f64 {
    sigma
        .dmat()
        .iter()
        .zip(s.iter())
        .map(|(a, b)| a * b)
        .sum()
}

/// Alternate abundance solves with a projected-gradient endmember step
/// constrained to `{A_j >= 0, ||A_j - center_j|| <= radius_j}`, then
/// renormalize columns (scaling the matching abundance rows to keep the
/// product unchanged). Stops after `outer_iters` passes or once the
/// objective settles to relative 1e-7.
pub fn refine(
    em: &EndmemberSet,
    x: &Matrix,
    sigma_full: &Matrix,
    outer_iters: usize,
    _cfg: &SolverConfig,
) -> Result<Refined> {
    if em.a.rows() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "endmembers have {} rows but data has {}",
            em.a.rows(),
            x.rows()
        )));
    }
    if outer_iters == 0 {
        return Err(Error::InvalidParameter("outer_iters must be >= 1".into()));
    }
    let n = em.a.cols();
    let d = x.cols();
    if sigma_full.rows() != n || sigma_full.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "sigma is {}x{}, expected {}x{}",
            sigma_full.rows(),
            sigma_full.cols(),
            n,
            d
        )));
    }
    let skip_ball_step = em.radii.iter().all(|&r| r == 0.0);
    let centers = em.a.clone();
    let mut a = em.a.dmat().clone();
    let mut a_prenorm = a.clone();
    let mut s = DMatrix::zeros(n, d);
    let mut objectives = Vec::new();

    for _ in 0..outer_iters {
        s = solve_abundances(&Matrix::new(a.clone())?, x, sigma_full)?
            .dmat()
            .clone();
        if !skip_ball_step {
            ball_constrained_descent(&mut a, &s, x, &centers, &em.radii);
        }
        a_prenorm = a.clone();
        let objective = fit_value(&a, &s, x) + linear_value(sigma_full, &s);
        let settled = objectives
            .last()
            .is_some_and(|prev: &f64| (prev - objective).abs() <= 1e-7 * prev.abs().max(1.0));
        objectives.push(objective);

        if !skip_ball_step {
            for j in 0..n {
                let norm = a.column(j).norm();
                if norm > 1e-12 {
                    for i in 0..a.nrows() {
                        a[(i, j)] /= norm;
                    }
                    for k in 0..d {
                        s[(j, k)] *= norm;
                    }
                }
            }
        }
        if settled {
            break;
        }
    }

    Ok(Refined {
        a: Matrix::new(a)?,
        s: Matrix::new(s)?,
        objectives,
        a_prenorm: Matrix::new(a_prenorm)?,
        ball_step_skipped: skip_ball_step,
    })
}

/// Projected gradient with backtracking on `0.5 ||A S - X||_F^2` over the
/// per-column ball-and-orthant sets. The step starts at the inverse power
/// estimate of `||S S^T||_2` and halves until the standard sufficient
/// decrease condition holds, which keeps the objective monotone.
fn ball_constrained_descent(
    a: &mut DMatrix<f64>,
    s: &DMatrix<f64>,
    x: &Matrix,
    centers: &Matrix,
    radii: &[f64],
) {
    let n = a.ncols();
    let sst = s * s.transpose();
    let lipschitz = spectral_norm_estimate(&sst).max(1e-12);
    let mut step = 2.0 / lipschitz;
    let mut fit = fit_value(a, s, x);
    for _ in 0..100 {
        let grad = (&*a * s - x.dmat()) * s.transpose();
        let mut accepted = false;
        for _ in 0..60 {
            let mut candidate = a.clone();
            for j in 0..n {
                let moved: Vec<f64> = (0..a.nrows())
                    .map(|i| a[(i, j)] - step * grad[(i, j)])
                    .collect();
                let projected = project_ball_nonneg(&moved, centers.col(j), radii[j]);
                for (i, value) in projected.into_iter().enumerate() {
                    candidate[(i, j)] = value;
                }
            }
            let diff = &candidate - &*a;
            let decrease_bound = fit
                + grad.iter().zip(diff.iter()).map(|(g, d)| g * d).sum::<f64>()
                + diff.norm_squared() / (2.0 * step);
            let candidate_fit = fit_value(&candidate, s, x);
            if candidate_fit <= decrease_bound + 1e-12 {
                let movement = diff.norm();
                *a = candidate;
                fit = candidate_fit;
                accepted = true;
                if movement <= 1e-10 * (1.0 + a.norm()) {
                    return;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

fn spectral_norm_estimate(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut norm = 0.0;
    for _ in 0..50 {
        let w = m * &v;
        norm = w.norm();
        if norm <= 1e-300 {
            return 0.0;
        }
        v = w / norm;
    }
    norm
}
