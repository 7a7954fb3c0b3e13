//! Closed-form proximal operators and orthogonal projections used by the
//! solvers.
//!
//! All four operators are exact up to floating point: threshold parameters
//! are located by sort-and-scan over breakpoints, not by bisection, so each
//! projection costs O(n log n).

use crate::error::{Error, Result};

/// Euclidean projection of `v` onto `{ p : sum_i max(p_i, 0) <= zeta }`.
///
/// Negative entries are untouched. If the positive part already fits the
/// budget, `v` is returned unchanged; otherwise positive entries are
/// soft-thresholded by the unique `tau > 0` with `sum_i max(v_i - tau, 0) = zeta`.
pub fn project_pos_l1(v: &[f64], zeta: f64) -> Result<Vec<f64>> {
    if zeta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zeta must be nonnegative, got {zeta}"
        )));
    }
    let pos_sum: f64 = v.iter().filter(|&&x| x > 0.0).sum();
    if pos_sum <= zeta {
        return Ok(v.to_vec());
    }
    let mut positives: Vec<f64> = v.iter().cloned().filter(|&x| x > 0.0).collect();
    positives.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let tau = shrink_threshold(&positives, zeta);
    Ok(v.iter()
        .map(|&x| if x < 0.0 { x } else { (x - tau).max(0.0) })
        .collect())
}

/// Largest soft-threshold `tau` with `sum(max(u_i - tau, 0)) = budget`,
/// given `u` sorted descending with all entries positive.
fn shrink_threshold(sorted_desc: &[f64], budget: f64) -> f64 {
    let mut cumsum = 0.0;
    let mut tau = sorted_desc[0]; // budget == 0 zeroes every entry
    for (k, &u) in sorted_desc.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - budget) / (k + 1) as f64;
        if u > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// Proximal operator of `g_{>=0}(t) + weight * max_j t_j` at `v`: the
/// minimizer of that function plus `0.5 ||t - v||^2`. Computed through the
/// Moreau decomposition as `v - project_pos_l1(v, weight)`.
pub fn prox_rowmax_nonneg(v: &[f64], weight: f64) -> Result<Vec<f64>> {
    if weight < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "weight must be nonnegative, got {weight}"
        )));
    }
    let projected = project_pos_l1(v, weight)?;
    Ok(v.iter().zip(&projected).map(|(x, p)| x - p).collect())
}

/// Cylindrical noise region around a unit data column: the radial part is
/// bounded by `radius` and the axial part lies in `[sqrt(1 - r^2) - 1, 0]`.
#[derive(Debug, Clone)]
pub struct DiskConstraint {
    axis: Vec<f64>,
    radius: f64,
}

impl DiskConstraint {
    pub fn new(axis: Vec<f64>, radius: f64) -> Result<Self> {
        let norm: f64 = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "disk axis must be unit length, got norm {norm}"
            )));
        }
        if !(0.0..1.0).contains(&radius) {
            return Err(Error::InvalidParameter(format!(
                "disk radius must lie in [0, 1), got {radius}"
            )));
        }
        Ok(Self { axis, radius })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Lower bound of the axial interval, `sqrt(1 - r^2) - 1`.
    pub fn axial_floor(&self) -> f64 {
        (1.0 - self.radius * self.radius).sqrt() - 1.0
    }
}

/// Orthogonal projection onto the disk: clamp the component along the axis
/// into the axial interval and rescale the perpendicular component to the
/// radius if it pokes out.
pub fn project_disk(v: &[f64], disk: &DiskConstraint) -> Vec<f64> {
    debug_assert_eq!(v.len(), disk.axis.len());
    let parallel: f64 = v.iter().zip(&disk.axis).map(|(a, b)| a * b).sum();
    let clamped = parallel.clamp(disk.axial_floor(), 0.0);
    let mut perp: Vec<f64> = v
        .iter()
        .zip(&disk.axis)
        .map(|(x, a)| x - parallel * a)
        .collect();
    let perp_norm: f64 = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    if perp_norm > disk.radius {
        let scale = if perp_norm > 0.0 {
            disk.radius / perp_norm
        } else {
            0.0
        };
        for x in &mut perp {
            *x *= scale;
        }
    }
    perp.iter()
        .zip(&disk.axis)
        .map(|(w, a)| clamped * a + w)
        .collect()
}

/// The nonnegative region of a weighted l1 ball:
/// `{ e >= 0, sum_j weights_j e_j <= budget }`.
#[derive(Debug, Clone)]
pub struct OutlierBall {
    weights: Vec<f64>,
    budget: f64,
}

impl OutlierBall {
    /// Weights must be positive and finite; reduction-produced balls carry
    /// the cluster-fraction weights, which sum to one.
    pub fn new(weights: Vec<f64>, budget: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if let Some(j) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "ball weight {} is not positive and finite",
                j
            )));
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball budget must be nonnegative, got {budget}"
            )));
        }
        Ok(Self { weights, budget })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }
}

/// Euclidean projection onto the outlier ball. Negative entries clamp to
/// zero; if the weighted sum still exceeds the budget, entries shrink to
/// `max(v_j - lambda * w_j, 0)` with `lambda` located by sorting the ratios
/// `v_j / w_j`.
pub fn project_outlier_ball(v: &[f64], ball: &OutlierBall) -> Vec<f64> {
    debug_assert_eq!(v.len(), ball.weights.len());
    let clamped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let weighted: f64 = clamped
        .iter()
        .zip(&ball.weights)
        .map(|(e, w)| e * w)
        .sum();
    if weighted <= ball.budget {
        return clamped;
    }
    // Active constraint: order candidates by the lambda at which they vanish.
    let mut order: Vec<usize> = (0..v.len()).filter(|&j| v[j] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = v[a] / ball.weights[a];
        let rb = v[b] / ball.weights[b];
        rb.partial_cmp(&ra).expect("finite ratios")
    });
    let mut wv = 0.0;
    let mut ww = 0.0;
    let mut lambda = 0.0;
    for (k, &j) in order.iter().enumerate() {
        wv += ball.weights[j] * v[j];
        ww += ball.weights[j] * ball.weights[j];
        let candidate = (wv - ball.budget) / ww;
        let next_ratio = order
            .get(k + 1)
            .map(|&n| v[n] / ball.weights[n])
            .unwrap_or(0.0);
        if candidate >= next_ratio {
            lambda = candidate;
            break;
        }
    }
    v.iter()
        .zip(&ball.weights)
        .map(|(&x, &w)| (x - lambda * w).max(0.0))
        .collect()
}
