//! Independent brute-force projections used to cross-check the closed-form
//! operators. Each oracle takes a different algorithmic route from the
//! implementation it verifies: projected gradient on a split formulation,
//! one-dimensional grid refinement, or Dykstra alternating projections
//! between elementary sets. None of them sort breakpoints.

/// Projection onto `{x : sum_i max(x_i, 0) <= zeta}` by projected gradient
/// on the split `x = n + p` with `n <= 0` and `p` in the nonnegative
/// l1 ball. The inner ball projection runs by bisection on the shrink
/// threshold. Runs up to `steps` iterations, stopping early only once the
/// iterate stalls at machine precision.
pub fn pg_project_pos_l1(v: &[f64], zeta: f64, steps: usize) -> Vec<f64> {
    let k = v.len();
    let mut n: Vec<f64> = v.iter().map(|&x| x.min(0.0)).collect();
    let positive: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let mut p = bisect_nonneg_l1_ball(&positive, zeta);
    let step = 0.5; // gradient Lipschitz constant of the split objective is 2
    let mut grad = vec![0.0; k];
    for _ in 0..steps {
        let mut stalled = true;
        for i in 0..k {
            grad[i] = n[i] + p[i] - v[i];
        }
        for i in 0..k {
            let next = (n[i] - step * grad[i]).min(0.0);
            if (next - n[i]).abs() > 1e-16 {
                stalled = false;
            }
            n[i] = next;
        }
        let moved: Vec<f64> = (0..k).map(|i| p[i] - step * grad[i]).collect();
        let projected = bisect_nonneg_l1_ball(&moved, zeta);
        for i in 0..k {
            if (projected[i] - p[i]).abs() > 1e-16 {
                stalled = false;
            }
            p[i] = projected[i];
        }
        if stalled {
            break;
        }
    }
    (0..k).map(|i| n[i] + p[i]).collect()
}

/// Projection onto `{p >= 0, sum p_i <= budget}` by bisection on the
/// soft-threshold level.
fn bisect_nonneg_l1_ball(u: &[f64], budget: f64) -> Vec<f64> {
    let clamped: Vec<f64> = u.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= budget {
        return clamped;
    }
    let mut lo = 0.0;
    let mut hi = u.iter().cloned().fold(0.0, f64::max);
    for _ in 0..64 {
        let tau = 0.5 * (lo + hi);
        let mass: f64 = u.iter().map(|&x| (x - tau).max(0.0)).sum();
        if mass > budget {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let tau = 0.5 * (lo + hi);
    u.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Minimizer of `weight * max_j t_j + 0.5 ||t - v||^2` over `t >= 0` by
/// grid refinement on the shared maximum `M`: given `M`, each coordinate
/// is the clamp of `v_i` into `[0, M]`, and the objective is convex in `M`.
pub fn grid_prox_rowmax_nonneg(v: &[f64], weight: f64) -> Vec<f64> {
    let top = v.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return vec![0.0; v.len()];
    }
    let objective = |m: f64| -> f64 {
        weight * m
            + 0.5
                * v.iter()
                    .map(|&x| {
                        let t = x.clamp(0.0, m);
                        (t - x) * (t - x)
                    })
                    .sum::<f64>()
    };
    let mut lo = 0.0;
    let mut hi = top;
    let mut best_m = 0.0;
    for _ in 0..5 {
        let points = 2000;
        let mut best_val = f64::INFINITY;
        for g in 0..=points {
            let m = lo + (hi - lo) * g as f64 / points as f64;
            let val = objective(m);
            if val < best_val {
                best_val = val;
                best_m = m;
            }
        }
        let width = (hi - lo) / points as f64;
        lo = (best_m - 2.0 * width).max(0.0);
        hi = (best_m + 2.0 * width).min(top);
    }
    v.iter().map(|&x| x.clamp(0.0, best_m)).collect()
}

/// Projection onto `{e >= 0, <weights, e> <= budget}` by Dykstra
/// alternating projections between the orthant and the halfspace.
pub fn dykstra_outlier_ball(v: &[f64], weights: &[f64], budget: f64, cycles: usize) -> Vec<f64> {
    let k = v.len();
    let ww: f64 = weights.iter().map(|w| w * w).sum();
    let mut x = v.to_vec();
    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    for _ in 0..cycles {
        let mut change = 0.0f64;
        // Orthant step.
        for i in 0..k {
            let s = x[i] + p[i];
            let y = s.max(0.0);
            p[i] = s - y;
            x[i] = y;
        }
        // Halfspace step.
        let shifted: Vec<f64> = (0..k).map(|i| x[i] + q[i]).collect();
        let excess: f64 =
            (shifted.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() - budget).max(0.0);
        for i in 0..k {
            let y = shifted[i] - excess / ww * weights[i];
            q[i] = shifted[i] - y;
            change = change.max((y - x[i]).abs());
            x[i] = y;
        }
        if change <= 1e-15 {
            break;
        }
    }
    x
}

/// Projection onto the cylindrical disk (axial interval times radial ball)
/// by Dykstra alternating projections between the slab and the cylinder.
pub fn dykstra_disk(v: &[f64], axis: &[f64], radius: f64, cycles: usize) -> Vec<f64> {
    let k = v.len();
    let floor = (1.0 - radius * radius).sqrt() - 1.0;
    let mut x = v.to_vec();
    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    for _ in 0..cycles {
        let mut change = 0.0f64;
        // Slab step: clamp the axial coordinate.
        let shifted: Vec<f64> = (0..k).map(|i| x[i] + p[i]).collect();
        let par: f64 = shifted.iter().zip(axis).map(|(a, b)| a * b).sum();
        let clamped = par.clamp(floor, 0.0);
        for i in 0..k {
            let y = shifted[i] + (clamped - par) * axis[i];
            p[i] = shifted[i] - y;
            x[i] = y;
        }
        // Cylinder step: rescale the perpendicular component.
        let shifted: Vec<f64> = (0..k).map(|i| x[i] + q[i]).collect();
        let par: f64 = shifted.iter().zip(axis).map(|(a, b)| a * b).sum();
        let mut perp_sq = 0.0;
        for i in 0..k {
            let w = shifted[i] - par * axis[i];
            perp_sq += w * w;
        }
        let perp = perp_sq.sqrt();
        let scale = if perp > radius { radius / perp } else { 1.0 };
        for i in 0..k {
            let w = shifted[i] - par * axis[i];
            let y = par * axis[i] + scale * w;
            q[i] = shifted[i] - y;
            change = change.max((y - x[i]).abs());
            x[i] = y;
        }
        if change <= 1e-15 {
            break;
        }
    }
    x
}
