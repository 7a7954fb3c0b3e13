use conefactor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn separated_endmembers(m: usize, n: usize, min_angle_deg: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cos_cap = (min_angle_deg.to_radians()).cos();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        for x in v.iter_mut() {
            if *x < 0.55 { *x *= 0.05; }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 { continue; }
        v.iter_mut().for_each(|x| *x /= norm);
        if cols.iter().all(|c| { let cos: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum(); cos < cos_cap }) {
            cols.push(v);
        }
    }
    Matrix::from_columns(&cols).unwrap()
}

fn main() {
    let h = 1.0 - (4.0f64.to_radians()).cos();
    let endmembers = separated_endmembers(50, 9, 15.0, 4242);
    let plan = MixturePlan {
        endmembers: endmembers.clone(), pure_count: 30, pair_count: 20,
        triple_count: 10, full_count: 30, noise_std: 0.0, seed: 555,
    };
    let (clean, truth) = gen_mixtures(&plan).unwrap();
    let (x, spiked) = gen_spike_outliers(&clean, 5.0, 0.03, 556).unwrap();
    let spike_col: Vec<f64> = x.col(*spiked.last().unwrap()).to_vec();
    println!("d = {}, spiked {}", x.cols(), spiked.len());

    let rp0 = kmeans_reduce(&x, 40, 0.995, 100, 0).unwrap();
    println!("n_c = {} sizes {:?}", rp0.n_candidates(), rp0.cluster_sizes);
    // angle of each candidate to spike
    let spike_angles: Vec<f64> = (0..rp0.n_candidates()).map(|j| angle_deg(rp0.y.col(j), &spike_col).unwrap()).collect();
    println!("candidate->spike angles (deg, rounded): {:?}", spike_angles.iter().map(|a| a.round()).collect::<Vec<_>>());

    // Basic with C_w = I
    let mut rp = rp0.clone();
    rp.col_weights = vec![1.0; rp.n_candidates()];
    rp.set_similarity_weights(40.0, h).unwrap();
    let cfg = SolverConfig { zeta: 1.3, beta: 250.0, max_iter: 50_000, ..SolverConfig::default() };
    let t0 = std::time::Instant::now();
    let basic = solve_basic(&rp, &cfg).unwrap();
    let closest = basic.selected.iter().map(|&j| spike_angles[j]).fold(f64::INFINITY, f64::min);
    println!("basic C_w=I: conv={} iters={} |sel|={} closest-to-spike={:.2} ({:.1}s)",
        basic.converged, basic.iterations, basic.selected.len(), closest, t0.elapsed().as_secs_f64());
    let em = EndmemberSet::from_selection(&rp, &basic.selected).unwrap();
    let rep = match_and_score(&em.a, &truth.a).unwrap();
    println!("  basic avg angle (9 matched) {:.3}", rep.avg_deg);

    // Extended with fraction weights
    let mut rpe = rp0.clone();
    rpe.set_similarity_weights(40.0, h).unwrap();
    let ecfg = SolverConfig { zeta: 1.0, eta: 0.08, gamma: 0.01, max_iter: 120_000, ..SolverConfig::extended() };
    let disks = disks_from_problem(&rpe, ecfg.eta).unwrap();
    let ball = ball_from_problem(&rpe, ecfg.gamma).unwrap();
    let t0 = std::time::Instant::now();
    let ext = solve_extended(&rpe, &disks, &ball, &ecfg).unwrap();
    let closest = ext.selected.iter().map(|&j| spike_angles[j]).fold(f64::INFINITY, f64::min);
    println!("extended: conv={} iters={} |sel|={} closest-to-spike={:.2} ({:.1}s)",
        ext.converged, ext.iterations, ext.selected.len(), closest, t0.elapsed().as_secs_f64());
    if !ext.selected.is_empty() {
        let em = EndmemberSet::from_selection(&rpe, &ext.selected).unwrap();
        let rep = match_and_score(&em.a, &truth.a).unwrap();
        println!("  extended avg angle {:.3}", rep.avg_deg);
        let e = ext.e.as_ref().unwrap();
        let mass: f64 = e.iter().zip(&rpe.col_weights).map(|(a, w)| a * w).sum();
        println!("  outlier mass {:.4}, e>0.5 at {:?}", mass, (0..e.len()).filter(|&j| e[j] > 0.5).collect::<Vec<_>>());
    }
}
