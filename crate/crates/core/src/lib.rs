//! Convex endmember selection on physical space.
//!
//! The data matrix serves as its own dictionary: a row-sparse nonnegative
//! coefficient matrix `T` with `X ≈ XT` is found by convex optimization,
//! and the columns behind the surviving rows become the dictionary. The
//! crate provides the pieces of that pipeline:
//!
//! - [`matrix`]: dense matrix carrier, column normalization, CSV/JSON IO;
//! - [`reduction`]: farthest-first k-means candidate selection with cosine
//!   deduplication and similarity weights;
//! - [`projections`]: the proximal operators and projections the solvers
//!   are built from;
//! - [`solver`]: the quadratic-fidelity model and the outlier-aware
//!   constrained model;
//! - [`refine`]: ball-constrained alternating refinement, abundance
//!   recovery, and nonnegative least squares;
//! - [`eval`]: deviation angles, matching, the brute-force minimal-support
//!   oracle, and the noise-stability experiment;
//! - [`synth`]: seeded generators for the shipped experiment designs.
//!
//! With the default `parallel` feature, per-column and per-row inner loops
//! run on rayon; disabling it swaps in sequential fallbacks with identical
//! results.

pub mod error;
pub mod eval;
pub mod matrix;
mod par;
pub mod projections;
pub mod reduction;
pub mod refine;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{
    drop_small_columns, normalize_columns, read_matrix, write_matrix, Matrix, MatrixFormat,
    NormalizedData,
};
pub use projections::{
    project_disk, project_outlier_ball, project_pos_l1, prox_rowmax_nonneg, DiskConstraint,
    OutlierBall,
};
pub use reduction::{
    farthest_first_seeds, kmeans_reduce, similarity_weights, ClusterReport, ReducedProblem,
};
pub use refine::{nnls, project_ball_nonneg, refine, solve_abundances, EndmemberSet, Refined};
pub use solver::{
    ball_from_problem, disks_from_problem, feasibility_gap, l1_inf_norm, objective_basic,
    objective_extended, select_endmembers, solve_basic, solve_extended, SolveResult, SolverConfig,
};
pub use eval::{
    angle_deg, match_and_score, projection_stats, row0_default_tol, row0_oracle, run_stability,
    AlphaRule, MatchReport, Row0Certificate, StabilityConfig, StabilityLevel, StabilityReport,
};
pub use synth::{
    gen_bss, gen_clustered_cone, gen_mixtures, gen_spike_outliers, ClusterSpec, MixturePlan,
};
