//! Seriation of noisy Robinson similarity matrices with SABRE (Seriate by
//! Aggregating Bisections and Re-Evaluating).
//!
//! The observation model is `A = F_π + σE` with `F` a Robinson matrix and
//! `π` an unknown order. The pipeline estimates row distances, builds a
//! partial comparison matrix from per-index graph bisections, resolves the
//! remaining pairs with side-sum tests and reads the order off the row
//! sums of the final comparison matrix.
//!
//! Items are indexed from 0 internally; positions and file formats are
//! 1-based.

pub mod distance;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod io;
pub mod matrix;
pub mod models;
pub mod perm;
pub mod pipeline;
pub mod stage1;
pub mod stage2;
pub mod unionfind;

pub use distance::{estimate_distance, gram, nn_proxy, population_distance, DistanceEstimate, Subset};
pub use error::{Result, SabreError};
pub use evaluate::{l_frobenius, l_kendall, l_max, l_one, loss_report, LossKind, LossReport};
pub use matrix::SymMatrix;
pub use models::{
    check_average_lipschitz, check_bilipschitz, check_local_distance_equivalence, check_robinson, gen_example,
    gen_f_alpha, sample_approx_permutation, sample_observation, Example, NoiseKind, NoiseSpec, RobinsonMode,
};
pub use perm::{
    oracle_comparison_matrix, permutation_from_comparison, permute_matrix, reverse_permutation, round_scores,
    ComparisonMatrix, Permutation,
};
pub use pipeline::{sabre, SabreConfig, SabreOutput, Tuning};
pub use stage1::{aggregate, build_bisection, orient, EdgeRule, Thresholds};
pub use stage2::{evaluate_comparison, modified_sets, preliminary_sets, refine, tripartition, SplitMode, SplitPlan};
