//! Self-intersection local times of planar lattice walks.
//!
//! The crate computes B_n = Σ_{1≤j<k≤n} δ(S_j, S_k) and its centred version
//! γ_n = B_n - E B_n for symmetric walks on Z², together with the tools used
//! to study their moderate deviations: exact return probabilities, block
//! decompositions, mollified occupation functionals, a two-route solver for
//! the sharp Gagliardo–Nirenberg constant κ(2,2), Monte Carlo tail and
//! cumulant estimators, iterated-logarithm traces and a polymer sampler.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deviation;
pub mod error;
pub mod gn;
pub mod kernel;
pub mod lattice;
pub mod occupation;
pub mod polymer;
pub mod report;
pub mod returns;
pub mod rng;
pub mod silt;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::Point;
pub use occupation::OccupationMap;
pub use returns::{expected_silt, return_probability, ExpectedSilt, ReturnTable};
pub use silt::{block_silt, cross_intersections, silt, silt_exact, BlockPart, BlockSpec, SiltAccumulator, Window};
pub use walk::{sample_path, Path, StepDistribution, StepSpec};
pub use deviation::{
    estimate_cumulant, estimate_lower_tail, estimate_upper_tail, exhaustive_silt_distribution, lil_trace, oracle_audit, AuditReport,
    DeviationConstants,
    ExactDistribution, LilTrace, ScalingSchedule, TailEstimate, TrialSet,
};
pub use gn::{gn_ratio, solve_kappa_grid, solve_kappa_ode, GridFunction, VariationalResult};
pub use kernel::{lattice_self_convolution, mollified_l2, Kernel2D, Mollifier};
pub use polymer::{collapse_sweep, polymer_mcmc, CollapseRow, PolymerChain, PolymerRun};
