//! Fixtures shared by the benchmarks.

use silt_core::{sample_path, Path, StepDistribution};

/// A lazy-walk path of length `n` drawn from a fixed stream.
pub fn lazy_path(n: usize) -> Path {
    sample_path(&StepDistribution::lazy(), n, 0xBE4C, 0).expect("n is positive")
}
