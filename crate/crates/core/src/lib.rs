//! Population counts over arrays of 64-bit words and fused
//! intersection/union/Jaccard counts over pairs of bitsets.
//!
//! [`count_auto`] and [`jaccard_auto`] pick a kernel for the running CPU
//! and the input size; [`Dispatcher`] exposes the registry, explicit kernel
//! names and feature masking. Scalar kernels live in [`scalar`], vector
//! kernels and their portable emulation in [`vector`].

pub mod bench;
pub mod block;
pub mod error;
pub mod oracle;
pub mod scalar;
pub mod selftest;
pub mod source;
pub mod vector;

pub mod dispatch;
pub mod similarity;

pub use block::{load_words, PopCount, WordBlock};
pub use dispatch::{
    count_auto, jaccard_auto, Dispatcher, KernelDescriptor, KernelId, KernelKind, Thresholds,
};
pub use error::{Error, Result};
pub use similarity::{
    intersection_count, jaccard_hs, jaccard_popcnt, union_count, SimilarityResult,
};
pub use vector::{detect_cpu_features, CpuFeatureSet};
