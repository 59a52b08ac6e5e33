//! Beamforming design from target far-field beam patterns.
//!
//! A target pattern on a zenith/azimuth grid is turned into a beamforming
//! vector for a uniform rectangular array by minimizing a region-masked
//! pattern discrepancy. Digital, analog (phase-only) and fully connected
//! hybrid architectures are supported, either by direct gradient
//! optimization per target or through a small MLP decoder trained online
//! over a handful of targets. Reference beamformers (MRT, partial-CSI,
//! OMP, DFT codebook, least-squares phase-pattern recovery) and a
//! spectral-efficiency harness are included for benchmarking.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod baselines;
pub mod beamformer;
pub mod channel;
pub mod error;
pub mod eval;
pub mod io;
pub mod objective;
pub mod pattern;
pub mod rng;
pub mod synthesis;

pub use array::{AngleGrid, ArrayConfig, ArrayResponse, SteeringMatrix};
pub use beamformer::{Architecture, Beamformer, ParameterLayout};
pub use channel::{Channel, ChannelModelConfig, PathParams};
pub use error::{Error, Result};
pub use objective::{LossBreakdown, Objective, PeakMode};
pub use pattern::{BeamPattern, RegionMask, TargetShape, TargetSpec};

pub use num_complex::Complex64;
