//! Link-level simulator for the uplink of a massive-MIMO LEO satellite.
//!
//! Users on the ground send one block of Zadoff-Chu pilots followed by QAM
//! data blocks on a single OFDM subcarrier. The satellite carries a uniform
//! planar array, the users pre-compensate the satellite Doppler, and the
//! residual terminal Doppler makes the channel age over the frame. The crate
//! estimates that channel with pilot least squares (P-LS), decision-directed
//! semi-blind estimation (DD-SB) and its block-tracking variant (MDD-SB), and
//! scores the estimates by NMSE and the detection by SER in a seeded Monte
//! Carlo harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airlink;
pub mod channel;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod rng;

pub use airlink::{Constellation, FrameBuilder, FrameLayout, FrameSignals, FrameTiming};
pub use channel::{ArrayConfig, ChannelState, PathCount, ScenarioConfig};
pub use estimators::{ChannelEstimate, DetectionResult, Method};
pub use harness::{Experiment, SystemConfig};
pub use metrics::MetricRecord;
pub use numerics::{ComplexMatrix, LinalgError};
