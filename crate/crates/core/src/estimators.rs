//! Least-squares channel estimators and the zero-forcing detector.
//!
//! All estimators share one structure: the received block is spatially
//! separated with the steering pseudo-inverse, `(Y A^+)^T` (K x S), and then
//! divided element-wise by whatever symbols are believed to have been sent.
//!
//! * **P-LS** divides by the known pilots.
//! * **DD-SB** equalizes the first data block with the averaged P-LS estimate,
//!   slices to the nearest constellation points and divides the pilot and data
//!   observations together by `[X^P, X̄^D]`.
//! * **MDD-SB** drops the pilots after the first block and re-estimates only
//!   from the most recently detected data block, on a fixed block schedule,
//!   so the estimate follows the channel as it ages.
//!
//! Every raw estimate is averaged over its window and tiled, i.e. the channel
//! is treated as constant within a window.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::airlink::{Constellation, FrameLayout, FrameSignals, FrameTiming};
use crate::channel::{reference_channel, ChannelState};
use crate::numerics::{ComplexMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("block {block}: {source}")]
    Block { block: usize, source: LinalgError },
    #[error("initial estimate must be {expected:?}, got {got:?}")]
    InitialShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
}

/// Which estimator or baseline produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Pls,
    DdSb,
    MddSb,
    /// MDD-SB re-estimating from the true transmitted data.
    MddSbKnownData,
    PBound,
    Genie,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Pls,
        Method::DdSb,
        Method::MddSb,
        Method::MddSbKnownData,
        Method::PBound,
        Method::Genie,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Pls => "P-LS",
            Method::DdSb => "DD-SB",
            Method::MddSb => "MDD-SB",
            Method::MddSbKnownData => "MDD-SB-KD",
            Method::PBound => "P-bound",
            Method::Genie => "GA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown method label {s:?}"))
    }
}

/// A channel estimate tiled over the symbols it is meant for.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// K x W.
    pub values: ComplexMatrix,
    /// Frame symbols the raw estimate was computed from.
    pub window: Range<usize>,
    pub method: Method,
}

impl ChannelEstimate {
    /// Same per-user values re-tiled to `width` columns.
    pub fn tiled(&self, width: usize) -> ComplexMatrix {
        average_and_tile(&self.values, width)
    }
}

/// Zero-forcing outputs and their hard decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `X̂`, K x D.
    pub soft: ComplexMatrix,
    /// `X̄`, K x D, every entry a constellation point.
    pub hard: ComplexMatrix,
    /// Constellation label of every hard decision, row-major.
    pub labels: Vec<usize>,
    /// Errors against the transmitted symbols, when they were supplied.
    pub symbol_errors: Option<usize>,
}

impl DetectionResult {
    /// Counts decisions that differ from `truth`.
    pub fn with_truth(mut self, truth: &ComplexMatrix) -> Self {
        assert_eq!(truth.shape(), self.hard.shape());
        let errors = self
            .hard
            .as_slice()
            .iter()
            .zip(truth.as_slice())
            .filter(|(a, b)| a != b)
            .count();
        self.symbol_errors = Some(errors);
        self
    }

    pub fn symbol_error_rate(&self) -> Option<f64> {
        let n = self.hard.as_slice().len();
        self.symbol_errors.map(|e| if n == 0 { 0.0 } else { e as f64 / n as f64 })
    }
}

/// Spatial separation `(Y A^+)^T`: S x M received rows to K x S user streams.
pub fn project(rx: &ComplexMatrix, steering_pinv: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    Ok(rx.matmul(steering_pinv)?.transpose())
}

/// Raw per-symbol pilot estimate `(Y^P A^+)^T ⊘ X^P`, K x P.
pub fn pls_estimate(
    rx_pilot: &ComplexMatrix,
    pilots: &ComplexMatrix,
    steering_pinv: &ComplexMatrix,
) -> Result<ComplexMatrix, LinalgError> {
    project(rx_pilot, steering_pinv)?.hadamard_div(pilots)
}

/// Row means of `raw` repeated over `width` columns.
pub fn average_and_tile(raw: &ComplexMatrix, width: usize) -> ComplexMatrix {
    let n = raw.cols().max(1) as f64;
    let means: Vec<_> = (0..raw.rows())
        .map(|k| raw.row(k).iter().sum::<num_complex::Complex64>() / n)
        .collect();
    ComplexMatrix::from_fn(raw.rows(), width, |k, _| means[k])
}

/// Zero-forcing equalization `(Y^D A^+)^T ⊘ H̄`, K x D.
pub fn zf_equalize(
    rx_data: &ComplexMatrix,
    steering_pinv: &ComplexMatrix,
    tiled_estimate: &ComplexMatrix,
) -> Result<ComplexMatrix, LinalgError> {
    project(rx_data, steering_pinv)?.hadamard_div(tiled_estimate)
}

/// Minimum-distance detection of every soft symbol.
pub fn detect(soft: &ComplexMatrix, constellation: &Constellation) -> DetectionResult {
    let labels: Vec<usize> = soft.as_slice().iter().map(|&z| constellation.nearest(z)).collect();
    let hard = ComplexMatrix::new(
        soft.rows(),
        soft.cols(),
        labels.iter().map(|&l| constellation.point(l)).collect(),
    )
    .expect("same shape as soft");
    DetectionResult {
        soft: soft.clone(),
        hard,
        labels,
        symbol_errors: None,
    }
}

/// Raw semi-blind estimate over pilots and detected data,
/// `([Y^P; Y^D] A^+)^T ⊘ [X^P, X̄^D]`, K x (P + D).
pub fn ddsb_estimate(
    rx_pilot: &ComplexMatrix,
    rx_data: &ComplexMatrix,
    pilots: &ComplexMatrix,
    detected: &ComplexMatrix,
    steering_pinv: &ComplexMatrix,
) -> Result<ComplexMatrix, LinalgError> {
    let rx = rx_pilot.vcat(rx_data)?;
    let symbols = pilots.hcat(detected)?;
    project(&rx, steering_pinv)?.hadamard_div(&symbols)
}

/// What MDD-SB divides by when it re-estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataAid {
    /// The block's own hard decisions (the real estimator).
    Detected,
    /// The transmitted symbols (a benchmark with perfect data knowledge).
    Known,
}

/// Per-block output of an MDD-SB run.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub block: usize,
    /// Detection with the estimate current when the block arrived.
    pub detection: DetectionResult,
    /// Estimate after the block: fresh when `updated`, carried over otherwise.
    pub estimate: ChannelEstimate,
    pub updated: bool,
}

/// MDD-SB over every data block of `frame`, re-estimating at the blocks the
/// layout schedules (multiples of `update_interval`).
pub fn mddsb_run(
    frame: &FrameSignals,
    initial: &ChannelEstimate,
    steering_pinv: &ComplexMatrix,
    layout: &FrameLayout,
    constellation: &Constellation,
) -> Result<Vec<BlockOutcome>, EstimationError> {
    mddsb_run_with(
        frame,
        initial,
        steering_pinv,
        layout,
        constellation,
        |b| layout.is_update_block(b),
        DataAid::Detected,
    )
}

/// MDD-SB with an arbitrary update schedule and data source.
///
/// For each block: equalize with the current tiled estimate, detect, and on
/// scheduled blocks replace the estimate by the block-only re-estimate
/// `(Y^{D,i} A^+)^T ⊘ X̄^{D,i}`, averaged and tiled.
pub fn mddsb_run_with(
    frame: &FrameSignals,
    initial: &ChannelEstimate,
    steering_pinv: &ComplexMatrix,
    layout: &FrameLayout,
    constellation: &Constellation,
    schedule: impl Fn(usize) -> bool,
    aid: DataAid,
) -> Result<Vec<BlockOutcome>, EstimationError> {
    let k = frame.pilots.rows();
    if initial.values.shape() != (k, layout.d) {
        return Err(EstimationError::InitialShape {
            expected: (k, layout.d),
            got: initial.values.shape(),
        });
    }
    // One projection for the whole frame; blocks are column slices of it.
    let projected = project(&frame.rx_data, steering_pinv)?;
    let method = match aid {
        DataAid::Detected => Method::MddSb,
        DataAid::Known => Method::MddSbKnownData,
    };

    let mut current = initial.clone();
    let mut out = Vec::with_capacity(layout.n_blocks);
    for block in 1..=layout.n_blocks {
        let cols = layout.block_columns(block);
        let y = projected.columns(cols.clone());
        let truth = frame.data.columns(cols);
        let soft = y
            .hadamard_div(&current.values)
            .map_err(|source| EstimationError::Block { block, source })?;
        let detection = detect(&soft, constellation).with_truth(&truth);
        let updated = schedule(block);
        if updated {
            let divisor = match aid {
                DataAid::Detected => &detection.hard,
                DataAid::Known => &truth,
            };
            let raw = y
                .hadamard_div(divisor)
                .map_err(|source| EstimationError::Block { block, source })?;
            current = ChannelEstimate {
                values: average_and_tile(&raw, layout.d),
                window: layout.block_symbols(block),
                method,
            };
        }
        out.push(BlockOutcome {
            block,
            detection,
            estimate: current.clone(),
            updated,
        });
    }
    Ok(out)
}

/// Perfect knowledge of the pilot-block channel, averaged over the pilots and
/// never updated.
pub fn pbound_estimate(state: &ChannelState, timing: &FrameTiming, layout: &FrameLayout) -> ChannelEstimate {
    let truth = reference_channel(state, timing, layout.pilot_symbols());
    ChannelEstimate {
        values: average_and_tile(&truth, layout.d),
        window: layout.pilot_symbols(),
        method: Method::PBound,
    }
}

/// Zero-forcing detection of block `block` with the exact per-symbol
/// effective channel.
pub fn genie_detect(
    frame: &FrameSignals,
    state: &ChannelState,
    timing: &FrameTiming,
    steering_pinv: &ComplexMatrix,
    constellation: &Constellation,
    block: usize,
) -> Result<DetectionResult, LinalgError> {
    let layout = &frame.layout;
    let truth_channel = reference_channel(state, timing, layout.block_symbols(block));
    let soft = zf_equalize(&frame.rx_data_block(block), steering_pinv, &truth_channel)?;
    Ok(detect(&soft, constellation).with_truth(&frame.data_block(block)))
}
