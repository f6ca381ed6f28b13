//! Uplink frame construction and received-signal synthesis.
//!
//! A frame is `N + 1` blocks on one subcarrier: block 0 carries `P`
//! Zadoff-Chu pilot symbols per user, blocks `1..=N` carry `D` QAM data
//! symbols each. The received matrix is `Y = (H ⊙ X)^T A + Z` where `H` is the
//! satellite-Doppler-compensated channel.

mod constellation;
mod zadoff_chu;

pub use constellation::Constellation;
pub use zadoff_chu::{build_pilot_matrix, zadoff_chu};

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::channel::{reference_channel, ChannelState};
use crate::numerics::{ComplexMatrix, LinalgError};
use crate::rng::complex_gaussian;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirlinkError {
    #[error("Zadoff-Chu root {root} is not coprime with length {length}")]
    RootNotCoprime { root: usize, length: usize },
    #[error("cyclic shift {shift} out of range for length {length}")]
    ShiftOutOfRange { shift: usize, length: usize },
    #[error("{pilots} pilot symbols cannot keep {users} users orthogonal")]
    TooFewPilots { pilots: usize, users: usize },
    #[error("unsupported QAM order {0}")]
    UnsupportedOrder(usize),
    #[error("cannot calibrate noise against an all-zero signal")]
    ZeroSignal,
    #[error("invalid frame timing: {0}")]
    InvalidTiming(&'static str),
    #[error("invalid frame layout: {0}")]
    InvalidLayout(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// OFDM numerology of the simulated subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub n_sc: usize,
    pub n_cp: usize,
    /// Sampling period in seconds.
    pub t_s: f64,
    /// Subcarrier index `c`.
    pub subcarrier: usize,
}

impl Default for FrameTiming {
    fn default() -> Self {
        Self::from_spacing(DEFAULT_N_SC, DEFAULT_N_CP, DEFAULT_SCS_HZ, 0).expect("valid defaults")
    }
}

pub const DEFAULT_N_SC: usize = 4096;
pub const DEFAULT_N_CP: usize = 288;
/// Slow enough aging that block-wise tracking holds at moderate SNR.
pub const DEFAULT_SCS_HZ: f64 = 960e3;

impl FrameTiming {
    /// Timing from a subcarrier spacing: `T_s = 1 / (N_sc * scs)`.
    pub fn from_spacing(n_sc: usize, n_cp: usize, scs_hz: f64, subcarrier: usize) -> Result<Self, AirlinkError> {
        if n_sc == 0 {
            return Err(AirlinkError::InvalidTiming("n_sc must be positive"));
        }
        if !(scs_hz > 0.0 && scs_hz.is_finite()) {
            return Err(AirlinkError::InvalidTiming("subcarrier spacing must be positive"));
        }
        if subcarrier >= n_sc {
            return Err(AirlinkError::InvalidTiming("subcarrier index must be below n_sc"));
        }
        Ok(Self {
            n_sc,
            n_cp,
            t_s: 1.0 / (n_sc as f64 * scs_hz),
            subcarrier,
        })
    }

    /// `T_sl = N_sc T_s`.
    pub fn symbol_duration(&self) -> f64 {
        self.n_sc as f64 * self.t_s
    }

    /// `T_cp = N_cp T_s`.
    pub fn cp_duration(&self) -> f64 {
        self.n_cp as f64 * self.t_s
    }

    pub fn symbol_period(&self) -> f64 {
        self.symbol_duration() + self.cp_duration()
    }

    /// Start time of OFDM symbol `s` (0-based).
    pub fn symbol_time(&self, s: usize) -> f64 {
        s as f64 * self.symbol_period()
    }

    /// `c / T_sl`.
    pub fn subcarrier_frequency(&self) -> f64 {
        self.subcarrier as f64 / self.symbol_duration()
    }
}

/// Pilot block followed by `n_blocks` data blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub p: usize,
    pub d: usize,
    pub n_blocks: usize,
    /// MDD-SB re-estimates at every block that is a multiple of this.
    pub update_interval: usize,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self {
            p: 15,
            d: 15,
            n_blocks: 50,
            update_interval: 5,
        }
    }
}

impl FrameLayout {
    pub fn validate(&self) -> Result<(), AirlinkError> {
        if self.p == 0 || self.d == 0 || self.n_blocks == 0 {
            return Err(AirlinkError::InvalidLayout("p, d and n_blocks must be positive"));
        }
        if self.update_interval == 0 || self.update_interval > self.n_blocks {
            return Err(AirlinkError::InvalidLayout("update_interval must be in 1..=n_blocks"));
        }
        Ok(())
    }

    pub fn total_symbols(&self) -> usize {
        self.p + self.n_blocks * self.d
    }

    pub fn pilot_symbols(&self) -> Range<usize> {
        0..self.p
    }

    /// Frame symbol indices of data block `block` (1-based).
    pub fn block_symbols(&self, block: usize) -> Range<usize> {
        assert!(block >= 1 && block <= self.n_blocks, "block {block} out of range");
        let start = self.p + (block - 1) * self.d;
        start..start + self.d
    }

    /// Column range of block `block` inside the concatenated data matrix.
    pub fn block_columns(&self, block: usize) -> Range<usize> {
        assert!(block >= 1 && block <= self.n_blocks, "block {block} out of range");
        (block - 1) * self.d..block * self.d
    }

    pub fn is_update_block(&self, block: usize) -> bool {
        block >= 1 && block.is_multiple_of(self.update_interval)
    }

    /// Same layout truncated to the first `n_blocks` data blocks.
    pub fn truncated(&self, n_blocks: usize) -> Self {
        Self {
            n_blocks,
            update_interval: self.update_interval.min(n_blocks.max(1)),
            ..*self
        }
    }
}

/// All transmitted and received matrices of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignals {
    pub layout: FrameLayout,
    /// `X^P`, K x P.
    pub pilots: ComplexMatrix,
    /// `X^D` for all blocks, K x (N D).
    pub data: ComplexMatrix,
    /// `Y^P`, P x M.
    pub rx_pilot: ComplexMatrix,
    /// `Y^D` for all blocks, (N D) x M.
    pub rx_data: ComplexMatrix,
    pub clean_pilot: ComplexMatrix,
    pub clean_data: ComplexMatrix,
    /// Per-entry complex noise variance.
    pub sigma2: f64,
}

impl FrameSignals {
    /// Transmitted data of block `block`, K x D.
    pub fn data_block(&self, block: usize) -> ComplexMatrix {
        self.data.columns(self.layout.block_columns(block))
    }

    /// Received data of block `block`, D x M.
    pub fn rx_data_block(&self, block: usize) -> ComplexMatrix {
        self.rx_data.row_block(self.layout.block_columns(block))
    }
}

/// I.i.d. uniform constellation symbols, K x S.
pub fn map_symbols<R: Rng + ?Sized>(rng: &mut R, constellation: &Constellation, k: usize, s: usize) -> ComplexMatrix {
    let order = constellation.order();
    ComplexMatrix::from_fn(k, s, |_, _| constellation.point(rng.random_range(0..order)))
}

/// Received matrix `(H ⊙ X)^T A` plus i.i.d. circular Gaussian noise of
/// per-entry variance `sigma2`. Returns `(noisy, noiseless)`, both S x M.
pub fn synthesize_rx<R: Rng + ?Sized>(
    h_eff: &ComplexMatrix,
    x: &ComplexMatrix,
    steering: &ComplexMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<(ComplexMatrix, ComplexMatrix), AirlinkError> {
    let noiseless = h_eff.hadamard_mul(x)?.transpose().matmul(steering)?;
    let noisy = add_noise(&noiseless, sigma2, rng);
    Ok((noisy, noiseless))
}

fn add_noise<R: Rng + ?Sized>(clean: &ComplexMatrix, sigma2: f64, rng: &mut R) -> ComplexMatrix {
    let mut noisy = clean.clone();
    for v in noisy.as_mut_slice() {
        *v += complex_gaussian(rng, sigma2);
    }
    noisy
}

/// Noise variance giving `target_snr_db` for `noiseless`, using average
/// per-entry signal energy over per-entry noise variance. `+inf` gives 0.
pub fn calibrate_sigma2(target_snr_db: f64, noiseless: &ComplexMatrix) -> Result<f64, AirlinkError> {
    let energy = noiseless.norm_sqr();
    if !(energy > 0.0) {
        return Err(AirlinkError::ZeroSignal);
    }
    if target_snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let per_entry = energy / noiseless.as_slice().len() as f64;
    Ok(per_entry / 10f64.powf(target_snr_db / 10.0))
}

/// Everything fixed about the transmitted waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuilder {
    pub timing: FrameTiming,
    pub layout: FrameLayout,
    pub constellation: Constellation,
    pub zc_root: usize,
}

impl FrameBuilder {
    /// Draws data, synthesizes the whole frame through `state`'s effective
    /// channel and adds noise calibrated on the full noiseless frame.
    pub fn build<R: Rng + ?Sized>(&self, state: &ChannelState, snr_db: f64, rng: &mut R) -> Result<FrameSignals, AirlinkError> {
        let layout = self.layout;
        layout.validate()?;
        let k = state.users();
        let pilots = build_pilot_matrix(k, layout.p, self.zc_root)?;
        let data = map_symbols(rng, &self.constellation, k, layout.n_blocks * layout.d);
        let x = pilots.hcat(&data)?;
        let h_eff = reference_channel(state, &self.timing, 0..layout.total_symbols());
        let noiseless = h_eff.hadamard_mul(&x)?.transpose().matmul(&state.steering)?;
        let sigma2 = calibrate_sigma2(snr_db, &noiseless)?;
        let noisy = add_noise(&noiseless, sigma2, rng);
        let split = |m: &ComplexMatrix| (m.row_block(0..layout.p), m.row_block(layout.p..layout.total_symbols()));
        let (rx_pilot, rx_data) = split(&noisy);
        let (clean_pilot, clean_data) = split(&noiseless);
        Ok(FrameSignals {
            layout,
            pilots,
            data,
            rx_pilot,
            rx_data,
            clean_pilot,
            clean_data,
            sigma2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_scenario, ScenarioConfig};
    use crate::rng::SimRng;
    use num_complex::Complex64;
    use rand::SeedableRng;

    fn builder() -> FrameBuilder {
        FrameBuilder {
            timing: FrameTiming::default(),
            layout: FrameLayout::default(),
            constellation: Constellation::qam(16).unwrap(),
            zc_root: 1,
        }
    }

    #[test]
    fn default_timing_values() {
        let t = FrameTiming::from_spacing(4096, 288, 120e3, 0).unwrap();
        assert!((t.symbol_duration() - 8.3333e-6).abs() < 1e-9);
        assert!((t.cp_duration() - 0.5859e-6).abs() < 1e-9);
        assert!((t.symbol_period() - 8.9193e-6).abs() < 1e-9);
        assert_eq!(t.subcarrier_frequency(), 0.0);
        let d = FrameTiming::default();
        assert!((d.symbol_period() - 1.11491e-6).abs() < 1e-10);
        assert!(FrameTiming::from_spacing(16, 2, 1e3, 16).is_err());
    }

    #[test]
    fn symbol_times_evenly_spaced() {
        let t = FrameTiming::default();
        let period = t.symbol_period();
        for s in 1..800 {
            let dt = t.symbol_time(s) - t.symbol_time(s - 1);
            assert!(dt > 0.0 && (dt - period).abs() < 1e-15);
        }
    }

    #[test]
    fn layout_block_ranges() {
        let l = FrameLayout::default();
        assert_eq!(l.total_symbols(), 765);
        assert_eq!(l.block_symbols(1), 15..30);
        assert_eq!(l.block_symbols(50), 750..765);
        assert_eq!(l.block_columns(2), 15..30);
        assert!(l.is_update_block(5) && !l.is_update_block(6) && l.is_update_block(50));
        assert!(FrameLayout { update_interval: 51, ..l }.validate().is_err());
    }

    #[test]
    fn qpsk_symbols_normalized() {
        let c = Constellation::qam(4).unwrap();
        let x = map_symbols(&mut SimRng::seed_from_u64(1), &c, 3, 50);
        let s = 1.0 / 2f64.sqrt();
        for v in x.as_slice() {
            assert!((v.re.abs() - s).abs() < 1e-15 && (v.im.abs() - s).abs() < 1e-15);
        }
    }

    #[test]
    fn symbol_energy_law_of_large_numbers() {
        let c = Constellation::qam(16).unwrap();
        let x = map_symbols(&mut SimRng::seed_from_u64(2), &c, 10, 10_000);
        let e = x.norm_sqr() / 100_000.0;
        assert!((e - 1.0).abs() < 0.02, "{e}");
    }

    #[test]
    fn map_symbols_reproducible() {
        let c = Constellation::qam(16).unwrap();
        let a = map_symbols(&mut SimRng::seed_from_u64(3), &c, 4, 20);
        let b = map_symbols(&mut SimRng::seed_from_u64(3), &c, 4, 20);
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_synthesis() {
        let mut rng = SimRng::seed_from_u64(4);
        let state = sample_scenario(&mut rng, &ScenarioConfig::default()).unwrap();
        let h = ComplexMatrix::filled(10, 5, Complex64::new(0.3, 0.1));
        let x = map_symbols(&mut rng, &Constellation::qam(16).unwrap(), 10, 5);
        let (noisy, clean) = synthesize_rx(&h, &x, &state.steering, 0.0, &mut rng).unwrap();
        assert_eq!(noisy, clean);

        let a = ComplexMatrix::row_vector(state.steering.row(0));
        let one = ComplexMatrix::filled(1, 1, Complex64::new(1.0, 0.0));
        let (_, clean) = synthesize_rx(&one, &one, &a, 0.0, &mut rng).unwrap();
        assert_eq!(clean, a);

        assert!(synthesize_rx(&h, &x.columns(0..4), &state.steering, 0.0, &mut rng).is_err());
    }

    #[test]
    fn synthesized_noise_variance() {
        let mut rng = SimRng::seed_from_u64(5);
        let zeros = ComplexMatrix::zeros(1, 1000);
        let steering = ComplexMatrix::zeros(1, 1000);
        let (noisy, _) = synthesize_rx(&zeros, &zeros, &steering, 0.7, &mut rng).unwrap();
        let var = noisy.norm_sqr() / 1e6;
        assert!((var - 0.7).abs() < 0.007, "{var}");
    }

    #[test]
    fn sigma2_calibration() {
        let ones = ComplexMatrix::filled(4, 25, Complex64::new(1.0, 0.0));
        assert!((calibrate_sigma2(0.0, &ones).unwrap() - 1.0).abs() < 1e-15);
        assert!((calibrate_sigma2(10.0, &ones).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(calibrate_sigma2(f64::INFINITY, &ones).unwrap(), 0.0);
        assert_eq!(calibrate_sigma2(3.0, &ComplexMatrix::zeros(2, 2)).unwrap_err(), AirlinkError::ZeroSignal);
    }

    #[test]
    fn frame_layout_and_determinism() {
        let b = builder();
        let state = sample_scenario(&mut SimRng::seed_from_u64(6), &ScenarioConfig::default()).unwrap();
        let f1 = b.build(&state, 10.0, &mut SimRng::seed_from_u64(7)).unwrap();
        let f2 = b.build(&state, 10.0, &mut SimRng::seed_from_u64(7)).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.rx_data.shape(), (750, 100));
        assert_eq!(f1.rx_pilot.shape(), (15, 100));
        assert_eq!(f1.data.shape(), (10, 750));
        assert!(f1.pilots.as_slice().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert!(f1.sigma2 > 0.0);
        assert_eq!(f1.data_block(3).shape(), (10, 15));
        assert_eq!(f1.rx_data_block(3), f1.rx_data.row_block(30..45));
    }

    #[test]
    fn infinite_snr_frame_is_noiseless() {
        let b = builder();
        let state = sample_scenario(&mut SimRng::seed_from_u64(8), &ScenarioConfig::default()).unwrap();
        let f = b.build(&state, f64::INFINITY, &mut SimRng::seed_from_u64(9)).unwrap();
        assert_eq!(f.sigma2, 0.0);
        assert_eq!(f.rx_pilot, f.clean_pilot);
        let h = reference_channel(&state, &b.timing, 0..15);
        let expected = h.hadamard_mul(&f.pilots).unwrap().transpose().matmul(&state.steering).unwrap();
        assert!(f.rx_pilot.max_abs_diff(&expected) == 0.0);
    }
}
