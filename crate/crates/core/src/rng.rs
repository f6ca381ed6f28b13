//! Seeded random streams.
//!
//! Every Monte Carlo trial owns a ChaCha stream whose seed is a fixed mix of
//! the campaign seed, the experiment name, the SNR point and the trial index.
//! The mix is spelled out here (SplitMix64 finalizer, FNV-1a for the name) so
//! seeds are stable across platforms and toolchain versions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream type used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of the substream for one `(experiment, snr, trial)` cell.
pub fn substream_seed(master_seed: u64, experiment: &str, snr_db: f64, trial_index: u64) -> u64 {
    let mut h = splitmix64(master_seed);
    h = splitmix64(h ^ fnv1a(experiment.as_bytes()));
    h = splitmix64(h ^ snr_db.to_bits());
    splitmix64(h ^ trial_index)
}

pub fn trial_rng(master_seed: u64, experiment: &str, snr_db: f64, trial_index: u64) -> SimRng {
    SimRng::seed_from_u64(substream_seed(master_seed, experiment, snr_db, trial_index))
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
