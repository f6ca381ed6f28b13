//! LEO uplink channel model.
//!
//! Each user sees a Rician channel toward the satellite's uniform planar
//! array: a line-of-sight term and `P_k` Rayleigh-faded multipath terms that
//! share the user's array response (all paths arrive from the same direction
//! at orbital altitude). The satellite-motion Doppler is common to every path
//! of a user and is pre-compensated at the terminal, so the quantity the
//! receiver actually estimates is the *effective* channel without it.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::airlink::FrameTiming;
use crate::numerics::{gram_condition_number, kronecker, ComplexMatrix};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Users are placed between this elevation and zenith.
pub const MIN_ELEVATION_DEG: f64 = 30.0;
/// Minimum direction-cosine distance between two users.
pub const MIN_USER_SEPARATION: f64 = 0.05;
/// Resampling budget for the user placement guard.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;
/// Largest accepted `cond(A A^H)` for a sampled steering matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("path loss needs positive carrier and distance, got fc={fc_ghz} GHz, d={d_m} m")]
    NonPositivePathLossInput { fc_ghz: f64, d_m: f64 },
    #[error("array must have at least one element per axis, got {m_x}x{m_y}")]
    EmptyArray { m_x: usize, m_y: usize },
    #[error("could not place user {user} after {attempts} attempts")]
    PlacementExhausted { user: usize, attempts: usize },
    #[error("steering matrix stayed ill conditioned (cond {condition:.3e}) after {attempts} resamples")]
    IllConditioned { condition: f64, attempts: usize },
}

/// Uniform planar array with half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    pub m_x: usize,
    pub m_y: usize,
}

impl ArrayConfig {
    pub fn new(m_x: usize, m_y: usize) -> Result<Self, ChannelError> {
        if m_x == 0 || m_y == 0 {
            return Err(ChannelError::EmptyArray { m_x, m_y });
        }
        Ok(Self { m_x, m_y })
    }

    /// Total element count `M = M_x M_y`.
    pub fn elements(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// Array vector along one axis: entry `i` is `exp(-j pi i dir) / sqrt(m)`.
pub fn upa_axis_vector(dir: f64, m: usize) -> Vec<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|i| Complex64::from_polar(scale, -PI * i as f64 * dir))
        .collect()
}

/// UPA response for the given direction cosines
/// (`dir_x = sin(theta_y) cos(theta_x)`, `dir_y = cos(theta_y)`).
pub fn array_response_from_cosines(dir_x: f64, dir_y: f64, array: &ArrayConfig) -> Vec<Complex64> {
    kronecker(
        &upa_axis_vector(dir_x, array.m_x),
        &upa_axis_vector(dir_y, array.m_y),
    )
}

/// UPA response vector `v_x(sin θy cos θx) ⊗ v_y(cos θy)`, unit norm.
pub fn array_response(theta_x: f64, theta_y: f64, array: &ArrayConfig) -> Vec<Complex64> {
    array_response_from_cosines(theta_y.sin() * theta_x.cos(), theta_y.cos(), array)
}

/// Free-space path loss in dB with the carrier in GHz and distance in meters.
pub fn path_loss_db(fc_ghz: f64, d_m: f64) -> Result<f64, ChannelError> {
    if !(fc_ghz > 0.0 && d_m > 0.0) {
        return Err(ChannelError::NonPositivePathLossInput { fc_ghz, d_m });
    }
    Ok(32.45 + 20.0 * fc_ghz.log10() + 20.0 * d_m.log10())
}

/// Slant range from a ground user at `elevation_rad` to a satellite at
/// `altitude_m`, over a spherical Earth.
pub fn slant_range_m(elevation_rad: f64, altitude_m: f64) -> f64 {
    let re = EARTH_RADIUS_M;
    let s = elevation_rad.sin();
    (re * re * s * s + altitude_m * altitude_m + 2.0 * re * altitude_m).sqrt() - re * s
}

/// How the number of multipath components per user is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathCount {
    /// Every user gets the configured maximum.
    Fixed,
    /// Uniform on `1..=max_paths`.
    Random,
}

/// Scenario constants needed to draw a [`ChannelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub k_users: usize,
    pub array: ArrayConfig,
    pub fc_ghz: f64,
    pub altitude_m: f64,
    pub rician_kappa_db: f64,
    pub max_paths: usize,
    pub path_count: PathCount,
    pub sat_doppler_bound_hz: f64,
    pub ut_doppler_bound_hz: f64,
    pub mp_delay_max_s: f64,
    /// Replace the path loss by a unit gain.
    pub normalized_pathloss: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k_users: 10,
            array: ArrayConfig { m_x: 10, m_y: 10 },
            fc_ghz: 30.0,
            altitude_m: 600e3,
            rician_kappa_db: 10.0,
            max_paths: 4,
            path_count: PathCount::Fixed,
            sat_doppler_bound_hz: 788e3,
            ut_doppler_bound_hz: 200.0,
            mp_delay_max_s: 100e-9,
            normalized_pathloss: false,
        }
    }
}

/// Position-derived quantities of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    pub theta_x: f64,
    pub theta_y: f64,
    pub distance_m: f64,
    pub nu_sat_hz: f64,
    pub elevation_rad: f64,
}

impl UserGeometry {
    /// `(sin θy cos θx, cos θy)`.
    pub fn direction_cosines(&self) -> (f64, f64) {
        (self.theta_y.sin() * self.theta_x.cos(), self.theta_y.cos())
    }
}

/// Small-scale fading of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingState {
    /// Linear Rician factor.
    pub rician_kappa: f64,
    /// Rayleigh gain of each multipath component.
    pub gains: Vec<Complex64>,
    pub tau_los_s: f64,
    /// Excess delay of each multipath component over the LoS delay.
    pub tau_mp_s: Vec<f64>,
    pub nu_ut_los_hz: f64,
    pub nu_ut_nlos_hz: Vec<f64>,
    /// Linear power gain (`10^(-PL/10)`).
    pub beta_linear: f64,
}

impl FadingState {
    pub fn path_count(&self) -> usize {
        self.gains.len()
    }
}

/// Everything needed to evaluate every user's channel at any `(t, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub geometry: Vec<UserGeometry>,
    pub fading: Vec<FadingState>,
    pub array: ArrayConfig,
    /// Steering matrix `A`, one array response per row (K x M).
    pub steering: ComplexMatrix,
}

impl ChannelState {
    /// Assembles a state and its steering matrix.
    pub fn new(array: ArrayConfig, geometry: Vec<UserGeometry>, fading: Vec<FadingState>) -> Self {
        assert_eq!(geometry.len(), fading.len(), "one fading state per user");
        let rows: Vec<Vec<Complex64>> = geometry
            .iter()
            .map(|g| array_response(g.theta_x, g.theta_y, &array))
            .collect();
        let steering = if rows.is_empty() {
            ComplexMatrix::zeros(0, array.elements())
        } else {
            ComplexMatrix::from_rows(&rows).expect("rows share the array size")
        };
        Self {
            geometry,
            fading,
            array,
            steering,
        }
    }

    pub fn users(&self) -> usize {
        self.geometry.len()
    }

    /// Copy with every Doppler shift and delay set to zero, leaving a
    /// time- and frequency-flat channel.
    pub fn frozen(&self) -> Self {
        let mut out = self.clone();
        for g in &mut out.geometry {
            g.nu_sat_hz = 0.0;
        }
        for f in &mut out.fading {
            f.tau_los_s = 0.0;
            f.tau_mp_s.iter_mut().for_each(|t| *t = 0.0);
            f.nu_ut_los_hz = 0.0;
            f.nu_ut_nlos_hz.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    /// Copy with the terminal Dopplers (LoS and multipath) zeroed; the
    /// satellite Doppler and the delays are kept.
    pub fn without_terminal_doppler(&self) -> Self {
        let mut out = self.clone();
        for f in &mut out.fading {
            f.nu_ut_los_hz = 0.0;
            f.nu_ut_nlos_hz.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }
}

/// `exp(j 2 pi x)`, reducing `x` to its fractional part first so large cycle
/// counts keep full phase precision.
#[inline]
fn cis_cycles(x: f64) -> Complex64 {
    let frac = x - x.round();
    Complex64::from_polar(1.0, 2.0 * PI * frac)
}

fn uniform_symmetric<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.random_range(-bound..=bound)
    }
}

/// Direction cosines uniform over the visible region (the unit disk).
fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let v: f64 = rng.random_range(-1.0..=1.0);
        if u * u + v * v <= 1.0 {
            return (u, v);
        }
    }
}

fn angles_from_cosines(dir_x: f64, dir_y: f64) -> (f64, f64) {
    let theta_y = dir_y.clamp(-1.0, 1.0).acos();
    let s = theta_y.sin();
    let theta_x = if s > 0.0 {
        (dir_x / s).clamp(-1.0, 1.0).acos()
    } else {
        0.0
    };
    (theta_x, theta_y)
}

fn place_users<R: Rng + ?Sized>(rng: &mut R, k_users: usize) -> Result<Vec<(f64, f64)>, ChannelError> {
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(k_users);
    for user in 0..k_users {
        let mut attempt = 0;
        loop {
            if attempt == MAX_PLACEMENT_ATTEMPTS {
                return Err(ChannelError::PlacementExhausted {
                    user,
                    attempts: attempt,
                });
            }
            attempt += 1;
            let cand = sample_direction(rng);
            let clear = placed
                .iter()
                .all(|p| ((p.0 - cand.0).powi(2) + (p.1 - cand.1).powi(2)).sqrt() >= MIN_USER_SEPARATION);
            if clear {
                placed.push(cand);
                break;
            }
        }
    }
    Ok(placed)
}

/// Draws a random scenario: user placement, slant ranges, Dopplers and
/// fading gains.
pub fn sample_scenario<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Result<ChannelState, ChannelError> {
    let array = ArrayConfig::new(cfg.array.m_x, cfg.array.m_y)?;

    let mut directions = Vec::new();
    let mut last_condition = f64::INFINITY;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let cand = place_users(rng, cfg.k_users)?;
        let rows: Vec<_> = cand
            .iter()
            .map(|&(u, v)| array_response_from_cosines(u, v, &array))
            .collect();
        last_condition = if rows.is_empty() {
            1.0
        } else {
            gram_condition_number(&ComplexMatrix::from_rows(&rows).expect("equal rows"))
        };
        if last_condition < MAX_GRAM_CONDITION {
            directions = cand;
            break;
        }
    }
    if directions.len() != cfg.k_users {
        return Err(ChannelError::IllConditioned {
            condition: last_condition,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        });
    }

    let min_el = MIN_ELEVATION_DEG.to_radians();
    let geometry: Vec<UserGeometry> = directions
        .iter()
        .map(|&(u, v)| {
            let (theta_x, theta_y) = angles_from_cosines(u, v);
            let elevation_rad = rng.random_range(min_el..=PI / 2.0);
            UserGeometry {
                theta_x,
                theta_y,
                distance_m: slant_range_m(elevation_rad, cfg.altitude_m),
                nu_sat_hz: uniform_symmetric(rng, cfg.sat_doppler_bound_hz),
                elevation_rad,
            }
        })
        .collect();

    let kappa = 10f64.powf(cfg.rician_kappa_db / 10.0);
    let mut fading = Vec::with_capacity(cfg.k_users);
    for g in &geometry {
        let paths = match cfg.path_count {
            PathCount::Fixed => cfg.max_paths,
            PathCount::Random => rng.random_range(1..=cfg.max_paths),
        };
        let gains = (0..paths)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        let tau_mp_s = (0..paths)
            .map(|_| {
                if cfg.mp_delay_max_s > 0.0 {
                    // (0, max]
                    cfg.mp_delay_max_s * (1.0 - rng.random::<f64>())
                } else {
                    0.0
                }
            })
            .collect();
        let nu_ut_los_hz = uniform_symmetric(rng, cfg.ut_doppler_bound_hz);
        let nu_ut_nlos_hz = (0..paths)
            .map(|_| uniform_symmetric(rng, cfg.ut_doppler_bound_hz))
            .collect();
        let beta_linear = if cfg.normalized_pathloss {
            1.0
        } else {
            10f64.powf(-path_loss_db(cfg.fc_ghz, g.distance_m)? / 10.0)
        };
        fading.push(FadingState {
            rician_kappa: kappa,
            gains,
            tau_los_s: g.distance_m / SPEED_OF_LIGHT,
            tau_mp_s,
            nu_ut_los_hz,
            nu_ut_nlos_hz,
            beta_linear,
        });
    }

    Ok(ChannelState::new(array, geometry, fading))
}

/// Scalar channel gain of user `k` at time `t` and frequency `f`
/// (the array response is factored out).
pub fn scalar_channel(state: &ChannelState, k: usize, t: f64, f: f64, include_sat_doppler: bool) -> Complex64 {
    let fad = &state.fading[k];
    let kappa = fad.rician_kappa;
    let los = kappa.sqrt() * cis_cycles(t * fad.nu_ut_los_hz - f * fad.tau_los_s);
    let paths = fad.path_count();
    let nlos: Complex64 = if paths == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        let sum: Complex64 = fad
            .gains
            .iter()
            .zip(&fad.tau_mp_s)
            .zip(&fad.nu_ut_nlos_hz)
            .map(|((&g, &tau_mp), &nu)| g * cis_cycles(t * nu - f * (fad.tau_los_s + tau_mp)))
            .sum();
        sum / (paths as f64).sqrt()
    };
    let amp = (fad.beta_linear / (kappa + 1.0)).sqrt();
    let sat = if include_sat_doppler {
        cis_cycles(t * state.geometry[k].nu_sat_hz)
    } else {
        Complex64::new(1.0, 0.0)
    };
    amp * sat * (los + nlos)
}

/// Per-symbol channel matrix `H_c` (K x S) over `symbols` at the timing's
/// subcarrier.
pub fn channel_matrix(
    state: &ChannelState,
    timing: &FrameTiming,
    symbols: Range<usize>,
    include_sat_doppler: bool,
) -> ComplexMatrix {
    let f = timing.subcarrier_frequency();
    let start = symbols.start;
    ComplexMatrix::from_fn(state.users(), symbols.len(), |k, s| {
        scalar_channel(state, k, timing.symbol_time(start + s), f, include_sat_doppler)
    })
}

/// Satellite-Doppler-compensated channel: the estimation target.
pub fn reference_channel(state: &ChannelState, timing: &FrameTiming, symbols: Range<usize>) -> ComplexMatrix {
    channel_matrix(state, timing, symbols, false)
}
