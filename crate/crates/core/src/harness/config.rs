//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, missing keys keep their
//! defaults and unknown keys are rejected. Lists are comma separated.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::airlink::{Constellation, FrameBuilder, FrameLayout, FrameTiming, DEFAULT_N_CP, DEFAULT_N_SC, DEFAULT_SCS_HZ};
use crate::channel::{ArrayConfig, PathCount, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { key: String, line: usize },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { key: String, line: usize, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

/// Time window the P-LS estimate is scored on in the fig2 experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlsWindow {
    /// The pilot symbols it was computed from.
    Pilot,
    /// The first data block it is used to equalize.
    Data,
}

impl fmt::Display for PlsWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlsWindow::Pilot => "pilot",
            PlsWindow::Data => "data",
        })
    }
}

impl FromStr for PlsWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pilot" => Ok(PlsWindow::Pilot),
            "data" => Ok(PlsWindow::Data),
            _ => Err(format!("expected `pilot` or `data`, got `{s}`")),
        }
    }
}

/// Every tunable of a simulation campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub m_x: usize,
    pub m_y: usize,
    pub k_users: usize,
    pub fc_ghz: f64,
    pub altitude_m: f64,
    pub rician_kappa_db: f64,
    pub max_paths: usize,
    pub random_paths: bool,
    pub sat_doppler_bound_hz: f64,
    pub ut_doppler_bound_hz: f64,
    pub mp_delay_max_s: f64,
    pub n_sc: usize,
    pub n_cp: usize,
    pub scs_hz: f64,
    pub subcarrier: usize,
    pub pilots: usize,
    pub data_per_block: usize,
    pub n_blocks: usize,
    pub update_interval: usize,
    pub zc_root: usize,
    pub constellation_order: usize,
    /// SNR points of the fig2 and fig4 experiments.
    pub snr_grid_db: Vec<f64>,
    /// SNR points of the fig3 experiment.
    pub fig3_snr_db: Vec<f64>,
    /// Data blocks whose SER the fig4 experiment reports.
    pub ser_blocks: Vec<usize>,
    pub fig2_pls_window: PlsWindow,
    pub trials: usize,
    pub master_seed: u64,
    pub normalized_pathloss: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        let layout = FrameLayout::default();
        Self {
            m_x: scenario.array.m_x,
            m_y: scenario.array.m_y,
            k_users: scenario.k_users,
            fc_ghz: scenario.fc_ghz,
            altitude_m: scenario.altitude_m,
            rician_kappa_db: scenario.rician_kappa_db,
            max_paths: scenario.max_paths,
            random_paths: scenario.path_count == PathCount::Random,
            sat_doppler_bound_hz: scenario.sat_doppler_bound_hz,
            ut_doppler_bound_hz: scenario.ut_doppler_bound_hz,
            mp_delay_max_s: scenario.mp_delay_max_s,
            n_sc: DEFAULT_N_SC,
            n_cp: DEFAULT_N_CP,
            scs_hz: DEFAULT_SCS_HZ,
            subcarrier: 0,
            pilots: layout.p,
            data_per_block: layout.d,
            n_blocks: layout.n_blocks,
            update_interval: layout.update_interval,
            zc_root: 1,
            constellation_order: 16,
            snr_grid_db: (-2..=6).map(|i| 5.0 * i as f64).collect(),
            fig3_snr_db: vec![10.0, 20.0],
            ser_blocks: vec![5, 10, 15, 20],
            fig2_pls_window: PlsWindow::Data,
            trials: 2000,
            master_seed: 1,
            normalized_pathloss: false,
            output_path: None,
        }
    }
}

fn parse_scalar<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|item| parse_scalar(item.trim())).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl SystemConfig {
    /// Recognised keys in emission order.
    pub const KEYS: [&'static str; 29] = [
        "m_x",
        "m_y",
        "k_users",
        "fc_ghz",
        "altitude_m",
        "rician_kappa_db",
        "max_paths",
        "random_paths",
        "sat_doppler_bound_hz",
        "ut_doppler_bound_hz",
        "mp_delay_max_s",
        "n_sc",
        "n_cp",
        "scs_hz",
        "subcarrier",
        "pilots",
        "data_per_block",
        "n_blocks",
        "update_interval",
        "zc_root",
        "constellation_order",
        "snr_grid_db",
        "fig3_snr_db",
        "ser_blocks",
        "fig2_pls_window",
        "trials",
        "master_seed",
        "normalized_pathloss",
        "output_path",
    ];

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::Duplicate { key: key.into(), line });
            }
            cfg.set(key, value, line)?;
            seen.push(key.into());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue {
            key: key.into(),
            line,
            message,
        };
        match key {
            "m_x" => self.m_x = parse_scalar(value).map_err(bad)?,
            "m_y" => self.m_y = parse_scalar(value).map_err(bad)?,
            "k_users" => self.k_users = parse_scalar(value).map_err(bad)?,
            "fc_ghz" => self.fc_ghz = parse_scalar(value).map_err(bad)?,
            "altitude_m" => self.altitude_m = parse_scalar(value).map_err(bad)?,
            "rician_kappa_db" => self.rician_kappa_db = parse_scalar(value).map_err(bad)?,
            "max_paths" => self.max_paths = parse_scalar(value).map_err(bad)?,
            "random_paths" => self.random_paths = parse_scalar(value).map_err(bad)?,
            "sat_doppler_bound_hz" => self.sat_doppler_bound_hz = parse_scalar(value).map_err(bad)?,
            "ut_doppler_bound_hz" => self.ut_doppler_bound_hz = parse_scalar(value).map_err(bad)?,
            "mp_delay_max_s" => self.mp_delay_max_s = parse_scalar(value).map_err(bad)?,
            "n_sc" => self.n_sc = parse_scalar(value).map_err(bad)?,
            "n_cp" => self.n_cp = parse_scalar(value).map_err(bad)?,
            "scs_hz" => self.scs_hz = parse_scalar(value).map_err(bad)?,
            "subcarrier" => self.subcarrier = parse_scalar(value).map_err(bad)?,
            "pilots" => self.pilots = parse_scalar(value).map_err(bad)?,
            "data_per_block" => self.data_per_block = parse_scalar(value).map_err(bad)?,
            "n_blocks" => self.n_blocks = parse_scalar(value).map_err(bad)?,
            "update_interval" => self.update_interval = parse_scalar(value).map_err(bad)?,
            "zc_root" => self.zc_root = parse_scalar(value).map_err(bad)?,
            "constellation_order" => self.constellation_order = parse_scalar(value).map_err(bad)?,
            "snr_grid_db" => self.snr_grid_db = parse_list(value).map_err(bad)?,
            "fig3_snr_db" => self.fig3_snr_db = parse_list(value).map_err(bad)?,
            "ser_blocks" => self.ser_blocks = parse_list(value).map_err(bad)?,
            "fig2_pls_window" => self.fig2_pls_window = parse_scalar(value).map_err(bad)?,
            "trials" => self.trials = parse_scalar(value).map_err(bad)?,
            "master_seed" => self.master_seed = parse_scalar(value).map_err(bad)?,
            "normalized_pathloss" => self.normalized_pathloss = parse_scalar(value).map_err(bad)?,
            "output_path" => self.output_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("m_x", self.m_x.to_string());
        put("m_y", self.m_y.to_string());
        put("k_users", self.k_users.to_string());
        put("fc_ghz", self.fc_ghz.to_string());
        put("altitude_m", self.altitude_m.to_string());
        put("rician_kappa_db", self.rician_kappa_db.to_string());
        put("max_paths", self.max_paths.to_string());
        put("random_paths", self.random_paths.to_string());
        put("sat_doppler_bound_hz", self.sat_doppler_bound_hz.to_string());
        put("ut_doppler_bound_hz", self.ut_doppler_bound_hz.to_string());
        put("mp_delay_max_s", self.mp_delay_max_s.to_string());
        put("n_sc", self.n_sc.to_string());
        put("n_cp", self.n_cp.to_string());
        put("scs_hz", self.scs_hz.to_string());
        put("subcarrier", self.subcarrier.to_string());
        put("pilots", self.pilots.to_string());
        put("data_per_block", self.data_per_block.to_string());
        put("n_blocks", self.n_blocks.to_string());
        put("update_interval", self.update_interval.to_string());
        put("zc_root", self.zc_root.to_string());
        put("constellation_order", self.constellation_order.to_string());
        put("snr_grid_db", join(&self.snr_grid_db));
        put("fig3_snr_db", join(&self.fig3_snr_db));
        put("ser_blocks", join(&self.ser_blocks));
        put("fig2_pls_window", self.fig2_pls_window.to_string());
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        put("normalized_pathloss", self.normalized_pathloss.to_string());
        put(
            "output_path",
            self.output_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(key: &'static str, message: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid {
                key,
                message: message.into(),
            })
        }
        let counts = [
            ("m_x", self.m_x),
            ("m_y", self.m_y),
            ("k_users", self.k_users),
            ("max_paths", self.max_paths),
            ("n_sc", self.n_sc),
            ("pilots", self.pilots),
            ("data_per_block", self.data_per_block),
            ("n_blocks", self.n_blocks),
            ("update_interval", self.update_interval),
            ("zc_root", self.zc_root),
            ("trials", self.trials),
        ];
        for (key, v) in counts {
            if v == 0 {
                return invalid(key, "must be at least 1");
            }
        }
        let positives = [("fc_ghz", self.fc_ghz), ("altitude_m", self.altitude_m), ("scs_hz", self.scs_hz)];
        for (key, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(key, format!("must be positive and finite, got {v}"));
            }
        }
        let bounds = [
            ("sat_doppler_bound_hz", self.sat_doppler_bound_hz),
            ("ut_doppler_bound_hz", self.ut_doppler_bound_hz),
            ("mp_delay_max_s", self.mp_delay_max_s),
        ];
        for (key, v) in bounds {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(key, format!("must be non-negative and finite, got {v}"));
            }
        }
        if !self.rician_kappa_db.is_finite() {
            return invalid("rician_kappa_db", "must be finite");
        }
        if self.k_users > self.m_x * self.m_y {
            return invalid("k_users", format!("{} users exceed {} antennas", self.k_users, self.m_x * self.m_y));
        }
        if self.pilots < self.k_users {
            return invalid("pilots", format!("need at least k_users = {} pilot symbols", self.k_users));
        }
        if gcd(self.zc_root, self.pilots) != 1 {
            return invalid("zc_root", format!("root {} shares a factor with {} pilots", self.zc_root, self.pilots));
        }
        if self.subcarrier >= self.n_sc {
            return invalid("subcarrier", "must be below n_sc");
        }
        if self.update_interval > self.n_blocks {
            return invalid("update_interval", "must not exceed n_blocks");
        }
        if Constellation::qam(self.constellation_order).is_err() {
            return invalid("constellation_order", "must be a power of four");
        }
        for (key, grid) in [("snr_grid_db", &self.snr_grid_db), ("fig3_snr_db", &self.fig3_snr_db)] {
            if grid.is_empty() {
                return invalid(key, "must list at least one SNR");
            }
            if grid.iter().any(|v| v.is_nan()) {
                return invalid(key, "contains NaN");
            }
        }
        if self.ser_blocks.is_empty() {
            return invalid("ser_blocks", "must list at least one block");
        }
        if let Some(&b) = self.ser_blocks.iter().find(|&&b| b == 0 || b > self.n_blocks) {
            return invalid("ser_blocks", format!("block {b} outside 1..={}", self.n_blocks));
        }
        Ok(())
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            k_users: self.k_users,
            array: ArrayConfig {
                m_x: self.m_x,
                m_y: self.m_y,
            },
            fc_ghz: self.fc_ghz,
            altitude_m: self.altitude_m,
            rician_kappa_db: self.rician_kappa_db,
            max_paths: self.max_paths,
            path_count: if self.random_paths { PathCount::Random } else { PathCount::Fixed },
            sat_doppler_bound_hz: self.sat_doppler_bound_hz,
            ut_doppler_bound_hz: self.ut_doppler_bound_hz,
            mp_delay_max_s: self.mp_delay_max_s,
            normalized_pathloss: self.normalized_pathloss,
        }
    }

    pub fn timing(&self) -> FrameTiming {
        FrameTiming::from_spacing(self.n_sc, self.n_cp, self.scs_hz, self.subcarrier).expect("validated timing")
    }

    pub fn layout(&self) -> FrameLayout {
        FrameLayout {
            p: self.pilots,
            d: self.data_per_block,
            n_blocks: self.n_blocks,
            update_interval: self.update_interval,
        }
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::qam(self.constellation_order).expect("validated order")
    }

    pub fn frame_builder(&self) -> FrameBuilder {
        FrameBuilder {
            timing: self.timing(),
            layout: self.layout(),
            constellation: self.constellation(),
            zc_root: self.zc_root,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = SystemConfig::parse("").unwrap();
        assert_eq!(cfg, SystemConfig::default());
        assert_eq!((cfg.m_x, cfg.m_y, cfg.k_users), (10, 10, 10));
        assert_eq!(cfg.fc_ghz, 30.0);
        assert_eq!(cfg.altitude_m, 600e3);
        assert_eq!(cfg.rician_kappa_db, 10.0);
        assert_eq!(cfg.max_paths, 4);
        assert_eq!(cfg.sat_doppler_bound_hz, 788e3);
        assert_eq!(cfg.ut_doppler_bound_hz, 200.0);
        assert_eq!(cfg.constellation_order, 16);
        assert_eq!((cfg.pilots, cfg.data_per_block, cfg.n_blocks, cfg.update_interval), (15, 15, 50, 5));
        assert_eq!(cfg.trials, 2000);
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = SystemConfig::parse("# header\n\n  k_users = 4   # fewer users\nsnr_grid_db = 0, 2.5,-3\n").unwrap();
        assert_eq!(cfg.k_users, 4);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 2.5, -3.0]);
    }

    #[test]
    fn zero_users_names_key() {
        let err = SystemConfig::parse("k_users = 0").unwrap_err();
        assert!(err.to_string().contains("k_users"), "{err}");
    }

    #[test]
    fn errors_carry_key_and_line() {
        match SystemConfig::parse("m_x = 10\nbogus = 1\n").unwrap_err() {
            ConfigError::UnknownKey { key, line } => assert_eq!((key.as_str(), line), ("bogus", 2)),
            e => panic!("{e}"),
        }
        match SystemConfig::parse("\n\nfc_ghz = fast").unwrap_err() {
            ConfigError::BadValue { key, line, .. } => assert_eq!((key.as_str(), line), ("fc_ghz", 3)),
            e => panic!("{e}"),
        }
        assert!(matches!(SystemConfig::parse("trials 5"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(SystemConfig::parse("trials = 5\ntrials = 6"), Err(ConfigError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn range_checks() {
        for (text, key) in [
            ("pilots = 8", "pilots"),
            ("zc_root = 3", "zc_root"),
            ("k_users = 120", "k_users"),
            ("update_interval = 60", "update_interval"),
            ("ser_blocks = 5, 51", "ser_blocks"),
            ("snr_grid_db =", "snr_grid_db"),
            ("constellation_order = 8", "constellation_order"),
            ("ut_doppler_bound_hz = -1", "ut_doppler_bound_hz"),
        ] {
            match SystemConfig::parse(text).unwrap_err() {
                ConfigError::Invalid { key: k, .. } => assert_eq!(k, key, "{text}"),
                e => panic!("{text}: {e}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let cfg = SystemConfig::default();
        assert_eq!(SystemConfig::parse(&cfg.to_text()).unwrap(), cfg);

        let custom = SystemConfig {
            k_users: 3,
            fc_ghz: 0.1 + 0.2,
            snr_grid_db: vec![-7.25, 1.0 / 3.0],
            fig2_pls_window: PlsWindow::Pilot,
            random_paths: true,
            master_seed: u64::MAX,
            output_path: Some(PathBuf::from("out/fig.csv")),
            ..cfg
        };
        assert_eq!(SystemConfig::parse(&custom.to_text()).unwrap(), custom);
    }

    #[test]
    fn every_emitted_key_is_listed() {
        let text = SystemConfig::default().to_text();
        let emitted: Vec<_> = text.lines().map(|l| l.split('=').next().unwrap().trim()).collect();
        assert_eq!(emitted, SystemConfig::KEYS);
    }

    #[test]
    fn derived_components() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.scenario(), ScenarioConfig::default());
        assert_eq!(cfg.layout(), FrameLayout::default());
        assert_eq!(cfg.timing(), FrameTiming::default());
    }
}
