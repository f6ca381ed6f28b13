//! CSV artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{reference_channel, sample_scenario, ChannelError, ChannelState};
use crate::estimators::Method;
use crate::metrics::MetricRecord;
use crate::rng::SimRng;

use super::config::SystemConfig;

pub const CSV_HEADER: [&str; 7] = ["method", "snr_db", "block", "nmse", "ser", "trials", "seed"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
}

/// Orders records by method label, SNR, then block (absent first).
pub fn sort_records(records: &mut [MetricRecord]) {
    records.sort_by(|a, b| {
        a.method
            .label()
            .cmp(b.method.label())
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.block.cmp(&b.block))
    });
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes `records` in canonical order under the standard header.
pub fn write_records<W: Write>(records: &[MetricRecord], out: W) -> Result<(), csv::Error> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &sorted {
        w.write_record([
            r.method.label().to_string(),
            r.snr_db.to_string(),
            r.block.map(|b| b.to_string()).unwrap_or_default(),
            sci(r.nmse),
            sci(r.ser),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[MetricRecord], path: &Path) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let file = std::fs::File::create(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_records(records, std::io::BufWriter::new(file)).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a file produced by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let parse_err = |message: String| OutputError::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        if row.len() != CSV_HEADER.len() {
            return Err(parse_err(format!("expected {} fields, got {}", CSV_HEADER.len(), row.len())));
        }
        let opt_f64 = |s: &str| -> Result<Option<f64>, OutputError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| parse_err(format!("{s:?}: {e}")))
            }
        };
        out.push(MetricRecord {
            method: row[0].parse::<Method>().map_err(parse_err)?,
            snr_db: row[1].parse().map_err(|e| parse_err(format!("snr_db: {e}")))?,
            block: if row[2].is_empty() {
                None
            } else {
                Some(row[2].parse().map_err(|e| parse_err(format!("block: {e}")))?)
            },
            nmse: opt_f64(&row[3])?,
            ser: opt_f64(&row[4])?,
            trials: row[5].parse().map_err(|e| parse_err(format!("trials: {e}")))?,
            seed: row[6].parse().map_err(|e| parse_err(format!("seed: {e}")))?,
        });
    }
    Ok(out)
}

fn complex_field(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{sign}{:e}j", z.re, z.im.abs())
}

/// Draws the scenario of `seed` under `cfg`.
pub fn dump_scenario(cfg: &SystemConfig, seed: u64) -> Result<ChannelState, ChannelError> {
    use rand::SeedableRng;
    sample_scenario(&mut SimRng::seed_from_u64(seed), &cfg.scenario())
}

/// Long-format dump of one scenario: steering entries (`steering,k,m`) and the
/// effective channel of every frame symbol (`channel,k,s`), values as `re+imj`.
pub fn write_channel_dump<W: Write>(cfg: &SystemConfig, state: &ChannelState, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["matrix", "row", "col", "value"])?;
    let steering = &state.steering;
    for k in 0..steering.rows() {
        for m in 0..steering.cols() {
            w.write_record(["steering".into(), k.to_string(), m.to_string(), complex_field(steering.get(k, m))])?;
        }
    }
    let h = reference_channel(state, &cfg.timing(), 0..cfg.layout().total_symbols());
    for k in 0..h.rows() {
        for s in 0..h.cols() {
            w.write_record(["channel".into(), k.to_string(), s.to_string(), complex_field(h.get(k, s))])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, snr_db: f64, block: Option<usize>) -> MetricRecord {
        MetricRecord {
            method,
            snr_db,
            block,
            nmse: Some(0.1 + 0.2),
            ser: None,
            trials: 3,
            seed: 9,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,snr_db,block,nmse,ser,trials,seed\n");
    }

    #[test]
    fn one_record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/one.csv");
        let rec = MetricRecord {
            ser: Some(1.0 / 3.0),
            block: None,
            ..record(Method::Genie, -7.5, None)
        };
        write_csv(std::slice::from_ref(&rec), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "GA,-7.5,,3.0000000000000004e-1,3.333333333333333e-1,3,9"
        );
        assert_eq!(read_csv(&path).unwrap(), vec![rec]);
    }

    #[test]
    fn rows_sorted() {
        let recs = vec![
            record(Method::Pls, 10.0, Some(1)),
            record(Method::DdSb, 10.0, Some(1)),
            record(Method::Pls, -5.0, Some(1)),
            record(Method::MddSb, 0.0, Some(10)),
            record(Method::MddSb, 0.0, Some(5)),
        ];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let keys: Vec<String> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
            .collect();
        assert_eq!(keys, ["DD-SB,10,1", "MDD-SB,0,5", "MDD-SB,0,10", "P-LS,-5,1", "P-LS,10,1"]);
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(complex_field(Complex64::new(1.5, -0.25)), "1.5e0-2.5e-1j");
        assert_eq!(complex_field(Complex64::new(-2.0, 0.0)), "-2e0+0e0j");
    }

    #[test]
    fn channel_dump_shape() {
        let cfg = SystemConfig {
            k_users: 2,
            m_x: 2,
            m_y: 3,
            pilots: 3,
            n_blocks: 2,
            data_per_block: 4,
            update_interval: 1,
            ser_blocks: vec![1],
            ..SystemConfig::default()
        };
        let state = dump_scenario(&cfg, 5).unwrap();
        let mut buf = Vec::new();
        write_channel_dump(&cfg, &state, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("steering")).count(), 12);
        assert_eq!(text.lines().filter(|l| l.starts_with("channel")).count(), 2 * 11);
    }
}
