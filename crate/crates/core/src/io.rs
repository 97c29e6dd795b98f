//! Signal files: one float per line CSV, or raw little-endian f64 with a JSON
//! sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigmodel::{FrequencyDistribution, PulseParams, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalFormat {
    Csv,
    RawF64le,
}

impl SignalFormat {
    /// Guess from the extension: `.csv` is CSV, anything else raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SignalFormat::Csv,
            _ => SignalFormat::RawF64le,
        }
    }
}

impl FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SignalFormat::Csv),
            "raw" | "raw-f64le" | "f64le" => Ok(SignalFormat::RawF64le),
            other => Err(Error::Parse(format!("unknown signal format '{other}' (csv or raw-f64le)"))),
        }
    }
}

/// Ground truth for one simulated segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub index: usize,
    pub t_start_s: f64,
    pub f_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub fs: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<FrequencyDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seg_len_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentTruth>,
}

impl Sidecar {
    pub fn bare(fs: f64, n: usize) -> Self {
        Sidecar {
            fs,
            n,
            seed: None,
            dist: None,
            pulse: None,
            seg_len_s: None,
            segments: Vec::new(),
        }
    }
}

/// `signal.bin` -> `signal.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

pub fn parse_csv_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::Parse(format!("line {}: non-finite sample '{field}'", i + 1))),
            // A non-numeric first line is taken as a header.
            Err(_) if i == 0 && field.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !is_number_word(field) => {}
            Err(_) => return Err(Error::Parse(format!("line {}: cannot parse '{field}' as a number", i + 1))),
        }
    }
    Ok(out)
}

fn is_number_word(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "nan" | "inf" | "infinity")
}

pub fn samples_to_csv(samples: &[f64]) -> String {
    let mut out = String::with_capacity(samples.len() * 24);
    for v in samples {
        // `{:?}` prints the shortest representation that round-trips.
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

pub fn decode_f64le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "raw file length {} is not a multiple of 8 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn encode_f64le(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// A signal read from disk, with its sidecar when one was found.
#[derive(Debug, Clone)]
pub struct LoadedSignal {
    pub signal: Signal,
    pub sidecar: Option<Sidecar>,
    pub warnings: Vec<String>,
}

/// Read samples from `path`. The sample rate comes from the sidecar
/// (`<path>.json`) when present; `fs_override` takes precedence with a
/// warning if the two disagree.
pub fn read_signal(path: &Path, format: SignalFormat, fs_override: Option<f64>) -> Result<LoadedSignal> {
    let samples = match format {
        SignalFormat::Csv => parse_csv_samples(&fs::read_to_string(path)?)?,
        SignalFormat::RawF64le => decode_f64le(&fs::read(path)?)?,
    };
    let side_path = sidecar_path(path);
    let sidecar = if side_path.exists() {
        Some(read_sidecar(&side_path)?)
    } else {
        None
    };
    let mut warnings = Vec::new();
    let fs = match (fs_override, &sidecar) {
        (Some(f), Some(s)) => {
            if f != s.fs {
                warnings.push(format!("--fs {f} overrides sidecar sample rate {}", s.fs));
            }
            f
        }
        (Some(f), None) => f,
        (None, Some(s)) => s.fs,
        (None, None) => {
            return Err(Error::param(format!(
                "no sample rate for {}: pass --fs or provide {}",
                path.display(),
                side_path.display()
            )))
        }
    };
    if let Some(s) = &sidecar {
        if s.n != samples.len() {
            warnings.push(format!("sidecar lists {} samples, file holds {}", s.n, samples.len()));
        }
    }
    Ok(LoadedSignal {
        signal: Signal::new(samples, fs)?,
        sidecar,
        warnings,
    })
}

/// Write samples to `path` and the sidecar to `<path>.json`.
pub fn write_signal(path: &Path, format: SignalFormat, signal: &Signal, sidecar: &Sidecar) -> Result<()> {
    match format {
        SignalFormat::Csv => fs::write(path, samples_to_csv(signal.samples()))?,
        SignalFormat::RawF64le => fs::write(path, encode_f64le(signal.samples()))?,
    }
    write_sidecar(&sidecar_path(path), sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let x = vec![0.1, -3.5e-300, f64::MAX, 1.0 / 3.0, -0.0];
        let back = decode_f64le(&encode_f64le(&x)).unwrap();
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(decode_f64le(&[0u8; 7]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let x = vec![0.1, -2.75, 1.0 / 3.0, 6.02e23, -1e-12];
        let back = parse_csv_samples(&samples_to_csv(&x)).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn csv_bad_line_named() {
        let err = parse_csv_samples("1.0\n2.0\nabc\n4.0\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_csv_samples("1.0\nnan\n").unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn csv_header_skipped() {
        assert_eq!(parse_csv_samples("amplitude\n1\n2\n\n").unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn format_guess() {
        assert_eq!(SignalFormat::from_path(Path::new("a/b.CSV")), SignalFormat::Csv);
        assert_eq!(SignalFormat::from_path(Path::new("a/b.bin")), SignalFormat::RawF64le);
        assert_eq!("raw-f64le".parse::<SignalFormat>().unwrap(), SignalFormat::RawF64le);
    }
}
