//! Monte-Carlo threshold calibration.
//!
//! For every `(ACI, segment length)` pair a batch of constant-frequency
//! records is simulated and passed through the same envelope-spectrum
//! estimator used on real data. The unbiased sample variance of the batch's
//! estimates is the threshold; the batch means of the estimate and of the SNR
//! are stored alongside it for ACI matching and variance rescaling.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envspec::{SpectrumConfig, Window};
use crate::error::{Error, Result};
use crate::faultfreq::{estimate_signal, EstimatorConfig};
use crate::sigmodel::{
    derive_seed, simulate_signal, FrequencyDistribution, PulseParams, SignalModel, ACI_GRID,
    DEFAULT_FS, F_SIMUL, SEGMENT_LENGTHS,
};
use crate::stats::{mean, sample_variance};

/// Default number of simulated records per table cell.
pub const DEFAULT_BATCH: usize = 1000;

/// Largest tolerated fraction of failed estimates in a calibration batch.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// Settings shared by every cell of a threshold table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub fs: f64,
    pub f_simul: f64,
    /// Pulse shape; `aci` is overridden per cell.
    pub pulse: PulseParams,
    pub spectrum: SpectrumConfig,
    pub estimator: EstimatorConfig,
    pub n_signals: usize,
    pub master_seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let pulse = PulseParams::default();
        let fs = DEFAULT_FS;
        CalibrationConfig {
            fs,
            f_simul: F_SIMUL,
            pulse,
            spectrum: default_simulation_spectrum(&pulse, fs),
            estimator: EstimatorConfig::new(F_SIMUL),
            n_signals: DEFAULT_BATCH,
            master_seed: 0,
        }
    }
}

/// Spectrum settings for simulated records: band-pass around the pulse
/// resonance, clipped to Nyquist.
pub fn default_simulation_spectrum(pulse: &PulseParams, fs: f64) -> SpectrumConfig {
    let (lo, hi) = pulse.default_band();
    SpectrumConfig::default().with_band(lo, hi.min(fs / 2.0))
}

impl CalibrationConfig {
    pub fn with_fs(mut self, fs: f64) -> Self {
        self.fs = fs;
        self.spectrum.bandpass = Some({
            let (lo, hi) = self.pulse.default_band();
            (lo, hi.min(fs / 2.0))
        });
        self
    }

    pub fn digest(&self) -> String {
        config_digest(&self.spectrum, &self.estimator)
    }

    fn model(&self, aci: f64, seg_len: f64) -> SignalModel {
        SignalModel::new(
            seg_len,
            self.fs,
            FrequencyDistribution::Constant { f: self.f_simul },
            PulseParams { aci, ..self.pulse },
        )
    }
}

#[derive(Serialize)]
struct DigestFields {
    window: Window,
    zero_pad_factor: usize,
    welch_segments: usize,
    welch_overlap: f64,
    n_harmonics: usize,
    search_frac: f64,
    peak_excl_bins: usize,
    interpolate: bool,
}

/// Digest of the analysis settings a threshold depends on.
///
/// The band-pass band and the theoretical fault frequency are excluded: they
/// legitimately differ between the simulated calibration records and a real
/// machine. Everything that shapes the estimator's variance is included.
pub fn config_digest(spectrum: &SpectrumConfig, estimator: &EstimatorConfig) -> String {
    let fields = DigestFields {
        window: spectrum.window,
        zero_pad_factor: spectrum.zero_pad_factor,
        welch_segments: spectrum.welch_segments,
        welch_overlap: spectrum.welch_overlap,
        n_harmonics: estimator.n_harmonics,
        search_frac: estimator.search_frac,
        peak_excl_bins: estimator.peak_excl_bins,
        interpolate: estimator.interpolate,
    };
    let json = serde_json::to_vec(&fields).expect("plain struct serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub aci: f64,
    pub seg_len_s: f64,
    /// Sample variance of the batch's estimates, Hz².
    pub threshold: f64,
    pub mean_f_hat: f64,
    pub mean_snr: f64,
    pub n_signals: usize,
    #[serde(default)]
    pub n_failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub fs: f64,
    pub f_simul: f64,
    pub n: usize,
    pub seed: u64,
    pub config_digest: String,
    pub pulse: PulseParams,
    pub spectrum: SpectrumConfig,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub meta: TableMeta,
    pub entries: Vec<ThresholdEntry>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl ThresholdTable {
    pub fn validate(&self) -> Result<()> {
        let digest = config_digest(&self.meta.spectrum, &self.meta.estimator);
        if digest != self.meta.config_digest {
            return Err(Error::DigestMismatch {
                table: self.meta.config_digest.clone(),
                current: digest,
            });
        }
        for (i, a) in self.entries.iter().enumerate() {
            if !(a.threshold >= 0.0) || a.n_signals < 2 {
                return Err(Error::param(format!(
                    "entry ACI={} seg={} has invalid threshold or batch size",
                    a.aci, a.seg_len_s
                )));
            }
            if self.entries[i + 1..]
                .iter()
                .any(|b| same(a.aci, b.aci) && same(a.seg_len_s, b.seg_len_s))
            {
                return Err(Error::param(format!(
                    "duplicate entry for ACI={} seg={}",
                    a.aci, a.seg_len_s
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, aci: f64, seg_len: f64) -> Option<&ThresholdEntry> {
        self.entries
            .iter()
            .find(|e| same(e.aci, aci) && same(e.seg_len_s, seg_len))
    }

    /// Entries at `seg_len`, ordered by ACI.
    pub fn entries_for(&self, seg_len: f64) -> Vec<&ThresholdEntry> {
        let mut v: Vec<&ThresholdEntry> = self
            .entries
            .iter()
            .filter(|e| same(e.seg_len_s, seg_len))
            .collect();
        v.sort_by(|a, b| a.aci.total_cmp(&b.aci));
        v
    }

    pub fn aci_values(&self) -> Vec<f64> {
        sorted_unique(self.entries.iter().map(|e| e.aci))
    }

    pub fn seg_lengths(&self) -> Vec<f64> {
        sorted_unique(self.entries.iter().map(|e| e.seg_len_s))
    }

    /// Fails unless the table was built under the same analysis settings.
    pub fn check_compatible(&self, spectrum: &SpectrumConfig, estimator: &EstimatorConfig) -> Result<()> {
        let current = config_digest(spectrum, estimator);
        if current != self.meta.config_digest {
            return Err(Error::DigestMismatch {
                table: self.meta.config_digest.clone(),
                current,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ThresholdTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    /// Matrix layout: one row per ACI, one column per segment length.
    pub fn to_csv(&self) -> String {
        let segs = self.seg_lengths();
        let mut out = String::from("aci");
        for s in &segs {
            out.push_str(&format!(",{s}s"));
        }
        out.push('\n');
        for aci in self.aci_values() {
            out.push_str(&aci.to_string());
            for &s in &segs {
                match self.get(aci, s) {
                    Some(e) => out.push_str(&format!(",{}", e.threshold)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let set: BTreeSet<u64> = values.map(f64::to_bits).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same(*a, *b));
    v
}

/// Simulate `cfg.n_signals` constant-frequency records of `seg_len` seconds
/// at `aci` and summarise their estimates.
pub fn calibrate_entry(aci: f64, seg_len: f64, cfg: &CalibrationConfig, seed: u64) -> Result<ThresholdEntry> {
    if cfg.n_signals < 2 {
        return Err(Error::param("calibration needs at least two signals per cell"));
    }
    let model = cfg.model(aci, seg_len);
    model.validate()?;
    let results: Vec<Result<(f64, f64)>> = (0..cfg.n_signals as u64)
        .into_par_iter()
        .map(|i| {
            let sim = simulate_signal(&model, derive_seed(seed, i))?;
            let est = estimate_signal(&sim.signal, &cfg.spectrum, &cfg.estimator)?;
            Ok((est.f_hat, est.snr))
        })
        .collect();

    let mut f_hat = Vec::with_capacity(results.len());
    let mut snr = Vec::with_capacity(results.len());
    let mut failed = 0usize;
    let mut first_err = None;
    for r in results {
        match r {
            Ok((f, s)) => {
                f_hat.push(f);
                snr.push(s);
            }
            Err(e) => {
                failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    let limit = (cfg.n_signals as f64 * MAX_FAILURE_FRACTION).floor() as usize;
    if failed > limit {
        if failed == cfg.n_signals {
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        return Err(Error::TooManyFailures {
            failed,
            total: cfg.n_signals,
            limit,
        });
    }
    Ok(ThresholdEntry {
        aci,
        seg_len_s: seg_len,
        threshold: sample_variance(&f_hat)?,
        mean_f_hat: mean(&f_hat),
        mean_snr: mean(&snr),
        n_signals: f_hat.len(),
        n_failed: failed,
        seed,
    })
}

/// Seed of the table cell at `(aci_index, seg_index)`.
pub fn entry_seed(master_seed: u64, aci_index: usize, seg_index: usize) -> u64 {
    derive_seed(derive_seed(master_seed, aci_index as u64), seg_index as u64)
}

/// Full Cartesian product of `aci_list × seg_lens`.
pub fn build_table(aci_list: &[f64], seg_lens: &[f64], cfg: &CalibrationConfig) -> Result<ThresholdTable> {
    build_table_with_progress(aci_list, seg_lens, cfg, |_| {})
}

pub fn build_table_with_progress(
    aci_list: &[f64],
    seg_lens: &[f64],
    cfg: &CalibrationConfig,
    mut progress: impl FnMut(&ThresholdEntry),
) -> Result<ThresholdTable> {
    if aci_list.is_empty() || seg_lens.is_empty() {
        return Err(Error::param("calibration grid must be non-empty"));
    }
    cfg.spectrum.validate()?;
    cfg.estimator.validate()?;
    let mut entries = Vec::with_capacity(aci_list.len() * seg_lens.len());
    for (ai, &aci) in aci_list.iter().enumerate() {
        for (si, &seg) in seg_lens.iter().enumerate() {
            let entry = calibrate_entry(aci, seg, cfg, entry_seed(cfg.master_seed, ai, si))?;
            progress(&entry);
            entries.push(entry);
        }
    }
    let table = ThresholdTable {
        meta: TableMeta {
            fs: cfg.fs,
            f_simul: cfg.f_simul,
            n: cfg.n_signals,
            seed: cfg.master_seed,
            config_digest: cfg.digest(),
            pulse: cfg.pulse,
            spectrum: cfg.spectrum,
            estimator: cfg.estimator,
        },
        entries,
    };
    table.validate()?;
    Ok(table)
}

/// The default grid: ACI {1, 1.5, 2, 2.5, 3} × {0.5, 1, 2, 5, 10} s.
pub fn build_default_table(cfg: &CalibrationConfig) -> Result<ThresholdTable> {
    build_table(&ACI_GRID, &SEGMENT_LENGTHS, cfg)
}
