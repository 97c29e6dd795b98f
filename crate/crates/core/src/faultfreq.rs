//! Fault-frequency estimation from an envelope spectrum.
//!
//! For each harmonic order `k` the largest bin inside
//! `k·f_theoretical·(1 ± search_frac)` is taken as the `k`-th peak. The
//! estimate is the mean of `peak_k / k`. The SNR compares the mean squared
//! peak amplitude against the mean squared amplitude of the remaining bins up
//! to the third harmonic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envspec::{envelope_spectrum, EnvelopeSpectrum, SpectrumConfig};
use crate::error::{Error, Result};
use crate::sigmodel::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPeak {
    pub order: usize,
    pub freq: f64,
    pub amp: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultFrequencyEstimate {
    pub f_hat: f64,
    pub peaks: Vec<HarmonicPeak>,
    pub snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Expected fault frequency (Hz) around which peaks are searched.
    pub f_theoretical: f64,
    pub n_harmonics: usize,
    /// Relative half-width of each harmonic's search window.
    pub search_frac: f64,
    /// Bins excluded on each side of a peak when averaging the noise floor.
    pub peak_excl_bins: usize,
    /// Refine peak locations by fitting a parabola through the top three bins.
    pub interpolate: bool,
}

impl EstimatorConfig {
    pub fn new(f_theoretical: f64) -> Self {
        EstimatorConfig {
            f_theoretical,
            n_harmonics: 3,
            search_frac: 0.15,
            peak_excl_bins: 2,
            interpolate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_theoretical > 0.0 && self.f_theoretical.is_finite()) {
            return Err(Error::param(format!(
                "theoretical frequency must be positive, got {}",
                self.f_theoretical
            )));
        }
        if self.n_harmonics < 1 {
            return Err(Error::param("need at least one harmonic"));
        }
        if !(self.search_frac > 0.0 && self.search_frac < 0.5) {
            return Err(Error::param(format!(
                "search_frac must be in (0, 0.5), got {}",
                self.search_frac
            )));
        }
        Ok(())
    }
}

/// Largest bin within `k·f_theoretical·(1 ± search_frac)`; ties go to the bin
/// nearest `k·f_theoretical`.
pub fn detect_harmonic_peak(
    spec: &EnvelopeSpectrum,
    f_theoretical: f64,
    k: usize,
    search_frac: f64,
) -> Result<HarmonicPeak> {
    let fail = |reason: String| Error::PeakSearch { order: k, reason };
    if k == 0 {
        return Err(fail("harmonic order must be at least 1".into()));
    }
    let centre = k as f64 * f_theoretical;
    let lo_f = centre * (1.0 - search_frac);
    let hi_f = centre * (1.0 + search_frac);
    if spec.is_empty() || hi_f > spec.max_freq() {
        return Err(fail(format!(
            "window [{lo_f:.4}, {hi_f:.4}] Hz exceeds spectrum range {:.4} Hz",
            spec.max_freq()
        )));
    }
    let lo = (lo_f / spec.df).ceil() as usize;
    let hi = (hi_f / spec.df).floor() as usize;
    if hi < lo || hi - lo + 1 < 3 {
        return Err(fail(format!(
            "window [{lo_f:.4}, {hi_f:.4}] Hz spans fewer than 3 bins of {} Hz",
            spec.df
        )));
    }
    let centre_bin = centre / spec.df;
    let mut best = lo;
    for b in lo + 1..=hi {
        let (a, cur) = (spec.amps[b], spec.amps[best]);
        if a > cur || (a == cur && (b as f64 - centre_bin).abs() < (best as f64 - centre_bin).abs()) {
            best = b;
        }
    }
    Ok(HarmonicPeak {
        order: k,
        freq: spec.freqs[best],
        amp: spec.amps[best],
        bin: best,
    })
}

/// Parabolic refinement of a peak location, clamped to half a bin.
fn refine(spec: &EnvelopeSpectrum, peak: &HarmonicPeak) -> f64 {
    let b = peak.bin;
    if b == 0 || b + 1 >= spec.len() {
        return peak.freq;
    }
    let (l, c, r) = (spec.amps[b - 1], spec.amps[b], spec.amps[b + 1]);
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return peak.freq;
    }
    let delta = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    peak.freq + delta * spec.df
}

/// Mean squared peak amplitude over mean squared non-peak amplitude in
/// `[0.5·f_hat, 3.5·f_hat]`.
pub fn snr(spec: &EnvelopeSpectrum, peaks: &[HarmonicPeak], f_hat: f64, peak_excl_bins: usize) -> Result<f64> {
    if peaks.is_empty() {
        return Err(Error::param("SNR needs at least one peak"));
    }
    let signal = peaks.iter().map(|p| p.amp * p.amp).sum::<f64>() / peaks.len() as f64;
    let lo = ((0.5 * f_hat) / spec.df).ceil() as usize;
    let hi = (((3.5 * f_hat) / spec.df).floor() as usize).min(spec.len().saturating_sub(1));
    let mut sum = 0.0;
    let mut count = 0usize;
    for b in lo..=hi {
        if peaks.iter().any(|p| b.abs_diff(p.bin) <= peak_excl_bins) {
            continue;
        }
        sum += spec.amps[b] * spec.amps[b];
        count += 1;
    }
    if count == 0 {
        return Err(Error::Degenerate("no noise bins left after peak exclusion".into()));
    }
    let noise = sum / count as f64;
    if noise == 0.0 {
        return Ok(if signal == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(signal / noise)
}

pub fn estimate_fault_frequency(spec: &EnvelopeSpectrum, cfg: &EstimatorConfig) -> Result<FaultFrequencyEstimate> {
    cfg.validate()?;
    let peaks = (1..=cfg.n_harmonics)
        .map(|k| detect_harmonic_peak(spec, cfg.f_theoretical, k, cfg.search_frac))
        .collect::<Result<Vec<_>>>()?;
    let f_hat = peaks
        .iter()
        .map(|p| {
            let f = if cfg.interpolate { refine(spec, p) } else { p.freq };
            f / p.order as f64
        })
        .sum::<f64>()
        / peaks.len() as f64;
    if !(f_hat > 0.0) {
        return Err(Error::PeakSearch {
            order: 1,
            reason: format!("estimate {f_hat} Hz is not positive"),
        });
    }
    let snr = snr(spec, &peaks, f_hat, cfg.peak_excl_bins)?;
    Ok(FaultFrequencyEstimate { f_hat, peaks, snr })
}

/// Envelope spectrum then estimate, for one record.
pub fn estimate_signal(x: &Signal, spec_cfg: &SpectrumConfig, est_cfg: &EstimatorConfig) -> Result<FaultFrequencyEstimate> {
    let spec = envelope_spectrum(x, spec_cfg)?;
    estimate_fault_frequency(&spec, est_cfg)
}

/// Estimate of one segment of a longer record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEstimate {
    pub index: usize,
    pub t_start: f64,
    pub estimate: FaultFrequencyEstimate,
}

/// Number of samples in a segment of `seg_len` seconds.
pub fn segment_samples(fs: f64, seg_len: f64) -> Result<usize> {
    if !(seg_len > 0.0 && seg_len.is_finite()) {
        return Err(Error::param(format!("segment length must be positive, got {seg_len}")));
    }
    let n = (seg_len * fs).round() as usize;
    if n < 2 {
        return Err(Error::param(format!("segment of {seg_len} s has fewer than two samples")));
    }
    Ok(n)
}

/// Per-segment estimation that keeps individual failures.
pub fn try_estimate_segments(
    x: &Signal,
    seg_len: f64,
    spec_cfg: &SpectrumConfig,
    est_cfg: &EstimatorConfig,
) -> Result<Vec<(usize, f64, Result<FaultFrequencyEstimate>)>> {
    let seg_n = segment_samples(x.fs(), seg_len)?;
    let count = x.len() / seg_n;
    if count == 0 {
        return Err(Error::TooShort(format!(
            "signal of {:.3} s is shorter than one {seg_len} s segment",
            x.duration()
        )));
    }
    let fs = x.fs();
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let start = i * seg_n;
            let est = Signal::new(x.samples()[start..start + seg_n].to_vec(), fs)
                .and_then(|seg| estimate_signal(&seg, spec_cfg, est_cfg));
            (i, start as f64 / fs, est)
        })
        .collect())
}

/// Consecutive non-overlapping segments, remainder discarded, one estimate
/// per segment in time order. Any failing segment fails the whole call.
pub fn estimate_per_segment(
    x: &Signal,
    seg_len: f64,
    spec_cfg: &SpectrumConfig,
    est_cfg: &EstimatorConfig,
) -> Result<Vec<SegmentEstimate>> {
    try_estimate_segments(x, seg_len, spec_cfg, est_cfg)?
        .into_iter()
        .map(|(index, t_start, est)| {
            est.map(|estimate| SegmentEstimate {
                index,
                t_start,
                estimate,
            })
        })
        .collect()
}

/// CSV with header `segment_index,t_start_s,f_hat_hz,snr,peak1_hz,peak2_hz,peak3_hz`.
pub fn estimates_to_csv(estimates: &[SegmentEstimate]) -> String {
    let mut out = String::from("segment_index,t_start_s,f_hat_hz,snr,peak1_hz,peak2_hz,peak3_hz\n");
    for e in estimates {
        let peak = |k: usize| {
            e.estimate
                .peaks
                .iter()
                .find(|p| p.order == k)
                .map(|p| p.freq.to_string())
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.index,
            e.t_start,
            e.estimate.f_hat,
            e.estimate.snr,
            peak(1),
            peak(2),
            peak(3)
        ));
    }
    out
}
