//! Constant-versus-varying fault-frequency decision.
//!
//! The chain for one segment length:
//!
//! 1. split the record into segments and estimate the fault frequency and
//!    SNR of each;
//! 2. pick the calibrated ACI whose mean simulated SNR is closest to the
//!    record's average SNR;
//! 3. rescale the sample variance of the estimates to the calibration
//!    frequency and compare it with that ACI's threshold;
//! 4. above the threshold, run the upper one-tailed chi-squared variance test
//!    with the threshold as the null variance;
//! 5. if the test rejects, compare the estimates' KDE with fitted uniform and
//!    normal laws.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{ThresholdEntry, ThresholdTable};
use crate::envspec::SpectrumConfig;
use crate::error::{Error, Result};
use crate::faultfreq::{estimate_signal, try_estimate_segments, EstimatorConfig};
use crate::sigmodel::{derive_seed, simulate_signal, FrequencyDistribution, PulseParams, Signal, SignalModel};
use crate::stats::{
    chi2_critical, chi_squared_variance_test, mean, sample_variance, shape_distance, ShapeDistance,
    ShapeVerdict, TestDecision, VarianceTestResult,
};

/// Largest tolerated fraction of segments whose estimation fails.
pub const MAX_SEGMENT_FAILURE_FRACTION: f64 = 0.2;

/// Below this many segments the variance test has little power.
pub const MIN_RECOMMENDED_SEGMENTS: usize = 10;

/// Direction of the variance rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RescaleMode {
    /// `var · (f_simul / f_real)²`: expresses the record's variance on the
    /// calibration frequency scale.
    #[default]
    Normalized,
    /// `var · (f_real / f_simul)²`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub seg_len: f64,
    pub alpha: f64,
    pub spectrum: SpectrumConfig,
    /// Carries the theoretical fault frequency of the machine under test.
    pub estimator: EstimatorConfig,
    pub rescale: RescaleMode,
}

impl ClassifyConfig {
    /// Defaults for a machine with fault frequency `f_theoretical`, using the
    /// analysis settings of `table` and the band-pass `band`.
    pub fn from_table(table: &ThresholdTable, f_theoretical: f64, seg_len: f64, band: Option<(f64, f64)>) -> Self {
        let mut spectrum = table.meta.spectrum;
        spectrum.bandpass = band;
        let mut estimator = table.meta.estimator;
        estimator.f_theoretical = f_theoretical;
        ClassifyConfig {
            seg_len,
            alpha: 0.05,
            spectrum,
            estimator,
            rescale: RescaleMode::Normalized,
        }
    }

    pub fn f_theoretical(&self) -> f64 {
        self.estimator.f_theoretical
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.seg_len > 0.0) {
            return Err(Error::param(format!("segment length must be positive, got {}", self.seg_len)));
        }
        self.spectrum.validate()?;
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    /// Rescaled variance at or below the threshold.
    BelowThreshold,
    AboveThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Constant,
    Uniform,
    Normal,
    NotConstantInconclusive,
}

impl Verdict {
    pub fn is_constant(self) -> bool {
        self == Verdict::Constant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub table_digest: String,
    pub table_seed: u64,
    pub alpha: f64,
    pub rescale: RescaleMode,
    pub spectrum: SpectrumConfig,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub seg_len: f64,
    pub n_segments: usize,
    pub n_failed: usize,
    pub estimates: Vec<f64>,
    pub snrs: Vec<f64>,
    pub mean_f_hat_real: f64,
    pub avg_snr_real: f64,
    pub matched_aci: f64,
    pub matched_mean_snr: f64,
    pub threshold: f64,
    pub mean_f_hat_simul: f64,
    pub sample_variance: f64,
    pub rescaled_variance: f64,
    pub gate: Gate,
    pub test: Option<VarianceTestResult>,
    pub shape: Option<ShapeDistance>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl ClassificationReport {
    pub fn gate_answer(&self) -> &'static str {
        match self.gate {
            Gate::BelowThreshold => "Yes",
            Gate::AboveThreshold => "No",
        }
    }

    pub fn test_answer(&self) -> &'static str {
        match self.test.map(|t| t.decision) {
            None => "None",
            Some(TestDecision::Reject) => "Rejected",
            Some(TestDecision::FailToReject) => "Fail to reject",
        }
    }

    pub fn final_answer(&self) -> &'static str {
        if self.verdict.is_constant() {
            "Constant value"
        } else {
            "Different than a constant value"
        }
    }

    pub fn shape_answer(&self) -> &'static str {
        match self.verdict {
            Verdict::Constant => "-",
            Verdict::Uniform => "uniform",
            Verdict::Normal => "normal",
            Verdict::NotConstantInconclusive => "inconclusive",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Text table with one row per report.
pub fn summary_table(reports: &[ClassificationReport]) -> String {
    let header = [
        "Segment length",
        "Re-scaled variance below threshold?",
        "Chi-squared test",
        "Final classification",
        "Shape",
    ];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                format!("{} s", r.seg_len),
                r.gate_answer().to_string(),
                r.test_answer().to_string(),
                r.final_answer().to_string(),
                r.shape_answer().to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

/// Entry at `seg_len` whose mean SNR is closest to `avg_snr`; ties go to the
/// larger ACI. The flag is set when `avg_snr` lies outside the calibrated
/// SNR range.
pub fn match_aci(avg_snr: f64, table: &ThresholdTable, seg_len: f64) -> Result<(&ThresholdEntry, bool)> {
    let entries = table.entries_for(seg_len);
    if entries.is_empty() {
        return Err(Error::MissingSegmentLength(seg_len));
    }
    let mut best = entries[0];
    for &e in &entries[1..] {
        let d = (e.mean_snr - avg_snr).abs();
        let db = (best.mean_snr - avg_snr).abs();
        if d < db || (d == db && e.aci > best.aci) {
            best = e;
        }
    }
    let lo = entries.iter().map(|e| e.mean_snr).fold(f64::INFINITY, f64::min);
    let hi = entries.iter().map(|e| e.mean_snr).fold(f64::NEG_INFINITY, f64::max);
    Ok((best, avg_snr < lo || avg_snr > hi))
}

pub fn rescale_variance(var_real: f64, mean_f_hat_real: f64, mean_f_hat_simul: f64, mode: RescaleMode) -> Result<f64> {
    if !(mean_f_hat_real > 0.0 && mean_f_hat_simul > 0.0) {
        return Err(Error::param(format!(
            "mean estimates must be positive, got {mean_f_hat_real} and {mean_f_hat_simul}"
        )));
    }
    let ratio = match mode {
        RescaleMode::Normalized => mean_f_hat_simul / mean_f_hat_real,
        RescaleMode::Literal => mean_f_hat_real / mean_f_hat_simul,
    };
    Ok(var_real * ratio * ratio)
}

/// Decision chain on already-estimated segments.
pub fn decide(
    estimates: &[f64],
    snrs: &[f64],
    n_failed: usize,
    table: &ThresholdTable,
    cfg: &ClassifyConfig,
) -> Result<ClassificationReport> {
    cfg.validate()?;
    table.check_compatible(&cfg.spectrum, &cfg.estimator)?;
    if estimates.len() != snrs.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: snrs.len(),
        });
    }
    if estimates.len() < 2 {
        return Err(Error::TooShort(format!(
            "need at least two segment estimates, got {}",
            estimates.len()
        )));
    }
    let mut warnings = Vec::new();
    let n = estimates.len();
    if n < MIN_RECOMMENDED_SEGMENTS {
        warnings.push(format!(
            "only {n} segments; the variance test has low power below {MIN_RECOMMENDED_SEGMENTS}"
        ));
    }

    let mean_f_hat_real = mean(estimates);
    let avg_snr_real = mean(snrs);
    let (entry, clamped) = match_aci(avg_snr_real, table, cfg.seg_len)?;
    if clamped {
        warnings.push(format!(
            "average SNR {avg_snr_real:.3} is outside the calibrated range; using nearest ACI {}",
            entry.aci
        ));
    }
    let sample_var = sample_variance(estimates)?;
    let rescaled = rescale_variance(sample_var, mean_f_hat_real, entry.mean_f_hat, cfg.rescale)?;
    let threshold = entry.threshold;

    let (gate, test) = if rescaled <= threshold {
        (Gate::BelowThreshold, None)
    } else if threshold > 0.0 {
        (
            Gate::AboveThreshold,
            Some(chi_squared_variance_test(rescaled, threshold, n, cfg.alpha)?),
        )
    } else {
        // A zero calibrated variance makes any spread infinitely significant.
        warnings.push("calibrated threshold is zero; any spread rejects".into());
        let dof = (n - 1) as u32;
        (
            Gate::AboveThreshold,
            Some(VarianceTestResult {
                statistic: f64::INFINITY,
                dof,
                critical: chi2_critical(1.0 - cfg.alpha, dof)?,
                alpha: cfg.alpha,
                decision: TestDecision::Reject,
            }),
        )
    };

    let (shape, verdict) = match test.map(|t| t.decision) {
        None | Some(TestDecision::FailToReject) => (None, Verdict::Constant),
        Some(TestDecision::Reject) => match shape_distance(estimates) {
            Ok(s) => {
                let v = match s.verdict {
                    ShapeVerdict::Uniform => Verdict::Uniform,
                    ShapeVerdict::Normal => Verdict::Normal,
                    ShapeVerdict::Inconclusive => Verdict::NotConstantInconclusive,
                };
                (Some(s), v)
            }
            Err(e) => {
                warnings.push(format!("shape comparison skipped: {e}"));
                (None, Verdict::NotConstantInconclusive)
            }
        },
    };

    Ok(ClassificationReport {
        seg_len: cfg.seg_len,
        n_segments: n,
        n_failed,
        estimates: estimates.to_vec(),
        snrs: snrs.to_vec(),
        mean_f_hat_real,
        avg_snr_real,
        matched_aci: entry.aci,
        matched_mean_snr: entry.mean_snr,
        threshold,
        mean_f_hat_simul: entry.mean_f_hat,
        sample_variance: sample_var,
        rescaled_variance: rescaled,
        gate,
        test,
        shape,
        verdict,
        warnings,
        provenance: Provenance {
            table_digest: table.meta.config_digest.clone(),
            table_seed: table.meta.seed,
            alpha: cfg.alpha,
            rescale: cfg.rescale,
            spectrum: cfg.spectrum,
            estimator: cfg.estimator,
        },
    })
}

/// Full decision chain on a recorded signal.
pub fn classify_signal(x: &Signal, cfg: &ClassifyConfig, table: &ThresholdTable) -> Result<ClassificationReport> {
    cfg.validate()?;
    table.check_compatible(&cfg.spectrum, &cfg.estimator)?;
    if table.entries_for(cfg.seg_len).is_empty() {
        return Err(Error::MissingSegmentLength(cfg.seg_len));
    }
    if x.duration() + 1e-9 < 2.0 * cfg.seg_len {
        return Err(Error::TooShort(format!(
            "signal of {:.3} s holds fewer than two {} s segments",
            x.duration(),
            cfg.seg_len
        )));
    }
    let per_segment = try_estimate_segments(x, cfg.seg_len, &cfg.spectrum, &cfg.estimator)?;
    let total = per_segment.len();
    let mut estimates = Vec::with_capacity(total);
    let mut snrs = Vec::with_capacity(total);
    let mut failed = 0;
    for (_, _, r) in per_segment {
        match r {
            Ok(e) => {
                estimates.push(e.f_hat);
                snrs.push(e.snr);
            }
            Err(_) => failed += 1,
        }
    }
    let limit = (total as f64 * MAX_SEGMENT_FAILURE_FRACTION).floor() as usize;
    if failed > limit {
        return Err(Error::TooManyFailures { failed, total, limit });
    }
    let mut report = decide(&estimates, &snrs, failed, table, cfg)?;
    if failed > 0 {
        report
            .warnings
            .push(format!("{failed} of {total} segments failed estimation and were skipped"));
    }
    Ok(report)
}

/// Result of [`simulate_and_classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedClassification {
    pub f_true: Vec<f64>,
    pub report: ClassificationReport,
}

/// Simulate `n_segments` independent segments (fault frequency drawn per
/// segment from `dist`) and classify them against `table`.
///
/// Records use the table's sample rate and pulse shape; segment `i` is seeded
/// with `derive_seed(seed, i)`.
pub fn simulate_and_classify(
    dist: FrequencyDistribution,
    aci: f64,
    n_segments: usize,
    table: &ThresholdTable,
    cfg: &ClassifyConfig,
    seed: u64,
) -> Result<SimulatedClassification> {
    if n_segments < 2 {
        return Err(Error::param("need at least two simulated segments"));
    }
    let model = SignalModel::new(cfg.seg_len, table.meta.fs, dist, PulseParams { aci, ..table.meta.pulse });
    model.validate()?;
    let results: Vec<Result<(f64, f64, f64)>> = (0..n_segments as u64)
        .into_par_iter()
        .map(|i| {
            let sim = simulate_signal(&model, derive_seed(seed, i))?;
            let est = estimate_signal(&sim.signal, &cfg.spectrum, &cfg.estimator)?;
            Ok((sim.f_true, est.f_hat, est.snr))
        })
        .collect();
    let mut f_true = Vec::with_capacity(n_segments);
    let mut estimates = Vec::with_capacity(n_segments);
    let mut snrs = Vec::with_capacity(n_segments);
    let mut failed = 0;
    for r in results {
        match r {
            Ok((t, f, s)) => {
                f_true.push(t);
                estimates.push(f);
                snrs.push(s);
            }
            Err(_) => failed += 1,
        }
    }
    let limit = (n_segments as f64 * MAX_SEGMENT_FAILURE_FRACTION).floor() as usize;
    if failed > limit {
        return Err(Error::TooManyFailures {
            failed,
            total: n_segments,
            limit,
        });
    }
    let report = decide(&estimates, &snrs, failed, table, cfg)?;
    Ok(SimulatedClassification { f_true, report })
}
