//! C ABI over `envdiag`.
//!
//! Objects cross the boundary as opaque handles that must be released with
//! the matching `*_free` function. Every fallible call returns an
//! [`EnvdiagStatus`]; on failure a description is available from
//! [`envdiag_last_error_message`] on the same thread. Strings returned through
//! `char **` out-parameters are owned by the caller and released with
//! [`envdiag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use envdiag::calibrate::{build_table, CalibrationConfig, ThresholdTable};
use envdiag::classify::{classify_signal, ClassificationReport, ClassifyConfig, Gate, RescaleMode, Verdict};
use envdiag::envspec::{envelope_spectrum, EnvelopeSpectrum, SpectrumConfig, Window};
use envdiag::faultfreq::{estimate_fault_frequency, EstimatorConfig};
use envdiag::sigmodel::{
    simulate_signal, FrequencyDistribution, PulseParams, Signal, SignalModel, ACI_GRID, SEGMENT_LENGTHS,
};
use envdiag::stats::{chi2_critical, TestDecision};
use envdiag::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvdiagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The analysis could not be carried out (short signal, failed peak
    /// search, too many failed segments, ...).
    Analysis = 3,
    DigestMismatch = 4,
    MissingSegmentLength = 5,
    Io = 6,
    Parse = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvdiagVerdict {
    Constant = 0,
    Uniform = 1,
    Normal = 2,
    NotConstantInconclusive = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvdiagWindow {
    Hann = 0,
    Hamming = 1,
    Rectangular = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvdiagDistKind {
    /// `p1` is the frequency.
    Constant = 0,
    /// `p1`, `p2` are the bounds.
    Uniform = 1,
    /// `p1` is the mean, `p2` the standard deviation.
    Normal = 2,
}

/// Envelope-spectrum settings. Obtain defaults from
/// [`envdiag_spectrum_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnvdiagSpectrumParams {
    pub use_band: bool,
    pub band_lo: f64,
    pub band_hi: f64,
    pub window: EnvdiagWindow,
    pub zero_pad_factor: usize,
    pub welch_segments: usize,
    pub welch_overlap: f64,
}

/// Calibration settings. Null grid pointers select the default ACI and
/// segment-length grids.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnvdiagCalibrationParams {
    pub fs: f64,
    pub n_signals: usize,
    pub seed: u64,
    pub aci: *const f64,
    pub n_aci: usize,
    pub seg_lens: *const f64,
    pub n_seg_lens: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnvdiagClassifyParams {
    pub f_theoretical: f64,
    pub seg_len: f64,
    pub alpha: f64,
    /// Use the table's band-pass; otherwise `band_lo`/`band_hi` when
    /// `use_band` is set, or none.
    pub use_table_band: bool,
    pub use_band: bool,
    pub band_lo: f64,
    pub band_hi: f64,
    pub literal_rescale: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnvdiagSimulationParams {
    pub dist: EnvdiagDistKind,
    pub p1: f64,
    pub p2: f64,
    pub aci: f64,
    pub duration: f64,
    pub fs: f64,
}

/// Scalar fields of a classification report. `statistic` and `critical`
/// are NaN when the variance test did not run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EnvdiagReportSummary {
    pub seg_len: f64,
    pub n_segments: usize,
    pub n_failed: usize,
    pub mean_f_hat: f64,
    pub avg_snr: f64,
    pub matched_aci: f64,
    pub threshold: f64,
    pub sample_variance: f64,
    pub rescaled_variance: f64,
    pub below_threshold: bool,
    pub test_ran: bool,
    pub rejected: bool,
    pub statistic: f64,
    pub critical: f64,
    pub verdict: EnvdiagVerdict,
}

pub struct EnvdiagTable(ThresholdTable);
pub struct EnvdiagReport(ClassificationReport);
pub struct EnvdiagSpectrum(EnvelopeSpectrum);
pub struct EnvdiagSignal {
    signal: Signal,
    f_true: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EnvdiagStatus {
    match e {
        Error::InvalidParameter(_) => EnvdiagStatus::InvalidArgument,
        Error::DigestMismatch { .. } => EnvdiagStatus::DigestMismatch,
        Error::MissingSegmentLength(_) => EnvdiagStatus::MissingSegmentLength,
        Error::Io(_) => EnvdiagStatus::Io,
        Error::Parse(_) | Error::Json(_) => EnvdiagStatus::Parse,
        _ => EnvdiagStatus::Analysis,
    }
}

fn fail(status: EnvdiagStatus, msg: impl Into<String>) -> EnvdiagStatus {
    set_last_error(msg.into());
    status
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), EnvdiagStatus>) -> EnvdiagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EnvdiagStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(EnvdiagStatus::Panic, "internal panic"),
    }
}

fn check(r: envdiag::Result<()>) -> Result<(), EnvdiagStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn lift<T>(r: envdiag::Result<T>) -> Result<T, EnvdiagStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), EnvdiagStatus> {
    if p.is_null() {
        Err(fail(EnvdiagStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], EnvdiagStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, EnvdiagStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EnvdiagStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, EnvdiagStatus> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(EnvdiagStatus::Parse, "string contains a NUL byte"))
}

fn window_of(w: EnvdiagWindow) -> Window {
    match w {
        EnvdiagWindow::Hann => Window::Hann,
        EnvdiagWindow::Hamming => Window::Hamming,
        EnvdiagWindow::Rectangular => Window::Rectangular,
    }
}

fn spectrum_config(p: &EnvdiagSpectrumParams) -> SpectrumConfig {
    SpectrumConfig {
        bandpass: p.use_band.then_some((p.band_lo, p.band_hi)),
        window: window_of(p.window),
        zero_pad_factor: p.zero_pad_factor,
        welch_segments: p.welch_segments,
        welch_overlap: p.welch_overlap,
    }
}

fn verdict_of(v: Verdict) -> EnvdiagVerdict {
    match v {
        Verdict::Constant => EnvdiagVerdict::Constant,
        Verdict::Uniform => EnvdiagVerdict::Uniform,
        Verdict::Normal => EnvdiagVerdict::Normal,
        Verdict::NotConstantInconclusive => EnvdiagVerdict::NotConstantInconclusive,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn envdiag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn envdiag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn envdiag_spectrum_params_default() -> EnvdiagSpectrumParams {
    let d = SpectrumConfig::default();
    EnvdiagSpectrumParams {
        use_band: false,
        band_lo: 0.0,
        band_hi: 0.0,
        window: EnvdiagWindow::Hann,
        zero_pad_factor: d.zero_pad_factor,
        welch_segments: d.welch_segments,
        welch_overlap: d.welch_overlap,
    }
}

#[no_mangle]
pub extern "C" fn envdiag_calibration_params_default() -> EnvdiagCalibrationParams {
    let d = CalibrationConfig::default();
    EnvdiagCalibrationParams {
        fs: d.fs,
        n_signals: d.n_signals,
        seed: d.master_seed,
        aci: ptr::null(),
        n_aci: 0,
        seg_lens: ptr::null(),
        n_seg_lens: 0,
    }
}

#[no_mangle]
pub extern "C" fn envdiag_classify_params_default() -> EnvdiagClassifyParams {
    EnvdiagClassifyParams {
        f_theoretical: 30.0,
        seg_len: 1.0,
        alpha: 0.05,
        use_table_band: true,
        use_band: false,
        band_lo: 0.0,
        band_hi: 0.0,
        literal_rescale: false,
    }
}

/// Parse a threshold table from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_from_json(json: *const c_char, out: *mut *mut EnvdiagTable) -> EnvdiagStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = c_str(json, "json")?;
        let table = lift(ThresholdTable::from_json(text))?;
        *out = Box::into_raw(Box::new(EnvdiagTable(table)));
        Ok(())
    })
}

/// Load a threshold table from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_load(path: *const c_char, out: *mut *mut EnvdiagTable) -> EnvdiagStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = c_str(path, "path")?;
        let text = lift(std::fs::read_to_string(path).map_err(Error::from))?;
        let table = lift(ThresholdTable::from_json(&text))?;
        *out = Box::into_raw(Box::new(EnvdiagTable(table)));
        Ok(())
    })
}

/// Build a threshold table by simulation.
///
/// # Safety
/// `params` must point to a valid struct whose grid pointers are null or
/// point to the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_calibrate(
    params: *const EnvdiagCalibrationParams,
    out: *mut *mut EnvdiagTable,
) -> EnvdiagStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let p = &*params;
        let aci = if p.aci.is_null() { ACI_GRID.to_vec() } else { slice(p.aci, p.n_aci, "aci")?.to_vec() };
        let segs = if p.seg_lens.is_null() {
            SEGMENT_LENGTHS.to_vec()
        } else {
            slice(p.seg_lens, p.n_seg_lens, "seg_lens")?.to_vec()
        };
        let cfg = CalibrationConfig {
            n_signals: p.n_signals,
            master_seed: p.seed,
            ..CalibrationConfig::default().with_fs(p.fs)
        };
        let table = lift(build_table(&aci, &segs, &cfg))?;
        *out = Box::into_raw(Box::new(EnvdiagTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_to_json(table: *const EnvdiagTable, out: *mut *mut c_char) -> EnvdiagStatus {
    guard(|| {
        non_null(table, "table")?;
        non_null(out, "out")?;
        let json = lift((*table).0.to_json())?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Threshold of one table cell.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_threshold(
    table: *const EnvdiagTable,
    aci: f64,
    seg_len: f64,
    out: *mut f64,
) -> EnvdiagStatus {
    guard(|| {
        non_null(table, "table")?;
        non_null(out, "out")?;
        match (*table).0.get(aci, seg_len) {
            Some(e) => {
                *out = e.threshold;
                Ok(())
            }
            None => Err(fail(
                EnvdiagStatus::MissingSegmentLength,
                format!("no entry for aci {aci}, segment length {seg_len} s"),
            )),
        }
    })
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn envdiag_table_free(table: *mut EnvdiagTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Classify a recorded signal at one segment length.
///
/// # Safety
/// `samples` must point to `n` doubles; `table` must be a live handle;
/// `params` must point to a valid struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_classify_samples(
    samples: *const f64,
    n: usize,
    fs: f64,
    table: *const EnvdiagTable,
    params: *const EnvdiagClassifyParams,
    out: *mut *mut EnvdiagReport,
) -> EnvdiagStatus {
    guard(|| {
        non_null(table, "table")?;
        non_null(params, "params")?;
        non_null(out, "out")?;
        let x = slice(samples, n, "samples")?;
        let table = &(*table).0;
        let p = &*params;
        let band = if p.use_table_band {
            table.meta.spectrum.bandpass
        } else {
            p.use_band.then_some((p.band_lo, p.band_hi))
        };
        let mut cfg = ClassifyConfig::from_table(table, p.f_theoretical, p.seg_len, band);
        cfg.alpha = p.alpha;
        cfg.rescale = if p.literal_rescale { RescaleMode::Literal } else { RescaleMode::Normalized };
        let signal = lift(Signal::new(x.to_vec(), fs))?;
        let report = lift(classify_signal(&signal, &cfg, table))?;
        *out = Box::into_raw(Box::new(EnvdiagReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_report_verdict(report: *const EnvdiagReport, out: *mut EnvdiagVerdict) -> EnvdiagStatus {
    guard(|| {
        non_null(report, "report")?;
        non_null(out, "out")?;
        *out = verdict_of((*report).0.verdict);
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_report_summary(
    report: *const EnvdiagReport,
    out: *mut EnvdiagReportSummary,
) -> EnvdiagStatus {
    guard(|| {
        non_null(report, "report")?;
        non_null(out, "out")?;
        let r = &(*report).0;
        *out = EnvdiagReportSummary {
            seg_len: r.seg_len,
            n_segments: r.n_segments,
            n_failed: r.n_failed,
            mean_f_hat: r.mean_f_hat_real,
            avg_snr: r.avg_snr_real,
            matched_aci: r.matched_aci,
            threshold: r.threshold,
            sample_variance: r.sample_variance,
            rescaled_variance: r.rescaled_variance,
            below_threshold: r.gate == Gate::BelowThreshold,
            test_ran: r.test.is_some(),
            rejected: r.test.is_some_and(|t| t.decision == TestDecision::Reject),
            statistic: r.test.map_or(f64::NAN, |t| t.statistic),
            critical: r.test.map_or(f64::NAN, |t| t.critical),
            verdict: verdict_of(r.verdict),
        };
        Ok(())
    })
}

/// Copy the per-segment estimates into `buf` (capacity `cap`); the number
/// of estimates is written to `len` even when the buffer is too small.
///
/// # Safety
/// `report` must be a live handle; `buf` must hold `cap` doubles; `len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_report_estimates(
    report: *const EnvdiagReport,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> EnvdiagStatus {
    guard(|| {
        non_null(report, "report")?;
        non_null(len, "len")?;
        let est = &(*report).0.estimates;
        *len = est.len();
        if cap < est.len() {
            return Err(fail(
                EnvdiagStatus::BufferTooSmall,
                format!("buffer holds {cap}, need {}", est.len()),
            ));
        }
        if !est.is_empty() {
            non_null(buf, "buf")?;
            ptr::copy_nonoverlapping(est.as_ptr(), buf, est.len());
        }
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_report_to_json(report: *const EnvdiagReport, out: *mut *mut c_char) -> EnvdiagStatus {
    guard(|| {
        non_null(report, "report")?;
        non_null(out, "out")?;
        let json = lift((*report).0.to_json())?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn envdiag_report_free(report: *mut EnvdiagReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `samples` must point to `n` doubles; `params` must point to a valid
/// struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_envelope_spectrum(
    samples: *const f64,
    n: usize,
    fs: f64,
    params: *const EnvdiagSpectrumParams,
    out: *mut *mut EnvdiagSpectrum,
) -> EnvdiagStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let x = slice(samples, n, "samples")?;
        let signal = lift(Signal::new(x.to_vec(), fs))?;
        let spec = lift(envelope_spectrum(&signal, &spectrum_config(&*params)))?;
        *out = Box::into_raw(Box::new(EnvdiagSpectrum(spec)));
        Ok(())
    })
}

/// Number of bins, or 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn envdiag_spectrum_len(spec: *const EnvdiagSpectrum) -> usize {
    if spec.is_null() {
        0
    } else {
        (*spec).0.len()
    }
}

/// Bin spacing in Hz, or NaN for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn envdiag_spectrum_df(spec: *const EnvdiagSpectrum) -> f64 {
    if spec.is_null() {
        f64::NAN
    } else {
        (*spec).0.df
    }
}

/// Copy frequencies and amplitudes into caller buffers of capacity `cap`.
/// Either buffer may be null to skip it.
///
/// # Safety
/// `spec` must be a live handle; non-null buffers must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn envdiag_spectrum_copy(
    spec: *const EnvdiagSpectrum,
    freqs: *mut f64,
    amps: *mut f64,
    cap: usize,
) -> EnvdiagStatus {
    guard(|| {
        non_null(spec, "spectrum")?;
        let s = &(*spec).0;
        if cap < s.len() {
            return Err(fail(
                EnvdiagStatus::BufferTooSmall,
                format!("buffer holds {cap}, need {}", s.len()),
            ));
        }
        if !freqs.is_null() {
            ptr::copy_nonoverlapping(s.freqs.as_ptr(), freqs, s.len());
        }
        if !amps.is_null() {
            ptr::copy_nonoverlapping(s.amps.as_ptr(), amps, s.len());
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn envdiag_spectrum_free(spec: *mut EnvdiagSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Three-harmonic fault-frequency estimate with default settings apart from
/// `search_frac`.
///
/// # Safety
/// `spec` must be a live handle; `f_hat` and `snr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_estimate_fault_frequency(
    spec: *const EnvdiagSpectrum,
    f_theoretical: f64,
    search_frac: f64,
    f_hat: *mut f64,
    snr: *mut f64,
) -> EnvdiagStatus {
    guard(|| {
        non_null(spec, "spectrum")?;
        non_null(f_hat, "f_hat")?;
        non_null(snr, "snr")?;
        let cfg = EstimatorConfig {
            search_frac,
            ..EstimatorConfig::new(f_theoretical)
        };
        let est = lift(estimate_fault_frequency(&(*spec).0, &cfg))?;
        *f_hat = est.f_hat;
        *snr = est.snr;
        Ok(())
    })
}

/// Upper `p` quantile of the chi-squared law with `dof` degrees of freedom.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_chi2_critical(p: f64, dof: u32, out: *mut f64) -> EnvdiagStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(chi2_critical(p, dof))?;
        Ok(())
    })
}

/// Simulate one record.
///
/// # Safety
/// `params` must point to a valid struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn envdiag_simulate(
    params: *const EnvdiagSimulationParams,
    seed: u64,
    out: *mut *mut EnvdiagSignal,
) -> EnvdiagStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let p = &*params;
        let dist = match p.dist {
            EnvdiagDistKind::Constant => FrequencyDistribution::Constant { f: p.p1 },
            EnvdiagDistKind::Uniform => FrequencyDistribution::Uniform { a: p.p1, b: p.p2 },
            EnvdiagDistKind::Normal => FrequencyDistribution::Normal { mean: p.p1, std: p.p2 },
        };
        let model = SignalModel::new(p.duration, p.fs, dist, PulseParams::with_aci(p.aci));
        check(model.validate())?;
        let sim = lift(simulate_signal(&model, seed))?;
        *out = Box::into_raw(Box::new(EnvdiagSignal {
            signal: sim.signal,
            f_true: sim.f_true,
        }));
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn envdiag_signal_len(signal: *const EnvdiagSignal) -> usize {
    if signal.is_null() {
        0
    } else {
        (*signal).signal.len()
    }
}

/// Fault frequency drawn for the record, or NaN for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn envdiag_signal_f_true(signal: *const EnvdiagSignal) -> f64 {
    if signal.is_null() {
        f64::NAN
    } else {
        (*signal).f_true
    }
}

/// # Safety
/// `signal` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn envdiag_signal_copy(signal: *const EnvdiagSignal, buf: *mut f64, cap: usize) -> EnvdiagStatus {
    guard(|| {
        non_null(signal, "signal")?;
        let x = (*signal).signal.samples();
        if cap < x.len() {
            return Err(fail(
                EnvdiagStatus::BufferTooSmall,
                format!("buffer holds {cap}, need {}", x.len()),
            ));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn envdiag_signal_free(signal: *mut EnvdiagSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}
