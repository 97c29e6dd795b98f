//! Envelope spectrum: band-pass prefilter, analytic signal, envelope and
//! Welch power spectral density.
//!
//! The band-pass filter and the Hilbert transform are both diagonal in the
//! frequency domain, so [`envelope_spectrum`] applies them with a single
//! forward/inverse FFT pair. The standalone [`bandpass`] and
//! [`analytic_signal`] produce the same result when chained.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use realfft::{RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigmodel::Signal;

/// Width of the raised-cosine band edge, in FFT bins.
const TRANSITION_BINS: f64 = 8.0;

thread_local! {
    static REAL_PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
    static COMPLEX_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn real_forward(n: usize) -> Arc<dyn RealToComplex<f64>> {
    REAL_PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn complex_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    COMPLEX_PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// One-sided power spectral density of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub df: f64,
}

impl EnvelopeSpectrum {
    pub fn new(amps: Vec<f64>, df: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::param(format!("bin width must be positive, got {df}")));
        }
        if amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::param("spectrum amplitudes must be finite and non-negative"));
        }
        let freqs = (0..amps.len()).map(|k| k as f64 * df).collect();
        Ok(EnvelopeSpectrum { freqs, amps, df })
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Highest frequency covered by the spectrum.
    pub fn max_freq(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> EnvelopeSpectrum {
        EnvelopeSpectrum {
            freqs: self.freqs.clone(),
            amps: self.amps.iter().map(|a| a * factor).collect(),
            df: self.df,
        }
    }

    /// CSV with header `freq_hz,amplitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,amplitude\n");
        for (f, a) in self.freqs.iter().zip(&self.amps) {
            out.push_str(&format!("{f},{a}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Symmetric window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        let m = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / m;
                match self {
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            _ => Err(Error::Parse(format!("unknown window '{s}'"))),
        }
    }
}

/// Envelope-spectrum settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Optional band-pass `(f_lo, f_hi)` in Hz applied before demodulation.
    pub bandpass: Option<(f64, f64)>,
    pub window: Window,
    pub zero_pad_factor: usize,
    pub welch_segments: usize,
    pub welch_overlap: f64,
}

impl Default for SpectrumConfig {
    /// One Hann-tapered periodogram over the whole record, zero-padded 4×.
    fn default() -> Self {
        SpectrumConfig {
            bandpass: None,
            window: Window::Hann,
            zero_pad_factor: 4,
            welch_segments: 1,
            welch_overlap: 0.5,
        }
    }
}

impl SpectrumConfig {
    pub fn with_band(mut self, f_lo: f64, f_hi: f64) -> Self {
        self.bandpass = Some((f_lo, f_hi));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.zero_pad_factor < 1 {
            return Err(Error::param("zero_pad_factor must be at least 1"));
        }
        if self.welch_segments < 1 {
            return Err(Error::param("welch_segments must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.welch_overlap) {
            return Err(Error::param(format!(
                "welch_overlap must be in [0, 1), got {}",
                self.welch_overlap
            )));
        }
        Ok(())
    }

    /// `(piece_len, step)` of the Welch split for an input of `n` samples.
    pub fn welch_layout(&self, n: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let s = self.welch_segments;
        let len = if s == 1 {
            n
        } else {
            (n as f64 / (1.0 + (s - 1) as f64 * (1.0 - self.welch_overlap))).floor() as usize
        };
        let step = (((len as f64) * (1.0 - self.welch_overlap)).floor() as usize).max(1);
        if len < 2 || (s - 1) * step + len > n {
            return Err(Error::TooShort(format!(
                "{n} samples cannot hold {s} Welch pieces with overlap {}",
                self.welch_overlap
            )));
        }
        Ok((len, step))
    }
}

fn check_band(fs: f64, f_lo: f64, f_hi: f64) -> Result<()> {
    if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= fs / 2.0) {
        return Err(Error::param(format!(
            "band [{f_lo}, {f_hi}] Hz must satisfy 0 <= lo < hi <= fs/2 = {}",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Gain of the band mask at frequency `f` (Hz), with raised-cosine edges of
/// width `width` placed outside the passband.
fn band_gain(f: f64, f_lo: f64, f_hi: f64, width: f64) -> f64 {
    if f >= f_lo && f <= f_hi {
        1.0
    } else if f > f_hi && f < f_hi + width {
        0.5 * (1.0 + (PI * (f - f_hi) / width).cos())
    } else if f < f_lo && f > f_lo - width {
        0.5 * (1.0 + (PI * (f_lo - f) / width).cos())
    } else {
        0.0
    }
}

/// One-sided spectrum of a real record.
fn rfft(x: &[f64]) -> Vec<Complex64> {
    let plan = real_forward(x.len());
    let mut input = x.to_vec();
    let mut spectrum = plan.make_output_vec();
    plan.process(&mut input, &mut spectrum)
        .expect("buffer sizes come from the plan");
    spectrum
}

/// Expands a one-sided spectrum of an `n`-sample real record into the full
/// analytic spectrum (negative bins zero, positive bins doubled), applies
/// `gain`, and inverts.
fn analytic_from_half(half: &[Complex64], n: usize, gain: impl Fn(usize) -> f64) -> Vec<Complex64> {
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    let nyquist = if n % 2 == 0 { Some(n / 2) } else { None };
    for (k, (slot, v)) in full.iter_mut().zip(half).enumerate() {
        let weight = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
        let g = gain(k);
        if g != 0.0 {
            *slot = v * (weight * g);
        }
    }
    complex_inverse(n).process(&mut full);
    let scale = 1.0 / n as f64;
    for v in full.iter_mut() {
        *v *= scale;
    }
    full
}

/// Zero-phase FFT band-pass of `x` to `[f_lo, f_hi]` Hz.
pub fn bandpass(x: &Signal, f_lo: f64, f_hi: f64) -> Result<Signal> {
    let fs = x.fs();
    check_band(fs, f_lo, f_hi)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort("band-pass needs at least two samples".into()));
    }
    let df = fs / n as f64;
    let width = TRANSITION_BINS * df;
    let half = rfft(x.samples());
    let mut masked: Vec<Complex64> = half
        .iter()
        .enumerate()
        .map(|(k, v)| v * band_gain(k as f64 * df, f_lo, f_hi, width))
        .collect();
    // The DC bin and (for even n) the Nyquist bin of a real signal are real.
    masked[0].im = 0.0;
    if n % 2 == 0 {
        masked[n / 2].im = 0.0;
    }
    let plan = REAL_PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    let mut out = plan.make_output_vec();
    plan.process(&mut masked, &mut out)
        .expect("buffer sizes come from the plan");
    let scale = 1.0 / n as f64;
    Signal::new(out.into_iter().map(|v| v * scale).collect(), fs)
}

/// Analytic signal `x + j·H{x}` by the frequency-domain method.
pub fn analytic_signal(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.len() < 2 {
        return Err(Error::TooShort("analytic signal needs at least two samples".into()));
    }
    let half = rfft(x);
    let mut z = analytic_from_half(&half, x.len(), |_| 1.0);
    for (zi, &xi) in z.iter_mut().zip(x) {
        zi.re = xi;
    }
    Ok(z)
}

/// Magnitude of the analytic signal, `sqrt(x² + h²)`.
pub fn envelope(x: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic_signal(x)?
        .into_iter()
        .map(|z| (z.re * z.re + z.im * z.im).sqrt())
        .collect())
}

/// Welch averaged, windowed, zero-padded one-sided periodogram.
pub fn welch_psd(x: &[f64], fs: f64, cfg: &SpectrumConfig) -> Result<EnvelopeSpectrum> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::param(format!("sample rate must be positive, got {fs}")));
    }
    let (len, step) = cfg.welch_layout(x.len())?;
    let nfft = len * cfg.zero_pad_factor;
    let window = cfg.window.coefficients(len);
    let power: f64 = window.iter().map(|w| w * w).sum();
    let plan = real_forward(nfft);
    let mut input = plan.make_input_vec();
    let mut output = plan.make_output_vec();
    let mut acc = vec![0.0; output.len()];

    for piece in 0..cfg.welch_segments {
        let start = piece * step;
        for (slot, (&xi, &wi)) in input.iter_mut().zip(x[start..start + len].iter().zip(&window)) {
            *slot = xi * wi;
        }
        input[len..].iter_mut().for_each(|v| *v = 0.0);
        plan.process(&mut input, &mut output)
            .expect("buffer sizes come from the plan");
        for (a, v) in acc.iter_mut().zip(&output) {
            *a += v.norm_sqr();
        }
    }

    let norm = 1.0 / (fs * power * cfg.welch_segments as f64);
    let last = acc.len() - 1;
    let nyquist_bin = nfft % 2 == 0;
    for (k, a) in acc.iter_mut().enumerate() {
        let one_sided = if k == 0 || (nyquist_bin && k == last) { 1.0 } else { 2.0 };
        *a *= norm * one_sided;
    }
    EnvelopeSpectrum::new(acc, fs / nfft as f64)
}

/// Band-pass (if configured), envelope, mean removal, Welch PSD.
pub fn envelope_spectrum(x: &Signal, cfg: &SpectrumConfig) -> Result<EnvelopeSpectrum> {
    cfg.validate()?;
    let fs = x.fs();
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort("envelope spectrum needs at least two samples".into()));
    }
    let mut env = match cfg.bandpass {
        Some((f_lo, f_hi)) => {
            check_band(fs, f_lo, f_hi)?;
            let df = fs / n as f64;
            let width = TRANSITION_BINS * df;
            let half = rfft(x.samples());
            analytic_from_half(&half, n, |k| band_gain(k as f64 * df, f_lo, f_hi, width))
                .into_iter()
                .map(|z| z.norm())
                .collect()
        }
        None => envelope(x.samples())?,
    };
    let mean = env.iter().sum::<f64>() / n as f64;
    env.iter_mut().for_each(|v| *v -= mean);
    welch_psd(&env, fs, cfg)
}
