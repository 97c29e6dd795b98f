//! Cyclic-impulse vibration model.
//!
//! A simulated record is the sum of unit-variance Gaussian white noise and a
//! train of Gaussian-modulated cosine pulses repeating at the fault frequency.
//! The fault frequency itself is drawn once per record from a
//! [`FrequencyDistribution`], so a batch of records reproduces the spread of
//! fault frequencies seen across segments of a machine running at fluctuating
//! speed.
//!
//! All randomness flows from a single 64-bit seed per record. Batches derive
//! per-record seeds with [`derive_seed`], which makes every record depend only
//! on `(master_seed, index)` and never on scheduling order.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pulse support is truncated at this many envelope standard deviations.
const PULSE_SUPPORT_SIGMAS: f64 = 4.0;

/// Default sample rate for simulated records, Hz.
pub const DEFAULT_FS: f64 = 10_000.0;

/// Fault frequency used for threshold calibration, Hz.
pub const F_SIMUL: f64 = 30.0;

/// The ACI grid the thresholds are calibrated on.
pub const ACI_GRID: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];

/// Segment lengths (s) analysed by default.
pub const SEGMENT_LENGTHS: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

/// A uniformly sampled real-valued record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::param(format!("sample rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::param("signal has no samples"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("sample {i} is not finite")));
        }
        Ok(Signal { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Sub-record `[start, start + len)` in samples.
    pub fn slice(&self, start: usize, len: usize) -> Result<Signal> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or_else(|| Error::param("slice out of range"))?;
        Signal::new(self.samples[start..end].to_vec(), self.fs)
    }

    pub fn scaled(&self, factor: f64) -> Signal {
        Signal {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            fs: self.fs,
        }
    }
}

/// Law governing the fault frequency of a simulated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrequencyDistribution {
    Constant { f: f64 },
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, std: f64 },
}

impl FrequencyDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FrequencyDistribution::Constant { f } => f > 0.0 && f.is_finite(),
            FrequencyDistribution::Uniform { a, b } => 0.0 < a && a < b && b.is_finite(),
            FrequencyDistribution::Normal { mean, std } => {
                mean > 0.0 && std > 0.0 && mean.is_finite() && std.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid frequency distribution {self}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FrequencyDistribution::Constant { f } => f,
            FrequencyDistribution::Uniform { a, b } => 0.5 * (a + b),
            FrequencyDistribution::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            FrequencyDistribution::Constant { .. } => 0.0,
            FrequencyDistribution::Uniform { a, b } => (b - a).powi(2) / 12.0,
            FrequencyDistribution::Normal { std, .. } => std * std,
        }
    }

    /// Draw one frequency.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FrequencyDistribution::Constant { f } => f,
            FrequencyDistribution::Uniform { a, b } => a + (b - a) * rng.gen::<f64>(),
            FrequencyDistribution::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
        }
    }

    pub fn pdf(&self, f: f64) -> Option<f64> {
        match *self {
            FrequencyDistribution::Constant { .. } => None,
            FrequencyDistribution::Uniform { a, b } => crate::stats::uniform_pdf(f, a, b).ok(),
            FrequencyDistribution::Normal { mean, std } => {
                crate::stats::normal_pdf(f, mean, std).ok()
            }
        }
    }

    pub fn cdf(&self, f: f64) -> f64 {
        match *self {
            FrequencyDistribution::Constant { f: c } => {
                if f < c {
                    0.0
                } else {
                    1.0
                }
            }
            FrequencyDistribution::Uniform { a, b } => {
                crate::stats::uniform_cdf(f, a, b).unwrap_or(f64::NAN)
            }
            FrequencyDistribution::Normal { mean, std } => {
                crate::stats::normal_cdf(f, mean, std).unwrap_or(f64::NAN)
            }
        }
    }
}

impl fmt::Display for FrequencyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FrequencyDistribution::Constant { f: c } => write!(f, "constant:{c}"),
            FrequencyDistribution::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            FrequencyDistribution::Normal { mean, std } => write!(f, "normal:{mean},{std}"),
        }
    }
}

/// Parses `constant:F`, `uniform:A,B` or `normal:MEAN,STD`.
impl FromStr for FrequencyDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected KIND:PARAMS, got '{s}'")))?;
        let params = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{p}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = match (kind.trim().to_ascii_lowercase().as_str(), params.as_slice()) {
            ("constant", [f]) => FrequencyDistribution::Constant { f: *f },
            ("uniform", [a, b]) => FrequencyDistribution::Uniform { a: *a, b: *b },
            ("normal", [m, sd]) => FrequencyDistribution::Normal { mean: *m, std: *sd },
            _ => return Err(Error::Parse(format!("unrecognised distribution '{s}'"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Parameters of the cyclic impulse train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Amplitude of cyclic impulses relative to the unit-variance noise.
    pub aci: f64,
    /// Carrier (resonance) frequency, Hz.
    pub fc: f64,
    /// Lower end of the fractional bandwidth range.
    pub bw_lo: f64,
    /// Upper end of the fractional bandwidth range.
    pub bw_hi: f64,
    /// Reference level (dB, negative) at which the bandwidth is measured.
    pub bwr: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams {
            aci: 3.0,
            fc: 2500.0,
            bw_lo: 0.4,
            bw_hi: 0.5,
            bwr: -6.0,
        }
    }
}

impl PulseParams {
    pub fn with_aci(aci: f64) -> Self {
        PulseParams {
            aci,
            ..PulseParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aci > 0.0 && self.aci.is_finite()) {
            return Err(Error::param(format!("aci must be positive, got {}", self.aci)));
        }
        if !(self.fc > 0.0 && self.fc.is_finite()) {
            return Err(Error::param(format!("carrier must be positive, got {}", self.fc)));
        }
        if !(0.0 < self.bw_lo && self.bw_lo <= self.bw_hi && self.bw_hi < 2.0) {
            return Err(Error::param(format!(
                "bandwidth range must satisfy 0 < lo <= hi < 2, got [{}, {}]",
                self.bw_lo, self.bw_hi
            )));
        }
        if !(self.bwr < 0.0 && self.bwr.is_finite()) {
            return Err(Error::param(format!("bwr must be negative, got {}", self.bwr)));
        }
        Ok(())
    }

    /// Highest frequency (Hz) at which a pulse still carries energy at the
    /// reference level.
    pub fn upper_band_edge(&self) -> f64 {
        self.fc * (1.0 + self.bw_hi / 2.0)
    }

    /// Band around the resonance used to prefilter simulated records.
    pub fn default_band(&self) -> (f64, f64) {
        (self.fc * (1.0 - self.bw_hi), self.fc * (1.0 + self.bw_hi))
    }
}

/// Envelope variance `tv` (s²) of a Gaussian pulse whose spectrum falls to
/// `10^(bwr/20)` of its peak at `fc·(1 ± bw/2)`.
pub fn pulse_time_variance(fc: f64, bw: f64, bwr: f64) -> Result<f64> {
    if !(fc > 0.0 && fc.is_finite()) {
        return Err(Error::param(format!("carrier must be positive, got {fc}")));
    }
    if !(bw > 0.0 && bw < 2.0) {
        return Err(Error::param(format!("fractional bandwidth must be in (0, 2), got {bw}")));
    }
    if !(bwr < 0.0 && bwr.is_finite()) {
        return Err(Error::param(format!("bwr must be negative, got {bwr}")));
    }
    let reference = 10f64.powf(bwr / 20.0);
    Ok(-2.0 * reference.ln() / (PI * bw * fc).powi(2))
}

/// Gaussian-modulated cosine `exp(-t²/(2 tv))·cos(2π fc t)` evaluated at `t`.
pub fn gaussian_pulse(t: &[f64], fc: f64, bw: f64, bwr: f64) -> Result<Vec<f64>> {
    let tv = pulse_time_variance(fc, bw, bwr)?;
    Ok(t.iter().map(|&ti| pulse_value(ti, fc, tv)).collect())
}

#[inline]
fn pulse_value(t: f64, fc: f64, tv: f64) -> f64 {
    (-t * t / (2.0 * tv)).exp() * (2.0 * PI * fc * t).cos()
}

/// Everything needed to synthesize one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub duration: f64,
    pub fs: f64,
    pub dist: FrequencyDistribution,
    pub pulse: PulseParams,
    /// Standard deviation of the additive white noise; 1 in the reference model.
    pub noise_std: f64,
}

impl SignalModel {
    pub fn new(duration: f64, fs: f64, dist: FrequencyDistribution, pulse: PulseParams) -> Self {
        SignalModel {
            duration,
            fs,
            dist,
            pulse,
            noise_std: 1.0,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_std = 0.0;
        self
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        self.pulse.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::param(format!("sample rate must be positive, got {}", self.fs)));
        }
        let nyquist_floor = 2.0 * self.pulse.upper_band_edge();
        if self.fs <= nyquist_floor {
            return Err(Error::param(format!(
                "sample rate {} Hz does not clear the pulse band; need more than {} Hz",
                self.fs, nyquist_floor
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std must be non-negative"));
        }
        if self.n_samples() < 2 {
            return Err(Error::TooShort("record has fewer than two samples".into()));
        }
        Ok(())
    }
}

/// A synthesized record with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSignal {
    pub signal: Signal,
    pub f_true: f64,
    /// Centre times (s) of the impulses placed inside the record.
    pub impulse_times: Vec<f64>,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th record of a batch.
///
/// `derive_seed(m, i) = splitmix64(splitmix64(m) ^ splitmix64(i ^ 0xA5A5_A5A5_A5A5_A5A5))`,
/// where `splitmix64` is the SplitMix64 output function applied to
/// `z + 0x9E3779B97F4A7C15`. The per-record generator is ChaCha8 seeded
/// from that value with `seed_from_u64`.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(index ^ 0xA5A5_A5A5_A5A5_A5A5))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthesize one record.
///
/// Draw order from the seeded generator: fault frequency, first-impulse
/// phase, one bandwidth per impulse, then the noise samples (ziggurat
/// standard normals from `rand_distr`).
pub fn simulate_signal(model: &SignalModel, seed: u64) -> Result<SimulatedSignal> {
    model.validate()?;
    let mut rng = rng_from_seed(seed);

    let f_true = model.dist.sample(&mut rng);
    if !(f_true > 0.0 && f_true.is_finite()) {
        return Err(Error::param(format!("drawn fault frequency {f_true} is not positive")));
    }
    if model.duration < 2.0 / f_true {
        return Err(Error::TooShort(format!(
            "duration {} s holds fewer than two cycles of {f_true} Hz",
            model.duration
        )));
    }

    let n = model.n_samples();
    let fs = model.fs;
    let period = 1.0 / f_true;
    let t0 = period * rng.gen::<f64>();

    let mut impulses = Vec::new();
    let mut k = 0u64;
    loop {
        let centre = t0 + k as f64 * period;
        if centre >= model.duration {
            break;
        }
        let bw = model.pulse.bw_lo + (model.pulse.bw_hi - model.pulse.bw_lo) * rng.gen::<f64>();
        impulses.push((centre, bw));
        k += 1;
    }

    let mut samples = vec![0.0; n];
    if model.noise_std > 0.0 {
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s = model.noise_std * z;
        }
    }

    let p = &model.pulse;
    for &(centre, bw) in &impulses {
        let tv = pulse_time_variance(p.fc, bw, p.bwr)?;
        let half = PULSE_SUPPORT_SIGMAS * tv.sqrt();
        let first = ((centre - half) * fs).ceil().max(0.0) as usize;
        let last = (((centre + half) * fs).floor() as usize).min(n - 1);
        for (i, s) in samples.iter_mut().enumerate().take(last + 1).skip(first) {
            let t = i as f64 / fs - centre;
            *s += p.aci * pulse_value(t, p.fc, tv);
        }
    }

    Ok(SimulatedSignal {
        signal: Signal::new(samples, fs)?,
        f_true,
        impulse_times: impulses.into_iter().map(|(c, _)| c).collect(),
    })
}

/// Synthesize `n` independent records; record `i` uses `derive_seed(master_seed, i)`.
pub fn simulate_batch(n: usize, model: &SignalModel, master_seed: u64) -> Result<Vec<SimulatedSignal>> {
    if n == 0 {
        return Err(Error::param("batch size must be at least 1"));
    }
    model.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_signal(model, derive_seed(master_seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(dist: FrequencyDistribution, duration: f64) -> SignalModel {
        SignalModel::new(duration, DEFAULT_FS, dist, PulseParams::default())
    }

    #[test]
    fn pulse_is_one_at_origin() {
        assert_eq!(gaussian_pulse(&[0.0], 2500.0, 0.45, -6.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn pulse_is_even_and_bounded_by_envelope() {
        let t: Vec<f64> = (1..400).map(|i| i as f64 * 7.3e-6).collect();
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        let pos = gaussian_pulse(&t, 2500.0, 0.45, -6.0).unwrap();
        let mirrored = gaussian_pulse(&neg, 2500.0, 0.45, -6.0).unwrap();
        let tv = pulse_time_variance(2500.0, 0.45, -6.0).unwrap();
        for ((a, b), ti) in pos.iter().zip(&mirrored).zip(&t) {
            assert_eq!(a, b);
            assert!(a.abs() <= (-ti * ti / (2.0 * tv)).exp());
        }
    }

    #[test]
    fn pulse_rejects_bad_parameters() {
        assert!(gaussian_pulse(&[0.0], 2500.0, 0.0, -6.0).is_err());
        assert!(gaussian_pulse(&[0.0], 2500.0, 2.0, -6.0).is_err());
        assert!(gaussian_pulse(&[0.0], -1.0, 0.45, -6.0).is_err());
        assert!(gaussian_pulse(&[0.0], 2500.0, 0.45, 3.0).is_err());
    }

    #[test]
    fn parse_distribution() {
        assert_eq!(
            "uniform:29,31".parse::<FrequencyDistribution>().unwrap(),
            FrequencyDistribution::Uniform { a: 29.0, b: 31.0 }
        );
        assert_eq!(
            "normal:30,0.33".parse::<FrequencyDistribution>().unwrap(),
            FrequencyDistribution::Normal { mean: 30.0, std: 0.33 }
        );
        assert!("uniform:31,29".parse::<FrequencyDistribution>().is_err());
        assert!("constant:-1".parse::<FrequencyDistribution>().is_err());
        assert!("gamma:1,2".parse::<FrequencyDistribution>().is_err());
        let d: FrequencyDistribution = "constant:30".parse().unwrap();
        assert_eq!(d.to_string().parse::<FrequencyDistribution>().unwrap(), d);
    }

    #[test]
    fn constant_record_has_expected_impulse_count_and_spacing() {
        let sim = simulate_signal(&model(FrequencyDistribution::Constant { f: 30.0 }, 1.0), 7).unwrap();
        assert_eq!(sim.f_true, 30.0);
        assert!((29..=30).contains(&sim.impulse_times.len()));
        assert!(sim.impulse_times[0] < 1.0 / 30.0);
        for w in sim.impulse_times.windows(2) {
            assert!((w[1] - w[0] - 1.0 / 30.0).abs() < 1.0 / DEFAULT_FS);
        }
        assert_eq!(sim.signal.len(), DEFAULT_FS as usize);
    }

    #[test]
    fn uniform_draws_stay_in_range() {
        let m = model(FrequencyDistribution::Uniform { a: 29.0, b: 31.0 }, 0.5);
        for seed in 0..50 {
            let f = simulate_signal(&m, seed).unwrap().f_true;
            assert!((29.0..=31.0).contains(&f));
        }
    }

    #[test]
    fn noise_has_unit_variance() {
        let mut m = model(FrequencyDistribution::Constant { f: 30.0 }, 8.0);
        m.pulse.aci = 1e-12;
        let sim = simulate_signal(&m, 99).unwrap();
        let x = sim.signal.samples();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn too_short_for_two_cycles() {
        let m = model(FrequencyDistribution::Constant { f: 30.0 }, 0.05);
        assert!(matches!(simulate_signal(&m, 1), Err(Error::TooShort(_))));
    }

    #[test]
    fn nyquist_margin_enforced() {
        let mut m = model(FrequencyDistribution::Constant { f: 30.0 }, 1.0);
        m.fs = 4000.0;
        assert!(simulate_signal(&m, 1).is_err());
    }

    #[test]
    fn batch_is_reproducible_and_rejects_empty() {
        let m = model(FrequencyDistribution::Normal { mean: 30.0, std: 0.33 }, 0.5);
        let a = simulate_batch(4, &m, 11).unwrap();
        let b = simulate_batch(4, &m, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].signal, a[1].signal);
        assert_eq!(a[2], simulate_signal(&m, derive_seed(11, 2)).unwrap());
        assert!(simulate_batch(0, &m, 11).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(5, 0), derive_seed(6, 0));
    }
}
