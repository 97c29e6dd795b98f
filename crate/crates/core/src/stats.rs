//! Statistical primitives: error measures, kernel density estimation,
//! uniform/normal laws, the chi-squared quantile and the one-tailed variance
//! test, and a KDE-based uniform-vs-normal shape comparison.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Mean squared error with per-index pairing of truths and estimates.
pub fn mse(f_true: &[f64], f_hat: &[f64]) -> Result<f64> {
    if f_true.len() != f_hat.len() {
        return Err(Error::LengthMismatch {
            left: f_true.len(),
            right: f_hat.len(),
        });
    }
    if f_true.is_empty() {
        return Err(Error::param("mse of empty vectors"));
    }
    Ok(f_true
        .iter()
        .zip(f_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / f_true.len() as f64)
}

/// Mean squared deviation of estimates from a single target value, e.g. the
/// expected value of the generating distribution.
pub fn mse_to_target(f_hat: &[f64], target: f64) -> Result<f64> {
    if f_hat.is_empty() {
        return Err(Error::param("mse of empty vector"));
    }
    Ok(f_hat.iter().map(|v| (v - target).powi(2)).sum::<f64>() / f_hat.len() as f64)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; requires at least two values.
pub fn sample_variance(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::param("sample variance needs at least two values"));
    }
    let m = mean(x);
    Ok(x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64)
}

/// `h = 1.06 · σ̂ · n^(-1/5)` with σ̂ the sample standard deviation.
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64> {
    let var = sample_variance(samples)?;
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero sample variance".into()));
    }
    Ok(1.06 * var.sqrt() * (samples.len() as f64).powf(-0.2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Either a smooth density or, for a constant sample, a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityEstimate {
    Curve(KdeCurve),
    PointMass { value: f64, n: usize },
}

fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Gaussian-kernel density of `samples` evaluated on `grid`.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<KdeCurve> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("KDE grid must be ordered"));
    }
    let h = scott_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h);
    let density = grid
        .iter()
        .map(|&f| norm * samples.iter().map(|&s| gaussian_kernel((f - s) / h)).sum::<f64>())
        .collect();
    Ok(KdeCurve {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
    })
}

/// `points` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// KDE on `points` grid values spanning `[min − 4h, max + 4h]`.
pub fn kde_extended(samples: &[f64], points: usize) -> Result<KdeCurve> {
    let h = scott_bandwidth(samples)?;
    let (lo, hi) = min_max(samples);
    kde(samples, &linspace(lo - 4.0 * h, hi + 4.0 * h, points))
}

/// Like [`kde_extended`], reporting a point mass for constant samples.
pub fn density_estimate(samples: &[f64], points: usize) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::param("density estimate of an empty sample"));
    }
    if samples.iter().all(|&v| v == samples[0]) {
        return Ok(DensityEstimate::PointMass {
            value: samples[0],
            n: samples.len(),
        });
    }
    kde_extended(samples, points).map(DensityEstimate::Curve)
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Trapezoid rule over an ordered grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub fn uniform_pdf(f: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::param(format!("uniform law needs a < b, got [{a}, {b}]")));
    }
    Ok(if (a..=b).contains(&f) { 1.0 / (b - a) } else { 0.0 })
}

pub fn uniform_cdf(f: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::param(format!("uniform law needs a < b, got [{a}, {b}]")));
    }
    Ok(if f < a {
        0.0
    } else if f > b {
        1.0
    } else {
        (f - a) / (b - a)
    })
}

pub fn normal_pdf(f: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("normal law needs sigma > 0, got {sigma}")));
    }
    let z = (f - mu) / sigma;
    Ok((-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt()))
}

pub fn normal_cdf(f: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("normal law needs sigma > 0, got {sigma}")));
    }
    let x = (f - mu) / (sigma * SQRT_2);
    Ok(if x < -1.0 {
        0.5 * erfc(-x)
    } else {
        0.5 * (1.0 + erf(x))
    })
}

/// Below this magnitude `erf` uses the series, above it the continued fraction.
const ERF_SWITCH: f64 = 3.0;

/// Error function.
///
/// For `|x| < 3` the all-positive series
/// `erf(x) = 2/√π · e^{-x²} · Σ_{n≥0} 2ⁿ x^{2n+1} / (2n+1)!!`;
/// otherwise `1 − erfc(x)` from the continued fraction in [`erfc`].
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() >= ERF_SWITCH {
        return x.signum() * (1.0 - erfc_cf(x.abs()));
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= ERF_SWITCH {
        erfc_cf(x)
    } else if x <= -ERF_SWITCH {
        2.0 - erfc_cf(-x)
    } else {
        1.0 - erf(x)
    }
}

/// `erfc(x)` for `x > 0` by the Laplace continued fraction
/// `erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`,
/// evaluated with the modified Lentz method.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series for `x < a + 1`, Lentz continued fraction for `Q = 1 − P` otherwise.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || x < 0.0 || x.is_nan() {
        return Err(Error::param(format!("gamma_p needs a > 0, x >= 0; got a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                return Ok((sum * log_prefix.exp()).min(1.0));
            }
        }
        Err(Error::NoConvergence(format!("gamma_p series, a={a}, x={x}")))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                return Ok((1.0 - log_prefix.exp() * h).max(0.0));
            }
        }
        Err(Error::NoConvergence(format!("gamma_q continued fraction, a={a}, x={x}")))
    }
}

/// CDF of the chi-squared law with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: u32) -> Result<f64> {
    if dof == 0 {
        return Err(Error::param("chi-squared needs at least one degree of freedom"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Quantile `p` of χ²(dof): bracket by doubling, then bisect the CDF.
pub fn chi2_critical(p: f64, dof: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!("probability must be in (0, 1), got {p}")));
    }
    if dof == 0 {
        return Err(Error::param("chi-squared needs at least one degree of freedom"));
    }
    let mut lo = 0.0;
    let mut hi = (dof as f64).max(1.0);
    let mut grow = 0;
    while chi2_cdf(hi, dof)? < p {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 1100 {
            return Err(Error::NoConvergence(format!("could not bracket χ² quantile p={p}, dof={dof}")));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(mid, dof)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    if hi - lo > 1e-9 * hi.max(1.0) {
        return Err(Error::NoConvergence(format!("χ² quantile bisection, p={p}, dof={dof}")));
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestDecision {
    Reject,
    FailToReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTestResult {
    pub statistic: f64,
    pub dof: u32,
    pub critical: f64,
    pub alpha: f64,
    pub decision: TestDecision,
}

/// Upper one-tailed test of `H0: σ̂² = σ0²` against `H1: σ̂² > σ0²`.
pub fn chi_squared_variance_test(sample_var: f64, sigma0_sq: f64, n: usize, alpha: f64) -> Result<VarianceTestResult> {
    if n < 2 {
        return Err(Error::param("variance test needs n >= 2"));
    }
    if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::param(format!("tested variance must be positive, got {sigma0_sq}")));
    }
    if !(sample_var >= 0.0 && sample_var.is_finite()) {
        return Err(Error::param(format!("sample variance must be non-negative, got {sample_var}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let dof = (n - 1) as u32;
    let statistic = dof as f64 * sample_var / sigma0_sq;
    let critical = chi2_critical(1.0 - alpha, dof)?;
    Ok(VarianceTestResult {
        statistic,
        dof,
        critical,
        alpha,
        decision: if statistic > critical {
            TestDecision::Reject
        } else {
            TestDecision::FailToReject
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeVerdict {
    Uniform,
    Normal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDistance {
    pub dist_uniform: f64,
    pub dist_normal: f64,
    pub verdict: ShapeVerdict,
    /// Fitted uniform support `(min, max)`.
    pub uniform_fit: (f64, f64),
    /// Fitted normal `(mean, std)`.
    pub normal_fit: (f64, f64),
    pub bandwidth: f64,
}

/// Grid size for the shape comparison.
pub const SHAPE_GRID_POINTS: usize = 512;

/// Relative gap below which neither family is preferred.
pub const SHAPE_INCONCLUSIVE_GAP: f64 = 0.10;

/// L2 distance between a KDE and each fitted candidate family.
///
/// The uniform law is fitted by the sample range and the normal law by the
/// sample mean and standard deviation. Distances are
/// `sqrt(∫ (kde − pdf)²)` by the trapezoid rule on 512 points over
/// `[min − 4h, max + 4h]`.
pub fn shape_distance(samples: &[f64]) -> Result<ShapeDistance> {
    if samples.len() < 10 {
        return Err(Error::param(format!(
            "shape comparison needs at least 10 values, got {}",
            samples.len()
        )));
    }
    let curve = kde_extended(samples, SHAPE_GRID_POINTS)?;
    let (a, b) = min_max(samples);
    let mu = mean(samples);
    let sd = sample_variance(samples)?.sqrt();
    let l2 = |pdf: &dyn Fn(f64) -> f64| {
        let sq: Vec<f64> = curve
            .grid
            .iter()
            .zip(&curve.density)
            .map(|(&g, &d)| (d - pdf(g)).powi(2))
            .collect();
        trapezoid(&curve.grid, &sq).sqrt()
    };
    let dist_uniform = l2(&|g| uniform_pdf(g, a, b).unwrap_or(0.0));
    let dist_normal = l2(&|g| normal_pdf(g, mu, sd).unwrap_or(0.0));
    let gap = (dist_uniform - dist_normal).abs() / dist_uniform.max(dist_normal);
    let verdict = if gap < SHAPE_INCONCLUSIVE_GAP {
        ShapeVerdict::Inconclusive
    } else if dist_uniform < dist_normal {
        ShapeVerdict::Uniform
    } else {
        ShapeVerdict::Normal
    };
    Ok(ShapeDistance {
        dist_uniform,
        dist_normal,
        verdict,
        uniform_fit: (a, b),
        normal_fit: (mu, sd),
        bandwidth: curve.bandwidth,
    })
}

/// CSV `grid,density,uniform_pdf,normal_pdf` with the KDE and both fitted laws.
pub fn kde_to_csv(samples: &[f64], points: usize) -> Result<String> {
    let curve = kde_extended(samples, points)?;
    let (a, b) = min_max(samples);
    let mu = mean(samples);
    let sd = sample_variance(samples)?.sqrt();
    let mut out = String::from("grid,density,uniform_pdf,normal_pdf\n");
    for (&g, &d) in curve.grid.iter().zip(&curve.density) {
        out.push_str(&format!(
            "{g},{d},{},{}\n",
            uniform_pdf(g, a, b)?,
            normal_pdf(g, mu, sd)?
        ));
    }
    Ok(out)
}
