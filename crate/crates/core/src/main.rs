use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use envdiag::calibrate::{build_table_with_progress, CalibrationConfig, ThresholdTable};
use envdiag::classify::{classify_signal, summary_table, ClassificationReport, ClassifyConfig, RescaleMode};
use envdiag::envspec::{envelope_spectrum, SpectrumConfig, Window};
use envdiag::faultfreq::{estimate_fault_frequency, estimates_to_csv, estimate_per_segment, EstimatorConfig};
use envdiag::io::{read_signal, write_signal, SegmentTruth, Sidecar, SignalFormat};
use envdiag::sigmodel::{
    derive_seed, simulate_signal, FrequencyDistribution, PulseParams, Signal, SignalModel, ACI_GRID,
    DEFAULT_FS, SEGMENT_LENGTHS,
};
use envdiag::stats::{kde_to_csv, shape_distance, ShapeVerdict};
use envdiag::{io, Error};

#[derive(Parser)]
#[command(
    name = "envdiag",
    version,
    about = "Detect fault-frequency variation in vibration envelope spectra",
    args_override_self = true
)]
struct Cli {
    /// JSON file of default flag values, e.g. {"fs": 10000, "seg-len": [1, 2]}.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a record of independent segments with ground truth.
    Simulate(SimulateArgs),
    /// Build a threshold table from constant-frequency simulations.
    Calibrate(CalibrateArgs),
    /// Decide whether a recorded fault frequency is constant.
    Classify(ClassifyArgs),
    /// Envelope spectrum of a record (optionally with the fault-frequency estimate).
    Spectrum(SpectrumArgs),
    /// Kernel density of a list of estimates, with fitted uniform and normal laws.
    Kde(KdeArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Signal file (one sample per line CSV, or raw little-endian f64).
    #[arg(long, short)]
    input: PathBuf,
    /// csv or raw-f64le; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<SignalFormat>,
    /// Sample rate in Hz; overrides the sidecar.
    #[arg(long)]
    fs: Option<f64>,
}

impl InputArgs {
    fn load(&self) -> Result<Signal, CliError> {
        if !self.input.exists() {
            return Err(CliError::Usage(format!("input file {} does not exist", self.input.display())));
        }
        let format = self.format.unwrap_or_else(|| SignalFormat::from_path(&self.input));
        let loaded = read_signal(&self.input, format, self.fs)?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        Ok(loaded.signal)
    }
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// hann, hamming or rectangular.
    #[arg(long, default_value = "hann")]
    window: Window,
    #[arg(long, default_value_t = 4)]
    zero_pad: usize,
    #[arg(long, default_value_t = 1)]
    welch_segments: usize,
    #[arg(long, default_value_t = 0.5)]
    welch_overlap: f64,
    #[arg(long, default_value_t = 3)]
    harmonics: usize,
    /// Half-width of each harmonic search window as a fraction of its centre.
    #[arg(long, default_value_t = EstimatorConfig::new(30.0).search_frac)]
    search_frac: f64,
    #[arg(long, default_value_t = 2)]
    peak_excl: usize,
    /// Refine peaks by parabolic interpolation.
    #[arg(long)]
    interpolate: bool,
}

impl AnalysisArgs {
    fn spectrum(&self, band: Option<(f64, f64)>) -> SpectrumConfig {
        SpectrumConfig {
            bandpass: band,
            window: self.window,
            zero_pad_factor: self.zero_pad,
            welch_segments: self.welch_segments,
            welch_overlap: self.welch_overlap,
        }
    }

    fn estimator(&self, f_theoretical: f64) -> EstimatorConfig {
        EstimatorConfig {
            f_theoretical,
            n_harmonics: self.harmonics,
            search_frac: self.search_frac,
            peak_excl_bins: self.peak_excl,
            interpolate: self.interpolate,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// constant:F, uniform:A,B or normal:MEAN,STD (Hz).
    #[arg(long, default_value = "constant:30")]
    dist: FrequencyDistribution,
    #[arg(long, default_value_t = 3.0)]
    aci: f64,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 1.0)]
    seg_len: f64,
    #[arg(long, default_value_t = 100)]
    n_segments: usize,
    #[arg(long, default_value_t = DEFAULT_FS)]
    fs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output signal path; the sidecar goes to <out>.json.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    format: Option<SignalFormat>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Simulated records per cell.
    #[arg(long, default_value_t = envdiag::calibrate::DEFAULT_BATCH)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_FS)]
    fs: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = ACI_GRID)]
    aci: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = SEGMENT_LENGTHS)]
    seg_len: Vec<f64>,
    /// Table JSON output path.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the table as an ACI x segment-length CSV matrix.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Threshold table from `calibrate`.
    #[arg(long)]
    table: PathBuf,
    /// Expected fault frequency of the machine in Hz.
    #[arg(long, default_value_t = 30.0)]
    f_theoretical: f64,
    /// Segment lengths in seconds; defaults to every length in the table.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seg_len: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Band-pass LO,HI in Hz; defaults to the table's band. "none" disables it.
    #[arg(long)]
    band: Option<String>,
    /// Multiply the variance by (f_real / f_simul)^2 instead of its inverse.
    #[arg(long)]
    literal_rescale: bool,
    /// JSON report path; the text summary always goes to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Directory for per-segment spectrum and estimate CSVs.
    #[arg(long, value_name = "DIR")]
    emit_spectra: Option<PathBuf>,
    /// Directory for per-length KDE CSVs.
    #[arg(long, value_name = "DIR")]
    emit_kde: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Band-pass LO,HI in Hz.
    #[arg(long)]
    band: Option<String>,
    /// Analyse only this segment length starting at --segment.
    #[arg(long)]
    seg_len: Option<f64>,
    #[arg(long, default_value_t = 0)]
    segment: usize,
    /// Print the fault-frequency estimate around this frequency.
    #[arg(long)]
    f_theoretical: Option<f64>,
    /// Spectrum CSV path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Args)]
struct KdeArgs {
    /// Estimates: one value per line, or an estimates CSV with an f_hat_hz column.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 512)]
    points: usize,
    /// KDE CSV path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Analysis(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) | Error::Parse(_) => CliError::Usage(e.to_string()),
            other => CliError::Analysis(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn parse_band(text: Option<&str>, fallback: Option<(f64, f64)>) -> Result<Option<(f64, f64)>, CliError> {
    let Some(text) = text else { return Ok(fallback) };
    if text.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi] => match (lo.parse(), hi.parse()) {
            (Ok(lo), Ok(hi)) => Ok(Some((lo, hi))),
            _ => Err(CliError::Usage(format!("cannot parse band '{text}'"))),
        },
        _ => Err(CliError::Usage(format!("band must be LO,HI, got '{text}'"))),
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.n_segments == 0 {
        return Err(CliError::Usage("--n-segments must be at least 1".into()));
    }
    let pulse = PulseParams::with_aci(args.aci);
    let model = SignalModel::new(args.seg_len, args.fs, args.dist, pulse);
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut samples = Vec::with_capacity(model.n_samples() * args.n_segments);
    let mut segments = Vec::with_capacity(args.n_segments);
    for i in 0..args.n_segments {
        let sim = simulate_signal(&model, derive_seed(args.seed, i as u64))?;
        segments.push(SegmentTruth {
            index: i,
            t_start_s: samples.len() as f64 / args.fs,
            f_true: sim.f_true,
        });
        samples.extend_from_slice(sim.signal.samples());
    }
    let signal = Signal::new(samples, args.fs)?;
    let sidecar = Sidecar {
        fs: args.fs,
        n: signal.len(),
        seed: Some(args.seed),
        dist: Some(args.dist),
        pulse: Some(pulse),
        seg_len_s: Some(args.seg_len),
        segments,
    };
    let format = args.format.unwrap_or_else(|| SignalFormat::from_path(&args.out));
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_signal(&args.out, format, &signal, &sidecar)?;
    eprintln!(
        "wrote {} samples ({} segments of {} s) to {}",
        signal.len(),
        args.n_segments,
        args.seg_len,
        args.out.display()
    );
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let base = CalibrationConfig::default().with_fs(args.fs);
    let cfg = CalibrationConfig {
        spectrum: args.analysis.spectrum(base.spectrum.bandpass),
        estimator: args.analysis.estimator(base.f_simul),
        n_signals: args.n,
        master_seed: args.seed,
        ..base
    };
    let total = args.aci.len() * args.seg_len.len();
    let mut done = 0;
    let table = build_table_with_progress(&args.aci, &args.seg_len, &cfg, |e| {
        done += 1;
        eprintln!(
            "[{done}/{total}] aci {} seg {} s: threshold {:.6} Hz^2, mean snr {:.3}",
            e.aci, e.seg_len_s, e.threshold, e.mean_snr
        );
    })?;
    write_out(&args.out, &(table.to_json()? + "\n"))?;
    if let Some(csv) = &args.csv {
        write_out(csv, &table.to_csv())?;
    }
    print!("{}", table.to_csv());
    Ok(())
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    input: String,
    fs: f64,
    n_samples: usize,
    table: String,
    f_theoretical: f64,
    alpha: f64,
    band: Option<(f64, f64)>,
    rescale: RescaleMode,
    reports: &'a [ClassificationReport],
}

fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let signal = args.input.load()?;
    if !args.table.exists() {
        return Err(CliError::Usage(format!("table file {} does not exist", args.table.display())));
    }
    let table = ThresholdTable::from_json(&fs::read_to_string(&args.table)?)?;
    let band = parse_band(args.band.as_deref(), table.meta.spectrum.bandpass)?;
    let seg_lens = if args.seg_len.is_empty() {
        table.seg_lengths()
    } else {
        args.seg_len.clone()
    };
    let rescale = if args.literal_rescale {
        RescaleMode::Literal
    } else {
        RescaleMode::Normalized
    };

    let mut reports = Vec::new();
    for &seg in &seg_lens {
        let mut cfg = ClassifyConfig::from_table(&table, args.f_theoretical, seg, band);
        cfg.alpha = args.alpha;
        cfg.rescale = rescale;
        let report = classify_signal(&signal, &cfg, &table)?;
        for w in &report.warnings {
            eprintln!("warning ({seg} s): {w}");
        }
        if let Some(dir) = &args.emit_spectra {
            emit_spectra(dir, &signal, &cfg)?;
        }
        if let Some(dir) = &args.emit_kde {
            match kde_to_csv(&report.estimates, 512) {
                Ok(csv) => write_out(&dir.join(format!("kde_{seg}s.csv")), &csv)?,
                Err(e) => eprintln!("warning ({seg} s): no KDE written: {e}"),
            }
        }
        reports.push(report);
    }

    print!("{}", summary_table(&reports));
    if let Some(out) = &args.out {
        let doc = ClassifyOutput {
            input: args.input.input.display().to_string(),
            fs: signal.fs(),
            n_samples: signal.len(),
            table: args.table.display().to_string(),
            f_theoretical: args.f_theoretical,
            alpha: args.alpha,
            band,
            rescale,
            reports: &reports,
        };
        write_out(out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(())
}

fn emit_spectra(dir: &Path, signal: &Signal, cfg: &ClassifyConfig) -> Result<(), CliError> {
    let estimates = match estimate_per_segment(signal, cfg.seg_len, &cfg.spectrum, &cfg.estimator) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("warning ({} s): estimates CSV skipped: {e}", cfg.seg_len);
            Vec::new()
        }
    };
    if !estimates.is_empty() {
        write_out(&dir.join(format!("estimates_{}s.csv", cfg.seg_len)), &estimates_to_csv(&estimates))?;
    }
    let seg_n = envdiag::faultfreq::segment_samples(signal.fs(), cfg.seg_len)?;
    for i in 0..signal.len() / seg_n {
        let seg = Signal::new(signal.samples()[i * seg_n..(i + 1) * seg_n].to_vec(), signal.fs())?;
        let spec = envelope_spectrum(&seg, &cfg.spectrum)?;
        write_out(&dir.join(format!("spectrum_{}s_{i:04}.csv", cfg.seg_len)), &spec.to_csv())?;
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let mut signal = args.input.load()?;
    if let Some(seg_len) = args.seg_len {
        let seg_n = envdiag::faultfreq::segment_samples(signal.fs(), seg_len)?;
        let start = args.segment * seg_n;
        if start + seg_n > signal.len() {
            return Err(CliError::Analysis(Error::TooShort(format!(
                "segment {} of {seg_len} s lies beyond the end of the record",
                args.segment
            ))));
        }
        signal = Signal::new(signal.samples()[start..start + seg_n].to_vec(), signal.fs())?;
    }
    let band = parse_band(args.band.as_deref(), None)?;
    let cfg = args.analysis.spectrum(band);
    let spec = envelope_spectrum(&signal, &cfg)?;
    match &args.out {
        Some(p) => write_out(p, &spec.to_csv())?,
        None => print!("{}", spec.to_csv()),
    }
    if let Some(f) = args.f_theoretical {
        let est = estimate_fault_frequency(&spec, &args.analysis.estimator(f))?;
        let peaks: Vec<String> = est.peaks.iter().map(|p| format!("{:.4}", p.freq)).collect();
        eprintln!("f_hat {:.4} Hz, snr {:.4}, peaks [{}]", est.f_hat, est.snr, peaks.join(", "));
    }
    Ok(())
}

fn read_estimates(path: &Path) -> Result<Vec<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
    }
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    let Some(col) = first.split(',').position(|h| h.trim() == "f_hat_hz") else {
        return Ok(io::parse_csv_samples(&text)?);
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(col).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Usage(format!("line {}: cannot parse '{field}' as a number", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn kde(args: KdeArgs) -> Result<(), CliError> {
    let estimates = read_estimates(&args.input)?;
    let csv = kde_to_csv(&estimates, args.points)?;
    match &args.out {
        Some(p) => write_out(p, &csv)?,
        None => print!("{csv}"),
    }
    match shape_distance(&estimates) {
        Ok(s) => {
            let verdict = match s.verdict {
                ShapeVerdict::Uniform => "uniform",
                ShapeVerdict::Normal => "normal",
                ShapeVerdict::Inconclusive => "inconclusive",
            };
            eprintln!(
                "shape {verdict}: L2 to uniform {:.5}, to normal {:.5}, bandwidth {:.5}",
                s.dist_uniform, s.dist_normal, s.bandwidth
            );
        }
        Err(e) => eprintln!("shape comparison skipped: {e}"),
    }
    Ok(())
}

/// Turn a JSON config object into flags inserted right after the subcommand,
/// so explicit flags later on the command line override them.
fn config_flags(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let Value::Object(map) = serde_json::from_str::<Value>(&text)? else {
        return Err(CliError::Usage("config file must hold a JSON object".into()));
    };
    let scalar = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(CliError::Usage(format!("unsupported config value {other}"))),
    };
    let mut flags = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Result<Vec<String>, _> = items.iter().map(scalar).collect();
                flags.push(flag);
                flags.push(parts?.join(","));
            }
            other => {
                flags.push(flag);
                flags.push(scalar(&other)?);
            }
        }
    }
    Ok(flags)
}

fn with_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| CliError::Usage("--config needs a file".into()))?,
    };
    let flags = config_flags(Path::new(&path))?;
    let sub = args
        .iter()
        .position(|a| ["simulate", "calibrate", "classify", "spectrum", "kde"].contains(&a.as_str()));
    let mut out = args.clone();
    if let Some(sub) = sub {
        out.splice(sub + 1..sub + 1, flags);
    }
    Ok(out)
}

fn init_threads() {
    if let Some(n) = std::env::var("ENVDIAG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run() -> Result<(), CliError> {
    let args = with_config(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    init_threads();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Classify(a) => classify(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Kde(a) => kde(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Analysis(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
