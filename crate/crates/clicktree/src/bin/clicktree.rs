//! `clicktree` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 oracle check
//! failed.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use clicktree::config::ConfigMap;
use clicktree::core::estimator::{
    aggregate_and_classify, analyze, AnalysisOptions, EstimateReport, UncertaintyMethod, Weighting,
    DEFAULT_BOOTSTRAP_REPLICATES, DEFAULT_K_SIGMA,
};
use clicktree::core::ingest::{calibrate_t0, ingest, period_ps, window_ps, IngestDiagnostics, WindowingPolicy};
use clicktree::core::oracle::{equivalence_suite, EquivalenceLimits, DEFAULT_ENUMERATION_LIMIT};
use clicktree::core::{ChannelMask, CountSummary};
use clicktree::formats::{self, counts, estimates, stream, InputKind};
use clicktree::manifest::{manifest_path, RunManifest};
use clicktree::report::{render_text, ReportJson};
use clicktree::sweep::{self, SweepAxis};
use clicktree::{parallel, Error};

#[derive(Parser)]
#[command(
    name = "clicktree",
    version,
    about = "Detector-tree photon statistics: simulate, analyze, sweep, oracle-check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate pulses and write a count summary (and optionally a time-tag stream).
    Simulate(SimulateArgs),
    /// Estimate θ and g from counts, a time-tag stream or precomputed estimates.
    Analyze(AnalyzeArgs),
    /// Tabulate model and simulated θ(2), g(2) along one parameter axis.
    Sweep(SweepArgs),
    /// Compare closed-form tree probabilities against exhaustive enumeration.
    OracleCheck(OracleArgs),
}

/// Model configuration. Flags override values from `--config`.
#[derive(Args, Default)]
struct ModelArgs {
    /// `key = value` config file; run manifests are accepted too.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    emitters: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// Comma-separated per-emitter efficiencies.
    #[arg(long)]
    eta_per_emitter: Option<String>,
    /// Background photons per pulse.
    #[arg(long)]
    lambda: Option<String>,
    /// Detected background rate in counts/s (alternative to --lambda).
    #[arg(long)]
    noise_rate_cps: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    /// One efficiency for all channels, or a comma-separated list.
    #[arg(long)]
    xi: Option<String>,
    /// Comma-separated splitting weights.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    pulses: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    rep_rate_hz: Option<String>,
    #[arg(long)]
    window_ns: Option<String>,
    #[arg(long)]
    t0_ps: Option<String>,
    /// Any config key as KEY=VALUE; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ModelArgs {
    fn resolve(&self) -> anyhow::Result<clicktree::config::RunConfig> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::new(),
        };
        let mut flags = ConfigMap::new();
        for item in &self.set {
            let (k, v) = item.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            flags.set(k.trim(), v.trim())?;
        }
        let named = [
            ("emitters", &self.emitters),
            ("eta", &self.eta),
            ("eta_per_emitter", &self.eta_per_emitter),
            ("lambda", &self.lambda),
            ("noise_rate_cps", &self.noise_rate_cps),
            ("channels", &self.channels),
            ("xi", &self.xi),
            ("weights", &self.weights),
            ("pulses", &self.pulses),
            ("seed", &self.seed),
            ("rep_rate_hz", &self.rep_rate_hz),
            ("window_ns", &self.window_ns),
            ("t0_ps", &self.t0_ps),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        map.merge(&flags);
        Ok(map.resolve()?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UncertaintyArg {
    Bootstrap,
    Propagation,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Unweighted,
    InverseVariance,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, default_value_t = DEFAULT_K_SIGMA)]
    k_sigma: f64,
    #[arg(long, value_enum, default_value = "bootstrap")]
    uncertainty: UncertaintyArg,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    bootstrap_seed: u64,
    #[arg(long, value_enum, default_value = "unweighted")]
    weighting: WeightingArg,
}

impl EstimatorArgs {
    fn options(&self) -> anyhow::Result<AnalysisOptions> {
        if !(self.k_sigma > 0.0 && self.k_sigma.is_finite()) {
            bail!("--k-sigma must be finite and > 0");
        }
        Ok(AnalysisOptions {
            k_sigma: self.k_sigma,
            uncertainty: match self.uncertainty {
                UncertaintyArg::Propagation => UncertaintyMethod::Propagation,
                UncertaintyArg::Bootstrap => {
                    UncertaintyMethod::Bootstrap { replicates: self.replicates, seed: self.bootstrap_seed }
                }
            },
            weighting: match self.weighting {
                WeightingArg::Unweighted => Weighting::Unweighted,
                WeightingArg::InverseVariance => Weighting::InverseVariance,
            },
        })
    }

    fn record(&self, mut manifest: RunManifest) -> RunManifest {
        let opts = self.options().expect("validated");
        manifest = manifest
            .option("k_sigma", opts.k_sigma)
            .option("weighting", clicktree::report::weighting_name(opts.weighting));
        match opts.uncertainty {
            UncertaintyMethod::Propagation => manifest.option("uncertainty", "propagation"),
            UncertaintyMethod::Bootstrap { replicates, seed } => manifest
                .option("uncertainty", "bootstrap")
                .option("replicates", replicates)
                .option("bootstrap_seed", seed),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Count summary output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the synthetic time-tag stream here.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Write the stream in the binary encoding.
    #[arg(long, requires = "stream")]
    binary: bool,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Counts file, time-tag stream (text or binary) or estimates file.
    input: PathBuf,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the JSON report (with its manifest) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    /// Override the stream's clock origin.
    #[arg(long, conflicts_with = "calibrate_t0")]
    t0_ps: Option<i64>,
    /// Override the stream's window width.
    #[arg(long)]
    window_ns: Option<f64>,
    /// Override the window offset within each period.
    #[arg(long)]
    window_start_ps: Option<u64>,
    /// Scan the clock origin over one period in steps of this many ps and use
    /// the phase that puts the most tags in windows.
    #[arg(long, value_name = "STEP_PS")]
    calibrate_t0: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// lambda, noise-rate, emitters or xi-imbalance
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    values: Vec<f64>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Model columns only; skip simulation.
    #[arg(long)]
    model_only: bool,
    /// CSV output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 6)]
    max_photons: usize,
    #[arg(long, default_value_t = 4)]
    max_channels: usize,
    /// Random trees per channel count.
    #[arg(long, default_value_t = 50)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the coincidence sum without the photon-number exponent (expected to fail).
    #[arg(long)]
    drop_exponent: bool,
}

enum Failure {
    Invalid(anyhow::Error),
    Oracle,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.into())
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let run = args.model.resolve()?;
    let mut config = run.simulation.clone();
    config.emit_stream = args.stream.is_some();

    let counts = match &args.stream {
        Some(path) => {
            let (counts, tags) = parallel::simulate_with_stream(&config)?;
            let encoding = if args.binary { stream::Encoding::Binary } else { stream::Encoding::Text };
            let mut out = create(path)?;
            stream::write(&tags, encoding, &mut out)?;
            out.flush()?;
            counts
        }
        None => parallel::simulate(&config)?,
    };
    let mut out = create(&args.out)?;
    counts::write(&counts, &mut out)?;
    out.flush()?;

    let mut manifest = RunManifest::new("simulate").with_config(&run).output(&args.out);
    if let Some(path) = &args.stream {
        manifest = manifest.output(path).option("stream_encoding", if args.binary { "binary" } else { "text" });
    }
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&args.out))?;
    if let Some(path) = &args.stream {
        manifest.write(&manifest_path(path))?;
    }

    let n = counts.channels();
    println!("trials: {}", counts.n_trials());
    for c in 0..n {
        println!("singles {c}: {}", counts.singles(c));
    }
    for order in 2..=n.min(4) {
        let combos = ChannelMask::combinations(n, order);
        let total: u64 = combos.iter().map(|&m| counts.count(m)).sum();
        println!("order {order}: {} combinations, {total} coincidences", combos.len());
    }
    Ok(())
}

struct Analysis {
    report: EstimateReport,
    diagnostics: Option<IngestDiagnostics>,
    t0_ps: Option<i64>,
}

fn analyze_stream(args: &AnalyzeArgs, reader: impl BufRead, options: &AnalysisOptions) -> anyhow::Result<Analysis> {
    let adjust = |h: &mut clicktree::core::ingest::StreamHeader| {
        if let Some(t0) = args.t0_ps {
            h.t0_ps = t0;
        }
        if let Some(w) = args.window_ns {
            h.window_ns = w;
        }
        if let Some(s) = args.window_start_ps {
            h.window_start_ps = s;
        }
    };
    let (counts, diagnostics, t0) = match args.calibrate_t0 {
        None => {
            let (header, counts, diagnostics) = stream::ingest_reader(reader, adjust)?;
            (counts, diagnostics, header.t0_ps)
        }
        Some(step) => {
            let mut tags = stream::read(reader)?;
            adjust(&mut tags.header);
            let period = period_ps(tags.header.rep_rate_hz)?;
            let window = window_ps(tags.header.window_ns)?;
            let stamps: Vec<u64> = tags.events.iter().map(|t| t.timestamp_ps).collect();
            tags.header.t0_ps = calibrate_t0(&stamps, period, tags.header.window_start_ps, window, step);
            let policy = WindowingPolicy::from_header(&tags.header)?;
            let (counts, diagnostics) = ingest(&tags, policy)?;
            (counts, diagnostics, tags.header.t0_ps)
        }
    };
    Ok(Analysis { report: analyze_counts(&counts, options)?, diagnostics: Some(diagnostics), t0_ps: Some(t0) })
}

fn analyze_counts(counts: &CountSummary, options: &AnalysisOptions) -> anyhow::Result<EstimateReport> {
    if counts.channels() < 2 {
        bail!("analysis needs at least 2 channels");
    }
    Ok(analyze(counts, options)?)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let options = args.estimator.options()?;
    let mut reader = open(&args.input)?;
    let kind = formats::detect(&mut reader).with_context(|| args.input.display().to_string())?;
    let stream_flags = args.t0_ps.is_some()
        || args.window_ns.is_some()
        || args.window_start_ps.is_some()
        || args.calibrate_t0.is_some();
    if stream_flags && !matches!(kind, InputKind::TextStream | InputKind::BinaryStream) {
        return Err(anyhow::anyhow!("window and t0 options apply to time-tag streams only").into());
    }
    let analysis = match kind {
        InputKind::Counts => {
            let counts = counts::read(&mut reader).with_context(|| args.input.display().to_string())?;
            Analysis { report: analyze_counts(&counts, &options)?, diagnostics: None, t0_ps: None }
        }
        InputKind::TextStream | InputKind::BinaryStream => {
            analyze_stream(args, reader, &options).with_context(|| args.input.display().to_string())?
        }
        InputKind::Estimates => {
            let orders = estimates::read(&mut reader).with_context(|| args.input.display().to_string())?;
            let report = aggregate_and_classify(&orders, options.k_sigma, options.weighting);
            Analysis { report, diagnostics: None, t0_ps: None }
        }
    };

    let mut manifest = args.estimator.record(RunManifest::new("analyze")).input(&args.input);
    if let Some(t0) = analysis.t0_ps {
        manifest = manifest.option("t0_ps", t0);
    }
    if let Some(w) = args.window_ns {
        manifest = manifest.option("window_ns", w);
    }
    if let Some(s) = args.window_start_ps {
        manifest = manifest.option("window_start_ps", s);
    }
    if let Some(path) = &args.out {
        manifest = manifest.output(path);
    }
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    let json = ReportJson::new(&analysis.report, analysis.diagnostics, Some(manifest.clone()));
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        out.write_all(json.to_json().as_bytes())?;
        out.flush()?;
        manifest.write(&manifest_path(path))?;
    }
    match args.format {
        OutputFormat::Text => print!("{}", render_text(&analysis.report, analysis.diagnostics.as_ref())),
        OutputFormat::Json => print!("{}", json.to_json()),
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let run = args.model.resolve()?;
    let options = args.estimator.options()?;
    let rows = sweep::run(&run.simulation, args.axis, &args.values, (!args.model_only).then_some(&options))?;
    let csv = sweep::to_csv(args.axis, &rows);
    let values = args.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    let mut manifest = args
        .estimator
        .record(RunManifest::new("sweep").with_config(&run))
        .option("axis", args.axis.name())
        .option("values", values)
        .option("model_only", args.model_only);
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            manifest = manifest.output(path);
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            manifest.write(&manifest_path(path))?;
        }
        None => {
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            for line in manifest.to_text().lines() {
                println!("# {line}");
            }
            print!("{csv}");
        }
    }
    Ok(())
}

fn cmd_oracle_check(args: &OracleArgs) -> Result<(), Failure> {
    if args.max_photons > DEFAULT_ENUMERATION_LIMIT {
        return Err(anyhow::anyhow!(
            "--max-photons {} exceeds the enumeration limit {DEFAULT_ENUMERATION_LIMIT}",
            args.max_photons
        )
        .into());
    }
    if args.max_channels == 0 || args.max_channels > 8 {
        return Err(anyhow::anyhow!("--max-channels must be in 1..=8").into());
    }
    let start = Instant::now();
    let limits = EquivalenceLimits {
        max_photons: args.max_photons,
        max_channels: args.max_channels,
        trees: args.trees,
        seed: args.seed,
        drop_exponent: args.drop_exponent,
        ..EquivalenceLimits::default()
    };
    let report = equivalence_suite(limits).context("oracle suite")?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(
        out,
        "limits: photons <= {}, channels <= {}, {} trees per channel count, seed {}{}",
        limits.max_photons,
        limits.max_channels,
        limits.trees,
        limits.seed,
        if limits.drop_exponent { ", exponent dropped" } else { "" }
    );
    let _ = writeln!(out, "comparisons: {}", report.comparisons);
    let _ = writeln!(out, "max abs deviation: {:e} (tolerance {:e})", report.max_abs_deviation, limits.tolerance);
    if let Some(w) = &report.worst {
        let _ = writeln!(
            out,
            "worst: N={} n={} subset={{{}}} xi={:?} w={:?} enumerated={} closed={}",
            w.channels, w.photons, w.subset, w.xi, w.weights, w.enumerated, w.closed
        );
    }
    let _ = writeln!(out, "time: {:.3} s", start.elapsed().as_secs_f64());
    if report.passed() {
        let _ = writeln!(out, "PASS");
        Ok(())
    } else {
        let _ = writeln!(out, "FAIL");
        Err(Failure::Oracle)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Oracle) => ExitCode::from(2),
    }
}
