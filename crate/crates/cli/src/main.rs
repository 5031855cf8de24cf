//! `fishtank`: experiments and sketch files from the command line.
//!
//! CSV goes to `--out` when given and to stdout otherwise; human-readable
//! summaries go to stderr.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fishtank_core::estimate::{AlphaTable, Method};
use fishtank_core::fishmonger::{FishmongerParams, FishmongerSketch};
use fishtank_core::harness::audit::{run_fishmonger_audit, AuditConfig};
use fishtank_core::harness::hbb::{parse_target, run_hbb_demo};
use fishtank_core::harness::merge::{merge_files, SketchFile};
use fishtank_core::harness::stats::{peak_to_trough, windowed_medians};
use fishtank_core::harness::study::{
    octave_grid, run_error_study_raw, state_bits, StudyMode, TrialConfig, TrialResult,
};
use fishtank_core::harness::write_long_csv;
use fishtank_core::info::{fish_ll, fish_pcsa, h0, i0, ll_curves, pcsa_curves, verify_lemmas};
use fishtank_core::sketch::{AnySketch, LlModel, OffsetMode, SketchKind, SketchParams};
use fishtank_core::OracleSeed;

#[derive(Parser, Debug)]
#[command(name = "fishtank", version, about = "Cardinality sketch experiments")]
struct Cli {
    /// Root seed; every run with the same seed is reproducible.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trials per point. Each subcommand has its own default.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Insert a Poisson(1) number of copies of every element.
    #[arg(long, global = true)]
    poissonize: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropy, Fisher information and Fish numbers.
    Info(InfoArgs),
    /// Monte-Carlo error study over a list of cardinalities.
    Simulate(SimulateArgs),
    /// Space and accuracy audit of the compressed sketch.
    Fishmonger(FishmongerArgs),
    /// HyperBitBit on the two adversarial sequences.
    Hbb(HbbArgs),
    /// Union of sketch files.
    Merge(MergeArgs),
    /// Build a sketch from newline-delimited elements.
    Sketch(SketchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Pcsa,
    Ll,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, value_enum, default_value_t = Family::Pcsa)]
    sketch: Family,
    /// `lo:hi:steps`, a geometric grid of cardinalities.
    #[arg(long)]
    curve: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// pcsa, ll, martingale-pcsa or martingale-ll.
    #[arg(long, default_value = "ll")]
    sketch: SketchKind,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 64)]
    m: u32,
    /// none, uniform or random.
    #[arg(long, default_value = "uniform")]
    offsets: OffsetMode,
    /// Comma-separated cardinalities.
    #[arg(long, value_delimiter = ',', conflicts_with = "octaves")]
    lambdas: Vec<f64>,
    /// `lo:hi:per_octave` in log2 units, e.g. `16:24:4`.
    #[arg(long)]
    octaves: Option<String>,
    /// mle, harmonic, geometric or martingale. Defaults by sketch kind.
    #[arg(long)]
    estimator: Option<Method>,
    /// LogLog estimator constant; calibrated when absent.
    #[arg(long)]
    constant: Option<f64>,
    /// CSV cache of calibrated harmonic constants, read and updated.
    #[arg(long)]
    alpha_file: Option<PathBuf>,
    /// Draw each state from its exact law instead of streaming elements.
    #[arg(long)]
    sampled: bool,
    /// Report the peak-to-trough of medians pooled over this many points.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug)]
struct FishmongerArgs {
    #[arg(long, default_value_t = 1024)]
    m: u32,
    #[arg(long, default_value_t = 1_000_000)]
    lambda_max: u64,
    #[arg(long, default_value_t = FishmongerParams::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = FishmongerParams::DEFAULT_U_BITS)]
    u_bits: u32,
    /// Check the exact size after every change.
    #[arg(long)]
    eager: bool,
}

#[derive(Args, Debug)]
struct HbbArgs {
    #[arg(long, default_value_t = 400_000)]
    lambda: u64,
    /// Stop each run at a state, e.g. `L=12,HW=31`; `--lambda` caps the run.
    #[arg(long)]
    until: Option<String>,
    /// Histogram bins of `lambda_hat / lambda` over `[0, 3)`.
    #[arg(long, default_value_t = 40)]
    bins: usize,
}

#[derive(Args, Debug)]
struct MergeArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FileKind {
    Pcsa,
    Ll,
    MartingalePcsa,
    MartingaleLl,
    Fishmonger,
}

#[derive(Args, Debug)]
struct SketchArgs {
    #[arg(long, value_enum, default_value_t = FileKind::Ll)]
    kind: FileKind,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 64)]
    m: u32,
    #[arg(long, default_value = "uniform")]
    offsets: OffsetMode,
    /// Element file; stdin when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Info(a) => info(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::Fishmonger(a) => fishmonger(&cli, a),
        Command::Hbb(a) => hbb(&cli, a),
        Command::Merge(a) => merge(a),
        Command::Sketch(a) => sketch(&cli, a),
    }
}

fn csv_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(cli: &Cli, key: &str, rows: Vec<(f64, String, f64)>) -> Result<()> {
    write_long_csv(csv_sink(&cli.out)?, key, rows)?;
    Ok(())
}

/// Parses `a:b:n` into two reals and a count.
fn parse_range(s: &str) -> Result<(f64, f64, u32)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("expected lo:hi:n, got `{s}`");
    }
    let lo: f64 = parts[0].parse().context("bad lower end")?;
    let hi: f64 = parts[1].parse().context("bad upper end")?;
    let n: u32 = parts[2].parse().context("bad count")?;
    if lo.is_nan() || hi.is_nan() || lo >= hi || n == 0 {
        bail!("expected lo < hi and n > 0, got `{s}`");
    }
    Ok((lo, hi, n))
}

fn info(cli: &Cli, a: &InfoArgs) -> Result<()> {
    let curve = match a.sketch {
        Family::Pcsa => pcsa_curves,
        Family::Ll => ll_curves,
    };
    if let Some(range) = &a.curve {
        let (lo, hi, steps) = parse_range(range)?;
        if lo <= 0.0 || steps < 2 {
            bail!("curve needs a positive lower end and at least 2 steps");
        }
        let mut rows = Vec::new();
        for k in 0..steps {
            let lambda = lo * (hi / lo).powf(k as f64 / (steps - 1) as f64);
            let p = curve(a.q, lambda)?;
            rows.push((lambda, "entropy_bits".into(), p.entropy_bits));
            rows.push((lambda, "norm_info".into(), p.norm_info));
        }
        return emit(cli, "lambda", rows);
    }
    let report = match a.sketch {
        Family::Pcsa => fish_pcsa(a.q)?,
        Family::Ll => fish_ll(a.q)?,
    };
    let lemmas = verify_lemmas();
    eprintln!(
        "H0 = {:.12}  I0 = {:.12}  H0/I0 = {:.6}",
        h0(),
        i0(),
        h0() / i0()
    );
    eprintln!(
        "lemma checks: {} (integral error {:.1e})",
        if lemmas.passed(1e-8) { "ok" } else { "FAILED" },
        lemmas.integral_error()
    );
    emit(
        cli,
        "q",
        vec![
            (a.q, "h_avg".into(), report.h_avg),
            (a.q, "i_avg".into(), report.i_avg),
            (a.q, "fish".into(), report.fish),
        ],
    )
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let lambdas = match &a.octaves {
        Some(range) => {
            let (lo, hi, per) = parse_range(range)?;
            octave_grid(lo, hi, per)
        }
        None if a.lambdas.is_empty() => bail!("give --lambdas or --octaves"),
        None => a.lambdas.clone(),
    };
    let mut cfg = TrialConfig::new(a.sketch, a.q, a.m, a.offsets, lambdas);
    cfg.trials = cli.trials.unwrap_or(1000);
    cfg.seed = cli.seed;
    cfg.poissonize = cli.poissonize;
    cfg.constant = a.constant;
    if let Some(e) = a.estimator {
        cfg.estimator = e;
    }
    if a.sampled {
        cfg.mode = StudyMode::Sampled;
    }
    if let (Some(path), None, Method::Harmonic) = (&a.alpha_file, cfg.constant, cfg.estimator) {
        let mut table = AlphaTable::load(path)?;
        let model = LlModel::new(cfg.params()?, &OracleSeed::new(cfg.seed))?;
        cfg.constant = Some(table.get_or_calibrate(&model, cfg.seed));
        table.save(path)?;
    }
    let raw = run_error_study_raw(&cfg)?;
    let bits = state_bits(cfg.kind, &cfg.params()?) as f64;
    let mut rows = Vec::new();
    for (&lambda, ratios) in cfg.lambdas.iter().zip(&raw) {
        let r = TrialResult::from_ratios(lambda, ratios, bits);
        rows.extend(r.statistics().into_iter().map(|(s, v)| (lambda, s, v)));
    }
    if let Some(w) = a.window {
        let medians = windowed_medians(&raw, w);
        if medians.is_empty() {
            bail!("window {w} is longer than the grid");
        }
        eprintln!(
            "windowed median peak-to-trough: {:.4}",
            peak_to_trough(&medians)
        );
    }
    emit(cli, "lambda", rows)
}

fn fishmonger(cli: &Cli, a: &FishmongerArgs) -> Result<()> {
    let cfg = AuditConfig {
        params: FishmongerParams::with(a.m, a.u_bits, a.delta)?,
        lambda_max: a.lambda_max,
        trials: cli.trials.unwrap_or(100),
        seed: cli.seed,
        eager: a.eager,
    };
    let r = run_fishmonger_audit(&cfg)?;
    eprintln!(
        "m={} trials={} budget={} bits (+{} header), max size {} bits, within budget: {}, reverts: {}",
        r.m, r.trials, r.budget_bits, r.header_bits, r.max_size_bits, r.within_budget, r.reverts
    );
    eprintln!(
        "std error {:.6} (sqrt m * err = {:.5}), payload {:.4} bits/row",
        r.std_error,
        r.std_error * (r.m as f64).sqrt(),
        r.payload_bits_per_row
    );
    let mut rows = Vec::new();
    for c in &r.checkpoints {
        let l = c.lambda as f64;
        rows.push((l, "mean_payload_bits".into(), c.mean_payload_bits));
        rows.push((l, "max_size_bits".into(), c.max_size_bits as f64));
    }
    let l = r.lambda_max as f64;
    for (name, v) in [
        ("std_error", r.std_error),
        ("mean_ratio", r.mean_ratio),
        ("payload_bits_per_row", r.payload_bits_per_row),
        ("bits_times_variance", r.bits_times_variance),
        ("budget_bits", r.budget_bits as f64),
        ("max_size_bits", r.max_size_bits as f64),
        ("reverts", r.reverts as f64),
    ] {
        rows.push((l, name.into(), v));
    }
    emit(cli, "lambda", rows)
}

fn hbb(cli: &Cli, a: &HbbArgs) -> Result<()> {
    let target = a.until.as_deref().map(parse_target).transpose()?;
    if a.bins == 0 {
        bail!("--bins must be positive");
    }
    let r = run_hbb_demo(a.lambda, cli.trials.unwrap_or(2000), cli.seed, target)?;
    eprintln!(
        "lambda={} trials={}: hi >= 1.2 lambda in {:.2}%, lo <= 0.8 lambda in {:.2}%, KS on L {:.3}",
        r.lambda,
        r.trials,
        100.0 * r.hi_fraction_high,
        100.0 * r.lo_fraction_low,
        r.ks_levels
    );
    if target.is_some() {
        let show = |v: Option<f64>| v.map_or("never".to_string(), |x| format!("{x:.0}"));
        eprintln!(
            "mean cardinality at the target: hi {}, lo {}",
            show(r.hi.mean_reached()),
            show(r.lo.mean_reached())
        );
    }
    let mut rows = Vec::new();
    for (start, hi, lo) in r.histogram(0.0, 3.0, a.bins) {
        rows.push((start, "hi".into(), hi as f64));
        rows.push((start, "lo".into(), lo as f64));
    }
    emit(cli, "ratio_bin", rows)
}

fn merge(a: &MergeArgs) -> Result<()> {
    let merged = merge_files(&a.files)?;
    write_file(&a.output, &merged.to_bytes())?;
    eprintln!("estimate {:.3}", file_estimate(&merged));
    Ok(())
}

fn file_estimate(f: &SketchFile) -> f64 {
    match f {
        SketchFile::Plain(s) => s.estimate().lambda_hat,
        SketchFile::Fishmonger(s) => s.estimate().lambda_hat,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn sketch(cli: &Cli, a: &SketchArgs) -> Result<()> {
    let mut file = match a.kind {
        FileKind::Fishmonger => {
            if cli.poissonize {
                bail!("--poissonize does not apply to fishmonger sketches");
            }
            SketchFile::Fishmonger(FishmongerSketch::new(
                FishmongerParams::new(a.m)?,
                cli.seed,
            )?)
        }
        kind => {
            let kind = match kind {
                FileKind::Pcsa => SketchKind::Pcsa,
                FileKind::Ll => SketchKind::Ll,
                FileKind::MartingalePcsa => SketchKind::MartingalePcsa,
                _ => SketchKind::MartingaleLl,
            };
            let params = SketchParams::new(a.q, a.m, a.offsets)?;
            SketchFile::Plain(AnySketch::new(kind, params, cli.seed)?)
        }
    };
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(io::BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut lines = 0u64;
    for line in reader.lines() {
        let id = xxhash_rust::xxh3::xxh3_64(line?.as_bytes());
        match &mut file {
            SketchFile::Plain(s) if cli.poissonize => {
                s.insert_poissonized(id);
            }
            SketchFile::Plain(s) => {
                s.insert(id);
            }
            SketchFile::Fishmonger(s) => {
                s.insert(id);
            }
        }
        lines += 1;
    }
    write_file(&a.output, &file.to_bytes())?;
    println!("{:.3}", file_estimate(&file));
    eprintln!("{lines} lines");
    Ok(())
}
