//! The `bgs` command line: one subcommand per module capability, config
//! file merging, run manifests and replay.
//!
//! Config files are TOML. Top-level keys apply to every command, and a table
//! named after the subcommand (`[train]`, `[bench.timing]`, ...) applies to
//! that command only. Keys are flag names without the leading dashes;
//! booleans toggle switches and arrays become comma lists. Flags given on the
//! command line win over the file.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{self, EnsembleSpec};
use crate::dataset::{self, GridSpec};
use crate::fnn::{self, Algorithm, NetworkLayout, TrainConfig};
use crate::io::file_sha256;
use crate::lcf::{fit_lorentzian, FitConfig};
use crate::resample::prepare_input;
use crate::spectra::Spectrum;
use crate::trace::{self, AnalysisSetup, FiberProfile, ProfileFile, TraceMeasurement};
use crate::{Error, Result};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bgs", version, about = "BFS retrieval from Brillouin gain spectra")]
#[command(args_override_self = true)]
struct Cli {
    /// TOML file with default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Seed for every random draw of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Where to write the run manifest (default: next to the first output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a training or test dataset.
    GenData(GenDataArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Mean squared error of a model on a dataset.
    Eval(EvalArgs),
    /// Lorentzian fit of one spectrum.
    Fit(FitArgs),
    /// Resample a spectrum to 1 MHz and cut the network window.
    Resample(ResampleArgs),
    /// Simulate a distributed acquisition along a fiber.
    SimulateTrace(SimulateArgs),
    /// Compare both estimators on a before/after trace pair.
    Analyze(AnalyzeArgs),
    /// Accuracy and timing comparisons.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// BFS of one spectrum by the network.
    Infer(InferArgs),
    /// Re-run a manifest and check its output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridChoice {
    Full,
    Reduced,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Full-size grid (385,560 training columns).
    #[arg(long)]
    paper_defaults: bool,
    #[arg(long, value_enum, default_value = "reduced")]
    grid: GridChoice,
    /// Generate the 16 dB test set instead of the training set.
    #[arg(long)]
    test: bool,
    /// Drop the noise (same columns, ideal spectra).
    #[arg(long)]
    ideal: bool,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmChoice {
    Lm,
    Sd,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training dataset.
    #[arg(long, alias = "train")]
    data: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Hidden layer widths, e.g. `20,8`.
    #[arg(long, value_delimiter = ',', default_values_t = [20usize, 8])]
    hidden: Vec<usize>,
    #[arg(long)]
    no_bias: bool,
    #[arg(long, value_enum, default_value = "lm", alias = "algorithm")]
    algo: AlgorithmChoice,
    #[arg(long, default_value_t = 30, alias = "iterations")]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 256)]
    block_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration training log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Fit a constant baseline as well.
    #[arg(long)]
    offset: bool,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "24km")]
    Km24,
    #[value(name = "150km")]
    Km150,
}

impl Preset {
    fn setup(self) -> ProfileFile {
        match self {
            Preset::Km24 => ProfileFile {
                fiber: FiberProfile::botda_24km(),
                scan: crate::resample::ScanConfig::new(1, 200.0).expect("valid scan"),
            },
            Preset::Km150 => ProfileFile {
                fiber: FiberProfile::botda_150km(),
                scan: crate::resample::ScanConfig::new(4, 156.0).expect("valid scan"),
            },
        }
    }
}

#[derive(Debug, Args)]
struct ProfileSource {
    /// Fiber profile and scan settings as TOML.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    profile: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl ProfileSource {
    fn load(&self) -> Result<ProfileFile> {
        match (&self.profile, self.preset) {
            (Some(p), _) => ProfileFile::load(p),
            (None, Some(p)) => Ok(p.setup()),
            (None, None) => Err(Error::Config("need --profile or --preset".into())),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ProfileSource,
    /// Apply the profile's heated segments.
    #[arg(long)]
    heated: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: ProfileSource,
    #[arg(long)]
    before: PathBuf,
    #[arg(long)]
    after: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Length of the unheated stretch used for the uncertainty.
    #[arg(long, default_value_t = 1.0)]
    region_km: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Spectra per curve point.
    #[arg(long, default_value_t = 2000)]
    ensemble: usize,
    /// SNR for the linewidth and step curves.
    #[arg(long, default_value_t = 16.0)]
    snr: f64,
}

#[derive(Debug, Args)]
struct TimingArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_spectra: usize,
    /// Threads for the multi-threaded fitting pass.
    #[arg(long, default_value_t = 16)]
    fit_workers: usize,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// RMSE against SNR, 16..46 dB. CSV: snr_db, rmse_fnn_mhz,
    /// rmse_lcf_mhz, ratio, ensemble_size, failures.
    RmseSnr(CurveArgs),
    /// RMSE against linewidth, 10..60 MHz. CSV: linewidth_mhz, ...
    RmseLinewidth(CurveArgs),
    /// RMSE against scan step, 1..10 MHz. CSV: step_mhz, ...
    RmseStep(CurveArgs),
    /// Wall-clock per scan step. CSV: step_mhz, n_spectra, seconds_lcf_1t,
    /// seconds_lcf_mt, seconds_fnn_1t, ratio_1t, ratio_mt, worker_count,
    /// corpus_sha256.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long = "from")]
    from: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
    /// Holds wall-clock measurements, so replay does not compare it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub volatile: bool,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    /// Arguments after config-file expansion; replay runs these.
    pub resolved_args: Vec<String>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub unix_time: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

fn hash_all(paths: &[PathBuf], volatile: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.clone(),
                sha256: file_sha256(p)?,
                volatile: volatile.contains(p),
            })
        })
        .collect()
}

/// Flag tokens for the TOML values that apply to `path` (subcommand names).
fn config_tokens(table: &toml::Table, path: &[String]) -> Result<Vec<String>> {
    let mut tokens = vec![];
    push_tokens(table, &mut tokens)?;
    let mut t = table;
    for name in path {
        match t.get(name) {
            Some(toml::Value::Table(sub)) => {
                push_tokens(sub, &mut tokens)?;
                t = sub;
            }
            Some(_) => return Err(Error::Config(format!("config key `{name}` must be a table"))),
            None => break,
        }
    }
    Ok(tokens)
}

fn push_tokens(table: &toml::Table, tokens: &mut Vec<String>) -> Result<()> {
    for (k, v) in table {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            toml::Value::Table(_) => {}
            toml::Value::Boolean(true) => tokens.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => tokens.extend([flag, s.clone()]),
            toml::Value::Integer(i) => tokens.extend([flag, i.to_string()]),
            toml::Value::Float(x) => tokens.extend([flag, x.to_string()]),
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|x| match x {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                tokens.extend([flag, parts.join(",")]);
            }
            toml::Value::Datetime(d) => tokens.extend([flag, d.to_string()]),
        }
    }
    Ok(())
}

/// Position right after the subcommand path in `argv` (global flags may
/// sit anywhere).
fn subcommand_path(argv: &[String]) -> (Vec<String>, usize) {
    let cmd = Cli::command();
    let mut node = &cmd;
    let mut path = vec![];
    let mut end = 1;
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if let Some(sub) = node.find_subcommand(a) {
            path.push(a.clone());
            node = sub;
            end = i + 1;
        } else if a.starts_with('-') {
            // skip a flag and, for value-taking globals, its value
            if matches!(a.as_str(), "--config" | "--workers" | "--seed" | "--manifest") {
                i += 1;
            }
        } else if !path.is_empty() {
            break;
        }
        i += 1;
    }
    (path, end)
}

fn find_config(argv: &[String]) -> Option<PathBuf> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--config=").map(PathBuf::from)
        }
    })
}

/// Insert config-file flags right after the subcommand so command-line
/// flags, which come later, override them.
fn resolve_args(argv: &[String]) -> Result<Vec<String>> {
    let Some(cfg) = find_config(argv) else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(&cfg)?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", cfg.display())))?;
    let (path, end) = subcommand_path(argv);
    let tokens = config_tokens(&table, &path)?;
    let mut out = argv[..end].to_vec();
    out.extend(tokens);
    out.extend(argv[end..].iter().cloned());
    Ok(out)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Parse `args` (program name first), run the command and return the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn dispatch_to<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let resolved = match resolve_args(&argv) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let matches = match Cli::command().try_get_matches_from(&resolved) {
        Ok(m) => m,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same command");
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    match run(&cli, &argv, &resolved, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Files a command read and wrote.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    volatile: Vec<PathBuf>,
}

fn run(cli: &Cli, argv: &[String], resolved: &[String], out: &mut dyn Write) -> Result<()> {
    if let Command::Replay(a) = &cli.command {
        return replay(&a.from, out);
    }
    let io = execute(cli, out)?;
    if io.outputs.is_empty() && cli.manifest.is_none() {
        return Ok(());
    }
    let manifest = Manifest {
        tool: "bgs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        resolved_args: resolved.to_vec(),
        seed: cli.seed,
        workers: cli.workers,
        inputs: hash_all(&io.inputs, &[])?,
        outputs: hash_all(&io.outputs, &io.volatile)?,
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let path = match &cli.manifest {
        Some(p) => p.clone(),
        None => manifest_path(&io.outputs[0]),
    };
    manifest.write(&path)
}

/// Default manifest location for a primary output.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn replay(path: &Path, out: &mut dyn Write) -> Result<()> {
    let m = Manifest::load(path)?;
    let cli = Cli::try_parse_from(&m.resolved_args)
        .map_err(|e| Error::Config(format!("manifest arguments no longer parse: {e}")))?;
    for f in &m.inputs {
        let now = file_sha256(&f.path)?;
        if now != f.sha256 {
            return Err(Error::domain(format!("input {} changed since the run", f.path.display())));
        }
    }
    let mut sink = Vec::new();
    execute(&cli, &mut sink)?;
    for f in m.outputs.iter().filter(|f| !f.volatile) {
        let now = file_sha256(&f.path)?;
        if now != f.sha256 {
            return Err(Error::domain(format!(
                "replayed output {} differs: {} vs {}",
                f.path.display(),
                now,
                f.sha256
            )));
        }
        writeln!(out, "{} ok", f.path.display())?;
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Io> {
    let workers = cli.workers.max(1);
    let mut io = Io::default();
    match &cli.command {
        Command::GenData(a) => {
            let full = a.paper_defaults || matches!(a.grid, GridChoice::Full);
            let mut spec = match (full, a.test) {
                (true, false) => GridSpec::full(),
                (true, true) => GridSpec::full_test(),
                (false, false) => GridSpec::reduced(),
                (false, true) => GridSpec::reduced_test(),
            };
            let training_seed = match (a.test, full) {
                (false, _) => cli.seed.unwrap_or(spec.base_seed),
                (true, true) => GridSpec::full().base_seed,
                (true, false) => GridSpec::reduced().base_seed,
            };
            if let Some(r) = a.realizations {
                spec.realizations_per_snr = r;
            }
            if a.ideal {
                spec = spec.ideal();
            }
            let d = if a.test {
                if let Some(s) = cli.seed {
                    spec.base_seed = s;
                }
                dataset::generate_test_set_par(&spec, training_seed, workers)?
            } else {
                spec.base_seed = training_seed;
                dataset::generate_training_set_par(&spec, workers)?
            };
            dataset::save_dataset(&d, &a.out)?;
            writeln!(out, "{} columns x {} rows -> {}", d.len(), d.rows(), a.out.display())?;
            io.outputs.push(a.out.clone());
        }
        Command::Train(a) => {
            let train = dataset::load_dataset(&a.data)?;
            io.inputs.push(a.data.clone());
            let test = match &a.test {
                Some(p) => {
                    io.inputs.push(p.clone());
                    Some(dataset::load_dataset(p)?)
                }
                None => None,
            };
            let mut sizes = vec![train.rows()];
            sizes.extend(&a.hidden);
            sizes.push(1);
            let mut layout = NetworkLayout::new(&sizes)?;
            if a.no_bias {
                layout = layout.without_bias();
            }
            let seed = cli.seed.unwrap_or(1);
            let cfg = TrainConfig {
                algorithm: match a.algo {
                    AlgorithmChoice::Lm => Algorithm::LevenbergMarquardt,
                    AlgorithmChoice::Sd => Algorithm::SteepestDescent,
                },
                eta: a.eta,
                max_iterations: a.iters,
                seed,
                early_stop_patience: a.patience,
                block_size: a.block_size,
                ..TrainConfig::default()
            };
            let meta = train.meta();
            let net = fnn::init_network_for(&layout, seed, meta.scan_range_mhz, meta.step_mhz);
            let (net, log) = fnn::train(net, &train, test.as_ref(), &cfg)?;
            fnn::save_model(&net, &a.out)?;
            io.outputs.push(a.out.clone());
            if let Some(p) = &a.log {
                log.write_csv(p)?;
                io.outputs.push(p.clone());
                io.volatile.push(p.clone());
            }
            if let Some(r) = log.last() {
                writeln!(
                    out,
                    "iterations {} train_mse {:.6e} test_mse {:.6e} ({})",
                    r.iteration,
                    r.train_mse,
                    r.test_mse,
                    log.stop_reason.as_deref().unwrap_or("iteration limit")
                )?;
            }
        }
        Command::Eval(a) => {
            let net = fnn::load_model(&a.model)?;
            let d = dataset::load_dataset(&a.data)?;
            let mse = fnn::batch_mse(&net, &d)?;
            writeln!(
                out,
                "mse {mse:.6e} rmse_mhz {:.6}",
                mse.sqrt() * net.scan_range_mhz()
            )?;
            io.inputs.extend([a.model.clone(), a.data.clone()]);
        }
        Command::Fit(a) => {
            let s = Spectrum::read_csv(&a.input)?;
            let cfg = FitConfig {
                with_offset: a.offset,
                ..FitConfig::default()
            };
            let r = fit_lorentzian(&s, &cfg)?;
            writeln!(
                out,
                "gain {:.9} bfs_mhz {:.6} linewidth_mhz {:.6} offset {:.6} r_squared {:.6e} converged {}",
                r.params.gain,
                r.params.bfs_mhz,
                r.params.linewidth_mhz,
                r.offset,
                r.r_squared,
                r.converged
            )?;
            io.inputs.push(a.input.clone());
        }
        Command::Resample(a) => {
            let s = Spectrum::read_csv(&a.input)?;
            let p = prepare_input(&s)?;
            p.spectrum.write_csv(&a.out)?;
            writeln!(
                out,
                "window_start_mhz {} first_index {}",
                p.window_start_mhz, p.window_first_index
            )?;
            io.inputs.push(a.input.clone());
            io.outputs.push(a.out.clone());
        }
        Command::SimulateTrace(a) => {
            let pf = a.source.load()?;
            let t = trace::simulate_trace(&pf.fiber, &pf.scan, a.heated, cli.seed.unwrap_or(0))?;
            t.save(&a.out)?;
            writeln!(
                out,
                "{} positions x {} frequencies -> {}",
                t.positions.len(),
                t.frequencies(),
                a.out.display()
            )?;
            if let Some(p) = &a.source.profile {
                io.inputs.push(p.clone());
            }
            io.outputs.push(a.out.clone());
        }
        Command::Analyze(a) => {
            let pf = a.source.load()?;
            let before = TraceMeasurement::load(&a.before)?;
            let after = TraceMeasurement::load(&a.after)?;
            let net = fnn::load_model(&a.model)?;
            let setup = AnalysisSetup::from_profile(&pf.fiber, &after.positions, a.region_km)?;
            let report = trace::analyze(&before, &after, &net, &FitConfig::default(), &setup, workers)?;
            report.write_csv(&a.out_dir)?;
            for r in [&report.fnn, &report.lcf] {
                writeln!(
                    out,
                    "{} uncertainty_c {:.4} heated_delta_temp_c {:?}",
                    r.method, r.uncertainty_c, r.heated_delta_temp_c
                )?;
            }
            io.inputs.extend([a.before.clone(), a.after.clone(), a.model.clone()]);
            if let Some(p) = &a.source.profile {
                io.inputs.push(p.clone());
            }
            for f in ["profiles.csv", "deviation.csv", "summary.csv"] {
                io.outputs.push(a.out_dir.join(f));
            }
        }
        Command::Bench(b) => bench_command(b, cli, workers, out, &mut io)?,
        Command::Infer(a) => {
            let net = fnn::load_model(&a.model)?;
            let s = Spectrum::read_csv(&a.input)?;
            let p = prepare_input(&s)?;
            writeln!(out, "{:.6}", fnn::predict_bfs(&net, &p.spectrum)?)?;
            io.inputs.extend([a.model.clone(), a.input.clone()]);
        }
        Command::Replay(_) => unreachable!("handled before execute"),
    }
    Ok(io)
}

fn bench_command(
    b: &BenchCommand,
    cli: &Cli,
    workers: usize,
    out: &mut dyn Write,
    io: &mut Io,
) -> Result<()> {
    let fit = FitConfig::default();
    let spec = |size| {
        let mut s = EnsembleSpec {
            size,
            workers,
            ..EnsembleSpec::default()
        };
        if let Some(seed) = cli.seed {
            s.seed = seed;
        }
        s
    };
    let (model, path) = match b {
        BenchCommand::RmseSnr(a) | BenchCommand::RmseLinewidth(a) | BenchCommand::RmseStep(a) => {
            let net = fnn::load_model(&a.model)?;
            let es = spec(a.ensemble);
            let curve = match b {
                BenchCommand::RmseSnr(_) => bench::rmse_vs_snr(&net, &fit, &bench::default_snrs(), &es)?,
                BenchCommand::RmseLinewidth(_) => {
                    bench::rmse_vs_linewidth(&net, &fit, &bench::default_linewidths(), a.snr, &es)?
                }
                _ => {
                    let steps: Vec<u32> = (1..=10).collect();
                    bench::rmse_vs_step(&net, &fit, &steps, a.snr, &es)?
                }
            };
            curve.write_csv(&a.out)?;
            writeln!(out, "{} points -> {}", curve.abscissa.len(), a.out.display())?;
            (&a.model, &a.out)
        }
        BenchCommand::Timing(a) => {
            let net = fnn::load_model(&a.model)?;
            let steps: Vec<u32> = (1..=10).collect();
            let r = bench::timing_ratios(&net, &fit, a.n_spectra, &steps, a.fit_workers, &spec(1))?;
            r.write_csv(&a.out)?;
            for (s, x) in r.step_mhz.iter().zip(r.ratios_1t()) {
                writeln!(out, "step {s} MHz: lcf/fnn {x:.2}")?;
            }
            for n in &r.notes {
                writeln!(out, "note: {n}")?;
            }
            io.volatile.push(a.out.clone());
            (&a.model, &a.out)
        }
    };
    io.inputs.push(model.clone());
    io.outputs.push(path.clone());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommand_path_skips_global_values() {
        let argv = s(&["bgs", "--workers", "4", "bench", "timing", "--model", "m"]);
        assert_eq!(subcommand_path(&argv), (s(&["bench", "timing"]), 5));
    }

    #[test]
    fn config_tables_are_scoped() {
        let table: toml::Table = toml::from_str(
            "workers = 2\n[train]\niters = 7\nhidden = [5, 3]\nno_bias = true\n[eval]\nx = 1\n",
        )
        .unwrap();
        let t = config_tokens(&table, &s(&["train"])).unwrap();
        assert_eq!(
            t,
            s(&["--workers", "2", "--hidden", "5,3", "--iters", "7", "--no-bias"])
        );
    }

    #[test]
    fn error_classes_map_to_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Degenerate("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::domain("x")), EXIT_DATA);
    }
}
