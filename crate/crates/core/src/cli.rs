//! The `polarfloor` command line.
//!
//! Every subcommand is deterministic for a fixed seed, whatever `--workers`
//! is. Flags can also come from a TOML file given with `--config`: top-level
//! keys and keys under a table named after the subcommand are turned into
//! flags placed before the command-line ones, so explicit flags win.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or digest
//! error, 3 frame budget exhausted (partial output written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bp::{BoxplusMode, DecoderConfig, Precision, Stopping};
use crate::code::PolarCode;
use crate::error::{Error, Result};
use crate::metrics::{
    collect_test_set, compute_ne, estimate_error_rates, CollectConfig, CollectStatus, DecoderKind, SimOptions,
    SimReport, StopRule, TestSet,
};
use crate::mitigation::{
    default_permutations, measure_success_rate, GuessMode, MitigationConfig, Strategy, DEFAULT_NOISE_ATTEMPTS,
};
use crate::sc::SclConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "polarfloor", version, about = "Error floors of polar codes under clipped BP decoding")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Bhattacharyya code and write the code file.
    Construct(ConstructArgs),
    /// Monte Carlo BER/BLER over an Eb/N0 grid.
    Simulate(SimulateArgs),
    /// Normalized error of one report against a reference report.
    Ne(NeArgs),
    /// Capture frames that fail at a low clipping value but pass at a high one.
    Collect(CollectArgs),
    /// Success rate of a mitigation strategy on a captured test set.
    Mitigate(MitigateArgs),
    /// Error rates of codes with `m` extra random frozen bits.
    FrozenSweep(FrozenSweepArgs),
}

#[derive(Args, Debug)]
struct ConstructArgs {
    /// log2 of the block length.
    #[arg(long)]
    n: u32,
    /// Information bits.
    #[arg(long, conflicts_with = "rate")]
    k: Option<usize>,
    /// Code rate, rounded to the nearest k.
    #[arg(long)]
    rate: Option<f64>,
    /// Design Es/N0 in dB.
    #[arg(long = "design-esn0", default_value_t = 0.0, allow_negative_numbers = true)]
    design_esn0: f64,
    /// Code file to write; printed to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BoxplusArg {
    Min,
    Exact,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StoppingArg {
    Gmatrix,
    Fixed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum DecoderArg {
    Bp,
    Sc,
    Scl,
    Uncoded,
}

/// Decoder settings other than the clipping value.
#[derive(Args, Debug, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = BoxplusArg::Min)]
    boxplus: BoxplusArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    precision: PrecisionArg,
    #[arg(long, value_enum, default_value_t = StoppingArg::Gmatrix)]
    stopping: StoppingArg,
}

impl ScheduleArgs {
    fn config(&self, llr_max: f64) -> DecoderConfig {
        DecoderConfig {
            llr_max,
            max_iters: self.iters,
            boxplus: match self.boxplus {
                BoxplusArg::Min => BoxplusMode::MinApprox,
                BoxplusArg::Exact => BoxplusMode::Exact,
            },
            alpha: self.alpha,
            stopping: match self.stopping {
                StoppingArg::Gmatrix => Stopping::GMatrix,
                StoppingArg::Fixed => Stopping::FixedIters,
            },
            precision: match self.precision {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F64 => Precision::F64,
            },
            ..DecoderConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Master seed.
    #[arg(long, env = "POLARFLOOR_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug, Clone)]
struct StopArgs {
    /// Stop a point after this many block errors...
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    /// ...once at least this many frames were simulated.
    #[arg(long, default_value_t = 0)]
    min_frames: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_frames: u64,
}

impl StopArgs {
    fn rule(&self) -> StopRule {
        StopRule { min_frames: self.min_frames, min_block_errors: self.min_errors, max_frames: self.max_frames }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    code: PathBuf,
    /// Eb/N0 grid in dB: `start:step:stop` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr: String,
    #[arg(long, value_enum, default_value_t = DecoderArg::Bp)]
    decoder: DecoderArg,
    #[arg(long, default_value_t = 20.0)]
    llr_max: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// List size for `--decoder scl`.
    #[arg(long, default_value_t = 8)]
    list_size: usize,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Transmit the all-zero codeword.
    #[arg(long)]
    all_zero: bool,
    /// Skip the noise (sanity runs).
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NeArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[arg(long)]
    code: PathBuf,
    /// Collection Eb/N0 in dB.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = 100.0)]
    llr_max_pass: f64,
    #[arg(long, default_value_t = 20.0)]
    llr_max_fail: f64,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum StrategyArg {
    None,
    Guess1,
    Guess2,
    Guess3,
    Vnoise,
    Scaled,
    Multitrellis,
}

#[derive(Args, Debug)]
struct MitigateArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    test_set: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Pin guessed bits to their transmitted values.
    #[arg(long)]
    genie: bool,
    #[arg(long, default_value_t = 0.36)]
    sigma_v2: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE_ATTEMPTS)]
    attempts: usize,
    /// Boxplus scale for `--strategy scaled`.
    #[arg(long, default_value_t = 0.9375)]
    alpha: f64,
    /// Layer orders tried by `--strategy multitrellis`, identity included.
    #[arg(long)]
    perms: Option<usize>,
    /// Base decoder clipping; defaults to the set's failing value.
    #[arg(long)]
    llr_max: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FrozenSweepArgs {
    /// Parent code file.
    #[arg(long)]
    code: PathBuf,
    /// Extra frozen bit counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 16])]
    m: Vec<usize>,
    /// Seed of the random frozen-position choice.
    #[arg(long, default_value_t = 1)]
    extend_seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    snr: String,
    #[arg(long, default_value_t = 100.0)]
    llr_max: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Directory receiving `frozen_m<m>.csv` and `frozen_sweep.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Parses an Eb/N0 grid: `start:step:stop` (inclusive) or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Parameter(format!("SNR grid '{text}': {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(bad("too many points"));
            }
            (0..count).map(|i| start + i as f64 * step).map(|v| (v * 1e9).round() / 1e9).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:step:stop or a comma list")),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(grid)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => crate::io::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_construct(a: &ConstructArgs) -> Result<i32> {
    if a.n > 24 {
        return Err(Error::Parameter(format!("n = {} is too large", a.n)));
    }
    let len = 1usize << a.n;
    let k = match (a.k, a.rate) {
        (Some(k), None) => k,
        (None, Some(r)) if r > 0.0 && r <= 1.0 => (r * len as f64).round() as usize,
        (None, Some(r)) => return Err(Error::Parameter(format!("rate {r} outside (0, 1]"))),
        _ => return Err(Error::Parameter("give --k or --rate".into())),
    };
    let (code, profile) = PolarCode::bhattacharyya_with_profile(a.n, k, a.design_esn0)?;
    let worst = code.info_set().iter().map(|&i| profile.z[i]).fold(0.0, f64::max);
    let best_frozen = (0..len).filter(|&i| code.is_frozen(i)).map(|i| profile.z[i]).fold(1.0, f64::min);
    eprintln!(
        "N = {len}, k = {k}, rate = {:.4}, digest = {:016x}; max Z on info set {worst:.3e}, min Z on frozen set {best_frozen:.3e}",
        code.rate(),
        code.digest()
    );
    match &a.out {
        Some(p) => code.save(p)?,
        None => print!("{}", code.to_toml()),
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let code = PolarCode::load(&a.code)?;
    let grid = parse_grid(&a.snr)?;
    let kind = match a.decoder {
        DecoderArg::Bp => DecoderKind::Bp(a.schedule.config(a.llr_max)),
        DecoderArg::Sc => DecoderKind::Sc,
        DecoderArg::Scl if a.list_size >= 1 => DecoderKind::Scl(SclConfig::new(a.list_size)),
        DecoderArg::Scl => return Err(Error::Parameter("list size must be positive".into())),
        DecoderArg::Uncoded => DecoderKind::Uncoded,
    };
    let opts = SimOptions { all_zero: a.all_zero, noiseless: a.noiseless, workers: a.run.workers };
    let report = estimate_error_rates(&code, &kind, &grid, &a.stop.rule(), a.run.seed, &opts)?;
    for p in &report.points {
        if p.block_errors < a.stop.min_errors {
            eprintln!(
                "warning: {} dB stopped with {} block errors after {} frames",
                p.ebn0_db, p.block_errors, p.frames
            );
        }
    }
    emit(a.out.as_deref(), &report.to_csv())?;
    Ok(EXIT_OK)
}

fn cmd_ne(a: &NeArgs) -> Result<i32> {
    let curve = SimReport::load(&a.curve)?;
    let reference = SimReport::load(&a.reference)?;
    let ne = compute_ne(&curve, &reference)?;
    eprintln!("{}", ne.summary());
    emit(a.out.as_deref(), &ne.to_csv())?;
    Ok(EXIT_OK)
}

fn cmd_collect(a: &CollectArgs) -> Result<i32> {
    let code = PolarCode::load(&a.code)?;
    let cfg = CollectConfig {
        ebn0_db: a.snr,
        llr_max_pass: a.llr_max_pass,
        llr_max_fail: a.llr_max_fail,
        target_count: a.count,
        max_frames: a.max_frames,
        decoder: a.schedule.config(a.llr_max_fail),
        workers: a.run.workers,
    };
    let set = collect_test_set(&code, &cfg, a.run.seed)?;
    set.save(&a.out)?;
    eprintln!(
        "kept {} of {} frames (acceptance {:.3e})",
        set.len(),
        set.header.candidates,
        set.header.acceptance(set.len())
    );
    if set.header.status == CollectStatus::Partial {
        eprintln!("warning: frame budget exhausted before {} records", a.count);
        return Ok(EXIT_BUDGET);
    }
    Ok(EXIT_OK)
}

fn cmd_mitigate(a: &MitigateArgs) -> Result<i32> {
    let code = PolarCode::load(&a.code)?;
    let set = TestSet::load(&a.test_set)?;
    set.check_code(&code)?;
    let mode = if a.genie { GuessMode::Genie } else { GuessMode::Exhaustive };
    let strategy = match a.strategy {
        StrategyArg::None => Strategy::None,
        StrategyArg::Guess1 => Strategy::Guess { max_bits: 1, mode },
        StrategyArg::Guess2 => Strategy::Guess { max_bits: 2, mode },
        StrategyArg::Guess3 => Strategy::Guess { max_bits: 3, mode },
        StrategyArg::Vnoise => Strategy::VirtualNoise { sigma_v2: a.sigma_v2, attempts: a.attempts },
        StrategyArg::Scaled => Strategy::ScaledBoxplus { alpha: a.alpha },
        StrategyArg::Multitrellis => Strategy::MultiTrellis {
            max_permutations: a.perms.unwrap_or_else(|| default_permutations(code.log_len())),
        },
    };
    let base = set.header.fail_config().with_llr_max(a.llr_max.unwrap_or(set.header.llr_max_fail as f64));
    let report = measure_success_rate(&set, &code, &MitigationConfig::new(strategy, base), a.run.seed, a.run.workers)?;
    eprintln!(
        "{}: tau = {:.4} ({}/{}), 95% CI [{:.4}, {:.4}]",
        report.strategy, report.tau, report.recovered, report.total, report.ci_low, report.ci_high
    );
    emit(a.out.as_deref(), &report.to_csv())?;
    Ok(EXIT_OK)
}

fn cmd_frozen_sweep(a: &FrozenSweepArgs) -> Result<i32> {
    let parent = PolarCode::load(&a.code)?;
    let grid = parse_grid(&a.snr)?;
    let kind = DecoderKind::Bp(a.schedule.config(a.llr_max));
    let opts = SimOptions { workers: a.run.workers, ..SimOptions::default() };
    std::fs::create_dir_all(&a.out_dir)?;
    let mut combined = String::from(
        "# extra frozen bits remove codewords, so the MAP performance of an extended code is never worse than its parent's\n",
    );
    combined.push_str("m,rate,ebn0_db,frames,bit_errors,block_errors,ber,ci_low,ci_high\n");
    for &m in &a.m {
        let code = if m == 0 { parent.clone() } else { parent.extend_frozen(m, a.extend_seed)? };
        let report = estimate_error_rates(&code, &kind, &grid, &a.stop.rule(), a.run.seed, &opts)?;
        report.save(a.out_dir.join(format!("frozen_m{m}.csv")))?;
        for p in &report.points {
            let (lo, hi) = p.ber_ci();
            writeln!(
                combined,
                "{m},{},{},{},{},{},{:e},{:e},{:e}",
                code.rate(),
                p.ebn0_db,
                p.frames,
                p.bit_errors,
                p.block_errors,
                p.ber(),
                lo,
                hi
            )
            .unwrap();
        }
    }
    crate::io::write_atomic(&a.out_dir.join("frozen_sweep.csv"), combined.as_bytes())?;
    Ok(EXIT_OK)
}

fn subcommand_names() -> Vec<String> {
    use clap::CommandFactory;
    Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect()
}

fn toml_flags(value: &toml::Value, out: &mut Vec<OsString>) -> Result<()> {
    let table = value.as_table().ok_or_else(|| Error::Parameter("config must be a table".into()))?;
    for (key, v) in table {
        if v.is_table() {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => out.extend([flag.into(), s.into()]),
            toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
            toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
            toml::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.extend([flag.into(), joined.join(",").into()]);
            }
            _ => return Err(Error::Parameter(format!("unsupported config value for '{key}'"))),
        }
    }
    Ok(())
}

/// Splices `--config` file entries in right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            let path = it.next().ok_or_else(|| Error::Parameter("--config needs a path".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path)?;
    let value: toml::Value =
        toml::from_str(&text).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
    let names = subcommand_names();
    let Some(pos) = rest.iter().position(|a| names.iter().any(|n| a.to_str() == Some(n.as_str()))) else {
        return Ok(rest);
    };
    let mut injected = Vec::new();
    toml_flags(&value, &mut injected)?;
    if let Some(section) = value.get(rest[pos].to_str().unwrap()) {
        toml_flags(section, &mut injected)?;
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Length { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Runs the command line given by `args` (program name first) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = match expand_config(args.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ne(a) => cmd_ne(a),
        Command::Collect(a) => cmd_collect(a),
        Command::Mitigate(a) => cmd_mitigate(a),
        Command::FrozenSweep(a) => cmd_frozen_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
