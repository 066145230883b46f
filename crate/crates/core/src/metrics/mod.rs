//! Error-rate estimation, the normalized-error floor measure and confidence
//! intervals.

mod testset;

pub use testset::{
    collect_test_set, CollectConfig, CollectStatus, TestRecord, TestSet, TestSetHeader, ValidationReport,
};

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bp::{BpDecoder, DecoderConfig};
use crate::channel::{random_transmission, ChannelConfig};
use crate::code::PolarCode;
use crate::error::{param, Error, Result};
use crate::mitigation::{FrameContext, MitigationConfig, Mitigator};
use crate::rng::{stream, Domain};
use crate::sc::{sc_decode, scl_decode, SclConfig};

/// 95% two-sided binomial interval for `errors / trials`.
///
/// Zero errors use the one-sided exact bound `1 - 0.05^(1/n)`; fewer than 10
/// errors use Clopper-Pearson; otherwise the normal approximation.
pub fn confidence_interval(errors: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1 && errors <= trials, "need 0 <= errors <= trials, trials >= 1");
    let n = trials as f64;
    let e = errors as f64;
    if errors == 0 {
        return (0.0, 1.0 - 0.05f64.powf(1.0 / n));
    }
    if errors == trials {
        let low = if errors < 10 { 0.025f64.powf(1.0 / n) } else { 1.0 - 1.96 / n.sqrt() };
        return (low.clamp(0.0, 1.0), 1.0);
    }
    if errors < 10 {
        let lo = Beta::new(e, n - e + 1.0).expect("beta params").inverse_cdf(0.025);
        let hi = Beta::new(e + 1.0, n - e).expect("beta params").inverse_cdf(0.975);
        return (lo, hi);
    }
    let p = e / n;
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// When to stop simulating a single SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_frames: u64,
    pub min_block_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_frames: 0, min_block_errors: 100, max_frames: 1_000_000 }
    }
}

impl StopRule {
    fn done(&self, frames: u64, block_errors: u64) -> bool {
        frames >= self.max_frames || (frames >= self.min_frames && block_errors >= self.min_block_errors)
    }
}

/// Decoder used for error-rate estimation.
#[derive(Debug, Clone)]
pub enum DecoderKind {
    Bp(DecoderConfig),
    Mitigated(MitigationConfig),
    Sc,
    Scl(SclConfig),
    /// Hard decisions on the channel LLRs; only meaningful at full rate.
    Uncoded,
}

impl DecoderKind {
    pub fn label(&self) -> String {
        match self {
            DecoderKind::Bp(_) => "bp".into(),
            DecoderKind::Mitigated(m) => format!("bp+{}", m.strategy.label()),
            DecoderKind::Sc => "sc".into(),
            DecoderKind::Scl(c) => format!("scl{}", c.list_size),
            DecoderKind::Uncoded => "uncoded".into(),
        }
    }

    fn bp_config(&self) -> Option<DecoderConfig> {
        match self {
            DecoderKind::Bp(c) => Some(*c),
            DecoderKind::Mitigated(m) => Some(m.base),
            _ => None,
        }
    }
}

/// Transmission options shared by all points of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub all_zero: bool,
    pub noiseless: bool,
    pub workers: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { all_zero: false, noiseless: false, workers: 1 }
    }
}

/// Counters for one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    /// Sum over frames of the squared per-frame bit error count.
    pub bit_errors_sq: u64,
    pub block_errors: u64,
    pub iterations: u64,
    /// Information bits per frame.
    pub k: usize,
    pub wall_time_s: f64,
}

impl PointReport {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / (self.frames as f64 * self.k as f64)
    }

    pub fn bler(&self) -> f64 {
        self.block_errors as f64 / self.frames as f64
    }

    pub fn mean_iterations(&self) -> f64 {
        self.iterations as f64 / self.frames as f64
    }

    /// 95% interval on the BER, treating every bit as an independent trial.
    pub fn ber_ci(&self) -> (f64, f64) {
        confidence_interval(self.bit_errors, self.frames * self.k as u64)
    }

    /// 95% interval on the BER with frames as the trials.
    ///
    /// Bit errors arrive in bursts (a failed frame carries many), so this is
    /// wider than [`ber_ci`](Self::ber_ci) and is the one to compare decoders
    /// with. Falls back to `ber_ci` below 10 block errors.
    pub fn ber_ci_frames(&self) -> (f64, f64) {
        if self.block_errors < 10 || self.frames < 2 {
            return self.ber_ci();
        }
        let f = self.frames as f64;
        let mean = self.bit_errors as f64 / f;
        let var = (self.bit_errors_sq as f64 - f * mean * mean).max(0.0) / (f - 1.0);
        let half = 1.96 * (var / f).sqrt() / self.k as f64;
        let p = self.ber();
        ((p - half).max(0.0), (p + half).min(1.0))
    }

    pub fn bler_ci(&self) -> (f64, f64) {
        confidence_interval(self.block_errors, self.frames)
    }

    /// Merges counters of disjoint frame sets at the same SNR.
    pub fn merge(&mut self, other: &PointReport) {
        self.frames += other.frames;
        self.bit_errors += other.bit_errors;
        self.bit_errors_sq += other.bit_errors_sq;
        self.block_errors += other.block_errors;
        self.iterations += other.iterations;
        self.wall_time_s += other.wall_time_s;
    }
}

/// Run metadata written as `# key = value` lines ahead of the CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub code_digest: String,
    pub n: usize,
    pub k: usize,
    pub decoder: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bp: Option<DecoderConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub meta: RunMeta,
    pub points: Vec<PointReport>,
}

#[derive(Debug, Clone, Copy)]
struct FrameOutcome {
    bit_errors: u32,
    iterations: u32,
}

struct Worker {
    bp: Option<BpDecoder>,
    mitigator: Option<Mitigator>,
}

impl Worker {
    fn new(code: &PolarCode, kind: &DecoderKind) -> Self {
        match kind {
            DecoderKind::Bp(c) => {
                Self { bp: Some(BpDecoder::new(code, c).expect("validated")), mitigator: None }
            }
            DecoderKind::Mitigated(m) => {
                Self { bp: None, mitigator: Some(Mitigator::new(code, m).expect("validated")) }
            }
            _ => Self { bp: None, mitigator: None },
        }
    }
}

fn simulate_frame(
    code: &PolarCode,
    kind: &DecoderKind,
    chan: &ChannelConfig,
    opts: &SimOptions,
    seed: u64,
    point: u64,
    index: u64,
    worker: &mut Worker,
) -> FrameOutcome {
    let t = random_transmission(code, chan, opts.all_zero, &mut stream(seed, Domain::Frame, point, index));
    let count = |u_hat: &[u8]| {
        code.info_set().iter().filter(|&&i| u_hat[i] != t.u[i]).count() as u32
    };
    match kind {
        DecoderKind::Bp(_) => {
            let r = worker.bp.as_mut().unwrap().decode(&t.frame.llr);
            FrameOutcome { bit_errors: count(&r.u_hat), iterations: r.iterations as u32 }
        }
        DecoderKind::Mitigated(_) => {
            let ctx = FrameContext {
                truth: Some(&t.u),
                sigma2: chan.sigma2,
                noise_seed: seed,
                noise_key: (point, index),
            };
            let out = worker.mitigator.as_mut().unwrap().decode(&t.frame, &ctx);
            FrameOutcome { bit_errors: count(&out.result.u_hat), iterations: out.total_iterations as u32 }
        }
        DecoderKind::Sc | DecoderKind::Scl(_) => {
            let info = match kind {
                DecoderKind::Sc => sc_decode(code, &t.frame.llr),
                DecoderKind::Scl(c) => scl_decode(code, &t.frame.llr, c),
                _ => unreachable!(),
            };
            let truth = code.extract(&t.u);
            let e = info.iter().zip(&truth).filter(|(a, b)| a != b).count() as u32;
            FrameOutcome { bit_errors: e, iterations: 0 }
        }
        DecoderKind::Uncoded => {
            let e = t.frame.llr.iter().zip(&t.x).filter(|(&l, &x)| ((l < 0.0) as u8) != x).count() as u32;
            FrameOutcome { bit_errors: e, iterations: 0 }
        }
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub(crate) fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return param("worker count must be at least 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Monte Carlo BER/BLER over `snr_points` (Eb/N0 in dB).
///
/// Frame `i` at point `p` always uses the stream keyed by `(seed, p, i)`, and
/// the stop rule is evaluated frame by frame in index order, so the counters
/// are identical for any worker count.
pub fn estimate_error_rates(
    code: &PolarCode,
    kind: &DecoderKind,
    snr_points: &[f64],
    stop: &StopRule,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimReport> {
    if snr_points.is_empty() {
        return param("no SNR points");
    }
    if stop.max_frames == 0 {
        return param("max_frames must be positive");
    }
    if let Some(c) = kind.bp_config() {
        c.validate()?;
    }
    if let DecoderKind::Mitigated(m) = kind {
        m.validate()?;
    }
    if matches!(kind, DecoderKind::Uncoded) && code.k() != code.len() {
        return param("uncoded transmission requires k = N");
    }
    let points = with_pool(opts.workers, || {
        snr_points
            .iter()
            .enumerate()
            .map(|(p, &snr)| simulate_point(code, kind, snr, p as u64, stop, seed, opts))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SimReport {
        meta: RunMeta {
            code_digest: format!("{:016x}", code.digest()),
            n: code.len(),
            k: code.k(),
            decoder: kind.label(),
            seed,
            bp: kind.bp_config(),
        },
        points,
    })
}

fn simulate_point(
    code: &PolarCode,
    kind: &DecoderKind,
    ebn0_db: f64,
    point: u64,
    stop: &StopRule,
    seed: u64,
    opts: &SimOptions,
) -> Result<PointReport> {
    let chan = ChannelConfig::new(ebn0_db, code.rate())?.noiseless(opts.noiseless);
    let start = Instant::now();
    let mut rep = PointReport {
        ebn0_db,
        frames: 0,
        bit_errors: 0,
        bit_errors_sq: 0,
        block_errors: 0,
        iterations: 0,
        k: code.k(),
        wall_time_s: 0.0,
    };
    let mut chunk = 16u64;
    'outer: while !stop.done(rep.frames, rep.block_errors) {
        let first = rep.frames;
        let count = chunk.min(stop.max_frames - first);
        let outcomes: Vec<FrameOutcome> = (first..first + count)
            .into_par_iter()
            .map_init(
                || Worker::new(code, kind),
                |w, i| simulate_frame(code, kind, &chan, opts, seed, point, i, w),
            )
            .collect();
        for o in outcomes {
            rep.frames += 1;
            rep.bit_errors += o.bit_errors as u64;
            rep.bit_errors_sq += (o.bit_errors as u64).pow(2);
            rep.block_errors += (o.bit_errors > 0) as u64;
            rep.iterations += o.iterations as u64;
            if stop.done(rep.frames, rep.block_errors) {
                break 'outer;
            }
        }
        chunk = (chunk * 2).min(8192);
    }
    rep.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

const SIM_COLUMNS: [&str; 10] = [
    "ebn0_db",
    "frames",
    "bit_errors",
    "block_errors",
    "ber",
    "bler",
    "mean_iters",
    "ci_low",
    "ci_high",
    "bit_errors_sq",
];

fn meta_header<T: Serialize>(meta: &T) -> String {
    let body = toml::to_string(meta).expect("metadata serializes");
    body.lines().map(|l| format!("# {l}\n")).collect()
}

fn parse_meta<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let body: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')))
        .filter(|l| !l.starts_with("summary"))
        .map(|l| format!("{l}\n"))
        .collect();
    toml::from_str(&body).map_err(|e| Error::Format(format!("report metadata: {e}")))
}

impl SimReport {
    /// CSV with metadata comment lines; the `ci_*` columns bound the BER.
    pub fn to_csv(&self) -> String {
        let mut out = meta_header(&self.meta);
        out.push_str(&SIM_COLUMNS.join(","));
        out.push('\n');
        for p in &self.points {
            let (lo, hi) = p.ber_ci();
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{},{:e},{:e},{}",
                p.ebn0_db,
                p.frames,
                p.bit_errors,
                p.block_errors,
                p.ber(),
                p.bler(),
                p.mean_iterations(),
                lo,
                hi,
                p.bit_errors_sq
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let meta: RunMeta = parse_meta(text)?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != SIM_COLUMNS {
            return Err(Error::Format(format!("unexpected columns: {headers:?}")));
        }
        let mut points = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let num = |i: usize| -> Result<f64> {
                row[i].parse::<f64>().map_err(|e| Error::Format(format!("column {}: {e}", SIM_COLUMNS[i])))
            };
            let int = |i: usize| -> Result<u64> {
                row[i].parse::<u64>().map_err(|e| Error::Format(format!("column {}: {e}", SIM_COLUMNS[i])))
            };
            let frames = int(1)?;
            points.push(PointReport {
                ebn0_db: num(0)?,
                frames,
                bit_errors: int(2)?,
                bit_errors_sq: int(9)?,
                block_errors: int(3)?,
                iterations: (num(6)? * frames as f64).round() as u64,
                k: meta.k,
                wall_time_s: 0.0,
            });
        }
        Ok(Self { meta, points })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// One SNR point of a normalized-error comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NePoint {
    pub ebn0_db: f64,
    pub ber: f64,
    pub ber_ref: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub llr_max: Option<f64>,
    pub llr_max_ref: Option<f64>,
    pub points: Vec<NePoint>,
    pub ne: f64,
}

/// Normalized error: mean over SNR points of `BER(curve) / BER(reference)`.
pub fn compute_ne(curve: &SimReport, reference: &SimReport) -> Result<NeReport> {
    if curve.meta.code_digest != reference.meta.code_digest {
        return Err(Error::Incompatible(format!(
            "code digests differ ({} vs {})",
            curve.meta.code_digest, reference.meta.code_digest
        )));
    }
    if curve.points.len() != reference.points.len()
        || curve.points.iter().zip(&reference.points).any(|(a, b)| (a.ebn0_db - b.ebn0_db).abs() > 1e-9)
    {
        return Err(Error::Incompatible("SNR grids differ".into()));
    }
    if curve.points.is_empty() {
        return Err(Error::Incompatible("empty reports".into()));
    }
    if let (Some(a), Some(b)) = (&curve.meta.bp, &reference.meta.bp) {
        if a.max_iters != b.max_iters || a.stopping != b.stopping {
            return Err(Error::Incompatible("iteration schedule differs".into()));
        }
    }
    let mut points = Vec::with_capacity(curve.points.len());
    for (c, r) in curve.points.iter().zip(&reference.points) {
        if r.bit_errors == 0 {
            return Err(Error::InsufficientStatistics(format!(
                "reference BER is zero at {} dB ({} frames)",
                r.ebn0_db, r.frames
            )));
        }
        points.push(NePoint { ebn0_db: c.ebn0_db, ber: c.ber(), ber_ref: r.ber(), ratio: c.ber() / r.ber() });
    }
    let ne = points.iter().map(|p| p.ratio).sum::<f64>() / points.len() as f64;
    Ok(NeReport {
        llr_max: curve.meta.bp.map(|c| c.llr_max),
        llr_max_ref: reference.meta.bp.map(|c| c.llr_max),
        points,
        ne,
    })
}

impl NeReport {
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        format!(
            "summary: llr_max={} llr_max_ref={} points={} ne={}",
            fmt(self.llr_max),
            fmt(self.llr_max_ref),
            self.points.len(),
            self.ne
        )
    }

    /// Per-point rows followed by a `# summary:` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ebn0_db,ber,ber_ref,ratio\n");
        for p in &self.points {
            writeln!(out, "{},{:e},{:e},{}", p.ebn0_db, p.ber, p.ber_ref, p.ratio).unwrap();
        }
        writeln!(out, "# {}", self.summary()).unwrap();
        out
    }
}
