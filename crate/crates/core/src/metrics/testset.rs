//! Captured frames on which clipped BP fails and unclipped BP succeeds.
//!
//! Binary layout, little endian throughout: the magic `PLRTSET1`, a fixed
//! header (integers as u64, reals as f32), then `count` records of
//! `frame_id: u64`, `u` packed LSB-first in `ceil(N/8)` bytes, `y: [f32; N]`
//! and `llr: [f32; N]`.

use std::path::Path;

use rayon::prelude::*;

use crate::bp::{BoxplusMode, BpDecoder, DecoderConfig, Precision, Stopping};
use crate::channel::{random_transmission, ChannelConfig, LlrFrame};
use crate::code::PolarCode;
use crate::error::{param, Error, Result};
use crate::rng::{stream, Domain};

use super::with_pool;

const MAGIC: &[u8; 8] = b"PLRTSET1";
const VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectStatus {
    Complete,
    /// The frame budget ran out before the target count was reached.
    Partial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSetHeader {
    pub n: u64,
    pub k: u64,
    pub digest: u64,
    pub sigma2: f32,
    pub ebn0_db: f32,
    pub llr_max_pass: f32,
    pub llr_max_fail: f32,
    pub seed: u64,
    /// Decoder settings shared by the pass and fail runs (`llr_max` aside).
    pub decoder: DecoderConfig,
    /// Frames examined during collection.
    pub candidates: u64,
    pub status: CollectStatus,
}

impl TestSetHeader {
    /// Fraction of examined frames that were kept.
    pub fn acceptance(&self, records: usize) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            records as f64 / self.candidates as f64
        }
    }

    pub fn pass_config(&self) -> DecoderConfig {
        self.decoder.with_llr_max(self.llr_max_pass as f64)
    }

    pub fn fail_config(&self) -> DecoderConfig {
        self.decoder.with_llr_max(self.llr_max_fail as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub frame_id: u64,
    /// Transmitted `u`, full length.
    pub u: Vec<u8>,
    pub y: Vec<f32>,
    pub llr: Vec<f32>,
}

impl TestRecord {
    pub fn frame(&self) -> LlrFrame {
        LlrFrame {
            llr: self.llr.iter().map(|&v| v as f64).collect(),
            y: self.y.iter().map(|&v| v as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub header: TestSetHeader,
    pub records: Vec<TestRecord>,
}

/// Outcome of replaying every record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub total: usize,
    /// Records recovered at `llr_max_pass`.
    pub pass_ok: usize,
    /// Records not recovered at `llr_max_fail`.
    pub fail_ok: usize,
    /// Frame ids violating either side of the predicate.
    pub violations: Vec<u64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Parameters of a collection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectConfig {
    pub ebn0_db: f64,
    pub llr_max_pass: f64,
    pub llr_max_fail: f64,
    pub target_count: usize,
    pub max_frames: u64,
    /// Shared decoder settings; its `llr_max` is ignored.
    pub decoder: DecoderConfig,
    pub workers: usize,
}

impl CollectConfig {
    pub fn new(ebn0_db: f64, target_count: usize) -> Self {
        Self {
            ebn0_db,
            llr_max_pass: 100.0,
            llr_max_fail: 20.0,
            target_count,
            max_frames: 10_000_000,
            decoder: DecoderConfig::default(),
            workers: 1,
        }
    }
}

/// `(pass recovers u, fail does not)`. The pass decoder is skipped when
/// the fail decoder already recovers `u`, since the frame is rejected anyway.
fn predicate(pass: &mut BpDecoder, fail: &mut BpDecoder, u: &[u8], llr: &[f64], full: bool) -> (bool, bool) {
    let failed = fail.decode(llr).u_hat != u;
    let passed = (failed || full) && pass.decode(llr).u_hat == u;
    (passed, failed)
}

/// Streams frames at `cfg.ebn0_db` and keeps those the fail decoder does not
/// recover but the pass decoder does. Frames are rounded to f32 before the
/// test, so stored records replay exactly.
pub fn collect_test_set(code: &PolarCode, cfg: &CollectConfig, seed: u64) -> Result<TestSet> {
    if !(cfg.llr_max_pass > cfg.llr_max_fail) {
        return param("llr_max_pass must exceed llr_max_fail");
    }
    if cfg.target_count == 0 {
        return param("target count must be at least 1");
    }
    let pass_cfg = cfg.decoder.with_llr_max(cfg.llr_max_pass);
    let fail_cfg = cfg.decoder.with_llr_max(cfg.llr_max_fail);
    pass_cfg.validate()?;
    fail_cfg.validate()?;
    let chan = ChannelConfig::new(cfg.ebn0_db, code.rate())?;

    let (records, candidates) = with_pool(cfg.workers, || {
        let mut records = Vec::new();
        let mut examined = 0u64;
        let mut chunk = 64u64;
        while records.len() < cfg.target_count && examined < cfg.max_frames {
            let count = chunk.min(cfg.max_frames - examined);
            let hits: Vec<(u64, Option<TestRecord>)> = (examined..examined + count)
                .into_par_iter()
                .map_init(
                    || {
                        (
                            BpDecoder::new(code, &pass_cfg).expect("validated"),
                            BpDecoder::new(code, &fail_cfg).expect("validated"),
                        )
                    },
                    |(pass, fail), id| {
                        let mut t = random_transmission(code, &chan, false, &mut stream(seed, Domain::Collect, 0, id));
                        t.frame.quantize_f32();
                        let (passed, failed) = predicate(pass, fail, &t.u, &t.frame.llr, false);
                        let rec = (passed && failed).then(|| TestRecord {
                            frame_id: id,
                            u: t.u,
                            y: t.frame.y.iter().map(|&v| v as f32).collect(),
                            llr: t.frame.llr.iter().map(|&v| v as f32).collect(),
                        });
                        (id, rec)
                    },
                )
                .collect();
            for (id, rec) in hits {
                examined = id + 1;
                if let Some(r) = rec {
                    records.push(r);
                    if records.len() == cfg.target_count {
                        break;
                    }
                }
            }
            chunk = (chunk * 2).min(16_384);
        }
        (records, examined)
    })?;

    let status = if records.len() == cfg.target_count { CollectStatus::Complete } else { CollectStatus::Partial };
    Ok(TestSet {
        header: TestSetHeader {
            n: code.len() as u64,
            k: code.k() as u64,
            digest: code.digest(),
            sigma2: chan.sigma2 as f32,
            ebn0_db: cfg.ebn0_db as f32,
            llr_max_pass: cfg.llr_max_pass as f32,
            llr_max_fail: cfg.llr_max_fail as f32,
            seed,
            decoder: cfg.decoder,
            candidates,
            status,
        },
        records,
    })
}

fn boxplus_id(m: BoxplusMode) -> u64 {
    match m {
        BoxplusMode::Exact => 0,
        BoxplusMode::MinApprox => 1,
    }
}

fn stopping_id(s: Stopping) -> u64 {
    match s {
        Stopping::FixedIters => 0,
        Stopping::GMatrix => 1,
    }
}

fn precision_id(p: Precision) -> u64 {
    match p {
        Precision::F32 => 0,
        Precision::F64 => 1,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("test set truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn enum_field<T>(v: u64, name: &str, table: &[T]) -> Result<T>
where
    T: Copy,
{
    table.get(v as usize).copied().ok_or_else(|| Error::Format(format!("bad {name} tag {v}")))
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fails unless `code` is the code the set was captured with.
    pub fn check_code(&self, code: &PolarCode) -> Result<()> {
        if self.header.digest != code.digest() || self.header.n != code.len() as u64 || self.header.k != code.k() as u64 {
            return Err(Error::DigestMismatch { expected: self.header.digest, found: code.digest() });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let n = h.n as usize;
        let mut out = Vec::with_capacity(160 + self.records.len() * (8 + n.div_ceil(8) + 8 * n));
        out.extend_from_slice(MAGIC);
        let mut put = |v: u64| out.extend_from_slice(&v.to_le_bytes());
        put(VERSION);
        put(h.n);
        put(h.k);
        put(h.digest);
        for r in [h.sigma2, h.ebn0_db, h.llr_max_pass, h.llr_max_fail] {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out.extend_from_slice(&h.seed.to_le_bytes());
        out.extend_from_slice(&(h.decoder.max_iters as u64).to_le_bytes());
        out.extend_from_slice(&boxplus_id(h.decoder.boxplus).to_le_bytes());
        out.extend_from_slice(&(h.decoder.alpha as f32).to_le_bytes());
        for v in [
            stopping_id(h.decoder.stopping),
            precision_id(h.decoder.precision),
            h.candidates,
            (h.status == CollectStatus::Partial) as u64,
            self.records.len() as u64,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in &self.records {
            out.extend_from_slice(&r.frame_id.to_le_bytes());
            let mut packed = vec![0u8; n.div_ceil(8)];
            for (i, &b) in r.u.iter().enumerate() {
                packed[i / 8] |= (b & 1) << (i % 8);
            }
            out.extend_from_slice(&packed);
            for v in r.y.iter().chain(&r.llr) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a test set file".into()));
        }
        let version = r.u64()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported test set version {version}")));
        }
        let n = r.u64()?;
        let k = r.u64()?;
        let digest = r.u64()?;
        let (sigma2, ebn0_db, llr_max_pass, llr_max_fail) = (r.f32()?, r.f32()?, r.f32()?, r.f32()?);
        let seed = r.u64()?;
        let max_iters = r.u64()? as usize;
        let boxplus = enum_field(r.u64()?, "boxplus", &[BoxplusMode::Exact, BoxplusMode::MinApprox])?;
        let alpha = r.f32()? as f64;
        let stopping = enum_field(r.u64()?, "stopping", &[Stopping::FixedIters, Stopping::GMatrix])?;
        let precision = enum_field(r.u64()?, "precision", &[Precision::F32, Precision::F64])?;
        let candidates = r.u64()?;
        let status = enum_field(r.u64()?, "status", &[CollectStatus::Complete, CollectStatus::Partial])?;
        let count = r.u64()?;
        if n == 0 || !n.is_power_of_two() || n > 1 << 24 {
            return Err(Error::Format(format!("bad block length {n}")));
        }
        let len = n as usize;
        let record_size = 8 + len.div_ceil(8) + 8 * len;
        if (r.buf.len() as u64) != count.saturating_mul(record_size as u64) {
            return Err(Error::Format(format!("expected {count} records of {record_size} bytes")));
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let frame_id = r.u64()?;
            let packed = r.take(len.div_ceil(8))?;
            let u = (0..len).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect();
            let y = r.f32s(len)?;
            let llr = r.f32s(len)?;
            records.push(TestRecord { frame_id, u, y, llr });
        }
        let decoder = DecoderConfig {
            llr_max: llr_max_fail as f64,
            max_iters,
            boxplus,
            alpha,
            stopping,
            precision,
            ..DecoderConfig::default()
        };
        Ok(Self {
            header: TestSetHeader {
                n,
                k,
                digest,
                sigma2,
                ebn0_db,
                llr_max_pass,
                llr_max_fail,
                seed,
                decoder,
                candidates,
                status,
            },
            records,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Replays every record at both clipping levels.
    pub fn validate(&self, code: &PolarCode, workers: usize) -> Result<ValidationReport> {
        self.check_code(code)?;
        let pass_cfg = self.header.pass_config();
        let fail_cfg = self.header.fail_config();
        let results: Vec<(u64, bool, bool)> = with_pool(workers, || {
            self.records
                .par_iter()
                .map_init(
                    || {
                        (
                            BpDecoder::new(code, &pass_cfg).expect("stored config"),
                            BpDecoder::new(code, &fail_cfg).expect("stored config"),
                        )
                    },
                    |(pass, fail), rec| {
                        let (p, f) = predicate(pass, fail, &rec.u, &rec.frame().llr, true);
                        (rec.frame_id, p, f)
                    },
                )
                .collect()
        })?;
        Ok(ValidationReport {
            total: results.len(),
            pass_ok: results.iter().filter(|r| r.1).count(),
            fail_ok: results.iter().filter(|r| r.2).count(),
            violations: results.iter().filter(|r| !(r.1 && r.2)).map(|r| r.0).collect(),
        })
    }
}
