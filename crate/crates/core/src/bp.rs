//! Belief-propagation decoding over the polar factor graph.
//!
//! The graph has `n + 1` stages of `N` nodes. Stage 0 is the `u` side and
//! holds the a-priori R-messages (frozen positions pinned to `+llr_max`);
//! stage `n` is the channel side and holds the clipped channel LLRs as
//! L-messages. Layer `j` joins stage `j` to stage `j + 1` with butterflies of
//! span `2^layer_order[j]`. Every layer order realizes the same code because
//! the kernel layers act on distinct index bits and therefore commute.
//!
//! One iteration is a full L-pass (channel side towards `u`) followed by a
//! full R-pass (`u` towards the channel). Every written message is clipped to
//! `±llr_max`; the two-term sums feeding a boxplus are not.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::code::{polar_transform, PolarCode};
use crate::error::{param, Result};

/// Exact boxplus in the numerically stable form
/// `sign(a)·sign(b)·min(|a|,|b|) + ln(1+e^{-|a+b|}) - ln(1+e^{-|a-b|})`.
pub fn boxplus_exact(a: f64, b: f64) -> f64 {
    Exact::apply(a, b)
}

/// Min-sum approximation `sign(a)·sign(b)·min(|a|,|b|)`.
pub fn boxplus_min(a: f64, b: f64) -> f64 {
    MinApprox::apply(a, b)
}

/// A boxplus kernel, monomorphized into the message-passing loops.
pub trait Boxplus {
    fn apply<T: Float>(a: T, b: T) -> T;
}

pub struct Exact;
pub struct MinApprox;

/// Compare-and-select clamp; lowers to plain vector min/max.
#[inline(always)]
fn clip<T: Float>(v: T, m: T) -> T {
    let v = if v > m { m } else { v };
    if v < -m {
        -m
    } else {
        v
    }
}

#[inline(always)]
fn sign_min<T: Float>(a: T, b: T) -> T {
    // The product carries the sign-XOR (including signed zeros); inputs are
    // bounded by twice the clipping level, so it cannot overflow.
    let (x, y) = (a.abs(), b.abs());
    (if x < y { x } else { y }).copysign(a * b)
}

impl Boxplus for MinApprox {
    #[inline(always)]
    fn apply<T: Float>(a: T, b: T) -> T {
        sign_min(a, b)
    }
}

impl Boxplus for Exact {
    #[inline(always)]
    fn apply<T: Float>(a: T, b: T) -> T {
        let corr = |v: T| (-v.abs()).exp().ln_1p();
        sign_min(a, b) + corr(a + b) - corr(a - b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxplusMode {
    Exact,
    MinApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    /// Always run `max_iters` iterations.
    FixedIters,
    /// Stop as soon as `x̂ = û·G_N` with `û` zero on the frozen set.
    GMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Decoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Clipping magnitude for every message and channel LLR.
    pub llr_max: f64,
    pub max_iters: usize,
    pub boxplus: BoxplusMode,
    /// Scale applied to every boxplus output, `0 < alpha <= 1`.
    pub alpha: f64,
    pub stopping: Stopping,
    pub precision: Precision,
    /// Number of trailing iterations over which sign flips are counted.
    pub flip_window: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            llr_max: 20.0,
            max_iters: 200,
            boxplus: BoxplusMode::MinApprox,
            alpha: 1.0,
            stopping: Stopping::GMatrix,
            precision: Precision::F32,
            flip_window: 10,
        }
    }
}

impl DecoderConfig {
    pub fn with_llr_max(mut self, llr_max: f64) -> Self {
        self.llr_max = llr_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.llr_max > 0.0 && self.llr_max.is_finite()) {
            return param(format!("llr_max = {} must be positive and finite", self.llr_max));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return param(format!("alpha = {} outside (0, 1]", self.alpha));
        }
        if self.max_iters == 0 {
            return param("max_iters must be at least 1");
        }
        Ok(())
    }
}

/// Single processing-element update. Returns `(R_out1, R_out2, L_out1, L_out2)`,
/// each clipped to `±llr_max`.
#[inline(always)]
pub fn pe_update<T: Float, F: Boxplus>(
    l_in1: T,
    l_in2: T,
    r_in1: T,
    r_in2: T,
    alpha: T,
    llr_max: T,
) -> (T, T, T, T) {
    let clip = |v: T| clip(v, llr_max);
    let shared = alpha * F::apply(r_in1, l_in1);
    (
        clip(alpha * F::apply(r_in1, l_in2 + r_in2)),
        clip(shared + r_in2),
        clip(alpha * F::apply(l_in1, l_in2 + r_in2)),
        clip(shared + l_in2),
    )
}

/// L- and R-message arrays of the factor graph, stage-major.
#[derive(Debug, Clone)]
pub struct MessageGraph<T> {
    log_len: u32,
    len: usize,
    left: Vec<T>,
    right: Vec<T>,
    layer_order: Vec<u32>,
}

impl<T: Float> MessageGraph<T> {
    /// True if `fresh` and the messages equal `snapshot`; otherwise stores
    /// them in `snapshot`.
    fn unchanged_since(&self, snapshot: &mut Vec<T>, fresh: bool) -> bool {
        let cells = self.left.len();
        let same = fresh
            && snapshot.len() == 2 * cells
            && snapshot[..cells] == self.left[..]
            && snapshot[cells..] == self.right[..];
        if !same {
            snapshot.clear();
            snapshot.extend_from_slice(&self.left);
            snapshot.extend_from_slice(&self.right);
        }
        same
    }

    pub fn new(log_len: u32) -> Self {
        let len = 1usize << log_len;
        let cells = (log_len as usize + 1) * len;
        Self {
            log_len,
            len,
            left: vec![T::zero(); cells],
            right: vec![T::zero(); cells],
            layer_order: (0..log_len).collect(),
        }
    }

    pub fn stages(&self) -> usize {
        self.log_len as usize + 1
    }

    pub fn layer_order(&self) -> &[u32] {
        &self.layer_order
    }

    /// L-messages of stage `s` (0 = `u` side, `n` = channel side).
    pub fn left(&self, s: usize) -> &[T] {
        &self.left[s * self.len..(s + 1) * self.len]
    }

    pub fn right(&self, s: usize) -> &[T] {
        &self.right[s * self.len..(s + 1) * self.len]
    }

    /// Resets the graph: priors on stage 0, clipped channel LLRs on stage `n`,
    /// zeros elsewhere. `pins` overrides priors of individual `u` positions
    /// with `+llr_max` (bit 0) or `-llr_max` (bit 1).
    pub fn init(
        &mut self,
        frozen: &[bool],
        channel: &[f64],
        llr_max: f64,
        pins: &[(usize, u8)],
        layer_order: &[u32],
    ) {
        assert_eq!(channel.len(), self.len, "frame length");
        assert_eq!(frozen.len(), self.len, "frozen mask length");
        assert_eq!(layer_order.len(), self.log_len as usize, "layer order length");
        let max = T::from(llr_max).unwrap();
        self.left.fill(T::zero());
        self.right.fill(T::zero());
        for (r, &f) in self.right[..self.len].iter_mut().zip(frozen) {
            *r = if f { max } else { T::zero() };
        }
        for &(i, bit) in pins {
            self.right[i] = if bit == 0 { max } else { -max };
        }
        let top = self.log_len as usize * self.len;
        for (l, &c) in self.left[top..].iter_mut().zip(channel) {
            *l = T::from(c).unwrap().max(-max).min(max);
        }
        self.layer_order.clear();
        self.layer_order.extend_from_slice(layer_order);
    }

    /// One full L-pass followed by one full R-pass.
    pub fn run_iteration<F: Boxplus>(&mut self, alpha: T, llr_max: T) {
        let len = self.len;
        for j in (0..self.log_len as usize).rev() {
            let d = 1usize << self.layer_order[j];
            let (lo, hi) = self.left.split_at_mut((j + 1) * len);
            let l_out = &mut lo[j * len..];
            let l_in = &hi[..len];
            let r_in = &self.right[j * len..(j + 1) * len];
            for ((out, li), ri) in
                l_out.chunks_exact_mut(2 * d).zip(l_in.chunks_exact(2 * d)).zip(r_in.chunks_exact(2 * d))
            {
                let (o1, o2) = out.split_at_mut(d);
                let (l1, l2) = li.split_at(d);
                let (r1, r2) = ri.split_at(d);
                butterfly::<T, F>(o1, o2, l1, l2, r1, r2, alpha, llr_max);
            }
        }
        for j in 0..self.log_len as usize {
            let d = 1usize << self.layer_order[j];
            let (lo, hi) = self.right.split_at_mut((j + 1) * len);
            let r_in = &lo[j * len..];
            let r_out = &mut hi[..len];
            let l_in = &self.left[(j + 1) * len..(j + 2) * len];
            for ((out, ri), li) in
                r_out.chunks_exact_mut(2 * d).zip(r_in.chunks_exact(2 * d)).zip(l_in.chunks_exact(2 * d))
            {
                let (o1, o2) = out.split_at_mut(d);
                let (r1, r2) = ri.split_at(d);
                let (l1, l2) = li.split_at(d);
                // The R-pass is the L-pass with the roles of `L_in1` and
                // `R_in1` exchanged and `R_in2` as the pass-through term.
                butterfly::<T, F>(o1, o2, r1, r2, l1, l2, alpha, llr_max);
            }
        }
    }

    /// Hard decisions `(û, x̂)`; a zero LLR sum decides 0.
    pub fn hard_decision(&self) -> (Vec<u8>, Vec<u8>) {
        let mut u = vec![0u8; self.len];
        let mut x = vec![0u8; self.len];
        self.decide_into(&mut u, &mut x);
        (u, x)
    }

    fn decide_into(&self, u: &mut [u8], x: &mut [u8]) {
        let top = self.log_len as usize;
        for (s, out) in [(0, u), (top, x)] {
            for ((b, &l), &r) in out.iter_mut().zip(self.left(s)).zip(self.right(s)) {
                *b = (l + r < T::zero()) as u8;
            }
        }
    }

    /// Largest message magnitude anywhere in the graph.
    pub fn max_abs(&self) -> T {
        self.left
            .iter()
            .chain(&self.right)
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Half-PE kernel over one butterfly block:
/// `o1 = clip(α·f(a1, a2 + c2))`, `o2 = clip(α·f(c1, a1) + a2)`.
/// The L-pass uses `a = L_in`, `c = R_in`; the R-pass swaps them.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn butterfly<T: Float, F: Boxplus>(
    o1: &mut [T],
    o2: &mut [T],
    a1: &[T],
    a2: &[T],
    c1: &[T],
    c2: &[T],
    alpha: T,
    llr_max: T,
) {
    let d = o1.len();
    assert!(o2.len() == d && a1.len() == d && a2.len() == d && c1.len() == d && c2.len() == d);
    for i in 0..d {
        let (x1, x2, y1, y2) = (a1[i], a2[i], c1[i], c2[i]);
        o1[i] = clip(alpha * F::apply(x1, x2 + y2), llr_max);
        o2[i] = clip(alpha * F::apply(y1, x1) + x2, llr_max);
    }
}

/// `true` iff `x̂ = û·G_N` and `û` is zero on every frozen position.
pub fn check_codeword(u_hat: &[u8], x_hat: &[u8], code: &PolarCode) -> bool {
    if u_hat.len() != code.len() || x_hat.len() != code.len() {
        return false;
    }
    is_codeword(u_hat, x_hat, code.frozen_mask(), &mut Vec::with_capacity(u_hat.len()))
}

fn is_codeword(u_hat: &[u8], x_hat: &[u8], frozen: &[bool], scratch: &mut Vec<u8>) -> bool {
    if u_hat.iter().zip(frozen).any(|(&b, &f)| f && b != 0) {
        return false;
    }
    scratch.clear();
    scratch.extend_from_slice(u_hat);
    polar_transform(scratch);
    scratch == x_hat
}

/// Outcome of one BP decoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub u_hat: Vec<u8>,
    pub x_hat: Vec<u8>,
    pub iterations: usize,
    pub converged: bool,
    /// Sign changes of `L + R` at each `u` position over the last
    /// `flip_window` iterations.
    pub sign_flip_counts: Vec<u32>,
    /// Terminal `L + R` at the `u` side.
    pub u_llr: Vec<f64>,
}

impl DecodeResult {
    pub fn info_bits(&self, code: &PolarCode) -> Vec<u8> {
        code.extract(&self.u_hat)
    }
}

/// Per-call overrides of the plain decoding setup.
#[derive(Debug, Clone, Default)]
pub struct DecodeOptions<'a> {
    /// `(u index, bit)` priors pinned to `±llr_max`.
    pub pins: &'a [(usize, u8)],
    /// Layer realization; `None` is the identity order.
    pub layer_order: Option<&'a [u32]>,
}

enum Graph {
    F32(MessageGraph<f32>),
    F64(MessageGraph<f64>),
}

/// Reusable BP decoder bound to a code and configuration.
pub struct BpDecoder {
    code: PolarCode,
    cfg: DecoderConfig,
    graph: Graph,
    identity: Vec<u32>,
}

impl BpDecoder {
    pub fn new(code: &PolarCode, cfg: &DecoderConfig) -> Result<Self> {
        cfg.validate()?;
        let graph = match cfg.precision {
            Precision::F32 => Graph::F32(MessageGraph::new(code.log_len())),
            Precision::F64 => Graph::F64(MessageGraph::new(code.log_len())),
        };
        Ok(Self {
            code: code.clone(),
            cfg: *cfg,
            graph,
            identity: (0..code.log_len()).collect(),
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn decode(&mut self, channel: &[f64]) -> DecodeResult {
        self.decode_with(channel, &DecodeOptions::default())
    }

    pub fn decode_with(&mut self, channel: &[f64], opts: &DecodeOptions) -> DecodeResult {
        let order = opts.layer_order.unwrap_or(&self.identity).to_vec();
        debug_assert!(is_permutation(&order, self.code.log_len()));
        let cfg = self.cfg;
        let frozen = self.code.frozen_mask();
        match (&mut self.graph, cfg.boxplus) {
            (Graph::F32(g), BoxplusMode::MinApprox) => {
                run::<f32, MinApprox>(g, frozen, channel, &cfg, opts.pins, &order)
            }
            (Graph::F32(g), BoxplusMode::Exact) => {
                run::<f32, Exact>(g, frozen, channel, &cfg, opts.pins, &order)
            }
            (Graph::F64(g), BoxplusMode::MinApprox) => {
                run::<f64, MinApprox>(g, frozen, channel, &cfg, opts.pins, &order)
            }
            (Graph::F64(g), BoxplusMode::Exact) => {
                run::<f64, Exact>(g, frozen, channel, &cfg, opts.pins, &order)
            }
        }
    }
}

/// Decodes one frame with a fresh decoder.
pub fn decode(code: &PolarCode, channel: &[f64], cfg: &DecoderConfig) -> Result<DecodeResult> {
    Ok(BpDecoder::new(code, cfg)?.decode(channel))
}

fn is_permutation(order: &[u32], log_len: u32) -> bool {
    let mut seen = vec![false; log_len as usize];
    order.len() == log_len as usize
        && order.iter().all(|&o| o < log_len && !std::mem::replace(&mut seen[o as usize], true))
}

fn run<T: Float, F: Boxplus>(
    graph: &mut MessageGraph<T>,
    frozen: &[bool],
    channel: &[f64],
    cfg: &DecoderConfig,
    pins: &[(usize, u8)],
    order: &[u32],
) -> DecodeResult {
    let len = frozen.len();
    graph.init(frozen, channel, cfg.llr_max, pins, order);
    let alpha = T::from(cfg.alpha).unwrap();
    let llr_max = T::from(cfg.llr_max).unwrap();
    let window = cfg.flip_window;

    let mut u = vec![0u8; len];
    let mut x = vec![0u8; len];
    let mut scratch = Vec::with_capacity(len);
    // Ring of the last `window + 1` u-side decision vectors.
    let mut history: Vec<Vec<u8>> = Vec::with_capacity(window + 1);
    let mut head = 0usize;
    let mut iterations = 0;
    let mut converged = false;
    let mut snapshot = Vec::new();
    let mut prev_codeword = false;
    let mut record = |u: &[u8], history: &mut Vec<Vec<u8>>| {
        if history.len() < window + 1 {
            history.push(u.to_vec());
        } else {
            history[head].copy_from_slice(u);
        }
        head = (head + 1) % (window + 1);
    };

    while iterations < cfg.max_iters {
        graph.run_iteration::<F>(alpha, llr_max);
        iterations += 1;
        graph.decide_into(&mut u, &mut x);
        record(&u, &mut history);
        if cfg.stopping == Stopping::GMatrix && is_codeword(&u, &x, frozen, &mut scratch) {
            converged = true;
            break;
        }
        // A repeated message state repeats forever, so the remaining
        // iterations cannot change anything but the flip history. States are
        // only compared once the decisions form a codeword.
        if cfg.stopping == Stopping::FixedIters {
            let codeword = is_codeword(&u, &x, frozen, &mut scratch);
            if codeword && graph.unchanged_since(&mut snapshot, prev_codeword) {
                for _ in 0..(cfg.max_iters - iterations).min(window + 1) {
                    record(&u, &mut history);
                }
                iterations = cfg.max_iters;
            }
            prev_codeword = codeword;
        }
    }
    if cfg.stopping == Stopping::FixedIters {
        converged = is_codeword(&u, &x, frozen, &mut scratch);
    }
    debug_assert!(graph.max_abs() <= llr_max, "message exceeds llr_max");

    let mut flips = vec![0u32; len];
    if history.len() > 1 {
        // Oldest entry sits at `head` once the ring is full.
        let start = if history.len() == window + 1 { head } else { 0 };
        let n = history.len();
        for step in 1..n {
            let prev = &history[(start + step - 1) % n];
            let cur = &history[(start + step) % n];
            for ((f, a), b) in flips.iter_mut().zip(prev).zip(cur) {
                *f += (a != b) as u32;
            }
        }
    }
    let u_llr = graph
        .left(0)
        .iter()
        .zip(graph.right(0))
        .map(|(&l, &r)| (l + r).to_f64().unwrap())
        .collect();
    DecodeResult { u_hat: u, x_hat: x, iterations, converged, sign_flip_counts: flips, u_llr }
}
