//! Post-processing strategies for frames the clipped BP decoder fails on.
//!
//! Each strategy only runs after the base decoder has failed the G-matrix
//! check, and only ever accepts results that pass it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bp::{BpDecoder, DecodeOptions, DecodeResult, DecoderConfig};
use crate::channel::LlrFrame;
use crate::code::PolarCode;
use crate::error::{param, Result};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessMode {
    /// Pins candidates to the transmitted value (measurement only).
    Genie,
    /// Tries sign assignments, `+llr_max` first.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    None,
    Guess { max_bits: usize, mode: GuessMode },
    VirtualNoise { sigma_v2: f64, attempts: usize },
    ScaledBoxplus { alpha: f64 },
    /// `max_permutations` counts layer orders including the identity.
    MultiTrellis { max_permutations: usize },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::None => "none".into(),
            Strategy::Guess { max_bits, mode: GuessMode::Exhaustive } => format!("guess{max_bits}"),
            Strategy::Guess { max_bits, mode: GuessMode::Genie } => format!("guess{max_bits}-genie"),
            Strategy::VirtualNoise { .. } => "vnoise".into(),
            Strategy::ScaledBoxplus { .. } => "scaled".into(),
            Strategy::MultiTrellis { .. } => "multitrellis".into(),
        }
    }
}

/// Default number of virtual-noise redraws.
pub const DEFAULT_NOISE_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationConfig {
    pub strategy: Strategy,
    pub base: DecoderConfig,
}

impl MitigationConfig {
    pub fn new(strategy: Strategy, base: DecoderConfig) -> Self {
        Self { strategy, base }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        match self.strategy {
            Strategy::Guess { max_bits, .. } if !(1..=3).contains(&max_bits) => {
                param(format!("guess budget {max_bits} outside 1..=3"))
            }
            Strategy::VirtualNoise { sigma_v2, attempts } if !(sigma_v2 > 0.0) || attempts == 0 => {
                param("virtual noise needs sigma_v2 > 0 and at least one attempt")
            }
            Strategy::ScaledBoxplus { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                param(format!("alpha = {alpha} outside (0, 1]"))
            }
            Strategy::MultiTrellis { max_permutations: 0 } => param("need at least one layer order"),
            _ => Ok(()),
        }
    }
}

/// Default multi-trellis budget for a code of length `2^log_len`: the
/// identity plus every nontrivial cyclic rotation.
pub fn default_permutations(log_len: u32) -> usize {
    log_len as usize
}

/// Information positions ranked for guessing: most sign flips first, then
/// smallest terminal `|L + R|`, then lowest index.
pub fn detect_oscillating_bits(result: &DecodeResult, code: &PolarCode, top_m: usize) -> Vec<usize> {
    let mut ranked: Vec<usize> = code.info_set().to_vec();
    ranked.sort_by(|&a, &b| {
        result.sign_flip_counts[b]
            .cmp(&result.sign_flip_counts[a])
            .then(result.u_llr[a].abs().total_cmp(&result.u_llr[b].abs()))
            .then(a.cmp(&b))
    });
    ranked.truncate(top_m);
    ranked
}

/// Layer orders tried by the multi-trellis decoder: the identity, the cyclic
/// left rotations, then the remaining permutations in lexicographic order.
pub fn layer_orders(log_len: u32, cap: usize) -> Vec<Vec<u32>> {
    let n = log_len as usize;
    let identity: Vec<u32> = (0..log_len).collect();
    let mut out = vec![identity.clone()];
    for r in 1..n {
        if out.len() >= cap {
            return out;
        }
        let mut rot = identity.clone();
        rot.rotate_left(r);
        out.push(rot);
    }
    let mut perm = identity;
    while out.len() < cap && next_permutation(&mut perm) {
        if !is_rotation(&perm) {
            out.push(perm.clone());
        }
    }
    out.truncate(cap);
    out
}

fn is_rotation(perm: &[u32]) -> bool {
    let n = perm.len() as u32;
    perm.iter().enumerate().all(|(i, &p)| p == (perm[0] + i as u32) % n)
}

fn next_permutation(v: &mut [u32]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Result of a strategy run.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub result: DecodeResult,
    /// BP iterations across all restarts.
    pub iterations: usize,
    pub restarts: usize,
}

impl Attempt {
    fn fail(base: &DecodeResult, iterations: usize, restarts: usize) -> Self {
        Self { result: base.clone(), iterations, restarts }
    }
}

/// Belief pushing: pins the most oscillating information bits to `±llr_max`
/// and re-decodes from scratch, growing the pinned set one bit at a time.
///
/// `base` is the failed plain decode of the same frame. Genie mode needs the
/// transmitted `u`.
pub fn guess_decode(
    dec: &mut BpDecoder,
    code: &PolarCode,
    channel: &[f64],
    base: &DecodeResult,
    max_bits: usize,
    mode: GuessMode,
    truth: Option<&[u8]>,
) -> Attempt {
    if base.converged {
        return Attempt { result: base.clone(), iterations: 0, restarts: 0 };
    }
    let candidates = detect_oscillating_bits(base, code, max_bits);
    let (mut iterations, mut restarts) = (0, 0);
    let mut pins = Vec::with_capacity(max_bits);
    for b in 1..=candidates.len() {
        let chosen = &candidates[..b];
        let assignments: Vec<Vec<u8>> = match mode {
            GuessMode::Genie => {
                let u = truth.expect("genie guessing needs the transmitted u");
                vec![chosen.iter().map(|&i| u[i]).collect()]
            }
            GuessMode::Exhaustive => (0..1u32 << b)
                .map(|mask| (0..b).map(|j| ((mask >> (b - 1 - j)) & 1) as u8).collect())
                .collect(),
        };
        for bits in assignments {
            pins.clear();
            pins.extend(chosen.iter().copied().zip(bits));
            let r = dec.decode_with(channel, &DecodeOptions { pins: &pins, layer_order: None });
            iterations += r.iterations;
            restarts += 1;
            if r.converged {
                return Attempt { result: r, iterations, restarts };
            }
        }
    }
    Attempt::fail(base, iterations, restarts)
}

/// Re-decodes `y + n_v` with `n_v ~ N(0, σ_v²)`, keeping the channel `σ²` in
/// the LLR computation.
pub fn virtual_noise_decode<R: Rng + ?Sized>(
    dec: &mut BpDecoder,
    frame: &LlrFrame,
    base: &DecodeResult,
    sigma2: f64,
    sigma_v2: f64,
    attempts: usize,
    rng: &mut R,
) -> Attempt {
    if base.converged {
        return Attempt { result: base.clone(), iterations: 0, restarts: 0 };
    }
    let sigma_v = sigma_v2.sqrt();
    let mut llr = vec![0.0; frame.len()];
    let mut iterations = 0;
    for a in 0..attempts {
        for (l, &y) in llr.iter_mut().zip(&frame.y) {
            let n: f64 = rng.sample(StandardNormal);
            *l = 2.0 * (y + sigma_v * n) / sigma2;
        }
        let r = dec.decode(&llr);
        iterations += r.iterations;
        if r.converged {
            return Attempt { result: r, iterations, restarts: a + 1 };
        }
    }
    Attempt::fail(base, iterations, attempts)
}

/// Decodes with every boxplus output scaled by `alpha`.
pub fn scaled_boxplus_decode(
    code: &PolarCode,
    channel: &[f64],
    cfg: &DecoderConfig,
    alpha: f64,
) -> Result<DecodeResult> {
    let cfg = DecoderConfig { alpha, ..*cfg };
    crate::bp::decode(code, channel, &cfg)
}

/// Tries permuted-layer realizations of the factor graph until one passes the
/// G-matrix check. The identity order is skipped when `base` is supplied,
/// since that decode has already happened.
pub fn multi_trellis_decode(
    dec: &mut BpDecoder,
    code: &PolarCode,
    channel: &[f64],
    base: Option<&DecodeResult>,
    max_permutations: usize,
) -> Attempt {
    if let Some(b) = base.filter(|b| b.converged) {
        return Attempt { result: b.clone(), iterations: 0, restarts: 0 };
    }
    let orders = layer_orders(code.log_len(), max_permutations);
    let skip = base.is_some() as usize;
    let (mut iterations, mut restarts) = (0, 0);
    let mut last = None;
    for order in orders.iter().skip(skip) {
        let r = dec.decode_with(channel, &DecodeOptions { pins: &[], layer_order: Some(order) });
        iterations += r.iterations;
        restarts += 1;
        if r.converged {
            return Attempt { result: r, iterations, restarts };
        }
        last = Some(r);
    }
    match base {
        Some(b) => Attempt::fail(b, iterations, restarts),
        None => Attempt { result: last.expect("at least one order"), iterations, restarts },
    }
}

/// Which stage produced a pipeline answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Base,
    Strategy,
    /// Nothing converged; the result is the base decode.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigatedOutcome {
    pub result: DecodeResult,
    pub stage: Stage,
    pub total_iterations: usize,
    pub restarts: usize,
}

/// Per-frame inputs that do not live in the frame itself.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a> {
    /// Transmitted `u` (genie guessing only).
    pub truth: Option<&'a [u8]>,
    /// Channel noise variance used to form LLRs.
    pub sigma2: f64,
    pub noise_seed: u64,
    /// Stream coordinates of the virtual noise for this frame.
    pub noise_key: (u64, u64),
}

/// Base BP decoder followed by one mitigation strategy.
pub struct Mitigator {
    code: PolarCode,
    cfg: MitigationConfig,
    base: BpDecoder,
    scaled: Option<BpDecoder>,
}

impl Mitigator {
    pub fn new(code: &PolarCode, cfg: &MitigationConfig) -> Result<Self> {
        cfg.validate()?;
        let scaled = match cfg.strategy {
            Strategy::ScaledBoxplus { alpha } => {
                Some(BpDecoder::new(code, &DecoderConfig { alpha, ..cfg.base })?)
            }
            _ => None,
        };
        Ok(Self { code: code.clone(), cfg: *cfg, base: BpDecoder::new(code, &cfg.base)?, scaled })
    }

    pub fn config(&self) -> &MitigationConfig {
        &self.cfg
    }

    pub fn decode(&mut self, frame: &LlrFrame, ctx: &FrameContext) -> MitigatedOutcome {
        let base = self.base.decode(&frame.llr);
        if base.converged || self.cfg.strategy == Strategy::None {
            let stage = if base.converged { Stage::Base } else { Stage::Failed };
            let total_iterations = base.iterations;
            return MitigatedOutcome { result: base, stage, total_iterations, restarts: 0 };
        }
        let attempt = match self.cfg.strategy {
            Strategy::None => unreachable!(),
            Strategy::Guess { max_bits, mode } => {
                guess_decode(&mut self.base, &self.code, &frame.llr, &base, max_bits, mode, ctx.truth)
            }
            Strategy::VirtualNoise { sigma_v2, attempts } => {
                let mut rng = stream(ctx.noise_seed, Domain::VirtualNoise, ctx.noise_key.0, ctx.noise_key.1);
                virtual_noise_decode(&mut self.base, frame, &base, ctx.sigma2, sigma_v2, attempts, &mut rng)
            }
            Strategy::ScaledBoxplus { .. } => {
                let r = self.scaled.as_mut().unwrap().decode(&frame.llr);
                let iterations = r.iterations;
                if r.converged {
                    Attempt { result: r, iterations, restarts: 1 }
                } else {
                    Attempt::fail(&base, iterations, 1)
                }
            }
            Strategy::MultiTrellis { max_permutations } => {
                multi_trellis_decode(&mut self.base, &self.code, &frame.llr, Some(&base), max_permutations)
            }
        };
        let stage = if attempt.result.converged { Stage::Strategy } else { Stage::Failed };
        MitigatedOutcome {
            result: attempt.result,
            stage,
            total_iterations: base.iterations + attempt.iterations,
            restarts: attempt.restarts,
        }
    }
}

/// Success rate of a strategy over a captured test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub strategy: String,
    pub total: u64,
    pub recovered: u64,
    pub tau: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Records decoded correctly by the base decoder alone.
    pub recovered_by_base: u64,
    /// Records decoded correctly after the strategy ran.
    pub recovered_by_strategy: u64,
    /// Strategy converged on a codeword other than the transmitted one.
    pub wrong_codeword: u64,
    pub mean_extra_iterations: f64,
}

impl SuccessReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(self).expect("report serializes");
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8")
    }
}

/// Replays every record through the mitigated decoder and counts exact
/// recoveries of the transmitted `u`.
pub fn measure_success_rate(
    test_set: &crate::metrics::TestSet,
    code: &PolarCode,
    cfg: &MitigationConfig,
    seed: u64,
    workers: usize,
) -> Result<SuccessReport> {
    use rayon::prelude::*;

    test_set.check_code(code)?;
    cfg.validate()?;
    let sigma2 = test_set.header.sigma2 as f64;
    let outcomes: Vec<(bool, Stage, usize, usize)> = crate::metrics::with_pool(workers, || {
        test_set
            .records
            .par_iter()
            .map_init(
                || Mitigator::new(code, cfg).expect("validated"),
                |m, rec| {
                    let frame = rec.frame();
                    let ctx = FrameContext {
                        truth: Some(&rec.u),
                        sigma2,
                        noise_seed: seed,
                        noise_key: (0, rec.frame_id),
                    };
                    let out = m.decode(&frame, &ctx);
                    let base_iters = if out.stage == Stage::Base { out.total_iterations } else { 0 };
                    (out.result.u_hat == rec.u, out.stage, out.total_iterations, base_iters)
                },
            )
            .collect()
    })?;
    let total = outcomes.len() as u64;
    let count = |f: &dyn Fn(&(bool, Stage, usize, usize)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let recovered = count(&|o| o.0);
    let recovered_by_base = count(&|o| o.0 && o.1 == Stage::Base);
    let recovered_by_strategy = count(&|o| o.0 && o.1 == Stage::Strategy);
    let wrong_codeword = count(&|o| !o.0 && o.1 != Stage::Failed);
    let base_iters = cfg.base.max_iters as f64;
    let extra = if total == 0 {
        0.0
    } else {
        outcomes
            .iter()
            .map(|o| if o.1 == Stage::Base { 0.0 } else { o.2 as f64 - base_iters.min(o.2 as f64) })
            .sum::<f64>()
            / total as f64
    };
    let (ci_low, ci_high) = if total == 0 {
        (0.0, 1.0)
    } else {
        crate::metrics::confidence_interval(recovered, total)
    };
    Ok(SuccessReport {
        strategy: cfg.strategy.label(),
        total,
        recovered,
        tau: if total == 0 { 0.0 } else { recovered as f64 / total as f64 },
        ci_low,
        ci_high,
        recovered_by_base,
        recovered_by_strategy,
        wrong_codeword,
        mean_extra_iterations: extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{modulate, random_transmission, ChannelConfig};

    fn fake_result(flips: Vec<u32>, llr: Vec<f64>) -> DecodeResult {
        let n = flips.len();
        DecodeResult {
            u_hat: vec![0; n],
            x_hat: vec![0; n],
            iterations: 10,
            converged: false,
            sign_flip_counts: flips,
            u_llr: llr,
        }
    }

    #[test]
    fn oscillation_ranking() {
        let code = PolarCode::from_info_set(2, vec![0, 1, 2]).unwrap();
        let r = fake_result(vec![5, 0, 9, 0], vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(detect_oscillating_bits(&r, &code, 2), vec![2, 0]);
        // No flips: fall back to the smallest terminal |L + R|.
        let r = fake_result(vec![0; 4], vec![3.0, -0.5, 2.0, 0.1]);
        assert_eq!(detect_oscillating_bits(&r, &code, 2), vec![1, 2]);
        // Frozen positions are never candidates.
        let r = fake_result(vec![0, 0, 0, 7], vec![1.0; 4]);
        assert!(!detect_oscillating_bits(&r, &code, 3).contains(&3));
    }

    #[test]
    fn layer_order_sequence() {
        let orders = layer_orders(4, 100);
        assert_eq!(orders.len(), 24);
        assert_eq!(orders[0], vec![0, 1, 2, 3]);
        assert_eq!(orders[1], vec![1, 2, 3, 0]);
        assert_eq!(orders[2], vec![2, 3, 0, 1]);
        assert_eq!(orders[3], vec![3, 0, 1, 2]);
        assert_eq!(orders[4], vec![0, 1, 3, 2]);
        let unique: std::collections::HashSet<_> = orders.iter().collect();
        assert_eq!(unique.len(), 24);
        assert_eq!(layer_orders(10, 10).len(), 10);
        assert_eq!(layer_orders(10, 1), vec![(0..10).collect::<Vec<u32>>()]);
    }

    #[test]
    fn strategies_short_circuit_on_converged_frames() {
        let code = PolarCode::bhattacharyya(7, 64, 0.0).unwrap();
        let chan = ChannelConfig::new(6.0, code.rate()).unwrap();
        let t = random_transmission(&code, &chan, false, &mut stream(1, Domain::Frame, 0, 0));
        let base_cfg = DecoderConfig::default();
        let plain = crate::bp::decode(&code, &t.frame.llr, &base_cfg).unwrap();
        assert!(plain.converged);
        for strategy in [
            Strategy::None,
            Strategy::Guess { max_bits: 3, mode: GuessMode::Exhaustive },
            Strategy::VirtualNoise { sigma_v2: 0.36, attempts: 5 },
            Strategy::ScaledBoxplus { alpha: 0.9375 },
            Strategy::MultiTrellis { max_permutations: 7 },
        ] {
            let mut m = Mitigator::new(&code, &MitigationConfig::new(strategy, base_cfg)).unwrap();
            let ctx = FrameContext { truth: None, sigma2: chan.sigma2, noise_seed: 0, noise_key: (0, 0) };
            let out = m.decode(&t.frame, &ctx);
            assert_eq!(out.stage, Stage::Base);
            assert_eq!(out.result, plain);
            assert_eq!(out.restarts, 0);
        }
    }

    #[test]
    fn identity_only_multi_trellis_matches_base() {
        let code = PolarCode::bhattacharyya(8, 128, 0.0).unwrap();
        let chan = ChannelConfig::new(1.0, code.rate()).unwrap();
        let cfg = DecoderConfig { max_iters: 30, ..Default::default() };
        let mut dec = BpDecoder::new(&code, &cfg).unwrap();
        for f in 0..20 {
            let t = random_transmission(&code, &chan, false, &mut stream(2, Domain::Frame, 0, f));
            let base = dec.decode(&t.frame.llr);
            let mt = multi_trellis_decode(&mut dec, &code, &t.frame.llr, None, 1);
            assert_eq!(mt.result, base);
        }
    }

    #[test]
    fn pinned_prior_dominates_on_noiseless_frames() {
        let code = PolarCode::bhattacharyya(6, 32, 0.0).unwrap();
        let x = code.encode(&[1; 32]).unwrap();
        let frame = LlrFrame::from_observations(modulate(&x), 0.5);
        let mut dec = BpDecoder::new(&code, &DecoderConfig::default()).unwrap();
        let pos = code.info_set()[0];
        let r = dec.decode_with(&frame.llr, &DecodeOptions { pins: &[(pos, 0)], layer_order: None });
        assert_eq!(r.u_hat[pos], 0);
    }

    #[test]
    fn zero_virtual_noise_repeats_the_failure() {
        let code = PolarCode::bhattacharyya(8, 128, 0.0).unwrap();
        let chan = ChannelConfig::new(0.0, code.rate()).unwrap();
        let cfg = DecoderConfig { max_iters: 20, ..Default::default() };
        let mut dec = BpDecoder::new(&code, &cfg).unwrap();
        let mut seen = 0;
        for f in 0..50 {
            let t = random_transmission(&code, &chan, false, &mut stream(3, Domain::Frame, 0, f));
            let base = dec.decode(&t.frame.llr);
            if base.converged {
                continue;
            }
            seen += 1;
            let mut rng = stream(0, Domain::VirtualNoise, 0, f);
            let a = virtual_noise_decode(&mut dec, &t.frame, &base, chan.sigma2, 1e-300, 3, &mut rng);
            assert!(!a.result.converged);
            assert_eq!(a.result, base);
        }
        assert!(seen > 0);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = DecoderConfig::default();
        for s in [
            Strategy::Guess { max_bits: 4, mode: GuessMode::Genie },
            Strategy::VirtualNoise { sigma_v2: 0.0, attempts: 5 },
            Strategy::VirtualNoise { sigma_v2: 0.36, attempts: 0 },
            Strategy::ScaledBoxplus { alpha: 1.5 },
            Strategy::MultiTrellis { max_permutations: 0 },
        ] {
            assert!(MitigationConfig::new(s, base).validate().is_err(), "{s:?}");
        }
    }
}
