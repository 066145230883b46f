//! BPSK over AWGN and channel LLRs.
//!
//! LLRs follow `L = ln P(bit = 0) / P(bit = 1)`, so a positive value favours
//! bit 0 (symbol +1).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::code::PolarCode;
use crate::error::{param, Result};

/// AWGN operating point. `Es = 1`, so `σ² = 1 / (2·R·Eb/N0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub ebn0_db: f64,
    pub rate: f64,
    pub sigma2: f64,
    /// Transmit without adding noise (LLRs still scaled by `σ²`).
    pub noiseless: bool,
}

impl ChannelConfig {
    pub fn new(ebn0_db: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return param(format!("rate {rate} outside (0, 1]"));
        }
        if !ebn0_db.is_finite() {
            return param("Eb/N0 must be finite");
        }
        let sigma2 = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
        Ok(Self { ebn0_db, rate, sigma2, noiseless: false })
    }

    pub fn noiseless(mut self, on: bool) -> Self {
        self.noiseless = on;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Received frame: channel LLRs plus the raw observations they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub llr: Vec<f64>,
    pub y: Vec<f64>,
}

impl LlrFrame {
    pub fn from_observations(y: Vec<f64>, sigma2: f64) -> Self {
        let llr = y.iter().map(|&v| 2.0 * v / sigma2).collect();
        Self { llr, y }
    }

    pub fn len(&self) -> usize {
        self.llr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llr.is_empty()
    }

    /// Rounds `y` and the LLRs to `f32`, the precision frames are stored in.
    pub fn quantize_f32(&mut self) {
        for v in self.llr.iter_mut().chain(self.y.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }

    /// Flips the sign of every observation and LLR.
    pub fn negated(&self) -> Self {
        Self {
            llr: self.llr.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }
}

/// BPSK: bit 0 → +1, bit 1 → −1.
pub fn modulate(x: &[u8]) -> Vec<f64> {
    x.iter().map(|&b| 1.0 - 2.0 * (b & 1) as f64).collect()
}

pub fn transmit<R: Rng + ?Sized>(symbols: &[f64], cfg: &ChannelConfig, rng: &mut R) -> LlrFrame {
    let sigma = cfg.sigma();
    let y = symbols
        .iter()
        .map(|&s| {
            if cfg.noiseless {
                s
            } else {
                let n: f64 = rng.sample(StandardNormal);
                s + sigma * n
            }
        })
        .collect();
    LlrFrame::from_observations(y, cfg.sigma2)
}

/// `Es/N0 [dB] = Eb/N0 [dB] + 10·log10(R)`.
pub fn ebn0_to_esn0(ebn0_db: f64, rate: f64) -> f64 {
    ebn0_db + 10.0 * rate.log10()
}

/// One transmitted frame together with its ground truth.
#[derive(Debug, Clone)]
pub struct Transmission {
    /// Full-length `u`, frozen positions zero.
    pub u: Vec<u8>,
    pub x: Vec<u8>,
    pub frame: LlrFrame,
}

/// Draws random information bits (or all zeros), encodes and transmits.
pub fn random_transmission<R: Rng + ?Sized>(
    code: &PolarCode,
    cfg: &ChannelConfig,
    all_zero: bool,
    rng: &mut R,
) -> Transmission {
    let info: Vec<u8> = if all_zero {
        vec![0; code.k()]
    } else {
        (0..code.k()).map(|_| rng.random::<bool>() as u8).collect()
    };
    let u = code.expand(&info).expect("info length matches k");
    let mut x = u.clone();
    crate::code::polar_transform(&mut x);
    let frame = transmit(&modulate(&x), cfg, rng);
    Transmission { u, x, frame }
}
