//! Successive-cancellation and SC-list decoding.
//!
//! With `G_N = F^{⊗n}` and no bit reversal, a node of size `2s` holding LLRs
//! `λ` splits into the left child `λ_a[i] = λ[i] ⊞ λ[i+s]` and, once the left
//! codeword `c_a` is known, the right child `λ_b[i] = λ[i+s] ± λ[i]`. The node
//! codeword is `(c_a ⊕ c_b, c_b)`.

use std::rc::Rc;

use crate::bp::boxplus_exact;
use crate::code::PolarCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMetric {
    /// `ln(1 + e^{-(1-2u)λ})`, the exact negative log-probability increment.
    Exact,
    /// `|λ|` whenever the decision disagrees with the sign of `λ`.
    HardwareApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SclConfig {
    pub list_size: usize,
    pub path_metric: PathMetric,
}

impl SclConfig {
    pub fn new(list_size: usize) -> Self {
        assert!(list_size >= 1, "list size must be positive");
        Self { list_size, path_metric: PathMetric::Exact }
    }
}

#[inline]
fn right_llr(a: f64, b: f64, left_bit: u8) -> f64 {
    if left_bit == 0 {
        b + a
    } else {
        b - a
    }
}

#[inline]
fn hard(llr: f64) -> u8 {
    (llr < 0.0) as u8
}

/// Plain SC decoding; returns the information bits in index order.
pub fn sc_decode(code: &PolarCode, llr: &[f64]) -> Vec<u8> {
    assert_eq!(llr.len(), code.len(), "frame length");
    let mut u = Vec::with_capacity(code.len());
    sc_node(llr, code.frozen_mask(), &mut u);
    code.extract(&u)
}

fn sc_node(llr: &[f64], frozen: &[bool], u: &mut Vec<u8>) -> Vec<u8> {
    if llr.len() == 1 {
        let bit = if frozen[0] { 0 } else { hard(llr[0]) };
        u.push(bit);
        return vec![bit];
    }
    let h = llr.len() / 2;
    let (l1, l2) = llr.split_at(h);
    let la: Vec<f64> = l1.iter().zip(l2).map(|(&a, &b)| boxplus_exact(a, b)).collect();
    let ca = sc_node(&la, &frozen[..h], u);
    let lb: Vec<f64> = l1.iter().zip(l2).zip(&ca).map(|((&a, &b), &c)| right_llr(a, b, c)).collect();
    let cb = sc_node(&lb, &frozen[h..], u);
    let mut out: Vec<u8> = ca.iter().zip(&cb).map(|(a, b)| a ^ b).collect();
    out.extend_from_slice(&cb);
    out
}

/// A decoding path. Level arrays are shared between forks until written.
#[derive(Clone)]
struct Path {
    /// `llr[λ]` holds the active node LLRs at level `λ` (size `2^λ`).
    llr: Vec<Rc<Vec<f64>>>,
    /// `left[λ]` holds the finished left-child codeword below level `λ + 1`.
    left: Vec<Rc<Vec<u8>>>,
    u: Vec<u8>,
    metric: f64,
}

impl Path {
    fn new(log_len: usize, len: usize) -> Self {
        Self {
            llr: (0..log_len).map(|l| Rc::new(vec![0.0; 1 << l])).collect(),
            left: (0..log_len).map(|l| Rc::new(vec![0; 1 << l])).collect(),
            u: Vec::with_capacity(len),
            metric: 0.0,
        }
    }

    /// Brings `llr[0]` up to date for bit `phi`.
    fn descend(&mut self, channel: &[f64], phi: usize, log_len: usize) {
        let top = if phi == 0 { log_len } else { phi.trailing_zeros() as usize + 1 };
        let parent = |p: &Self, lvl: usize| -> Rc<Vec<f64>> {
            if lvl == log_len {
                Rc::new(Vec::new())
            } else {
                Rc::clone(&p.llr[lvl])
            }
        };
        for lvl in (1..=top).rev() {
            let held = parent(self, lvl);
            let src: &[f64] = if lvl == log_len { channel } else { &held };
            let h = src.len() / 2;
            let (a, b) = src.split_at(h);
            if phi != 0 && lvl == top {
                let cl = Rc::clone(&self.left[lvl - 1]);
                let dst = Rc::make_mut(&mut self.llr[lvl - 1]);
                for i in 0..h {
                    dst[i] = right_llr(a[i], b[i], cl[i]);
                }
            } else {
                let dst = Rc::make_mut(&mut self.llr[lvl - 1]);
                for i in 0..h {
                    dst[i] = boxplus_exact(a[i], b[i]);
                }
            }
        }
    }

    /// Records decision `bit` for index `phi` and folds partial sums upward.
    fn commit(&mut self, phi: usize, bit: u8, log_len: usize) {
        self.u.push(bit);
        let mut cur = vec![bit];
        for lvl in 0..log_len {
            if (phi >> lvl) & 1 == 0 {
                *Rc::make_mut(&mut self.left[lvl]) = cur;
                return;
            }
            let left = &self.left[lvl];
            let mut next: Vec<u8> = left.iter().zip(&cur).map(|(a, b)| a ^ b).collect();
            next.extend_from_slice(&cur);
            cur = next;
        }
    }
}

fn penalty(llr: f64, bit: u8, metric: PathMetric) -> f64 {
    match metric {
        PathMetric::Exact => {
            let v = if bit == 0 { llr } else { -llr };
            if v >= 0.0 {
                (-v).exp().ln_1p()
            } else {
                -v + v.exp().ln_1p()
            }
        }
        PathMetric::HardwareApprox => {
            if bit == hard(llr) {
                0.0
            } else {
                llr.abs()
            }
        }
    }
}

/// Output of list decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    pub info_bits: Vec<u8>,
    /// Full-length `u` of the selected path.
    pub u: Vec<u8>,
    pub metric: f64,
    /// Metrics of every surviving path, in list order.
    pub path_metrics: Vec<f64>,
}

/// SC-list decoding without CRC; returns the information bits of the
/// lowest-metric path.
pub fn scl_decode(code: &PolarCode, llr: &[f64], cfg: &SclConfig) -> Vec<u8> {
    scl_decode_full(code, llr, cfg).info_bits
}

pub fn scl_decode_full(code: &PolarCode, llr: &[f64], cfg: &SclConfig) -> SclOutput {
    assert_eq!(llr.len(), code.len(), "frame length");
    let log_len = code.log_len() as usize;
    let len = code.len();
    let mut paths = vec![Path::new(log_len, len)];
    let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * cfg.list_size);

    for phi in 0..len {
        for p in paths.iter_mut() {
            p.descend(llr, phi, log_len);
        }
        if code.is_frozen(phi) {
            for p in paths.iter_mut() {
                p.metric += penalty(p.llr[0][0], 0, cfg.path_metric);
                p.commit(phi, 0, log_len);
            }
            continue;
        }
        candidates.clear();
        for (idx, p) in paths.iter().enumerate() {
            let l = p.llr[0][0];
            for bit in [0u8, 1] {
                candidates.push((p.metric + penalty(l, bit, cfg.path_metric), idx, bit));
            }
        }
        // Stable on (path, bit) order, so equal metrics favour lower indices.
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        candidates.truncate(cfg.list_size);
        candidates.sort_by_key(|&(_, idx, bit)| (idx, bit));
        let mut next = Vec::with_capacity(candidates.len());
        for &(metric, idx, bit) in &candidates {
            let mut p = paths[idx].clone();
            p.metric = metric;
            p.commit(phi, bit, log_len);
            next.push(p);
        }
        paths = next;
    }

    let best = paths
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.metric.total_cmp(&b.1.metric).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one path");
    let u = paths[best].u.clone();
    SclOutput {
        info_bits: code.extract(&u),
        metric: paths[best].metric,
        path_metrics: paths.iter().map(|p| p.metric).collect(),
        u,
    }
}
