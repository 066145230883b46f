//! Polar code construction and encoding.
//!
//! The generator matrix is the plain Kronecker power `G_N = F^{⊗n}` with
//! `F = [1 0; 1 1]`; no bit-reversal permutation is applied. Index `i` of `u`
//! is read MSB first when walking the polarization tree, so the upper half of
//! `u` sits on the degraded (`Z⁻`) branch of the first split.

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Largest supported `log2(N)`.
pub const MAX_LOG_LEN: u32 = 20;

/// How the information set of a [`PolarCode`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Bhattacharyya,
    Explicit,
    /// Parent code with `m` extra frozen positions drawn with `seed`.
    Extended { parent_digest: u64, m: usize, seed: u64 },
}

/// Bhattacharyya parameters of the `N` synthesized bit channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityProfile {
    pub z: Vec<f64>,
}

impl ReliabilityProfile {
    /// Bhattacharyya bounds for BI-AWGN at `esn0_db`, starting from
    /// `Z₀ = exp(-Es/N0)` and applying `Z⁻ = 2Z - Z²`, `Z⁺ = Z²` per level.
    pub fn bhattacharyya(log_len: u32, esn0_db: f64) -> Result<Self> {
        if !(1..=MAX_LOG_LEN).contains(&log_len) {
            return param(format!("n = {log_len} outside 1..={MAX_LOG_LEN}"));
        }
        if !esn0_db.is_finite() {
            return param("design Es/N0 must be finite");
        }
        let z0 = (-(10f64.powf(esn0_db / 10.0))).exp();
        let mut z = vec![z0];
        for _ in 0..log_len {
            let mut next = Vec::with_capacity(z.len() * 2);
            for &zi in &z {
                next.push(2.0 * zi - zi * zi);
                next.push(zi * zi);
            }
            z = next;
        }
        Ok(Self { z })
    }

    /// Indices ordered from most to least reliable (ascending `Z`, ties to the
    /// higher index).
    pub fn reliability_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.z.len()).collect();
        order.sort_by(|&a, &b| self.z[a].total_cmp(&self.z[b]).then(b.cmp(&a)));
        order
    }
}

/// Parameters of a polar code: length, information set and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    log_len: u32,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
    design_esn0_db: Option<f64>,
    construction: Construction,
}

impl PolarCode {
    /// Builds the code from the `k` most reliable bit channels of a
    /// Bhattacharyya profile designed at `design_esn0_db`.
    pub fn bhattacharyya(log_len: u32, k: usize, design_esn0_db: f64) -> Result<Self> {
        Ok(Self::bhattacharyya_with_profile(log_len, k, design_esn0_db)?.0)
    }

    pub fn bhattacharyya_with_profile(
        log_len: u32,
        k: usize,
        design_esn0_db: f64,
    ) -> Result<(Self, ReliabilityProfile)> {
        let profile = ReliabilityProfile::bhattacharyya(log_len, design_esn0_db)?;
        let len = profile.z.len();
        if k == 0 || k > len {
            return param(format!("k = {k} outside 1..={len}"));
        }
        let mut info: Vec<usize> = profile.reliability_order()[..k].to_vec();
        info.sort_unstable();
        let code = Self::from_parts(log_len, info, Some(design_esn0_db), Construction::Bhattacharyya)?;
        Ok((code, profile))
    }

    /// Code with an explicitly given information set.
    pub fn from_info_set(log_len: u32, info_set: Vec<usize>) -> Result<Self> {
        Self::from_parts(log_len, info_set, None, Construction::Explicit)
    }

    fn from_parts(
        log_len: u32,
        mut info_set: Vec<usize>,
        design_esn0_db: Option<f64>,
        construction: Construction,
    ) -> Result<Self> {
        if !(1..=MAX_LOG_LEN).contains(&log_len) {
            return param(format!("n = {log_len} outside 1..={MAX_LOG_LEN}"));
        }
        let len = 1usize << log_len;
        info_set.sort_unstable();
        info_set.dedup();
        if info_set.is_empty() || info_set.len() > len {
            return param(format!("information set size {} outside 1..={len}", info_set.len()));
        }
        if let Some(&bad) = info_set.iter().find(|&&i| i >= len) {
            return param(format!("information index {bad} out of range for N = {len}"));
        }
        let mut frozen = vec![true; len];
        for &i in &info_set {
            frozen[i] = false;
        }
        Ok(Self { log_len, info_set, frozen, design_esn0_db, construction })
    }

    /// Freezes `m` additional information positions chosen uniformly at random.
    pub fn extend_frozen(&self, m: usize, seed: u64) -> Result<Self> {
        let k = self.k();
        if m > k {
            return param(format!("cannot freeze m = {m} of k = {k} information bits"));
        }
        if m == 0 {
            return Ok(self.clone());
        }
        if m == k {
            return param("extension would leave no information bits");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drop = vec![false; k];
        for pos in index::sample(&mut rng, k, m) {
            drop[pos] = true;
        }
        let info = self
            .info_set
            .iter()
            .zip(&drop)
            .filter(|(_, &d)| !d)
            .map(|(&i, _)| i)
            .collect();
        Self::from_parts(
            self.log_len,
            info,
            self.design_esn0_db,
            Construction::Extended { parent_digest: self.digest(), m, seed },
        )
    }

    pub fn log_len(&self) -> u32 {
        self.log_len
    }

    /// Block length `N`.
    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k(&self) -> usize {
        self.info_set.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.len() as f64
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    /// `true` at frozen positions.
    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn design_esn0_db(&self) -> Option<f64> {
        self.design_esn0_db
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    /// 64-bit FNV-1a hash of `(N, k, sorted information set)`.
    pub fn digest(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.len() as u64);
        h.write_u64(self.k() as u64);
        for &i in &self.info_set {
            h.write_u64(i as u64);
        }
        h.finish()
    }

    /// Places `info_bits` on the information set (zeros elsewhere).
    pub fn expand(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.k() {
            return Err(Error::Length { expected: self.k(), actual: info_bits.len() });
        }
        let mut u = vec![0u8; self.len()];
        for (&pos, &b) in self.info_set.iter().zip(info_bits) {
            u[pos] = b & 1;
        }
        Ok(u)
    }

    /// Information bits of a full-length `u`.
    pub fn extract(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&i| u[i]).collect()
    }

    /// Codeword `x = u·G_N` for the given information bits.
    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        let mut x = self.expand(info_bits)?;
        polar_transform(&mut x);
        Ok(x)
    }
}

/// In-place `v ← v·F^{⊗n}` over GF(2). The map is an involution.
///
/// # Panics
///
/// Panics if the length is not a power of two.
pub fn polar_transform(v: &mut [u8]) {
    let len = v.len();
    assert!(len.is_power_of_two(), "length {len} is not a power of two");
    if len >= 2 {
        for q in v.chunks_exact_mut(2) {
            q[0] ^= q[1];
        }
    }
    let mut d = 2;
    while d < len {
        for block in v.chunks_exact_mut(2 * d) {
            let (lo, hi) = block.split_at_mut(d);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        d *= 2;
    }
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    n: u32,
    #[serde(rename = "N")]
    len: usize,
    k: usize,
    design_esn0_db: Option<f64>,
    construction: Construction,
    digest: String,
    info_set: Vec<usize>,
}

impl PolarCode {
    /// Serializes the code to its TOML text form.
    pub fn to_toml(&self) -> String {
        let file = CodeFile {
            n: self.log_len,
            len: self.len(),
            k: self.k(),
            design_esn0_db: self.design_esn0_db,
            construction: self.construction.clone(),
            digest: format!("{:016x}", self.digest()),
            info_set: self.info_set.clone(),
        };
        toml::to_string(&file).expect("code file serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CodeFile =
            toml::from_str(text).map_err(|e| Error::Format(format!("code file: {e}")))?;
        if file.len != 1usize.checked_shl(file.n).unwrap_or(0) {
            return Err(Error::Format(format!("N = {} is not 2^{}", file.len, file.n)));
        }
        if file.k != file.info_set.len() {
            return Err(Error::Format(format!(
                "k = {} but information set has {} entries",
                file.k,
                file.info_set.len()
            )));
        }
        let code = Self::from_parts(
            file.n,
            file.info_set,
            file.design_esn0_db,
            file.construction,
        )?;
        let stored = u64::from_str_radix(&file.digest, 16)
            .map_err(|e| Error::Format(format!("digest: {e}")))?;
        if stored != code.digest() {
            return Err(Error::DigestMismatch { expected: code.digest(), found: stored });
        }
        Ok(code)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_toml().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense `F^{⊗n}` by explicit Kronecker products.
    fn kron_generator(log_len: u32) -> Vec<Vec<u8>> {
        let mut g = vec![vec![1u8]];
        for _ in 0..log_len {
            let s = g.len();
            let mut next = vec![vec![0u8; 2 * s]; 2 * s];
            for r in 0..s {
                for c in 0..s {
                    let v = g[r][c];
                    next[r][c] = v;
                    next[s + r][c] = v;
                    next[s + r][s + c] = v;
                }
            }
            g = next;
        }
        g
    }

    fn dense_multiply(u: &[u8], g: &[Vec<u8>]) -> Vec<u8> {
        (0..u.len())
            .map(|c| u.iter().zip(g).fold(0, |acc, (&ui, row)| acc ^ (ui & row[c])))
            .collect()
    }

    #[test]
    fn z_recursion_n1() {
        let p = ReliabilityProfile::bhattacharyya(1, 0.0).unwrap();
        let z0 = (-1f64).exp();
        assert!((p.z[0] - (2.0 * z0 - z0 * z0)).abs() < 1e-15);
        assert!((p.z[0] - 0.60042).abs() < 1e-5);
        assert!((p.z[1] - 0.13534).abs() < 1e-5);
        let code = PolarCode::bhattacharyya(1, 1, 0.0).unwrap();
        assert_eq!(code.info_set(), &[1]);
    }

    #[test]
    fn full_rate_selects_everything() {
        let code = PolarCode::bhattacharyya(3, 8, 0.0).unwrap();
        assert_eq!(code.info_set(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!(code.frozen_mask().iter().all(|&f| !f));
    }

    #[test]
    fn half_rate_1024_at_0db() {
        let code = PolarCode::bhattacharyya(12, 2048, 0.0).unwrap();
        assert_eq!(code.len(), 4096);
        assert_eq!(code.k(), 2048);
        assert_eq!(code.rate(), 0.5);
        // The last index is the all-plus channel and always the most reliable.
        assert!(code.info_set().contains(&4095));
        assert!(code.is_frozen(0));
    }

    #[test]
    fn ties_break_toward_higher_index() {
        // Z₀ = 0 collapses every channel to Z = 0.
        let p = ReliabilityProfile { z: vec![0.0; 4] };
        assert_eq!(p.reliability_order(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PolarCode::bhattacharyya(0, 1, 0.0).is_err());
        assert!(PolarCode::bhattacharyya(21, 1, 0.0).is_err());
        assert!(PolarCode::bhattacharyya(3, 0, 0.0).is_err());
        assert!(PolarCode::bhattacharyya(3, 9, 0.0).is_err());
        assert!(PolarCode::from_info_set(3, vec![8]).is_err());
    }

    #[test]
    fn encode_kernel_examples() {
        let code = PolarCode::from_info_set(1, vec![0, 1]).unwrap();
        assert_eq!(code.encode(&[0, 0]).unwrap(), vec![0, 0]);
        assert_eq!(code.encode(&[0, 1]).unwrap(), vec![1, 1]);
        assert_eq!(code.encode(&[1, 0]).unwrap(), vec![1, 0]);
        assert!(matches!(code.encode(&[1]), Err(Error::Length { expected: 2, actual: 1 })));
    }

    #[test]
    fn butterfly_matches_dense_kronecker() {
        for log_len in 1..=5 {
            let g = kron_generator(log_len);
            let len = 1 << log_len;
            for seed in 0..20u64 {
                let u: Vec<u8> = (0..len).map(|i| ((seed * 31 + i as u64 * 7) % 3 == 0) as u8).collect();
                let mut x = u.clone();
                polar_transform(&mut x);
                assert_eq!(x, dense_multiply(&u, &g));
            }
        }
    }

    #[test]
    fn transform_is_involution_exhaustive_small() {
        for log_len in 1..=4u32 {
            let len = 1usize << log_len;
            for word in 0..(1u32 << len) {
                let v: Vec<u8> = (0..len).map(|i| ((word >> i) & 1) as u8).collect();
                let mut w = v.clone();
                polar_transform(&mut w);
                polar_transform(&mut w);
                assert_eq!(v, w);
            }
        }
    }

    #[test]
    fn extension_is_deterministic_subset() {
        let parent = PolarCode::bhattacharyya(6, 32, 0.0).unwrap();
        assert_eq!(parent.extend_frozen(0, 9).unwrap(), parent);
        let a = parent.extend_frozen(5, 9).unwrap();
        let b = parent.extend_frozen(5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.k(), 27);
        assert!(a.info_set().iter().all(|i| parent.info_set().contains(i)));
        assert!((a.rate() - (parent.rate() - 5.0 / 64.0)).abs() < 1e-12);
        assert!(matches!(a.construction(), Construction::Extended { m: 5, seed: 9, .. }));
        assert!(parent.extend_frozen(33, 0).is_err());
    }

    #[test]
    fn extended_codebook_is_contained_in_parent() {
        let parent = PolarCode::bhattacharyya(4, 8, 0.0).unwrap();
        let parent_book: std::collections::HashSet<Vec<u8>> = (0..256u32)
            .map(|w| {
                let bits: Vec<u8> = (0..8).map(|i| ((w >> i) & 1) as u8).collect();
                parent.encode(&bits).unwrap()
            })
            .collect();
        for m in 1..=4 {
            let ext = parent.extend_frozen(m, 1234 + m as u64).unwrap();
            let kk = ext.k();
            for w in 0..(1u32 << kk) {
                let bits: Vec<u8> = (0..kk).map(|i| ((w >> i) & 1) as u8).collect();
                assert!(parent_book.contains(&ext.encode(&bits).unwrap()));
            }
        }
    }

    #[test]
    fn code_file_round_trip_and_digest_check() {
        let code = PolarCode::bhattacharyya(5, 16, 0.0).unwrap().extend_frozen(3, 7).unwrap();
        let text = code.to_toml();
        assert_eq!(PolarCode::from_toml(&text).unwrap(), code);
        let tampered = text.replace(&format!("{:016x}", code.digest()), "0000000000000001");
        assert!(matches!(PolarCode::from_toml(&tampered), Err(Error::DigestMismatch { .. })));
    }

    proptest! {
        #[test]
        fn construction_is_nested(log_len in 1u32..9, a in 1usize..256, b in 1usize..256) {
            let len = 1usize << log_len;
            let (lo, hi) = (a.min(b).min(len), a.max(b).min(len));
            let small = PolarCode::bhattacharyya(log_len, lo, 0.0).unwrap();
            let large = PolarCode::bhattacharyya(log_len, hi, 0.0).unwrap();
            prop_assert!(small.info_set().iter().all(|i| large.info_set().contains(i)));
        }

        #[test]
        fn z_recursion_bounds(z in 0.0f64..=1.0) {
            let minus = 2.0 * z - z * z;
            let plus = z * z;
            prop_assert!(plus <= z && z <= minus);
            prop_assert!(plus + minus <= 2.0 * z + 1e-15);
            prop_assert!((0.0..=1.0).contains(&minus));
        }
    }

    #[test]
    fn profile_values_stay_in_unit_interval() {
        for snr in [-10.0, 0.0, 10.0] {
            let p = ReliabilityProfile::bhattacharyya(10, snr).unwrap();
            assert!(p.z.iter().all(|z| (0.0..=1.0).contains(z)));
        }
    }
}
