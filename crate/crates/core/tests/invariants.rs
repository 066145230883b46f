use polarfloor::bp::{pe_update, BpDecoder, DecoderConfig, Exact, MinApprox, Precision};
use polarfloor::channel::{modulate, ChannelConfig, LlrFrame};
use polarfloor::code::{polar_transform, PolarCode};
use polarfloor::metrics::{
    compute_ne, confidence_interval, estimate_error_rates, DecoderKind, SimOptions, StopRule,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn noiseless_llr(x: &[u8], llr_max: f64) -> Vec<f64> {
    modulate(x).iter().map(|s| s * llr_max).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_is_an_involution(bits in prop::collection::vec(0u8..2, 1usize..=6).prop_flat_map(|v| {
        let n = v.len();
        prop::collection::vec(0u8..2, 1usize << n)
    })) {
        let mut v = bits.clone();
        polar_transform(&mut v);
        polar_transform(&mut v);
        prop_assert_eq!(v, bits);
    }

    #[test]
    fn encoding_is_linear(n in 2u32..8, seed in any::<u64>()) {
        let k = 1usize << (n - 1);
        let code = PolarCode::bhattacharyya(n, k, 0.0).unwrap();
        let a: Vec<u8> = (0..k).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let b: Vec<u8> = (0..k).map(|i| ((seed.rotate_left(17) >> (i % 64)) & 1) as u8).collect();
        let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let (xa, xb, xs) = (code.encode(&a).unwrap(), code.encode(&b).unwrap(), code.encode(&sum).unwrap());
        prop_assert!(xa.iter().zip(&xb).zip(&xs).all(|((p, q), r)| p ^ q == *r));
    }

    #[test]
    fn bp_decodes_noiseless_codewords(n in 2u32..9, k_frac in 0.1f64..0.9, seed in any::<u64>(), f64p in any::<bool>()) {
        let len = 1usize << n;
        let k = ((len as f64 * k_frac) as usize).max(1);
        let code = PolarCode::bhattacharyya(n, k, 0.0).unwrap();
        let info: Vec<u8> = (0..k).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let x = code.encode(&info).unwrap();
        let precision = if f64p { Precision::F64 } else { Precision::F32 };
        let cfg = DecoderConfig { precision, ..DecoderConfig::default() };
        let r = BpDecoder::new(&code, &cfg).unwrap().decode(&noiseless_llr(&x, 20.0));
        prop_assert!(r.converged);
        prop_assert_eq!(code.extract(&r.u_hat), info);
        prop_assert_eq!(r.x_hat, x);
    }

    #[test]
    fn pe_outputs_respect_clipping(
        l1 in -200.0f64..200.0, l2 in -200.0f64..200.0,
        r1 in -200.0f64..200.0, r2 in -200.0f64..200.0,
        alpha in 0.05f64..=1.0, m in 0.5f64..100.0,
    ) {
        let a = pe_update::<f64, MinApprox>(l1, l2, r1, r2, alpha, m);
        let b = pe_update::<f64, Exact>(l1, l2, r1, r2, alpha, m);
        for v in [a.0, a.1, a.2, a.3, b.0, b.1, b.2, b.3] {
            prop_assert!(v.abs() <= m);
        }
    }

    #[test]
    fn confidence_interval_brackets_the_estimate(trials in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let errors = ((trials as f64) * frac) as u64;
        let (lo, hi) = confidence_interval(errors, trials);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

#[test]
fn ne_of_a_report_with_itself_is_one() {
    let code = PolarCode::bhattacharyya(7, 64, 0.0).unwrap();
    let stop = StopRule { min_frames: 0, min_block_errors: 30, max_frames: 20_000 };
    let kind = DecoderKind::Bp(DecoderConfig::default());
    let r = estimate_error_rates(&code, &kind, &[1.0, 2.0], &stop, 3, &SimOptions::default()).unwrap();
    let ne = compute_ne(&r, &r).unwrap();
    assert!((ne.ne - 1.0).abs() < 1e-12);
}

#[test]
fn uncoded_ber_matches_closed_form() {
    let code = PolarCode::bhattacharyya(10, 1024, 0.0).unwrap();
    let stop = StopRule { min_frames: 2000, min_block_errors: 0, max_frames: 2000 };
    let r = estimate_error_rates(&code, &DecoderKind::Uncoded, &[0.0], &stop, 1, &SimOptions::default()).unwrap();
    let q = 1.0 - Normal::standard().cdf(2f64.sqrt());
    let (lo, hi) = r.points[0].ber_ci();
    assert!(lo <= q && q <= hi, "{q} outside [{lo}, {hi}]");
    assert!((q - 0.0786).abs() < 1e-3);
}

#[test]
fn noiseless_simulation_is_error_free() {
    let code = PolarCode::bhattacharyya(8, 128, 0.0).unwrap();
    let stop = StopRule { min_frames: 200, min_block_errors: 0, max_frames: 200 };
    let opts = SimOptions { noiseless: true, ..SimOptions::default() };
    for kind in [DecoderKind::Bp(DecoderConfig::default()), DecoderKind::Sc] {
        let r = estimate_error_rates(&code, &kind, &[0.0], &stop, 1, &opts).unwrap();
        assert_eq!(r.points[0].bit_errors, 0);
    }
}

#[test]
fn f32_and_f64_agree_on_a_clean_frame() {
    let code = PolarCode::bhattacharyya(9, 256, 0.0).unwrap();
    let chan = ChannelConfig::new(4.0, code.rate()).unwrap();
    let t = polarfloor::channel::random_transmission(
        &code,
        &chan,
        false,
        &mut polarfloor::rng::stream(5, polarfloor::rng::Domain::Frame, 0, 0),
    );
    let frame: &LlrFrame = &t.frame;
    let decode = |precision| {
        let cfg = DecoderConfig { precision, ..DecoderConfig::default() };
        BpDecoder::new(&code, &cfg).unwrap().decode(&frame.llr).u_hat
    };
    assert_eq!(decode(Precision::F32), t.u);
    assert_eq!(decode(Precision::F64), t.u);
}
