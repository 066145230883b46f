//! BPSK over AWGN: noise variance from Eb/N0 and the resulting channel LLRs,
//! plus an uncoded BER estimate against the closed form Q(sqrt(2 Eb/N0)).
//!
//!     cargo run --release --example channel_llrs

use polarfloor::channel::{ebn0_to_esn0, modulate, transmit, ChannelConfig};
use polarfloor::code::PolarCode;
use polarfloor::metrics::{estimate_error_rates, DecoderKind, SimOptions, StopRule};
use polarfloor::rng::{stream, Domain};
use statrs::distribution::{ContinuousCDF, Normal};

fn main() -> polarfloor::Result<()> {
    let cfg = ChannelConfig::new(2.0, 0.5)?;
    println!("Eb/N0 2 dB at R = 1/2: Es/N0 = {:.3} dB, sigma^2 = {:.6}", ebn0_to_esn0(2.0, 0.5), cfg.sigma2);

    let x = [0u8, 1, 1, 0, 1, 0, 0, 0];
    let frame = transmit(&modulate(&x), &cfg, &mut stream(7, Domain::Frame, 0, 0));
    for ((b, y), l) in x.iter().zip(&frame.y).zip(&frame.llr) {
        println!("  x = {b}  y = {y:+.3}  LLR = {l:+.3}");
    }

    // Full-rate "code" with hard decisions is uncoded BPSK.
    let code = PolarCode::bhattacharyya(10, 1024, 0.0)?;
    let stop = StopRule { min_frames: 1000, min_block_errors: 0, max_frames: 1000 };
    let rep = estimate_error_rates(&code, &DecoderKind::Uncoded, &[0.0], &stop, 1, &SimOptions::default())?;
    let p = &rep.points[0];
    let q = 1.0 - Normal::standard().cdf(2f64.sqrt());
    let (lo, hi) = p.ber_ci();
    println!("\nuncoded BER at 0 dB: {:.5} (95% CI {lo:.5}..{hi:.5}), Q(sqrt 2) = {q:.5}", p.ber());
    Ok(())
}
