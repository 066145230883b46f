//! Decode one noisy frame with belief propagation at several clipping values
//! and look at what the decoder reports.
//!
//!     cargo run --release --example bp_decode -- 2.5

use polarfloor::bp::{BpDecoder, DecoderConfig, Stopping};
use polarfloor::channel::{random_transmission, ChannelConfig};
use polarfloor::code::PolarCode;
use polarfloor::rng::{stream, Domain};

fn main() -> polarfloor::Result<()> {
    let snr: f64 = std::env::args().nth(1).map_or(2.5, |s| s.parse().expect("Eb/N0"));
    let code = PolarCode::bhattacharyya(10, 512, 0.0)?;
    let chan = ChannelConfig::new(snr, code.rate())?;

    for frame_id in 0..4 {
        let t = random_transmission(&code, &chan, false, &mut stream(3, Domain::Frame, 0, frame_id));
        println!("frame {frame_id}:");
        for llr_max in [4.0, 20.0, 100.0] {
            let mut dec = BpDecoder::new(&code, &DecoderConfig::default().with_llr_max(llr_max))?;
            let r = dec.decode(&t.frame.llr);
            let errors = code.info_set().iter().filter(|&&i| r.u_hat[i] != t.u[i]).count();
            let flipping = r.sign_flip_counts.iter().filter(|&&c| c > 0).count();
            println!(
                "  llr_max {llr_max:>5}: {:>3} iterations, converged {:5}, {errors:>3} bit errors, {flipping} bits flipping",
                r.iterations, r.converged
            );
        }
    }

    // Without early stopping the decoder always runs the full budget.
    let cfg = DecoderConfig { max_iters: 50, stopping: Stopping::FixedIters, ..DecoderConfig::default() };
    let t = random_transmission(&code, &chan, false, &mut stream(3, Domain::Frame, 0, 0));
    let r = BpDecoder::new(&code, &cfg)?.decode(&t.frame.llr);
    println!("fixed schedule: {} iterations, converged {}", r.iterations, r.converged);
    Ok(())
}
