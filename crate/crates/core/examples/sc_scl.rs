//! Successive cancellation and SC-list decoding as references for BP, and a
//! brute-force ML check on a tiny code.
//!
//!     cargo run --release --example sc_scl

use polarfloor::bp::DecoderConfig;
use polarfloor::channel::{modulate, random_transmission, ChannelConfig};
use polarfloor::code::PolarCode;
use polarfloor::metrics::{estimate_error_rates, DecoderKind, SimOptions, StopRule};
use polarfloor::rng::{stream, Domain};
use polarfloor::sc::{scl_decode_full, SclConfig};

fn main() -> polarfloor::Result<()> {
    let code = PolarCode::bhattacharyya(8, 128, 0.0)?;
    let stop = StopRule { min_frames: 2000, min_block_errors: 0, max_frames: 2000 };
    let grid = [1.5, 2.5];
    for kind in [
        DecoderKind::Sc,
        DecoderKind::Scl(SclConfig::new(2)),
        DecoderKind::Scl(SclConfig::new(8)),
        DecoderKind::Bp(DecoderConfig::default().with_llr_max(100.0)),
    ] {
        let r = estimate_error_rates(&code, &kind, &grid, &stop, 2, &SimOptions::default())?;
        let cells: Vec<String> = r.points.iter().map(|p| format!("{} dB BLER {:.3e}", p.ebn0_db, p.bler())).collect();
        println!("{:>6}: {}", kind.label(), cells.join(", "));
    }

    // N = 8, k = 4: a list of 16 keeps every path, so the best path is ML.
    let tiny = PolarCode::bhattacharyya(3, 4, 0.0)?;
    let chan = ChannelConfig::new(2.0, tiny.rate())?;
    let t = random_transmission(&tiny, &chan, false, &mut stream(1, Domain::Frame, 0, 0));
    let ml = (0..16u8)
        .map(|m| {
            let info: Vec<u8> = (0..4).map(|j| (m >> j) & 1).collect();
            let s = modulate(&tiny.encode(&info).unwrap());
            let corr: f64 = s.iter().zip(&t.frame.llr).map(|(a, b)| a * b).sum();
            (corr, info)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1;
    let out = scl_decode_full(&tiny, &t.frame.llr, &SclConfig::new(16));
    println!("\nN = 8: ML {:?}, SCL-16 {:?}, path metrics {:?}", ml, out.info_bits, out.path_metrics);
    Ok(())
}
