//! Freeze m extra randomly chosen information bits: the code loses codewords
//! (so its ML performance cannot get worse), yet BP can develop a floor.
//!
//!     cargo run --release --example frozen_extension -- 16

use polarfloor::bp::DecoderConfig;
use polarfloor::code::PolarCode;
use polarfloor::metrics::{estimate_error_rates, DecoderKind, SimOptions, StopRule};

fn main() -> polarfloor::Result<()> {
    let m: usize = std::env::args().nth(1).map_or(16, |s| s.parse().expect("m"));
    let parent = PolarCode::bhattacharyya(9, 256, 0.0)?;
    let extended = parent.extend_frozen(m, 1)?;
    println!("parent k = {}, extended k = {} ({:?})", parent.k(), extended.k(), extended.construction());

    let grid = [2.0, 3.0, 4.0];
    let stop = StopRule { min_frames: 0, min_block_errors: 50, max_frames: 50_000 };
    let kind = DecoderKind::Bp(DecoderConfig::default().with_llr_max(100.0));
    let opts = SimOptions { workers: std::thread::available_parallelism().map_or(1, |n| n.get()), ..Default::default() };
    for (name, code) in [("m = 0", &parent), ("extended", &extended)] {
        let r = estimate_error_rates(code, &kind, &grid, &stop, 3, &opts)?;
        let cells: Vec<String> = r.points.iter().map(|p| format!("{:.1e}", p.ber())).collect();
        println!("{name:>9} (R = {:.3}): BER {}", code.rate(), cells.join("  "));
    }
    Ok(())
}
