//! BER against Eb/N0 for several clipping values: the smaller the clipping
//! value, the earlier the curve flattens into an error floor.
//!
//!     cargo run --release --example clipping_sweep -- 9 1:0.5:3.5

use polarfloor::bp::DecoderConfig;
use polarfloor::cli::parse_grid;
use polarfloor::code::PolarCode;
use polarfloor::metrics::{estimate_error_rates, DecoderKind, SimOptions, StopRule};

fn main() -> polarfloor::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u32 = args.next().map_or(9, |s| s.parse().expect("n"));
    let grid = parse_grid(&args.next().unwrap_or_else(|| "1:0.5:3.5".into()))?;
    let code = PolarCode::bhattacharyya(n, 1 << (n - 1), 0.0)?;
    let stop = StopRule { min_frames: 0, min_block_errors: 50, max_frames: 20_000 };
    let opts = SimOptions { workers: std::thread::available_parallelism().map_or(1, |n| n.get()), ..Default::default() };

    print!("{:>8}", "Eb/N0");
    for &llr_max in &[2.0, 4.0, 8.0, 20.0, 100.0] {
        print!("{:>12}", format!("clip {llr_max}"));
    }
    println!();
    let mut columns = Vec::new();
    for &llr_max in &[2.0, 4.0, 8.0, 20.0, 100.0] {
        let kind = DecoderKind::Bp(DecoderConfig::default().with_llr_max(llr_max));
        columns.push(estimate_error_rates(&code, &kind, &grid, &stop, 11, &opts)?);
    }
    for (i, snr) in grid.iter().enumerate() {
        print!("{snr:>8}");
        for c in &columns {
            print!("{:>12.3e}", c.points[i].ber());
        }
        println!();
    }
    Ok(())
}
