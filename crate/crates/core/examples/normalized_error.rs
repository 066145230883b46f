//! The normalized error (NE): the mean ratio of a clipped decoder's BER to a
//! reference clipping value's BER over an SNR grid, for two block lengths.
//!
//!     cargo run --release --example normalized_error

use polarfloor::bp::DecoderConfig;
use polarfloor::code::PolarCode;
use polarfloor::metrics::{compute_ne, estimate_error_rates, DecoderKind, SimOptions, StopRule};

fn main() -> polarfloor::Result<()> {
    let grid = [1.5, 2.0, 2.5, 3.0];
    let stop = StopRule { min_frames: 0, min_block_errors: 50, max_frames: 100_000 };
    let opts = SimOptions { workers: std::thread::available_parallelism().map_or(1, |n| n.get()), ..Default::default() };
    for n in [8, 10] {
        let code = PolarCode::bhattacharyya(n, 1 << (n - 1), 0.0)?;
        let run = |llr_max: f64| {
            let kind = DecoderKind::Bp(DecoderConfig::default().with_llr_max(llr_max));
            estimate_error_rates(&code, &kind, &grid, &stop, 5, &opts)
        };
        let reference = run(100.0)?;
        for llr_max in [8.0, 20.0] {
            let ne = compute_ne(&run(llr_max)?, &reference)?;
            let ratios: Vec<String> = ne.points.iter().map(|p| format!("{:.2}", p.ratio)).collect();
            println!("N = {:>4}, llr_max {llr_max:>4} vs 100: NE = {:.3}  per point [{}]", code.len(), ne.ne, ratios.join(", "));
        }
    }
    Ok(())
}
