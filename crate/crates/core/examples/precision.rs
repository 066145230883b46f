//! f32 against f64 message arithmetic at the same clipping value.
//!
//!     cargo run --release --example precision

use polarfloor::bp::{DecoderConfig, Precision};
use polarfloor::code::PolarCode;
use polarfloor::metrics::{estimate_error_rates, DecoderKind, SimOptions, StopRule};

fn main() -> polarfloor::Result<()> {
    let code = PolarCode::bhattacharyya(9, 256, 0.0)?;
    let grid = [1.5, 2.0, 2.5];
    let stop = StopRule { min_frames: 0, min_block_errors: 100, max_frames: 100_000 };
    for precision in [Precision::F32, Precision::F64] {
        let kind = DecoderKind::Bp(DecoderConfig { precision, ..DecoderConfig::default() });
        let r = estimate_error_rates(&code, &kind, &grid, &stop, 8, &SimOptions::default())?;
        for p in &r.points {
            let (lo, hi) = p.ber_ci_frames();
            println!("{precision:?} {} dB: BER {:.3e} [{lo:.2e}, {hi:.2e}]", p.ebn0_db, p.ber());
        }
    }
    Ok(())
}
