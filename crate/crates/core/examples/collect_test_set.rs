//! Capture frames that BP fails on at a low clipping value but decodes at a
//! high one, write them to a test-set file and replay them.
//!
//!     cargo run --release --example collect_test_set -- /tmp/set.plts

use polarfloor::bp::{DecoderConfig, Stopping};
use polarfloor::code::PolarCode;
use polarfloor::metrics::{collect_test_set, CollectConfig, TestSet};

fn main() -> polarfloor::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("polarfloor_set.plts").display().to_string());
    let code = PolarCode::bhattacharyya(8, 128, 0.0)?;
    // A small code and an aggressive clipping value keep capture fast.
    let cfg = CollectConfig {
        llr_max_fail: 4.0,
        max_frames: 200_000,
        decoder: DecoderConfig { stopping: Stopping::FixedIters, ..DecoderConfig::default() },
        ..CollectConfig::new(3.5, 20)
    };
    let set = collect_test_set(&code, &cfg, 42)?;
    println!(
        "kept {} of {} frames at {} dB (acceptance {:.2e}), status {:?}",
        set.len(),
        set.header.candidates,
        set.header.ebn0_db,
        set.header.acceptance(set.len()),
        set.header.status
    );
    set.save(&path)?;

    let back = TestSet::load(&path)?;
    assert_eq!(back.to_bytes(), set.to_bytes());
    let report = back.validate(&code, 1)?;
    println!("replay: {} records, {} violations; written to {path}", report.total, report.violations.len());
    Ok(())
}
