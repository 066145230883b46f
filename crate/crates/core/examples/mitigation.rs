//! Run the four post-processing strategies (guessing, virtual noise, scaled
//! boxplus, multi-trellis) on captured failures and report success rates.
//!
//!     cargo run --release --example mitigation

use polarfloor::bp::{DecoderConfig, Stopping};
use polarfloor::code::PolarCode;
use polarfloor::metrics::{collect_test_set, CollectConfig};
use polarfloor::mitigation::{measure_success_rate, GuessMode, MitigationConfig, Strategy};

fn main() -> polarfloor::Result<()> {
    let code = PolarCode::bhattacharyya(8, 128, 0.0)?;
    let base = DecoderConfig { stopping: Stopping::FixedIters, ..DecoderConfig::default() };
    let cfg = CollectConfig { llr_max_fail: 6.0, decoder: base, max_frames: 500_000, ..CollectConfig::new(4.0, 30) };
    let set = collect_test_set(&code, &cfg, 9)?;
    println!("{} captured frames at {} dB, llr_max {} vs {}", set.len(), cfg.ebn0_db, cfg.llr_max_fail, cfg.llr_max_pass);

    let base = set.header.fail_config();
    for strategy in [
        Strategy::None,
        Strategy::Guess { max_bits: 1, mode: GuessMode::Exhaustive },
        Strategy::Guess { max_bits: 3, mode: GuessMode::Exhaustive },
        Strategy::Guess { max_bits: 3, mode: GuessMode::Genie },
        Strategy::VirtualNoise { sigma_v2: 0.36, attempts: 5 },
        Strategy::ScaledBoxplus { alpha: 0.9375 },
        Strategy::MultiTrellis { max_permutations: code.log_len() as usize },
    ] {
        let r = measure_success_rate(&set, &code, &MitigationConfig::new(strategy, base), 1, 1)?;
        println!(
            "{:>14}: tau {:.3} [{:.3}, {:.3}]  wrong codeword {}  extra iterations {:.0}",
            r.strategy, r.tau, r.ci_low, r.ci_high, r.wrong_codeword, r.mean_extra_iterations
        );
    }
    Ok(())
}
