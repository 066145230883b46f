//! Permuted realizations of the polar factor graph: every layer order decodes
//! the same code, but the loops, and so the failures, differ.
//!
//!     cargo run --release --example layer_orders

use polarfloor::bp::{BpDecoder, DecodeOptions, DecoderConfig};
use polarfloor::channel::{random_transmission, ChannelConfig};
use polarfloor::code::PolarCode;
use polarfloor::mitigation::layer_orders;
use polarfloor::rng::{stream, Domain};

fn main() -> polarfloor::Result<()> {
    let code = PolarCode::bhattacharyya(8, 128, 0.0)?;
    let chan = ChannelConfig::new(2.0, code.rate())?;
    let mut dec = BpDecoder::new(&code, &DecoderConfig::default().with_llr_max(8.0))?;
    let orders = layer_orders(code.log_len(), 8);
    for order in &orders {
        let mut failures = 0;
        for f in 0..400 {
            let t = random_transmission(&code, &chan, false, &mut stream(4, Domain::Frame, 0, f));
            let r = dec.decode_with(&t.frame.llr, &DecodeOptions { pins: &[], layer_order: Some(order) });
            failures += (r.u_hat != t.u) as usize;
        }
        println!("order {order:?}: {failures} block errors in 400 frames");
    }
    Ok(())
}
