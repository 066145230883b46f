//! The boxplus operator: exact form, min-sum approximation, scaling and the
//! single processing-element update with clipping.
//!
//!     cargo run --release --example boxplus

use polarfloor::bp::{boxplus_exact, boxplus_min, pe_update, MinApprox};

fn main() {
    for (a, b) in [(2.0, 3.0), (-2.0, 3.0), (5.0, 100.0), (0.5, 0.5), (7.0, 0.0)] {
        let e = boxplus_exact(a, b);
        let m = boxplus_min(a, b);
        println!("f({a:>5}, {b:>5}) = {e:+.6}   min-sum {m:+.1}   gap {:.4}", (e - m).abs());
    }

    // (R_out1, R_out2, L_out1, L_out2) from (L_in1, L_in2, R_in1, R_in2).
    let out = pe_update::<f64, MinApprox>(2.0, 3.0, 0.0, 0.0, 0.9375, 20.0);
    println!("\nPE with alpha = 0.9375: {out:?}");
    let clipped = pe_update::<f64, MinApprox>(15.0, 18.0, 19.0, 12.0, 1.0, 20.0);
    println!("PE near saturation, llr_max = 20: {clipped:?}");
}
