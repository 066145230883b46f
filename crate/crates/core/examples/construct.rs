//! Build a Bhattacharyya-designed polar code, inspect its reliability profile
//! and round-trip it through the code file format.
//!
//!     cargo run --release --example construct -- 10 512 0.0

use polarfloor::code::{polar_transform, PolarCode};

fn main() -> polarfloor::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u32 = args.next().map_or(10, |s| s.parse().expect("n"));
    let k: usize = args.next().map_or(1 << (n - 1), |s| s.parse().expect("k"));
    let design: f64 = args.next().map_or(0.0, |s| s.parse().expect("design Es/N0"));

    let (code, profile) = PolarCode::bhattacharyya_with_profile(n, k, design)?;
    println!("N = {}, k = {}, R = {:.3}, digest {:016x}", code.len(), code.k(), code.rate(), code.digest());

    let order = profile.reliability_order();
    println!("most reliable synthesized channels: {:?}", &order[..8]);
    println!("least reliable: {:?}", &order[order.len() - 8..]);
    let z_info = code.info_set().iter().map(|&i| profile.z[i]).fold(0.0, f64::max);
    println!("largest Z inside the information set: {z_info:.3e}");

    // Encoding is u·G_N; the transform is its own inverse.
    let info: Vec<u8> = (0..code.k()).map(|i| (i % 3 == 0) as u8).collect();
    let x = code.encode(&info)?;
    let mut back = x.clone();
    polar_transform(&mut back);
    assert_eq!(code.extract(&back), info);
    println!("codeword weight {} for a weight-{} message", x.iter().filter(|&&b| b == 1).count(), info.iter().filter(|&&b| b == 1).count());

    let text = code.to_toml();
    let loaded = PolarCode::from_toml(&text)?;
    assert_eq!(loaded, code);
    println!("\ncode file head:\n{}", text.lines().take(5).collect::<Vec<_>>().join("\n"));
    Ok(())
}
