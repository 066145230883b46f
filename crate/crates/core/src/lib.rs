//! Polar codes under clipped belief-propagation decoding.
//!
//! The crate builds polar codes from Bhattacharyya bounds, simulates BPSK
//! over AWGN, decodes with belief propagation (with configurable LLR clipping,
//! boxplus variant, output scaling, stopping rule and precision) and with
//! SC/SCL reference decoders. On top of that sit error-rate estimation, the
//! normalized-error floor measure, capture of clipping-induced failure frames
//! and four post-processing strategies that recover them.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bp;
pub mod channel;
pub mod cli;
pub mod code;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mitigation;
pub mod rng;
pub mod sc;

pub use bp::{BoxplusMode, BpDecoder, DecodeResult, DecoderConfig, Precision, Stopping};
pub use channel::{ChannelConfig, LlrFrame};
pub use code::{PolarCode, ReliabilityProfile};
pub use error::{Error, Result};
