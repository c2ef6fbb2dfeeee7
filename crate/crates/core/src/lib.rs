//! Online conformal-style fusion of binary set predictions from many sensors
//! over a rate-limited link.
//!
//! Each sensor thresholds its scores into a hard label set, compresses it with
//! an enumerative block code and ships it to a server. The server fuses the
//! sets by weighted vote, learns from feedback and pushes updated thresholds
//! back. Two controllers are provided:
//!
//! - [`control::DcrcController`] tracks a long-term false-negative target with
//!   one shared local threshold.
//! - [`control::CdcrcController`] also keeps the average communication load
//!   under a budget, with per-sensor thresholds and an adaptive global threshold.
//!
//! ```
//! use crcnet::codec::BlockCodec;
//! use crcnet::control::{DcrcController, DcrcParams};
//! use crcnet::simnet::{FeedbackChannel, StreamSpec, SyntheticStream};
//!
//! let spec = StreamSpec::new(&[0.1, 0.5], 200, 50, 0.3, 7);
//! let codec = BlockCodec::default();
//! let mut ctl = DcrcController::new(DcrcParams::new(0.15), 2).unwrap();
//! for inst in SyntheticStream::new(spec).unwrap() {
//!     let truth = inst.truth.clone();
//!     ctl.step(&inst.scores, &codec, |v, u| {
//!         FeedbackChannel::Exact.feedback(&truth, v, u).unwrap()
//!     })
//!     .unwrap();
//! }
//! ```

pub mod analysis;
pub mod codec;
pub mod control;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod simnet;

pub use error::{Error, Result};
