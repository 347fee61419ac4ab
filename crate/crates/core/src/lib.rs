//! Rate splitting (RS) and hierarchical rate splitting (HRS) over an indoor
//! VCSEL optical wireless downlink.
//!
//! The crate builds line-of-sight optical channels from a room, ceiling
//! transmitter units and angle-diversity receivers, designs zero-forcing and
//! block-diagonal precoders, evaluates the RS/HRS SINRs and achievable rates,
//! and runs seeded Monte-Carlo sweeps over the number of users or the VCSEL
//! beam waist.

pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
mod linalg;
pub mod optics;
pub mod output;
pub mod precoding;
pub mod ratesplit;
pub mod scenario;

pub use error::{Error, Result};
