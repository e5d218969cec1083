//! Signal-level simulator and analysis toolkit for Bluetooth 5.1
//! angle-of-arrival (AoA) direction finding.
//!
//! The crate is organized as a transmit-to-estimate pipeline:
//!
//! - [`phy`]: LE 1M PHY framing (CRC, whitening), GFSK modulation and
//!   demodulation, the Constant Tone Extension (CTE), IQ streams, and
//!   packet detection.
//! - [`airsim`]: plane-wave propagation onto a switched two-element antenna
//!   array, with noise, multipath, CFO, and chain phase offsets.
//! - [`dfrx`]: the direction-finding receiver — reference-period phase
//!   model, phase-delay estimation, angle conversion, calibration, and
//!   multi-channel aggregation.
//! - [`locate`]: bearing intersection from two anchors into 2D position
//!   fixes.
//! - [`redteam`]: transmit-side phase-step injection, the coherent-receiver
//!   oracle, and the switching-pattern-alternation detector.
//! - [`pipeline`]: single-packet end-to-end simulation gluing the above.
//! - [`harness`]: experiment configuration and scripted experiment recipes
//!   producing CSV artifacts.

pub mod airsim;
pub mod dfrx;
pub mod error;
pub mod harness;
pub mod locate;
pub mod phy;
pub mod pipeline;
pub mod redteam;

pub use airsim::{ArrayGeometry, ChannelProfile, Ray, SourcePose, SwitchPattern};
pub use dfrx::AoaMeasurement;
pub use error::{AoaError, Result};
pub use harness::ExperimentConfig;
pub use locate::{AnchorConfig, BearingLine, PositionFix};
pub use phy::{BlePacket, CteConfig, CteTiming, IqStream};
pub use pipeline::{simulate_packet, PacketSim, SimOutput};
pub use redteam::{AttackEvidence, AttackProfile, DefensePolicy, Verdict};
