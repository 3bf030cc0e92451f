//! Millimeter-wave link and mobility simulator.
//!
//! Generative channel model with close-in path loss, correlated shadowing and
//! sparse directional clusters; phased-array beamforming and codebooks;
//! multi-user precoders; link budget and MCS mapping; beam management with
//! handover and radio-link failure; channel-sounder emulation and path loss
//! fitting; and a scenario-driven simulator tying them together.
//!
//! Random numbers come from ChaCha8 streams (see [`rng`]), so a seed fixes
//! every output on every platform.

pub mod array;
pub mod beammgmt;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod link;
pub mod measurements;
pub mod precoding;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{Obstacle, Orientation, Trajectory, Vec3};
