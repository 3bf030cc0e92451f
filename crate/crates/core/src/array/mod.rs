//! Phased arrays: steering, quantized beams, codebooks and the handset model.

pub mod codebook;
pub mod steering;
pub mod ue;

pub use codebook::{build_codebook, Beam, Codebook, Level, Sector};
pub use steering::{
    beam_gain_db, element_pattern_db, quantize_weights, steering_vector, ArrayGeometry, BeamWeights,
};
pub use ue::{apply_grip_mask, best_subarray, ue_codebooks, GripMode, UeAntennaState};
