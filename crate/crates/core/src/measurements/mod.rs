//! Channel-sounder emulation, delay spread and path loss fitting.

pub mod fit;
pub mod pn;
pub mod sounder;

pub use fit::{fit_path_loss, synthetic_samples, PathLossFit, PathLossSample};
pub use pn::pn_sequence;
pub use sounder::{rms_delay_spread, sound_channel, Pdp};

use crate::array::steering::{array_factor, ArrayGeometry};
use crate::channel::clusters::{rms_delay_spread_db, ClusterSet};
use crate::error::{Error, Result};

/// Default cut-off for delay-spread estimates, dB below the strongest tap.
pub const DEFAULT_THRESHOLD_DB: f64 = 25.0;

/// `(delay, power dB)` taps of a cluster set after weighting each cluster by
/// the array-factor gain of `weights` toward its departure offset.
pub fn beam_filtered_taps(set: &ClusterSet, g: &ArrayGeometry, weights: &[num_complex::Complex64]) -> Vec<(f64, f64)> {
    set.clusters
        .iter()
        .map(|c| {
            let af = array_factor(weights, &g.response(c.aod.az, c.aod.el));
            (c.excess_delay_ns, c.relative_power_db + 10.0 * af.log10())
        })
        .collect()
}

/// Omni and beam-filtered RMS delay spreads, ns, with the beam steered at the
/// strongest cluster's departure direction.
pub fn omni_and_beamformed_spread(set: &ClusterSet, g: &ArrayGeometry, threshold_db: f64) -> Result<(f64, f64)> {
    let strongest = set
        .clusters
        .iter()
        .max_by(|a, b| a.relative_power_db.total_cmp(&b.relative_power_db))
        .ok_or(Error::EmptyInput("cluster set"))?;
    let w = crate::array::steering::steering_vector(g, strongest.aod.az, strongest.aod.el)?;
    let omni = set.rms_delay_spread_ns(threshold_db);
    let beam = rms_delay_spread_db(&beam_filtered_taps(set, g, &w), threshold_db);
    Ok((omni, beam))
}
