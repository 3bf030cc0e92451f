//! Handset with four edge-mounted subarrays and hand-grip blockage.
//!
//! Subarrays are mounted on the four edges of the handset, boresights at body
//! azimuths 0° (top edge), 90° (long edge), 180° and 270° (mirror edges). The
//! body frame's azimuth 0 is the handset's heading.

use serde::{Deserialize, Serialize};

use crate::array::codebook::{Codebook, Sector};
use crate::array::steering::{element_pattern_db, ArrayGeometry};
use crate::error::{Error, Result};
use crate::geometry::{wrap_deg, Orientation, Vec3};

pub const SUBARRAYS: usize = 4;
pub const TOP: usize = 0;
pub const LONG: usize = 1;
pub const TOP_MIRROR: usize = 2;
pub const LONG_MIRROR: usize = 3;

pub const DEFAULT_MASK_LOSS_DB: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripMode {
    #[default]
    Freespace,
    Landscape,
    Portrait,
}

/// Blocked angular rectangle centered on a subarray's boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mask {
    pub az_extent: f64,
    pub el_extent: f64,
}

impl Mask {
    pub fn contains(&self, az: f64, el: f64) -> bool {
        wrap_deg(az).abs() <= self.az_extent / 2.0 && el.abs() <= self.el_extent / 2.0
    }
}

/// Effect of the grip on one subarray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GripEffect {
    Clear,
    Masked(Mask),
    Disabled,
}

pub const LANDSCAPE_MASK: Mask = Mask {
    az_extent: 160.0,
    el_extent: 75.0,
};
pub const PORTRAIT_MASK: Mask = Mask {
    az_extent: 120.0,
    el_extent: 80.0,
};

impl GripMode {
    /// Landscape: the palm covers the top edge. Portrait: fingers cover the
    /// long edge entirely and the palm masks the opposite long edge.
    pub fn effect(self, subarray: usize) -> GripEffect {
        match (self, subarray) {
            (GripMode::Landscape, TOP) => GripEffect::Masked(LANDSCAPE_MASK),
            (GripMode::Portrait, LONG) => GripEffect::Disabled,
            (GripMode::Portrait, LONG_MIRROR) => GripEffect::Masked(PORTRAIT_MASK),
            _ => GripEffect::Clear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subarray {
    pub id: usize,
    pub geometry: ArrayGeometry,
    /// Mounting relative to the handset body.
    pub mount: Orientation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeAntennaState {
    pub subarrays: [Subarray; SUBARRAYS],
    pub grip: GripMode,
    pub mask_loss_db: f64,
}

impl UeAntennaState {
    pub fn new(geometry: ArrayGeometry, grip: GripMode) -> Self {
        let sub = |id: usize| Subarray {
            id,
            geometry,
            mount: Orientation::wrapped(90.0 * id as f64, 90.0),
        };
        UeAntennaState {
            subarrays: [sub(0), sub(1), sub(2), sub(3)],
            grip,
            mask_loss_db: DEFAULT_MASK_LOSS_DB,
        }
    }

    pub fn enabled(&self, subarray: usize) -> bool {
        self.grip.effect(subarray) != GripEffect::Disabled
    }

    /// Angles of a body-frame direction in a subarray's local frame.
    pub fn local_angles(&self, subarray: usize, body_az: f64, body_el: f64) -> (f64, f64) {
        let d = Vec3::from_bearing(body_az, body_el);
        self.subarrays[subarray]
            .mount
            .to_local(d)
            .expect("unit vector is never degenerate")
    }
}

/// Extra loss of `subarray` toward local direction `(az, el)`, dB; infinite
/// when the subarray is disabled.
pub fn apply_grip_mask(ue: &UeAntennaState, subarray: usize, az: f64, el: f64) -> Result<f64> {
    if subarray >= SUBARRAYS {
        return Err(Error::Lookup {
            kind: "subarray",
            id: subarray.to_string(),
        });
    }
    Ok(match ue.grip.effect(subarray) {
        GripEffect::Clear => 0.0,
        GripEffect::Disabled => f64::INFINITY,
        GripEffect::Masked(m) if m.contains(az, el) => ue.mask_loss_db,
        GripEffect::Masked(_) => 0.0,
    })
}

/// One codebook per subarray, `beams` beams each over +-60° azimuth.
pub fn ue_codebooks(ue: &UeAntennaState, beams: usize, bits: u8) -> Result<Vec<Codebook>> {
    let sector = Sector {
        az_min: -60.0,
        az_max: 60.0,
        el_min: 0.0,
        el_max: 0.0,
    };
    ue.subarrays
        .iter()
        .map(|s| Codebook::uniform_row(&s.geometry, &sector, beams, bits))
        .collect()
}

/// Gain of `beam` on `subarray` toward body direction `(az, el)`, including
/// element pattern and grip mask, dB.
pub fn subarray_gain_db(ue: &UeAntennaState, cb: &Codebook, subarray: usize, beam: usize, az: f64, el: f64) -> f64 {
    let s = &ue.subarrays[subarray];
    let (laz, lel) = ue.local_angles(subarray, az, el);
    let mask = apply_grip_mask(ue, subarray, laz, lel).unwrap_or(f64::INFINITY);
    if mask.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let a = s.geometry.response(laz, lel);
    let af = cb.finest()[beam].array_factor(&a);
    10.0 * af.log10() + s.geometry.element_gain_dbi + element_pattern_db(laz, lel, s.geometry.element_floor_db) - mask
}

/// Best (subarray, beam, gain) toward body direction `(az, el)`; ties go to
/// the lowest (subarray, beam).
pub fn best_subarray(ue: &UeAntennaState, codebooks: &[Codebook], az: f64, el: f64) -> Result<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for s in 0..SUBARRAYS {
        if !ue.enabled(s) {
            continue;
        }
        let cb = codebooks.get(s).ok_or(Error::Lookup {
            kind: "subarray codebook",
            id: s.to_string(),
        })?;
        for b in 0..cb.finest().len() {
            let g = subarray_gain_db(ue, cb, s, b, az, el);
            if best.is_none_or(|(_, _, bg)| g > bg) {
                best = Some((s, b, g));
            }
        }
    }
    best.ok_or(Error::NoCoverage)
}
