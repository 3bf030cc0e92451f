//! Planar array response, phase quantization and beam gain.
//!
//! Element (m, n) sits in row m (elevation axis) and column n (azimuth axis)
//! and is stored at index `m * cols + n`. With direction cosines
//! `u = cos(el) sin(az)` and `v = sin(el)` the response of element (m, n) is
//! `exp(j 2 pi s (m v + n u))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Peak gain of a single element, dBi.
    #[serde(default)]
    pub element_gain_dbi: f64,
    /// Floor of the element power pattern relative to its peak, dB.
    #[serde(default = "default_floor")]
    pub element_floor_db: f64,
}

fn default_spacing() -> f64 {
    0.5
}

fn default_floor() -> f64 {
    -20.0
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize) -> Self {
        ArrayGeometry {
            rows,
            cols,
            spacing: default_spacing(),
            element_gain_dbi: 0.0,
            element_floor_db: default_floor(),
        }
    }

    /// 8 rows by 16 columns, half-wavelength spacing.
    pub fn gnb_default() -> Self {
        Self::new(8, 16)
    }

    /// One four-element row, 5 dBi patch elements.
    pub fn ue_subarray() -> Self {
        ArrayGeometry {
            element_gain_dbi: 5.0,
            ..Self::new(1, 4)
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::validation("array", "rows and cols must be >= 1"));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::validation("array.spacing", "must be > 0"));
        }
        if !self.element_gain_dbi.is_finite() || !(self.element_floor_db <= 0.0) {
            return Err(Error::validation("array.element_floor_db", "must be <= 0 dB"));
        }
        Ok(())
    }

    /// Response toward direction cosines `(u, v)`; defined for any direction,
    /// including behind the aperture where it mirrors the front.
    pub fn response_uv(&self, u: f64, v: f64) -> Vec<Complex64> {
        let k = std::f64::consts::TAU * self.spacing;
        let cols: Vec<Complex64> = (0..self.cols)
            .map(|n| Complex64::from_polar(1.0, k * u * n as f64))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for m in 0..self.rows {
            let r = Complex64::from_polar(1.0, k * v * m as f64);
            out.extend(cols.iter().map(|c| r * c));
        }
        out
    }

    pub fn response(&self, az_deg: f64, el_deg: f64) -> Vec<Complex64> {
        let (u, v) = direction_cosines(az_deg, el_deg);
        self.response_uv(u, v)
    }
}

pub fn direction_cosines(az_deg: f64, el_deg: f64) -> (f64, f64) {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    (el.cos() * az.sin(), el.sin())
}

/// Steering vector toward `(az, el)` relative to boresight.
pub fn steering_vector(g: &ArrayGeometry, az_deg: f64, el_deg: f64) -> Result<Vec<Complex64>> {
    for (what, a) in [("steering azimuth", az_deg), ("steering elevation", el_deg)] {
        if !(a > -90.0 && a < 90.0) {
            return Err(Error::Domain(format!("{what} {a} deg outside (-90, 90)")));
        }
    }
    Ok(g.response(az_deg, el_deg))
}

/// Element power pattern relative to its peak, dB: cos(theta) off boresight,
/// floored at `floor_db`.
pub fn element_pattern_db(az_deg: f64, el_deg: f64, floor_db: f64) -> f64 {
    let c = az_deg.to_radians().cos() * el_deg.to_radians().cos();
    if c <= 0.0 {
        return floor_db;
    }
    (10.0 * c.log10()).max(floor_db)
}

/// Quantized analog beam: per-element phase index and on/off state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamWeights {
    pub bits: u8,
    pub phases: Vec<u16>,
    pub on: Vec<bool>,
}

impl BeamWeights {
    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn active(&self) -> usize {
        self.on.iter().filter(|o| **o).count()
    }

    /// Unit-modulus complex weights (zero for disabled elements).
    pub fn to_complex(&self) -> Vec<Complex64> {
        let step = std::f64::consts::TAU / self.levels() as f64;
        self.phases
            .iter()
            .zip(&self.on)
            .map(|(p, on)| {
                if *on {
                    Complex64::from_polar(1.0, *p as f64 * step)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }
}

/// Rounds each weight's phase to the nearest of `2^bits` levels and forces
/// unit modulus. Elements with zero weight are switched off; if every weight
/// is zero all elements stay on at phase 0.
pub fn quantize_weights(w: &[Complex64], bits: u8) -> BeamWeights {
    let bits = bits.clamp(1, 15);
    let levels = 1u32 << bits;
    let step = std::f64::consts::TAU / levels as f64;
    let max = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut phases = Vec::with_capacity(w.len());
    let mut on = Vec::with_capacity(w.len());
    for c in w {
        let idx = (c.arg() / step).round().rem_euclid(levels as f64) as u32 % levels;
        phases.push(idx as u16);
        on.push(max == 0.0 || c.norm() > 1e-12 * max);
    }
    BeamWeights { bits, phases, on }
}

/// `|w^H a|^2 / |w|^2` for precomputed complex weights and response.
pub fn array_factor(w: &[Complex64], a: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut norm = 0.0;
    for (wi, ai) in w.iter().zip(a) {
        acc += wi.conj() * ai;
        norm += wi.norm_sqr();
    }
    if norm == 0.0 {
        return 0.0;
    }
    acc.norm_sqr() / norm
}

/// Beam gain of arbitrary complex weights, dB (array factor plus the
/// element's peak gain; the element pattern shape is not included).
pub fn gain_db_complex(g: &ArrayGeometry, w: &[Complex64], az_deg: f64, el_deg: f64) -> f64 {
    10.0 * array_factor(w, &g.response(az_deg, el_deg)).log10() + g.element_gain_dbi
}

/// `20 log10 |w^H a| - 10 log10 N_on + element gain`.
pub fn beam_gain_db(g: &ArrayGeometry, w: &BeamWeights, az_deg: f64, el_deg: f64) -> f64 {
    gain_db_complex(g, &w.to_complex(), az_deg, el_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn broadside_is_all_ones() {
        let g = ArrayGeometry::gnb_default();
        let a = steering_vector(&g, 0.0, 0.0).unwrap();
        assert_eq!(a.len(), 128);
        for x in a {
            assert_abs_diff_eq!(x.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(x.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn endfire_limit_phase_approaches_pi() {
        let g = ArrayGeometry::new(1, 2);
        let a = steering_vector(&g, 89.999, 0.0).unwrap();
        let dphi = (a[1] / a[0]).arg();
        assert_abs_diff_eq!(dphi, std::f64::consts::PI, epsilon = 1e-6);
        assert!(steering_vector(&g, 90.0, 0.0).is_err());
        assert!(steering_vector(&g, 0.0, -90.0).is_err());
    }

    #[test]
    fn element_index_convention() {
        let g = ArrayGeometry::new(2, 3);
        let (az, el) = (20.0_f64, 10.0_f64);
        let a = g.response(az, el);
        let (u, v) = direction_cosines(az, el);
        for m in 0..2 {
            for n in 0..3 {
                let want = Complex64::from_polar(1.0, std::f64::consts::PI * (m as f64 * v + n as f64 * u));
                assert_abs_diff_eq!((a[m * 3 + n] - want).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matched_beam_gain() {
        let g = ArrayGeometry::gnb_default();
        let a = steering_vector(&g, 0.0, 0.0).unwrap();
        let gain = gain_db_complex(&g, &a, 0.0, 0.0);
        assert_abs_diff_eq!(gain, 10.0 * 128f64.log10(), epsilon = 1e-9);
        assert_abs_diff_eq!(gain, 21.07, epsilon = 0.01);
        let w = quantize_weights(&a, 4);
        assert_abs_diff_eq!(beam_gain_db(&g, &w, 0.0, 0.0), gain, epsilon = 1e-9);
    }

    #[test]
    fn single_element_is_flat() {
        let g = ArrayGeometry {
            element_gain_dbi: 5.0,
            ..ArrayGeometry::new(1, 1)
        };
        let w = quantize_weights(&[Complex64::new(0.3, -0.2)], 4);
        for az in [-80.0, -10.0, 0.0, 45.0] {
            assert_abs_diff_eq!(beam_gain_db(&g, &w, az, 20.0), 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn on_grid_phases_are_fixed_points() {
        let step = std::f64::consts::TAU / 16.0;
        let w: Vec<Complex64> = (0..16).map(|k| Complex64::from_polar(1.0, k as f64 * step)).collect();
        let q = quantize_weights(&w, 4);
        assert_eq!(q.phases, (0..16).collect::<Vec<u16>>());
        for (a, b) in q.to_complex().iter().zip(&w) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantization_error_bound() {
        for bits in 1..=6u8 {
            let w: Vec<Complex64> = (0..500).map(|k| Complex64::from_polar(2.0, k as f64 * 0.0137 - 3.1)).collect();
            let q = quantize_weights(&w, bits);
            let bound = std::f64::consts::PI / (1u32 << bits) as f64 + 1e-12;
            for (a, b) in q.to_complex().iter().zip(&w) {
                assert!(a.norm() == 1.0 || (a.norm() - 1.0).abs() < 1e-12);
                assert!((a / b).arg().abs() <= bound);
            }
        }
    }

    #[test]
    fn quantized_boresight_loss_small() {
        let g = ArrayGeometry::gnb_default();
        for (az, el) in [(0.0, 0.0), (13.0, -7.0), (-41.0, 22.0)] {
            let a = steering_vector(&g, az, el).unwrap();
            let ideal = gain_db_complex(&g, &a, az, el);
            let q = beam_gain_db(&g, &quantize_weights(&a, 4), az, el);
            assert!(q <= ideal + 1e-9);
            assert!(ideal - q <= 0.2, "{az},{el}: {}", ideal - q);
        }
    }

    #[test]
    fn zero_weights_disable_elements() {
        let w = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
        let q = quantize_weights(&w, 4);
        assert_eq!(q.on, vec![true, false, true]);
        assert_eq!(q.active(), 2);
        assert!(quantize_weights(&[Complex64::new(0.0, 0.0); 3], 4).on.iter().all(|o| *o));
    }

    #[test]
    fn element_pattern() {
        assert_eq!(element_pattern_db(0.0, 0.0, -20.0), 0.0);
        assert_abs_diff_eq!(element_pattern_db(60.0, 0.0, -20.0), -3.0103, epsilon = 1e-4);
        assert_eq!(element_pattern_db(120.0, 0.0, -20.0), -20.0);
        assert_eq!(element_pattern_db(89.99, 0.0, -20.0), -20.0);
    }

    proptest::proptest! {
        #[test]
        fn gain_never_exceeds_matched_peak(
            az0 in -80.0..80.0f64, el0 in -80.0..80.0f64, az in -179.0..179.0f64, el in -89.0..89.0f64,
        ) {
            let g = ArrayGeometry::gnb_default();
            let w = quantize_weights(&steering_vector(&g, az0, el0).unwrap(), 4);
            let peak = 10.0 * (w.active() as f64).log10();
            proptest::prop_assert!(beam_gain_db(&g, &w, az, el) <= peak + 1e-9);
        }
    }
}
