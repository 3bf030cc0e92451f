//! Hierarchical analog beam codebooks.
//!
//! Beams sit on a grid in direction-cosine space `(u, v)`. The grid pitch of a
//! level is twice the half-width over which that level's boresight beam stays
//! within [`AXIS_LOSS_DB`] of its peak on each axis, so any direction in the
//! sector is within `2 * AXIS_LOSS_DB` of the level peak plus quantization loss.
//!
//! Coarser levels are broadened by splitting an axis into four contiguous
//! sub-apertures, each steered to an adjacent offset with continuous phase
//! across block boundaries, and picking the offset spread that gives the
//! widest flat-topped beam. The first coarser level broadens azimuth, the
//! next also broadens elevation; with phase-only weights a 16-column axis has
//! no usable intermediate width, so each step widens by about 3.5x. This is an
//! approximation of beam-broadening designs, not a reproduction of any
//! particular one.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::steering::{array_factor, quantize_weights, ArrayGeometry, BeamWeights};
use crate::error::{Error, Result};

/// Per-axis loss at the edge of a beam's grid cell, dB.
pub const AXIS_LOSS_DB: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sector {
    pub az_min: f64,
    pub az_max: f64,
    pub el_min: f64,
    pub el_max: f64,
}

impl Default for Sector {
    fn default() -> Self {
        Sector {
            az_min: -60.0,
            az_max: 60.0,
            el_min: -30.0,
            el_max: 30.0,
        }
    }
}

impl Sector {
    pub fn validate(&self) -> Result<()> {
        if !(self.az_min <= self.az_max && self.el_min <= self.el_max) {
            return Err(Error::Geometry("sector bounds are inverted".into()));
        }
        for a in [self.az_min, self.az_max, self.el_min, self.el_max] {
            if !(a > -90.0 && a < 90.0) {
                return Err(Error::Geometry(format!(
                    "sector edge {a} deg is outside the steerable range (-90, 90)"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, az: f64, el: f64) -> bool {
        (self.az_min..=self.az_max).contains(&az) && (self.el_min..=self.el_max).contains(&el)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Index within the whole codebook.
    pub id: usize,
    pub level: usize,
    pub az_deg: f64,
    pub el_deg: f64,
    pub width_az_deg: f64,
    pub width_el_deg: f64,
    pub weights: BeamWeights,
    #[serde(skip)]
    complex: Vec<Complex64>,
}

impl Beam {
    fn new(id: usize, level: usize, dir: (f64, f64), width: (f64, f64), weights: BeamWeights) -> Self {
        let complex = weights.to_complex();
        Beam {
            id,
            level,
            az_deg: dir.0,
            el_deg: dir.1,
            width_az_deg: width.0,
            width_el_deg: width.1,
            weights,
            complex,
        }
    }

    pub fn complex_weights(&self) -> &[Complex64] {
        &self.complex
    }

    /// Linear array-factor gain against a precomputed array response.
    pub fn array_factor(&self, response: &[Complex64]) -> f64 {
        array_factor(&self.complex, response)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub beams: Vec<Beam>,
    /// Peak beam gain of the level including element gain, dB.
    pub peak_gain_db: f64,
    pub sub_apertures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub geometry: ArrayGeometry,
    pub sector: Sector,
    pub bits: u8,
    /// Coarsest first.
    pub levels: Vec<Level>,
}

/// Normalized power profile `|sum_n exp(-j psi_n) exp(j 2 pi s n t)|^2 / n`
/// of one axis at each `t`, by Horner's rule in `exp(j 2 pi s t)`.
fn axis_profile_many(spacing: f64, psi: &[f64], ts: impl Iterator<Item = f64>) -> Vec<f64> {
    let k = std::f64::consts::TAU * spacing;
    let e: Vec<Complex64> = psi.iter().map(|p| Complex64::from_polar(1.0, -p)).collect();
    let n = psi.len() as f64;
    ts.map(|t| {
        let z = Complex64::from_polar(1.0, k * t);
        let acc = e.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
        acc.norm_sqr() / n
    })
    .collect()
}

#[derive(Clone)]
struct AxisShape {
    peak: f64,
    /// Largest `h` with the profile above `peak - AXIS_LOSS_DB` on all of [-h, h].
    half_width: f64,
}

fn axis_shape(spacing: f64, psi: &[f64]) -> AxisShape {
    if psi.len() == 1 {
        return AxisShape {
            peak: 1.0,
            half_width: f64::INFINITY,
        };
    }
    let step = 5e-4;
    let n = (1.0 / step) as i64;
    let samples = axis_profile_many(spacing, psi, (-n..=n).map(|i| i as f64 * step));
    let peak = samples.iter().cloned().fold(0.0, f64::max);
    let thr = peak * 10f64.powf(-AXIS_LOSS_DB / 10.0);
    let mid = n as usize;
    let mut reach = 0usize;
    while reach < mid && samples[mid + reach + 1] >= thr && samples[mid - reach - 1] >= thr {
        reach += 1;
    }
    AxisShape {
        peak,
        half_width: reach as f64 * step,
    }
}

/// Column phase offsets for `split` sub-apertures whose steering offsets span
/// `spread` in `u`, with continuous phase.
fn broadening_phases(cols: usize, spacing: f64, split: usize, spread: f64) -> Vec<f64> {
    let k = std::f64::consts::TAU * spacing;
    let mut psi = Vec::with_capacity(cols);
    let mut acc = 0.0;
    for n in 0..cols {
        psi.push(acc);
        let block = (n * split) / cols;
        let offset = if split > 1 {
            (block as f64 / (split - 1) as f64 - 0.5) * spread
        } else {
            0.0
        };
        acc += k * offset;
    }
    let mid = psi[cols / 2];
    psi.iter().map(|p| p - mid).collect()
}

fn evenly(lo: f64, hi: f64, pitch: f64) -> Vec<f64> {
    if !(hi > lo) || !pitch.is_finite() {
        return vec![0.5 * (lo + hi)];
    }
    let n = ((hi - lo) / pitch).ceil().max(1.0) as usize;
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

fn deg(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Weights steered to `(u0, v0)` with row and column broadening phases.
fn weights_at(g: &ArrayGeometry, u0: f64, v0: f64, psi_v: &[f64], psi_u: &[f64]) -> Vec<Complex64> {
    let k = std::f64::consts::TAU * g.spacing;
    let mut w = Vec::with_capacity(g.len());
    for (m, pv) in psi_v.iter().enumerate() {
        for (n, pu) in psi_u.iter().enumerate() {
            w.push(Complex64::from_polar(1.0, k * (m as f64 * v0 + n as f64 * u0) + pv + pu));
        }
    }
    w
}

/// Widest flat-topped beam reachable on an axis of `len` elements by
/// splitting it into four sub-apertures.
fn broaden(len: usize, spacing: f64) -> Option<(usize, Vec<f64>, AxisShape)> {
    type Cache = Mutex<HashMap<(usize, u64), Option<(usize, Vec<f64>, AxisShape)>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (len, spacing.to_bits());
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return hit.clone();
    }
    let found = search_broadening(len, spacing);
    cache.lock().expect("cache lock").insert(key, found.clone());
    found
}

fn search_broadening(len: usize, spacing: f64) -> Option<(usize, Vec<f64>, AxisShape)> {
    let split = 4;
    if len < 2 * split {
        return None;
    }
    let fine = axis_shape(spacing, &vec![0.0; len]).half_width;
    let mut best: Option<(usize, Vec<f64>, AxisShape)> = None;
    for i in 1..=600 {
        let psi = broadening_phases(len, spacing, split, i as f64 * 0.005);
        let shape = axis_shape(spacing, &psi);
        if best.as_ref().is_none_or(|b| shape.half_width > b.2.half_width) {
            best = Some((split, psi, shape));
        }
    }
    best.filter(|b| b.2.half_width > 1.2 * fine)
}

/// Beam centers covering the sector for the given pitches.
fn grid(sector: &Sector, pitch_u: f64, pitch_v: f64) -> Vec<(f64, f64)> {
    let (v_lo, v_hi) = (sector.el_min.to_radians().sin(), sector.el_max.to_radians().sin());
    let (s_lo, s_hi) = (sector.az_min.to_radians().sin(), sector.az_max.to_radians().sin());
    let rows = evenly(v_lo, v_hi, pitch_v);
    let band = if rows.len() > 1 { (v_hi - v_lo) / rows.len() as f64 } else { 0.0 };
    let mut out = Vec::new();
    for v in rows {
        let (a, b) = ((v - band / 2.0).max(-1.0), (v + band / 2.0).min(1.0));
        let cos_max = if a <= 0.0 && b >= 0.0 {
            1.0
        } else {
            (1.0 - a.abs().min(b.abs()).powi(2)).sqrt()
        };
        let cos_min = (1.0 - a.abs().max(b.abs()).powi(2)).sqrt();
        let u_lo = (cos_max * s_lo).min(cos_min * s_lo);
        let u_hi = (cos_max * s_hi).max(cos_min * s_hi);
        for u in evenly(u_lo, u_hi, pitch_u) {
            out.push((u, v));
        }
    }
    out
}

/// Builds a `levels`-deep codebook over `sector` with `bits`-bit phase shifters.
pub fn build_codebook(g: &ArrayGeometry, sector: &Sector, levels: usize, bits: u8) -> Result<Codebook> {
    g.validate()?;
    sector.validate()?;
    if levels == 0 {
        return Err(Error::Domain("codebook needs at least one level".into()));
    }
    if bits == 0 {
        return Err(Error::Domain("phase shifters need at least one bit".into()));
    }
    // Finest level first. Each coarser level broadens one more axis,
    // azimuth before elevation.
    type Axis = (usize, Vec<f64>, AxisShape);
    let fine = |len: usize| -> Axis { (1, vec![0.0; len], axis_shape(g.spacing, &vec![0.0; len])) };
    let mut stages: Vec<(Axis, Axis)> = vec![(fine(g.cols), fine(g.rows))];
    for depth in 1..levels {
        let (u, v) = stages.last().unwrap().clone();
        let next = match depth {
            1 => broaden(g.cols, g.spacing).map(|w| (w, v)),
            2 => broaden(g.rows, g.spacing).map(|w| (u, w)),
            _ => None,
        };
        let next = next.ok_or_else(|| {
            Error::Geometry(format!(
                "a {}x{} array supports at most {depth} codebook levels",
                g.rows, g.cols
            ))
        })?;
        stages.push(next);
    }
    stages.reverse();

    let mut id = 0;
    let mut out = Vec::with_capacity(levels);
    for (level, ((split_u, psi_u, u_shape), (split_v, psi_v, v_shape))) in stages.into_iter().enumerate() {
        let pitch_u = 2.0 * u_shape.half_width;
        let pitch_v = 2.0 * v_shape.half_width;
        let width = (2.0 * deg(u_shape.half_width), 2.0 * deg(v_shape.half_width.min(1.0)));
        let mut beams = Vec::new();
        for (u, v) in grid(sector, pitch_u, pitch_v) {
            let el = deg(v);
            let az = deg(u / el.to_radians().cos());
            let w = quantize_weights(&weights_at(g, u, v, &psi_v, &psi_u), bits);
            beams.push(Beam::new(id, level, (az, el), width, w));
            id += 1;
        }
        out.push(Level {
            beams,
            peak_gain_db: 10.0 * (u_shape.peak * v_shape.peak).log10() + g.element_gain_dbi,
            sub_apertures: split_u * split_v,
        });
    }
    Ok(Codebook {
        geometry: *g,
        sector: *sector,
        bits,
        levels: out,
    })
}

impl Codebook {
    /// Single-level codebook of `n_beams` beams spread evenly in `u` across
    /// the azimuth span of `sector`, at elevation 0.
    pub fn uniform_row(g: &ArrayGeometry, sector: &Sector, n_beams: usize, bits: u8) -> Result<Codebook> {
        g.validate()?;
        sector.validate()?;
        if n_beams == 0 {
            return Err(Error::Domain("codebook needs at least one beam".into()));
        }
        let (lo, hi) = (sector.az_min.to_radians().sin(), sector.az_max.to_radians().sin());
        let psi = vec![0.0; g.cols];
        let u_shape = axis_shape(g.spacing, &psi);
        let width = 2.0 * deg(u_shape.half_width);
        let beams = (0..n_beams)
            .map(|i| {
                let u = lo + (i as f64 + 0.5) * (hi - lo) / n_beams as f64;
                let w = quantize_weights(&weights_at(g, u, 0.0, &[0.0], &psi), bits);
                Beam::new(i, 0, (deg(u), 0.0), (width, 180.0), w)
            })
            .collect();
        Ok(Codebook {
            geometry: *g,
            sector: *sector,
            bits,
            levels: vec![Level {
                beams,
                peak_gain_db: 10.0 * (g.len() as f64).log10() + g.element_gain_dbi,
                sub_apertures: 1,
            }],
        })
    }

    pub fn finest(&self) -> &[Beam] {
        &self.levels.last().expect("at least one level").beams
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.beams.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rebuilds cached complex weights after deserialization.
    pub fn refresh(&mut self) {
        for l in &mut self.levels {
            for b in &mut l.beams {
                b.complex = b.weights.to_complex();
            }
        }
    }

    /// Writes the codebook as whitespace-separated text, one beam per line:
    /// `beam_id level az_deg el_deg width_az_deg width_el_deg phases`.
    /// `phases` lists one hex digit per element in storage order (row-major,
    /// rows = elevation) with `-` for a disabled element; for more than four
    /// bits the indices are decimal and comma-separated.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# rows={} cols={} spacing={} bits={} levels={}",
            self.geometry.rows,
            self.geometry.cols,
            self.geometry.spacing,
            self.bits,
            self.levels.len()
        )?;
        writeln!(w, "# beam_id level az_deg el_deg width_az_deg width_el_deg phases")?;
        for l in &self.levels {
            for b in &l.beams {
                let phases: Vec<String> = b
                    .weights
                    .phases
                    .iter()
                    .zip(&b.weights.on)
                    .map(|(p, on)| match (on, self.bits <= 4) {
                        (false, _) => "-".to_string(),
                        (true, true) => format!("{p:x}"),
                        (true, false) => p.to_string(),
                    })
                    .collect();
                let sep = if self.bits <= 4 { "" } else { "," };
                writeln!(
                    w,
                    "{} {} {:.3} {:.3} {:.3} {:.3} {}",
                    b.id,
                    b.level,
                    b.az_deg,
                    b.el_deg,
                    b.width_az_deg,
                    b.width_el_deg,
                    phases.join(sep)
                )?;
            }
        }
        Ok(())
    }
}
