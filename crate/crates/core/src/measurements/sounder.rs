//! Correlation channel sounder.
//!
//! A periodic PN sequence passes through a tapped-delay channel and is sampled
//! at twice the chip rate. Each polyphase branch (even and odd samples) is
//! circularly correlated with the reference chips; since the m-sequence has
//! off-peak autocorrelation -1 and sum +1, adding the branch sum and dividing
//! by `L + 1` yields the tap amplitudes without sidelobes. Branch `p` at chip
//! lag `k` becomes half-chip bin `2k + p`, so a tap shows up in two adjacent
//! bins. Bin powers are averaged over [`PERIODS`] sequence periods.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::measurements::pn::pn_sequence;

pub const PERIODS: usize = 16;

/// Power-delay profile on a uniform delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    /// `(delay ns, linear power)`, delays strictly increasing from 0.
    pub taps: Vec<(f64, f64)>,
    pub resolution_ns: f64,
}

impl Pdp {
    /// Index of the strongest bin; ties go to the earliest.
    pub fn peak(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &(_, p)) in self.taps.iter().enumerate() {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|b| b.0)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.1).sum()
    }

    /// Writes `delay_ns,power` rows under a one-line header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "delay_ns,power")?;
        for (d, p) in &self.taps {
            writeln!(w, "{d},{p:e}")?;
        }
        Ok(())
    }
}

/// Power-weighted RMS delay spread of the bins within `threshold_db` of the
/// peak, ns.
pub fn rms_delay_spread(p: &Pdp, threshold_db: f64) -> Result<f64> {
    let max = p.taps.iter().map(|t| t.1).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::EmptyInput("taps above threshold"));
    }
    let floor = max * 10f64.powf(-threshold_db / 10.0);
    let kept = || p.taps.iter().filter(|t| t.1 >= floor);
    let s0: f64 = kept().map(|t| t.1).sum();
    let mean = kept().map(|t| t.1 * t.0).sum::<f64>() / s0;
    let var = kept().map(|t| t.1 * (t.0 - mean).powi(2)).sum::<f64>() / s0;
    Ok(var.sqrt())
}

/// Sounds a channel given as `(delay ns, complex amplitude)` taps.
///
/// `noise_snr_db` is total tap power over per-sample noise power; negative
/// infinity sounds noise alone (taps are ignored, noise has unit power).
pub fn sound_channel<R: Rng + ?Sized>(
    cir: &[(f64, Complex64)],
    chip_rate_mcps: f64,
    order: u32,
    noise_snr_db: f64,
    rng: &mut R,
) -> Result<Pdp> {
    if !(chip_rate_mcps > 0.0) || !chip_rate_mcps.is_finite() {
        return Err(Error::OutOfRange {
            what: "chip rate (Mc/s)",
            value: chip_rate_mcps,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        });
    }
    let chips = pn_sequence(order)?;
    let l = chips.len();
    let tc = 1000.0 / chip_rate_mcps;
    let ts = tc / 2.0;
    let window = l as f64 * tc;
    for &(d, _) in cir {
        if !(d >= 0.0) || d >= window {
            return Err(Error::Aliasing {
                delay_ns: d,
                max_ns: window,
            });
        }
    }

    let signal_power: f64 = cir.iter().map(|t| t.1.norm_sqr()).sum();
    let (gain, noise_sd) = if noise_snr_db == f64::NEG_INFINITY {
        (0.0, 1.0)
    } else if noise_snr_db == f64::INFINITY {
        (1.0, 0.0)
    } else {
        let p = if signal_power > 0.0 { signal_power } else { 1.0 };
        (1.0, (p / 10f64.powf(noise_snr_db / 10.0)).sqrt())
    };

    // noiseless received samples of one period
    let mut clean = vec![Complex64::new(0.0, 0.0); 2 * l];
    for &(d, a) in cir {
        for (m, y) in clean.iter_mut().enumerate() {
            let t = m as f64 * ts - d;
            let chip = (t / tc).floor().rem_euclid(l as f64) as usize % l;
            *y += a * gain * chips[chip];
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    let mut reference: Vec<Complex64> = chips.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fwd.process(&mut reference);

    let mut power = vec![0.0; 2 * l];
    let mut branch = vec![Complex64::new(0.0, 0.0); l];
    let scale = 1.0 / (l as f64 * (l as f64 + 1.0));
    let per_bin = l as f64 / 2.0 / PERIODS as f64;
    for _ in 0..PERIODS {
        let noisy: Vec<Complex64> = clean
            .iter()
            .map(|y| {
                if noise_sd == 0.0 {
                    *y
                } else {
                    let (re, im): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                    y + Complex64::new(re, im) * (noise_sd / std::f64::consts::SQRT_2)
                }
            })
            .collect();
        for p in 0..2 {
            for (n, b) in branch.iter_mut().enumerate() {
                *b = noisy[2 * n + p];
            }
            let sum: Complex64 = branch.iter().sum();
            fwd.process(&mut branch);
            for (b, r) in branch.iter_mut().zip(&reference) {
                *b *= r.conj();
            }
            inv.process(&mut branch);
            // the inverse transform is unnormalized: divide by L
            for (k, b) in branch.iter().enumerate() {
                let h = (b / l as f64 + sum) * (scale * l as f64);
                power[2 * k + p] += per_bin * h.norm_sqr();
            }
        }
    }
    Ok(Pdp {
        taps: power.into_iter().enumerate().map(|(i, p)| (i as f64 * ts, p)).collect(),
        resolution_ns: ts,
    })
}
