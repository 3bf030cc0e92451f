//! Best-server spectral efficiency over a horizontal grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Orientation, Vec3};
use crate::link::{select_mcs, Direction};

use super::model::Model;
use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveragePoint {
    pub x: f64,
    pub y: f64,
    pub se_bpshz: f64,
    /// gNB with the highest SNR, when any MCS is usable.
    pub best_gnb: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageMap {
    pub nx: usize,
    pub ny: usize,
    pub step_m: f64,
    /// Row-major, `y` outer and `x` inner, both ascending.
    pub points: Vec<CoveragePoint>,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Coverage over the scenario's region with shadowing at its median and no
/// blockers. Grid points are evaluated in parallel; the result is ordered.
pub fn coverage_map(s: &Scenario, step_m: f64) -> Result<CoverageMap> {
    if !(step_m > 0.0) || !step_m.is_finite() {
        return Err(Error::validation("coverage.step_m", "must be > 0"));
    }
    let model = Model::new(s)?;
    let height = s.coverage.as_ref().map_or(1.5, |c| c.height_m);
    let (lo, hi) = s.coverage_region();
    let xs = axis(lo[0], hi[0], step_m);
    let ys = axis(lo[1], hi[1], step_m);
    let body = Orientation::wrapped(s.ue.heading_offset_deg, 90.0);
    let grid: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let points = grid
        .par_iter()
        .map(|&(x, y)| {
            let p = Vec3::new(x, y, height);
            let mut best: Option<(usize, f64)> = None;
            for g in 0..model.sites.len() {
                if model.sites[g].position.distance(p) == 0.0 {
                    continue;
                }
                let gains = model.gains(g, p, &[], false)?;
                let pair = model.table(g, &gains, &body)?.best();
                let snr = model.snr(g, Direction::Dl, pair.path_gain_db)?;
                if best.is_none_or(|(_, b)| snr > b) {
                    best = Some((g, snr));
                }
            }
            let mcs = best.and_then(|(_, snr)| select_mcs(&s.mcs, snr, 0.0));
            Ok(CoveragePoint {
                x,
                y,
                se_bpshz: mcs.map_or(0.0, |i| s.mcs.entries[i].efficiency),
                best_gnb: mcs.and(best.map(|(g, _)| g)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageMap {
        nx: xs.len(),
        ny: ys.len(),
        step_m,
        points,
    })
}
