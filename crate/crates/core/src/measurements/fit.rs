//! Least-squares fit of the close-in path loss model.
//!
//! With `x = 10 log10(d / d0)` and `y = PL - FSPL(d0)` the model is
//! `y = alpha x + X`, a line through the origin, so
//! `alpha = sum(x y) / sum(x^2)` and `sigma` is the residual standard
//! deviation with an `n - 1` denominator.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::channel::pathloss::{free_space_db, path_loss_db, LinkType, PathLossParams, UseCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub distance_m: f64,
    pub pl_db: f64,
    pub link_type: LinkType,
    pub use_case: UseCase,
    pub carrier_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathLossFit {
    pub alpha: f64,
    pub sigma_db: f64,
    pub residuals_db: Vec<f64>,
}

pub const D0: f64 = 1.0;

/// Fits exponent and shadowing deviation to measured samples.
pub fn fit_path_loss(samples: &[PathLossSample]) -> Result<PathLossFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} samples, need at least 3", samples.len())));
    }
    for s in samples {
        if !(s.distance_m >= D0) || !s.pl_db.is_finite() || !(s.carrier_ghz > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "invalid sample: d = {} m, PL = {} dB, f = {} GHz",
                s.distance_m, s.pl_db, s.carrier_ghz
            )));
        }
    }
    let first = samples[0].distance_m;
    if samples.iter().all(|s| s.distance_m == first) {
        return Err(Error::DegenerateFit("all samples at the same distance".into()));
    }
    let (dmin, dmax) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.distance_m), hi.max(s.distance_m)));
    if dmax / dmin < 10.0 {
        log::warn!("fit spans less than a decade of distance ({dmin} to {dmax} m)");
    }
    let xy: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (10.0 * (s.distance_m / D0).log10(), s.pl_db - free_space_db(D0, s.carrier_ghz)))
        .collect();
    let sxx: f64 = xy.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = xy.iter().map(|(x, y)| x * y).sum();
    let alpha = sxy / sxx;
    let residuals_db: Vec<f64> = xy.iter().map(|(x, y)| y - alpha * x).collect();
    let sigma_db = (residuals_db.iter().map(|r| r * r).sum::<f64>() / (samples.len() - 1) as f64).sqrt();
    Ok(PathLossFit {
        alpha,
        sigma_db,
        residuals_db,
    })
}

/// Draws `n` samples from the model with distances uniform on
/// `[d_min, d_max]` and independent shadowing.
pub fn synthetic_samples<R: Rng + ?Sized>(
    params: &PathLossParams,
    n: usize,
    d_min: f64,
    d_max: f64,
    rng: &mut R,
) -> Result<Vec<PathLossSample>> {
    if !(d_min >= params.d0 && d_max > d_min) {
        return Err(Error::Domain(format!("distance range [{d_min}, {d_max}] m")));
    }
    let dist = Uniform::new_inclusive(d_min, d_max).expect("checked range");
    let shadow = Normal::new(0.0, params.shadow_sigma_db).map_err(|e| Error::Domain(e.to_string()))?;
    (0..n)
        .map(|_| {
            let d = dist.sample(rng);
            Ok(PathLossSample {
                distance_m: d,
                pl_db: path_loss_db(params, d, shadow.sample(rng))?,
                link_type: params.link_type,
                use_case: params.use_case,
                carrier_ghz: params.carrier_ghz,
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct Row {
    distance_m: f64,
    pl_db: f64,
}

/// Reads `distance_m,pl_db` rows (header required; extra columns ignored).
pub fn read_samples<R: Read>(
    r: R,
    source: &Path,
    use_case: UseCase,
    link_type: LinkType,
    carrier_ghz: f64,
) -> Result<Vec<PathLossSample>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    rd.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                message: e.to_string(),
            })?;
            Ok(PathLossSample {
                distance_m: row.distance_m,
                pl_db: row.pl_db,
                link_type,
                use_case,
                carrier_ghz,
            })
        })
        .collect()
}

/// Writes samples as `distance_m,pl_db,residual_db` under a one-line header.
pub fn write_fit_csv<W: Write>(w: W, samples: &[PathLossSample], fit: &PathLossFit) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["distance_m", "pl_db", "residual_db"])?;
    for (s, r) in samples.iter().zip(&fit.residuals_db) {
        wr.write_record([s.distance_m.to_string(), s.pl_db.to_string(), r.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
