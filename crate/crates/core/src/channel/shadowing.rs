//! Spatially correlated log-normal shadowing.
//!
//! A zero-mean Gaussian field with exponential autocorrelation
//! `exp(-|dp| / d_corr)`, drawn as a sum of random Fourier features. The
//! spectral density of the exponential kernel in 3-D is a multivariate
//! Cauchy, sampled as `z / (d_corr |g|)` with `z ~ N(0, I3)`, `g ~ N(0, 1)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const DEFAULT_COMPONENTS: usize = 512;

#[derive(Debug, Clone)]
pub struct ShadowField {
    sigma_db: f64,
    corr_distance: f64,
    wavevectors: Vec<Vec3>,
    phases: Vec<f64>,
}

impl ShadowField {
    pub fn new<R: Rng + ?Sized>(
        sigma_db: f64,
        corr_distance: f64,
        components: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma_db >= 0.0) || !sigma_db.is_finite() {
            return Err(Error::Domain(format!("shadowing sigma {sigma_db} dB")));
        }
        if !(corr_distance > 0.0) || !corr_distance.is_finite() {
            return Err(Error::Domain(format!(
                "correlation distance {corr_distance} m must be positive"
            )));
        }
        if components == 0 {
            return Err(Error::EmptyInput("shadowing components"));
        }
        let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
        let mut wavevectors = Vec::with_capacity(components);
        let mut phases = Vec::with_capacity(components);
        for _ in 0..components {
            let z = Vec3::new(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            );
            let g: f64 = StandardNormal.sample(rng);
            let g = g.abs().max(1e-12);
            wavevectors.push(z * (1.0 / (corr_distance * g)));
            phases.push(phase.sample(rng));
        }
        Ok(ShadowField {
            sigma_db,
            corr_distance,
            wavevectors,
            phases,
        })
    }

    /// Unit-variance field; scale samples by the link's sigma.
    pub fn unit<R: Rng + ?Sized>(corr_distance: f64, rng: &mut R) -> Result<Self> {
        Self::new(1.0, corr_distance, DEFAULT_COMPONENTS, rng)
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn corr_distance(&self) -> f64 {
        self.corr_distance
    }

    /// Shadowing value at `p`, dB.
    pub fn sample(&self, p: Vec3) -> f64 {
        let m = self.wavevectors.len() as f64;
        let s: f64 = self
            .wavevectors
            .iter()
            .zip(&self.phases)
            .map(|(k, ph)| (k.dot(p) + ph).cos())
            .sum();
        self.sigma_db * (2.0 / m).sqrt() * s
    }
}
