//! Sparse directional cluster generator.
//!
//! Cluster angles are offsets from the direct gNB-UE direction: AoD relative
//! to the gNB->UE ray, AoA relative to the UE->gNB ray. A LOS cluster therefore
//! sits at (0, 0) on both ends.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::channel::pathloss::{PathLossParams, UseCase};
use crate::geometry::{LosResult, Vec3};

pub const MAX_CLUSTERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub az: f64,
    pub el: f64,
}

impl Angles {
    pub const ZERO: Angles = Angles { az: 0.0, el: 0.0 };

    pub fn new(az: f64, el: f64) -> Self {
        Angles { az, el }
    }

    /// Great-circle separation in degrees.
    pub fn separation(self, o: Angles) -> f64 {
        let a = Vec3::from_bearing(self.az, self.el);
        let b = Vec3::from_bearing(o.az, o.el);
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub aod: Angles,
    pub aoa: Angles,
    pub excess_delay_ns: f64,
    /// Power relative to the strongest cluster, dB.
    pub relative_power_db: f64,
    pub is_los: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Shifts powers so the strongest cluster is at 0 dB.
    pub fn normalize(&mut self) {
        let max = self
            .clusters
            .iter()
            .map(|c| c.relative_power_db)
            .fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() {
            for c in &mut self.clusters {
                c.relative_power_db -= max;
            }
        }
    }

    /// RMS delay spread (ns) of the clusters within `threshold_db` of the
    /// strongest one.
    pub fn rms_delay_spread_ns(&self, threshold_db: f64) -> f64 {
        let taps: Vec<(f64, f64)> = self
            .clusters
            .iter()
            .map(|c| (c.excess_delay_ns, c.relative_power_db))
            .collect();
        rms_delay_spread_db(&taps, threshold_db)
    }
}

/// RMS delay spread of `(delay, power_db)` taps, keeping taps within
/// `threshold_db` of the strongest.
pub fn rms_delay_spread_db(taps: &[(f64, f64)], threshold_db: f64) -> f64 {
    let max = taps.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let kept = taps
        .iter()
        .filter(|t| t.1 >= max - threshold_db)
        .map(|&(d, p)| (d, 10f64.powf((p - max) / 10.0)));
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (d, w) in kept {
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
    }
    let mean = s1 / s0;
    (s2 / s0 - mean * mean).max(0.0).sqrt()
}

/// Generator settings. Defaults come from [`ClusterModel::for_use_case`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterModel {
    /// Scale of the exponential NLOS excess-delay distribution, ns.
    pub delay_scale_ns: f64,
    /// NLOS power decay per delay scale, dB.
    pub decay_db_per_scale: f64,
    /// Extra attenuation of NLOS clusters when a LOS cluster is present, dB.
    /// Zero by default since NLOS clusters already carry the NLOS exponent.
    pub los_nlos_offset_db: f64,
    /// Multiplies every NLOS delay; 1 by default.
    pub tail_multiplier: f64,
    pub aod_az_half_deg: f64,
    pub aod_el_half_deg: f64,
    pub aoa_el_half_deg: f64,
    pub min_separation_deg: f64,
}

impl ClusterModel {
    /// Calibrated defaults. The delay scales put the median RMS delay spread
    /// near 40 ns (office), 70 ns (mall) and 220 ns (outdoor).
    pub fn for_use_case(u: UseCase) -> Self {
        let delay_scale_ns = match u {
            UseCase::IndoorOffice => 100.0,
            UseCase::IndoorMall => 175.0,
            UseCase::UMiStreetCanyon => 550.0,
            UseCase::OutdoorOpen => 600.0,
        };
        ClusterModel {
            delay_scale_ns,
            decay_db_per_scale: 4.0,
            los_nlos_offset_db: 0.0,
            tail_multiplier: 1.0,
            aod_az_half_deg: 60.0,
            aod_el_half_deg: 10.0,
            aoa_el_half_deg: 10.0,
            min_separation_deg: 10.0,
        }
    }
}

const MAX_REJECTIONS: usize = 1000;

/// Draws a cluster set with the default model for `params.use_case`.
pub fn sample_clusters<R: Rng + ?Sized>(rng: &mut R, params: &PathLossParams, link: &LosResult) -> ClusterSet {
    sample_clusters_with(rng, &ClusterModel::for_use_case(params.use_case), link.is_los)
}

pub fn sample_clusters_with<R: Rng + ?Sized>(rng: &mut R, model: &ClusterModel, los: bool) -> ClusterSet {
    let count = rng.random_range(1..=MAX_CLUSTERS);
    let exp = Exp::new(1.0).expect("unit rate");
    let aod_az = Uniform::new_inclusive(-model.aod_az_half_deg, model.aod_az_half_deg).expect("range");
    let aod_el = Uniform::new_inclusive(-model.aod_el_half_deg, model.aod_el_half_deg).expect("range");
    let aoa_az = Uniform::new(-180.0, 180.0).expect("range");
    let aoa_el = Uniform::new_inclusive(-model.aoa_el_half_deg, model.aoa_el_half_deg).expect("range");

    let mut aods: Vec<Angles> = Vec::with_capacity(count);
    let mut aoas: Vec<Angles> = Vec::with_capacity(count);
    if los {
        aods.push(Angles::ZERO);
        aoas.push(Angles::ZERO);
    }
    let sep = model.min_separation_deg;
    while aods.len() < count {
        let mut placed = false;
        for _ in 0..MAX_REJECTIONS {
            let d = Angles::new(aod_az.sample(rng), aod_el.sample(rng));
            let a = Angles::new(aoa_az.sample(rng), aoa_el.sample(rng));
            if aods.iter().all(|o| o.separation(d) >= sep) && aoas.iter().all(|o| o.separation(a) >= sep) {
                aods.push(d);
                aoas.push(a);
                placed = true;
                break;
            }
        }
        if !placed {
            break;
        }
    }

    let n_nlos = aods.len() - usize::from(los);
    let mut delays: Vec<f64> = (0..n_nlos)
        .map(|_| exp.sample(rng) * model.delay_scale_ns * model.tail_multiplier)
        .collect();
    if !los {
        // the first arrival defines zero excess delay
        let min = delays.iter().cloned().fold(f64::INFINITY, f64::min);
        for d in &mut delays {
            *d -= min;
        }
    }

    let mut clusters = Vec::with_capacity(aods.len());
    if los {
        clusters.push(Cluster {
            aod: aods[0],
            aoa: aoas[0],
            excess_delay_ns: 0.0,
            relative_power_db: 0.0,
            is_los: true,
        });
    }
    let offset = if los { model.los_nlos_offset_db } else { 0.0 };
    for (i, tau) in delays.into_iter().enumerate() {
        let j = i + usize::from(los);
        clusters.push(Cluster {
            aod: aods[j],
            aoa: aoas[j],
            excess_delay_ns: tau,
            relative_power_db: -offset
                - model.decay_db_per_scale * tau / (model.delay_scale_ns * model.tail_multiplier),
            is_los: false,
        });
    }
    let mut set = ClusterSet { clusters };
    set.normalize();
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::pathloss::{Band, LinkType};
    use crate::rng::{stream, Purpose};

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn los_cluster_first() {
        let mut rng = stream(1, Purpose::Clusters, 0);
        let p = PathLossParams::table(UseCase::IndoorOffice, LinkType::Los, Band::Ghz29);
        for _ in 0..200 {
            let s = sample_clusters(&mut rng, &p, &LosResult::clear());
            let c = s.clusters[0];
            assert!(c.is_los);
            assert_eq!(c.excess_delay_ns, 0.0);
            assert_eq!(c.relative_power_db, 0.0);
            assert_eq!(s.clusters.iter().filter(|c| c.is_los).count(), 1);
        }
    }

    #[test]
    fn count_and_separation() {
        let mut rng = stream(2, Purpose::Clusters, 0);
        let m = ClusterModel::for_use_case(UseCase::UMiStreetCanyon);
        let mut seen = [0usize; MAX_CLUSTERS + 1];
        for i in 0..20_000 {
            let s = sample_clusters_with(&mut rng, &m, i % 2 == 0);
            assert!((1..=MAX_CLUSTERS).contains(&s.len()));
            seen[s.len()] += 1;
            for (a, ca) in s.clusters.iter().enumerate() {
                assert!(ca.excess_delay_ns >= 0.0);
                assert!(ca.relative_power_db <= 0.0);
                for cb in &s.clusters[a + 1..] {
                    assert!(ca.aod.separation(cb.aod) >= 10.0);
                    assert!(ca.aoa.separation(cb.aoa) >= 10.0);
                }
            }
            let max = s.clusters.iter().map(|c| c.relative_power_db).fold(f64::MIN, f64::max);
            assert_eq!(max, 0.0);
        }
        assert!(seen[1..].iter().all(|n| *n > 2500), "{seen:?}");
    }

    #[test]
    fn office_nlos_delay_spread_band() {
        let mut rng = stream(3, Purpose::Clusters, 0);
        let m = ClusterModel::for_use_case(UseCase::IndoorOffice);
        let ds: Vec<f64> = (0..10_000)
            .map(|_| sample_clusters_with(&mut rng, &m, false).rms_delay_spread_ns(25.0))
            .collect();
        let med = median(ds);
        assert!((30.0..=50.0).contains(&med), "median {med}");
    }

    #[test]
    fn tail_multiplier_scales_delays() {
        let mut m = ClusterModel::for_use_case(UseCase::OutdoorOpen);
        let a = sample_clusters_with(&mut stream(9, Purpose::Clusters, 0), &m, false);
        m.tail_multiplier = 2.0;
        let b = sample_clusters_with(&mut stream(9, Purpose::Clusters, 0), &m, false);
        for (x, y) in a.clusters.iter().zip(&b.clusters) {
            assert!((2.0 * x.excess_delay_ns - y.excess_delay_ns).abs() < 1e-9);
            assert!((x.relative_power_db - y.relative_power_db).abs() < 1e-9);
        }
    }

    #[test]
    fn rms_of_two_equal_taps() {
        let ds = rms_delay_spread_db(&[(0.0, 0.0), (100.0, 0.0)], 25.0);
        assert!((ds - 50.0).abs() < 1e-12);
        let ds = rms_delay_spread_db(&[(0.0, 0.0), (100.0, -30.0)], 25.0);
        assert_eq!(ds, 0.0);
    }
}
