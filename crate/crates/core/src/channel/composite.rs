//! Per-cluster link gains: path loss, shadowing, penetration and blockage.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::channel::clusters::{Cluster, ClusterSet};
use crate::channel::pathloss::{path_loss_db, PathLossParams};
use crate::channel::penetration::{penetration_loss_db, Material};
use crate::error::{Error, Result};
use crate::geometry::{los_test, Cylinder, Obstacle, Orientation, Vec3};

/// Speed of light in m/ns.
const C_M_PER_NS: f64 = 0.299_792_458;

/// Static and dynamic propagation environment at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub obstacles: &'a [Obstacle],
    pub materials: &'a BTreeMap<String, Material>,
    pub blockers: &'a [Cylinder],
    pub blocker_loss_db: f64,
    pub carrier_ghz: f64,
}

impl Environment<'_> {
    /// Total penetration loss along `a -> b`.
    pub fn penetration_db(&self, a: Vec3, b: Vec3) -> Result<f64> {
        let mut loss = 0.0;
        for hit in los_test(self.obstacles, a, b).intersections {
            let m = self.materials.get(&hit.material).ok_or_else(|| Error::Lookup {
                kind: "material",
                id: hit.material.clone(),
            })?;
            loss += penetration_loss_db(m, self.carrier_ghz, hit.length, self.obstacles[hit.obstacle].thickness);
        }
        Ok(loss)
    }

    /// Indices of blockers crossed by any of `segments`.
    fn blockers_hit(&self, segments: &[(Vec3, Vec3)]) -> usize {
        self.blockers
            .iter()
            .filter(|c| segments.iter().any(|(a, b)| c.intersects(*a, *b)))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterGain {
    /// Large-scale gain excluding antennas, dB (may be -inf).
    pub gain_db: f64,
    pub phase: f64,
    pub penetration_db: f64,
    pub blocker_db: f64,
    /// Departure direction at the transmitter, world frame.
    pub departure: Vec3,
    /// Arrival direction at the receiver (pointing back toward the source), world frame.
    pub arrival: Vec3,
    pub excess_delay_ns: f64,
}

impl ClusterGain {
    pub fn complex(&self) -> Complex64 {
        if self.gain_db == f64::NEG_INFINITY {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(10f64.powf(self.gain_db / 20.0), self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGain {
    pub clusters: Vec<ClusterGain>,
    /// Omnidirectional aggregate path loss, dB (+inf when everything is blocked).
    pub path_loss_db: f64,
}

/// Frame whose boresight is `dir`.
fn frame_along(dir: Vec3) -> Orientation {
    let (az, el) = dir.bearing();
    Orientation::wrapped(az, 90.0 - el)
}

/// World departure and arrival directions of a cluster on the link `tx -> rx`.
pub fn cluster_directions(c: &Cluster, tx: Vec3, rx: Vec3) -> Result<(Vec3, Vec3)> {
    let u = (rx - tx).normalized().ok_or(Error::CoincidentPoints)?;
    let dep = frame_along(u).to_world(c.aod.az, c.aod.el);
    let arr = frame_along(-u).to_world(c.aoa.az, c.aoa.el);
    Ok((dep, arr))
}

/// Shadowing realizations for the two link types, dB.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shadowing {
    pub los_db: f64,
    pub nlos_db: f64,
}

/// Gains of every cluster on `tx -> rx`.
///
/// The LOS cluster follows the direct ray with the LOS exponent; NLOS clusters
/// use the NLOS exponent and are checked for obstacles and blockers on two
/// legs, one leaving the transmitter along the departure direction and one
/// leaving the receiver along the arrival direction, each half the unfolded
/// path length.
#[allow(clippy::too_many_arguments)]
pub fn cluster_gains(
    env: &Environment<'_>,
    los: &PathLossParams,
    nlos: &PathLossParams,
    shadow: Shadowing,
    set: &ClusterSet,
    phases: &[f64],
    tx: Vec3,
    rx: Vec3,
) -> Result<CompositeGain> {
    let d = tx.distance(rx);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let d_eff = d.max(los.d0);
    let mut out = Vec::with_capacity(set.len());
    for (i, c) in set.clusters.iter().enumerate() {
        let (dep, arr) = cluster_directions(c, tx, rx)?;
        let (pl, pen, nblk) = if c.is_los {
            let pl = path_loss_db(los, d_eff, shadow.los_db)?;
            (pl, env.penetration_db(tx, rx)?, env.blockers_hit(&[(tx, rx)]))
        } else {
            let pl = path_loss_db(nlos, d_eff, shadow.nlos_db)?;
            let leg = (d + C_M_PER_NS * c.excess_delay_ns) / 2.0;
            let (g_end, u_end) = (tx + dep * leg, rx + arr * leg);
            let pen = env.penetration_db(tx, g_end)? + env.penetration_db(rx, u_end)?;
            (pl, pen, env.blockers_hit(&[(tx, g_end), (rx, u_end)]))
        };
        let blk = nblk as f64 * env.blocker_loss_db;
        out.push(ClusterGain {
            gain_db: -pl - pen - blk + c.relative_power_db,
            phase: phases.get(i).copied().unwrap_or(0.0),
            penetration_db: pen,
            blocker_db: blk,
            departure: dep,
            arrival: arr,
            excess_delay_ns: c.excess_delay_ns,
        });
    }
    let lin: f64 = out.iter().map(|g| 10f64.powf(g.gain_db / 10.0)).sum();
    Ok(CompositeGain {
        clusters: out,
        path_loss_db: -10.0 * lin.log10(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::clusters::Angles;
    use crate::channel::pathloss::{LinkType, UseCase};
    use crate::geometry::Shape;
    use approx::assert_abs_diff_eq;

    fn params() -> (PathLossParams, PathLossParams) {
        (
            PathLossParams::for_carrier(UseCase::UMiStreetCanyon, LinkType::Los, 28.0),
            PathLossParams::for_carrier(UseCase::UMiStreetCanyon, LinkType::Nlos, 28.0),
        )
    }

    fn set() -> ClusterSet {
        ClusterSet {
            clusters: vec![
                Cluster {
                    aod: Angles::ZERO,
                    aoa: Angles::ZERO,
                    excess_delay_ns: 0.0,
                    relative_power_db: 0.0,
                    is_los: true,
                },
                Cluster {
                    aod: Angles::new(40.0, 0.0),
                    aoa: Angles::new(-120.0, 5.0),
                    excess_delay_ns: 80.0,
                    relative_power_db: -3.0,
                    is_los: false,
                },
            ],
        }
    }

    fn env<'a>(
        obstacles: &'a [Obstacle],
        materials: &'a BTreeMap<String, Material>,
        blockers: &'a [Cylinder],
    ) -> Environment<'a> {
        Environment {
            obstacles,
            materials,
            blockers,
            blocker_loss_db: 20.0,
            carrier_ghz: 28.0,
        }
    }

    const TX: Vec3 = Vec3::new(0.0, 0.0, 6.0);
    const RX: Vec3 = Vec3::new(0.0, 50.0, 1.5);

    #[test]
    fn single_los_cluster_is_path_loss() {
        let (l, n) = params();
        let m = BTreeMap::new();
        let s = ClusterSet {
            clusters: vec![set().clusters[0]],
        };
        let g = cluster_gains(&env(&[], &m, &[]), &l, &n, Shadowing::default(), &s, &[0.0], TX, RX).unwrap();
        let pl = path_loss_db(&l, TX.distance(RX), 0.0).unwrap();
        assert_abs_diff_eq!(g.clusters[0].gain_db, -pl, epsilon = 1e-12);
        assert_abs_diff_eq!(g.path_loss_db, pl, epsilon = 1e-9);
    }

    #[test]
    fn wall_costs_exactly_its_loss() {
        let (l, n) = params();
        let mut m = BTreeMap::new();
        m.insert("wall".to_string(), Material::simple("wall", 8.0));
        let wall = Obstacle::new(
            Shape::Wall {
                start: [-5.0, 25.0],
                end: [5.0, 25.0],
                z_min: 0.0,
                z_max: 10.0,
            },
            "wall",
            Some(0.2),
        )
        .unwrap();
        let base = cluster_gains(&env(&[], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX).unwrap();
        let walled = cluster_gains(&env(&[wall], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX)
            .unwrap();
        // the ray is not perpendicular in elevation, so allow the slant factor
        let slant = TX.distance(RX) / (RX - TX).x.hypot((RX - TX).y);
        assert_abs_diff_eq!(base.clusters[0].gain_db - walled.clusters[0].gain_db, 8.0 * slant, epsilon = 1e-9);
    }

    #[test]
    fn wall_on_level_ray_is_exact() {
        let (l, n) = params();
        let mut m = BTreeMap::new();
        m.insert("wall".to_string(), Material::simple("wall", 8.0));
        let wall = Obstacle::new(
            Shape::Wall {
                start: [-5.0, 25.0],
                end: [5.0, 25.0],
                z_min: 0.0,
                z_max: 10.0,
            },
            "wall",
            Some(0.2),
        )
        .unwrap();
        let (tx, rx) = (Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 50.0, 1.5));
        let s = ClusterSet {
            clusters: vec![set().clusters[0]],
        };
        let a = cluster_gains(&env(&[], &m, &[]), &l, &n, Shadowing::default(), &s, &[0.0], tx, rx).unwrap();
        let b = cluster_gains(&env(&[wall], &m, &[]), &l, &n, Shadowing::default(), &s, &[0.0], tx, rx).unwrap();
        assert_abs_diff_eq!(a.clusters[0].gain_db - b.clusters[0].gain_db, 8.0, epsilon = 1e-9);
    }

    #[test]
    fn blocker_hits_only_its_cluster() {
        let (l, n) = params();
        let m = BTreeMap::new();
        let person = Cylinder {
            center: Vec3::new(0.0, 48.0, 0.0),
            radius: 0.3,
            height: 1.8,
        };
        let a = cluster_gains(&env(&[], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX).unwrap();
        let b = cluster_gains(&env(&[], &m, &[person]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX)
            .unwrap();
        assert_abs_diff_eq!(a.clusters[0].gain_db - b.clusters[0].gain_db, 20.0, epsilon = 1e-12);
        assert_eq!(a.clusters[1].gain_db, b.clusters[1].gain_db);
    }

    #[test]
    fn opaque_obstacle_kills_los() {
        let (l, n) = params();
        let mut m = BTreeMap::new();
        m.insert("hill".to_string(), Material::opaque("hill"));
        let hill = Obstacle::new(
            Shape::Box {
                min: Vec3::new(-3.0, 20.0, 0.0),
                max: Vec3::new(3.0, 30.0, 10.0),
            },
            "hill",
            None,
        )
        .unwrap();
        let g = cluster_gains(&env(&[hill], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX).unwrap();
        assert_eq!(g.clusters[0].gain_db, f64::NEG_INFINITY);
        assert_eq!(g.clusters[0].complex(), Complex64::new(0.0, 0.0));
        assert!(g.clusters[1].gain_db.is_finite());
    }

    #[test]
    fn unknown_material_is_lookup_error() {
        let (l, n) = params();
        let m = BTreeMap::new();
        let wall = Obstacle::new(
            Shape::Wall {
                start: [-5.0, 25.0],
                end: [5.0, 25.0],
                z_min: 0.0,
                z_max: 10.0,
            },
            "nope",
            Some(0.2),
        )
        .unwrap();
        let r = cluster_gains(&env(&[wall], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX);
        assert!(matches!(r, Err(Error::Lookup { .. })));
    }

    #[test]
    fn los_cluster_points_at_peer() {
        let c = set().clusters[0];
        let (dep, arr) = cluster_directions(&c, TX, RX).unwrap();
        let u = (RX - TX).normalized().unwrap();
        assert_abs_diff_eq!(dep.dot(u), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(arr.dot(u), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn nlos_offsets_are_relative_to_direct_ray() {
        let c = set().clusters[1];
        let (dep, arr) = cluster_directions(&c, TX, RX).unwrap();
        let u = (RX - TX).normalized().unwrap();
        assert_abs_diff_eq!(dep.dot(u).acos().to_degrees(), 40.0, epsilon = 1e-9);
        let sep = Angles::new(-120.0, 5.0).separation(Angles::ZERO);
        assert_abs_diff_eq!(arr.dot(-u).acos().to_degrees(), sep, epsilon = 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn obstacle_never_raises_gain(
            x in -20.0..20.0f64, y in 5.0..45.0f64, w in 0.5..10.0f64, loss in 0.0..40.0f64,
        ) {
            let (l, n) = params();
            let mut m = BTreeMap::new();
            m.insert("m".to_string(), Material::simple("m", loss));
            let o = Obstacle::new(
                Shape::Box { min: Vec3::new(x, y, 0.0), max: Vec3::new(x + w, y + w, 8.0) },
                "m",
                None,
            ).unwrap();
            let a = cluster_gains(&env(&[], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX).unwrap();
            let b = cluster_gains(&env(&[o], &m, &[]), &l, &n, Shadowing::default(), &set(), &[0.0; 2], TX, RX).unwrap();
            for (ca, cb) in a.clusters.iter().zip(&b.clusters) {
                proptest::prop_assert!(cb.gain_db <= ca.gain_db);
            }
        }
    }
}
