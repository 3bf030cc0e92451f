//! Immutable per-scenario state shared by the simulation loop and the
//! coverage map: codebooks, cluster sets and shadowing fields.

use std::collections::BTreeMap;

use rand::Rng;

use crate::array::codebook::{build_codebook, Codebook};
use crate::array::ue::{ue_codebooks, UeAntennaState};
use crate::beammgmt::Candidate;
use crate::channel::clusters::{sample_clusters_with, ClusterModel, ClusterSet};
use crate::channel::composite::{cluster_gains, ClusterGain, Environment, Shadowing};
use crate::channel::pathloss::{LinkType, PathLossParams};
use crate::channel::penetration::Material;
use crate::channel::shadowing::ShadowField;
use crate::error::Result;
use crate::geometry::{Cylinder, Obstacle, Orientation, Vec3};
use crate::link::{snr_db, Direction, LinkBudget};
use crate::precoding::{candidate_gain_db, CouplingTable};
use crate::rng::{stream, Purpose};

use super::scenario::Scenario;

pub(crate) struct Site {
    pub position: Vec3,
    pub orientation: Orientation,
    pub codebook: Codebook,
    pub budget: LinkBudget,
    scripted: Option<ClusterSet>,
    clusters: ClusterSet,
    phases: Vec<f64>,
    /// Unit-variance fields for the LOS and NLOS exponents.
    shadow: Option<(ShadowField, ShadowField)>,
}

pub(crate) struct Model {
    seed: u64,
    model: ClusterModel,
    obstacles: Vec<Obstacle>,
    materials: BTreeMap<String, Material>,
    blocker_loss_db: f64,
    carrier_ghz: f64,
    los: PathLossParams,
    nlos: PathLossParams,
    pub sites: Vec<Site>,
    pub ue: UeAntennaState,
    pub ue_codebooks: Vec<Codebook>,
}

impl Model {
    pub fn new(s: &Scenario) -> Result<Model> {
        let carrier = s.link.carrier_ghz;
        let corr = s.channel.corr_distance_m.unwrap_or(10.0);
        let mut codebooks: Vec<(usize, Codebook)> = Vec::new();
        let mut sites = Vec::with_capacity(s.gnb.len());
        for (i, g) in s.gnb.iter().enumerate() {
            // identical arrays share one codebook build
            let codebook = match codebooks
                .iter()
                .find(|(j, _)| s.gnb[*j].array == g.array && s.gnb[*j].codebook == g.codebook)
            {
                Some((_, cb)) => cb.clone(),
                None => {
                    let cb = build_codebook(&g.array, &g.codebook.sector, g.codebook.levels, g.codebook.bits)?;
                    codebooks.push((i, cb.clone()));
                    cb
                }
            };
            let shadow = if s.channel.shadowing {
                let idx = 2 * i as u64;
                Some((
                    ShadowField::unit(corr, &mut stream(s.seed, Purpose::Shadowing, idx))?,
                    ShadowField::unit(corr, &mut stream(s.seed, Purpose::Shadowing, idx + 1))?,
                ))
            } else {
                None
            };
            sites.push(Site {
                position: g.position,
                orientation: g.orientation(),
                codebook,
                budget: s.budget_for(i),
                scripted: g.scripted_clusters(),
                clusters: ClusterSet { clusters: Vec::new() },
                phases: Vec::new(),
                shadow,
            });
        }
        let ue = UeAntennaState::new(s.ue.subarray, s.ue.grip);
        let ue_codebooks = ue_codebooks(&ue, s.ue.beams_per_subarray, s.ue.bits)?;
        let mut m = Model {
            seed: s.seed,
            model: s.cluster_model(),
            obstacles: s.obstacles()?,
            materials: s.materials(),
            blocker_loss_db: s.channel.blocker_loss_db,
            carrier_ghz: carrier,
            los: PathLossParams::for_carrier(s.use_case, LinkType::Los, carrier),
            nlos: PathLossParams::for_carrier(s.use_case, LinkType::Nlos, carrier),
            sites,
            ue,
            ue_codebooks,
        };
        m.draw(0);
        Ok(m)
    }

    /// Replaces every random cluster set with draw number `n`. The direct
    /// cluster is always present; obstacles decide whether it survives.
    pub fn draw(&mut self, n: u64) {
        for (i, site) in self.sites.iter_mut().enumerate() {
            let idx = ((i as u64) << 16) | (n & 0xffff);
            site.clusters = match &site.scripted {
                Some(c) => c.clone(),
                None => sample_clusters_with(&mut stream(self.seed, Purpose::Clusters, idx), &self.model, true),
            };
            let mut rng = stream(self.seed, Purpose::Phases, idx);
            site.phases = (0..site.clusters.len())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
        }
    }

    /// Large-scale gains of every cluster of gNB `g` toward `ue`.
    pub fn gains(&self, g: usize, ue: Vec3, blockers: &[Cylinder], with_shadowing: bool) -> Result<Vec<ClusterGain>> {
        let site = &self.sites[g];
        let env = Environment {
            obstacles: &self.obstacles,
            materials: &self.materials,
            blockers,
            blocker_loss_db: self.blocker_loss_db,
            carrier_ghz: self.carrier_ghz,
        };
        let shadow = match (&site.shadow, with_shadowing) {
            (Some((l, n)), true) => Shadowing {
                los_db: self.los.shadow_sigma_db * l.sample(ue),
                nlos_db: self.nlos.shadow_sigma_db * n.sample(ue),
            },
            _ => Shadowing::default(),
        };
        Ok(cluster_gains(
            &env,
            &self.los,
            &self.nlos,
            shadow,
            &site.clusters,
            &site.phases,
            site.position,
            ue,
        )?
        .clusters)
    }

    pub fn table(&self, g: usize, gains: &[ClusterGain], body: &Orientation) -> Result<CouplingTable> {
        let site = &self.sites[g];
        CouplingTable::new(
            gains,
            &site.codebook,
            &site.orientation,
            &self.ue,
            &self.ue_codebooks,
            body,
        )
    }

    /// Downlink SNR of one candidate, dB.
    pub fn candidate_snr(&self, c: &Candidate, gains: &[ClusterGain], body: &Orientation) -> Result<f64> {
        let site = &self.sites[c.gnb];
        let g = candidate_gain_db(
            gains,
            &site.codebook,
            &site.orientation,
            c.tx_beam,
            &self.ue,
            &self.ue_codebooks[c.subarray],
            c.subarray,
            c.rx_beam,
            body,
        )?;
        self.snr(c.gnb, Direction::Dl, g)
    }

    pub fn snr(&self, g: usize, dir: Direction, path_gain_db: f64) -> Result<f64> {
        snr_db(&self.sites[g].budget, dir, path_gain_db, 0.0)
    }
}
