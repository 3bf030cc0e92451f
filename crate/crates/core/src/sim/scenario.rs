//! Scenario files.
//!
//! A scenario is a TOML document. Unknown keys are rejected, every optional
//! key has a documented default, and each default actually used is logged
//! and kept in [`Scenario::defaults_applied`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::codebook::Sector;
use crate::array::steering::ArrayGeometry;
use crate::array::ue::GripMode;
use crate::beammgmt::BmConfig;
use crate::channel::clusters::{Angles, Cluster, ClusterModel, ClusterSet};
use crate::channel::pathloss::UseCase;
use crate::channel::penetration::Material;
use crate::error::{Error, Result};
use crate::geometry::{Obstacle, Orientation, Shape, Trajectory, Vec3};
use crate::link::{DuplexConfig, LinkBudget, McsTable};

use super::bundled;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub use_case: UseCase,
    #[serde(default = "default_timestep_ms")]
    pub timestep_ms: f64,
    /// Simulated time; defaults to the UE trajectory duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub world: World,
    #[serde(default)]
    pub gnb: Vec<GnbSpec>,
    pub ue: UeSpec,
    #[serde(default)]
    pub material: Vec<Material>,
    #[serde(default)]
    pub obstacle: Vec<ObstacleSpec>,
    #[serde(default)]
    pub blocker: Vec<BlockerSpec>,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub link: LinkBudget,
    #[serde(default)]
    pub mcs: McsTable,
    #[serde(default = "default_mcs_hysteresis_db")]
    pub mcs_hysteresis_db: f64,
    #[serde(default)]
    pub duplex: DuplexConfig,
    #[serde(default)]
    pub bm: BmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSpec>,
    /// Dotted paths of every key filled from a default.
    #[serde(skip)]
    pub defaults_applied: Vec<String>,
}

fn default_timestep_ms() -> f64 {
    10.0
}

fn default_mcs_hysteresis_db() -> f64 {
    1.0
}

/// Axis-aligned bounds every trajectory must stay within.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub min: Vec3,
    pub max: Vec3,
}

impl World {
    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSpec {
    pub levels: usize,
    pub bits: u8,
    pub sector: Sector,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        CodebookSpec {
            levels: 3,
            bits: 4,
            sector: Sector::default(),
        }
    }
}

/// A fixed cluster, as offsets from the direct ray (see
/// [`crate::channel::clusters`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedCluster {
    /// `[azimuth, elevation]`, degrees.
    pub aod: [f64; 2],
    pub aoa: [f64; 2],
    #[serde(default)]
    pub delay_ns: f64,
    #[serde(default)]
    pub power_db: f64,
    #[serde(default)]
    pub los: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnbSpec {
    pub id: String,
    pub position: Vec3,
    #[serde(default)]
    pub azimuth_deg: f64,
    /// From zenith; 90 is horizontal.
    #[serde(default = "default_downtilt")]
    pub downtilt_deg: f64,
    #[serde(default = "ArrayGeometry::gnb_default")]
    pub array: ArrayGeometry,
    #[serde(default)]
    pub codebook: CodebookSpec,
    /// Overrides `link.gnb_eirp_dbm` for this gNB.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_eirp_dbm: Option<f64>,
    /// Fixed clusters; when empty the clusters are drawn at random.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cluster: Vec<ScriptedCluster>,
}

fn default_downtilt() -> f64 {
    90.0
}

impl GnbSpec {
    pub fn orientation(&self) -> Orientation {
        Orientation::wrapped(self.azimuth_deg, self.downtilt_deg)
    }

    pub fn scripted_clusters(&self) -> Option<ClusterSet> {
        if self.cluster.is_empty() {
            return None;
        }
        let clusters = self
            .cluster
            .iter()
            .map(|c| Cluster {
                aod: Angles::new(c.aod[0], c.aod[1]),
                aoa: Angles::new(c.aoa[0], c.aoa[1]),
                excess_delay_ns: c.delay_ns,
                relative_power_db: c.power_db,
                is_los: c.los,
            })
            .collect();
        Some(ClusterSet { clusters })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub waypoints: Vec<Vec3>,
    /// Constant speed over every segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    /// One speed per segment; exclusive with `speed_mps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_speeds_mps: Option<Vec<f64>>,
    #[serde(default)]
    pub grip: GripMode,
    /// Handset azimuth relative to the direction of travel.
    #[serde(default)]
    pub heading_offset_deg: f64,
    #[serde(default = "ArrayGeometry::ue_subarray")]
    pub subarray: ArrayGeometry,
    #[serde(default = "default_ue_beams")]
    pub beams_per_subarray: usize,
    #[serde(default = "default_ue_bits")]
    pub bits: u8,
}

fn default_ue_beams() -> usize {
    4
}

fn default_ue_bits() -> u8 {
    4
}

impl UeSpec {
    pub fn trajectory(&self) -> Result<Trajectory> {
        if self.waypoints.len() == 1 {
            return Ok(Trajectory::stationary(self.waypoints[0]));
        }
        match (self.speed_mps, &self.segment_speeds_mps) {
            (Some(v), None) => Trajectory::new(self.waypoints.clone(), v),
            (None, Some(v)) => Trajectory::with_segment_speeds(self.waypoints.clone(), v.clone()),
            _ => Err(Error::validation(
                "ue.speed_mps",
                "exactly one of speed_mps and segment_speeds_mps is required for a moving UE",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Box {
        #[serde(default, skip_serializing_if = "String::is_empty")]
        name: String,
        min: Vec3,
        max: Vec3,
        material: String,
        /// Defaults to the smaller horizontal extent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thickness: Option<f64>,
    },
    Wall {
        #[serde(default, skip_serializing_if = "String::is_empty")]
        name: String,
        start: [f64; 2],
        end: [f64; 2],
        #[serde(default)]
        z_min: f64,
        z_max: f64,
        material: String,
        thickness: f64,
    },
}

impl ObstacleSpec {
    pub fn name(&self) -> &str {
        match self {
            ObstacleSpec::Box { name, .. } | ObstacleSpec::Wall { name, .. } => name,
        }
    }

    pub fn material(&self) -> &str {
        match self {
            ObstacleSpec::Box { material, .. } | ObstacleSpec::Wall { material, .. } => material,
        }
    }

    pub fn build(&self) -> Result<Obstacle> {
        match self {
            ObstacleSpec::Box {
                min,
                max,
                material,
                thickness,
                ..
            } => Obstacle::new(Shape::Box { min: *min, max: *max }, material.clone(), *thickness),
            ObstacleSpec::Wall {
                start,
                end,
                z_min,
                z_max,
                material,
                thickness,
                ..
            } => Obstacle::new(
                Shape::Wall {
                    start: *start,
                    end: *end,
                    z_min: *z_min,
                    z_max: *z_max,
                },
                material.clone(),
                Some(*thickness),
            ),
        }
    }
}

/// Moving cylinder (pedestrian, vehicle). Waypoints give the base center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockerSpec {
    pub radius_m: f64,
    pub height_m: f64,
    pub waypoints: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
}

impl BlockerSpec {
    pub fn trajectory(&self) -> Result<Trajectory> {
        match (self.waypoints.len(), self.speed_mps) {
            (1, _) => Ok(Trajectory::stationary(self.waypoints[0])),
            (_, Some(v)) => Trajectory::new(self.waypoints.clone(), v),
            _ => Err(Error::validation("blocker.speed_mps", "required for a moving blocker")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "yes")]
    pub shadowing: bool,
    /// Shadowing decorrelation distance; 10 m outdoors, 5 m indoors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr_distance_m: Option<f64>,
    #[serde(default = "default_blocker_loss")]
    pub blocker_loss_db: f64,
    /// Cluster generator settings; the use case's calibrated model by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_model: Option<ClusterModel>,
    /// Redraw random clusters each time the UE has moved this far. Never
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redraw_distance_m: Option<f64>,
}

fn yes() -> bool {
    true
}

fn default_blocker_loss() -> f64 {
    20.0
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            shadowing: true,
            corr_distance_m: None,
            blocker_loss_db: default_blocker_loss(),
            cluster_model: None,
            redraw_distance_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub name: String,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Zone {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.min[0]..=self.max[0]).contains(&x) && (self.min[1]..=self.max[1]).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSpec {
    /// Region of the grid; the world's horizontal extent when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<[f64; 2]>,
    #[serde(default = "default_ue_height")]
    pub height_m: f64,
    #[serde(default = "default_step")]
    pub step_m: f64,
    /// Named areas of interest, such as corridors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zone: Vec<Zone>,
}

fn default_ue_height() -> f64 {
    1.5
}

fn default_step() -> f64 {
    1.0
}

impl Default for CoverageSpec {
    fn default() -> Self {
        CoverageSpec {
            min: None,
            max: None,
            height_m: default_ue_height(),
            step_m: default_step(),
            zone: Vec::new(),
        }
    }
}

impl Scenario {
    /// Parses and validates scenario text. `source` only labels errors.
    pub fn parse(text: &str, source: &Path) -> Result<Scenario> {
        let parse_err = |e: toml::de::Error| Error::Parse {
            path: source.to_path_buf(),
            message: e.to_string(),
        };
        let raw: toml::Table = toml::from_str(text).map_err(parse_err)?;
        let mut s: Scenario = toml::from_str(text).map_err(parse_err)?;
        s.resolve();
        s.validate()?;
        let resolved = toml::Value::try_from(&s).map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut applied = Vec::new();
        missing_keys(&resolved, Some(&toml::Value::Table(raw)), "", &mut applied);
        for key in &applied {
            log::info!("{}: default applied for `{key}`", source.display());
        }
        s.defaults_applied = applied;
        Ok(s)
    }

    /// Fills defaults that depend on other keys.
    fn resolve(&mut self) {
        if self.duration_s.is_none() {
            // a bad trajectory is reported by validation
            self.duration_s = self.ue.trajectory().ok().map(|t| t.duration());
        }
        let indoor = self.use_case.is_indoor();
        self.channel
            .corr_distance_m
            .get_or_insert(if indoor { 5.0 } else { 10.0 });
        self.channel
            .cluster_model
            .get_or_insert(ClusterModel::for_use_case(self.use_case));
    }

    pub fn duration(&self) -> f64 {
        self.duration_s.unwrap_or(0.0)
    }

    pub fn cluster_model(&self) -> ClusterModel {
        self.channel
            .cluster_model
            .unwrap_or_else(|| ClusterModel::for_use_case(self.use_case))
    }

    pub fn materials(&self) -> BTreeMap<String, Material> {
        self.material.iter().map(|m| (m.id.clone(), m.clone())).collect()
    }

    pub fn obstacles(&self) -> Result<Vec<Obstacle>> {
        self.obstacle.iter().map(ObstacleSpec::build).collect()
    }

    /// Link budget with a gNB's own EIRP applied.
    pub fn budget_for(&self, gnb: usize) -> LinkBudget {
        let mut b = self.link;
        if let Some(e) = self.gnb[gnb].max_eirp_dbm {
            b.gnb_eirp_dbm = e;
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        fn v(field: impl Into<String>, rule: impl Into<String>) -> Error {
            Error::validation(field, rule)
        }
        if !(self.timestep_ms > 0.0 && self.timestep_ms.is_finite()) {
            return Err(v("timestep_ms", "must be > 0"));
        }
        if (self.timestep_ms * 1000.0 - (self.timestep_ms * 1000.0).round()).abs() > 1e-6 {
            return Err(v("timestep_ms", "must be a whole number of microseconds"));
        }
        if let Some(d) = self.duration_s {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(v("duration_s", "must be >= 0"));
            }
        }
        let w = &self.world;
        if !(w.min.x <= w.max.x && w.min.y <= w.max.y && w.min.z <= w.max.z) {
            return Err(v("world", "max must be >= min on every axis"));
        }

        if self.gnb.is_empty() {
            return Err(v("gnb", "at least one gNB is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, g) in self.gnb.iter().enumerate() {
            let f = |k: &str| format!("gnb[{i}].{k}");
            if !ids.insert(g.id.as_str()) {
                return Err(v(f("id"), format!("duplicate id `{}`", g.id)));
            }
            if !g.position.is_finite() || !w.contains(g.position) {
                return Err(v(f("position"), "must lie within world bounds"));
            }
            Orientation::new(g.azimuth_deg.rem_euclid(360.0), g.downtilt_deg)
                .map_err(|e| v(f("downtilt_deg"), e.to_string()))?;
            g.array.validate().map_err(|e| v(f("array"), e.to_string()))?;
            g.codebook
                .sector
                .validate()
                .map_err(|e| v(f("codebook.sector"), e.to_string()))?;
            if !(1..=3).contains(&g.codebook.levels) {
                return Err(v(f("codebook.levels"), "must be 1, 2 or 3"));
            }
            if g.codebook.bits == 0 {
                return Err(v(f("codebook.bits"), "must be >= 1"));
            }
            if g.max_eirp_dbm.is_some_and(|e| !e.is_finite()) {
                return Err(v(f("max_eirp_dbm"), "must be finite"));
            }
            for (j, c) in g.cluster.iter().enumerate() {
                let ok = c.aod.iter().chain(&c.aoa).all(|a| a.is_finite())
                    && c.delay_ns >= 0.0
                    && c.power_db.is_finite();
                if !ok {
                    return Err(v(f(&format!("cluster[{j}]")), "angles and power must be finite, delay >= 0"));
                }
            }
        }

        let ue = &self.ue;
        if ue.waypoints.is_empty() {
            return Err(v("ue.waypoints", "at least one waypoint is required"));
        }
        for (i, p) in ue.waypoints.iter().enumerate() {
            if !p.is_finite() || !w.contains(*p) {
                return Err(v(format!("ue.waypoints[{i}]"), "outside world bounds"));
            }
        }
        ue.trajectory().map_err(|e| match e {
            Error::Validation { .. } => e,
            other => v("ue.speed_mps", other.to_string()),
        })?;
        ue.subarray.validate().map_err(|e| v("ue.subarray", e.to_string()))?;
        if ue.beams_per_subarray == 0 {
            return Err(v("ue.beams_per_subarray", "must be >= 1"));
        }
        if ue.bits == 0 {
            return Err(v("ue.bits", "must be >= 1"));
        }

        let mut mats = BTreeSet::new();
        for m in &self.material {
            m.validate()?;
            if !mats.insert(m.id.as_str()) {
                return Err(v(format!("material `{}`", m.id), "duplicate id"));
            }
        }
        for (i, o) in self.obstacle.iter().enumerate() {
            if !mats.contains(o.material()) {
                return Err(v(
                    format!("obstacle[{i}].material"),
                    format!("undefined material `{}`", o.material()),
                ));
            }
            o.build().map_err(|e| v(format!("obstacle[{i}]"), e.to_string()))?;
        }
        for (i, b) in self.blocker.iter().enumerate() {
            if !(b.radius_m > 0.0 && b.height_m > 0.0) {
                return Err(v(format!("blocker[{i}]"), "radius_m and height_m must be > 0"));
            }
            if b.waypoints.is_empty() || b.waypoints.iter().any(|p| !w.contains(*p)) {
                return Err(v(format!("blocker[{i}].waypoints"), "need at least one, within world bounds"));
            }
            b.trajectory().map_err(|e| v(format!("blocker[{i}]"), e.to_string()))?;
        }

        let ch = &self.channel;
        if ch.corr_distance_m.is_some_and(|d| !(d > 0.0)) {
            return Err(v("channel.corr_distance_m", "must be > 0"));
        }
        if !(ch.blocker_loss_db >= 0.0) {
            return Err(v("channel.blocker_loss_db", "must be >= 0"));
        }
        if ch.redraw_distance_m.is_some_and(|d| !(d > 0.0)) {
            return Err(v("channel.redraw_distance_m", "must be > 0"));
        }
        if let Some(m) = &ch.cluster_model {
            let ok = m.delay_scale_ns > 0.0
                && m.tail_multiplier > 0.0
                && m.decay_db_per_scale >= 0.0
                && m.aod_az_half_deg >= 0.0
                && m.aod_el_half_deg >= 0.0
                && m.aoa_el_half_deg >= 0.0
                && m.min_separation_deg >= 0.0;
            if !ok {
                return Err(v("channel.cluster_model", "scales must be > 0 and widths >= 0"));
            }
        }

        self.link.validate()?;
        self.mcs.validate()?;
        self.duplex.validate()?;
        self.bm.validate()?;
        if !(self.mcs_hysteresis_db >= 0.0) {
            return Err(v("mcs_hysteresis_db", "must be >= 0"));
        }
        if let Some(c) = &self.coverage {
            if !(c.step_m > 0.0) {
                return Err(v("coverage.step_m", "must be > 0"));
            }
            let (lo, hi) = self.coverage_region();
            if !(lo[0] <= hi[0] && lo[1] <= hi[1]) {
                return Err(v("coverage", "max must be >= min"));
            }
        }
        Ok(())
    }

    /// Horizontal extent of the coverage grid.
    pub fn coverage_region(&self) -> ([f64; 2], [f64; 2]) {
        let c = self.coverage.clone().unwrap_or_default();
        (
            c.min.unwrap_or([self.world.min.x, self.world.min.y]),
            c.max.unwrap_or([self.world.max.x, self.world.max.y]),
        )
    }
}

/// Records keys present in `resolved` but absent from `raw`.
fn missing_keys(resolved: &toml::Value, raw: Option<&toml::Value>, prefix: &str, out: &mut Vec<String>) {
    match (resolved, raw) {
        (toml::Value::Table(t), Some(toml::Value::Table(r))) => {
            for (k, v) in t {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match r.get(k) {
                    None => out.push(path),
                    Some(rv) => missing_keys(v, Some(rv), &path, out),
                }
            }
        }
        (toml::Value::Array(a), Some(toml::Value::Array(r))) => {
            for (i, (v, rv)) in a.iter().zip(r).enumerate() {
                missing_keys(v, Some(rv), &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// Loads a scenario from a path, or from the built-in set with a
/// `bundled:<name>` argument.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        let text = bundled::get(name).ok_or_else(|| Error::Lookup {
            kind: "bundled scenario",
            id: name.to_string(),
        })?;
        return Scenario::parse(text, Path::new(spec));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::parse(&text, path)
}
