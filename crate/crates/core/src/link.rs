//! Link budget, MCS selection and TDD throughput.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal noise density, dBm/Hz.
pub const KT_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Dl,
    Ul,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudget {
    pub gnb_eirp_dbm: f64,
    pub ue_eirp_dbm: f64,
    /// Transmit power control range, dB.
    pub dynamic_range_db: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_ghz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            gnb_eirp_dbm: 55.0,
            ue_eirp_dbm: 30.0,
            dynamic_range_db: 19.0,
            bandwidth_hz: 240e6,
            noise_figure_db: 7.0,
            carrier_ghz: 28.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("link.gnb_eirp_dbm", self.gnb_eirp_dbm.is_finite(), "must be finite"),
            ("link.ue_eirp_dbm", self.ue_eirp_dbm.is_finite(), "must be finite"),
            ("link.dynamic_range_db", self.dynamic_range_db >= 0.0, "must be >= 0"),
            ("link.bandwidth_hz", self.bandwidth_hz > 0.0, "must be > 0"),
            ("link.noise_figure_db", self.noise_figure_db >= 0.0, "must be >= 0"),
            ("link.carrier_ghz", self.carrier_ghz > 0.0, "must be > 0"),
        ];
        for (field, ok, rule) in checks {
            if !ok {
                return Err(Error::validation(field, rule));
            }
        }
        Ok(())
    }

    /// Receiver noise power over the full bandwidth, dBm.
    pub fn noise_dbm(&self) -> f64 {
        KT_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn eirp_dbm(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Dl => self.gnb_eirp_dbm,
            Direction::Ul => self.ue_eirp_dbm,
        }
    }
}

/// SNR in dB for a composite path gain (channel plus beamforming, dB).
pub fn snr_db(b: &LinkBudget, dir: Direction, path_gain_db: f64, backoff_db: f64) -> Result<f64> {
    if !(0.0..=b.dynamic_range_db).contains(&backoff_db) {
        return Err(Error::OutOfRange {
            what: "power backoff (dB)",
            value: backoff_db,
            min: 0.0,
            max: b.dynamic_range_db,
        });
    }
    Ok(b.eirp_dbm(dir) - backoff_db + path_gain_db - b.noise_dbm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub modulation: Modulation,
    pub code_rate: f64,
    /// Lowest SNR at which the entry may be used, dB.
    pub min_snr_db: f64,
    /// Delivered bits per second per hertz, after overhead.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
}

/// Ratio of delivered to raw bits in the default table.
pub const DEFAULT_OVERHEAD: f64 = 0.5;

impl Default for McsTable {
    /// QPSK through 64-QAM r=5/6. Efficiencies are
    /// `bits * rate * DEFAULT_OVERHEAD`, so the top entry gives 600 Mbps over
    /// 240 MHz.
    fn default() -> Self {
        use Modulation::*;
        let rows = [
            (Qpsk, 5.0 / 6.0, 5.0),
            (Qam16, 1.0 / 2.0, 6.5),
            (Qam16, 2.0 / 3.0, 9.5),
            (Qam16, 5.0 / 6.0, 12.0),
            (Qam64, 2.0 / 3.0, 14.5),
            (Qam64, 3.0 / 4.0, 16.0),
            (Qam64, 5.0 / 6.0, 18.0),
        ];
        McsTable {
            entries: rows
                .iter()
                .map(|&(modulation, code_rate, min_snr_db)| McsEntry {
                    modulation,
                    code_rate,
                    min_snr_db,
                    efficiency: modulation.bits() as f64 * code_rate * DEFAULT_OVERHEAD,
                })
                .collect(),
        }
    }
}

impl Modulation {
    pub fn bits(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

impl McsTable {
    pub fn validate(&self) -> Result<()> {
        let top = self.entries.last().ok_or_else(|| Error::validation("mcs", "table is empty"))?;
        for (i, e) in self.entries.iter().enumerate() {
            let field = format!("mcs[{i}]");
            if !e.min_snr_db.is_finite() || !(e.efficiency > 0.0) || !(e.code_rate > 0.0 && e.code_rate <= 1.0) {
                return Err(Error::validation(
                    field,
                    "threshold must be finite, efficiency > 0, code rate in (0, 1]",
                ));
            }
            if i > 0 {
                let p = &self.entries[i - 1];
                if e.min_snr_db <= p.min_snr_db || e.efficiency <= p.efficiency {
                    return Err(Error::validation(field, "thresholds and efficiencies must strictly increase"));
                }
            }
        }
        if top.modulation != Modulation::Qam64 {
            return Err(Error::validation("mcs", "top entry must be 64QAM"));
        }
        Ok(())
    }

    pub fn lowest_threshold_db(&self) -> f64 {
        self.entries.first().map_or(f64::INFINITY, |e| e.min_snr_db)
    }

    /// Throughput of the top entry with the whole airtime, Mbps.
    pub fn peak_mbps(&self, bandwidth_hz: f64) -> f64 {
        self.entries.last().map_or(0.0, |e| e.efficiency * bandwidth_hz / 1e6)
    }
}

/// Highest entry whose threshold is at most `snr - hysteresis`; `None` is
/// outage.
pub fn select_mcs(t: &McsTable, snr_db: f64, hysteresis_db: f64) -> Option<usize> {
    let x = snr_db - hysteresis_db;
    t.entries.iter().rposition(|e| e.min_snr_db <= x)
}

/// Stateful MCS choice: moves up only once the SNR clears the new entry's
/// threshold by the hysteresis, moves down as soon as the SNR drops below the
/// current entry's threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McsTracker {
    pub current: Option<usize>,
    pub hysteresis_db: f64,
}

impl McsTracker {
    pub fn new(hysteresis_db: f64) -> Self {
        McsTracker {
            current: None,
            hysteresis_db,
        }
    }

    pub fn update(&mut self, t: &McsTable, snr_db: f64) -> Option<usize> {
        let up = select_mcs(t, snr_db, self.hysteresis_db);
        self.current = match self.current {
            Some(c) if snr_db >= t.entries[c].min_snr_db => up.max(Some(c)),
            Some(_) => select_mcs(t, snr_db, 0.0),
            None => up,
        };
        self.current
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuplexConfig {
    pub dl_fraction: f64,
    pub ul_fraction: f64,
}

impl Default for DuplexConfig {
    fn default() -> Self {
        DuplexConfig {
            dl_fraction: 0.75,
            ul_fraction: 0.25,
        }
    }
}

impl DuplexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dl_fraction > 0.0 && self.ul_fraction > 0.0) {
            return Err(Error::validation("duplex", "dl_fraction and ul_fraction must be > 0"));
        }
        if self.dl_fraction + self.ul_fraction > 1.0 + 1e-12 {
            return Err(Error::validation("duplex", "dl_fraction + ul_fraction must be <= 1"));
        }
        Ok(())
    }

    pub fn fraction(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Dl => self.dl_fraction,
            Direction::Ul => self.ul_fraction,
        }
    }
}

/// Delivered rate in Mbps; zero in outage.
pub fn throughput_mbps(entry: Option<&McsEntry>, bandwidth_hz: f64, d: &DuplexConfig, dir: Direction) -> f64 {
    entry.map_or(0.0, |e| e.efficiency * bandwidth_hz / 1e6 * d.fraction(dir))
}
