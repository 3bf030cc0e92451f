//! Fixed-timestep simulation loop.
//!
//! Each step moves the UE and blockers, evaluates the channel of every gNB,
//! measures either every candidate (on sweep boundaries) or just the serving
//! one, ticks beam management, picks the MCS and logs a row.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::beammgmt::{sweep_schedule, BeamManager, Candidate, Event, EventKind, MeasurementReport};
use crate::channel::composite::ClusterGain;
use crate::error::Result;
use crate::geometry::{Cylinder, Orientation, Trajectory, Vec3};
use crate::link::{select_mcs, throughput_mbps, Direction, McsTracker};

use super::model::Model;
use super::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub position: Vec3,
    pub serving: Option<Candidate>,
    /// Instantaneous downlink SNR of the serving pair, dB; `-inf` unserved.
    pub snr_db: f64,
    pub filtered_snr_db: f64,
    /// Downlink MCS index; `None` in outage.
    pub mcs: Option<usize>,
    pub dl_mbps: f64,
    pub ul_mbps: f64,
    pub events: Vec<EventKind>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub events: Vec<Event>,
}

impl RunOutput {
    /// Total delivered downlink data, megabits.
    pub fn delivered_dl_mbit(&self, timestep_s: f64) -> f64 {
        self.trace.iter().map(|r| r.dl_mbps * timestep_s).sum()
    }
}

/// Fraction of airtime left after beam sweeps, or 1 when sweeps are free.
pub fn sweep_efficiency(s: &Scenario, model_beams: usize, ue_beams: usize) -> Result<f64> {
    if !s.bm.sweep_overhead {
        return Ok(1.0);
    }
    let plan = sweep_schedule(&s.bm, s.gnb.len(), model_beams, ue_beams)?;
    Ok((1.0 - plan.acquisition_latency_ms() / s.bm.sweep_period_ms).max(0.0))
}

/// Runs a validated scenario to completion.
pub fn run(s: &Scenario) -> Result<RunOutput> {
    let mut model = Model::new(s)?;
    let traj = s.ue.trajectory()?;
    let blockers: Vec<(Trajectory, f64, f64)> = s
        .blocker
        .iter()
        .map(|b| Ok((b.trajectory()?, b.radius_m, b.height_m)))
        .collect::<Result<_>>()?;
    let n_gnb = model.sites.len();
    let ue_beams: usize = (0..model.ue_codebooks.len())
        .filter(|&i| model.ue.enabled(i))
        .map(|i| model.ue_codebooks[i].finest().len())
        .sum();
    let max_beams = model.sites.iter().map(|g| g.codebook.finest().len()).max().unwrap_or(0);
    let airtime = sweep_efficiency(s, max_beams, ue_beams)?;

    let dt_us = (s.timestep_ms * 1000.0).round() as u64;
    let steps = (s.duration() * 1e6 / dt_us as f64 + 1e-9).floor() as u64;
    let sweep_us = ((s.bm.sweep_period_ms * 1000.0).round() as u64).max(1);
    let mut bm = BeamManager::new(s.bm, s.mcs.lowest_threshold_db());
    let mut dl_mcs = McsTracker::new(s.mcs_hysteresis_db);
    let bw = s.link.bandwidth_hz;

    let mut out = RunOutput::default();
    let mut next_sweep_us = 0u64;
    let mut anchor = traj.position_clamped(0.0);
    let mut draw = 0u64;
    for k in 0..=steps {
        let t_us = k * dt_us;
        let t = t_us as f64 * 1e-6;
        let t_ms = t_us as f64 / 1000.0;
        let p = traj.position_clamped(t);
        if let Some(r) = s.channel.redraw_distance_m {
            if p.distance(anchor) >= r {
                draw += 1;
                anchor = p;
                model.draw(draw);
            }
        }
        let heading = traj.heading_at(t).unwrap_or(0.0);
        let body = Orientation::wrapped(heading + s.ue.heading_offset_deg, 90.0);
        let cylinders: Vec<Cylinder> = blockers
            .iter()
            .map(|(tr, radius, height)| Cylinder {
                center: tr.position_clamped(t),
                radius: *radius,
                height: *height,
            })
            .collect();

        let full_sweep = t_us >= next_sweep_us;
        while next_sweep_us <= t_us {
            next_sweep_us += sweep_us;
        }
        let mut gains: Vec<Option<Vec<ClusterGain>>> = vec![None; n_gnb];
        let gains_of = |g: usize, gains: &mut Vec<Option<Vec<ClusterGain>>>| -> Result<Vec<ClusterGain>> {
            if gains[g].is_none() {
                gains[g] = Some(model.gains(g, p, &cylinders, true)?);
            }
            Ok(gains[g].clone().expect("just filled"))
        };

        let mut report = MeasurementReport {
            t_ms,
            full_sweep,
            snr_db: BTreeMap::new(),
        };
        if full_sweep {
            for g in 0..n_gnb {
                let cg = gains_of(g, &mut gains)?;
                let table = model.table(g, &cg, &body)?;
                for (tx_beam, subarray, rx_beam, gain) in table.entries() {
                    let c = Candidate {
                        gnb: g,
                        tx_beam,
                        subarray,
                        rx_beam,
                    };
                    report.snr_db.insert(c, model.snr(g, Direction::Dl, gain)?);
                }
            }
        } else if let Some(c) = bm.state().serving {
            let cg = gains_of(c.gnb, &mut gains)?;
            report.snr_db.insert(c, model.candidate_snr(&c, &cg, &body)?);
        }

        let events = bm.tick(&report)?;
        let serving = bm.state().serving;
        let snr = match serving {
            Some(c) => match report.snr_db.get(&c) {
                Some(v) => *v,
                None => {
                    let cg = gains_of(c.gnb, &mut gains)?;
                    model.candidate_snr(&c, &cg, &body)?
                }
            },
            None => f64::NEG_INFINITY,
        };
        let usable = serving.is_some() && !bm.interrupted(t_ms);
        let (mcs, ul) = if usable {
            let g = serving.expect("usable implies serving").gnb;
            let ul_snr = snr - model.sites[g].budget.eirp_dbm(Direction::Dl) + s.link.eirp_dbm(Direction::Ul);
            (dl_mcs.update(&s.mcs, snr), select_mcs(&s.mcs, ul_snr, 0.0))
        } else {
            dl_mcs.current = None;
            (None, None)
        };
        let entry = |m: Option<usize>| m.map(|i| &s.mcs.entries[i]);
        out.trace.push(TraceRow {
            t_s: t,
            position: p,
            serving,
            snr_db: snr,
            filtered_snr_db: serving
                .and_then(|c| bm.filtered(&c))
                .unwrap_or(f64::NEG_INFINITY),
            mcs,
            dl_mbps: throughput_mbps(entry(mcs), bw, &s.duplex, Direction::Dl) * airtime,
            ul_mbps: throughput_mbps(entry(ul), bw, &s.duplex, Direction::Ul) * airtime,
            events: events.iter().map(|e| e.kind).collect(),
        });
        out.events.extend(events);
    }
    Ok(out)
}
