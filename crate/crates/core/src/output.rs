//! CSV and JSON writers for simulation results. Column names and order are
//! part of the public interface; floats use Rust's shortest round-trip
//! formatting so identical runs produce identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::passengers::{PassengerOutcome, PassengerRecord, StationQueueSnapshot};
use crate::sim::{Comparison, RunSummary, SafetyReport, SimResult, SweepPoint, TrainSample};

pub const TRAINS_HEADER: [&str; 12] = [
    "train_id",
    "dispatch_s",
    "dispatch_clock",
    "departure_s",
    "arrival_s",
    "arrival_clock",
    "journey_s",
    "completed",
    "fbs_slots",
    "emergency_slots",
    "lost_packets",
    "max_onboard",
];
pub const PASSENGERS_HEADER: [&str; 8] = [
    "passenger_id",
    "origin",
    "destination",
    "tap_in_s",
    "board_s",
    "arrival_s",
    "wait_s",
    "journey_s",
];
pub const DEMAND_HEADER: [&str; 4] = [
    "passenger_id",
    "origin_station",
    "destination_station",
    "tap_in_time_s",
];
pub const CONGESTION_HEADER: [&str; 3] = ["station", "time_s", "waiting_count"];
pub const SINR_TRACE_HEADER: [&str; 4] = ["time_s", "position_m", "sinr_db", "pkt_rec"];
pub const SWEEP_HEADER: [&str; 3] = ["n", "train_pct_increase", "passenger_pct_increase"];

/// Wall-clock `HH:MM:SS` (with fractional seconds when needed) of `t`
/// seconds after an epoch `epoch_offset_s` seconds past midnight.
pub fn clock(t: f64, epoch_offset_s: f64) -> String {
    let total = t + epoch_offset_s;
    let whole = total.floor();
    let secs = whole as i64;
    let (h, m, s) = (secs / 3600, (secs / 60) % 60, secs % 60);
    let frac = total - whole;
    if frac == 0.0 {
        format!("{h:02}:{m:02}:{s:02}")
    } else {
        let frac = format!("{frac}");
        format!("{h:02}:{m:02}:{s:02}{}", frac.trim_start_matches('0'))
    }
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Tap-in records in the dataset schema read back by `load_dataset`.
pub fn write_demand_csv<W: Write>(w: W, records: &[PassengerRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DEMAND_HEADER)?;
    for r in records {
        out.write_record([
            r.id.to_string(),
            r.origin_station.to_string(),
            r.destination_station.to_string(),
            num(r.tap_in_time),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per dispatched train; `train_id` counts dispatches from 1.
pub fn write_trains_csv<W: Write>(
    w: W,
    result: &SimResult,
    epoch_offset_s: f64,
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAINS_HEADER)?;
    for t in &result.trains {
        out.write_record([
            (t.id + 1).to_string(),
            num(t.dispatch_time),
            clock(t.dispatch_time, epoch_offset_s),
            num(t.departure_time),
            opt(t.arrival_time),
            t.arrival_time
                .map(|a| clock(a, epoch_offset_s))
                .unwrap_or_default(),
            opt(t.journey_time()),
            u8::from(t.completed()).to_string(),
            t.fbs_slots.to_string(),
            t.emergency_slots.to_string(),
            t.lost_packets.to_string(),
            t.max_onboard.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_passengers_csv<W: Write>(w: W, outcomes: &[PassengerOutcome]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PASSENGERS_HEADER)?;
    for o in outcomes {
        out.write_record([
            o.id.to_string(),
            o.origin_station.to_string(),
            o.destination_station.to_string(),
            num(o.tap_in_time),
            num(o.board_time),
            num(o.arrival_time),
            num(o.wait_time),
            num(o.journey_time),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_congestion_csv<W: Write>(w: W, series: &[StationQueueSnapshot]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CONGESTION_HEADER)?;
    for s in series {
        out.write_record([
            s.station.to_string(),
            num(s.time),
            s.waiting_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-slot SINR of one train; unevaluated slots (no leader) read `inf`.
pub fn write_sinr_trace<W: Write>(w: W, samples: &[TrainSample]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SINR_TRACE_HEADER)?;
    for s in samples {
        out.write_record([
            num(s.time),
            num(s.position),
            num(s.sinr_db),
            u8::from(s.pkt_rec).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, points: &[SweepPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for p in points {
        out.write_record([
            p.n.to_string(),
            num(p.train_pct_increase),
            num(p.passenger_pct_increase),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioDigest {
    pub medium: String,
    pub jammer_active: bool,
    pub jammer_position_km: f64,
    pub d_j_wg_km: f64,
    pub fhss_enabled: bool,
    pub n_channels: u32,
    pub block_threshold_bth: u32,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonDigest {
    pub mean_train_pct_increase: f64,
    pub max_train_pct_increase: f64,
    pub passenger_pct_increase: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryDoc {
    pub scenario: ScenarioDigest,
    pub run: RunSummary,
    pub mean_journey_min: f64,
    pub safety: SafetyReport,
    /// The same scenario with the jammer off; present for attacked runs.
    pub baseline: Option<RunSummary>,
    pub comparison: Option<ComparisonDigest>,
}

impl SummaryDoc {
    pub fn new(
        cfg: &ScenarioConfig,
        result: &SimResult,
        baseline: Option<&SimResult>,
        comparison: Option<&Comparison>,
    ) -> Self {
        Self {
            scenario: ScenarioDigest {
                medium: format!("{:?}", cfg.channel.medium).to_lowercase(),
                jammer_active: cfg.jammer.active,
                jammer_position_km: cfg.jammer.position,
                d_j_wg_km: cfg.jammer.d_j_wg,
                fhss_enabled: cfg.fhss.enabled,
                n_channels: cfg.fhss.n_channels,
                block_threshold_bth: cfg.signaling.block_threshold_bth,
                master_seed: cfg.sim.master_seed,
            },
            run: result.summary,
            mean_journey_min: result.summary.mean_journey_s / 60.0,
            safety: result.safety,
            baseline: baseline.map(|b| b.summary),
            comparison: comparison.map(|c| ComparisonDigest {
                mean_train_pct_increase: c.mean_train_pct_increase,
                max_train_pct_increase: c.max_train_pct_increase,
                passenger_pct_increase: c.passenger_pct_increase,
            }),
        }
    }
}

/// Pretty-printed JSON; non-finite numbers are written as `null`.
pub fn write_summary_json<W: Write>(mut w: W, doc: &SummaryDoc) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_formats() {
        assert_eq!(clock(0.0, 28_800.0), "08:00:00");
        assert_eq!(clock(360.0, 28_800.0), "08:06:00");
        assert_eq!(clock(6750.0, 28_800.0), "09:52:30");
        assert_eq!(clock(0.25, 28_800.0), "08:00:00.25");
    }

    #[test]
    fn sinr_trace_writes_inf() {
        let sample = TrainSample {
            time: 0.5,
            position: 12.0,
            velocity: 1.0,
            acceleration: 0.7,
            mode: crate::signaling::Mode::Mbs,
            sinr_db: f64::INFINITY,
            pkt_rec: true,
            hop_channel: None,
        };
        let mut buf = Vec::new();
        write_sinr_trace(&mut buf, &[sample]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_s,position_m,sinr_db,pkt_rec\n0.5,12,inf,1\n"
        );
    }

    #[test]
    fn demand_round_trips_through_the_loader() {
        let records = crate::passengers::gen_synthetic(3, 5, 600.0, 0.02);
        assert!(!records.is_empty());
        let mut buf = Vec::new();
        write_demand_csv(&mut buf, &records).unwrap();
        let back = crate::passengers::parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn passenger_header_matches_schema() {
        let mut buf = Vec::new();
        write_passengers_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "passenger_id,origin,destination,tap_in_s,board_s,arrival_s,wait_s,journey_s\n"
        );
    }
}
