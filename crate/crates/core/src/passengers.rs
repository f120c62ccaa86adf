//! Passenger demand, boarding with a capacity limit, and station congestion.
//!
//! Stations are 1-indexed and the line runs in one direction, so every
//! journey goes from a lower to a higher station index. Times are seconds
//! since the simulation epoch.

use std::collections::VecDeque;
use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PassengerError {
    #[error("cannot read passenger file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("passenger data line {line}: {message}")]
    Malformed { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassengerRecord {
    pub id: u64,
    pub origin_station: u32,
    pub destination_station: u32,
    pub tap_in_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassengerOutcome {
    pub id: u64,
    pub origin_station: u32,
    pub destination_station: u32,
    pub tap_in_time: f64,
    pub board_time: f64,
    pub arrival_time: f64,
    pub wait_time: f64,
    pub journey_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationQueueSnapshot {
    pub station: u32,
    pub time: f64,
    pub waiting_count: u64,
}

/// A change to a station's waiting queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueueEvent {
    TapIn { station: u32, time: f64 },
    Board { station: u32, time: f64 },
}

impl QueueEvent {
    fn key(&self) -> (f64, u32, u8) {
        match *self {
            QueueEvent::TapIn { station, time } => (time, station, 0),
            QueueEvent::Board { station, time } => (time, station, 1),
        }
    }
}

/// A passenger on board a train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rider {
    pub record: PassengerRecord,
    pub board_time: f64,
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    name: &str,
    line: u64,
) -> Result<T, PassengerError> {
    let raw = field.ok_or_else(|| PassengerError::Malformed {
        line,
        message: format!("missing {name}"),
    })?;
    raw.trim().parse().map_err(|_| PassengerError::Malformed {
        line,
        message: format!("invalid {name} {raw:?}"),
    })
}

/// Parses passenger CSV (`passenger_id,origin_station,destination_station,tap_in_time_s`,
/// header optional) and returns the valid records sorted by tap-in time.
///
/// Rows whose destination is not downstream of the origin are skipped with a warning.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Vec<PassengerRecord>, PassengerError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = Vec::new();
    for (index, row) in csv.records().enumerate() {
        let row = row.map_err(|e| PassengerError::Malformed {
            line: e.position().map_or(index as u64 + 1, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(index as u64 + 1, |p| p.line());
        if index == 0 && row.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != 4 {
            return Err(PassengerError::Malformed {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let record = PassengerRecord {
            id: parse_field(row.get(0), "passenger_id", line)?,
            origin_station: parse_field(row.get(1), "origin_station", line)?,
            destination_station: parse_field(row.get(2), "destination_station", line)?,
            tap_in_time: parse_field(row.get(3), "tap_in_time_s", line)?,
        };
        if !(record.tap_in_time >= 0.0 && record.tap_in_time.is_finite()) {
            return Err(PassengerError::Malformed {
                line,
                message: format!("tap_in_time_s must be >= 0 (got {})", record.tap_in_time),
            });
        }
        if record.origin_station == 0 || record.destination_station <= record.origin_station {
            log::warn!(
                "line {line}: passenger {} rejected (origin {} -> destination {})",
                record.id,
                record.origin_station,
                record.destination_station
            );
            continue;
        }
        records.push(record);
    }
    sort_records(&mut records);
    Ok(records)
}

/// Loads a passenger CSV file; see [`parse_dataset`].
pub fn load_dataset(path: &Path) -> Result<Vec<PassengerRecord>, PassengerError> {
    let file = std::fs::File::open(path).map_err(|source| PassengerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(std::io::BufReader::new(file))
}

fn sort_records(records: &mut [PassengerRecord]) {
    records.sort_by(|a, b| {
        a.tap_in_time
            .total_cmp(&b.tap_in_time)
            .then(a.origin_station.cmp(&b.origin_station))
            .then(a.id.cmp(&b.id))
    });
}

/// Poisson tap-ins at every origin station with uniformly chosen downstream
/// destinations. Ids are assigned in tap-in order starting at 1.
pub fn gen_synthetic(
    seed: u64,
    num_stations: u32,
    duration: f64,
    rate_per_station: f64,
) -> Vec<PassengerRecord> {
    let mut records = Vec::new();
    if !(rate_per_station > 0.0) || num_stations < 2 {
        return records;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(rate_per_station).expect("positive rate");
    for origin in 1..num_stations {
        let destinations =
            Uniform::new_inclusive(origin + 1, num_stations).expect("nonempty range");
        let mut t = gaps.sample(&mut rng);
        while t < duration {
            records.push(PassengerRecord {
                id: 0,
                origin_station: origin,
                destination_station: destinations.sample(&mut rng),
                tap_in_time: t,
            });
            t += gaps.sample(&mut rng);
        }
    }
    sort_records(&mut records);
    for (i, r) in records.iter_mut().enumerate() {
        r.id = i as u64 + 1;
    }
    records
}

/// Waiting passengers per station, each queue in tap-in order.
#[derive(Debug, Clone, Default)]
pub struct StationQueues {
    queues: Vec<VecDeque<PassengerRecord>>,
}

impl StationQueues {
    /// Builds the queues from all demand; a passenger only becomes eligible
    /// to board once the clock reaches their tap-in time.
    pub fn new(num_stations: u32, records: &[PassengerRecord]) -> Self {
        let mut sorted = records.to_vec();
        sort_records(&mut sorted);
        let mut queues = vec![VecDeque::new(); num_stations as usize + 1];
        for r in sorted {
            if let Some(q) = queues.get_mut(r.origin_station as usize) {
                q.push_back(r);
            }
        }
        Self { queues }
    }

    /// Passengers at `station` who have tapped in by `now`.
    pub fn waiting(&self, station: u32, now: f64) -> usize {
        self.queues
            .get(station as usize)
            .map_or(0, |q| q.iter().take_while(|r| r.tap_in_time <= now).count())
    }

    /// Passengers at `station` not yet boarded, including future tap-ins.
    pub fn pending(&self, station: u32) -> usize {
        self.queues.get(station as usize).map_or(0, VecDeque::len)
    }
}

/// Alights riders destined for `station`, then boards waiting passengers in
/// tap-in order until the train is full. Returns the alighters' outcomes and
/// the number boarded.
pub fn board_and_alight(
    queues: &mut StationQueues,
    station: u32,
    onboard: &mut Vec<Rider>,
    capacity: usize,
    now: f64,
) -> (Vec<PassengerOutcome>, usize) {
    let mut outcomes = Vec::new();
    onboard.retain(|rider| {
        if rider.record.destination_station != station {
            return true;
        }
        let r = rider.record;
        outcomes.push(PassengerOutcome {
            id: r.id,
            origin_station: r.origin_station,
            destination_station: r.destination_station,
            tap_in_time: r.tap_in_time,
            board_time: rider.board_time,
            arrival_time: now,
            wait_time: rider.board_time - r.tap_in_time,
            journey_time: now - r.tap_in_time,
        });
        false
    });
    let mut boarded = 0;
    if let Some(queue) = queues.queues.get_mut(station as usize) {
        while onboard.len() < capacity {
            match queue.front() {
                Some(r) if r.tap_in_time <= now => {
                    onboard.push(Rider {
                        record: *r,
                        board_time: now,
                    });
                    queue.pop_front();
                    boarded += 1;
                }
                _ => break,
            }
        }
    }
    (outcomes, boarded)
}

/// Piecewise-constant waiting count per station, starting from an all-zero
/// snapshot at time 0 and sampled after every group of simultaneous events.
pub fn congestion_series(events: &[QueueEvent], num_stations: u32) -> Vec<StationQueueSnapshot> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| {
        let (ta, sa, ka) = a.key();
        let (tb, sb, kb) = b.key();
        ta.total_cmp(&tb).then(sa.cmp(&sb)).then(ka.cmp(&kb))
    });
    let mut counts = vec![0u64; num_stations as usize + 1];
    let mut series: Vec<StationQueueSnapshot> = (1..=num_stations)
        .map(|station| StationQueueSnapshot {
            station,
            time: 0.0,
            waiting_count: 0,
        })
        .collect();
    for (i, event) in sorted.iter().enumerate() {
        let (time, station, _) = event.key();
        let Some(count) = counts.get_mut(station as usize) else {
            continue;
        };
        match event {
            QueueEvent::TapIn { .. } => *count += 1,
            QueueEvent::Board { .. } => *count = count.saturating_sub(1),
        }
        let group_ends = sorted
            .get(i + 1)
            .is_none_or(|next| next.key().0 != time || next.key().1 != station);
        if group_ends {
            series.push(StationQueueSnapshot {
                station,
                time,
                waiting_count: *count,
            });
        }
    }
    // Stable sort, then keep only the latest snapshot per (station, time).
    series.sort_by(|a, b| a.station.cmp(&b.station).then(a.time.total_cmp(&b.time)));
    let mut deduped: Vec<StationQueueSnapshot> = Vec::with_capacity(series.len());
    for snapshot in series {
        match deduped.last_mut() {
            Some(last) if last.station == snapshot.station && last.time == snapshot.time => {
                *last = snapshot
            }
            _ => deduped.push(snapshot),
        }
    }
    deduped
}

/// Waiting count at `station` at time `t` according to a congestion series.
pub fn waiting_at(series: &[StationQueueSnapshot], station: u32, t: f64) -> u64 {
    series
        .iter()
        .rev()
        .find(|s| s.station == station && s.time <= t)
        .map_or(0, |s| s.waiting_count)
}
