//! Scenario orchestration: dispatches trains every interval, evaluates each
//! follower's link once per slot, advances every train and serves passengers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{link_sinr, packet_received, FadingDraws, HopGenerator};
use crate::config::{ConfigError, DemandSource, ScenarioConfig};
use crate::passengers::{
    board_and_alight, congestion_series, gen_synthetic, load_dataset, PassengerError,
    PassengerOutcome, PassengerRecord, QueueEvent, Rider, StationQueueSnapshot, StationQueues,
};
use crate::signaling::{block_index, train_step, Mode, TrainState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Passengers(#[from] PassengerError),
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("{0}")]
    InvalidRequest(String),
}

/// Independent random streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Fading = 1,
    Demand = 2,
    Hops = 3,
}

pub fn sub_seed(master_seed: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// Which trains keep a per-slot trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum SampleSelection {
    #[default]
    None,
    All,
    /// Zero-based dispatch indices.
    Trains(Vec<usize>),
}

impl SampleSelection {
    fn includes(&self, id: usize) -> bool {
        match self {
            SampleSelection::None => false,
            SampleSelection::All => true,
            SampleSelection::Trains(ids) => ids.contains(&id),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub samples: SampleSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainSample {
    /// Slot start time (s since epoch).
    pub time: f64,
    /// Position at the start of the slot (m).
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub mode: Mode,
    /// SINR of the slot's packet from the leader; `+∞` when not evaluated.
    pub sinr_db: f64,
    pub pkt_rec: bool,
    /// Hopping channel of the slot when FHSS is enabled.
    pub hop_channel: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    /// Zero-based dispatch index.
    pub id: usize,
    /// Scheduled dispatch time; journeys are measured from here.
    pub dispatch_time: f64,
    /// Actual departure from station 1, later than scheduled when held.
    pub departure_time: f64,
    pub arrival_time: Option<f64>,
    pub fbs_slots: u64,
    pub emergency_slots: u64,
    pub lost_packets: u64,
    /// Largest number of riders on board at once.
    pub max_onboard: usize,
    pub samples: Vec<TrainSample>,
}

impl TrainLog {
    pub fn journey_time(&self) -> Option<f64> {
        self.arrival_time.map(|a| a - self.dispatch_time)
    }

    pub fn completed(&self) -> bool {
        self.arrival_time.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafetyReport {
    /// Slots in which a follower was at or ahead of its leader.
    pub crossovers: u64,
    /// Smallest leader-follower separation observed (m).
    pub min_gap_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub trains_dispatched: usize,
    pub trains_completed: usize,
    pub mean_journey_s: f64,
    pub median_journey_s: f64,
    pub p95_journey_s: f64,
    pub min_journey_s: f64,
    pub max_journey_s: f64,
    pub passengers_total: usize,
    pub passengers_delivered: usize,
    pub mean_passenger_journey_s: f64,
    pub mean_passenger_wait_s: f64,
    /// Largest station queue once that station has been served by a train;
    /// the build-up ahead of the first call is the same with or without an
    /// attack and is left out.
    pub peak_waiting: u64,
    pub lost_packet_fraction: f64,
    pub end_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub trains: Vec<TrainLog>,
    pub passengers: Vec<PassengerOutcome>,
    pub congestion: Vec<StationQueueSnapshot>,
    pub safety: SafetyReport,
    pub summary: RunSummary,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`).
fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Loads or synthesizes the scenario's demand.
pub fn scenario_demand(cfg: &ScenarioConfig) -> Result<Vec<PassengerRecord>, SimError> {
    let n = cfg.signaling.num_stations;
    let records = match cfg.demand.source {
        DemandSource::Synthetic => gen_synthetic(
            sub_seed(cfg.sim.master_seed, SeedStream::Demand),
            n,
            cfg.demand.duration.unwrap_or(cfg.sim.sim_duration),
            cfg.demand.rate_per_station,
        ),
        DemandSource::File => {
            let path = cfg.demand.path.as_deref().ok_or_else(|| {
                SimError::InvalidRequest("demand.path is required for file demand".into())
            })?;
            load_dataset(path)?
        }
    };
    let (kept, dropped): (Vec<_>, Vec<_>) = records
        .into_iter()
        .partition(|r| r.destination_station <= n);
    if !dropped.is_empty() {
        log::warn!(
            "{} passengers travel beyond station {n} and were dropped",
            dropped.len()
        );
    }
    Ok(kept)
}

struct Fading {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl Fading {
    fn new(cfg: &ScenarioConfig) -> Self {
        let normal = if cfg.channel.fading_enabled && cfg.channel.fading_sigma > 0.0 {
            Normal::new(0.0, cfg.channel.fading_sigma).ok()
        } else {
            None
        };
        Self {
            rng: ChaCha8Rng::seed_from_u64(sub_seed(cfg.sim.master_seed, SeedStream::Fading)),
            normal,
        }
    }

    fn draw(&mut self) -> FadingDraws<f64> {
        match self.normal {
            Some(n) => FadingDraws {
                legit: n.sample(&mut self.rng),
                jammer: n.sample(&mut self.rng),
            },
            None => FadingDraws::default(),
        }
    }
}

/// Runs one scenario without per-slot traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimResult, SimError> {
    run_scenario_with(cfg, &RunOptions::default())
}

pub fn run_scenario_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<SimResult, SimError> {
    let demand = scenario_demand(cfg)?;
    Ok(simulate(cfg, &demand, opts))
}

/// Runs the slot loop on an explicit demand set.
pub fn simulate(cfg: &ScenarioConfig, demand: &[PassengerRecord], opts: &RunOptions) -> SimResult {
    let sig = &cfg.signaling;
    let kin = &cfg.kinematics;
    let dt = sig.dt;
    let capacity = cfg.sim.train_capacity as usize;
    let n_trains = cfg.dispatch_count();
    let dispatch_slot = |i: usize| {
        (i as f64 * cfg.sim.dispatch_interval / dt - 1e-9)
            .ceil()
            .max(0.0) as u64
    };
    let last_slot = ((cfg.sim.sim_duration + cfg.sim.max_runout) / dt).ceil() as u64;

    let mut fhss = cfg.fhss;
    fhss.seed = sub_seed(cfg.sim.master_seed, SeedStream::Hops);
    let mut hops = fhss.enabled.then(|| HopGenerator::new(&fhss));
    let mut fading = Fading::new(cfg);

    let mut queues = StationQueues::new(sig.num_stations, demand);
    let mut events: Vec<QueueEvent> = demand
        .iter()
        .map(|r| QueueEvent::TapIn {
            station: r.origin_station,
            time: r.tap_in_time,
        })
        .collect();
    let mut outcomes = Vec::new();

    let mut states: Vec<TrainState<f64>> = Vec::with_capacity(n_trains);
    let mut onboard: Vec<Vec<Rider>> = Vec::with_capacity(n_trains);
    let mut logs: Vec<TrainLog> = Vec::with_capacity(n_trains);
    // Dispatch indices of trains still on the line, front of the line first.
    let mut active: Vec<usize> = Vec::new();
    let mut safety = SafetyReport {
        crossovers: 0,
        min_gap_m: f64::INFINITY,
    };
    let mut evaluated_packets = 0u64;
    let mut lost_packets = 0u64;

    // Time of the first train call at each station (1-indexed).
    let mut first_call = vec![f64::INFINITY; sig.num_stations as usize + 1];

    let serve = |station: u32,
                 riders: &mut Vec<Rider>,
                 queues: &mut StationQueues,
                 events: &mut Vec<QueueEvent>,
                 outcomes: &mut Vec<PassengerOutcome>,
                 first_call: &mut [f64],
                 now: f64| {
        let call = &mut first_call[station as usize];
        *call = call.min(now);
        let (alighted, boarded) = board_and_alight(queues, station, riders, capacity, now);
        outcomes.extend(alighted);
        events.extend((0..boarded).map(|_| QueueEvent::Board { station, time: now }));
    };

    let mut slot = 0u64;
    let end_time = loop {
        let now = slot as f64 * dt;
        while states.len() < n_trains && dispatch_slot(states.len()) <= slot {
            let id = states.len();
            let leader = active.last().map(|&l| states[l].as_leader());
            // A departure waits until the blocks ahead of station 1 are clear.
            let blocked = leader.is_some_and(|l| {
                block_index(l.position, sig.block_length) - 1 <= i64::from(sig.block_threshold_bth)
            });
            if blocked {
                break;
            }
            states.push(TrainState::dispatched(id, sig, kin, leader, now));
            logs.push(TrainLog {
                id,
                dispatch_time: dispatch_slot(id) as f64 * dt,
                departure_time: now,
                arrival_time: None,
                fbs_slots: 0,
                emergency_slots: 0,
                lost_packets: 0,
                max_onboard: 0,
                samples: Vec::new(),
            });
            let mut riders = Vec::new();
            serve(
                1,
                &mut riders,
                &mut queues,
                &mut events,
                &mut outcomes,
                &mut first_call,
                now,
            );
            logs[id].max_onboard = riders.len();
            onboard.push(riders);
            active.push(id);
        }
        if (active.is_empty() && states.len() == n_trains) || slot >= last_slot {
            break now;
        }

        let hop_channel = hops.as_mut().and_then(Iterator::next);
        let snapshot: Vec<_> = active.iter().map(|&i| states[i].as_leader()).collect();
        for (k, &i) in active.iter().enumerate() {
            let before = states[i];
            let leader = k.checked_sub(1).map(|j| snapshot[j]);
            let draws = fading.draw();
            let sinr_db = match leader {
                Some(l) => link_sinr(
                    &cfg.channel,
                    &cfg.jammer,
                    &fhss,
                    l.position / 1000.0,
                    before.position / 1000.0,
                    draws,
                    slot,
                )
                .unwrap_or(f64::NEG_INFINITY),
                None => f64::INFINITY,
            };
            let pkt_rec = packet_received(sinr_db, cfg.channel.sinr_threshold_tau);
            if leader.is_some() {
                evaluated_packets += 1;
                if !pkt_rec {
                    lost_packets += 1;
                    logs[i].lost_packets += 1;
                }
            }
            let after = train_step(before, sig, kin, pkt_rec, leader, now);
            states[i] = after;

            let log = &mut logs[i];
            if after.mode.is_fixed_block() {
                log.fbs_slots += 1;
            }
            if after.mode == Mode::Emergency {
                log.emergency_slots += 1;
            }
            if opts.samples.includes(i) {
                log.samples.push(TrainSample {
                    time: now,
                    position: before.position,
                    velocity: before.velocity,
                    acceleration: after.acceleration,
                    mode: after.mode,
                    sinr_db,
                    pkt_rec,
                    hop_channel,
                });
            }

            let t_end = now + dt;
            let arrived =
                before.mode != Mode::Dwell && matches!(after.mode, Mode::Dwell | Mode::Done);
            let departed = before.mode == Mode::Dwell && after.mode != Mode::Dwell;
            if arrived {
                let station = if after.mode == Mode::Done {
                    sig.num_stations
                } else {
                    after.next_station_index
                };
                serve(
                    station,
                    &mut onboard[i],
                    &mut queues,
                    &mut events,
                    &mut outcomes,
                    &mut first_call,
                    t_end,
                );
                if after.mode == Mode::Done {
                    log.arrival_time = Some(t_end);
                }
            } else if departed {
                let station = after.next_station_index - 1;
                serve(
                    station,
                    &mut onboard[i],
                    &mut queues,
                    &mut events,
                    &mut outcomes,
                    &mut first_call,
                    t_end,
                );
            }
            log.max_onboard = log.max_onboard.max(onboard[i].len());
        }

        for pair in active.windows(2) {
            let gap = states[pair[0]].position - states[pair[1]].position;
            if gap <= 0.0 {
                safety.crossovers += 1;
            }
            safety.min_gap_m = safety.min_gap_m.min(gap);
        }
        active.retain(|&i| states[i].mode != Mode::Done);
        slot += 1;
    };

    let incomplete = logs.iter().filter(|l| !l.completed()).count();
    if incomplete > 0 {
        log::warn!("{incomplete} trains did not finish within the run-out");
    }

    outcomes.sort_by_key(|o| o.id);
    let congestion = congestion_series(&events, sig.num_stations);
    let journeys: Vec<f64> = logs.iter().filter_map(TrainLog::journey_time).collect();
    let pj: Vec<f64> = outcomes.iter().map(|o| o.journey_time).collect();
    let pw: Vec<f64> = outcomes.iter().map(|o| o.wait_time).collect();
    let summary = RunSummary {
        trains_dispatched: logs.len(),
        trains_completed: journeys.len(),
        mean_journey_s: mean(&journeys),
        median_journey_s: percentile(&journeys, 0.5),
        p95_journey_s: percentile(&journeys, 0.95),
        min_journey_s: journeys.iter().copied().fold(f64::NAN, f64::min),
        max_journey_s: journeys.iter().copied().fold(f64::NAN, f64::max),
        passengers_total: demand.len(),
        passengers_delivered: outcomes.len(),
        mean_passenger_journey_s: mean(&pj),
        mean_passenger_wait_s: mean(&pw),
        peak_waiting: congestion
            .iter()
            .filter(|s| s.time >= first_call[s.station as usize])
            .map(|s| s.waiting_count)
            .max()
            .unwrap_or(0),
        lost_packet_fraction: if evaluated_packets == 0 {
            0.0
        } else {
            lost_packets as f64 / evaluated_packets as f64
        },
        end_time_s: end_time,
    };
    SimResult {
        trains: logs,
        passengers: outcomes,
        congestion,
        safety,
        summary,
    }
}

/// Percentage increase of `attack` over `baseline`.
pub fn pct_increase(attack: f64, baseline: f64) -> f64 {
    (attack - baseline) / baseline * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainComparison {
    pub id: usize,
    pub dispatch_time: f64,
    pub baseline_journey_s: Option<f64>,
    pub attack_journey_s: Option<f64>,
    /// Present when the train completed in both runs.
    pub pct_increase: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassengerDelta {
    pub id: u64,
    pub baseline_journey_s: f64,
    pub attack_journey_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub trains: Vec<TrainComparison>,
    /// Mean of the per-train percentage increases.
    pub mean_train_pct_increase: f64,
    pub max_train_pct_increase: f64,
    pub passengers: Vec<PassengerDelta>,
    /// Increase of the mean journey time over passengers delivered in both runs.
    pub passenger_pct_increase: f64,
}

/// Per-train and per-passenger journey-time increases of `attack` over `baseline`.
pub fn compare_runs(attack: &SimResult, baseline: &SimResult) -> Result<Comparison, SimError> {
    if attack.trains.len() != baseline.trains.len() {
        return Err(SimError::Mismatch(format!(
            "{} attacked trains vs {} baseline trains",
            attack.trains.len(),
            baseline.trains.len()
        )));
    }
    let mut trains = Vec::with_capacity(attack.trains.len());
    for (a, b) in attack.trains.iter().zip(&baseline.trains) {
        if a.dispatch_time != b.dispatch_time {
            return Err(SimError::Mismatch(format!(
                "train {} dispatched at {} vs {}",
                a.id, a.dispatch_time, b.dispatch_time
            )));
        }
        let (ja, jb) = (a.journey_time(), b.journey_time());
        trains.push(TrainComparison {
            id: a.id,
            dispatch_time: a.dispatch_time,
            baseline_journey_s: jb,
            attack_journey_s: ja,
            pct_increase: ja.zip(jb).map(|(ja, jb)| pct_increase(ja, jb)),
        });
    }
    let pcts: Vec<f64> = trains.iter().filter_map(|t| t.pct_increase).collect();

    let mut passengers = Vec::new();
    let mut bi = baseline.passengers.iter().peekable();
    for a in &attack.passengers {
        while bi.peek().is_some_and(|b| b.id < a.id) {
            bi.next();
        }
        if let Some(b) = bi.peek().filter(|b| b.id == a.id) {
            passengers.push(PassengerDelta {
                id: a.id,
                baseline_journey_s: b.journey_time,
                attack_journey_s: a.journey_time,
            });
        }
    }
    let base_mean = mean(
        &passengers
            .iter()
            .map(|p| p.baseline_journey_s)
            .collect::<Vec<_>>(),
    );
    let attack_mean = mean(
        &passengers
            .iter()
            .map(|p| p.attack_journey_s)
            .collect::<Vec<_>>(),
    );
    Ok(Comparison {
        trains,
        mean_train_pct_increase: mean(&pcts),
        max_train_pct_increase: pcts.iter().copied().fold(f64::NAN, f64::max),
        passengers,
        passenger_pct_increase: if base_mean.is_nan() {
            0.0
        } else {
            pct_increase(attack_mean, base_mean)
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Hopping channels; 0 means FHSS disabled.
    pub n: u32,
    pub train_pct_increase: f64,
    pub passenger_pct_increase: f64,
    pub lost_packet_fraction: f64,
}

/// Runs the attack once per channel count and compares each against the
/// shared no-attack baseline. Runs are independent and execute in parallel
/// on the current rayon pool; results come back in `n_values` order.
pub fn sweep_fhss(cfg: &ScenarioConfig, n_values: &[u32]) -> Result<Vec<SweepPoint>, SimError> {
    if !cfg.jammer.active {
        return Err(SimError::InvalidRequest(
            "the FHSS sweep needs an active jammer (jammer.active = true)".into(),
        ));
    }
    if n_values.is_empty() {
        return Err(SimError::InvalidRequest("no channel counts given".into()));
    }
    let demand = scenario_demand(cfg)?;
    let opts = RunOptions::default();
    let mut runs: Vec<Option<u32>> = vec![None];
    runs.extend(n_values.iter().map(|&n| Some(n)));
    let results: Vec<SimResult> = runs
        .par_iter()
        .map(|run| match run {
            None => simulate(&cfg.baseline(), &demand, &opts),
            Some(n) => simulate(&with_channels(cfg, *n), &demand, &opts),
        })
        .collect();
    let baseline = &results[0];
    n_values
        .iter()
        .zip(&results[1..])
        .map(|(&n, attack)| {
            let cmp = compare_runs(attack, baseline)?;
            Ok(SweepPoint {
                n,
                train_pct_increase: cmp.mean_train_pct_increase,
                passenger_pct_increase: cmp.passenger_pct_increase,
                lost_packet_fraction: attack.summary.lost_packet_fraction,
            })
        })
        .collect()
}

/// The scenario with FHSS over `n` channels (`n = 0` disables hopping).
pub fn with_channels(cfg: &ScenarioConfig, n: u32) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    cfg.fhss.enabled = n > 0;
    cfg.fhss.n_channels = n.max(1);
    cfg
}

/// Runs the attacked scenario and its no-attack baseline in parallel.
pub fn run_with_baseline(
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(SimResult, SimResult), SimError> {
    let demand = scenario_demand(cfg)?;
    let baseline_cfg = cfg.baseline();
    Ok(rayon::join(
        || simulate(cfg, &demand, opts),
        || simulate(&baseline_cfg, &demand, opts),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trains: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.sim_duration = trains as f64 * cfg.sim.dispatch_interval;
        cfg.demand.rate_per_station = 0.0;
        cfg
    }

    fn log(id: usize, dispatch: f64, journey: Option<f64>) -> TrainLog {
        TrainLog {
            id,
            dispatch_time: dispatch,
            departure_time: dispatch,
            arrival_time: journey.map(|j| dispatch + j),
            fbs_slots: 0,
            emergency_slots: 0,
            lost_packets: 0,
            max_onboard: 0,
            samples: Vec::new(),
        }
    }

    fn result(trains: Vec<TrainLog>, passengers: Vec<PassengerOutcome>) -> SimResult {
        SimResult {
            trains,
            passengers,
            congestion: Vec::new(),
            safety: SafetyReport {
                crossovers: 0,
                min_gap_m: f64::INFINITY,
            },
            summary: RunSummary {
                trains_dispatched: 0,
                trains_completed: 0,
                mean_journey_s: 0.0,
                median_journey_s: 0.0,
                p95_journey_s: 0.0,
                min_journey_s: 0.0,
                max_journey_s: 0.0,
                passengers_total: 0,
                passengers_delivered: 0,
                mean_passenger_journey_s: 0.0,
                mean_passenger_wait_s: 0.0,
                peak_waiting: 0,
                lost_packet_fraction: 0.0,
                end_time_s: 0.0,
            },
        }
    }

    #[test]
    fn sub_seeds_differ_per_stream() {
        let a = sub_seed(1, SeedStream::Fading);
        let b = sub_seed(1, SeedStream::Demand);
        let c = sub_seed(1, SeedStream::Hops);
        assert!(a != b && b != c && a != c);
        assert_eq!(a, sub_seed(1, SeedStream::Fading));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.95), 5.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }

    #[test]
    fn single_train_matches_segment_sum() {
        let r = run_scenario(&small(1)).unwrap();
        assert_eq!(r.trains.len(), 1);
        let j = r.trains[0].journey_time().unwrap();
        assert!((j / 60.0 - 113.0).abs() <= 3.0, "{j}");
    }

    #[test]
    fn unattacked_trains_share_journey_time() {
        let r = run_scenario(&small(4)).unwrap();
        let first = r.trains[0].journey_time().unwrap();
        for t in &r.trains {
            assert_eq!(t.journey_time().unwrap(), first);
            assert_eq!(t.fbs_slots, 0);
        }
        assert_eq!(r.safety.crossovers, 0);
    }

    #[test]
    fn compare_identical_is_zero() {
        let r = result(
            vec![log(0, 0.0, Some(6804.0)), log(1, 90.0, Some(6804.0))],
            vec![],
        );
        let c = compare_runs(&r, &r).unwrap();
        assert_eq!(c.mean_train_pct_increase, 0.0);
        assert!(c.trains.iter().all(|t| t.pct_increase == Some(0.0)));
        assert_eq!(c.passenger_pct_increase, 0.0);
    }

    #[test]
    fn compare_reports_table_increases() {
        let base = result(
            vec![
                log(0, 0.0, Some(113.4 * 60.0)),
                log(1, 90.0, Some(113.4 * 60.0)),
            ],
            vec![],
        );
        let attack = result(
            vec![
                log(0, 0.0, Some(131.22 * 60.0)),
                log(1, 90.0, Some(152.1 * 60.0)),
            ],
            vec![],
        );
        let c = compare_runs(&attack, &base).unwrap();
        assert!((c.trains[0].pct_increase.unwrap() - 15.71).abs() < 0.01);
        // The tabulated 34.15 % is not reproduced by its own minute values
        // (152.1 / 113.4 gives 34.13 %); allow for that rounding.
        assert!((c.trains[1].pct_increase.unwrap() - 34.15).abs() < 0.05);
    }

    #[test]
    fn compare_rejects_mismatched_runs() {
        let a = result(vec![log(0, 0.0, Some(1.0))], vec![]);
        let b = result(
            vec![log(0, 0.0, Some(1.0)), log(1, 90.0, Some(1.0))],
            vec![],
        );
        assert!(matches!(compare_runs(&a, &b), Err(SimError::Mismatch(_))));
    }

    #[test]
    fn compare_ignores_incomplete_trains() {
        let base = result(
            vec![log(0, 0.0, Some(100.0)), log(1, 90.0, Some(100.0))],
            vec![],
        );
        let attack = result(vec![log(0, 0.0, Some(110.0)), log(1, 90.0, None)], vec![]);
        let c = compare_runs(&attack, &base).unwrap();
        assert_eq!(c.trains[1].pct_increase, None);
        assert!((c.mean_train_pct_increase - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_requires_jammer_and_channels() {
        let cfg = small(1);
        assert!(sweep_fhss(&cfg, &[1]).is_err());
        let mut cfg = cfg;
        cfg.jammer.active = true;
        assert!(sweep_fhss(&cfg, &[]).is_err());
    }

    #[test]
    fn passengers_board_and_arrive() {
        let mut cfg = small(3);
        cfg.demand.rate_per_station = 0.02;
        cfg.demand.duration = Some(120.0);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.summary.passengers_total > 0);
        for o in &r.passengers {
            assert!(o.wait_time >= 0.0 && o.journey_time >= o.wait_time);
        }
    }

    /// A pointwise-later train can still shorten someone's journey: a passenger
    /// who misses train 0 at baseline catches it when it runs late.
    #[test]
    fn later_trains_can_shorten_a_journey() {
        let cfg = small(2);
        let base_demand = [PassengerRecord {
            id: 1,
            origin_station: 2,
            destination_station: 3,
            tap_in_time: 0.0,
        }];
        let base = simulate(&cfg, &base_demand, &RunOptions::default());
        let arrival0 = base.trains[0].dispatch_time + 200.0;
        let demand = [PassengerRecord {
            tap_in_time: arrival0 + 40.0,
            ..base_demand[0]
        }];
        let base = simulate(&cfg, &demand, &RunOptions::default());
        let mut slow = cfg.clone();
        slow.signaling.dwell_time = 60.0;
        let delayed = simulate(&slow, &demand, &RunOptions::default());
        for (b, d) in base.trains.iter().zip(&delayed.trains) {
            assert!(d.journey_time().unwrap() >= b.journey_time().unwrap());
        }
        let jb = base.passengers[0].journey_time;
        let jd = delayed.passengers[0].journey_time;
        assert!(jd < jb, "{jd} vs {jb}");
    }
}
