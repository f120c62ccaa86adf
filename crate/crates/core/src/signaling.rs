//! Per-train signaling state machine: moving-block following with fallback to
//! fixed-block operation on sustained packet loss or insufficient headway.
//!
//! Positions are metres from the line origin; station `i` (1-indexed) sits at
//! `(i - 1) * station_spacing`.

use serde::{Deserialize, Serialize};

use crate::kinematics::{
    dynamic_headway, slot_acceleration, solve_plan, step, stopping_distance, KinematicParams,
    LeaderEstimate, MotionPlan,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalingConfig<S> {
    /// Decision interval (s).
    pub dt: S,
    /// Consecutive lost packets that force fixed-block operation.
    pub loss_threshold_n: u32,
    /// Slots a train remains in fixed-block mode once it falls back.
    pub fbs_hold_slots: u32,
    pub block_length: S,
    /// Clear blocks required between leader and follower.
    pub block_threshold_bth: u32,
    pub station_spacing: S,
    pub dwell_time: S,
    pub num_stations: u32,
}

impl<S: Scalar> Default for SignalingConfig<S> {
    fn default() -> Self {
        Self {
            dt: S::lit(0.25),
            loss_threshold_n: 8,
            fbs_hold_slots: 120,
            block_length: S::lit(400.0),
            block_threshold_bth: 1,
            station_spacing: S::lit(2800.0),
            dwell_time: S::lit(30.0),
            num_stations: 30,
        }
    }
}

impl<S: Scalar> SignalingConfig<S> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > S::zero() && self.dt.is_finite()) {
            return Err(format!("dt must be > 0 (got {})", self.dt));
        }
        if self.loss_threshold_n < 1 {
            return Err("loss_threshold_n must be >= 1".into());
        }
        if self.fbs_hold_slots < 1 {
            return Err("fbs_hold_slots must be >= 1".into());
        }
        if !(self.block_length > S::zero() && self.block_length.is_finite()) {
            return Err(format!(
                "block_length must be > 0 (got {})",
                self.block_length
            ));
        }
        if self.block_threshold_bth < 1 {
            return Err("block_threshold_bth must be >= 1".into());
        }
        if !(self.station_spacing > S::zero() && self.station_spacing.is_finite()) {
            return Err(format!(
                "station_spacing must be > 0 (got {})",
                self.station_spacing
            ));
        }
        if !(self.dwell_time >= S::zero() && self.dwell_time.is_finite()) {
            return Err(format!("dwell_time must be >= 0 (got {})", self.dwell_time));
        }
        if self.num_stations < 2 {
            return Err("num_stations must be >= 2".into());
        }
        Ok(())
    }

    /// Stop point of station `i` (1-indexed).
    pub fn station_position(&self, i: u32) -> S {
        S::lit(f64::from(i.saturating_sub(1))) * self.station_spacing
    }

    pub fn line_length(&self) -> S {
        self.station_position(self.num_stations)
    }

    /// Start of block `i` (1-indexed).
    pub fn block_start(&self, i: i64) -> S {
        S::lit((i - 1) as f64) * self.block_length
    }

    /// Slot count of one dwell, rounded to the nearest whole slot.
    pub fn dwell_slots(&self) -> u32 {
        (self.dwell_time / self.dt).round().to_u32().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Mbs,
    Fbs,
    /// Emergency braking inside fixed-block mode, latched until standstill.
    Emergency,
    Dwell,
    Done,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mbs => "MBS",
            Mode::Fbs => "FBS",
            Mode::Emergency => "EMERGENCY",
            Mode::Dwell => "DWELL",
            Mode::Done => "DONE",
        }
    }

    /// Whether the fixed-block flag is set.
    pub fn is_fixed_block(self) -> bool {
        matches!(self, Mode::Fbs | Mode::Emergency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainState<S> {
    pub id: usize,
    pub position: S,
    pub velocity: S,
    pub acceleration: S,
    pub mode: Mode,
    pub pkt_loss_counter: u32,
    pub fbs_slots_remaining: u32,
    /// Last received state of the leading train; `None` when running unled.
    pub leader: Option<LeaderEstimate<S>>,
    /// Block occupied by the leading train as reported by track circuits.
    pub leader_block: Option<i64>,
    pub plan: MotionPlan<S>,
    /// Station the train is heading to, or dwelling at while in `Dwell`.
    pub next_station_index: u32,
    pub dwell_remaining: S,
}

impl<S: Scalar> TrainState<S> {
    /// A train departing station 1 at `now`, with its leader's state as
    /// exchanged at dispatch.
    pub fn dispatched(
        id: usize,
        cfg: &SignalingConfig<S>,
        kin: &KinematicParams<S>,
        leader: Option<LeaderEstimate<S>>,
        now: S,
    ) -> Self {
        let mut state = Self {
            id,
            position: S::zero(),
            velocity: S::zero(),
            acceleration: S::zero(),
            mode: Mode::Mbs,
            pkt_loss_counter: 0,
            fbs_slots_remaining: 0,
            leader,
            leader_block: leader.map(|l| block_index(l.position, cfg.block_length)),
            plan: MotionPlan::default(),
            next_station_index: 2,
            dwell_remaining: S::zero(),
        };
        state.replan(cfg, kin, now);
        state
    }

    /// Remaining distance to the next station stop point.
    pub fn distance_to_station(&self, cfg: &SignalingConfig<S>) -> S {
        cfg.station_position(self.next_station_index) - self.position
    }

    /// Current motion state as a leader estimate seen by a follower.
    pub fn as_leader(&self) -> LeaderEstimate<S> {
        LeaderEstimate {
            position: self.position,
            velocity: self.velocity,
            acceleration: self.acceleration,
            age_slots: 0,
        }
    }

    fn replan(&mut self, cfg: &SignalingConfig<S>, kin: &KinematicParams<S>, now: S) {
        let remain = self.distance_to_station(cfg).max(S::zero());
        if let Ok(plan) = solve_plan(kin, self.velocity, remain) {
            self.plan = plan.starting_at(now);
        }
    }
}

/// 1-indexed block containing `position`; a boundary belongs to the upper block.
pub fn block_index<S: Scalar>(position: S, block_length: S) -> i64 {
    (position / block_length).floor().to_i64().unwrap_or(0) + 1
}

/// Distance within which a stopped train counts as berthed at a station.
fn berth_tolerance<S: Scalar>(kin: &KinematicParams<S>, dt: S) -> S {
    let creep = kin.accel_alpha * dt;
    let residual = creep * creep * (S::one() / kin.accel_alpha + S::one() / kin.decel_service);
    residual.max(S::lit(0.1))
}

/// Follows a freshly solved plan toward `target` metres ahead; `None` when the
/// train can no longer stop in time.
fn plan_toward<S: Scalar>(
    state: &mut TrainState<S>,
    kin: &KinematicParams<S>,
    target: S,
    now: S,
    dt: S,
) -> Option<S> {
    let plan = solve_plan(kin, state.velocity, target)
        .ok()?
        .starting_at(now);
    state.plan = plan;
    Some(slot_acceleration(&plan, kin, now, dt, state.velocity))
}

/// Fixed-block control for one slot: sets the mode and the commanded
/// acceleration. The kinematic advance is left to [`train_step`].
pub fn fixed_block_update<S: Scalar>(
    mut state: TrainState<S>,
    cfg: &SignalingConfig<S>,
    kin: &KinematicParams<S>,
    now: S,
) -> TrainState<S> {
    let emergency = |mut s: TrainState<S>| {
        s.mode = Mode::Emergency;
        s.acceleration = if s.velocity > S::zero() {
            -kin.decel_emergency
        } else {
            S::zero()
        };
        s
    };
    if state.mode == Mode::Emergency && state.velocity > S::zero() {
        return emergency(state);
    }
    let own_block = block_index(state.position, cfg.block_length);
    let bth = i64::from(cfg.block_threshold_bth);
    let mut target = state.distance_to_station(cfg);
    if let Some(leader_block) = state.leader_block {
        if leader_block - own_block <= bth {
            return emergency(state);
        }
        target = target.min(cfg.block_start(leader_block - bth) - state.position);
    }
    if target < S::zero() {
        return emergency(state);
    }
    state.mode = Mode::Fbs;
    match plan_toward(&mut state, kin, target, now, cfg.dt) {
        Some(a) => {
            state.acceleration = a;
            state
        }
        None => emergency(state),
    }
}

/// Advances one train by one decision slot.
///
/// `pkt_rec` reports whether this slot's packet from the leader survived;
/// `true_leader` is the leader's actual state (used for the estimate refresh
/// and, through track circuits, for block occupancy).
pub fn train_step<S: Scalar>(
    mut state: TrainState<S>,
    cfg: &SignalingConfig<S>,
    kin: &KinematicParams<S>,
    pkt_rec: bool,
    true_leader: Option<LeaderEstimate<S>>,
    now: S,
) -> TrainState<S> {
    if state.mode == Mode::Done {
        return state;
    }
    let n = cfg.loss_threshold_n;
    let dt = cfg.dt;

    match true_leader {
        Some(truth) => {
            state.leader_block = Some(block_index(truth.position, cfg.block_length));
            if pkt_rec {
                state.pkt_loss_counter = 0;
                state.leader = Some(truth);
            } else {
                state.pkt_loss_counter = state.pkt_loss_counter.saturating_add(1);
                if let Some(est) = state.leader.as_mut() {
                    est.age_slots = est.age_slots.saturating_add(1);
                }
                if state.mode == Mode::Mbs && state.pkt_loss_counter >= n {
                    state.mode = Mode::Fbs;
                    state.fbs_slots_remaining = cfg.fbs_hold_slots;
                }
            }
        }
        None => {
            state.leader = None;
            state.leader_block = None;
            state.pkt_loss_counter = 0;
        }
    }
    let lossy = state.leader_block.is_some() && state.pkt_loss_counter >= n;

    match state.mode {
        Mode::Dwell => {
            state.acceleration = S::zero();
            state.fbs_slots_remaining = state.fbs_slots_remaining.saturating_sub(1);
            state.dwell_remaining = state.dwell_remaining - dt;
            if state.dwell_remaining <= dt * S::lit(1e-6) {
                state.dwell_remaining = S::zero();
                state.next_station_index += 1;
                if state.fbs_slots_remaining > 0 {
                    state.mode = Mode::Fbs;
                } else if lossy {
                    state.mode = Mode::Fbs;
                    state.fbs_slots_remaining = cfg.fbs_hold_slots;
                } else {
                    state.mode = Mode::Mbs;
                }
                state.replan(cfg, kin, now + dt);
            }
            return state;
        }
        Mode::Mbs => {
            let target = state.distance_to_station(cfg).max(S::zero());
            let a = plan_toward(&mut state, kin, target, now, dt).unwrap_or(-kin.decel_service);
            let clear = match state.leader {
                None => true,
                Some(est) => {
                    // Headway is checked against the state at the end of the
                    // slot, so the slot's own advance cannot eat into it.
                    let (v_end, ds) = step(state.velocity, a, dt);
                    let gap = est.position - state.position - ds;
                    // The headway never exceeds the service-brake stopping
                    // distance plus one slot of travel.
                    let bound = stopping_distance(v_end, kin.decel_service) + kin.v_max * dt;
                    gap > bound || gap > dynamic_headway(kin, v_end, est.velocity, dt)
                }
            };
            if clear {
                state.acceleration = a;
            } else {
                state.mode = Mode::Fbs;
                state.fbs_slots_remaining = cfg.fbs_hold_slots.saturating_sub(1);
                state = fixed_block_update(state, cfg, kin, now);
            }
        }
        Mode::Fbs | Mode::Emergency => {
            state = fixed_block_update(state, cfg, kin, now);
            state.fbs_slots_remaining = state.fbs_slots_remaining.saturating_sub(1);
        }
        Mode::Done => unreachable!(),
    }

    if state.mode.is_fixed_block() && state.fbs_slots_remaining == 0 {
        let latched = state.mode == Mode::Emergency && state.velocity > S::zero();
        if !latched {
            if lossy {
                state.fbs_slots_remaining = cfg.fbs_hold_slots;
            } else {
                state.mode = Mode::Mbs;
            }
        }
    }

    let (v_next, ds) = step(state.velocity, state.acceleration, dt);
    state.velocity = v_next;
    state.position = state.position + ds;

    let stop_point = cfg.station_position(state.next_station_index);
    if state.velocity == S::zero() && stop_point - state.position <= berth_tolerance(kin, dt) {
        state.acceleration = S::zero();
        if state.next_station_index >= cfg.num_stations {
            state.mode = Mode::Done;
        } else {
            state.mode = Mode::Dwell;
            state.dwell_remaining = S::lit(f64::from(cfg.dwell_slots())) * dt;
            if state.dwell_remaining <= S::zero() {
                state.next_station_index += 1;
                state.mode = Mode::Mbs;
                state.replan(cfg, kin, now + dt);
            }
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    type Cfg = SignalingConfig<f64>;

    fn kin() -> KinematicParams<f64> {
        KinematicParams::default()
    }

    fn moving(position: f64, velocity: f64, mode: Mode) -> TrainState<f64> {
        let cfg = Cfg::default();
        let mut s = TrainState::dispatched(1, &cfg, &kin(), None, 0.0);
        s.position = position;
        s.velocity = velocity;
        s.mode = mode;
        s.next_station_index = (position / cfg.station_spacing).floor() as u32 + 2;
        s
    }

    fn leader_at(position: f64, velocity: f64) -> LeaderEstimate<f64> {
        LeaderEstimate {
            position,
            velocity,
            acceleration: 0.0,
            age_slots: 0,
        }
    }

    #[test]
    fn block_index_examples() {
        assert_eq!(block_index(0.0, 400.0), 1);
        assert_eq!(block_index(850.0, 400.0), 3);
        assert_eq!(block_index(400.0, 400.0), 2);
        assert_eq!(block_index(399.999, 400.0), 1);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = Cfg::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.dwell_slots(), 120);
        assert_eq!(cfg.station_position(30), 81_200.0);
        let bad = Cfg { dt: 0.0, ..cfg };
        assert!(bad.validate().unwrap_err().contains("dt"));
        let bad = Cfg {
            block_threshold_bth: 0,
            ..cfg
        };
        assert!(bad.validate().unwrap_err().contains("block_threshold_bth"));
    }

    #[test]
    fn mbs_with_distant_leader_follows_plan() {
        let cfg = Cfg::default();
        let mut s = moving(1000.0, 16.67, Mode::Mbs);
        let leader = leader_at(3000.0, 16.67);
        s.leader = Some(leader);
        let next = train_step(s, &cfg, &kin(), true, Some(leader), 10.0);
        assert_eq!(next.mode, Mode::Mbs);
        let plan = solve_plan(&kin(), 16.67, 2800.0 - 1000.0)
            .unwrap()
            .starting_at(10.0);
        let expected = slot_acceleration(&plan, &kin(), 10.0, 0.25, 16.67);
        assert_eq!(next.acceleration, expected);
        assert!(dynamic_headway(&kin(), 16.67, 16.67, 0.25) < 2000.0);
    }

    #[test]
    fn eighth_loss_forces_fixed_block() {
        let cfg = Cfg::default();
        let leader = leader_at(30_000.0, 16.67);
        let mut s = moving(1000.0, 10.0, Mode::Mbs);
        s.leader = Some(leader);
        for k in 0..7 {
            s = train_step(s, &cfg, &kin(), false, Some(leader), k as f64 * 0.25);
            assert_eq!(s.mode, Mode::Mbs, "slot {k}");
        }
        assert_eq!(s.pkt_loss_counter, 7);
        let before = s;
        s = train_step(s, &cfg, &kin(), false, Some(leader), 7.0 * 0.25);
        assert!(s.mode.is_fixed_block());
        assert_eq!(s.pkt_loss_counter, 8);
        // The switching slot already ran under fixed-block control.
        assert_eq!(s.fbs_slots_remaining, cfg.fbs_hold_slots - 1);
        assert_eq!(before.leader.unwrap().age_slots, 7);
    }

    #[test]
    fn fixed_block_hold_lasts_exactly_the_hold() {
        let cfg = Cfg::default();
        let leader = leader_at(30_000.0, 16.67);
        let mut s = moving(1000.0, 10.0, Mode::Mbs);
        s.next_station_index = 11;
        s.leader = Some(leader);
        let mut t = 0.0;
        for _ in 0..8 {
            s = train_step(s, &cfg, &kin(), false, Some(leader), t);
            t += 0.25;
        }
        // The switching slot is the first fixed-block slot.
        let mut fbs_slots = 1;
        loop {
            s = train_step(s, &cfg, &kin(), true, Some(leader), t);
            t += 0.25;
            fbs_slots += 1;
            if s.mode == Mode::Mbs {
                break;
            }
            assert!(fbs_slots < 1000);
        }
        assert_eq!(fbs_slots, cfg.fbs_hold_slots);
    }

    #[test]
    fn unled_train_ignores_loss() {
        let cfg = Cfg::default();
        let mut s = TrainState::dispatched(0, &cfg, &kin(), None, 0.0);
        for k in 0..400 {
            s = train_step(s, &cfg, &kin(), false, None, k as f64 * 0.25);
            assert_eq!(s.mode, Mode::Mbs);
            assert_eq!(s.pkt_loss_counter, 0);
        }
        assert!(s.velocity > 0.0);
    }

    #[test]
    fn adjacent_block_triggers_emergency() {
        let cfg = Cfg::default();
        // Leader in block 10, follower in block 9.
        let mut s = moving(3300.0, 12.0, Mode::Fbs);
        s.leader_block = Some(10);
        s.fbs_slots_remaining = 50;
        let s = fixed_block_update(s, &cfg, &kin(), 0.0);
        assert_eq!(s.mode, Mode::Emergency);
        assert_eq!(s.acceleration, -1.0);
    }

    #[test]
    fn fixed_block_target_is_limit_block_start() {
        let cfg = Cfg::default();
        let mut s = moving(1900.0, 0.0, Mode::Fbs);
        s.next_station_index = 3;
        s.leader_block = Some(10);
        let s = fixed_block_update(s, &cfg, &kin(), 5.0);
        assert_eq!(s.mode, Mode::Fbs);
        // d^s_9 = 8 * 400 = 3200; the station at 5600 m is farther.
        let expected = 3200.0 - 1900.0;
        assert!((s.plan.planned_distance - expected).abs() < 1e-9);
        assert_eq!(s.acceleration, 0.7);
    }

    #[test]
    fn fixed_block_target_capped_by_station() {
        let cfg = Cfg::default();
        let mut s = moving(2000.0, 0.0, Mode::Fbs);
        s.leader_block = Some(20);
        let s = fixed_block_update(s, &cfg, &kin(), 0.0);
        assert!((s.plan.planned_distance - 800.0).abs() < 1e-9);
    }

    #[test]
    fn emergency_latches_until_rest_then_releases() {
        let cfg = Cfg::default();
        let mut s = moving(3300.0, 2.0, Mode::Emergency);
        s.leader_block = Some(20);
        let s1 = fixed_block_update(s, &cfg, &kin(), 0.0);
        assert_eq!(s1.mode, Mode::Emergency);
        assert_eq!(s1.acceleration, -1.0);
        s.velocity = 0.0;
        let s2 = fixed_block_update(s, &cfg, &kin(), 0.0);
        assert_eq!(s2.mode, Mode::Fbs);
        assert!(s2.acceleration > 0.0);
    }

    #[test]
    fn past_limit_boundary_brakes_in_emergency() {
        let cfg = Cfg::default();
        // The limit at the start of block 9 (3200 m) is 300 m away, short of
        // the 320 m service-brake stopping distance.
        let mut s = moving(2900.0, 16.0, Mode::Fbs);
        s.leader_block = Some(10);
        let s = fixed_block_update(s, &cfg, &kin(), 0.0);
        assert_eq!(s.mode, Mode::Emergency);
        assert_eq!(s.acceleration, -1.0);
    }

    #[test]
    fn single_train_completes_journey() {
        let cfg = Cfg::default();
        let k = kin();
        let mut s = TrainState::dispatched(0, &cfg, &k, None, 0.0);
        let mut slot = 0u64;
        let mut stops = 0;
        while s.mode != Mode::Done {
            let prev = s.mode;
            s = train_step(s, &cfg, &k, true, None, slot as f64 * cfg.dt);
            if s.mode == Mode::Dwell && prev != Mode::Dwell {
                stops += 1;
                let stop = cfg.station_position(s.next_station_index);
                assert!(
                    (s.position - stop).abs() <= 0.125,
                    "{} vs {stop}",
                    s.position
                );
            }
            let a = s.acceleration;
            assert!([0.7, 0.0, -0.05, -0.4, -1.0].contains(&a), "{a}");
            slot += 1;
            assert!(slot < 200_000);
        }
        assert_eq!(stops, 28);
        let journey = slot as f64 * cfg.dt;
        let segment = solve_plan(&k, 0.0, 2800.0).unwrap().total_time();
        let analytic = 29.0 * segment + 28.0 * 30.0;
        assert!(
            (journey - analytic).abs() < 29.0 * 1.0,
            "{journey} vs {analytic}"
        );
        assert!((journey / 60.0 - 113.0).abs() <= 3.0);
    }
}
