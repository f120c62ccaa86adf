//! Train-motion mathematics.
//!
//! All deceleration magnitudes are stored positive; signs are applied where an
//! acceleration is produced ([`plan_accel_at`], [`step`]). Positions are in
//! metres, velocities in m/s and times in seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    /// The train cannot stop within the remaining distance using the service brake.
    #[error("overshoot: stopping needs {required:.3} m but only {available:.3} m remain")]
    Overshoot { required: f64, available: f64 },
    #[error("invalid kinematic input: {0}")]
    InvalidInput(String),
}

/// Traction and braking capabilities of a train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicParams<S> {
    /// Traction acceleration (m/s²).
    pub accel_alpha: S,
    /// Service-brake deceleration magnitude (m/s²).
    pub decel_service: S,
    /// Emergency-brake deceleration magnitude (m/s²).
    pub decel_emergency: S,
    /// Coasting deceleration magnitude due to friction (m/s²).
    pub decel_friction: S,
    /// Maximum line speed (m/s).
    pub v_max: S,
}

impl<S: Scalar> Default for KinematicParams<S> {
    fn default() -> Self {
        Self {
            accel_alpha: S::lit(0.7),
            decel_service: S::lit(0.4),
            decel_emergency: S::lit(1.0),
            decel_friction: S::lit(0.05),
            v_max: S::lit(16.67),
        }
    }
}

impl<S: Scalar> KinematicParams<S> {
    /// Checks the parameter invariants, naming the offending field.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("accel_alpha", self.accel_alpha),
            ("decel_service", self.decel_service),
            ("decel_emergency", self.decel_emergency),
            ("decel_friction", self.decel_friction),
            ("v_max", self.v_max),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < S::zero() {
                return Err(format!(
                    "{name} must be finite and nonnegative (got {value})"
                ));
            }
        }
        for (name, value) in [
            ("accel_alpha", self.accel_alpha),
            ("decel_service", self.decel_service),
            ("v_max", self.v_max),
        ] {
            if value <= S::zero() {
                return Err(format!("{name} must be > 0 (got {value})"));
            }
        }
        if self.decel_emergency <= self.decel_service {
            return Err(format!(
                "decel_emergency must exceed decel_service ({} <= {})",
                self.decel_emergency, self.decel_service
            ));
        }
        Ok(())
    }
}

/// Four-phase guidance trajectory: accelerate, cruise, coast, brake.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionPlan<S> {
    pub t1: S,
    pub t2: S,
    pub t3: S,
    pub t4: S,
    /// Cruise velocity reached at the end of the acceleration phase.
    pub v1: S,
    /// Velocity at the end of the coasting phase.
    pub v2: S,
    /// Epoch of the plan; phase boundaries are offsets from here.
    pub start_time: S,
    pub planned_distance: S,
}

impl<S: Scalar> MotionPlan<S> {
    pub fn starting_at(mut self, start_time: S) -> Self {
        self.start_time = start_time;
        self
    }

    pub fn total_time(&self) -> S {
        self.t1 + self.t2 + self.t3 + self.t4
    }

    pub fn end_time(&self) -> S {
        self.start_time + self.total_time()
    }

    /// Initial velocity implied by the acceleration phase.
    pub fn v_init(&self, params: &KinematicParams<S>) -> S {
        self.v1 - params.accel_alpha * self.t1
    }

    /// Distances covered in each of the four phases.
    pub fn phase_distances(&self, params: &KinematicParams<S>) -> [S; 4] {
        let h = S::half();
        let v0 = self.v_init(params);
        [
            v0 * self.t1 + h * params.accel_alpha * self.t1 * self.t1,
            self.v1 * self.t2,
            self.v1 * self.t3 - h * params.decel_friction * self.t3 * self.t3,
            self.v2 * self.t4 - h * params.decel_service * self.t4 * self.t4,
        ]
    }
}

/// Last state of the leading train known to a follower.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LeaderEstimate<S> {
    pub position: S,
    pub velocity: S,
    pub acceleration: S,
    /// Slots elapsed since the last successful reception.
    pub age_slots: u32,
}

/// Distance to stop from `v` under constant deceleration magnitude `decel`.
pub fn stopping_distance<S: Scalar>(v: S, decel: S) -> S {
    v * v / (S::two() * decel)
}

fn feasibility_tolerance<S: Scalar>(scale: S) -> S {
    let relative = S::epsilon() * S::lit(1024.0) * scale.max(S::one());
    relative.max(S::lit(1e-6))
}

/// Minimum-time plan covering `s_remain` metres from `v_init` and ending at rest.
///
/// Coasting never shortens the journey when cruising is allowed, so the plan
/// always has `t3 = 0` and reduces to a trapezoidal (`v1 = v_max`) or a
/// triangular (`t2 = 0`) profile, both solved in closed form.
pub fn solve_plan<S: Scalar>(
    params: &KinematicParams<S>,
    v_init: S,
    s_remain: S,
) -> Result<MotionPlan<S>, KinematicsError> {
    if !v_init.is_finite() || !s_remain.is_finite() {
        return Err(KinematicsError::InvalidInput(format!(
            "non-finite v_init={v_init} or s_remain={s_remain}"
        )));
    }
    let tol_v = S::lit(1e-9).max(S::epsilon() * S::lit(64.0) * params.v_max);
    if v_init < -tol_v || v_init > params.v_max + tol_v {
        return Err(KinematicsError::InvalidInput(format!(
            "v_init={v_init} outside [0, {}]",
            params.v_max
        )));
    }
    if s_remain < S::zero() {
        return Err(KinematicsError::InvalidInput(format!(
            "s_remain={s_remain} is negative"
        )));
    }
    let v0 = v_init.max(S::zero()).min(params.v_max);
    let alpha = params.accel_alpha;
    let beta = params.decel_service;
    let two = S::two();

    let d_stop = stopping_distance(v0, beta);
    if s_remain < d_stop - feasibility_tolerance(d_stop) {
        return Err(KinematicsError::Overshoot {
            required: d_stop.to_f64().unwrap_or(f64::NAN),
            available: s_remain.to_f64().unwrap_or(f64::NAN),
        });
    }
    if s_remain <= d_stop {
        // Already on the service-brake curve.
        let t4 = v0 / beta;
        return Ok(MotionPlan {
            t4,
            v1: v0,
            v2: v0,
            planned_distance: s_remain,
            ..MotionPlan::default()
        });
    }

    // Peak velocity of the accelerate-then-brake profile.
    let peak = ((two * alpha * beta * s_remain + beta * v0 * v0) / (alpha + beta)).sqrt();
    let (v1, t2) = if peak >= params.v_max {
        let v1 = params.v_max;
        let s1 = (v1 * v1 - v0 * v0) / (two * alpha);
        let s4 = stopping_distance(v1, beta);
        let cruise = (s_remain - s1 - s4).max(S::zero());
        (v1, cruise / v1)
    } else {
        (peak.max(v0), S::zero())
    };
    Ok(MotionPlan {
        t1: (v1 - v0) / alpha,
        t2,
        t3: S::zero(),
        t4: v1 / beta,
        v1,
        v2: v1,
        start_time: S::zero(),
        planned_distance: s_remain,
    })
}

/// Signed guidance acceleration of `plan` at absolute time `tau`.
///
/// Phase intervals: `[t, t+T1]` accelerate, `(.., +T2]` cruise, `(.., +T3]`
/// coast, `(.., +T4]` brake; zero (at rest) after the plan ends.
pub fn plan_accel_at<S: Scalar>(plan: &MotionPlan<S>, params: &KinematicParams<S>, tau: S) -> S {
    let elapsed = tau - plan.start_time;
    let b1 = plan.t1;
    let b2 = b1 + plan.t2;
    let b3 = b2 + plan.t3;
    let b4 = b3 + plan.t4;
    if plan.t1 > S::zero() && elapsed <= b1 {
        params.accel_alpha
    } else if plan.t2 > S::zero() && elapsed <= b2 {
        S::zero()
    } else if plan.t3 > S::zero() && elapsed <= b3 {
        -params.decel_friction
    } else if plan.t4 > S::zero() && elapsed <= b4 {
        -params.decel_service
    } else {
        S::zero()
    }
}

/// Admissible acceleration to hold for the slot `[now, now + dt]`.
///
/// The plan is sampled at the end of the slot, so a phase is only entered for
/// a slot it covers entirely: the train never exceeds the cruise velocity and
/// brakes no later than the plan does. Once the plan has run out a moving
/// train keeps braking.
pub fn slot_acceleration<S: Scalar>(
    plan: &MotionPlan<S>,
    params: &KinematicParams<S>,
    now: S,
    dt: S,
    velocity: S,
) -> S {
    let sample = now + dt;
    if sample > plan.end_time() {
        return if velocity > S::zero() {
            -params.decel_service
        } else {
            S::zero()
        };
    }
    plan_accel_at(plan, params, sample)
}

/// One constant-acceleration slot of length `dt`; returns `(v_next, ds)`.
///
/// The train never reverses: when braking would drive the velocity negative
/// it stops within the slot and the displacement is truncated to `v²/(2|a|)`.
pub fn step<S: Scalar>(v: S, a: S, dt: S) -> (S, S) {
    let v_next = v + a * dt;
    // Braking that lands within accumulated rounding of rest counts as stopping.
    let rounding = S::epsilon().sqrt() * (v.abs() + (a * dt).abs());
    if v_next < S::zero() || (a < S::zero() && v_next <= rounding) {
        let ds = if a < S::zero() {
            stopping_distance(v, -a)
        } else {
            S::zero()
        };
        return (S::zero(), ds.max(S::zero()));
    }
    let ds = v * dt + S::half() * a * dt * dt;
    (v_next, ds.max(S::zero()))
}

/// Moving-block dynamic headway for follower speed `v_f` and leader speed `v_l`.
///
/// Steps the follower under service braking and the leader under emergency
/// braking until the follower stops, returning the largest excess of the
/// follower's cumulative stopping displacement over the leader's (never < 0).
pub fn dynamic_headway<S: Scalar>(params: &KinematicParams<S>, v_f: S, v_l: S, dt: S) -> S {
    let mut vf = v_f.max(S::zero());
    let mut vl = v_l.max(S::zero());
    let mut sf = S::zero();
    let mut sl = S::zero();
    let mut headway = S::zero();
    while vf > S::zero() {
        let (vf_next, dsf) = step(vf, -params.decel_service, dt);
        let (vl_next, dsl) = step(vl, -params.decel_emergency, dt);
        vf = vf_next;
        vl = vl_next;
        sf = sf + dsf;
        sl = sl + dsl;
        headway = headway.max(sf - sl);
    }
    headway
}
