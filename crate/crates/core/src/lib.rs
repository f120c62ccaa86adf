//! Co-simulation of a CBTC metro line under signal jamming: train motion
//! planning, moving/fixed-block signaling, leaky-medium and free-wave link
//! budgets with FHSS mitigation, and passenger flow.
//!
//! The motion, signaling and link-budget modules are generic over the scalar
//! type; the aliases below fix them to `f64`, with `F32` variants for the
//! single-precision build of the same math.

// Validators write `!(x > 0)` so that NaN is rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod kinematics;
pub mod output;
pub mod passengers;
pub mod scalar;
pub mod signaling;
pub mod sim;

pub use config::{ConfigError, ScenarioConfig};
pub use scalar::Scalar;
pub use sim::{compare_runs, run_scenario, sweep_fhss, SimError, SimResult};

pub type KinematicParams = kinematics::KinematicParams<f64>;
pub type MotionPlan = kinematics::MotionPlan<f64>;
pub type LeaderEstimate = kinematics::LeaderEstimate<f64>;
pub type ChannelParams = channel::ChannelParams<f64>;
pub type JammerConfig = channel::JammerConfig<f64>;
pub type SignalingConfig = signaling::SignalingConfig<f64>;
pub type TrainState = signaling::TrainState<f64>;

pub type KinematicParamsF32 = kinematics::KinematicParams<f32>;
pub type MotionPlanF32 = kinematics::MotionPlan<f32>;
pub type ChannelParamsF32 = channel::ChannelParams<f32>;
pub type JammerConfigF32 = channel::JammerConfig<f32>;
pub type SignalingConfigF32 = signaling::SignalingConfig<f32>;
pub type TrainStateF32 = signaling::TrainState<f32>;
