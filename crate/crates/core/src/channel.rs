//! Link budget for legitimate and jamming signals over free-wave and
//! leaky-medium channels, with the FHSS spreading-gain model.
//!
//! Distances along the track are in kilometres; losses and powers in dB/dBm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("free-wave path loss undefined at distance {0} km")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Free,
    #[default]
    Leaky,
}

/// Which way trackside repeaters amplify along the leaky medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepeaterDirection {
    /// Repeaters amplify only signals travelling toward increasing position.
    #[default]
    Forward,
    /// Repeaters amplify signals travelling either way.
    Both,
}

impl RepeaterDirection {
    /// Repeaters a signal injected at `x_tx` passes through on its way to `x_rx`.
    pub fn traversed<S: Scalar>(self, x_tx: S, x_rx: S, d_rptr: S) -> u32 {
        match self {
            RepeaterDirection::Both => repeaters_between(x_tx, x_rx, d_rptr),
            RepeaterDirection::Forward if x_rx > x_tx => repeaters_between(x_tx, x_rx, d_rptr),
            RepeaterDirection::Forward => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams<S> {
    pub medium: Medium,
    /// Reference path loss at `ref_distance` (dB).
    pub eta0: S,
    /// Path-loss exponent.
    pub gamma: S,
    /// Free-wave reference distance (km).
    pub ref_distance: S,
    /// Coupling loss into the leaky medium (dB).
    pub c_cplng: S,
    /// Longitudinal loss along the leaky medium (dB/km).
    pub alpha_loss: S,
    /// Radial loss from the medium to the train antenna (dB).
    pub eta_r_bar: S,
    /// Gain of each trackside repeater (dB).
    pub c_rptr: S,
    /// Spacing between repeaters (km).
    pub d_rptr: S,
    pub repeater_direction: RepeaterDirection,
    /// SINR threshold below which a slot's packet is lost (dB).
    pub sinr_threshold_tau: S,
    /// Legitimate transmit power (dBm).
    pub p_s_dbm: S,
    pub fading_enabled: bool,
    /// Standard deviation of the log-normal fading term (dB).
    pub fading_sigma: S,
    /// Free-wave separations are clamped to at least this distance (km).
    pub min_distance: S,
}

impl<S: Scalar> Default for ChannelParams<S> {
    fn default() -> Self {
        Self {
            medium: Medium::Leaky,
            eta0: S::lit(90.0),
            gamma: S::lit(2.0),
            ref_distance: S::lit(1.0),
            c_cplng: S::lit(0.3),
            alpha_loss: S::lit(17.0),
            eta_r_bar: S::lit(62.0),
            c_rptr: S::lit(42.5),
            d_rptr: S::lit(2.5),
            repeater_direction: RepeaterDirection::Forward,
            sinr_threshold_tau: S::lit(10.0),
            p_s_dbm: S::lit(23.0),
            fading_enabled: false,
            fading_sigma: S::lit(4.0),
            min_distance: S::lit(0.001),
        }
    }
}

impl<S: Scalar> ChannelParams<S> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > S::zero()) {
            return Err(format!("gamma must be > 0 (got {})", self.gamma));
        }
        if !(self.d_rptr > S::zero()) {
            return Err(format!("d_rptr must be > 0 (got {})", self.d_rptr));
        }
        if !(self.c_rptr >= S::zero()) {
            return Err(format!("c_rptr must be >= 0 (got {})", self.c_rptr));
        }
        if !(self.alpha_loss >= S::zero()) {
            return Err(format!("alpha_loss must be >= 0 (got {})", self.alpha_loss));
        }
        if !(self.ref_distance > S::zero()) {
            return Err(format!(
                "ref_distance must be > 0 (got {})",
                self.ref_distance
            ));
        }
        if !(self.min_distance > S::zero()) {
            return Err(format!(
                "min_distance must be > 0 (got {})",
                self.min_distance
            ));
        }
        if !(self.fading_sigma >= S::zero()) {
            return Err(format!(
                "fading_sigma must be >= 0 (got {})",
                self.fading_sigma
            ));
        }
        Ok(())
    }
}

/// How the jammer spends its power over time and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammingStrategy {
    /// Continuous transmission spread uniformly over every hopping channel.
    #[default]
    ConstantWideband,
}

impl JammingStrategy {
    /// Power emitted in `slot`, or `None` when the jammer is silent.
    pub fn emitted_power_dbm<S: Scalar>(&self, jam: &JammerConfig<S>, _slot: u64) -> Option<S> {
        match self {
            JammingStrategy::ConstantWideband => Some(jam.p_j_dbm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JammerConfig<S> {
    pub active: bool,
    /// Longitudinal position of the jammer (km from the line origin).
    pub position: S,
    pub p_j_dbm: S,
    /// Radial free-wave hop from the jammer to its injection point on the medium (km).
    pub d_j_wg: S,
    pub strategy: JammingStrategy,
}

impl<S: Scalar> Default for JammerConfig<S> {
    fn default() -> Self {
        Self {
            active: false,
            position: S::lit(0.2),
            p_j_dbm: S::lit(23.0),
            d_j_wg: S::lit(0.00022),
            strategy: JammingStrategy::ConstantWideband,
        }
    }
}

impl<S: Scalar> JammerConfig<S> {
    pub fn validate(&self, track_length_km: S) -> Result<(), String> {
        if !(self.d_j_wg > S::zero()) {
            return Err(format!("d_j_wg must be > 0 (got {})", self.d_j_wg));
        }
        if !(self.position >= S::zero() && self.position <= track_length_km) {
            return Err(format!(
                "position must lie within [0, {track_length_km}] km (got {})",
                self.position
            ));
        }
        if !self.p_j_dbm.is_finite() {
            return Err("p_j_dbm must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FhssConfig {
    pub enabled: bool,
    pub n_channels: u32,
    /// Hopping-pattern seed; scenarios derive it from their master seed.
    #[serde(skip)]
    pub seed: u64,
    pub channel_bandwidth_khz: f64,
    /// Count the repeater filtering loss on top of the receiver spreading gain
    /// when the jamming signal traverses at least one repeater.
    pub stack_repeater_filtering: bool,
}

impl Default for FhssConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_channels: 1,
            seed: 0x5eed,
            channel_bandwidth_khz: 50.0,
            stack_repeater_filtering: false,
        }
    }
}

impl FhssConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_channels < 1 {
            return Err("n_channels must be >= 1".into());
        }
        if !(self.channel_bandwidth_khz > 0.0) {
            return Err(format!(
                "channel_bandwidth_khz must be > 0 (got {})",
                self.channel_bandwidth_khz
            ));
        }
        Ok(())
    }

    /// Extra loss seen by a wideband jammer (dB).
    pub fn jammer_penalty_db<S: Scalar>(&self, jammer_repeaters: u32) -> S {
        if !self.enabled {
            return S::zero();
        }
        let gain = S::ten() * S::lit(f64::from(self.n_channels)).log10();
        if self.stack_repeater_filtering && jammer_repeaters > 0 {
            gain * S::two()
        } else {
            gain
        }
    }
}

/// Per-slot fading terms (dB) for the legitimate and jamming free-wave paths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FadingDraws<S> {
    pub legit: S,
    pub jammer: S,
}

/// Log-distance path loss at `d` km.
pub fn free_pathloss<S: Scalar>(
    params: &ChannelParams<S>,
    d: S,
    fading_draw: S,
) -> Result<S, ChannelError> {
    if !(d > S::zero()) {
        return Err(ChannelError::NonPositiveDistance(
            d.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let fading = if params.fading_enabled {
        fading_draw
    } else {
        S::zero()
    };
    Ok(params.eta0 + S::ten() * params.gamma * (d / params.ref_distance).log10() + fading)
}

/// Number of repeaters at `k·d_rptr` (k ≥ 1) strictly between the two positions.
pub fn repeaters_between<S: Scalar>(x_a: S, x_b: S, d_rptr: S) -> u32 {
    let lo = x_a.min(x_b);
    let hi = x_a.max(x_b);
    let first = (lo / d_rptr).floor() + S::one();
    let last = (hi / d_rptr).ceil() - S::one();
    if last < first {
        0
    } else {
        (last - first + S::one()).to_u32().unwrap_or(0)
    }
}

/// Path loss of the legitimate signal injected by wire at `x_tx` and received at `x_rx`.
pub fn leaky_pathloss_legit<S: Scalar>(params: &ChannelParams<S>, x_tx: S, x_rx: S) -> S {
    let repeaters = params
        .repeater_direction
        .traversed(x_tx, x_rx, params.d_rptr);
    let repeaters = S::lit(f64::from(repeaters));
    params.c_cplng + params.alpha_loss * (x_tx - x_rx).abs() - params.c_rptr * repeaters
        + params.eta_r_bar
}

/// Path loss of the jamming signal: a free-wave hop into the medium, then
/// guided propagation to the receiver.
pub fn leaky_pathloss_jammer<S: Scalar>(
    params: &ChannelParams<S>,
    jam: &JammerConfig<S>,
    x_rx: S,
    fhss: &FhssConfig,
    fading_draw: S,
) -> Result<S, ChannelError> {
    let injection = free_pathloss(params, jam.d_j_wg, fading_draw)?;
    let repeaters = params
        .repeater_direction
        .traversed(jam.position, x_rx, params.d_rptr);
    Ok(injection + params.alpha_loss * (jam.position - x_rx).abs()
        - params.c_rptr * S::lit(f64::from(repeaters))
        + params.eta_r_bar
        + fhss.jammer_penalty_db(repeaters))
}

/// Interference-limited SINR in dB.
pub fn sinr<S: Scalar>(p_s_dbm: S, eta_s: S, p_j_dbm: S, eta_j: S) -> S {
    (p_s_dbm - eta_s) - (p_j_dbm - eta_j)
}

/// A slot's packet survives unless the SINR falls strictly below `tau`.
pub fn packet_received<S: Scalar>(sinr_db: S, tau: S) -> bool {
    sinr_db >= tau
}

/// SINR at the follower for the leader's transmission.
///
/// Returns `+∞` when the jammer is inactive or silent; the repeater spacing
/// keeps the unjammed SNR above threshold.
pub fn link_sinr<S: Scalar>(
    params: &ChannelParams<S>,
    jam: &JammerConfig<S>,
    fhss: &FhssConfig,
    x_leader: S,
    x_follower: S,
    fading: FadingDraws<S>,
    slot: u64,
) -> Result<S, ChannelError> {
    if !jam.active {
        return Ok(S::infinity());
    }
    let Some(p_j) = jam.strategy.emitted_power_dbm(jam, slot) else {
        return Ok(S::infinity());
    };
    let (eta_s, eta_j) = match params.medium {
        Medium::Free => {
            let d_s = (x_leader - x_follower).abs().max(params.min_distance);
            let d_j = (jam.position - x_follower).abs().max(params.min_distance);
            (
                free_pathloss(params, d_s, fading.legit)?,
                free_pathloss(params, d_j, fading.jammer)? + fhss.jammer_penalty_db(0),
            )
        }
        Medium::Leaky => (
            leaky_pathloss_legit(params, x_leader, x_follower),
            leaky_pathloss_jammer(params, jam, x_follower, fhss, fading.jammer)?,
        ),
    };
    Ok(sinr(params.p_s_dbm, eta_s, p_j, eta_j))
}

/// Seeded pseudo-random hopping pattern shared by the legitimate parties.
#[derive(Debug, Clone)]
pub struct HopGenerator {
    rng: ChaCha8Rng,
    n_channels: u32,
}

impl HopGenerator {
    pub fn new(fhss: &FhssConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(fhss.seed),
            n_channels: fhss.n_channels.max(1),
        }
    }
}

impl Iterator for HopGenerator {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        Some(self.rng.random_range(0..self.n_channels))
    }
}

/// The first `length` channel indices of the hopping pattern.
pub fn hop_sequence(fhss: &FhssConfig, length: usize) -> Vec<u32> {
    HopGenerator::new(fhss).take(length).collect()
}
