//! Scenario configuration: a sectioned TOML file whose keys default to the
//! reference metro line.
//!
//! ```toml
//! [signaling]
//! dt = 0.25
//! [jammer]
//! active = true
//! [sim]
//! master_seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelParams, FhssConfig, JammerConfig};
use crate::kinematics::KinematicParams;
use crate::signaling::SignalingConfig;

/// Master seed used when a configuration does not name one.
pub const DEFAULT_MASTER_SEED: u64 = 20_190_801;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {field}: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    /// Builds an `Invalid` error from a section name and a validator message
    /// that starts with the offending key.
    fn from_validator(section: &str, message: String) -> Self {
        let (key, rest) = message.split_once(' ').unwrap_or((message.as_str(), ""));
        ConfigError::Invalid {
            field: format!("{section}.{key}"),
            message: rest.to_string(),
        }
    }
}

/// The `[signaling]` section; the fixed-block hold is given in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalingSection {
    pub dt: f64,
    pub loss_threshold_n: u32,
    /// Maximum time a train remains in fixed-block mode (s).
    pub t_fb_max: f64,
    pub block_length: f64,
    pub block_threshold_bth: u32,
    pub station_spacing: f64,
    pub dwell_time: f64,
    pub num_stations: u32,
}

impl Default for SignalingSection {
    fn default() -> Self {
        let cfg = SignalingConfig::<f64>::default();
        Self {
            dt: cfg.dt,
            loss_threshold_n: cfg.loss_threshold_n,
            t_fb_max: 30.0,
            block_length: cfg.block_length,
            block_threshold_bth: cfg.block_threshold_bth,
            station_spacing: cfg.station_spacing,
            dwell_time: cfg.dwell_time,
            num_stations: cfg.num_stations,
        }
    }
}

impl SignalingSection {
    pub fn to_config(&self) -> Result<SignalingConfig<f64>, ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::from_validator(
                "signaling",
                format!("dt must be > 0 (got {})", self.dt),
            ));
        }
        if !(self.t_fb_max > 0.0 && self.t_fb_max.is_finite()) {
            return Err(ConfigError::from_validator(
                "signaling",
                format!("t_fb_max must be > 0 (got {})", self.t_fb_max),
            ));
        }
        let cfg = SignalingConfig {
            dt: self.dt,
            loss_threshold_n: self.loss_threshold_n,
            fbs_hold_slots: (self.t_fb_max / self.dt).round().max(1.0) as u32,
            block_length: self.block_length,
            block_threshold_bth: self.block_threshold_bth,
            station_spacing: self.station_spacing,
            dwell_time: self.dwell_time,
            num_stations: self.num_stations,
        };
        cfg.validate()
            .map_err(|m| ConfigError::from_validator("signaling", m))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandSource {
    #[default]
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandConfig {
    pub source: DemandSource,
    /// Passenger CSV, relative paths resolved against the config file.
    pub path: Option<PathBuf>,
    /// Synthetic tap-in rate at each origin station (passengers/s).
    pub rate_per_station: f64,
    /// Synthetic demand horizon (s); defaults to the simulated duration.
    pub duration: Option<f64>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            source: DemandSource::Synthetic,
            path: None,
            rate_per_station: 0.05,
            duration: None,
        }
    }
}

impl DemandConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate_per_station >= 0.0 && self.rate_per_station.is_finite()) {
            return Err(format!(
                "rate_per_station must be >= 0 (got {})",
                self.rate_per_station
            ));
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(format!("duration must be >= 0 (got {d})"));
            }
        }
        if self.source == DemandSource::File && self.path.is_none() {
            return Err("path is required when source = \"file\"".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Interval between dispatches from station 1 (s).
    pub dispatch_interval: f64,
    /// Dispatch window (s); no train departs at or after this time.
    pub sim_duration: f64,
    pub train_capacity: u32,
    pub master_seed: u64,
    /// Extra time after the dispatch window for trains to finish (s).
    pub max_runout: f64,
    /// Wall-clock time of the epoch, in seconds after midnight.
    pub epoch_offset_s: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dispatch_interval: 90.0,
            sim_duration: 7200.0,
            train_capacity: 400,
            master_seed: DEFAULT_MASTER_SEED,
            max_runout: 14_400.0,
            epoch_offset_s: 8.0 * 3600.0,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dispatch_interval > 0.0 && self.dispatch_interval.is_finite()) {
            return Err(format!(
                "dispatch_interval must be > 0 (got {})",
                self.dispatch_interval
            ));
        }
        if !(self.sim_duration > 0.0 && self.sim_duration.is_finite()) {
            return Err(format!(
                "sim_duration must be > 0 (got {})",
                self.sim_duration
            ));
        }
        if self.train_capacity < 1 {
            return Err("train_capacity must be >= 1".into());
        }
        if !(self.max_runout >= 0.0 && self.max_runout.is_finite()) {
            return Err(format!("max_runout must be >= 0 (got {})", self.max_runout));
        }
        if !self.epoch_offset_s.is_finite() {
            return Err("epoch_offset_s must be finite".into());
        }
        Ok(())
    }
}

/// On-disk form of a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub signaling: SignalingSection,
    pub kinematics: KinematicParams<f64>,
    pub channel: ChannelParams<f64>,
    pub jammer: JammerConfig<f64>,
    pub fhss: FhssConfig,
    pub demand: DemandConfig,
    pub sim: SimSettings,
}

/// Complete, validated description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub signaling: SignalingConfig<f64>,
    pub kinematics: KinematicParams<f64>,
    pub channel: ChannelParams<f64>,
    pub jammer: JammerConfig<f64>,
    pub fhss: FhssConfig,
    pub demand: DemandConfig,
    pub sim: SimSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ConfigFile::default()
            .into_scenario(None)
            .expect("defaults are valid")
    }
}

impl ConfigFile {
    pub fn parse(text: &str, path_label: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path_label.to_string(),
            message: e.to_string(),
        })
    }

    /// Validates every section and resolves the demand path against `base_dir`.
    pub fn into_scenario(self, base_dir: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
        let signaling = self.signaling.to_config()?;
        self.kinematics
            .validate()
            .map_err(|m| ConfigError::from_validator("kinematics", m))?;
        self.channel
            .validate()
            .map_err(|m| ConfigError::from_validator("channel", m))?;
        self.jammer
            .validate(signaling.line_length() / 1000.0)
            .map_err(|m| ConfigError::from_validator("jammer", m))?;
        self.fhss
            .validate()
            .map_err(|m| ConfigError::from_validator("fhss", m))?;
        self.demand
            .validate()
            .map_err(|m| ConfigError::from_validator("demand", m))?;
        self.sim
            .validate()
            .map_err(|m| ConfigError::from_validator("sim", m))?;
        let mut demand = self.demand;
        if let (Some(base), Some(p)) = (base_dir, demand.path.as_ref()) {
            if p.is_relative() {
                demand.path = Some(base.join(p));
            }
        }
        Ok(ScenarioConfig {
            signaling,
            kinematics: self.kinematics,
            channel: self.channel,
            jammer: self.jammer,
            fhss: self.fhss,
            demand,
            sim: self.sim,
        })
    }
}

impl ScenarioConfig {
    /// Parses and validates TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        ConfigFile::parse(text, "<string>")?.into_scenario(None)
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ConfigFile::parse(&text, &path.display().to_string())?.into_scenario(path.parent())
    }

    /// The same scenario with the jammer switched off.
    pub fn baseline(&self) -> Self {
        let mut cfg = self.clone();
        cfg.jammer.active = false;
        cfg
    }

    /// Number of trains dispatched within the dispatch window.
    pub fn dispatch_count(&self) -> usize {
        let n = (self.sim.sim_duration / self.sim.dispatch_interval).ceil();
        let n = n.max(0.0) as usize;
        // Exclude a dispatch landing exactly on the window end.
        if n > 0 && (n - 1) as f64 * self.sim.dispatch_interval >= self.sim.sim_duration {
            n - 1
        } else {
            n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_line() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.signaling.fbs_hold_slots, 120);
        assert_eq!(cfg.signaling.loss_threshold_n, 8);
        assert_eq!(cfg.kinematics.accel_alpha, 0.7);
        assert_eq!(cfg.channel.c_rptr, 42.5);
        assert_eq!(cfg.jammer.position, 0.2);
        assert_eq!(cfg.sim.train_capacity, 400);
        assert_eq!(cfg.sim.master_seed, DEFAULT_MASTER_SEED);
        assert_eq!(cfg.dispatch_count(), 80);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "[signaling]\nt_fb_max = 10.0\n[channel]\nmedium = \"free\"\n[jammer]\nactive = true\n",
        )
        .unwrap();
        assert_eq!(cfg.signaling.fbs_hold_slots, 40);
        assert_eq!(cfg.channel.medium, crate::channel::Medium::Free);
        assert!(cfg.jammer.active);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = ScenarioConfig::from_toml_str("[signaling]\ndt = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("signaling.dt"), "{err}");
        let err = ScenarioConfig::from_toml_str("[sim]\ndispatch_interval = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("sim.dispatch_interval"), "{err}");
        let err =
            ScenarioConfig::from_toml_str("[kinematics]\ndecel_emergency = 0.1\n").unwrap_err();
        assert!(
            err.to_string().contains("kinematics.decel_emergency"),
            "{err}"
        );
        let err = ScenarioConfig::from_toml_str("[jammer]\nposition = 500.0\n").unwrap_err();
        assert!(err.to_string().contains("jammer.position"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml_str("[signaling]\ndtt = 0.25\n").unwrap_err();
        assert!(err.to_string().contains("dtt"), "{err}");
        let err = ScenarioConfig::from_toml_str("[bogus]\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn file_demand_needs_path() {
        let err = ScenarioConfig::from_toml_str("[demand]\nsource = \"file\"\n").unwrap_err();
        assert!(err.to_string().contains("demand.path"), "{err}");
    }

    #[test]
    fn relative_demand_path_resolves_against_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        std::fs::write(
            &path,
            "[demand]\nsource = \"file\"\npath = \"riders.csv\"\n",
        )
        .unwrap();
        let cfg = ScenarioConfig::load(&path).unwrap();
        assert_eq!(cfg.demand.path.unwrap(), dir.path().join("riders.csv"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = ScenarioConfig::load(Path::new("/no/such/scenario.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
        assert!(err.to_string().contains("/no/such/scenario.toml"));
    }

    #[test]
    fn dispatch_window_is_half_open() {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.sim_duration = 180.0;
        assert_eq!(cfg.dispatch_count(), 2);
        cfg.sim.sim_duration = 180.5;
        assert_eq!(cfg.dispatch_count(), 3);
    }
}
