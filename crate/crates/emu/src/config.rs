//! JSON run configuration.
//!
//! ```json
//! {
//!   "sim": { "bandwidth_mhz": 20, "channel_model": "winner_b1" },
//!   "channel": { "shadowing_sigma_db": 3.0 },
//!   "scenario": { "n_vehicles": 200 },
//!   "output_dir": "out/winner-200"
//! }
//! ```
//!
//! Every `sim` field defaults to the reference parameter set. `channel`
//! fields left out take the defaults of the selected model. Exactly one of
//! `scenario` and `trace` must be given. Relative paths are resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use cv2x_core::channel::{ChannelModelConfig, FowlervilleParams, WinnerB1Params};
use cv2x_core::engine::EngineConfig;
use cv2x_core::metrics::DEFAULT_PER_BIN_M;
use cv2x_core::mobility::{generate_linear_scenario, ScenarioSpec, TrackSet};
use cv2x_core::phy::BlerTable;
use cv2x_core::{ChannelModelKind, Engine, SimParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ChannelModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shadowing_sigma_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_distance_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fowlerville: Option<FowlervilleParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<WinnerB1Params>,
}

impl From<ChannelModelConfig> for ChannelOverrides {
    fn from(c: ChannelModelConfig) -> Self {
        ChannelOverrides {
            model: Some(c.model),
            carrier_ghz: Some(c.carrier_ghz),
            shadowing_sigma_db: Some(c.shadowing_sigma_db),
            min_distance_m: Some(c.min_distance_m),
            fowlerville: Some(c.fowlerville),
            winner: Some(c.winner),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSource {
    pub path: PathBuf,
    pub hv_id: u32,
}

/// Real-time emission settings. A missing `real_time_factor` emits as fast
/// as the engine produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacingConfig {
    pub endpoint: Option<String>,
    pub real_time_factor: Option<f64>,
    pub max_lag_ms: u64,
    /// Simulated time the lag must stay above `max_lag_ms` before the run
    /// is aborted.
    pub violation_window_ms: u64,
}

impl Default for PacingConfig {
    fn default() -> Self {
        PacingConfig {
            endpoint: None,
            real_time_factor: None,
            max_lag_ms: 50,
            violation_window_ms: 1000,
        }
    }
}

impl PacingConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.real_time_factor {
            if !(f > 0.0) || f.is_nan() {
                return Err(Error::Config(format!("real_time_factor must be > 0, got {f}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub channel: ChannelOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSource>,
    /// `sinr_db,bler` file; the built-in MCS 5 curve when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bler_table: Option<PathBuf>,
    #[serde(default = "default_bin_width")]
    pub per_bin_width_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacing: Option<PacingConfig>,
}

fn default_bin_width() -> f64 {
    DEFAULT_PER_BIN_M
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sim: SimParams::default(),
            channel: ChannelOverrides::default(),
            scenario: Some(ScenarioSpec::default()),
            trace: None,
            bler_table: None,
            per_bin_width_m: DEFAULT_PER_BIN_M,
            output_dir: None,
            pacing: None,
        }
    }
}

impl RunConfig {
    /// Built-in scenario with the given size, bandwidth and channel model.
    pub fn scenario(n_vehicles: u32, bandwidth: cv2x_core::Bandwidth, model: ChannelModelKind) -> Self {
        let mut c = RunConfig::default();
        c.sim.bandwidth_mhz = bandwidth;
        c.sim.channel_model = model;
        c.scenario = Some(ScenarioSpec {
            n_vehicles,
            ..ScenarioSpec::default()
        });
        c
    }

    pub fn from_json(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_json(&text, base, path)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let abs = |p: &Path| -> Result<PathBuf> {
            let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            std::path::absolute(&joined).map_err(|e| Error::io(joined, e))
        };
        if let Some(t) = &mut self.trace {
            t.path = abs(&t.path)?;
        }
        if let Some(b) = &self.bler_table {
            self.bler_table = Some(abs(b)?);
        }
        if let Some(o) = &self.output_dir {
            self.output_dir = Some(abs(o)?);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scenario, &self.trace) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `scenario` or `trace`, not both".into())),
            (None, None) => return Err(Error::Config("one of `scenario` or `trace` is required".into())),
            (Some(s), None) => s.validate()?,
            (None, Some(_)) => {}
        }
        self.sim.validate()?;
        self.channel_config()?.validate()?;
        if !(self.per_bin_width_m > 0.0) {
            return Err(Error::Config("per_bin_width_m must be positive".into()));
        }
        if let Some(p) = &self.pacing {
            p.validate()?;
        }
        Ok(())
    }

    /// Reseeds both the engine and the scenario placement.
    pub fn apply_seed(&mut self, seed: u64) {
        self.sim.rng_seed = seed;
        if let Some(s) = &mut self.scenario {
            s.placement_seed = seed;
        }
    }

    pub fn channel_config(&self) -> Result<ChannelModelConfig> {
        let o = &self.channel;
        if let Some(m) = o.model {
            if m != self.sim.channel_model {
                return Err(Error::Config(format!(
                    "channel.model `{}` differs from sim.channel_model `{}`",
                    m.name(),
                    self.sim.channel_model.name()
                )));
            }
        }
        let mut c = ChannelModelConfig::for_model(self.sim.channel_model);
        if let Some(v) = o.carrier_ghz {
            c.carrier_ghz = v;
        }
        if let Some(v) = o.shadowing_sigma_db {
            c.shadowing_sigma_db = v;
        }
        if let Some(v) = o.min_distance_m {
            c.min_distance_m = v;
        }
        if let Some(v) = &o.fowlerville {
            c.fowlerville = v.clone();
        }
        if let Some(v) = &o.winner {
            c.winner = v.clone();
        }
        Ok(c)
    }

    pub fn bler(&self) -> Result<BlerTable> {
        match &self.bler_table {
            Some(p) => crate::bler::load_bler_csv(p, self.sim.mcs),
            None => Ok(crate::bler::default_table()),
        }
    }

    /// Tracks and the HV id.
    pub fn tracks(&self) -> Result<(TrackSet, u32)> {
        match (&self.scenario, &self.trace) {
            (Some(s), None) => Ok((generate_linear_scenario(s)?, s.hv_id)),
            (None, Some(t)) => Ok((crate::trace::load_trace_csv(&t.path)?, t.hv_id)),
            _ => {
                self.validate()?;
                unreachable!()
            }
        }
    }

    pub fn engine(&self) -> Result<Engine> {
        let (tracks, hv_id) = self.tracks()?;
        let mut ec = EngineConfig::new(self.sim.clone(), self.channel_config()?, self.bler()?, hv_id);
        ec.per_bin_width_m = self.per_bin_width_m;
        Ok(Engine::new(ec, tracks)?)
    }

    /// The same configuration with every default written out.
    pub fn effective(&self) -> Result<RunConfig> {
        let mut e = self.clone();
        e.channel = self.channel_config()?.into();
        Ok(e)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
