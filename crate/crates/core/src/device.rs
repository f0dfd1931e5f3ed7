//! Closed-form edge-device model standing in for hardware measurements.
//!
//! Per-frame latency depends on the detector, the accelerator flag and the
//! camera resolution. Rate, duty cycle, energy and accuracy over a fixed
//! measurement window follow from it:
//!
//! ```text
//! r_eff = min(fps, 1 / latency)
//! rate  = floor(r_eff * D)
//! duty  = min(1, r_eff * latency)
//! eng   = (P_idle + P_cam_base + P_cam_fps * fps + [P_tpu_idle] + P_active * duty) * D / 3600
//! acc   = a_model * res_acc_factor * (1 - (T - 0.4)^2 / 0.5)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::ObjectiveVector;
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("malformed device model: {0}")]
    Schema(String),
    #[error("invalid device model: {0}")]
    InvalidParams(String),
    #[error("search space lacks parameter `{0}` required by the device model")]
    MissingParameter(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown resolution `{0}`")]
    UnknownResolution(String),
    #[error("invalid configuration {conf}: {reason}")]
    InvalidConfiguration { conf: String, reason: String },
    #[error("evaluator failure: {0}")]
    Failed(String),
}

/// Anything that turns a configuration into an objective vector.
pub trait Evaluator: Sync {
    fn evaluate(&self, conf: &Configuration) -> Result<ObjectiveVector, EvalError>;
}

impl<F> Evaluator for F
where
    F: Fn(&Configuration) -> Result<ObjectiveVector, EvalError> + Sync,
{
    fn evaluate(&self, conf: &Configuration) -> Result<ObjectiveVector, EvalError> {
        self(conf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub accuracy: f64,
    pub cpu_latency: f64,
    pub tpu_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionEntry {
    pub name: String,
    pub latency_factor: f64,
    pub accuracy_factor: f64,
}

/// Power draw constants in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    pub idle: f64,
    pub camera_base: f64,
    pub camera_per_fps: f64,
    pub tpu_idle: f64,
    pub cpu_active: f64,
    pub tpu_active: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModelParams {
    pub window_seconds: f64,
    pub power: PowerModel,
    pub models: Vec<ModelEntry>,
    pub resolutions: Vec<ResolutionEntry>,
}

impl DeviceModelParams {
    pub fn parse(document: &str) -> Result<Self, EvalError> {
        let params: DeviceModelParams = toml::from_str(document).map_err(|e| EvalError::Schema(e.to_string()))?;
        params.check()?;
        Ok(params)
    }

    /// The bundled synthetic constants.
    pub fn synthetic() -> Self {
        DeviceModelParams::parse(crate::bundled::DEVICE_MODEL).expect("bundled device model is valid")
    }

    fn check(&self) -> Result<(), EvalError> {
        let bad = |msg: String| Err(EvalError::InvalidParams(msg));
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return bad(format!("window_seconds must be positive, got {}", self.window_seconds));
        }
        let p = &self.power;
        for (name, w) in [
            ("idle", p.idle),
            ("camera_base", p.camera_base),
            ("camera_per_fps", p.camera_per_fps),
            ("tpu_idle", p.tpu_idle),
            ("cpu_active", p.cpu_active),
            ("tpu_active", p.tpu_active),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("power `{name}` must be non-negative, got {w}"));
            }
        }
        let max_res_acc = self
            .resolutions
            .iter()
            .map(|r| r.accuracy_factor)
            .fold(0.0f64, f64::max);
        for m in &self.models {
            if !(m.cpu_latency > 0.0 && m.tpu_latency > 0.0) {
                return bad(format!("model `{}` needs positive latencies", m.name));
            }
            if !(m.accuracy >= 0.0 && m.accuracy * max_res_acc <= 1.0) {
                return bad(format!("model `{}` accuracy can leave [0, 1]", m.name));
            }
        }
        for r in &self.resolutions {
            if !(r.latency_factor > 0.0 && r.accuracy_factor >= 0.0) {
                return bad(format!("resolution `{}` has invalid factors", r.name));
            }
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelEntry, EvalError> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| EvalError::UnknownModel(name.to_string()))
    }

    pub fn resolution(&self, name: &str) -> Result<&ResolutionEntry, EvalError> {
        self.resolutions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| EvalError::UnknownResolution(name.to_string()))
    }
}

/// Accuracy multiplier of the detection threshold; peaks at 0.4.
pub fn threshold_accuracy_factor(threshold: f64) -> f64 {
    1.0 - (threshold - 0.4).powi(2) / 0.5
}

/// The settings the device model reads out of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSettings<'a> {
    pub resolution: &'a str,
    pub fps: f64,
    pub model: &'a str,
    pub threshold: f64,
    pub tpu: bool,
}

/// The device model bound to the parameter layout of a search space.
#[derive(Debug, Clone)]
pub struct SyntheticDevice {
    params: DeviceModelParams,
    positions: [usize; 5],
}

pub const DEVICE_PARAMETERS: [&str; 5] = ["resolution", "fps", "model", "threshold", "tpu"];

impl SyntheticDevice {
    pub fn new(params: DeviceModelParams, space: &SearchSpace) -> Result<Self, EvalError> {
        let mut positions = [0; 5];
        for (slot, name) in positions.iter_mut().zip(DEVICE_PARAMETERS) {
            *slot = space
                .position_of(name)
                .ok_or_else(|| EvalError::MissingParameter(name.to_string()))?;
        }
        Ok(SyntheticDevice { params, positions })
    }

    pub fn params(&self) -> &DeviceModelParams {
        &self.params
    }

    pub fn settings<'c>(&self, conf: &'c Configuration) -> Result<DeviceSettings<'c>, EvalError> {
        let invalid = |reason: &str| EvalError::InvalidConfiguration {
            conf: conf.to_string(),
            reason: reason.to_string(),
        };
        let value = |k: usize| conf.get(self.positions[k]).ok_or_else(|| invalid("too few values"));
        let resolution = value(0)?.as_str().ok_or_else(|| invalid("resolution must be text"))?;
        let fps = value(1)?.as_f64().ok_or_else(|| invalid("fps must be numeric"))?;
        let model = value(2)?.as_str().ok_or_else(|| invalid("model must be text"))?;
        let threshold = value(3)?.as_f64().ok_or_else(|| invalid("threshold must be numeric"))?;
        let tpu = value(4)?.as_bool().ok_or_else(|| invalid("tpu must be boolean"))?;
        if !(fps > 0.0) {
            return Err(invalid("fps must be positive"));
        }
        Ok(DeviceSettings {
            resolution,
            fps,
            model,
            threshold,
            tpu,
        })
    }

    /// Seconds per frame.
    pub fn latency(&self, conf: &Configuration) -> Result<f64, EvalError> {
        let s = self.settings(conf)?;
        self.latency_of(&s)
    }

    fn latency_of(&self, s: &DeviceSettings<'_>) -> Result<f64, EvalError> {
        let model = self.params.model(s.model)?;
        let res = self.params.resolution(s.resolution)?;
        let base = if s.tpu { model.tpu_latency } else { model.cpu_latency };
        Ok(base * res.latency_factor)
    }
}

impl Evaluator for SyntheticDevice {
    fn evaluate(&self, conf: &Configuration) -> Result<ObjectiveVector, EvalError> {
        let s = self.settings(conf)?;
        let latency = self.latency_of(&s)?;
        let p = &self.params.power;
        let window = self.params.window_seconds;

        let r_eff = s.fps.min(1.0 / latency);
        let rate = (r_eff * window).floor();
        let duty = (r_eff * latency).min(1.0);
        let tpu_idle = if s.tpu { p.tpu_idle } else { 0.0 };
        let active = if s.tpu { p.tpu_active } else { p.cpu_active };
        let watts = p.idle + (p.camera_base + p.camera_per_fps * s.fps) + tpu_idle + active * duty;
        let eng = watts * window / 3600.0;

        let model = self.params.model(s.model)?;
        let res = self.params.resolution(s.resolution)?;
        let acc = model.accuracy * res.accuracy_factor * threshold_accuracy_factor(s.threshold);

        Ok(ObjectiveVector { acc, eng, rate })
    }
}
