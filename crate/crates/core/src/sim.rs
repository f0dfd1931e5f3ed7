//! Replays static and self-adaptive subjects over a scenario.
//!
//! Frames are grouped into fixed windows. Each window is charged the active
//! configuration's per-window energy and frame rate, pro-rated from the device
//! model's measurement window. Detection is simulated by binomial thinning of
//! the true count with recall `clamp(1.25 * acc, 0, 1)`.
//!
//! The adaptive subject knows the recall of its active configuration and by
//! default divides the detected mean by it before feeding the state machine,
//! so guards are stated in pedestrians rather than in detections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{EvalError, Evaluator, SyntheticDevice};
use crate::fsm::{FsmError, FsmRuntime, WindowObservation};
use crate::objective::ObjectiveVector;
use crate::scenario::{Scenario, FRAMES_PER_HOUR};
use crate::space::Configuration;
use crate::wgra::OperationMode;

const DETECTION_STREAM: u64 = 2;
pub const RECALL_PER_MAP: f64 = 1.25;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error("window of {window} frames does not tile {total} frames")]
    Tiling { window: usize, total: usize },
    #[error("frame cadence must be positive, got {0}")]
    Cadence(f64),
    #[error("comparison needs at least two reports")]
    TooFewReports,
    #[error("report `{subject}` was run on scenario {found}, expected {expected}")]
    ScenarioMismatch {
        subject: String,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub window_frames: usize,
    /// Seconds between scenario frames.
    pub frame_cadence_s: f64,
    /// Energy charged whenever the adaptive subject switches mode.
    pub switch_energy_wh: f64,
    /// Observe `detected / recall` instead of the raw detected mean.
    pub calibrate_observations: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            window_frames: FRAMES_PER_HOUR,
            frame_cadence_s: 2.0,
            switch_energy_wh: 0.0,
            calibrate_observations: true,
        }
    }
}

impl SimConfig {
    fn check(&self, scenario: &Scenario) -> Result<(), SimError> {
        let total = scenario.frames.len();
        if self.window_frames == 0 || !total.is_multiple_of(self.window_frames) {
            return Err(SimError::Tiling {
                window: self.window_frames,
                total,
            });
        }
        if !(self.frame_cadence_s > 0.0) {
            return Err(SimError::Cadence(self.frame_cadence_s));
        }
        Ok(())
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_frames as f64 * self.frame_cadence_s
    }
}

pub fn recall(acc: f64) -> f64 {
    (RECALL_PER_MAP * acc).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_index: u64,
    pub mode: String,
    pub energy_wh: f64,
    pub frames_processed: f64,
    pub mean_true_count: f64,
    pub mean_detected_count: f64,
    /// Model accuracy of the active configuration.
    pub accuracy: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub total_energy_wh: f64,
    pub total_frames_processed: f64,
    /// Mean processed frames per window.
    pub mean_fpr: f64,
    /// Frame-weighted mean of the active configurations' mAP.
    pub accuracy_proxy: f64,
}

impl Aggregates {
    pub fn fold(windows: &[WindowRecord]) -> Self {
        let total_energy_wh = windows.iter().map(|w| w.energy_wh).sum();
        let total_frames_processed: f64 = windows.iter().map(|w| w.frames_processed).sum();
        let frames: usize = windows.iter().map(|w| w.frames).sum();
        let weighted_acc: f64 = windows.iter().map(|w| w.accuracy * w.frames as f64).sum();
        Aggregates {
            total_energy_wh,
            total_frames_processed,
            mean_fpr: if windows.is_empty() {
                0.0
            } else {
                total_frames_processed / windows.len() as f64
            },
            accuracy_proxy: if frames == 0 { 0.0 } else { weighted_acc / frames as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub subject: String,
    pub adaptive: bool,
    pub scenario: String,
    pub scenario_seed: u64,
    pub windows: Vec<WindowRecord>,
    pub aggregates: Aggregates,
}

impl SimulationReport {
    fn new(subject: String, adaptive: bool, scenario: &Scenario, windows: Vec<WindowRecord>) -> Self {
        SimulationReport {
            subject,
            adaptive,
            scenario: scenario.name.clone(),
            scenario_seed: scenario.seed,
            aggregates: Aggregates::fold(&windows),
            windows,
        }
    }

    pub fn mode_timeline(&self) -> Vec<&str> {
        self.windows.iter().map(|w| w.mode.as_str()).collect()
    }

    fn scenario_label(&self) -> String {
        format!("{}#{}", self.scenario, self.scenario_seed)
    }
}

struct Detector {
    rng: ChaCha8Rng,
}

impl Detector {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DETECTION_STREAM);
        Detector { rng }
    }

    /// Binomial thinning of each true count.
    fn window(&mut self, truth: &[u8], recall: f64) -> (f64, f64) {
        let mut true_sum = 0u64;
        let mut detected_sum = 0u64;
        for &count in truth {
            true_sum += count as u64;
            for _ in 0..count {
                if self.rng.gen_bool(recall) {
                    detected_sum += 1;
                }
            }
        }
        let n = truth.len() as f64;
        (true_sum as f64 / n, detected_sum as f64 / n)
    }
}

struct Charge {
    objectives: ObjectiveVector,
    scale: f64,
}

impl Charge {
    fn new(device: &SyntheticDevice, conf: &Configuration, config: &SimConfig) -> Result<Self, SimError> {
        Ok(Charge {
            objectives: device.evaluate(conf)?,
            scale: config.window_seconds() / device.params().window_seconds,
        })
    }

    fn record(&self, window_index: u64, mode: &str, truth: &[u8], mean_true: f64, mean_detected: f64) -> WindowRecord {
        WindowRecord {
            window_index,
            mode: mode.to_string(),
            energy_wh: self.objectives.eng * self.scale,
            frames_processed: (self.objectives.rate * self.scale).floor(),
            mean_true_count: mean_true,
            mean_detected_count: mean_detected,
            accuracy: self.objectives.acc,
            frames: truth.len(),
        }
    }
}

/// Runs one operation mode for the whole scenario.
pub fn simulate_static(
    scenario: &Scenario,
    mode: &OperationMode,
    device: &SyntheticDevice,
    seed: u64,
    config: &SimConfig,
) -> Result<SimulationReport, SimError> {
    config.check(scenario)?;
    let charge = Charge::new(device, &mode.chosen, config)?;
    let p = recall(charge.objectives.acc);
    let mut detector = Detector::new(seed);
    let windows = scenario
        .frames
        .chunks(config.window_frames)
        .enumerate()
        .map(|(w, truth)| {
            let (mean_true, mean_detected) = detector.window(truth, p);
            charge.record(w as u64, mode.name(), truth, mean_true, mean_detected)
        })
        .collect();
    Ok(SimulationReport::new(mode.name().to_string(), false, scenario, windows))
}

/// Runs the self-adaptive subject. Each window is observed and charged under
/// the current mode; the FSM then steps, so a switch takes effect next window.
pub fn simulate_adaptive(
    scenario: &Scenario,
    fsm: &mut FsmRuntime,
    device: &SyntheticDevice,
    seed: u64,
    config: &SimConfig,
    subject: &str,
) -> Result<SimulationReport, SimError> {
    config.check(scenario)?;
    let mut detector = Detector::new(seed);
    let mut windows = Vec::with_capacity(scenario.frames.len() / config.window_frames);
    for (w, truth) in scenario.frames.chunks(config.window_frames).enumerate() {
        let mode = fsm.current_mode();
        let charge = Charge::new(device, &mode.chosen, config)?;
        let p = recall(charge.objectives.acc);
        let (mean_true, mean_detected) = detector.window(truth, p);
        let mut record = charge.record(w as u64, fsm.current_state(), truth, mean_true, mean_detected);
        let observed = if config.calibrate_observations && p > 0.0 {
            mean_detected / p
        } else {
            mean_detected
        };
        let obs = WindowObservation {
            window_index: w as u64,
            mean_detected_count: observed,
            frames_in_window: truth.len() as u32,
        };
        if fsm.step(&obs)?.1.is_some() {
            record.energy_wh += config.switch_energy_wh;
        }
        windows.push(record);
    }
    Ok(SimulationReport::new(subject.to_string(), true, scenario, windows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub subject: String,
    pub aggregates: Aggregates,
}

/// Relative differences of the first (subject) report against another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub subject: String,
    pub other: String,
    /// (other - subject) / other on total energy.
    pub energy_saving: f64,
    /// (subject - other) / other on total processed frames.
    pub fpr_gain: f64,
    /// (subject - other) / other on the accuracy proxy.
    pub accuracy_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPlotRow {
    pub subject: String,
    pub block: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    pub scenario_seed: u64,
    pub rows: Vec<AggregateRow>,
    pub deltas: Vec<DeltaRow>,
    pub boxplots: Vec<BoxPlotRow>,
}

fn relative(numerator: f64, base: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else if base == 0.0 {
        numerator.signum() * f64::INFINITY
    } else {
        numerator / base
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const DEFAULT_BLOCK_HOURS: usize = 3;

fn boxplots(report: &SimulationReport, block_hours: usize) -> Vec<BoxPlotRow> {
    let mut blocks: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    let mut frame = 0;
    for w in &report.windows {
        let hour = frame / FRAMES_PER_HOUR;
        blocks.entry(hour / block_hours).or_default().push(w.energy_wh);
        frame += w.frames;
    }
    blocks
        .into_iter()
        .map(|(b, mut values)| {
            values.sort_by(f64::total_cmp);
            BoxPlotRow {
                subject: report.subject.clone(),
                block: format!("{:02}:00-{:02}:00", b * block_hours, ((b + 1) * block_hours).min(24)),
                min: values[0],
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
                max: values[values.len() - 1],
            }
        })
        .collect()
}

/// Compares the first report (the subject) with every other one.
pub fn compare(reports: &[SimulationReport], block_hours: usize) -> Result<ComparisonTable, SimError> {
    let (subject, others) = reports.split_first().ok_or(SimError::TooFewReports)?;
    if others.is_empty() {
        return Err(SimError::TooFewReports);
    }
    for r in others {
        if r.scenario != subject.scenario || r.scenario_seed != subject.scenario_seed {
            return Err(SimError::ScenarioMismatch {
                subject: r.subject.clone(),
                expected: subject.scenario_label(),
                found: r.scenario_label(),
            });
        }
    }
    let s = &subject.aggregates;
    let deltas = others
        .iter()
        .map(|r| {
            let o = &r.aggregates;
            DeltaRow {
                subject: subject.subject.clone(),
                other: r.subject.clone(),
                energy_saving: relative(o.total_energy_wh - s.total_energy_wh, o.total_energy_wh),
                fpr_gain: relative(s.total_frames_processed - o.total_frames_processed, o.total_frames_processed),
                accuracy_delta: relative(s.accuracy_proxy - o.accuracy_proxy, o.accuracy_proxy),
            }
        })
        .collect();
    Ok(ComparisonTable {
        scenario: subject.scenario.clone(),
        scenario_seed: subject.scenario_seed,
        rows: reports
            .iter()
            .map(|r| AggregateRow {
                subject: r.subject.clone(),
                aggregates: r.aggregates,
            })
            .collect(),
        deltas,
        boxplots: reports.iter().flat_map(|r| boxplots(r, block_hours.max(1))).collect(),
    })
}
