//! Operation-mode selection by threshold filtering and weighted gray
//! relational analysis.
//!
//! For a filtered front with raw objective matrix `f` (members x objectives):
//!
//! 1. min-max normalize each column, larger-is-better for maximized
//!    objectives and smaller-is-better for minimized ones;
//! 2. take the column-wise maximum as the reference network `F+`;
//! 3. with `d_ij = |F+_j - F_ij|` and global extremes `d_min`, `d_max`, grade
//!    each member as `sum_j w_j * (d_min + zeta * d_max) / (d_ij + zeta * d_max)`.
//!
//! The member with the largest grade wins; equal grades go to the lowest
//! canonical index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::{default_objectives, Direction, ObjectiveVector, OBJECTIVE_COUNT};
use crate::pareto::{Directions, ParetoFront};
use crate::space::Configuration;
use crate::store::Trial;

pub const DEFAULT_ZETA: f64 = 1.0;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WgraError {
    #[error("mode `{mode}`: weights must be non-negative and sum to 1 (sum is {sum})")]
    Weights { mode: String, sum: f64 },
    #[error("mode `{mode}`: thresholds must be finite and non-negative")]
    Thresholds { mode: String },
    #[error("no front member survives the thresholds; tightest is {objective} = {threshold}")]
    EmptyAfterFilter { objective: String, threshold: f64 },
    #[error("empty front")]
    EmptyFront,
    #[error("non-finite objective value in the front")]
    NonFinite,
    #[error("distinguishing coefficient {0} must lie in (0, 1]")]
    Zeta(f64),
    #[error("malformed mode-spec document: {0}")]
    Schema(String),
    #[error("duplicate mode name `{0}`")]
    DuplicateMode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub name: String,
    pub weights: [f64; OBJECTIVE_COUNT],
    /// Floors for maximized objectives, ceilings for minimized ones; 0 disables.
    pub thresholds: [f64; OBJECTIVE_COUNT],
}

impl ModeSpec {
    pub fn new(name: impl Into<String>, weights: [f64; OBJECTIVE_COUNT], thresholds: [f64; OBJECTIVE_COUNT]) -> Result<Self, WgraError> {
        let name = name.into();
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(WgraError::Weights { mode: name, sum });
        }
        if thresholds.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(WgraError::Thresholds { mode: name });
        }
        Ok(ModeSpec { name, weights, thresholds })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeDocument {
    modes: Vec<ModeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeEntry {
    name: String,
    weights: [f64; OBJECTIVE_COUNT],
    thresholds: [f64; OBJECTIVE_COUNT],
}

/// Parses a TOML mode-spec document. Weights are divided by their sum, so
/// triples written as (0.33, 0.33, 0.33) are accepted; this cannot change any
/// selection because grades scale by the same constant.
pub fn parse_mode_specs(document: &str) -> Result<Vec<ModeSpec>, WgraError> {
    let doc: ModeDocument = toml::from_str(document).map_err(|e| WgraError::Schema(e.to_string()))?;
    let mut specs: Vec<ModeSpec> = Vec::with_capacity(doc.modes.len());
    for entry in doc.modes {
        if specs.iter().any(|s| s.name == entry.name) {
            return Err(WgraError::DuplicateMode(entry.name));
        }
        let sum: f64 = entry.weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(WgraError::Weights { mode: entry.name, sum });
        }
        let weights = entry.weights.map(|w| w / sum);
        specs.push(ModeSpec::new(entry.name, weights, entry.thresholds)?);
    }
    Ok(specs)
}

/// The bundled pedestrian-detection mode specs.
pub fn default_mode_specs() -> Vec<ModeSpec> {
    parse_mode_specs(crate::bundled::PEDESTRIAN_MODES).expect("bundled mode specs are valid")
}

/// The configuration chosen for one operation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationMode {
    pub spec: ModeSpec,
    pub chosen: Configuration,
    pub objectives: ObjectiveVector,
    pub grg: f64,
}

impl OperationMode {
    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

fn passes(value: f64, threshold: f64, direction: Direction) -> bool {
    if threshold == 0.0 {
        return true;
    }
    match direction {
        Direction::Maximize => value >= threshold,
        Direction::Minimize => value <= threshold,
    }
}

pub fn satisfies_thresholds(v: &ObjectiveVector, thresholds: &[f64; OBJECTIVE_COUNT], directions: &Directions) -> bool {
    let raw = v.to_array();
    (0..OBJECTIVE_COUNT).all(|j| passes(raw[j], thresholds[j], directions[j]))
}

/// Drops members below a floor (maximized) or above a ceiling (minimized).
pub fn filter_front(front: &ParetoFront, thresholds: &[f64; OBJECTIVE_COUNT], directions: &Directions) -> Result<ParetoFront, WgraError> {
    let kept: Vec<Trial> = front
        .members()
        .iter()
        .filter(|t| satisfies_thresholds(&t.objectives, thresholds, directions))
        .cloned()
        .collect();
    if kept.is_empty() {
        // name the threshold that rejects the most members on its own
        let names = default_objectives();
        let (j, _) = (0..OBJECTIVE_COUNT)
            .filter(|&j| thresholds[j] != 0.0)
            .map(|j| {
                let rejected = front
                    .members()
                    .iter()
                    .filter(|t| !passes(t.objectives.to_array()[j], thresholds[j], directions[j]))
                    .count();
                (j, rejected)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .ok_or(WgraError::EmptyFront)?;
        return Err(WgraError::EmptyAfterFilter {
            objective: names[j].name.clone(),
            threshold: thresholds[j],
        });
    }
    Ok(ParetoFront::from_members(kept, *directions))
}

/// Column-wise min-max normalization; zero-range columns map to 1.
pub fn normalize(raw: &[[f64; OBJECTIVE_COUNT]], directions: &Directions) -> Result<Vec<[f64; OBJECTIVE_COUNT]>, WgraError> {
    if raw.is_empty() {
        return Err(WgraError::EmptyFront);
    }
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(WgraError::NonFinite);
    }
    let mut out = vec![[0.0; OBJECTIVE_COUNT]; raw.len()];
    for j in 0..OBJECTIVE_COUNT {
        let lo = raw.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        for (row, r) in out.iter_mut().zip(raw) {
            row[j] = if range == 0.0 {
                1.0
            } else {
                match directions[j] {
                    Direction::Maximize => (r[j] - lo) / range,
                    Direction::Minimize => (hi - r[j]) / range,
                }
            };
        }
    }
    Ok(out)
}

pub fn reference_network(normalized: &[[f64; OBJECTIVE_COUNT]]) -> [f64; OBJECTIVE_COUNT] {
    std::array::from_fn(|j| normalized.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
}

/// Weighted gray relational grade of every row.
pub fn grg(
    normalized: &[[f64; OBJECTIVE_COUNT]],
    reference: &[f64; OBJECTIVE_COUNT],
    weights: &[f64; OBJECTIVE_COUNT],
    zeta: f64,
) -> Result<Vec<f64>, WgraError> {
    if normalized.is_empty() {
        return Err(WgraError::EmptyFront);
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(WgraError::Zeta(zeta));
    }
    let deltas: Vec<[f64; OBJECTIVE_COUNT]> = normalized
        .iter()
        .map(|row| std::array::from_fn(|j| (reference[j] - row[j]).abs()))
        .collect();
    let d_min = deltas.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let d_max = deltas.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(deltas
        .iter()
        .map(|d| {
            (0..OBJECTIVE_COUNT)
                .map(|j| {
                    // every row equals the reference
                    let coefficient = if d_max == 0.0 {
                        1.0
                    } else {
                        (d_min + zeta * d_max) / (d[j] + zeta * d_max)
                    };
                    weights[j] * coefficient
                })
                .sum()
        })
        .collect())
}

/// Runs normalization, reference and grading on a raw matrix and returns
/// the winning row and its grade. `keys` break ties (lowest wins).
pub fn select_from_matrix(
    raw: &[[f64; OBJECTIVE_COUNT]],
    keys: &[usize],
    weights: &[f64; OBJECTIVE_COUNT],
    directions: &Directions,
    zeta: f64,
) -> Result<(usize, f64), WgraError> {
    let normalized = normalize(raw, directions)?;
    let reference = reference_network(&normalized);
    let grades = grg(&normalized, &reference, weights, zeta)?;
    let best = (0..grades.len())
        .max_by(|&a, &b| grades[a].total_cmp(&grades[b]).then(keys[b].cmp(&keys[a])))
        .expect("non-empty");
    Ok((best, grades[best]))
}

pub fn select_mode_config(front: &ParetoFront, spec: &ModeSpec, zeta: f64) -> Result<OperationMode, WgraError> {
    let directions = front.directions();
    let filtered = filter_front(front, &spec.thresholds, directions)?;
    let raw: Vec<_> = filtered.members().iter().map(|t| t.objectives.to_array()).collect();
    let keys: Vec<_> = filtered.members().iter().map(|t| t.index).collect();
    let (best, grade) = select_from_matrix(&raw, &keys, &spec.weights, directions, zeta)?;
    let winner = &filtered.members()[best];
    Ok(OperationMode {
        spec: spec.clone(),
        chosen: winner.config.clone(),
        objectives: winner.objectives,
        grg: grade,
    })
}

pub fn select_modes(front: &ParetoFront, specs: &[ModeSpec], zeta: f64) -> Result<Vec<OperationMode>, WgraError> {
    specs.iter().map(|s| select_mode_config(front, s, zeta)).collect()
}
