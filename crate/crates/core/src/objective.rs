//! Objective definitions and evaluated objective vectors.

use serde::{Deserialize, Serialize};

pub const OBJECTIVE_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Maps a raw value onto the minimization-canonical axis.
    pub fn to_min(self, value: f64) -> f64 {
        match self {
            Direction::Maximize => -value,
            Direction::Minimize => value,
        }
    }

    /// `true` when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        self.to_min(a) < self.to_min(b)
    }
}

/// Directions of (accuracy, energy, rate).
pub const DEFAULT_DIRECTIONS: [Direction; OBJECTIVE_COUNT] = [Direction::Maximize, Direction::Minimize, Direction::Maximize];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    pub direction: Direction,
    pub units: String,
}

pub fn default_objectives() -> [ObjectiveSpec; OBJECTIVE_COUNT] {
    [
        ObjectiveSpec {
            name: "acc".into(),
            direction: Direction::Maximize,
            units: "mAP".into(),
        },
        ObjectiveSpec {
            name: "eng".into(),
            direction: Direction::Minimize,
            units: "Wh".into(),
        },
        ObjectiveSpec {
            name: "rate".into(),
            direction: Direction::Maximize,
            units: "frames/window".into(),
        },
    ]
}

/// Accuracy (mAP), energy (Wh per window) and processed frames per window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub acc: f64,
    pub eng: f64,
    pub rate: f64,
}

impl ObjectiveVector {
    pub fn new(acc: f64, eng: f64, rate: f64) -> Self {
        ObjectiveVector { acc, eng, rate }
    }

    pub fn to_array(&self) -> [f64; OBJECTIVE_COUNT] {
        [self.acc, self.eng, self.rate]
    }

    pub fn from_array(v: [f64; OBJECTIVE_COUNT]) -> Self {
        ObjectiveVector::new(v[0], v[1], v[2])
    }

    pub fn is_valid(&self) -> bool {
        self.acc.is_finite()
            && self.eng.is_finite()
            && self.rate.is_finite()
            && (0.0..=1.0).contains(&self.acc)
            && self.eng >= 0.0
            && self.rate >= 0.0
            && self.rate.fract() == 0.0
    }
}
