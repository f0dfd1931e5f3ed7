//! Append-only trial memory with deduplication by canonical index.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{EvalError, Evaluator};
use crate::objective::ObjectiveVector;
use crate::space::{Configuration, SearchSpace, SpaceError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("evaluator returned an invalid objective vector {0:?}")]
    InvalidObjectives(ObjectiveVector),
    #[error("trial log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error("trial log I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerTag {
    Nsga2,
    Random,
    Oracle,
}

impl fmt::Display for SamplerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerTag::Nsga2 => "nsga2",
            SamplerTag::Random => "random",
            SamplerTag::Oracle => "oracle",
        })
    }
}

impl FromStr for SamplerTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nsga2" => Ok(SamplerTag::Nsga2),
            "random" => Ok(SamplerTag::Random),
            "oracle" => Ok(SamplerTag::Oracle),
            other => Err(format!("unknown sampler `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub config: Configuration,
    pub objectives: ObjectiveVector,
    pub sampler_tag: SamplerTag,
    pub seed: u64,
    pub sequence_number: u64,
    /// Canonical index of `config`; internal, never serialized.
    pub index: usize,
}

/// One line of the trial log. Field order is the serialization order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub seq: u64,
    pub sampler: SamplerTag,
    pub seed: u64,
    pub config: Configuration,
    pub acc: f64,
    pub eng: f64,
    pub rate: f64,
}

impl From<&Trial> for TrialRecord {
    fn from(t: &Trial) -> Self {
        TrialRecord {
            seq: t.sequence_number,
            sampler: t.sampler_tag,
            seed: t.seed,
            config: t.config.clone(),
            acc: t.objectives.acc,
            eng: t.objectives.eng,
            rate: t.objectives.rate,
        }
    }
}

impl TrialRecord {
    pub fn into_trial(self, space: &SearchSpace) -> Result<Trial, SpaceError> {
        let index = space.canonical_index(&self.config)?;
        Ok(Trial {
            config: self.config,
            objectives: ObjectiveVector::new(self.acc, self.eng, self.rate),
            sampler_tag: self.sampler,
            seed: self.seed,
            sequence_number: self.seq,
            index,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrialStore {
    space: SearchSpace,
    trials: Vec<Trial>,
    by_index: HashMap<usize, usize>,
    next_sequence: u64,
}

impl TrialStore {
    pub fn new(space: SearchSpace) -> Self {
        TrialStore {
            space,
            trials: Vec::new(),
            by_index: HashMap::new(),
            next_sequence: 0,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn unique_trials(&self) -> usize {
        self.by_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.by_index.contains_key(&index)
    }

    pub fn get(&self, conf: &Configuration) -> Option<&Trial> {
        let index = self.space.canonical_index(conf).ok()?;
        self.by_index.get(&index).map(|&i| &self.trials[i])
    }

    /// Evaluates `conf` unless it has been seen; a repeat returns the cached
    /// trial with `was_new = false` and does not consume budget.
    pub fn record(
        &mut self,
        conf: &Configuration,
        sampler_tag: SamplerTag,
        seed: u64,
        evaluator: &dyn Evaluator,
    ) -> Result<(Trial, bool), StoreError> {
        let index = self.space.canonical_index(conf)?;
        if let Some(&i) = self.by_index.get(&index) {
            return Ok((self.trials[i].clone(), false));
        }
        let objectives = evaluator.evaluate(conf)?;
        self.insert(index, conf.clone(), objectives, sampler_tag, seed)
            .map(|t| (t, true))
    }

    /// Records an objective vector computed elsewhere (e.g. by a parallel
    /// evaluation pass). Behaves like [`record`](Self::record) for duplicates.
    pub fn record_evaluated(
        &mut self,
        conf: &Configuration,
        objectives: ObjectiveVector,
        sampler_tag: SamplerTag,
        seed: u64,
    ) -> Result<(Trial, bool), StoreError> {
        let index = self.space.canonical_index(conf)?;
        if let Some(&i) = self.by_index.get(&index) {
            return Ok((self.trials[i].clone(), false));
        }
        self.insert(index, conf.clone(), objectives, sampler_tag, seed)
            .map(|t| (t, true))
    }

    fn insert(
        &mut self,
        index: usize,
        config: Configuration,
        objectives: ObjectiveVector,
        sampler_tag: SamplerTag,
        seed: u64,
    ) -> Result<Trial, StoreError> {
        if !objectives.is_valid() {
            return Err(StoreError::InvalidObjectives(objectives));
        }
        let trial = Trial {
            config,
            objectives,
            sampler_tag,
            seed,
            sequence_number: self.next_sequence,
            index,
        };
        self.next_sequence += 1;
        self.by_index.insert(index, self.trials.len());
        self.trials.push(trial.clone());
        Ok(trial)
    }

    /// Writes one JSON record per line.
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<(), StoreError> {
        for t in &self.trials {
            let line = serde_json::to_string(&TrialRecord::from(t)).expect("trial records always serialize");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_log<R: BufRead>(input: R, space: SearchSpace) -> Result<Self, StoreError> {
        let mut store = TrialStore::new(space);
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let log_err = |reason: String| StoreError::Log { line: n + 1, reason };
            let record: TrialRecord = serde_json::from_str(&line).map_err(|e| log_err(e.to_string()))?;
            if record.seq < store.next_sequence {
                return Err(log_err(format!("sequence number {} is not increasing", record.seq)));
            }
            let trial = record.into_trial(&store.space).map_err(|e| log_err(e.to_string()))?;
            if store.by_index.contains_key(&trial.index) {
                return Err(log_err(format!("duplicate configuration {}", trial.config)));
            }
            if !trial.objectives.is_valid() {
                return Err(log_err(format!("invalid objectives {:?}", trial.objectives)));
            }
            store.next_sequence = trial.sequence_number + 1;
            store.by_index.insert(trial.index, store.trials.len());
            store.trials.push(trial);
        }
        Ok(store)
    }
}
