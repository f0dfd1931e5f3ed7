//! Declarative operation-mode state machine and its runtime.
//!
//! Guards are data: a half-open range `[lo, hi)` on the window's mean
//! detected count plus a sustain length. A sustain-k guard fires only after k
//! consecutive qualifying windows spent in the source state.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::Configuration;
use crate::wgra::OperationMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("malformed FSM document: {0}")]
    Schema(String),
    #[error("transition #{index} refers to undeclared state `{state}`")]
    UnknownState { index: usize, state: String },
    #[error("initial state `{0}` is not declared")]
    UnknownInitial(String),
    #[error("state `{0}` is declared twice")]
    DuplicateState(String),
    #[error("state `{0}` has no operation mode")]
    UnknownMode(String),
    #[error("transition #{index}: malformed guard ({reason})")]
    MalformedGuard { index: usize, reason: String },
    #[error("FSM failed validation: {}", join(.0))]
    Invalid(Vec<FsmDiagnostic>),
    #[error("window index {got} does not follow {previous}")]
    NonMonotonicWindow { previous: u64, got: u64 },
}

fn join(items: &[FsmDiagnostic]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    pub lo: f64,
    /// Exclusive upper bound; `None` is unbounded.
    pub hi: Option<f64>,
    pub sustain: u32,
}

impl Guard {
    pub fn matches(&self, count: f64) -> bool {
        count >= self.lo && self.hi.is_none_or(|hi| count < hi)
    }

    fn overlaps(&self, other: &Guard) -> bool {
        let lo = self.lo.max(other.lo);
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::INFINITY,
        };
        lo < hi
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{} <= c < {}", self.lo, hi)?,
            None => write!(f, "c >= {}", self.lo)?,
        }
        if self.sustain > 1 {
            write!(f, " for {} windows", self.sustain)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub guard: Guard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsmSpec {
    pub states: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FsmDocument {
    states: Vec<String>,
    initial: String,
    #[serde(default)]
    transitions: Vec<TransitionEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    to: String,
    lo: f64,
    hi: Option<f64>,
    sustain: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FsmDiagnostic {
    InitialNotDeclared(String),
    Overlap { state: String, first: usize, second: usize },
    Unreachable(String),
}

impl fmt::Display for FsmDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FsmDiagnostic::InitialNotDeclared(s) => write!(f, "initial state `{s}` is not declared"),
            FsmDiagnostic::Overlap { state, first, second } => {
                write!(f, "transitions #{first} and #{second} out of `{state}` can both be enabled")
            }
            FsmDiagnostic::Unreachable(s) => write!(f, "state `{s}` is unreachable from the initial state"),
        }
    }
}

impl FsmSpec {
    /// Parses the structure of a TOML FSM document without binding modes.
    pub fn parse(document: &str) -> Result<Self, FsmError> {
        let doc: FsmDocument = toml::from_str(document).map_err(|e| FsmError::Schema(e.to_string()))?;
        let mut declared = HashSet::new();
        for s in &doc.states {
            if !declared.insert(s.as_str()) {
                return Err(FsmError::DuplicateState(s.clone()));
            }
        }
        if !declared.contains(doc.initial.as_str()) {
            return Err(FsmError::UnknownInitial(doc.initial));
        }
        let mut transitions = Vec::with_capacity(doc.transitions.len());
        for (index, t) in doc.transitions.into_iter().enumerate() {
            for state in [&t.from, &t.to] {
                if !declared.contains(state.as_str()) {
                    return Err(FsmError::UnknownState {
                        index,
                        state: state.clone(),
                    });
                }
            }
            let malformed = |reason: &str| FsmError::MalformedGuard {
                index,
                reason: reason.to_string(),
            };
            if !(t.lo.is_finite() && t.lo >= 0.0) {
                return Err(malformed("lo must be finite and non-negative"));
            }
            if let Some(hi) = t.hi {
                if !(hi > t.lo) {
                    return Err(malformed("hi must exceed lo"));
                }
            }
            let sustain = t.sustain.unwrap_or(1);
            if sustain == 0 {
                return Err(malformed("sustain must be at least 1"));
            }
            if t.from == t.to {
                return Err(malformed("self-loops are implicit"));
            }
            transitions.push(Transition {
                from: t.from,
                to: t.to,
                guard: Guard {
                    lo: t.lo,
                    hi: t.hi,
                    sustain,
                },
            });
        }
        Ok(FsmSpec {
            states: doc.states,
            initial: doc.initial,
            transitions,
        })
    }

    /// The bundled four-mode pedestrian FSM.
    pub fn pedestrian() -> Self {
        FsmSpec::parse(crate::bundled::PEDESTRIAN_FSM).expect("bundled FSM document is valid")
    }

    pub fn outgoing(&self, state: &str) -> impl Iterator<Item = (usize, &Transition)> {
        let state = state.to_string();
        self.transitions.iter().enumerate().filter(move |(_, t)| t.from == state)
    }
}

/// Parses an FSM document and checks that every state has a mode.
pub fn parse_fsm(document: &str, modes: &[OperationMode]) -> Result<FsmSpec, FsmError> {
    let spec = FsmSpec::parse(document)?;
    for s in &spec.states {
        if !modes.iter().any(|m| m.name() == s) {
            return Err(FsmError::UnknownMode(s.clone()));
        }
    }
    Ok(spec)
}

/// Determinism (no two guards out of one state overlap), initial-state
/// membership and reachability. Empty result means the spec is valid.
pub fn validate_fsm(spec: &FsmSpec) -> Vec<FsmDiagnostic> {
    let mut out = Vec::new();
    if !spec.states.contains(&spec.initial) {
        out.push(FsmDiagnostic::InitialNotDeclared(spec.initial.clone()));
    }
    for state in &spec.states {
        let outgoing: Vec<_> = spec.outgoing(state).collect();
        for (a, (i, ti)) in outgoing.iter().enumerate() {
            for (k, tk) in &outgoing[a + 1..] {
                if ti.guard.overlaps(&tk.guard) {
                    out.push(FsmDiagnostic::Overlap {
                        state: state.clone(),
                        first: *i,
                        second: *k,
                    });
                }
            }
        }
    }
    let mut reached = HashSet::new();
    let mut queue = VecDeque::new();
    if spec.states.contains(&spec.initial) {
        reached.insert(spec.initial.as_str());
        queue.push_back(spec.initial.as_str());
    }
    while let Some(s) = queue.pop_front() {
        for (_, t) in spec.outgoing(s) {
            if reached.insert(t.to.as_str()) {
                queue.push_back(t.to.as_str());
            }
        }
    }
    for s in &spec.states {
        if !reached.contains(s.as_str()) {
            out.push(FsmDiagnostic::Unreachable(s.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowObservation {
    pub window_index: u64,
    pub mean_detected_count: f64,
    pub frames_in_window: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredTransition {
    pub window_index: u64,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone)]
pub struct FsmRuntime {
    spec: FsmSpec,
    modes: BTreeMap<String, OperationMode>,
    current: String,
    sustain_counters: Vec<u32>,
    log: Vec<FiredTransition>,
    last_window: Option<u64>,
}

impl FsmRuntime {
    /// Binds every state to its operation mode. The spec must validate.
    pub fn new(spec: FsmSpec, modes: &[OperationMode]) -> Result<Self, FsmError> {
        let diagnostics = validate_fsm(&spec);
        if !diagnostics.is_empty() {
            return Err(FsmError::Invalid(diagnostics));
        }
        let mut bound = BTreeMap::new();
        for s in &spec.states {
            let mode = modes
                .iter()
                .find(|m| m.name() == s)
                .ok_or_else(|| FsmError::UnknownMode(s.clone()))?;
            bound.insert(s.clone(), mode.clone());
        }
        Ok(FsmRuntime {
            current: spec.initial.clone(),
            sustain_counters: vec![0; spec.transitions.len()],
            spec,
            modes: bound,
            log: Vec::new(),
            last_window: None,
        })
    }

    pub fn spec(&self) -> &FsmSpec {
        &self.spec
    }

    pub fn current_state(&self) -> &str {
        &self.current
    }

    pub fn current_mode(&self) -> &OperationMode {
        &self.modes[&self.current]
    }

    pub fn current_config(&self) -> &Configuration {
        &self.current_mode().chosen
    }

    pub fn mode(&self, state: &str) -> Option<&OperationMode> {
        self.modes.get(state)
    }

    pub fn transition_log(&self) -> &[FiredTransition] {
        &self.log
    }

    /// Feeds one window. Returns the state after the step and the transition
    /// that fired, if any.
    pub fn step(&mut self, obs: &WindowObservation) -> Result<(String, Option<FiredTransition>), FsmError> {
        if let Some(previous) = self.last_window {
            if obs.window_index <= previous {
                return Err(FsmError::NonMonotonicWindow {
                    previous,
                    got: obs.window_index,
                });
            }
        }
        self.last_window = Some(obs.window_index);

        let c = obs.mean_detected_count;
        let mut enabled = Vec::new();
        for (i, t) in self.spec.transitions.iter().enumerate() {
            if t.from != self.current {
                continue;
            }
            if t.guard.matches(c) {
                self.sustain_counters[i] += 1;
                if self.sustain_counters[i] >= t.guard.sustain {
                    enabled.push(i);
                }
            } else {
                self.sustain_counters[i] = 0;
            }
        }
        assert!(enabled.len() <= 1, "validated FSM enabled {} transitions at once", enabled.len());

        let fired = enabled.first().map(|&i| {
            let t = &self.spec.transitions[i];
            FiredTransition {
                window_index: obs.window_index,
                from: t.from.clone(),
                to: t.to.clone(),
            }
        });
        if let Some(f) = &fired {
            self.current = f.to.clone();
            self.sustain_counters.iter_mut().for_each(|c| *c = 0);
            self.log.push(f.clone());
        }
        Ok((self.current.clone(), fired))
    }
}
