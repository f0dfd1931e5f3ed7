//! Discrete configuration spaces.
//!
//! A [`SearchSpace`] is an ordered list of parameters, each with a finite,
//! ordered domain. Points of the space are [`Configuration`]s, which can be
//! mapped to and from a mixed-radix canonical index.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("malformed space document: {0}")]
    Schema(String),
    #[error("parameter #{position} `{name}`: {reason}")]
    Parameter {
        name: String,
        position: usize,
        reason: String,
    },
    #[error("duplicate parameter name `{name}` at position {position}")]
    DuplicateName { name: String, position: usize },
    #[error("space has no parameters")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(Diagnostic),
    #[error("canonical index {index} out of range for cardinality {cardinality}")]
    IndexOutOfRange { index: usize, cardinality: usize },
}

/// A single parameter value.
///
/// Stepped values are materialized on the step's decimal grid, so equality on
/// `Num` is exact bit equality of the rounded value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Numeric view of `Int` and `Num` values.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits(),
            (Value::Text(a), Value::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Num(x) => x.to_bits().hash(state),
            Value::Text(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Num(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterKind {
    Categorical,
    Stepped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDef {
    name: String,
    kind: ParameterKind,
    domain: Vec<Value>,
}

impl ParameterDef {
    pub fn categorical(name: impl Into<String>, values: Vec<Value>) -> Result<Self, SpaceError> {
        let name = name.into();
        check_domain(&name, 0, &values)?;
        Ok(ParameterDef {
            name,
            kind: ParameterKind::Categorical,
            domain: values,
        })
    }

    /// Builds a stepped-numeric parameter holding `floor((high - low) / step) + 1`
    /// values on the decimal grid of `step`.
    pub fn stepped(name: impl Into<String>, low: f64, high: f64, step: f64) -> Result<Self, SpaceError> {
        let name = name.into();
        let values = expand_stepped(&name, 0, low, high, step)?;
        check_domain(&name, 0, &values)?;
        Ok(ParameterDef {
            name,
            kind: ParameterKind::Stepped,
            domain: values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn domain(&self) -> &[Value] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn position_of(&self, value: &Value) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }
}

fn param_err(name: &str, position: usize, reason: impl Into<String>) -> SpaceError {
    SpaceError::Parameter {
        name: name.to_string(),
        position,
        reason: reason.into(),
    }
}

fn check_domain(name: &str, position: usize, values: &[Value]) -> Result<(), SpaceError> {
    if values.is_empty() {
        return Err(param_err(name, position, "empty domain"));
    }
    let mut seen = HashSet::new();
    for v in values {
        if let Value::Num(x) = v {
            if !x.is_finite() {
                return Err(param_err(name, position, format!("non-finite value {x}")));
            }
        }
        if !seen.insert(v) {
            return Err(param_err(name, position, format!("duplicate value `{v}`")));
        }
    }
    Ok(())
}

/// Number of decimal places needed to write `step` exactly (capped at 12).
fn decimal_places(step: f64) -> i32 {
    let mut places = 0;
    let mut scaled = step;
    while places < 12 && (scaled - scaled.round()).abs() > 1e-9 * scaled.abs().max(1.0) {
        places += 1;
        scaled *= 10.0;
    }
    places
}

fn round_to(x: f64, places: i32) -> f64 {
    let factor = 10f64.powi(places);
    let r = (x * factor).round() / factor;
    // avoid -0.0 so that bitwise equality behaves
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn expand_stepped(name: &str, position: usize, low: f64, high: f64, step: f64) -> Result<Vec<Value>, SpaceError> {
    if !(low.is_finite() && high.is_finite() && step.is_finite()) {
        return Err(param_err(name, position, "low/high/step must be finite"));
    }
    if step <= 0.0 {
        return Err(param_err(name, position, format!("non-positive step {step}")));
    }
    if high < low {
        return Err(param_err(name, position, format!("high {high} below low {low}")));
    }
    let places = decimal_places(step).max(decimal_places(low));
    // tolerate representation error in (high - low) / step, e.g. 0.8 / 0.1
    let count = ((high - low) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| Value::Num(round_to(low + k as f64 * step, places)))
        .collect())
}

/// Why a configuration is not a point of a space. Names the first offending position.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    Arity { expected: usize, found: usize },
    OutOfDomain { position: usize, parameter: String, value: Value },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Arity { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            Diagnostic::OutOfDomain {
                position,
                parameter,
                value,
            } => write!(f, "value `{value}` at position {position} is not in the domain of `{parameter}`"),
        }
    }
}

/// An ordered tuple of values, one per parameter of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<Value>);

impl Configuration {
    pub fn new(values: Vec<Value>) -> Self {
        Configuration(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, position: usize) -> Option<&Value> {
        self.0.get(position)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    parameters: Vec<ParameterDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceDocument {
    parameters: Vec<ParameterEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterEntry {
    name: String,
    kind: ParameterKind,
    values: Option<Vec<Value>>,
    low: Option<f64>,
    high: Option<f64>,
    step: Option<f64>,
}

impl SearchSpace {
    pub fn new(parameters: Vec<ParameterDef>) -> Result<Self, SpaceError> {
        if parameters.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut names = HashSet::new();
        for (position, p) in parameters.iter().enumerate() {
            if !names.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName {
                    name: p.name.clone(),
                    position,
                });
            }
        }
        Ok(SearchSpace { parameters })
    }

    /// Parses a TOML space document. Parameter order is document order.
    pub fn parse(document: &str) -> Result<Self, SpaceError> {
        let doc: SpaceDocument = toml::from_str(document).map_err(|e| SpaceError::Schema(e.to_string()))?;
        let mut parameters = Vec::with_capacity(doc.parameters.len());
        for (position, entry) in doc.parameters.into_iter().enumerate() {
            let ParameterEntry {
                name,
                kind,
                values,
                low,
                high,
                step,
            } = entry;
            let domain = match kind {
                ParameterKind::Categorical => {
                    if low.is_some() || high.is_some() || step.is_some() {
                        return Err(param_err(&name, position, "categorical parameters take `values` only"));
                    }
                    values.ok_or_else(|| param_err(&name, position, "missing `values`"))?
                }
                ParameterKind::Stepped => {
                    if values.is_some() {
                        return Err(param_err(&name, position, "stepped parameters take `low`/`high`/`step` only"));
                    }
                    match (low, high, step) {
                        (Some(low), Some(high), Some(step)) => expand_stepped(&name, position, low, high, step)?,
                        _ => return Err(param_err(&name, position, "missing one of `low`, `high`, `step`")),
                    }
                }
            };
            check_domain(&name, position, &domain)?;
            parameters.push(ParameterDef { name, kind, domain });
        }
        SearchSpace::new(parameters)
    }

    /// The bundled 3402-point pedestrian-detection space.
    pub fn pedestrian() -> Self {
        SearchSpace::parse(crate::bundled::PEDESTRIAN_SPACE).expect("bundled space document is valid")
    }

    pub fn parameters(&self) -> &[ParameterDef] {
        &self.parameters
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn cardinality(&self) -> usize {
        self.parameters.iter().map(ParameterDef::len).product()
    }

    pub fn validate(&self, conf: &Configuration) -> Result<(), Diagnostic> {
        if conf.len() != self.parameters.len() {
            return Err(Diagnostic::Arity {
                expected: self.parameters.len(),
                found: conf.len(),
            });
        }
        for (position, (p, v)) in self.parameters.iter().zip(conf.values()).enumerate() {
            if p.position_of(v).is_none() {
                return Err(Diagnostic::OutOfDomain {
                    position,
                    parameter: p.name.clone(),
                    value: v.clone(),
                });
            }
        }
        Ok(())
    }

    /// Mixed-radix index; the last parameter varies fastest.
    pub fn canonical_index(&self, conf: &Configuration) -> Result<usize, SpaceError> {
        self.validate(conf).map_err(SpaceError::InvalidConfiguration)?;
        let mut index = 0;
        for (p, v) in self.parameters.iter().zip(conf.values()) {
            let digit = p.position_of(v).expect("validated");
            index = index * p.len() + digit;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<Configuration, SpaceError> {
        let cardinality = self.cardinality();
        if index >= cardinality {
            return Err(SpaceError::IndexOutOfRange { index, cardinality });
        }
        let mut rest = index;
        let mut values = vec![Value::Bool(false); self.parameters.len()];
        for (slot, p) in values.iter_mut().zip(&self.parameters).rev() {
            *slot = p.domain[rest % p.len()].clone();
            rest /= p.len();
        }
        Ok(Configuration(values))
    }

    /// Every configuration exactly once, in canonical-index order.
    pub fn enumerate(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.cardinality()).map(move |i| self.decode(i).expect("index below cardinality"))
    }
}
