//! Design and replay of energy-aware self-adaptive edge applications.
//!
//! The workflow runs in four steps:
//!
//! 1. describe a discrete configuration space ([`space`]) and an evaluator
//!    for it ([`device`]);
//! 2. search the space for accuracy/energy/rate trade-offs with NSGA-II or
//!    random sampling ([`search`]), keeping every evaluation in a
//!    [`store::TrialStore`], and extract the Pareto front ([`pareto`]);
//! 3. pick one configuration per operation mode with weighted gray
//!    relational analysis ([`wgra`]);
//! 4. drive the modes with a state machine ([`fsm`]) and replay it against
//!    traffic scenarios ([`scenario`], [`sim`]), exporting tables through
//!    [`report`].

pub mod bundled;
pub mod device;
pub mod fsm;
pub mod hypervolume;
pub mod objective;
pub mod pareto;
pub mod report;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod space;
pub mod store;
pub mod wgra;

pub use device::{DeviceModelParams, EvalError, Evaluator, SyntheticDevice};
pub use fsm::{FsmRuntime, FsmSpec, WindowObservation};
pub use objective::{Direction, ObjectiveVector, DEFAULT_DIRECTIONS};
pub use pareto::{extract_front, ParetoFront};
pub use scenario::{generate_scenario, Scenario, ScenarioKind};
pub use search::{SearchBudget, Sampler};
pub use sim::{SimConfig, SimulationReport};
pub use space::{Configuration, SearchSpace, Value};
pub use store::{SamplerTag, Trial, TrialStore};
pub use wgra::{ModeSpec, OperationMode};
