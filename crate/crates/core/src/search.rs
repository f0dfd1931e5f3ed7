//! Samplers that explore a search space through a [`TrialStore`].
//!
//! Budgets count unique trials: a proposal that hits an already-evaluated
//! configuration is answered from the store and costs nothing.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::device::Evaluator;
use crate::objective::ObjectiveVector;
use crate::pareto::{crowding_distance, non_dominated_sort, Directions};
use crate::space::{Configuration, SearchSpace};
use crate::store::{SamplerTag, StoreError, Trial, TrialStore};

pub const CROSSOVER_PROBABILITY: f64 = 0.9;
pub const DEFAULT_POPULATION: usize = 50;
/// Generations without a single new unique trial before NSGA-II gives up.
const MAX_STALLED_GENERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("budget of {budget} unique trials must lie in 1..={cardinality}")]
    OutOfRange { budget: usize, cardinality: usize },
    #[error("budget fraction {0} must lie in (0, 1]")]
    Fraction(f64),
    #[error("population size {0} must be at least 2")]
    Population(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_unique_trials: usize,
    pub population_size: usize,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(space: &SearchSpace, max_unique_trials: usize, population_size: usize, seed: u64) -> Result<Self, BudgetError> {
        let cardinality = space.cardinality();
        if max_unique_trials == 0 || max_unique_trials > cardinality {
            return Err(BudgetError::OutOfRange {
                budget: max_unique_trials,
                cardinality,
            });
        }
        if population_size < 2 {
            return Err(BudgetError::Population(population_size));
        }
        Ok(SearchBudget {
            max_unique_trials,
            population_size,
            seed,
        })
    }

    /// Budget as a fraction of the space, rounded to the nearest count
    /// (0.1 of 3402 is 340).
    pub fn from_fraction(space: &SearchSpace, fraction: f64, population_size: usize, seed: u64) -> Result<Self, BudgetError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(BudgetError::Fraction(fraction));
        }
        let count = ((fraction * space.cardinality() as f64).round() as usize).max(1);
        SearchBudget::new(space, count, population_size, seed)
    }
}

/// A failed search keeps whatever it evaluated before the failure.
#[derive(Debug, Error)]
#[error("search aborted after {} unique trials: {error}", store.unique_trials())]
pub struct SearchFailure {
    pub store: TrialStore,
    pub error: SearchError,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no new configuration found in {0} consecutive generations")]
    Stalled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Nsga2,
    Random,
}

impl Sampler {
    pub fn run(
        self,
        space: &SearchSpace,
        evaluator: &dyn Evaluator,
        budget: SearchBudget,
        directions: &Directions,
    ) -> Result<TrialStore, SearchFailure> {
        match self {
            Sampler::Nsga2 => nsga2_search(space, evaluator, budget, directions),
            Sampler::Random => random_search(space, evaluator, budget),
        }
    }

    pub fn tag(self) -> SamplerTag {
        match self {
            Sampler::Nsga2 => SamplerTag::Nsga2,
            Sampler::Random => SamplerTag::Random,
        }
    }
}

/// Evaluates every configuration of the space, in canonical order.
pub fn exhaustive_search(space: &SearchSpace, evaluator: &dyn Evaluator) -> Result<TrialStore, SearchFailure> {
    let mut store = TrialStore::new(space.clone());
    let confs: Vec<Configuration> = space.enumerate().collect();
    if let Err(error) = evaluate_and_record(&mut store, &confs, evaluator, SamplerTag::Oracle, 0) {
        return Err(SearchFailure { store, error });
    }
    Ok(store)
}

/// Uniform draws with replacement until the store holds `budget` unique trials.
pub fn random_search(space: &SearchSpace, evaluator: &dyn Evaluator, budget: SearchBudget) -> Result<TrialStore, SearchFailure> {
    let mut store = TrialStore::new(space.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let cardinality = space.cardinality();
    while store.unique_trials() < budget.max_unique_trials {
        let conf = space.decode(rng.gen_range(0..cardinality)).expect("index below cardinality");
        if let Err(e) = store.record(&conf, SamplerTag::Random, budget.seed, evaluator) {
            return Err(SearchFailure { store, error: e.into() });
        }
    }
    Ok(store)
}

/// Evaluates the not-yet-seen configurations of `confs` concurrently, then
/// records them in input order. Returns the trial for every input.
fn evaluate_and_record(
    store: &mut TrialStore,
    confs: &[Configuration],
    evaluator: &dyn Evaluator,
    tag: SamplerTag,
    seed: u64,
) -> Result<Vec<Trial>, SearchError> {
    let results: Vec<Option<Result<ObjectiveVector, _>>> = confs
        .par_iter()
        .map(|c| match store.get(c) {
            Some(_) => None,
            None => Some(evaluator.evaluate(c)),
        })
        .collect();
    let mut trials = Vec::with_capacity(confs.len());
    for (conf, result) in confs.iter().zip(results) {
        let trial = match result {
            None => store.get(conf).expect("seen before this batch").clone(),
            Some(evaluated) => {
                let objectives = evaluated.map_err(StoreError::from)?;
                store.record_evaluated(conf, objectives, tag, seed)?.0
            }
        };
        trials.push(trial);
    }
    Ok(trials)
}

struct Ranked {
    trial: Trial,
    rank: usize,
    crowding: f64,
}

fn rank_population(pool: Vec<Trial>, directions: &Directions) -> Vec<Ranked> {
    let objectives: Vec<_> = pool.iter().map(|t| t.objectives).collect();
    let fronts = non_dominated_sort(&objectives, directions);
    let mut rank = vec![0; pool.len()];
    let mut crowding = vec![0.0; pool.len()];
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<_> = front.iter().map(|&i| objectives[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members, directions)) {
            rank[i] = r;
            crowding[i] = d;
        }
    }
    pool.into_iter()
        .enumerate()
        .map(|(i, trial)| Ranked {
            trial,
            rank: rank[i],
            crowding: crowding[i],
        })
        .collect()
}

/// Crowded-comparison order: lower rank first, then larger crowding distance.
fn crowded_better(a: &Ranked, b: &Ranked) -> std::cmp::Ordering {
    a.rank.cmp(&b.rank).then(b.crowding.total_cmp(&a.crowding))
}

fn tournament<'a>(population: &'a [Ranked], rng: &mut ChaCha8Rng) -> &'a Ranked {
    let a = &population[rng.gen_range(0..population.len())];
    let b = &population[rng.gen_range(0..population.len())];
    match crowded_better(a, b) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

fn make_child(space: &SearchSpace, p1: &Configuration, p2: &Configuration, rng: &mut ChaCha8Rng) -> Configuration {
    let n = space.parameters().len();
    let mut genes: Vec<_> = if rng.gen_bool(CROSSOVER_PROBABILITY) {
        p1.values()
            .iter()
            .zip(p2.values())
            .map(|(a, b)| if rng.gen_bool(0.5) { a.clone() } else { b.clone() })
            .collect()
    } else {
        p1.values().to_vec()
    };
    let mutation_probability = 1.0 / n as f64;
    for (gene, param) in genes.iter_mut().zip(space.parameters()) {
        if rng.gen_bool(mutation_probability) {
            *gene = param.domain()[rng.gen_range(0..param.len())].clone();
        }
    }
    Configuration::new(genes)
}

/// Elitist selection of `size` survivors by rank, then crowding distance.
fn environmental_selection(pool: Vec<Trial>, size: usize, directions: &Directions) -> Vec<Ranked> {
    let mut ranked = rank_population(pool, directions);
    // ties keep pool order, which is deterministic
    ranked.sort_by(crowded_better);
    ranked.truncate(size);
    // crowding is recomputed against the survivors for the next tournament
    rank_population(ranked.into_iter().map(|r| r.trial).collect(), directions)
}

/// Generational NSGA-II over a discrete space.
///
/// Binary tournaments on (rank, crowding); uniform crossover with probability
/// 0.9; per-gene mutation with probability 1/n to a uniformly drawn domain
/// value. Stops as soon as the store holds `max_unique_trials` unique trials.
pub fn nsga2_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    budget: SearchBudget,
    directions: &Directions,
) -> Result<TrialStore, SearchFailure> {
    let mut store = TrialStore::new(space.clone());
    match run_nsga2(&mut store, space, evaluator, budget, directions) {
        Ok(()) => Ok(store),
        Err(error) => Err(SearchFailure { store, error }),
    }
}

fn run_nsga2(
    store: &mut TrialStore,
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    budget: SearchBudget,
    directions: &Directions,
) -> Result<(), SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let tag = SamplerTag::Nsga2;
    let initial_size = budget.population_size.min(budget.max_unique_trials);
    let initial: Vec<Configuration> = index::sample(&mut rng, space.cardinality(), initial_size)
        .into_iter()
        .map(|i| space.decode(i).expect("index below cardinality"))
        .collect();
    let initial = evaluate_and_record(store, &initial, evaluator, tag, budget.seed)?;
    let mut population = rank_population(initial, directions);

    let mut stalled = 0;
    while store.unique_trials() < budget.max_unique_trials {
        let mut offspring = Vec::with_capacity(budget.population_size);
        for _ in 0..budget.population_size {
            let p1 = &tournament(&population, &mut rng).trial.config;
            let p2 = &tournament(&population, &mut rng).trial.config;
            offspring.push(make_child(space, p1, p2, &mut rng));
        }

        // keep repeats (free) and as many new configurations as the budget allows
        let mut remaining = budget.max_unique_trials - store.unique_trials();
        let mut fresh = HashSet::new();
        offspring.retain(|c| {
            let index = space.canonical_index(c).expect("children stay in the space");
            if store.contains_index(index) || fresh.contains(&index) {
                true
            } else if remaining > 0 {
                remaining -= 1;
                fresh.insert(index);
                true
            } else {
                false
            }
        });

        let before = store.unique_trials();
        let children = evaluate_and_record(store, &offspring, evaluator, tag, budget.seed)?;
        if store.unique_trials() == before {
            stalled += 1;
            if stalled >= MAX_STALLED_GENERATIONS {
                return Err(SearchError::Stalled(stalled));
            }
        } else {
            stalled = 0;
        }

        let mut seen = HashSet::new();
        let pool: Vec<Trial> = population
            .into_iter()
            .map(|r| r.trial)
            .chain(children)
            .filter(|t| seen.insert(t.index))
            .collect();
        population = environmental_selection(pool, budget.population_size, directions);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceModelParams, EvalError, SyntheticDevice};
    use crate::objective::DEFAULT_DIRECTIONS;
    use crate::space::{ParameterDef, Value};

    fn pedestrian() -> (SearchSpace, SyntheticDevice) {
        let space = SearchSpace::pedestrian();
        let device = SyntheticDevice::new(DeviceModelParams::synthetic(), &space).unwrap();
        (space, device)
    }

    fn log_of(store: &TrialStore) -> Vec<u8> {
        let mut buf = Vec::new();
        store.write_log(&mut buf).unwrap();
        buf
    }

    #[test]
    fn budget_validation() {
        let space = SearchSpace::pedestrian();
        assert!(SearchBudget::new(&space, 0, 50, 1).is_err());
        assert!(SearchBudget::new(&space, 3403, 50, 1).is_err());
        assert!(SearchBudget::new(&space, 10, 1, 1).is_err());
        assert_eq!(SearchBudget::from_fraction(&space, 0.1, 50, 1).unwrap().max_unique_trials, 340);
        assert!(SearchBudget::from_fraction(&space, 0.0, 50, 1).is_err());
    }

    #[test]
    fn nsga2_respects_budget_exactly() {
        let (space, device) = pedestrian();
        let budget = SearchBudget::new(&space, 340, DEFAULT_POPULATION, 7).unwrap();
        let store = nsga2_search(&space, &device, budget, &DEFAULT_DIRECTIONS).unwrap();
        assert_eq!(store.unique_trials(), 340);
        assert_eq!(store.trials().len(), 340);
    }

    #[test]
    fn nsga2_is_deterministic() {
        let (space, device) = pedestrian();
        let budget = SearchBudget::new(&space, 200, 20, 99).unwrap();
        let a = nsga2_search(&space, &device, budget, &DEFAULT_DIRECTIONS).unwrap();
        let b = nsga2_search(&space, &device, budget, &DEFAULT_DIRECTIONS).unwrap();
        assert_eq!(log_of(&a), log_of(&b));
        let c = nsga2_search(&space, &device, SearchBudget { seed: 100, ..budget }, &DEFAULT_DIRECTIONS).unwrap();
        assert_ne!(log_of(&a), log_of(&c));
    }

    #[test]
    fn nsga2_covers_a_toy_space() {
        let a = ParameterDef::categorical("a", (0..4).map(Value::Int).collect()).unwrap();
        let b = ParameterDef::categorical("b", (0..3).map(Value::Int).collect()).unwrap();
        let space = SearchSpace::new(vec![a, b]).unwrap();
        let eval = |c: &Configuration| -> Result<ObjectiveVector, EvalError> {
            let x = c.values()[0].as_f64().unwrap();
            let y = c.values()[1].as_f64().unwrap();
            Ok(ObjectiveVector::new(x / 10.0, y, x + y))
        };
        let budget = SearchBudget::new(&space, 12, 4, 3).unwrap();
        let store = nsga2_search(&space, &eval, budget, &DEFAULT_DIRECTIONS).unwrap();
        assert_eq!(store.unique_trials(), 12);
    }

    #[test]
    fn random_search_budget_and_determinism() {
        let (space, device) = pedestrian();
        let budget = SearchBudget::new(&space, 2790, DEFAULT_POPULATION, 5).unwrap();
        let a = random_search(&space, &device, budget).unwrap();
        assert_eq!(a.unique_trials(), 2790);
        let b = random_search(&space, &device, budget).unwrap();
        assert_eq!(log_of(&a), log_of(&b));
    }

    #[test]
    fn random_full_budget_covers_enumeration() {
        let (space, device) = pedestrian();
        let budget = SearchBudget::new(&space, 3402, DEFAULT_POPULATION, 1).unwrap();
        let store = random_search(&space, &device, budget).unwrap();
        let got: HashSet<usize> = store.trials().iter().map(|t| t.index).collect();
        let all: HashSet<usize> = space.enumerate().map(|c| space.canonical_index(&c).unwrap()).collect();
        assert_eq!(got, all);
    }

    #[test]
    fn evaluator_failure_keeps_partial_store() {
        let (space, device) = pedestrian();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let flaky = |c: &Configuration| {
            if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) >= 30 {
                Err(EvalError::Failed("meter offline".into()))
            } else {
                device.evaluate(c)
            }
        };
        let budget = SearchBudget::new(&space, 100, 10, 1).unwrap();
        let failure = random_search(&space, &flaky, budget).unwrap_err();
        assert_eq!(failure.store.unique_trials(), 30);
    }
}
