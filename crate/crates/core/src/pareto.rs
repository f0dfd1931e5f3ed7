//! Dominance, non-dominated sorting, crowding distance and front extraction.
//!
//! Everything here works on the minimization-canonical view of objective
//! vectors (maximized objectives negated); reports keep natural signs.

use serde::{Deserialize, Serialize};

use crate::objective::{Direction, ObjectiveVector, OBJECTIVE_COUNT};
use crate::store::{Trial, TrialRecord, TrialStore};
use crate::space::{SearchSpace, SpaceError};

pub type Directions = [Direction; OBJECTIVE_COUNT];

pub fn canonical(v: &ObjectiveVector, directions: &Directions) -> [f64; OBJECTIVE_COUNT] {
    let raw = v.to_array();
    std::array::from_fn(|j| directions[j].to_min(raw[j]))
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector, directions: &Directions) -> bool {
    dominates_min(&canonical(a, directions), &canonical(b, directions))
}

pub(crate) fn dominates_min(a: &[f64; OBJECTIVE_COUNT], b: &[f64; OBJECTIVE_COUNT]) -> bool {
    let mut strictly = false;
    for j in 0..OBJECTIVE_COUNT {
        if a[j] > b[j] {
            return false;
        }
        if a[j] < b[j] {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts F0, F1, ... as indices into `points`,
/// each front in ascending index order.
pub fn non_dominated_sort(points: &[ObjectiveVector], directions: &Directions) -> Vec<Vec<usize>> {
    let n = points.len();
    let mins: Vec<_> = points.iter().map(|p| canonical(p, directions)).collect();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for k in (i + 1)..n {
            if dominates_min(&mins[i], &mins[k]) {
                dominated_by_me[i].push(k);
                domination_count[k] += 1;
            } else if dominates_min(&mins[k], &mins[i]) {
                dominated_by_me[k].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of a front, in input order.
pub fn crowding_distance(front: &[ObjectiveVector], directions: &Directions) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mins: Vec<_> = front.iter().map(|p| canonical(p, directions)).collect();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..OBJECTIVE_COUNT {
        order.sort_by(|&a, &b| mins[a][j].total_cmp(&mins[b][j]).then(a.cmp(&b)));
        let lo = mins[order[0]][j];
        let hi = mins[order[n - 1]][j];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let i = order[w];
            if distance[i].is_finite() {
                distance[i] += (mins[order[w + 1]][j] - mins[order[w - 1]][j]) / range;
            }
        }
    }
    distance
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    members: Vec<Trial>,
    directions: Directions,
}

impl ParetoFront {
    /// Wraps trials that are already mutually non-dominated. Members are kept
    /// in canonical-index order.
    pub fn from_members(mut members: Vec<Trial>, directions: Directions) -> Self {
        members.sort_by_key(|t| t.index);
        ParetoFront { members, directions }
    }

    pub fn members(&self) -> &[Trial] {
        &self.members
    }

    pub fn directions(&self) -> &Directions {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|t| t.objectives).collect()
    }

    pub fn to_document(&self) -> FrontDocument {
        FrontDocument {
            directions: self.directions,
            members: self.members.iter().map(TrialRecord::from).collect(),
        }
    }

    pub fn from_document(doc: FrontDocument, space: &SearchSpace) -> Result<Self, SpaceError> {
        let members = doc
            .members
            .into_iter()
            .map(|r| r.into_trial(space))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ParetoFront::from_members(members, doc.directions))
    }
}

/// Serialized form of a front.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontDocument {
    pub directions: Directions,
    pub members: Vec<TrialRecord>,
}

/// Maximal non-dominated subset of `trials`; identical objective vectors are all kept.
pub fn non_dominated_subset(trials: &[Trial], directions: &Directions) -> Vec<Trial> {
    let mut keyed: Vec<([f64; OBJECTIVE_COUNT], &Trial)> =
        trials.iter().map(|t| (canonical(&t.objectives, directions), t)).collect();
    // any dominator sorts lexicographically before what it dominates
    keyed.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.index.cmp(&b.1.index))
    });
    let mut archive: Vec<([f64; OBJECTIVE_COUNT], &Trial)> = Vec::new();
    for (key, trial) in keyed {
        if !archive.iter().any(|(a, _)| dominates_min(a, &key)) {
            archive.push((key, trial));
        }
    }
    archive.into_iter().map(|(_, t)| t.clone()).collect()
}

/// Pareto front of the whole evaluation history held by `store`.
pub fn extract_front(store: &TrialStore, directions: &Directions) -> ParetoFront {
    ParetoFront::from_members(non_dominated_subset(store.trials(), directions), *directions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::DEFAULT_DIRECTIONS;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ov(a: f64, e: f64, r: f64) -> ObjectiveVector {
        ObjectiveVector::new(a, e, r)
    }

    const D: Directions = DEFAULT_DIRECTIONS;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(0.4, 1.0, 500.0), &ov(0.3, 2.0, 400.0), &D));
        let a = ov(0.4, 1.0, 500.0);
        assert!(!dominates(&a, &a, &D));
        let a = ov(0.4, 1.0, 400.0);
        let b = ov(0.3, 0.5, 500.0);
        assert!(!dominates(&a, &b, &D));
        assert!(!dominates(&b, &a, &D));
    }

    #[test]
    fn sort_single_and_chain() {
        assert_eq!(non_dominated_sort(&[ov(0.1, 1.0, 1.0)], &D), vec![vec![0]]);
        let chain = [ov(0.1, 3.0, 1.0), ov(0.3, 1.0, 3.0), ov(0.2, 2.0, 2.0)];
        assert_eq!(non_dominated_sort(&chain, &D), vec![vec![1], vec![2], vec![0]]);
    }

    /// Rank of i = length of the longest dominance chain ending at i.
    fn brute_force_ranks(points: &[ObjectiveVector]) -> Vec<usize> {
        let n = points.len();
        let mut rank = vec![usize::MAX; n];
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut level = 0;
        while !remaining.is_empty() {
            let layer: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&k| dominates(&points[k], &points[i], &D)))
                .collect();
            for &i in &layer {
                rank[i] = level;
            }
            remaining.retain(|i| !layer.contains(i));
            level += 1;
        }
        rank
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<ObjectiveVector> {
        (0..n)
            .map(|_| ov(rng.gen_range(0..10) as f64 / 10.0, rng.gen_range(0..10) as f64, rng.gen_range(0..10) as f64))
            .collect()
    }

    #[test]
    fn sort_matches_brute_force_on_random_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 50);
            let fronts = non_dominated_sort(&pts, &D);
            let oracle = brute_force_ranks(&pts);
            for (level, front) in fronts.iter().enumerate() {
                for &i in front {
                    assert_eq!(oracle[i], level);
                }
            }
            assert_eq!(fronts.iter().map(Vec::len).sum::<usize>(), 50);
        }
    }

    #[test]
    fn crowding_small_fronts_are_infinite() {
        assert_eq!(crowding_distance(&[ov(0.1, 1.0, 1.0)], &D), vec![f64::INFINITY]);
        assert!(crowding_distance(&[ov(0.1, 1.0, 1.0), ov(0.2, 2.0, 1.0)], &D)
            .iter()
            .all(|d| d.is_infinite()));
    }

    #[test]
    fn crowding_collinear_points() {
        let pts = [ov(0.1, 1.0, 10.0), ov(0.2, 2.0, 20.0), ov(0.3, 3.0, 30.0)];
        let d = crowding_distance(&pts, &D);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        // each objective contributes (0.3 - 0.1) / 0.2 = 1
        assert!((d[1] - 3.0).abs() < 1e-12);
    }

    /// Straightforward re-implementation: per objective, look up neighbours by scanning.
    fn crowding_oracle(pts: &[ObjectiveVector]) -> Vec<f64> {
        let n = pts.len();
        let mut out = vec![0.0; n];
        for j in 0..3 {
            let key = |i: usize| (D[j].to_min(pts[i].to_array()[j]), i);
            let vals: Vec<(f64, usize)> = (0..n).map(key).collect();
            let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            if hi == lo {
                continue;
            }
            for i in 0..n {
                let me = vals[i];
                let below = vals.iter().filter(|v| *v < &me).max_by(|a, b| a.partial_cmp(b).unwrap());
                let above = vals.iter().filter(|v| *v > &me).min_by(|a, b| a.partial_cmp(b).unwrap());
                match (below, above) {
                    (Some(b), Some(a)) => out[i] += (a.0 - b.0) / (hi - lo),
                    _ => out[i] = f64::INFINITY,
                }
            }
        }
        out
    }

    #[test]
    fn crowding_matches_oracle_on_20_point_front() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..20)
            .map(|_| ov(rng.gen::<f64>(), rng.gen::<f64>() * 5.0, rng.gen_range(0..1000) as f64))
            .collect();
        let got = crowding_distance(&pts, &D);
        let want = crowding_oracle(&pts);
        for (g, w) in got.iter().zip(&want) {
            if w.is_infinite() {
                assert!(g.is_infinite());
            } else {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    fn trial(index: usize, v: ObjectiveVector) -> Trial {
        Trial {
            config: crate::space::Configuration::new(vec![crate::space::Value::Int(index as i64)]),
            objectives: v,
            sampler_tag: crate::store::SamplerTag::Oracle,
            seed: 0,
            sequence_number: index as u64,
            index,
        }
    }

    proptest! {
        #[test]
        fn subset_equals_pairwise_filter(raw in proptest::collection::vec((0u8..6, 0u8..6, 0u8..6), 1..60)) {
            let trials: Vec<Trial> = raw
                .iter()
                .enumerate()
                .map(|(i, &(a, e, r))| trial(i, ov(a as f64 / 10.0, e as f64, r as f64)))
                .collect();
            let mut got: Vec<usize> = non_dominated_subset(&trials, &D).iter().map(|t| t.index).collect();
            got.sort_unstable();
            let want: Vec<usize> = trials
                .iter()
                .filter(|t| !trials.iter().any(|u| dominates(&u.objectives, &t.objectives, &D)))
                .map(|t| t.index)
                .collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn ties_are_all_retained() {
        let trials = vec![trial(0, ov(0.3, 1.0, 5.0)), trial(1, ov(0.3, 1.0, 5.0)), trial(2, ov(0.1, 2.0, 1.0))];
        let front = non_dominated_subset(&trials, &D);
        assert_eq!(front.len(), 2);
    }
}
