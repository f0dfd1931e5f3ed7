//! Exact hypervolume for three objectives by dimension sweep.

use thiserror::Error;

use crate::objective::{Direction, ObjectiveVector, OBJECTIVE_COUNT};
use crate::pareto::{canonical, Directions, ParetoFront};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypervolumeError {
    #[error("reference point {reference:?} is not dominated by member {member:?}")]
    ReferenceViolated {
        member: ObjectiveVector,
        reference: ObjectiveVector,
    },
    #[error("cannot derive a reference point from an empty front")]
    EmptyFront,
}

/// Volume of the region dominated by `points` and bounded by `reference`,
/// all in minimization-canonical coordinates. Points not weakly below the
/// reference in every coordinate contribute nothing.
pub fn hypervolume_min(points: &[[f64; OBJECTIVE_COUNT]], reference: &[f64; OBJECTIVE_COUNT]) -> f64 {
    let mut pts: Vec<[f64; OBJECTIVE_COUNT]> = points
        .iter()
        .copied()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));

    let mut volume = 0.0;
    let mut slice: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        slice.push([p[0], p[1]]);
        let next_z = pts.get(i + 1).map_or(reference[2], |q| q[2]);
        let height = next_z - p[2];
        if height > 0.0 {
            volume += area_2d(&mut slice, reference[0], reference[1]) * height;
        }
    }
    volume
}

fn area_2d(points: &mut [[f64; 2]], rx: f64, ry: f64) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_y = ry;
    for p in points.iter() {
        if p[1] < best_y {
            area += (rx - p[0]) * (best_y - p[1]);
            best_y = p[1];
        }
    }
    area
}

/// Hypervolume of a front in natural units. Every member must dominate
/// (or equal) the reference point after canonicalization.
pub fn hypervolume(front: &ParetoFront, reference: &ObjectiveVector) -> Result<f64, HypervolumeError> {
    let dirs = front.directions();
    let r = canonical(reference, dirs);
    let mut pts = Vec::with_capacity(front.len());
    for m in front.members() {
        let p = canonical(&m.objectives, dirs);
        if p.iter().zip(&r).any(|(x, y)| x > y) {
            return Err(HypervolumeError::ReferenceViolated {
                member: m.objectives,
                reference: *reference,
            });
        }
        pts.push(p);
    }
    Ok(hypervolume_min(&pts, &r))
}

/// Like [`hypervolume`], but members outside the reference box are ignored
/// instead of rejected. The measured region is the same; only the
/// precondition is relaxed.
pub fn hypervolume_bounded(front: &ParetoFront, reference: &ObjectiveVector) -> f64 {
    let dirs = front.directions();
    let pts: Vec<_> = front.members().iter().map(|m| canonical(&m.objectives, dirs)).collect();
    hypervolume_min(&pts, &canonical(reference, dirs))
}

/// Per-objective nadir of `front`, worsened by `margin` times each objective's range.
pub fn nadir_reference(front: &ParetoFront, margin: f64) -> Result<ObjectiveVector, HypervolumeError> {
    if front.is_empty() {
        return Err(HypervolumeError::EmptyFront);
    }
    let dirs: &Directions = front.directions();
    let mut out = [0.0; OBJECTIVE_COUNT];
    for j in 0..OBJECTIVE_COUNT {
        let col = front.members().iter().map(|m| m.objectives.to_array()[j]);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        out[j] = match dirs[j] {
            Direction::Maximize => lo - margin * range,
            Direction::Minimize => hi + margin * range,
        };
    }
    Ok(ObjectiveVector::from_array(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::DEFAULT_DIRECTIONS;
    use crate::space::{Configuration, Value};
    use crate::store::{SamplerTag, Trial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn front_of(points: &[ObjectiveVector]) -> ParetoFront {
        let members = points
            .iter()
            .enumerate()
            .map(|(i, &v)| Trial {
                config: Configuration::new(vec![Value::Int(i as i64)]),
                objectives: v,
                sampler_tag: SamplerTag::Oracle,
                seed: 0,
                sequence_number: i as u64,
                index: i,
            })
            .collect();
        ParetoFront::from_members(members, DEFAULT_DIRECTIONS)
    }

    #[test]
    fn single_point_is_a_box() {
        let f = front_of(&[ObjectiveVector::new(0.4, 1.0, 300.0)]);
        let r = ObjectiveVector::new(0.1, 3.0, 100.0);
        let hv = hypervolume(&f, &r).unwrap();
        assert!((hv - 0.3 * 2.0 * 200.0).abs() < 1e-9);
    }

    #[test]
    fn violated_reference_is_an_error() {
        let f = front_of(&[ObjectiveVector::new(0.4, 1.0, 300.0)]);
        let r = ObjectiveVector::new(0.5, 3.0, 100.0);
        assert!(matches!(hypervolume(&f, &r), Err(HypervolumeError::ReferenceViolated { .. })));
        assert_eq!(hypervolume_bounded(&f, &r), 0.0);
    }

    #[test]
    fn two_dimensional_overlap_by_inclusion_exclusion() {
        // two boxes sharing the full rate axis
        let pts = [[0.0, 2.0, 0.0], [1.0, 1.0, 0.0]];
        let hv = hypervolume_min(&pts, &[3.0, 3.0, 1.0]);
        // 3*1 + 2*2 - 2*1 = 5
        assert!((hv - 5.0).abs() < 1e-12);
    }

    #[test]
    fn subset_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 3]> = (0..30).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let r = [1.0, 1.0, 1.0];
        let mut prev = 0.0;
        for k in 1..=pts.len() {
            let hv = hypervolume_min(&pts[..k], &r);
            assert!(hv >= prev - 1e-15);
            prev = hv;
        }
    }

    #[test]
    fn matches_monte_carlo_on_random_front() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let pts: Vec<[f64; 3]> = (0..10).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let r = [1.0, 1.0, 1.0];
        let exact = hypervolume_min(&pts, &r);

        let samples = 10_000_000u32;
        let mut hits = 0u32;
        for _ in 0..samples {
            let x: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            if pts.iter().any(|p| p[0] <= x[0] && p[1] <= x[1] && p[2] <= x[2]) {
                hits += 1;
            }
        }
        let estimate = hits as f64 / samples as f64;
        assert!((exact - estimate).abs() / estimate < 0.01, "exact {exact} estimate {estimate}");
    }

    #[test]
    fn nadir_reference_is_worsened_by_margin() {
        let f = front_of(&[ObjectiveVector::new(0.2, 1.0, 100.0), ObjectiveVector::new(0.4, 3.0, 300.0)]);
        let r = nadir_reference(&f, 0.1).unwrap();
        assert!((r.acc - 0.18).abs() < 1e-12);
        assert!((r.eng - 3.2).abs() < 1e-12);
        assert!((r.rate - 80.0).abs() < 1e-12);
        assert!(hypervolume(&f, &r).is_ok());
    }
}
