//! Synthetic 24-hour pedestrian-traffic scenarios.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS: usize = 24;
pub const FRAMES_PER_HOUR: usize = 60;
pub const FRAMES_PER_DAY: usize = HOURS * FRAMES_PER_HOUR;

const SCENARIO_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (expected weekdays, weekends or a scenario file)")]
    UnknownKind(String),
    #[error("malformed scenario document: {0}")]
    Schema(String),
    #[error("scenario needs {HOURS} hour labels, got {0}")]
    HourCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    /// No pedestrians.
    Zero,
    /// 1 to 3 pedestrians.
    Low,
    /// 4 to 5 pedestrians.
    High,
}

impl Density {
    pub fn bucket(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Density::Zero => 0..=0,
            Density::Low => 1..=3,
            Density::High => 4..=5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub hours: Vec<Density>,
    /// True pedestrian count of each frame, 60 frames per hour.
    pub frames: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Weekdays,
    Weekends,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Weekdays => "weekdays",
            ScenarioKind::Weekends => "weekends",
        }
    }

    pub fn hour_labels(self) -> Vec<Density> {
        use Density::*;
        let spans: &[(usize, usize, Density)] = match self {
            // three commuting/lunch/leaving peaks
            ScenarioKind::Weekdays => &[
                (0, 5, Zero),
                (6, 8, High),
                (9, 11, Low),
                (12, 13, High),
                (14, 16, Low),
                (17, 19, High),
                (20, 23, Zero),
            ],
            // lighter traffic rising steadily towards the night
            ScenarioKind::Weekends => &[(0, 8, Zero), (9, 19, Low), (20, 22, High), (23, 23, Low)],
        };
        let mut labels = vec![Zero; HOURS];
        for &(from, to, d) in spans {
            labels[from..=to].fill(d);
        }
        labels
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weekdays" => Ok(ScenarioKind::Weekdays),
            "weekends" => Ok(ScenarioKind::Weekends),
            other => Err(ScenarioError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    name: String,
    hours: Vec<Density>,
}

impl Scenario {
    /// Expands hour labels into per-frame counts drawn uniformly from each bucket.
    pub fn from_labels(name: impl Into<String>, hours: Vec<Density>, seed: u64) -> Result<Self, ScenarioError> {
        if hours.len() != HOURS {
            return Err(ScenarioError::HourCount(hours.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SCENARIO_STREAM);
        let frames = hours
            .iter()
            .flat_map(|d| std::iter::repeat_n(*d, FRAMES_PER_HOUR))
            .map(|d| rng.gen_range(d.bucket()))
            .collect();
        Ok(Scenario {
            name: name.into(),
            seed,
            hours,
            frames,
        })
    }

    /// Custom scenario from a TOML document with `name` and 24 `hours` labels.
    pub fn parse(document: &str, seed: u64) -> Result<Self, ScenarioError> {
        let doc: ScenarioDocument = toml::from_str(document).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        Scenario::from_labels(doc.name, doc.hours, seed)
    }

    /// Reorders whole hours inside each run of equal labels so that hourly
    /// totals never decrease across `hours`. Frames keep their bucket.
    pub fn sort_label_runs(&mut self, hours: std::ops::RangeInclusive<usize>) {
        let (first, last) = (*hours.start(), (*hours.end()).min(HOURS - 1));
        let mut start = first;
        while start <= last {
            let mut end = start;
            while end < last && self.hours[end + 1] == self.hours[start] {
                end += 1;
            }
            let span = &mut self.frames[start * FRAMES_PER_HOUR..(end + 1) * FRAMES_PER_HOUR];
            let mut blocks: Vec<Vec<u8>> = span.chunks(FRAMES_PER_HOUR).map(<[u8]>::to_vec).collect();
            blocks.sort_by_key(|b| b.iter().map(|&c| c as u32).sum::<u32>());
            span.copy_from_slice(&blocks.concat());
            start = end + 1;
        }
    }

    pub fn hour_of_frame(frame: usize) -> usize {
        frame / FRAMES_PER_HOUR
    }

    pub fn hour_mean(&self, hour: usize) -> f64 {
        let frames = &self.frames[hour * FRAMES_PER_HOUR..(hour + 1) * FRAMES_PER_HOUR];
        frames.iter().map(|&c| c as f64).sum::<f64>() / FRAMES_PER_HOUR as f64
    }
}

pub fn generate_scenario(kind: ScenarioKind, seed: u64) -> Scenario {
    let mut scenario = Scenario::from_labels(kind.name(), kind.hour_labels(), seed).expect("built-in labels cover 24 hours");
    if kind == ScenarioKind::Weekends {
        scenario.sort_label_runs(0..=22);
    }
    scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    fn high_runs(labels: &[Density]) -> usize {
        labels
            .iter()
            .enumerate()
            .filter(|&(i, d)| *d == Density::High && (i == 0 || labels[i - 1] != Density::High))
            .count()
    }

    #[test]
    fn weekdays_have_three_peaks() {
        let s = generate_scenario(ScenarioKind::Weekdays, 1);
        assert_eq!(high_runs(&s.hours), 3);
        assert_eq!(s.frames.len(), 1440);
    }

    #[test]
    fn weekends_rise_until_night() {
        for seed in 0..10 {
            let s = generate_scenario(ScenarioKind::Weekends, seed);
            assert_eq!(s.frames.len(), FRAMES_PER_DAY);
            let means: Vec<f64> = (0..=22).map(|h| s.hour_mean(h)).collect();
            assert!(means.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {means:?}");
        }
    }

    #[test]
    fn frames_stay_in_their_bucket() {
        for kind in [ScenarioKind::Weekdays, ScenarioKind::Weekends] {
            for seed in 0..5 {
                let s = generate_scenario(kind, seed);
                for (i, &c) in s.frames.iter().enumerate() {
                    assert!(s.hours[Scenario::hour_of_frame(i)].bucket().contains(&c));
                }
            }
        }
    }

    #[test]
    fn weekdays_carry_more_traffic() {
        for seed in 0..10 {
            let total = |k| generate_scenario(k, seed).frames.iter().map(|&c| c as u32).sum::<u32>();
            assert!(total(ScenarioKind::Weekends) < total(ScenarioKind::Weekdays));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate_scenario(ScenarioKind::Weekdays, 4), generate_scenario(ScenarioKind::Weekdays, 4));
        assert_ne!(
            generate_scenario(ScenarioKind::Weekdays, 4).frames,
            generate_scenario(ScenarioKind::Weekdays, 5).frames
        );
    }

    #[test]
    fn unknown_kind_and_custom_documents() {
        assert_eq!("holiday".parse::<ScenarioKind>(), Err(ScenarioError::UnknownKind("holiday".into())));
        let doc = format!("name = \"flat\"\nhours = [{}]\n", vec!["\"low\""; 24].join(", "));
        let s = Scenario::parse(&doc, 3).unwrap();
        assert!(s.frames.iter().all(|c| (1..=3).contains(c)));
        let short = "name = \"x\"\nhours = [\"low\"]\n";
        assert_eq!(Scenario::parse(short, 0), Err(ScenarioError::HourCount(1)));
    }
}
