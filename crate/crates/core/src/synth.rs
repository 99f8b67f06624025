//! Seeded synthetic score datasets.
//!
//! Each group draws from its own ChaCha8 stream (`rand_chacha`), selected with
//! `set_stream` on a generator seeded by `seed_from_u64(seed)`. Genuine scores
//! are drawn before impostor scores. Normal variates come from
//! `rand_distr::Normal` (ziggurat); truncation to `[-1, 1]` is by rejection.
//! None of this depends on platform or thread count, so `(specs, seed)` fully
//! determines a dataset.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::GroupPartition;
use crate::verification::{LabeledScore, ThresholdGrid};

/// Rejection budget per truncated-normal draw.
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    TruncatedNormal,
    /// Uniform on `[location - scale, location + scale]`.
    Uniform,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub family: Family,
    pub location: f64,
    #[serde(default)]
    pub scale: f64,
}

impl ScoreDistribution {
    pub fn truncated_normal(location: f64, scale: f64) -> Self {
        Self {
            family: Family::TruncatedNormal,
            location,
            scale,
        }
    }

    pub fn uniform(location: f64, scale: f64) -> Self {
        Self {
            family: Family::Uniform,
            location,
            scale,
        }
    }

    pub fn point_mass(location: f64) -> Self {
        Self {
            family: Family::PointMass,
            location,
            scale: 0.0,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthSpec(format!("{what}: {m}")));
        if !self.location.is_finite() || !(-1.0..=1.0).contains(&self.location) {
            return bad(format!("location {} outside [-1, 1]", self.location));
        }
        if !self.scale.is_finite() || self.scale < 0.0 {
            return bad(format!(
                "scale {} must be finite and non-negative",
                self.scale
            ));
        }
        if self.family == Family::Uniform
            && (self.location - self.scale < -1.0 || self.location + self.scale > 1.0)
        {
            return bad(format!(
                "uniform support [{}, {}] leaves [-1, 1]",
                self.location - self.scale,
                self.location + self.scale
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, group: &str) -> Result<f64> {
        if self.scale == 0.0 || self.family == Family::PointMass {
            return Ok(self.location);
        }
        match self.family {
            Family::Uniform => {
                Ok(rng.random_range(self.location - self.scale..=self.location + self.scale))
            }
            Family::TruncatedNormal => {
                let normal = Normal::new(self.location, self.scale)
                    .map_err(|e| Error::InvalidSynthSpec(e.to_string()))?;
                for _ in 0..MAX_REJECTIONS {
                    let x = normal.sample(rng);
                    if (-1.0..=1.0).contains(&x) {
                        return Ok(x);
                    }
                }
                Err(Error::SamplingBudgetExhausted {
                    group: group.to_string(),
                })
            }
            Family::PointMass => unreachable!(),
        }
    }
}

fn default_identities() -> i64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScoreSpec {
    pub group_label: String,
    pub genuine: ScoreDistribution,
    pub impostor: ScoreDistribution,
    pub n_genuine: i64,
    pub n_impostor: i64,
    /// Synthetic identities in this group; pairs cycle over them.
    #[serde(default = "default_identities")]
    pub n_identities: i64,
    /// Random stream; defaults to the group's position in the list. Groups
    /// sharing a stream and distributions draw identical scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<u64>,
}

impl GroupScoreSpec {
    pub fn new(
        group_label: impl Into<String>,
        genuine: ScoreDistribution,
        impostor: ScoreDistribution,
        n_genuine: i64,
        n_impostor: i64,
    ) -> Self {
        Self {
            group_label: group_label.into(),
            genuine,
            impostor,
            n_genuine,
            n_impostor,
            n_identities: default_identities(),
            stream: None,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = Some(stream);
        self
    }

    fn validate(&self) -> Result<()> {
        let label = &self.group_label;
        if label.is_empty() {
            return Err(Error::InvalidSynthSpec("empty group label".into()));
        }
        if self.n_genuine < 0 || self.n_impostor < 0 {
            return Err(Error::InvalidSynthSpec(format!(
                "group `{label}`: counts must be non-negative (genuine {}, impostor {})",
                self.n_genuine, self.n_impostor
            )));
        }
        let min_ids = if self.n_impostor > 0 { 2 } else { 1 };
        if self.n_identities < min_ids {
            return Err(Error::InvalidSynthSpec(format!(
                "group `{label}`: needs at least {min_ids} identities, got {}",
                self.n_identities
            )));
        }
        self.genuine.validate(&format!("group `{label}` genuine"))?;
        self.impostor.validate(&format!("group `{label}` impostor"))
    }

    /// Identity label `i` of this group. Groups named `A`..`D` get initials
    /// that the proxy rule maps back to the same label.
    pub fn identity(&self, i: usize) -> String {
        let initial = match self.group_label.as_str() {
            "A" => "A",
            "B" => "G",
            "C" => "M",
            "D" => "S",
            _ => "",
        };
        format!("{initial}{}_{i:03}", self.group_label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthDataset {
    pub seed: u64,
    pub specs: Vec<GroupScoreSpec>,
    pub scores: Vec<LabeledScore>,
}

impl SynthDataset {
    /// The partition the generator intended, as an explicit mapping.
    pub fn partition(&self) -> Result<GroupPartition> {
        let groups: BTreeMap<String, BTreeSet<String>> = self
            .specs
            .iter()
            .map(|s| {
                let ids = (0..s.n_identities as usize)
                    .map(|i| s.identity(i))
                    .collect();
                (s.group_label.clone(), ids)
            })
            .collect();
        GroupPartition::new("synthetic", groups)
    }
}

pub fn generate(specs: &[GroupScoreSpec], seed: u64) -> Result<SynthDataset> {
    if specs.len() < 2 {
        return Err(Error::InvalidSynthSpec(format!(
            "need at least 2 group specs, got {}",
            specs.len()
        )));
    }
    let mut labels = BTreeSet::new();
    for s in specs {
        s.validate()?;
        if !labels.insert(s.group_label.as_str()) {
            return Err(Error::InvalidSynthSpec(format!(
                "duplicate group label `{}`",
                s.group_label
            )));
        }
    }
    if specs.iter().all(|s| s.n_genuine == 0 && s.n_impostor == 0) {
        return Err(Error::InvalidSynthSpec("every count is zero".into()));
    }

    let mut scores = Vec::new();
    for (pos, spec) in specs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(spec.stream.unwrap_or(pos as u64));
        let n_ids = spec.n_identities as usize;
        for i in 0..spec.n_genuine as usize {
            let id = spec.identity(i % n_ids);
            let s = spec.genuine.sample(&mut rng, &spec.group_label)?;
            scores.push(LabeledScore::new(id.clone(), id, s, true)?);
        }
        for i in 0..spec.n_impostor as usize {
            let a = spec.identity(i % n_ids);
            let b = spec.identity((i + 1) % n_ids);
            let s = spec.impostor.sample(&mut rng, &spec.group_label)?;
            scores.push(LabeledScore::new(a, b, s, false)?);
        }
    }
    Ok(SynthDataset {
        seed,
        specs: specs.to_vec(),
        scores,
    })
}

/// A named dataset recipe with the threshold grid it is meant to be read on.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub specs: Vec<GroupScoreSpec>,
    pub seed: u64,
    pub grid: ThresholdGrid,
}

impl Fixture {
    pub fn generate(&self) -> Result<SynthDataset> {
        generate(&self.specs, self.seed)
    }
}

pub const FIXTURE_SEED: u64 = 20_240_601;

/// Four groups tuned so that at `tau = 0.5` the per-group FPR and FNR are
/// A 0.05/0.03, B 0.06/0.04, C 0.08/0.05, D 0.10/0.06. Each class is normal
/// with scale 0.15, truncated to [-1, 1]; locations solve
/// `P(X < 0.5 | -1 <= X <= 1) = target`, which for the genuine class sits a
/// few thousandths above the untruncated `0.5 + 0.15 * z`. Per-group accuracy
/// is then fixed by the class mix (20 000 genuine, 40 000 impostor) and lands
/// near 0.91-0.96.
pub fn table_ii_fixture() -> Fixture {
    let rows = [
        ("A", 0.7875, 0.2533),
        ("B", 0.7669, 0.2668),
        ("C", 0.7503, 0.2892),
        ("D", 0.7362, 0.3078),
    ];
    Fixture {
        name: "table-ii",
        specs: rows
            .iter()
            .map(|&(g, gen, imp)| {
                GroupScoreSpec::new(
                    g,
                    ScoreDistribution::truncated_normal(gen, 0.15),
                    ScoreDistribution::truncated_normal(imp, 0.15),
                    20_000,
                    40_000,
                )
            })
            .collect(),
        seed: FIXTURE_SEED,
        grid: ThresholdGrid::parse("0.40:0.50:0.02").expect("static grid"),
    }
}

/// Group `k` has impostor location `0.15 + 0.06k` and genuine location
/// `0.75 - 0.06k`: FPR and FNR rise with `k` while ACC falls, at every
/// threshold on the grid, so raw rank orderings of ACC and the error rates are
/// reversed throughout.
pub fn opposing_conclusions_fixture() -> Fixture {
    Fixture {
        name: "opposing-conclusions",
        specs: ["A", "B", "C", "D"]
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let k = k as f64;
                GroupScoreSpec::new(
                    *g,
                    ScoreDistribution::truncated_normal(0.75 - 0.06 * k, 0.15),
                    ScoreDistribution::truncated_normal(0.15 + 0.06 * k, 0.15),
                    8_000,
                    8_000,
                )
            })
            .collect(),
        seed: FIXTURE_SEED,
        grid: ThresholdGrid::parse("0.30:0.50:0.02").expect("static grid"),
    }
}

/// Group A has wide impostor scores, group D narrow ones centred higher: D
/// has the larger FPR at low thresholds and A at high thresholds. D's genuine
/// scores sit lower, so D has the larger FNR everywhere.
pub fn threshold_flip_fixture() -> Fixture {
    Fixture {
        name: "threshold-flip",
        specs: vec![
            GroupScoreSpec::new(
                "A",
                ScoreDistribution::truncated_normal(0.75, 0.10),
                ScoreDistribution::truncated_normal(0.0, 0.30),
                6_000,
                6_000,
            ),
            GroupScoreSpec::new(
                "D",
                ScoreDistribution::truncated_normal(0.55, 0.15),
                ScoreDistribution::truncated_normal(0.20, 0.08),
                6_000,
                6_000,
            ),
        ],
        seed: FIXTURE_SEED,
        grid: ThresholdGrid::parse("0.10:0.50:0.04").expect("static grid"),
    }
}

/// Four groups drawing identical scores from one shared stream.
pub fn agreement_fixture() -> Fixture {
    Fixture {
        name: "agreement",
        specs: ["A", "B", "C", "D"]
            .iter()
            .map(|g| {
                GroupScoreSpec::new(
                    *g,
                    ScoreDistribution::truncated_normal(0.70, 0.12),
                    ScoreDistribution::truncated_normal(0.20, 0.12),
                    2_000,
                    2_000,
                )
                .with_stream(0)
            })
            .collect(),
        seed: FIXTURE_SEED,
        grid: ThresholdGrid::parse("0.30:0.60:0.05").expect("static grid"),
    }
}

/// The opposing-conclusions, threshold-flip and agreement fixtures.
pub fn phenomena_suite() -> Vec<Fixture> {
    vec![
        opposing_conclusions_fixture(),
        threshold_flip_fixture(),
        agreement_fixture(),
    ]
}

pub fn fixture_by_name(name: &str) -> Option<Fixture> {
    match name {
        "table-ii" => Some(table_ii_fixture()),
        "opposing-conclusions" => Some(opposing_conclusions_fixture()),
        "threshold-flip" => Some(threshold_flip_fixture()),
        "agreement" => Some(agreement_fixture()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_mass() -> Vec<GroupScoreSpec> {
        ["A", "B"]
            .iter()
            .map(|g| {
                GroupScoreSpec::new(
                    *g,
                    ScoreDistribution::point_mass(0.9),
                    ScoreDistribution::point_mass(0.1),
                    5,
                    5,
                )
            })
            .collect()
    }

    #[test]
    fn deterministic_and_in_range() {
        let f = table_ii_fixture();
        let a = f.generate().unwrap();
        let b = f.generate().unwrap();
        assert_eq!(a, b);
        assert!(a.scores.iter().all(|s| (-1.0..=1.0).contains(&s.score)));
        assert_eq!(a.scores.len(), 4 * 60_000);
        let c = generate(&f.specs, f.seed + 1).unwrap();
        assert_ne!(a.scores, c.scores);
    }

    #[test]
    fn identities_follow_proxy_rule() {
        let d = generate(&two_point_mass(), 1).unwrap();
        let p = d.partition().unwrap();
        for g in p.groups() {
            for id in &g.members {
                assert_eq!(crate::grouping::proxy_label(id), Some(g.label.as_str()));
            }
        }
        assert!(d
            .scores
            .iter()
            .filter(|s| !s.is_genuine)
            .all(|s| s.identity_a != s.identity_b));
    }

    #[test]
    fn shared_stream_gives_identical_groups() {
        let d = agreement_fixture().generate().unwrap();
        let per_group: Vec<Vec<f64>> = d
            .specs
            .iter()
            .map(|s| {
                d.scores
                    .iter()
                    .filter(|x| x.identity_a.contains(&format!("{}_", s.group_label)))
                    .map(|x| x.score)
                    .collect()
            })
            .collect();
        assert!(per_group.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn validation_errors() {
        let mut specs = two_point_mass();
        specs[0].n_genuine = -1;
        assert!(matches!(
            generate(&specs, 0),
            Err(Error::InvalidSynthSpec(_))
        ));

        let mut specs = two_point_mass();
        specs[1].impostor = ScoreDistribution::uniform(0.9, 0.2);
        assert!(generate(&specs, 0).is_err());

        let mut specs = two_point_mass();
        specs[1].genuine = ScoreDistribution::truncated_normal(1.5, 0.1);
        assert!(generate(&specs, 0).is_err());

        let mut specs = two_point_mass();
        specs[1].group_label = "A".into();
        assert!(generate(&specs, 0).is_err());

        assert!(generate(&two_point_mass()[..1], 0).is_err());

        let mut specs = two_point_mass();
        for s in &mut specs {
            s.n_genuine = 0;
            s.n_impostor = 0;
        }
        assert!(generate(&specs, 0).is_err());
    }

    #[test]
    fn uniform_stays_in_support() {
        let specs: Vec<_> = ["A", "B"]
            .iter()
            .map(|g| {
                GroupScoreSpec::new(
                    *g,
                    ScoreDistribution::uniform(0.5, 0.5),
                    ScoreDistribution::uniform(-0.5, 0.2),
                    200,
                    200,
                )
            })
            .collect();
        let d = generate(&specs, 9).unwrap();
        for s in &d.scores {
            if s.is_genuine {
                assert!((0.0..=1.0).contains(&s.score));
            } else {
                assert!((-0.7..=-0.3).contains(&s.score));
            }
        }
    }
}
