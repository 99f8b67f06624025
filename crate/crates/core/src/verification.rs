//! 1:1 verification primitives: embeddings, pair construction, cosine scores,
//! thresholded decisions and confusion counts.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    identity_id: String,
    vector: Vec<f64>,
}

impl Embedding {
    pub fn new(identity_id: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let identity_id = identity_id.into();
        if vector.is_empty() {
            return Err(Error::EmptyEmbedding {
                identity: identity_id,
            });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteComponent {
                identity: identity_id,
                index,
            });
        }
        Ok(Self {
            identity_id,
            vector,
        })
    }

    pub fn identity_id(&self) -> &str {
        &self.identity_id
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    fn norm(&self) -> f64 {
        self.vector.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One verification pair: the similarity of two samples and whether they
/// share an identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub identity_a: String,
    pub identity_b: String,
    pub score: f64,
    pub is_genuine: bool,
}

impl LabeledScore {
    pub fn new(
        identity_a: impl Into<String>,
        identity_b: impl Into<String>,
        score: f64,
        is_genuine: bool,
    ) -> Result<Self> {
        let s = Self {
            identity_a: identity_a.into(),
            identity_b: identity_b.into(),
            score,
            is_genuine,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.score.is_finite() || !(-1.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidScore {
                identity_a: self.identity_a.clone(),
                identity_b: self.identity_b.clone(),
                score: self.score,
            });
        }
        if self.is_genuine && self.identity_a != self.identity_b {
            return Err(Error::GenuineIdentityMismatch {
                identity_a: self.identity_a.clone(),
                identity_b: self.identity_b.clone(),
            });
        }
        Ok(())
    }

    /// Decision rule: accept as same-identity iff `score >= tau`.
    #[inline]
    pub fn accepted_at(&self, tau: f64) -> bool {
        self.score >= tau
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn n_genuine(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn n_impostor(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.n_genuine() + self.n_impostor()
    }

    pub fn record(&mut self, is_genuine: bool, accepted: bool) {
        match (is_genuine, accepted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fpr: f64,
    pub fnr: f64,
    pub acc: f64,
}

/// A strictly increasing list of finite decision thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(
                "grid contains a non-finite value".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn single(tau: f64) -> Result<Self> {
        Self::new(vec![tau])
    }

    /// Parses `start:end:step`. Both endpoints are included when `end` lies
    /// within half a step of a grid point. Values are rounded to the decimal
    /// precision of the written `start`/`step` so `0.2 + 0.02` prints as `0.22`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid(format!(
                "expected start:end:step, got `{spec}`"
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidGrid(format!("`{s}` is not a finite number")))
        };
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "step must be positive, got {step}"
            )));
        }
        if end < start {
            return Err(Error::InvalidGrid(format!(
                "end {end} is below start {start}"
            )));
        }
        let decimals = [parts[0], parts[2]]
            .iter()
            .map(|s| s.trim().split_once('.').map_or(0, |(_, frac)| frac.len()))
            .max()
            .unwrap_or(0)
            .min(15) as i32;
        let scale = 10f64.powi(decimals);
        let count = ((end - start) / step + 0.5).floor() as usize + 1;
        let values = (0..count)
            .map(|i| ((start + i as f64 * step) * scale).round() / scale)
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    for (e, n) in [(a, na), (b, nb)] {
        if n == 0.0 {
            return Err(Error::ZeroNorm {
                identity: e.identity_id.clone(),
            });
        }
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

fn cosine_with_norms(a: &Embedding, b: &Embedding, na: f64, nb: f64) -> f64 {
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ImpostorSampling {
    /// Every cross-identity pair.
    Exhaustive,
    /// For each identity (in lexicographic order), at most `per_identity`
    /// impostor pairs drawn without replacement against identities that sort
    /// after it. Draws come from a ChaCha8 stream seeded with `seed`.
    Sampled { per_identity: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProtocol {
    pub impostors: ImpostorSampling,
    /// Fail when no identity has two or more embeddings.
    pub require_genuine: bool,
}

impl Default for PairProtocol {
    fn default() -> Self {
        Self {
            impostors: ImpostorSampling::Exhaustive,
            require_genuine: false,
        }
    }
}

/// Builds genuine and impostor pairs and scores them with cosine similarity.
///
/// Exhaustive mode emits pairs `(i, j)`, `i < j`, in input order. Sampled mode
/// emits every genuine pair in that order followed by the sampled impostors,
/// grouped by identity and sorted within each identity.
pub fn build_pairs(
    embeddings: &[Embedding],
    protocol: &PairProtocol,
    exec: Execution,
) -> Result<Vec<LabeledScore>> {
    if embeddings.len() < 2 {
        return Err(Error::TooFewEmbeddings {
            needed: 2,
            got: embeddings.len(),
        });
    }
    let dim = embeddings[0].dim();
    let mut seen: HashMap<(&str, Vec<u64>), usize> = HashMap::new();
    let mut norms = Vec::with_capacity(embeddings.len());
    for (i, e) in embeddings.iter().enumerate() {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: e.dim(),
            });
        }
        let key = (
            e.identity_id.as_str(),
            e.vector.iter().map(|v| v.to_bits()).collect(),
        );
        if let Some(&first) = seen.get(&key) {
            return Err(Error::DuplicateRecord {
                identity: e.identity_id.clone(),
                first,
                second: i,
            });
        }
        seen.insert(key, i);
        let n = e.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm {
                identity: e.identity_id.clone(),
            });
        }
        norms.push(n);
    }

    let mut by_identity: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in embeddings.iter().enumerate() {
        by_identity
            .entry(e.identity_id.as_str())
            .or_default()
            .push(i);
    }
    let has_genuine = by_identity.values().any(|v| v.len() >= 2);
    if protocol.require_genuine && !has_genuine {
        return Err(Error::NoGenuinePairs);
    }

    let index_pairs: Vec<(usize, usize)> = match protocol.impostors {
        ImpostorSampling::Exhaustive => {
            let m = embeddings.len();
            (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .collect()
        }
        ImpostorSampling::Sampled { per_identity, seed } => {
            let mut pairs: Vec<(usize, usize)> = by_identity
                .values()
                .flat_map(|members| {
                    members
                        .iter()
                        .enumerate()
                        .flat_map(move |(a, &i)| members[a + 1..].iter().map(move |&j| (i, j)))
                })
                .collect();
            pairs.sort_unstable();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let groups: Vec<&Vec<usize>> = by_identity.values().collect();
            for (p, members) in groups.iter().enumerate() {
                let mut others: Vec<usize> = groups[p + 1..]
                    .iter()
                    .flat_map(|g| g.iter().copied())
                    .collect();
                others.sort_unstable();
                let candidates = members.len() * others.len();
                let amount = per_identity.min(candidates);
                if amount == 0 {
                    continue;
                }
                let mut picks = index::sample(&mut rng, candidates, amount).into_vec();
                picks.sort_unstable();
                pairs.extend(
                    picks
                        .into_iter()
                        .map(|c| (members[c / others.len()], others[c % others.len()])),
                );
            }
            pairs
        }
    };

    Ok(exec.map(&index_pairs, |&(i, j)| {
        let (a, b) = (&embeddings[i], &embeddings[j]);
        LabeledScore {
            identity_a: a.identity_id.clone(),
            identity_b: b.identity_id.clone(),
            score: cosine_with_norms(a, b, norms[i], norms[j]),
            is_genuine: a.identity_id == b.identity_id,
        }
    }))
}

/// Confusion counts with the accept-on-ties rule `score >= tau`.
pub fn confusion_at(scores: &[LabeledScore], tau: f64) -> Result<ConfusionCounts> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut c = ConfusionCounts::default();
    for s in scores {
        c.record(s.is_genuine, s.accepted_at(tau));
    }
    Ok(c)
}

pub fn rates(c: &ConfusionCounts) -> Result<Rates> {
    if c.n_genuine() == 0 {
        return Err(Error::MissingClass("no genuine pairs"));
    }
    if c.n_impostor() == 0 {
        return Err(Error::MissingClass("no impostor pairs"));
    }
    Ok(Rates {
        fpr: c.fp as f64 / c.n_impostor() as f64,
        fnr: c.fn_ as f64 / c.n_genuine() as f64,
        acc: (c.tp + c.tn) as f64 / c.total() as f64,
    })
}

/// Per-class sorted scores; answers `confusion_at` in O(log n) per threshold.
#[derive(Debug, Clone, Default)]
pub struct SortedScores {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl SortedScores {
    pub fn from_scores<'a>(scores: impl IntoIterator<Item = &'a LabeledScore>) -> Self {
        let mut out = Self::default();
        for s in scores {
            if s.is_genuine {
                out.genuine.push(s.score);
            } else {
                out.impostor.push(s.score);
            }
        }
        out.genuine.sort_by(f64::total_cmp);
        out.impostor.sort_by(f64::total_cmp);
        out
    }

    pub fn counts_at(&self, tau: f64) -> ConfusionCounts {
        let accepted = |v: &[f64]| (v.len() - v.partition_point(|&s| s < tau)) as u64;
        let tp = accepted(&self.genuine);
        let fp = accepted(&self.impostor);
        ConfusionCounts {
            tp,
            fp,
            tn: self.impostor.len() as u64 - fp,
            fn_: self.genuine.len() as u64 - tp,
        }
    }

    pub fn genuine(&self) -> &[f64] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }
}
