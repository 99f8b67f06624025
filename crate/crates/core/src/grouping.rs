//! Group partitions over identities and assignment of pairs to groups.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verification::LabeledScore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Group {
    pub label: String,
    pub members: BTreeSet<String>,
}

/// Disjoint groups of identities, ordered lexicographically by label.
#[derive(Debug, Clone, Serialize)]
pub struct GroupPartition {
    name: String,
    groups: Vec<Group>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for GroupPartition {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.groups == other.groups
    }
}

impl GroupPartition {
    /// Groups may arrive in any order; they are sorted by label. Labels must be
    /// unique, groups non-empty and pairwise disjoint. `K = 1` is accepted here
    /// and rejected by [`GroupPartition::require_comparable`].
    pub fn new(
        name: impl Into<String>,
        groups: impl IntoIterator<Item = (String, BTreeSet<String>)>,
    ) -> Result<Self> {
        let mut sorted: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (label, members) in groups {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("group `{label}` is empty")));
            }
            if sorted.insert(label.clone(), members).is_some() {
                return Err(Error::InvalidPartition(format!(
                    "duplicate group label `{label}`"
                )));
            }
        }
        if sorted.is_empty() {
            return Err(Error::InvalidPartition("partition has no groups".into()));
        }
        let mut index = HashMap::new();
        let groups: Vec<Group> = sorted
            .into_iter()
            .map(|(label, members)| Group { label, members })
            .collect();
        for (k, g) in groups.iter().enumerate() {
            for id in &g.members {
                if let Some(prev) = index.insert(id.clone(), k) {
                    return Err(Error::InvalidPartition(format!(
                        "identity `{id}` appears in both `{}` and `{}`",
                        groups[prev].label, g.label
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            groups,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }

    pub fn group_of(&self, identity: &str) -> Option<usize> {
        self.index.get(identity).copied()
    }

    pub fn require_comparable(&self) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::InvalidPartition(format!(
                "partition `{}` has {} group(s); fairness analysis needs at least 2",
                self.name,
                self.k()
            )));
        }
        Ok(())
    }
}

/// What to do with identities whose first character is not a letter A-Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonAlphaPolicy {
    Reject,
    #[default]
    Drop,
    /// Collect them in an extra group labelled `OTHER`.
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxyPartition {
    pub partition: GroupPartition,
    pub dropped: Vec<String>,
}

pub const PROXY_PARTITION_NAME: &str = "proxy-initial";

/// Initial-letter ranges: A-F -> "A", G-L -> "B", M-R -> "C", S-Z -> "D".
pub fn proxy_label(identity: &str) -> Option<&'static str> {
    let c = identity.chars().next()?.to_ascii_uppercase();
    match c {
        'A'..='F' => Some("A"),
        'G'..='L' => Some("B"),
        'M'..='R' => Some("C"),
        'S'..='Z' => Some("D"),
        _ => None,
    }
}

pub fn proxy_partition<'a>(
    identities: impl IntoIterator<Item = &'a str>,
    policy: NonAlphaPolicy,
) -> Result<ProxyPartition> {
    let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut dropped = BTreeSet::new();
    let mut any = false;
    for id in identities {
        any = true;
        match (proxy_label(id), policy) {
            (Some(label), _) => {
                groups
                    .entry(label.to_string())
                    .or_default()
                    .insert(id.to_string());
            }
            (None, NonAlphaPolicy::Reject) => {
                return Err(Error::NonAlphabeticIdentity(id.to_string()))
            }
            (None, NonAlphaPolicy::Drop) => {
                dropped.insert(id.to_string());
            }
            (None, NonAlphaPolicy::Other) => {
                groups
                    .entry("OTHER".to_string())
                    .or_default()
                    .insert(id.to_string());
            }
        }
    }
    if !any {
        return Err(Error::InvalidPartition("no identities to partition".into()));
    }
    Ok(ProxyPartition {
        partition: GroupPartition::new(PROXY_PARTITION_NAME, groups)?,
        dropped: dropped.into_iter().collect(),
    })
}

/// All non-empty cell intersections of `p` and `q`, labelled `p_label×q_label`.
/// Identities present in only one input are left out.
pub fn intersect_partitions(p: &GroupPartition, q: &GroupPartition) -> Result<GroupPartition> {
    let mut cells = Vec::new();
    for gp in &p.groups {
        for gq in &q.groups {
            let both: BTreeSet<String> = gp.members.intersection(&gq.members).cloned().collect();
            if !both.is_empty() {
                cells.push((format!("{}×{}", gp.label, gq.label), both));
            }
        }
    }
    if cells.len() < 2 {
        return Err(Error::InvalidPartition(format!(
            "intersection of `{}` and `{}` has {} non-empty group(s); need at least 2",
            p.name,
            q.name,
            cells.len()
        )));
    }
    GroupPartition::new(format!("{}×{}", p.name, q.name), cells)
}

/// Handling of impostor pairs whose identities fall in different groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossGroupPolicy {
    #[default]
    Exclude,
    /// Count the pair in both groups.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Group(usize),
    Both(usize, usize),
    CrossGroup,
    UnknownIdentity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AssignmentDiagnostics {
    pub assigned: usize,
    pub cross_group_excluded: usize,
    pub cross_group_duplicated: usize,
    pub unknown_identity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGroupAssignment {
    pub policy: CrossGroupPolicy,
    pub partition_name: String,
    pub group_labels: Vec<String>,
    pub membership: Vec<Membership>,
    /// Pair indices per group, ascending.
    pub group_pairs: Vec<Vec<usize>>,
    pub diagnostics: AssignmentDiagnostics,
}

impl PairGroupAssignment {
    pub fn k(&self) -> usize {
        self.group_labels.len()
    }

    pub fn label_of(&self, pair: usize) -> Option<&str> {
        match self.membership.get(pair)? {
            Membership::Group(k) => Some(&self.group_labels[*k]),
            _ => None,
        }
    }
}

/// A pair joins group `g` iff both identities are members of `g`; pairs
/// spanning two groups follow `policy`.
pub fn assign_pairs(
    scores: &[LabeledScore],
    partition: &GroupPartition,
    policy: CrossGroupPolicy,
) -> PairGroupAssignment {
    let mut group_pairs = vec![Vec::new(); partition.k()];
    let mut diagnostics = AssignmentDiagnostics::default();
    let membership = scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            match (
                partition.group_of(&s.identity_a),
                partition.group_of(&s.identity_b),
            ) {
                (Some(a), Some(b)) if a == b => {
                    group_pairs[a].push(i);
                    diagnostics.assigned += 1;
                    Membership::Group(a)
                }
                (Some(a), Some(b)) => match policy {
                    CrossGroupPolicy::Exclude => {
                        diagnostics.cross_group_excluded += 1;
                        Membership::CrossGroup
                    }
                    CrossGroupPolicy::Duplicate => {
                        group_pairs[a].push(i);
                        group_pairs[b].push(i);
                        diagnostics.cross_group_duplicated += 1;
                        Membership::Both(a.min(b), a.max(b))
                    }
                },
                _ => {
                    diagnostics.unknown_identity += 1;
                    Membership::UnknownIdentity
                }
            }
        })
        .collect();
    PairGroupAssignment {
        policy,
        partition_name: partition.name.clone(),
        group_labels: partition.labels(),
        membership,
        group_pairs,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn part(name: &str, groups: &[(&str, &[&str])]) -> GroupPartition {
        GroupPartition::new(name, groups.iter().map(|(l, m)| (l.to_string(), set(m)))).unwrap()
    }

    #[test]
    fn proxy_examples() {
        let p =
            proxy_partition(["Alice", "George", "Maria", "Susan"], NonAlphaPolicy::Drop).unwrap();
        let want = part(
            PROXY_PARTITION_NAME,
            &[
                ("A", &["Alice"]),
                ("B", &["George"]),
                ("C", &["Maria"]),
                ("D", &["Susan"]),
            ],
        );
        assert_eq!(p.partition, want);

        let p = proxy_partition(["Aaron", "Frank"], NonAlphaPolicy::Drop).unwrap();
        assert_eq!(p.partition.k(), 1);
        assert_eq!(p.partition.groups()[0].members, set(&["Aaron", "Frank"]));

        let p = proxy_partition(["Zoe"], NonAlphaPolicy::Drop).unwrap();
        assert_eq!(p.partition.labels(), vec!["D"]);
        assert!(p.partition.require_comparable().is_err());
    }

    #[test]
    fn proxy_lowercase_and_non_alpha() {
        let ids = ["alice", "zed", "3po", "_x"];
        let p = proxy_partition(ids, NonAlphaPolicy::Drop).unwrap();
        assert_eq!(p.partition.labels(), vec!["A", "D"]);
        assert_eq!(p.dropped, vec!["3po", "_x"]);
        let p = proxy_partition(ids, NonAlphaPolicy::Other).unwrap();
        assert_eq!(p.partition.labels(), vec!["A", "D", "OTHER"]);
        assert!(matches!(
            proxy_partition(ids, NonAlphaPolicy::Reject),
            Err(Error::NonAlphabeticIdentity(_))
        ));
        assert!(proxy_partition([], NonAlphaPolicy::Drop).is_err());
    }

    #[test]
    fn partition_rejects_overlap() {
        let r = GroupPartition::new("p", [("X".into(), set(&["a"])), ("Y".into(), set(&["a"]))]);
        assert!(r.is_err());
    }

    #[test]
    fn intersect_examples() {
        let p = part("p", &[("X", &["a", "b"]), ("Y", &["c"])]);
        let q = part("q", &[("U", &["a"]), ("V", &["b", "c"])]);
        let r = intersect_partitions(&p, &q).unwrap();
        assert_eq!(
            r.groups(),
            part("p×q", &[("X×U", &["a"]), ("X×V", &["b"]), ("Y×V", &["c"])]).groups()
        );

        let pp = intersect_partitions(&p, &p).unwrap();
        let cells: Vec<_> = pp.groups().iter().map(|g| g.members.clone()).collect();
        let orig: Vec<_> = p.groups().iter().map(|g| g.members.clone()).collect();
        assert_eq!(cells, orig);

        let four = part(
            "four",
            &[
                ("A", &["a", "b"]),
                ("B", &["c", "d"]),
                ("C", &["e", "f"]),
                ("D", &["g", "h"]),
            ],
        );
        let two = part(
            "two",
            &[("m", &["a", "c", "e", "g"]), ("n", &["b", "d", "f", "h"])],
        );
        assert_eq!(intersect_partitions(&four, &two).unwrap().k(), 8);

        let single = part("s", &[("Z", &["a", "b"])]);
        let q1 = part("q", &[("U", &["a", "b"])]);
        assert!(intersect_partitions(&single, &q1).is_err());
    }

    #[test]
    fn assign_examples() {
        let p = proxy_partition(["Alice", "Aaron", "Susan"], NonAlphaPolicy::Drop)
            .unwrap()
            .partition;
        let scores = vec![
            LabeledScore::new("Alice", "Alice", 0.9, true).unwrap(),
            LabeledScore::new("Alice", "Susan", 0.2, false).unwrap(),
            LabeledScore::new("Alice", "Aaron", 0.1, false).unwrap(),
            LabeledScore::new("Alice", "Nobody", 0.1, false).unwrap(),
        ];
        let a = assign_pairs(&scores, &p, CrossGroupPolicy::Exclude);
        assert_eq!(a.label_of(0), Some("A"));
        assert_eq!(a.membership[1], Membership::CrossGroup);
        assert_eq!(a.label_of(2), Some("A"));
        assert_eq!(a.membership[3], Membership::UnknownIdentity);
        assert_eq!(a.group_pairs, vec![vec![0, 2], vec![]]);
        assert_eq!(a.diagnostics.cross_group_excluded, 1);
        assert_eq!(a.diagnostics.unknown_identity, 1);

        let d = assign_pairs(&scores, &p, CrossGroupPolicy::Duplicate);
        assert_eq!(d.membership[1], Membership::Both(0, 1));
        assert_eq!(d.group_pairs, vec![vec![0, 1, 2], vec![1]]);
        assert_eq!(d.label_of(2), Some("A"));
    }

    proptest! {
        #[test]
        fn proxy_is_a_partition_of_input(
            mut ids in prop::collection::btree_set("[A-Za-z0-9_]{1,6}", 0..40),
            anchor in "[A-Za-z][a-z]{0,4}",
        ) {
            ids.insert(anchor);
            let p = proxy_partition(ids.iter().map(String::as_str), NonAlphaPolicy::Drop).unwrap();
            let mut union: BTreeSet<String> = p.dropped.iter().cloned().collect();
            let mut total = p.dropped.len();
            for g in p.partition.groups() {
                total += g.members.len();
                union.extend(g.members.iter().cloned());
            }
            prop_assert_eq!(total, ids.len());
            prop_assert_eq!(union, ids);
        }

        #[test]
        fn exclude_policy_keeps_pairs_within_one_group(
            pairs in prop::collection::vec(("[a-z]", "[a-z]"), 1..40)
        ) {
            let ids: BTreeSet<String> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
            let p = proxy_partition(ids.iter().map(String::as_str), NonAlphaPolicy::Drop).unwrap().partition;
            let scores: Vec<_> = pairs.iter()
                .map(|(a, b)| LabeledScore::new(a, b, 0.0, a == b).unwrap())
                .collect();
            let asg = assign_pairs(&scores, &p, CrossGroupPolicy::Exclude);
            for (k, members) in asg.group_pairs.iter().enumerate() {
                for &i in members {
                    prop_assert_eq!(p.group_of(&scores[i].identity_a), Some(k));
                    prop_assert_eq!(p.group_of(&scores[i].identity_b), Some(k));
                }
            }
            for (i, s) in scores.iter().enumerate() {
                if s.is_genuine {
                    prop_assert!(matches!(asg.membership[i], Membership::Group(_)));
                }
            }
        }
    }
}
