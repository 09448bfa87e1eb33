//! The Schwartz value hierarchy: four higher-order dimensions, ten subvalue
//! groups, and the atomic values beneath them.
//!
//! The canonical tree is the vocabulary every other module keys on. It is a
//! rooted DAG rather than a strict tree: the Hedonism subvalue (Pleasure,
//! Enjoying life) belongs to both Openness to Change and Self-Enhancement,
//! so those two atomics each contribute two membership triples.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// The four canonical higher-order value dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "Openness to Change")]
    OpennessToChange,
    #[serde(rename = "Self-Transcendence")]
    SelfTranscendence,
    #[serde(rename = "Conservation")]
    Conservation,
    #[serde(rename = "Self-Enhancement")]
    SelfEnhancement,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::OpennessToChange,
        Dimension::SelfTranscendence,
        Dimension::Conservation,
        Dimension::SelfEnhancement,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::OpennessToChange => "Openness to Change",
            Dimension::SelfTranscendence => "Self-Transcendence",
            Dimension::Conservation => "Conservation",
            Dimension::SelfEnhancement => "Self-Enhancement",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownDimension(s.to_string()))
    }
}

/// Orientation of an atomic value: the listed value itself, or its opposing
/// ("reversed") counterpart carrying the same name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Reversed,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => f.write_str("Positive"),
            Polarity::Reversed => f.write_str("Reversed"),
        }
    }
}

impl FromStr for Polarity {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Positive" => Ok(Polarity::Positive),
            "Reversed" => Ok(Polarity::Reversed),
            other => Err(TaxonomyError::UnknownPolarity(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown dimension: {0:?}")]
    UnknownDimension(String),
    #[error("unknown polarity: {0:?}")]
    UnknownPolarity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicValue {
    pub name: String,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubValue {
    pub name: String,
    pub atomics: Vec<AtomicValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionNode {
    pub dimension: Dimension,
    pub subvalues: Vec<SubValue>,
}

/// One (dimension, subvalue, atomic) location in the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub dimension: Dimension,
    pub subvalue: String,
    pub atomic: String,
}

/// The value hierarchy plus its flattened membership listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueTree {
    dimensions: Vec<DimensionNode>,
    membership: Vec<Membership>,
}

/// Source listing for the canonical tree, in listing order.
const CANONICAL: [(Dimension, &[(&str, &[&str])]); 4] = [
    (
        Dimension::OpennessToChange,
        &[
            (
                "Self-Direction",
                &["Creativity", "Freedom", "Independent", "Curious", "Choosing own goals"],
            ),
            ("Stimulation", &["A varied life", "An exciting life", "Daring"]),
            ("Hedonism", &["Pleasure", "Enjoying life"]),
        ],
    ),
    (
        Dimension::SelfTranscendence,
        &[
            (
                "Universalism",
                &[
                    "Broad-mindedness",
                    "Wisdom",
                    "Social justice",
                    "Equality",
                    "A world at peace",
                    "Protecting the environment",
                    "Unity with nature",
                    "A world of beauty",
                ],
            ),
            (
                "Benevolence",
                &[
                    "Helpfulness",
                    "Honesty",
                    "Forgiveness",
                    "Loyalty",
                    "Responsibility",
                    "True friendship",
                    "Mature love",
                ],
            ),
        ],
    ),
    (
        Dimension::Conservation,
        &[
            ("Tradition", &["Respect for tradition", "Humility", "Devoutness", "Moderation"]),
            (
                "Conformity",
                &["Self-discipline", "Obedience", "Politeness", "Honoring of parents and elders"],
            ),
            (
                "Security",
                &[
                    "National security",
                    "Family security",
                    "Social order",
                    "Cleanliness",
                    "Reciprocation of favors",
                    "Health",
                    "Sense of belonging",
                ],
            ),
        ],
    ),
    (
        Dimension::SelfEnhancement,
        &[
            ("Achievement", &["Success", "Capability", "Intelligence", "Ambition", "Influence"]),
            (
                "Power",
                &[
                    "Social power",
                    "Authority",
                    "Wealth",
                    "Preservation of one's public image",
                    "Social recognition",
                ],
            ),
            ("Hedonism", &["Pleasure", "Enjoying life"]),
        ],
    ),
];

/// Builds the canonical value tree. Deterministic; every call returns an
/// identical structure.
pub fn canonical_tree() -> ValueTree {
    let dimensions: Vec<DimensionNode> = CANONICAL
        .iter()
        .map(|(dimension, subvalues)| DimensionNode {
            dimension: *dimension,
            subvalues: subvalues
                .iter()
                .map(|(name, atomics)| SubValue {
                    name: (*name).to_string(),
                    atomics: atomics
                        .iter()
                        .map(|a| AtomicValue {
                            name: (*a).to_string(),
                            polarity: Polarity::Positive,
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    ValueTree::from_dimensions(dimensions)
}

impl ValueTree {
    /// Assembles a tree from dimension nodes, deriving the membership list.
    pub fn from_dimensions(dimensions: Vec<DimensionNode>) -> ValueTree {
        let mut membership = Vec::new();
        for node in &dimensions {
            for sub in &node.subvalues {
                for atomic in &sub.atomics {
                    // Membership is over names: a Reversed atomic shares its
                    // Positive counterpart's entry rather than adding one.
                    if atomic.polarity == Polarity::Positive {
                        membership.push(Membership {
                            dimension: node.dimension,
                            subvalue: sub.name.clone(),
                            atomic: atomic.name.clone(),
                        });
                    }
                }
            }
        }
        ValueTree { dimensions, membership }
    }

    pub fn dimensions(&self) -> &[DimensionNode] {
        &self.dimensions
    }

    pub fn membership(&self) -> &[Membership] {
        &self.membership
    }

    /// Every (subvalue, atomic) pair under the named dimension, each atomic
    /// appearing once per orientation: listing order, Positive before
    /// Reversed.
    pub fn enumerate_pairs(
        &self,
        dimension: &str,
    ) -> Result<Vec<(String, AtomicValue)>, TaxonomyError> {
        let dimension = Dimension::from_str(dimension)?;
        let mut pairs = Vec::new();
        for entry in self.membership.iter().filter(|m| m.dimension == dimension) {
            for polarity in [Polarity::Positive, Polarity::Reversed] {
                pairs.push((
                    entry.subvalue.clone(),
                    AtomicValue { name: entry.atomic.clone(), polarity },
                ));
            }
        }
        Ok(pairs)
    }

    /// All membership locations of the named atomic; empty when absent.
    pub fn lookup_atomic(&self, name: &str) -> Vec<(Dimension, String)> {
        self.membership
            .iter()
            .filter(|m| m.atomic == name)
            .map(|m| (m.dimension, m.subvalue.clone()))
            .collect()
    }

    /// Whether (dimension, subvalue, atomic) is a membership entry.
    pub fn contains(&self, dimension: Dimension, subvalue: &str, atomic: &str) -> bool {
        self.membership
            .iter()
            .any(|m| m.dimension == dimension && m.subvalue == subvalue && m.atomic == atomic)
    }

    /// Distinct atomic names under a dimension.
    pub fn atomic_names(&self, dimension: Dimension) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .membership
            .iter()
            .filter(|m| m.dimension == dimension)
            .map(|m| m.atomic.as_str())
            .collect();
        names.dedup();
        names
    }

    /// Line-delimited export, one membership triple per line:
    /// `dimension<TAB>subvalue<TAB>atomic<TAB>polarity`.
    pub fn export_tsv(&self) -> String {
        let mut out = String::new();
        for node in &self.dimensions {
            for sub in &node.subvalues {
                for atomic in &sub.atomics {
                    out.push_str(node.dimension.as_str());
                    out.push('\t');
                    out.push_str(&sub.name);
                    out.push('\t');
                    out.push_str(&atomic.name);
                    out.push('\t');
                    out.push_str(&atomic.polarity.to_string());
                    out.push('\n');
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn canonical_counts() {
        let tree = canonical_tree();
        assert_eq!(tree.dimensions().len(), 4);
        let groups: Vec<&str> = tree
            .dimensions()
            .iter()
            .flat_map(|d| d.subvalues.iter().map(|s| s.name.as_str()))
            .collect();
        assert_eq!(groups.len(), 11); // Hedonism listed under two dimensions
        let distinct_groups: BTreeSet<&str> = groups.into_iter().collect();
        assert_eq!(distinct_groups.len(), 10);

        assert_eq!(tree.membership().len(), 52);
        let distinct_atomics: BTreeSet<&str> =
            tree.membership().iter().map(|m| m.atomic.as_str()).collect();
        assert_eq!(distinct_atomics.len(), 50);
    }

    #[test]
    fn canonical_is_deterministic() {
        assert_eq!(canonical_tree(), canonical_tree());
        assert_eq!(canonical_tree().export_tsv(), canonical_tree().export_tsv());
    }

    #[test]
    fn membership_contains_creativity() {
        let tree = canonical_tree();
        assert!(tree.contains(Dimension::OpennessToChange, "Self-Direction", "Creativity"));
    }

    #[test]
    fn pair_counts_match_membership() {
        let tree = canonical_tree();
        assert_eq!(tree.enumerate_pairs("Openness to Change").unwrap().len(), 20);
        assert_eq!(tree.enumerate_pairs("Conservation").unwrap().len(), 30);
        for dimension in Dimension::ALL {
            let n = tree.membership().iter().filter(|m| m.dimension == dimension).count();
            let pairs = tree.enumerate_pairs(dimension.as_str()).unwrap();
            assert_eq!(pairs.len(), 2 * n);
        }
    }

    #[test]
    fn pairs_interleave_positive_then_reversed() {
        let tree = canonical_tree();
        let pairs = tree.enumerate_pairs("Openness to Change").unwrap();
        assert_eq!(pairs[0].0, "Self-Direction");
        assert_eq!(pairs[0].1.name, "Creativity");
        assert_eq!(pairs[0].1.polarity, Polarity::Positive);
        assert_eq!(pairs[1].1.name, "Creativity");
        assert_eq!(pairs[1].1.polarity, Polarity::Reversed);
    }

    #[test]
    fn unknown_dimension_is_an_error() {
        let tree = canonical_tree();
        let err = tree.enumerate_pairs("Ethics").unwrap_err();
        assert!(matches!(err, TaxonomyError::UnknownDimension(_)));
    }

    #[test]
    fn lookup_pleasure_finds_both_homes() {
        let tree = canonical_tree();
        let hits = tree.lookup_atomic("Pleasure");
        assert_eq!(
            hits,
            vec![
                (Dimension::OpennessToChange, "Hedonism".to_string()),
                (Dimension::SelfEnhancement, "Hedonism".to_string()),
            ]
        );
        assert_eq!(
            tree.lookup_atomic("Creativity"),
            vec![(Dimension::OpennessToChange, "Self-Direction".to_string())]
        );
        assert!(tree.lookup_atomic("Nonexistent").is_empty());
    }

    #[test]
    fn export_has_one_line_per_triple() {
        let tree = canonical_tree();
        let tsv = tree.export_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 52);
        assert_eq!(lines[0], "Openness to Change\tSelf-Direction\tCreativity\tPositive");
        for line in lines {
            assert_eq!(line.split('\t').count(), 4);
        }
    }

    #[test]
    fn dimension_parsing_round_trips() {
        for d in Dimension::ALL {
            assert_eq!(Dimension::from_str(d.as_str()).unwrap(), d);
        }
        assert!(Dimension::from_str("openness to change").is_err());
    }
}
