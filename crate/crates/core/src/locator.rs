//! Classifies neurons from contrastive deltas against a threshold and
//! reports how the flagged neurons distribute over layers.

use crate::recorder::ContrastProfile;
use crate::taxonomy::Dimension;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LocatorError {
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    InvalidTau(f64),
    #[error("catalog csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("unknown neuron class: {0:?}")]
    UnknownClass(String),
}

/// Classification of one neuron relative to a value dimension.
///
/// Boundary deltas are non-neutral: delta equal to the threshold (or its
/// negation) classifies as a value neuron, matching the branch conditions of
/// the editing rule that consumes the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuronClass {
    PositiveValue,
    NegativeValue,
    Neutral,
}

impl fmt::Display for NeuronClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuronClass::PositiveValue => f.write_str("PositiveValue"),
            NeuronClass::NegativeValue => f.write_str("NegativeValue"),
            NeuronClass::Neutral => f.write_str("Neutral"),
        }
    }
}

impl FromStr for NeuronClass {
    type Err = LocatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PositiveValue" => Ok(NeuronClass::PositiveValue),
            "NegativeValue" => Ok(NeuronClass::NegativeValue),
            "Neutral" => Ok(NeuronClass::Neutral),
            other => Err(LocatorError::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub layer: usize,
    pub neuron: usize,
    pub delta: f64,
    pub class: NeuronClass,
}

/// Every neuron of a model classified against one dimension, sorted by
/// (layer, neuron). The model digest ties the catalog to the weights it was
/// measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronCatalog {
    pub entries: Vec<CatalogEntry>,
    pub threshold: f64,
    pub dimension: Dimension,
    pub model_digest: String,
    pub n_layers: usize,
    pub d_ff: usize,
}

pub fn classify_delta(delta: f64, tau: f64) -> NeuronClass {
    if delta >= tau {
        NeuronClass::PositiveValue
    } else if delta <= -tau {
        NeuronClass::NegativeValue
    } else {
        NeuronClass::Neutral
    }
}

/// Classifies every neuron of a contrast profile.
pub fn classify(
    contrast: &ContrastProfile,
    tau: f64,
    dimension: Dimension,
    model_digest: &str,
) -> Result<NeuronCatalog, LocatorError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(LocatorError::InvalidTau(tau));
    }
    let entries = contrast
        .delta
        .iter()
        .map(|(layer, neuron, delta)| CatalogEntry {
            layer,
            neuron,
            delta,
            class: classify_delta(delta, tau),
        })
        .collect();
    Ok(NeuronCatalog {
        entries,
        threshold: tau,
        dimension,
        model_digest: model_digest.to_string(),
        n_layers: contrast.delta.n_layers,
        d_ff: contrast.delta.d_ff,
    })
}

impl NeuronCatalog {
    pub fn flagged(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.class != NeuronClass::Neutral)
    }

    pub fn n_flagged(&self) -> usize {
        self.flagged().count()
    }

    /// The k non-neutral entries with largest |delta|; exact ties resolve to
    /// the lower (layer, neuron) coordinate.
    pub fn top_k(&self, k: usize) -> Vec<&CatalogEntry> {
        let mut flagged: Vec<&CatalogEntry> = self.flagged().collect();
        flagged.sort_by(|a, b| {
            b.delta
                .abs()
                .partial_cmp(&a.delta.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| (a.layer, a.neuron).cmp(&(b.layer, b.neuron)))
        });
        flagged.truncate(k);
        flagged
    }

    /// CSV form `layer,neuron,delta,class`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,neuron,delta,class\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.layer, e.neuron, e.delta, e.class));
        }
        out
    }

    /// Parses the CSV form. Threshold, dimension, and digest travel in the
    /// run manifest, not in the CSV, so the caller supplies them.
    pub fn from_csv(
        text: &str,
        threshold: f64,
        dimension: Dimension,
        model_digest: &str,
    ) -> Result<NeuronCatalog, LocatorError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(LocatorError::Csv {
                    line: idx + 1,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let err = |message: String| LocatorError::Csv { line: idx + 1, message };
            entries.push(CatalogEntry {
                layer: fields[0].parse().map_err(|e| err(format!("layer: {e}")))?,
                neuron: fields[1].parse().map_err(|e| err(format!("neuron: {e}")))?,
                delta: fields[2].parse().map_err(|e| err(format!("delta: {e}")))?,
                class: fields[3].parse()?,
            });
        }
        let n_layers = entries.iter().map(|e| e.layer + 1).max().unwrap_or(0);
        let d_ff = entries.iter().map(|e| e.neuron + 1).max().unwrap_or(0);
        Ok(NeuronCatalog {
            entries,
            threshold,
            dimension,
            model_digest: model_digest.to_string(),
            n_layers,
            d_ff,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCounts {
    pub layer: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Per-layer counts of flagged neurons and the global flagged fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub per_layer: Vec<LayerCounts>,
    pub total_neurons: usize,
    pub flagged_fraction: f64,
}

pub fn distribution_report(catalog: &NeuronCatalog) -> DistributionReport {
    let mut per_layer: Vec<LayerCounts> = (0..catalog.n_layers)
        .map(|layer| LayerCounts { layer, positive: 0, negative: 0 })
        .collect();
    for e in &catalog.entries {
        match e.class {
            NeuronClass::PositiveValue => per_layer[e.layer].positive += 1,
            NeuronClass::NegativeValue => per_layer[e.layer].negative += 1,
            NeuronClass::Neutral => {}
        }
    }
    let total_neurons = catalog.n_layers * catalog.d_ff;
    let flagged: usize = per_layer.iter().map(|l| l.positive + l.negative).sum();
    let flagged_fraction =
        if total_neurons == 0 { 0.0 } else { flagged as f64 / total_neurons as f64 };
    DistributionReport { per_layer, total_neurons, flagged_fraction }
}

impl DistributionReport {
    /// CSV form `layer,positive_count,negative_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,positive_count,negative_count\n");
        for l in &self.per_layer {
            out.push_str(&format!("{},{},{}\n", l.layer, l.positive, l.negative));
        }
        out
    }
}
