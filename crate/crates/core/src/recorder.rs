//! Per-neuron activation statistics over prompt sets.
//!
//! For one prompt, a neuron's value is the sum over positions of its FFN
//! inner activation. Across a prompt set, the firing probability is the
//! fraction of prompts whose sum is strictly positive, and the contrast
//! between opposing prompt sets is the elementwise difference of those
//! probabilities. Counts are stored as integers so that merging partial
//! profiles is exact and order-independent.

use crate::dataset::PromptBundle;
use crate::model::{self, ForwardTrace, GenerationParams, ModelError, Weights};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error("shape mismatch: {a_layers}x{a_ff} vs {b_layers}x{b_ff}")]
    ShapeMismatch { a_layers: usize, a_ff: usize, b_layers: usize, b_ff: usize },
    #[error("profile is empty (no records accumulated)")]
    EmptyProfile,
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Dense per-(layer, neuron) storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronGrid<T> {
    pub n_layers: usize,
    pub d_ff: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> NeuronGrid<T> {
    pub fn new(n_layers: usize, d_ff: usize) -> NeuronGrid<T> {
        NeuronGrid { n_layers, d_ff, data: vec![T::default(); n_layers * d_ff] }
    }

    #[inline]
    pub fn get(&self, layer: usize, neuron: usize) -> T {
        self.data[layer * self.d_ff + neuron]
    }

    #[inline]
    pub fn set(&mut self, layer: usize, neuron: usize, value: T) {
        self.data[layer * self.d_ff + neuron] = value;
    }

    pub fn same_shape<U>(&self, other: &NeuronGrid<U>) -> bool {
        self.n_layers == other.n_layers && self.d_ff == other.d_ff
    }

    /// Iterates (layer, neuron, value) in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(|(i, v)| (i / self.d_ff, i % self.d_ff, *v))
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }
}

fn shape_err<A, B>(a: &NeuronGrid<A>, b: &NeuronGrid<B>) -> RecorderError {
    RecorderError::ShapeMismatch {
        a_layers: a.n_layers,
        a_ff: a.d_ff,
        b_layers: b.n_layers,
        b_ff: b.d_ff,
    }
}

/// Summed activations of one prompt: m[layer][neuron] over all positions.
#[derive(Debug, Clone)]
pub struct ActivationRecord {
    pub prompt_id: String,
    pub m: NeuronGrid<f32>,
    pub seq_len: usize,
}

/// Firing counts over a prompt set.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub fire_counts: NeuronGrid<u64>,
    pub n_records: u64,
}

impl ActivationProfile {
    pub fn empty(n_layers: usize, d_ff: usize) -> ActivationProfile {
        ActivationProfile { fire_counts: NeuronGrid::new(n_layers, d_ff), n_records: 0 }
    }
}

/// Firing probabilities of two opposing prompt sets and their difference.
#[derive(Debug, Clone)]
pub struct ContrastProfile {
    pub p_plus: NeuronGrid<f64>,
    pub p_minus: NeuronGrid<f64>,
    pub delta: NeuronGrid<f64>,
    pub n_plus: u64,
    pub n_minus: u64,
}

/// Computes summed activations from a trace. This is the canonical reduction
/// the recorder applies; tests recompute it independently from the trace.
pub fn sum_activations(trace: &ForwardTrace) -> NeuronGrid<f32> {
    let n_layers = trace.activations.len();
    let d_ff = if n_layers > 0 { trace.activations[0].cols } else { 0 };
    let mut m = NeuronGrid::new(n_layers, d_ff);
    for (layer, acts) in trace.activations.iter().enumerate() {
        for neuron in 0..d_ff {
            let mut acc = 0.0f32;
            for pos in 0..trace.seq_len {
                acc += acts.get(pos, neuron);
            }
            m.set(layer, neuron, acc);
        }
    }
    m
}

/// Records one raw token sequence. With `generation` set, the sum spans the
/// prompt plus the greedy continuation; otherwise it spans the prompt alone
/// (a single teacher-forced pass).
pub fn record_tokens(
    weights: &Weights,
    prompt_id: &str,
    tokens: &[u32],
    generation: Option<&GenerationParams>,
) -> Result<ActivationRecord, RecorderError> {
    let trace = match generation {
        None => model::forward(weights, tokens, None)?,
        Some(params) => {
            let out = model::generate_greedy(weights, tokens, params, None)?;
            let mut full = tokens.to_vec();
            full.extend_from_slice(&out.tokens);
            // By causality, per-position activations of this single pass
            // equal those observed during decoding.
            model::forward(weights, &full, None)?
        }
    };
    let m = sum_activations(&trace);
    Ok(ActivationRecord { prompt_id: prompt_id.to_string(), m, seq_len: trace.seq_len })
}

/// Records one assembled prompt by tokenizing its text.
pub fn record_prompt(
    weights: &Weights,
    bundle: &PromptBundle,
    generation: Option<&GenerationParams>,
) -> Result<ActivationRecord, RecorderError> {
    let tokens = model::tokenize(&bundle.prompt);
    record_tokens(weights, &bundle.item_id, &tokens, generation)
}

/// Folds a record into a profile: counts increment where m is strictly
/// positive (a sum of exactly zero does not fire).
pub fn accumulate(
    profile: &mut ActivationProfile,
    record: &ActivationRecord,
) -> Result<(), RecorderError> {
    if !profile.fire_counts.same_shape(&record.m) {
        return Err(shape_err(&profile.fire_counts, &record.m));
    }
    for (layer, neuron, value) in record.m.iter() {
        if value > 0.0 {
            let c = profile.fire_counts.get(layer, neuron);
            profile.fire_counts.set(layer, neuron, c + 1);
        }
    }
    profile.n_records += 1;
    Ok(())
}

/// Empirical firing probability per neuron: counts / N.
pub fn probability(profile: &ActivationProfile) -> Result<NeuronGrid<f64>, RecorderError> {
    if profile.n_records == 0 {
        return Err(RecorderError::EmptyProfile);
    }
    let mut p = NeuronGrid::new(profile.fire_counts.n_layers, profile.fire_counts.d_ff);
    for (layer, neuron, count) in profile.fire_counts.iter() {
        p.set(layer, neuron, count as f64 / profile.n_records as f64);
    }
    Ok(p)
}

/// Elementwise probability difference between opposing prompt sets.
pub fn contrast(
    plus: &ActivationProfile,
    minus: &ActivationProfile,
) -> Result<ContrastProfile, RecorderError> {
    if !plus.fire_counts.same_shape(&minus.fire_counts) {
        return Err(shape_err(&plus.fire_counts, &minus.fire_counts));
    }
    let p_plus = probability(plus)?;
    let p_minus = probability(minus)?;
    let mut delta = NeuronGrid::new(p_plus.n_layers, p_plus.d_ff);
    for (layer, neuron, p) in p_plus.iter() {
        delta.set(layer, neuron, p - p_minus.get(layer, neuron));
    }
    Ok(ContrastProfile {
        p_plus,
        p_minus,
        delta,
        n_plus: plus.n_records,
        n_minus: minus.n_records,
    })
}

/// Exact commutative merge of two partial profiles.
pub fn merge(
    a: &ActivationProfile,
    b: &ActivationProfile,
) -> Result<ActivationProfile, RecorderError> {
    if !a.fire_counts.same_shape(&b.fire_counts) {
        return Err(shape_err(&a.fire_counts, &b.fire_counts));
    }
    let mut out = a.clone();
    for (layer, neuron, count) in b.fire_counts.iter() {
        let c = out.fire_counts.get(layer, neuron);
        out.fire_counts.set(layer, neuron, c + count);
    }
    out.n_records += b.n_records;
    Ok(out)
}

/// CSV form `layer,neuron,fire_count,n,p`.
pub fn profile_to_csv(profile: &ActivationProfile) -> Result<String, RecorderError> {
    let p = probability(profile)?;
    let mut out = String::from("layer,neuron,fire_count,n,p\n");
    for (layer, neuron, count) in profile.fire_counts.iter() {
        out.push_str(&format!(
            "{layer},{neuron},{count},{n},{prob}\n",
            n = profile.n_records,
            prob = p.get(layer, neuron)
        ));
    }
    Ok(out)
}

/// CSV form `layer,neuron,fire_count_plus,n_plus,p_plus,fire_count_minus,n_minus,p_minus,delta`.
pub fn contrast_to_csv(contrast: &ContrastProfile) -> String {
    let mut out = String::from(
        "layer,neuron,fire_count_plus,n_plus,p_plus,fire_count_minus,n_minus,p_minus,delta\n",
    );
    for (layer, neuron, delta) in contrast.delta.iter() {
        let p_plus = contrast.p_plus.get(layer, neuron);
        let p_minus = contrast.p_minus.get(layer, neuron);
        let fc_plus = (p_plus * contrast.n_plus as f64).round() as u64;
        let fc_minus = (p_minus * contrast.n_minus as f64).round() as u64;
        out.push_str(&format!(
            "{layer},{neuron},{fc_plus},{},{p_plus},{fc_minus},{},{p_minus},{delta}\n",
            contrast.n_plus, contrast.n_minus
        ));
    }
    out
}

/// Parses the contrast CSV form back into a profile.
pub fn contrast_from_csv(text: &str) -> Result<ContrastProfile, RecorderError> {
    let mut rows: Vec<(usize, usize, f64, f64, f64, u64, u64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(RecorderError::Csv {
                line: idx + 1,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let parse_err = |message: String| RecorderError::Csv { line: idx + 1, message };
        let layer: usize = fields[0].parse().map_err(|e| parse_err(format!("layer: {e}")))?;
        let neuron: usize = fields[1].parse().map_err(|e| parse_err(format!("neuron: {e}")))?;
        let n_plus: u64 = fields[3].parse().map_err(|e| parse_err(format!("n_plus: {e}")))?;
        let p_plus: f64 = fields[4].parse().map_err(|e| parse_err(format!("p_plus: {e}")))?;
        let n_minus: u64 = fields[6].parse().map_err(|e| parse_err(format!("n_minus: {e}")))?;
        let p_minus: f64 = fields[7].parse().map_err(|e| parse_err(format!("p_minus: {e}")))?;
        let delta: f64 = fields[8].parse().map_err(|e| parse_err(format!("delta: {e}")))?;
        rows.push((layer, neuron, p_plus, p_minus, delta, n_plus, n_minus));
    }
    let n_layers = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let d_ff = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let mut p_plus = NeuronGrid::new(n_layers, d_ff);
    let mut p_minus = NeuronGrid::new(n_layers, d_ff);
    let mut delta = NeuronGrid::new(n_layers, d_ff);
    let (mut n_plus, mut n_minus) = (0u64, 0u64);
    for (layer, neuron, pp, pm, d, np, nm) in rows {
        p_plus.set(layer, neuron, pp);
        p_minus.set(layer, neuron, pm);
        delta.set(layer, neuron, d);
        n_plus = np;
        n_minus = nm;
    }
    Ok(ContrastProfile { p_plus, p_minus, delta, n_plus, n_minus })
}
