//! Synthetic transformers with planted ground-truth value neurons.
//!
//! Ground truth is created by weight construction, not training: reserved
//! embedding axes give marker tokens exact, provable reach into chosen FFN
//! neurons, so locator precision/recall and editing effect direction can be
//! measured against a known answer.
//!
//! Construction sketch (axes of the embedding space):
//!
//! - axis 0 / axis 1 — the class markers. Every other token embedding is
//!   zeroed on these axes, so only the markers can reach a planted row.
//! - axis 2 — a trigger channel. A computed fraction of filler bytes carry
//!   it; planted neurons fire on any trigger, which fixes their firing
//!   probability on marker-free prompts and therefore pins the expected
//!   contrast gap near `target_gap` instead of trivially at 1.
//! - axis 3 — the write channel. Planted second-matrix columns write onto
//!   it, and the unembedding maps it onto the plus-marker logit (positively)
//!   and the minus-marker logit (negatively).
//!
//! To keep the statistics exact rather than approximate, everything that
//! would mix marker content across positions or layers is neutralised:
//! positional embeddings are zeroed, FFN first matrices outside the planted
//! layer are zeroed, and attention output is zeroed everywhere except one
//! mixing layer directly above the planted layer. That mixing layer uses
//! uniform causal attention over identity projections, which carries planted
//! writes to later positions so edits are visible in next-token logits.

use crate::editor::{self, EditPolicy};
use crate::locator::{NeuronCatalog, NeuronClass};
use crate::model::{self, ModelConfig, ModelError, Weights};
use crate::recorder::{self, ActivationProfile, ContrastProfile, RecorderError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Fixed prompt length for generated class prompts.
pub const SYNTH_SEQ_LEN: usize = 16;

const MARKER_EMB: f32 = 1.0;
const ROW_MARKER_GAIN: f32 = 1.5;
const TRIGGER_EMB: f32 = 1.0;
const ROW_TRIGGER_GAIN: f32 = 1.5;
const WRITE_GAIN: f32 = 1.0;
const TRANSPORT_GAIN: f32 = 1.0;

const MARKER_PLUS_AXIS: usize = 0;
const MARKER_MINUS_AXIS: usize = 1;
const TRIGGER_AXIS: usize = 2;
const WRITE_AXIS: usize = 3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("planted layer {layer} out of range for {n_layers} layers")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("planted layer {0} needs a mixing layer above it; use at least two layers")]
    NoMixingLayer(usize),
    #[error("planted neuron index {neuron} out of range for d_ff {d_ff}")]
    NeuronOutOfRange { neuron: usize, d_ff: usize },
    #[error("duplicate planted neuron index {0}")]
    DuplicatePlant(usize),
    #[error("d_model {d_model} too small to orthogonalize; must exceed 2 + {planted} planted")]
    DimensionTooSmall { d_model: usize, planted: usize },
    #[error("markers must be distinct byte tokens below 256, got {plus} and {minus}")]
    BadMarkers { plus: u32, minus: u32 },
    #[error("target_gap must lie in (0, 1], got {0}")]
    BadGap(f64),
    #[error("n_prompts_per_class must be at least 1")]
    NoPrompts,
    #[error("catalog digest {catalog} does not match ground truth digest {truth}")]
    DigestMismatch { catalog: String, truth: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Recorder(#[from] RecorderError),
    #[error(transparent)]
    Editor(#[from] editor::EditorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantSign {
    Plus,
    Minus,
}

impl PlantSign {
    fn factor(self) -> f32 {
        match self {
            PlantSign::Plus => 1.0,
            PlantSign::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for PlantSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlantSign::Plus => f.write_str("+"),
            PlantSign::Minus => f.write_str("-"),
        }
    }
}

/// What to plant and how separable the classes should be.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSpec {
    pub layer: usize,
    pub planted: Vec<(usize, PlantSign)>,
    pub marker_plus: u32,
    pub marker_minus: u32,
    pub target_gap: f64,
    pub n_prompts_per_class: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedNeuron {
    pub layer: usize,
    pub neuron: usize,
    pub sign: PlantSign,
    pub expected_delta: f64,
}

/// The provable answer key for one constructed model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted: Vec<PlantedNeuron>,
    pub model_digest: String,
    pub target_gap: f64,
    pub marker_plus: u32,
    pub marker_minus: u32,
}

impl PlantSpec {
    fn validate(&self, config: &ModelConfig) -> Result<(), SynthError> {
        if self.layer >= config.n_layers {
            return Err(SynthError::LayerOutOfRange {
                layer: self.layer,
                n_layers: config.n_layers,
            });
        }
        if self.layer + 1 >= config.n_layers {
            return Err(SynthError::NoMixingLayer(self.layer));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(neuron, _) in &self.planted {
            if neuron >= config.d_ff {
                return Err(SynthError::NeuronOutOfRange { neuron, d_ff: config.d_ff });
            }
            if !seen.insert(neuron) {
                return Err(SynthError::DuplicatePlant(neuron));
            }
        }
        if config.d_model <= 2 + self.planted.len() {
            return Err(SynthError::DimensionTooSmall {
                d_model: config.d_model,
                planted: self.planted.len(),
            });
        }
        if self.marker_plus == self.marker_minus
            || self.marker_plus >= model::BYTE_VOCAB as u32
            || self.marker_minus >= model::BYTE_VOCAB as u32
        {
            return Err(SynthError::BadMarkers {
                plus: self.marker_plus,
                minus: self.marker_minus,
            });
        }
        if !(self.target_gap > 0.0 && self.target_gap <= 1.0) {
            return Err(SynthError::BadGap(self.target_gap));
        }
        if self.n_prompts_per_class == 0 {
            return Err(SynthError::NoPrompts);
        }
        Ok(())
    }

    /// Filler alphabet: every byte token except the two markers.
    pub fn filler_alphabet(&self) -> Vec<u32> {
        (0..model::BYTE_VOCAB as u32)
            .filter(|&b| b != self.marker_plus && b != self.marker_minus)
            .collect()
    }

    /// Trigger bytes: the largest prefix of the filler alphabet whose
    /// per-prompt no-trigger probability stays at or above `target_gap`.
    /// With `t` triggers in an alphabet of `A` and `F` filler positions,
    /// the expected contrast gap is (1 - t/A)^F >= target_gap.
    pub fn trigger_bytes(&self) -> Vec<u32> {
        let alphabet = self.filler_alphabet();
        let a = alphabet.len() as f64;
        let filler_positions = (SYNTH_SEQ_LEN - 1) as i32;
        let mut best = 0usize;
        for t in 0..alphabet.len() {
            if (1.0 - t as f64 / a).powi(filler_positions) >= self.target_gap {
                best = t;
            } else {
                break;
            }
        }
        alphabet[..best].to_vec()
    }

    /// The gap the construction actually realises (quantised to whole
    /// trigger bytes, never below `target_gap`).
    pub fn expected_gap(&self) -> f64 {
        let a = self.filler_alphabet().len() as f64;
        let t = self.trigger_bytes().len() as f64;
        (1.0 - t / a).powi((SYNTH_SEQ_LEN - 1) as i32)
    }
}

/// Builds a model with known value neurons. See the module docs for the
/// construction.
pub fn build_planted_model(
    config: &ModelConfig,
    spec: &PlantSpec,
) -> Result<(Weights, GroundTruth), SynthError> {
    spec.validate(config)?;
    let mut w = Weights::init_seeded(config)?;

    w.pos_emb.data.fill(0.0);

    // Reserved axes: markers and triggers own their coordinates exactly.
    let triggers: std::collections::BTreeSet<u32> = spec.trigger_bytes().into_iter().collect();
    for token in 0..config.vocab_size {
        let row = w.token_emb.row_mut(token);
        row[MARKER_PLUS_AXIS] = 0.0;
        row[MARKER_MINUS_AXIS] = 0.0;
        row[TRIGGER_AXIS] =
            if triggers.contains(&(token as u32)) { TRIGGER_EMB } else { 0.0 };
    }
    for (marker, axis) in [
        (spec.marker_plus, MARKER_PLUS_AXIS),
        (spec.marker_minus, MARKER_MINUS_AXIS),
    ] {
        let row = w.token_emb.row_mut(marker as usize);
        row.fill(0.0);
        row[axis] = MARKER_EMB;
    }

    // Neutralise cross-position and cross-layer mixing except one uniform
    // mixing layer above the plant.
    let mixing_layer = spec.layer + 1;
    for (l, layer) in w.layers.iter_mut().enumerate() {
        if l != spec.layer {
            layer.w1.data.fill(0.0);
        }
        if l == mixing_layer {
            layer.wq.data.fill(0.0);
            layer.wk.data.fill(0.0);
            layer.wv.data.fill(0.0);
            layer.wo.data.fill(0.0);
            for c in 0..config.d_model {
                layer.wv.set(c, c, 1.0);
                layer.wo.set(c, c, TRANSPORT_GAIN);
            }
        } else {
            layer.wo.data.fill(0.0);
        }
    }

    // Plant rows and write columns.
    let planted_set: std::collections::BTreeSet<usize> =
        spec.planted.iter().map(|&(n, _)| n).collect();
    let layer = &mut w.layers[spec.layer];
    for neuron in 0..config.d_ff {
        if !planted_set.contains(&neuron) {
            let row = layer.w1.row_mut(neuron);
            row[MARKER_PLUS_AXIS] = 0.0;
            row[MARKER_MINUS_AXIS] = 0.0;
        }
    }
    for &(neuron, sign) in &spec.planted {
        let row = layer.w1.row_mut(neuron);
        row.fill(0.0);
        row[MARKER_PLUS_AXIS] = sign.factor() * ROW_MARKER_GAIN;
        row[MARKER_MINUS_AXIS] = -sign.factor() * ROW_MARKER_GAIN;
        row[TRIGGER_AXIS] = ROW_TRIGGER_GAIN;
        for c in 0..config.d_model {
            layer.w2.set(c, neuron, 0.0);
        }
        layer.w2.set(WRITE_AXIS, neuron, sign.factor() * WRITE_GAIN);
    }

    // The write axis raises the plus marker's logit and lowers the minus
    // marker's.
    w.unembed.set(WRITE_AXIS, spec.marker_plus as usize, 1.0);
    w.unembed.set(WRITE_AXIS, spec.marker_minus as usize, -1.0);

    let expected = spec.expected_gap();
    let truth = GroundTruth {
        planted: spec
            .planted
            .iter()
            .map(|&(neuron, sign)| PlantedNeuron {
                layer: spec.layer,
                neuron,
                sign,
                expected_delta: match sign {
                    PlantSign::Plus => expected,
                    PlantSign::Minus => -expected,
                },
            })
            .collect(),
        model_digest: w.digest(),
        target_gap: spec.target_gap,
        marker_plus: spec.marker_plus,
        marker_minus: spec.marker_minus,
    };
    Ok((w, truth))
}

/// Generates the two class prompt sets: fixed-length filler sequences, each
/// embedding its class marker exactly once at a seeded random position and
/// never containing the other marker.
pub fn gen_class_prompts(spec: &PlantSpec) -> Result<(Vec<Vec<u32>>, Vec<Vec<u32>>), SynthError> {
    if spec.n_prompts_per_class == 0 {
        return Err(SynthError::NoPrompts);
    }
    let alphabet = spec.filler_alphabet();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gen_class = |marker: u32, rng: &mut ChaCha8Rng| -> Vec<Vec<u32>> {
        (0..spec.n_prompts_per_class)
            .map(|_| {
                let mut seq: Vec<u32> = (0..SYNTH_SEQ_LEN)
                    .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                    .collect();
                let pos = rng.random_range(0..SYNTH_SEQ_LEN);
                seq[pos] = marker;
                seq
            })
            .collect()
    };
    let plus = gen_class(spec.marker_plus, &mut rng);
    let minus = gen_class(spec.marker_minus, &mut rng);
    Ok((plus, minus))
}

/// Records both prompt classes into profiles and forms their contrast.
pub fn record_contrast(
    weights: &Weights,
    plus: &[Vec<u32>],
    minus: &[Vec<u32>],
) -> Result<ContrastProfile, SynthError> {
    let cfg = &weights.config;
    let mut profile_plus = ActivationProfile::empty(cfg.n_layers, cfg.d_ff);
    let mut profile_minus = ActivationProfile::empty(cfg.n_layers, cfg.d_ff);
    for (i, tokens) in plus.iter().enumerate() {
        let rec = recorder::record_tokens(weights, &format!("plus-{i}"), tokens, None)?;
        recorder::accumulate(&mut profile_plus, &rec)?;
    }
    for (i, tokens) in minus.iter().enumerate() {
        let rec = recorder::record_tokens(weights, &format!("minus-{i}"), tokens, None)?;
        recorder::accumulate(&mut profile_minus, &rec)?;
    }
    Ok(recorder::contrast(&profile_plus, &profile_minus)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedReport {
    pub layer: usize,
    pub neuron: usize,
    pub sign: PlantSign,
    pub expected_delta: f64,
    pub measured_delta: f64,
    pub class: NeuronClass,
    pub recovered: bool,
    pub sign_agrees: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocatorEval {
    pub precision: f64,
    pub recall: f64,
    /// Set when the flagged set was empty, in which case precision is
    /// reported as 0 by convention.
    pub empty_flagged: bool,
    pub per_neuron: Vec<PlantedReport>,
}

/// Precision and recall of a catalog against planted ground truth, with
/// per-neuron sign agreement.
pub fn evaluate_locator(
    catalog: &NeuronCatalog,
    truth: &GroundTruth,
) -> Result<LocatorEval, SynthError> {
    if catalog.model_digest != truth.model_digest {
        return Err(SynthError::DigestMismatch {
            catalog: catalog.model_digest.clone(),
            truth: truth.model_digest.clone(),
        });
    }
    let flagged: std::collections::BTreeSet<(usize, usize)> =
        catalog.flagged().map(|e| (e.layer, e.neuron)).collect();
    let planted: std::collections::BTreeSet<(usize, usize)> =
        truth.planted.iter().map(|p| (p.layer, p.neuron)).collect();
    let hits = flagged.intersection(&planted).count();
    let empty_flagged = flagged.is_empty();
    let precision = if empty_flagged { 0.0 } else { hits as f64 / flagged.len() as f64 };
    let recall =
        if planted.is_empty() { 0.0 } else { hits as f64 / planted.len() as f64 };

    let per_neuron = truth
        .planted
        .iter()
        .map(|p| {
            let entry = catalog
                .entries
                .iter()
                .find(|e| e.layer == p.layer && e.neuron == p.neuron)
                .expect("catalog covers every coordinate");
            let expected_class = match p.sign {
                PlantSign::Plus => NeuronClass::PositiveValue,
                PlantSign::Minus => NeuronClass::NegativeValue,
            };
            PlantedReport {
                layer: p.layer,
                neuron: p.neuron,
                sign: p.sign,
                expected_delta: p.expected_delta,
                measured_delta: entry.delta,
                class: entry.class,
                recovered: entry.class != NeuronClass::Neutral,
                sign_agrees: entry.class == expected_class,
            }
        })
        .collect();

    Ok(LocatorEval { precision, recall, empty_flagged, per_neuron })
}

/// Mean over prompts of the (edited - unedited) plus-marker logit at the
/// final position.
pub fn effect_probe(
    weights: &Weights,
    policy: &EditPolicy,
    truth: &GroundTruth,
    prompts: &[Vec<u32>],
) -> Result<f64, SynthError> {
    let hook = editor::attach(weights, policy)?;
    let marker = truth.marker_plus as usize;
    let mut total = 0.0f64;
    for tokens in prompts {
        let plain = model::forward(weights, tokens, None)?;
        let edited = model::forward(weights, tokens, Some(&hook))?;
        let last = tokens.len() - 1;
        total += edited.logits.get(last, marker) as f64 - plain.logits.get(last, marker) as f64;
    }
    Ok(total / prompts.len() as f64)
}

/// A control policy for the random-manipulation baseline: the planted
/// neurons' measured deltas are reassigned to uniformly random non-planted
/// coordinates, so the same edit rule drives the same number of neurons at
/// arbitrary locations.
pub fn random_control_policy(
    policy: &EditPolicy,
    truth: &GroundTruth,
    seed: u64,
) -> Result<EditPolicy, SynthError> {
    let grid = policy.delta();
    let planted: std::collections::BTreeSet<(usize, usize)> =
        truth.planted.iter().map(|p| (p.layer, p.neuron)).collect();
    let candidates: Vec<(usize, usize)> = (0..grid.n_layers)
        .flat_map(|l| (0..grid.d_ff).map(move |k| (l, k)))
        .filter(|coord| !planted.contains(coord))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = candidates;
    let mut overrides = Vec::new();
    for p in &truth.planted {
        let idx = rng.random_range(0..pool.len());
        let (layer, neuron) = pool.swap_remove(idx);
        overrides.push((layer, neuron, grid.get(p.layer, p.neuron)));
    }
    Ok(policy.with_delta_overrides(&overrides)?)
}

/// Writes a self-contained fixture bundle: weights, prompt files (one
/// space-separated token-id line per prompt), ground-truth CSV, and a JSON
/// manifest tying them together.
pub fn write_fixture_bundle(
    dir: &Path,
    config: &ModelConfig,
    spec: &PlantSpec,
    weights: &Weights,
    truth: &GroundTruth,
    plus: &[Vec<u32>],
    minus: &[Vec<u32>],
) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir)?;
    weights.save(&dir.join("weights.bin"))?;

    let write_prompts = |path: &Path, prompts: &[Vec<u32>]| -> std::io::Result<()> {
        let mut out = String::new();
        for seq in prompts {
            let line: Vec<String> = seq.iter().map(u32::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        std::fs::write(path, out)
    };
    write_prompts(&dir.join("prompts_plus.txt"), plus)?;
    write_prompts(&dir.join("prompts_minus.txt"), minus)?;

    let mut csv = String::from("layer,neuron,sign,expected_delta\n");
    for p in &truth.planted {
        csv.push_str(&format!("{},{},{},{}\n", p.layer, p.neuron, p.sign, p.expected_delta));
    }
    std::fs::write(dir.join("ground_truth.csv"), csv)?;

    let manifest = serde_json::json!({
        "config": config,
        "spec": spec,
        "model_digest": truth.model_digest,
        "expected_gap": spec.expected_gap(),
        "files": ["weights.bin", "prompts_plus.txt", "prompts_minus.txt", "ground_truth.csv"],
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Default model shape for synthetic benchmarks.
pub fn bench_config(seed: u64) -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_size: 257,
        max_seq: 64,
        activation: model::Activation::Gelu,
        seed,
    }
}

/// Default plant: eight neurons of alternating sign in layer 0. The prompt
/// stream is decorrelated from the weight-init stream by reseeding.
pub fn bench_spec(seed: u64, target_gap: f64, n_prompts_per_class: usize) -> PlantSpec {
    PlantSpec {
        layer: 0,
        planted: (0..8)
            .map(|i| {
                (3 + 4 * i, if i % 2 == 0 { PlantSign::Plus } else { PlantSign::Minus })
            })
            .collect(),
        marker_plus: 1,
        marker_minus: 2,
        target_gap,
        n_prompts_per_class,
        seed: seed.rotate_left(17) ^ 0xD1F7_5EED,
    }
}
