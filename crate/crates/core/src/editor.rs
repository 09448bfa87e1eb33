//! Activation editing: clamp opposing neurons, amplify aligned ones by a
//! dynamic scaling factor, leave the neutral band untouched.
//!
//! The rule is applied element-wise to every per-position FFN inner
//! activation at the point it is computed (the summed statistic the rule is
//! stated over is undefined mid-generation; the per-position form reduces to
//! the same thing for a single position). The negative-shift direction
//! inverts the conditions, with the amplifying branch using |delta| so that
//! it amplifies rather than shrinks.

use crate::locator::NeuronCatalog;
use crate::model::{
    self, ActivationEdit, GenerationParams, ModelError, Weights,
};
use crate::dataset::PromptBundle;
use crate::recorder::{ContrastProfile, NeuronGrid};
use crate::taxonomy::{Dimension, Polarity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EditorError {
    #[error("policy was built for model digest {policy} but weights have digest {weights}")]
    DigestMismatch { policy: String, weights: String },
    #[error("policy delta grid is {policy_layers}x{policy_ff} but model is {model_layers}x{model_ff}")]
    GridMismatch {
        policy_layers: usize,
        policy_ff: usize,
        model_layers: usize,
        model_ff: usize,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    PositiveShift,
    NegativeShift,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::PositiveShift => f.write_str("PositiveShift"),
            Direction::NegativeShift => f.write_str("NegativeShift"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = EditorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PositiveShift" => Ok(Direction::PositiveShift),
            "NegativeShift" => Ok(Direction::NegativeShift),
            other => Err(EditorError::InvalidPolicy(format!("unknown direction {other:?}"))),
        }
    }
}

/// The edit rule plus the per-neuron deltas it reads.
#[derive(Debug, Clone)]
pub struct EditPolicy {
    pub direction: Direction,
    pub gamma: f32,
    pub tau: f64,
    pub dimension: Dimension,
    pub model_digest: String,
    delta: NeuronGrid<f64>,
}

impl EditPolicy {
    /// Builds a policy from a classified catalog; tau comes from the
    /// catalog's threshold.
    pub fn from_catalog(
        catalog: &NeuronCatalog,
        direction: Direction,
        gamma: f32,
    ) -> Result<EditPolicy, EditorError> {
        let mut delta = NeuronGrid::new(catalog.n_layers, catalog.d_ff);
        for e in &catalog.entries {
            delta.set(e.layer, e.neuron, e.delta);
        }
        let policy = EditPolicy {
            direction,
            gamma,
            tau: catalog.threshold,
            dimension: catalog.dimension,
            model_digest: catalog.model_digest.clone(),
            delta,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Builds a policy straight from a contrast profile.
    pub fn from_contrast(
        contrast: &ContrastProfile,
        direction: Direction,
        gamma: f32,
        tau: f64,
        dimension: Dimension,
        model_digest: &str,
    ) -> Result<EditPolicy, EditorError> {
        let policy = EditPolicy {
            direction,
            gamma,
            tau,
            dimension,
            model_digest: model_digest.to_string(),
            delta: contrast.delta.clone(),
        };
        policy.validate()?;
        Ok(policy)
    }

    /// A policy with an empty delta source: every neuron is neutral.
    pub fn neutral(
        n_layers: usize,
        d_ff: usize,
        tau: f64,
        dimension: Dimension,
        model_digest: &str,
    ) -> EditPolicy {
        EditPolicy {
            direction: Direction::PositiveShift,
            gamma: 0.0,
            tau,
            dimension,
            model_digest: model_digest.to_string(),
            delta: NeuronGrid::new(n_layers, d_ff),
        }
    }

    /// A copy with planted deltas overridden (used by random-control runs).
    pub fn with_delta_overrides(
        &self,
        overrides: &[(usize, usize, f64)],
    ) -> Result<EditPolicy, EditorError> {
        let mut delta: NeuronGrid<f64> = NeuronGrid::new(self.delta.n_layers, self.delta.d_ff);
        for &(layer, neuron, d) in overrides {
            if layer >= delta.n_layers || neuron >= delta.d_ff {
                return Err(EditorError::InvalidPolicy(format!(
                    "override ({layer},{neuron}) outside grid"
                )));
            }
            delta.set(layer, neuron, d);
        }
        Ok(EditPolicy { delta, ..self.clone() })
    }

    pub fn delta(&self) -> &NeuronGrid<f64> {
        &self.delta
    }

    /// Count of neurons the rule would touch (|delta| at or past tau).
    pub fn n_neurons_edited(&self) -> usize {
        self.delta.iter().filter(|&(_, _, d)| d.abs() >= self.tau).count()
    }

    fn validate(&self) -> Result<(), EditorError> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(EditorError::InvalidPolicy(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(EditorError::InvalidPolicy(format!(
                "tau must lie strictly between 0 and 1, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// The serialisable policy file (`--policy`): the delta source travels as a
/// catalog path rather than inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub direction: Direction,
    pub gamma: f32,
    pub tau: f64,
    pub dimension: Dimension,
    pub catalog_path: String,
    pub model_digest: String,
}

/// The three-branch edit rule for one activation.
pub fn edit_activation(
    a: f32,
    delta: f64,
    direction: Direction,
    gamma: f32,
    tau: f64,
) -> f32 {
    match direction {
        Direction::PositiveShift => {
            if delta <= -tau {
                a.min(0.0)
            } else if delta >= tau {
                a * (1.0 + delta as f32 * gamma)
            } else {
                a
            }
        }
        Direction::NegativeShift => {
            if delta >= tau {
                a.min(0.0)
            } else if delta <= -tau {
                a * (1.0 + delta.abs() as f32 * gamma)
            } else {
                a
            }
        }
    }
}

/// A policy bound to a specific model, usable as a forward-pass hook.
pub struct EditHook<'a> {
    policy: &'a EditPolicy,
}

impl ActivationEdit for EditHook<'_> {
    fn edit(&self, layer: usize, _pos: usize, neuron: usize, value: f32) -> f32 {
        let delta = self.policy.delta.get(layer, neuron);
        edit_activation(value, delta, self.policy.direction, self.policy.gamma, self.policy.tau)
    }
}

/// Binds a policy to weights after checking the digests agree and the delta
/// grid covers the model.
pub fn attach<'a>(weights: &Weights, policy: &'a EditPolicy) -> Result<EditHook<'a>, EditorError> {
    let digest = weights.digest();
    if policy.model_digest != digest {
        return Err(EditorError::DigestMismatch {
            policy: policy.model_digest.clone(),
            weights: digest,
        });
    }
    let cfg = &weights.config;
    if policy.delta.n_layers != cfg.n_layers || policy.delta.d_ff != cfg.d_ff {
        return Err(EditorError::GridMismatch {
            policy_layers: policy.delta.n_layers,
            policy_ff: policy.delta.d_ff,
            model_layers: cfg.n_layers,
            model_ff: cfg.d_ff,
        });
    }
    Ok(EditHook { policy })
}

/// One generated response plus the metadata the evaluator needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditedResponse {
    pub item_id: String,
    pub dimension: Dimension,
    pub polarity: Polarity,
    pub direction: Direction,
    pub gamma: f32,
    pub tau: f64,
    pub model_digest: String,
    pub response: String,
}

/// Greedy generation under the policy hook.
pub fn generate_with_edit(
    weights: &Weights,
    bundle: &PromptBundle,
    policy: &EditPolicy,
    params: &GenerationParams,
) -> Result<EditedResponse, EditorError> {
    let hook = attach(weights, policy)?;
    let tokens = model::tokenize(&bundle.prompt);
    let out = model::generate_greedy(weights, &tokens, params, Some(&hook))?;
    Ok(EditedResponse {
        item_id: bundle.item_id.clone(),
        dimension: policy.dimension,
        polarity: bundle.polarity,
        direction: policy.direction,
        gamma: policy.gamma,
        tau: policy.tau,
        model_digest: policy.model_digest.clone(),
        response: model::detokenize_lossy(&out.tokens),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, ModelConfig};
    use crate::recorder::NeuronGrid;
    use proptest::prelude::*;

    const TAU: f64 = 0.03;

    #[test]
    fn positive_shift_branches() {
        // amplification: 1.0 * (1 + 0.05 * 2.0) = 1.1
        assert_eq!(edit_activation(1.0, 0.05, Direction::PositiveShift, 2.0, TAU), 1.1);
        // suppression: min(0, 2.0) = 0
        assert_eq!(edit_activation(2.0, -0.05, Direction::PositiveShift, 2.0, TAU), 0.0);
        // neutral band identity, sign of a irrelevant
        assert_eq!(edit_activation(-3.7, 0.01, Direction::PositiveShift, 2.0, TAU), -3.7);
    }

    #[test]
    fn negative_shift_inverts_with_abs_delta() {
        // formerly amplified neurons are clamped
        assert_eq!(edit_activation(1.5, 0.05, Direction::NegativeShift, 2.0, TAU), 0.0);
        // negatively associated neurons amplify by |delta|
        let got = edit_activation(1.0, -0.05, Direction::NegativeShift, 2.0, TAU);
        assert_eq!(got, 1.1);
        assert_eq!(edit_activation(0.5, 0.0, Direction::NegativeShift, 2.0, TAU), 0.5);
    }

    #[test]
    fn suppression_bound_and_neutral_invariance() {
        for a in [-2.0f32, -0.1, 0.0, 0.1, 2.0] {
            let edited = edit_activation(a, -0.5, Direction::PositiveShift, 2.0, TAU);
            assert!(edited <= 0.0 && edited <= a);
            for d in [-0.029, 0.0, 0.029] {
                assert_eq!(edit_activation(a, d, Direction::PositiveShift, 2.0, TAU), a);
                assert_eq!(edit_activation(a, d, Direction::NegativeShift, 2.0, TAU), a);
            }
        }
    }

    #[test]
    fn amplification_grows_with_gamma_and_delta() {
        let mut last = 0.0;
        for gamma in [0.0f32, 0.5, 1.0, 2.0, 4.0] {
            let v = edit_activation(1.0, 0.5, Direction::PositiveShift, gamma, TAU);
            assert!(v > last || gamma == 0.0);
            last = v;
        }
        let mut last = 0.0;
        for delta in [0.03f64, 0.1, 0.5, 1.0] {
            let v = edit_activation(1.0, delta, Direction::PositiveShift, 2.0, TAU);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn direction_duality_swaps_delta_roles() {
        for a in [-1.5f32, 0.0, 0.7] {
            for d in [0.04f64, 0.3, 1.0] {
                assert_eq!(
                    edit_activation(a, d, Direction::PositiveShift, 2.0, TAU),
                    edit_activation(a, -d, Direction::NegativeShift, 2.0, TAU),
                );
                assert_eq!(
                    edit_activation(a, -d, Direction::PositiveShift, 2.0, TAU),
                    edit_activation(a, d, Direction::NegativeShift, 2.0, TAU),
                );
            }
        }
    }

    fn small_weights() -> Weights {
        let cfg = ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_ff: 6,
            vocab_size: 257,
            max_seq: 64,
            activation: Activation::Gelu,
            seed: 3,
        };
        Weights::init_seeded(&cfg).unwrap()
    }

    #[test]
    fn neutral_policy_matches_unedited_generation() {
        let w = small_weights();
        let policy = EditPolicy::neutral(2, 6, TAU, Dimension::Conservation, &w.digest());
        let bundle = PromptBundle {
            item_id: "b1".into(),
            prompt: "steady prompt".into(),
            polarity: Polarity::Positive,
        };
        let params = GenerationParams::new(8);
        let edited = generate_with_edit(&w, &bundle, &policy, &params).unwrap();
        let plain = model::generate_greedy(&w, &model::tokenize(&bundle.prompt), &params, None)
            .unwrap();
        assert_eq!(edited.response, model::detokenize_lossy(&plain.tokens));

        // determinism: same inputs, same bytes
        let again = generate_with_edit(&w, &bundle, &policy, &params).unwrap();
        assert_eq!(edited.response, again.response);
    }

    #[test]
    fn gamma_zero_still_suppresses() {
        let w = small_weights();
        let mut delta = NeuronGrid::new(2, 6);
        // strongly negative delta on a neuron that fires for this prompt
        for neuron in 0..6 {
            delta.set(0, neuron, -0.9);
        }
        let contrast = ContrastProfile {
            p_plus: NeuronGrid::new(2, 6),
            p_minus: NeuronGrid::new(2, 6),
            delta,
            n_plus: 10,
            n_minus: 10,
        };
        let policy = EditPolicy::from_contrast(
            &contrast,
            Direction::PositiveShift,
            0.0,
            TAU,
            Dimension::Conservation,
            &w.digest(),
        )
        .unwrap();
        let hook = attach(&w, &policy).unwrap();
        let tokens = model::tokenize("suppress me");
        let edited = model::forward(&w, &tokens, Some(&hook)).unwrap();
        let plain = model::forward(&w, &tokens, None).unwrap();
        assert_ne!(edited.logits.data, plain.logits.data);
        // every edited layer-0 activation is clamped to at most zero
        assert!(edited.activations[0].data.iter().all(|&a| a <= 0.0));
    }

    #[test]
    fn attach_rejects_foreign_catalogs() {
        let w = small_weights();
        let policy = EditPolicy::neutral(2, 6, TAU, Dimension::Conservation, "not-the-digest");
        assert!(matches!(attach(&w, &policy), Err(EditorError::DigestMismatch { .. })));

        let wrong_grid = EditPolicy::neutral(1, 6, TAU, Dimension::Conservation, &w.digest());
        assert!(matches!(attach(&w, &wrong_grid), Err(EditorError::GridMismatch { .. })));
    }

    proptest! {
        #[test]
        fn rule_is_total_and_neutral_band_is_identity(
            a in -10.0f32..10.0,
            delta in -1.0f64..=1.0,
            gamma in 0.0f32..4.0,
        ) {
            for direction in [Direction::PositiveShift, Direction::NegativeShift] {
                let out = edit_activation(a, delta, direction, gamma, TAU);
                prop_assert!(out.is_finite());
                if delta.abs() < TAU {
                    prop_assert_eq!(out, a);
                }
            }
        }
    }
}
