//! vlk-core: locate, edit, and score value-oriented FFN neurons in small
//! decoder-only transformers.
//!
//! The crate is organised as a pipeline over a from-scratch transformer:
//!
//! - [`taxonomy`] — the Schwartz value hierarchy every other module keys on.
//! - [`dataset`] — value-description / situational-question items, prompt
//!   templates, contrastive splitting, and JSONL file I/O.
//! - [`model`] — a minimal decoder-only transformer (residual stream +
//!   multi-head attention + two-matrix FFN, no normalisation) with a byte
//!   tokenizer, seeded init, greedy decoding, and an activation hook surface.
//! - [`recorder`] — per-neuron summed activations, firing probabilities, and
//!   contrastive deltas between opposing prompt sets.
//! - [`locator`] — threshold classification of neurons into positive /
//!   negative / neutral classes, plus per-layer distribution reports.
//! - [`editor`] — the activation edit rule (clamp / identity / amplify by a
//!   dynamic scaling factor) in both shift directions, attached as a hook.
//! - [`evaluator`] — probability-weighted 1–5 scoring with a deterministic
//!   lexical judge and an optional remote chat-completion judge.
//! - [`synthlab`] — synthetic models with planted ground-truth neurons, for
//!   measuring locator precision/recall and editing effect direction.
//! - [`report`] — small standalone SVG chart emitters for reports.

pub mod chat;
pub mod dataset;
pub mod editor;
pub mod evaluator;
pub mod locator;
pub mod model;
pub mod recorder;
pub mod report;
pub mod synthlab;
pub mod taxonomy;

pub use taxonomy::{Dimension, Polarity, ValueTree};
