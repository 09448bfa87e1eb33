//! Value-description / situational-question items, the prompt templates that
//! drive them, contrastive splitting, JSON Lines file I/O, and optional
//! template-driven generation through an external text-generation service.

use crate::taxonomy::{canonical_tree, Dimension, Polarity, ValueTree};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("item {id}: {invariant}")]
    Validation { id: String, invariant: String },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("no template named {0:?}")]
    UnknownTemplate(String),
    #[error("slot map does not cover placeholder {{{0}}}")]
    MissingSlot(String),
    #[error("{side} side of the contrast split is empty for dimension {dimension}")]
    EmptySide { side: &'static str, dimension: Dimension },
    #[error(transparent)]
    Taxonomy(#[from] crate::taxonomy::TaxonomyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[cfg(feature = "remote")]
    #[error(transparent)]
    Chat(#[from] crate::chat::ChatError),
}

/// Built-in topic list: the three named everyday themes plus seven neutral
/// ones, pinned here so generated items are reproducible.
pub const TOPICS: [&str; 10] = [
    "family",
    "environment",
    "arts",
    "work",
    "travel",
    "food",
    "health",
    "education",
    "technology",
    "neighborhood",
];

/// One dataset item: a second-person value description paired with a
/// situational question, anchored to a taxonomy location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub dimension: Dimension,
    pub subvalue: String,
    pub atomic: String,
    pub polarity: Polarity,
    pub topic: String,
    pub description: String,
    pub question: String,
    pub curated: bool,
}

/// An assembled model prompt for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub item_id: String,
    pub prompt: String,
    pub polarity: Polarity,
}

pub mod templates {
    //! The stock prompt templates, stored byte-exactly with `{...}`
    //! placeholders. Each body hashes to a digest pinned in
    //! [`PINNED_DIGESTS`]; a drifted byte fails the fidelity test.

    pub const GENERATE_DESCRIPTION_EXAMPLE: &str = "Given some key words of {value} value: {key}, {key}, {key}.... I want you to give a second-person view of the value person and a view of its antonyms, each no less than 50 words. Please meet the constraints as follows.\n\n1. each view should be related to the key words.\n2. avoid containing the key words or values in the descriptions.";

    pub const GENERATE_DESCRIPTIONS: &str = "Given a set of keywords associated with the value {value}: {key}, {key}, {key}.... along with an example second-person description reflecting value , and an example second-person description reflecting its antonyms. I want you to give 80 second-person views of the value person and 80 views of its antonyms, each no less than 50 words. Please meet the constraints as follows.\n\n1. each view should be related to the key words.\n2. avoid containing the key words or values in the descriptions. ###Example:{value description} ###Example for its antonyms:{value description}";

    pub const TEXT_QUALITY_EVALUATION: &str = "Please act as an impartial judge and evaluate the text quality of the provided content. Focus only on whether the expression is clear and fluent, and whether there are any grammatical errors, spelling mistakes, or content that cannot be understood. Do not consider the content's bias or whether the information conveyed is accurate. Please give a score directly from 1 to 5, the higher score represent higher quality.\n\nText: {text}\n\nScore:";

    pub const ANSWER_QUESTIONS: &str = "Imagine you are a real person rather than a language model, and you're asked by the following question. Write your response based on your authentic thoughts and emotions.\n\nDo not overthink your answer\u{2014}let your thoughts flow naturally as you write. Focus on expressing your genuine feelings and reactions. Aim to write no more than 300 words.\n\nQuestion: {question}\n\nResponse:";

    pub const PROMPT_WITH_VALUE: &str = "You will find a value description followed by a question below. I want you to forget who you are and fully immerse yourself in the value described, adopting not only their perspective but also their tone and attitude. With this new identity in mind, please respond to the question.\n\nDon't overthink your response\u{2014}just begin writing and let your thoughts flow naturally. Spelling and grammar are not important here; what's essential is capturing the essence of this value in your answer. Try to keep your response under 300 words.\n\n###Value description:{value}\n\n###Question:{question}\n\n###Response:";

    pub const REFINE_QUESTIONS: &str = "Identify the drawbacks of the following question and revise it to better capture the respondent's level of {value} in this factor: \"{factor}\", within the topic of \"{topic}\".\n\nQuestion: {question}\n\nNote:\n\n1. Ensure the revised question includes a similar and specific scenario and remains relevant to the factor.\n2. Avoid tendency qualifiers like \"honest\", \"polite\" and similar.";

    pub const GENERATE_QUESTIONS: &str = "I want you to create a set of 10 situational questions aimed at evaluating the degree to which the respondent displays the specified \"VALUE\", referring to the \"EXAMPLE\". Please meet the constraints in the \"NOTE\". Each question must contain no fewer than 100 words!\n\nTOPIC:\n\n\"{topic}\"\n\nVALUE:\n\n\"{value}\" or not\n\nEXAMPLE:\n\n\"{example}\"\n\nNOTE:\n\n1. Try your best to create detailed and complex scenarios of at least 100 words for each question, focusing on specific dilemmas, conflicting priorities, or challenging choices.\n2. Ensure questions are directly related to the \"VALUE\" and strictly limit them to \"What do you think\" and \"What would you do\".\n3. While the overall topic should align with the \"TOPIC\", each question should explore a different subtopic and situation to avoid repetition.\n4. Avoid tendency qualifiers like \"honest\" or \"polite\".\n5. Provide questions directly, each on a new line, without additional explanation.";

    pub const NAMES: [&str; 7] = [
        "generate-description-example",
        "generate-descriptions",
        "text-quality-evaluation",
        "answer-questions",
        "prompt-with-value",
        "refine-questions",
        "generate-questions",
    ];

    /// SHA-256 digests the stored bodies must hash to, keyed as in [`NAMES`].
    pub const PINNED_DIGESTS: [(&str, &str); 7] = [
        (
            "generate-description-example",
            "0210db01b66d60cb95f5fa88e9718d5688edf0ad4df3b8e1ec8d9a3a56018870",
        ),
        (
            "generate-descriptions",
            "23ebf20afc3f4f05fc508484a714e008fb01ba623a16e88a68173d03426dbda1",
        ),
        (
            "text-quality-evaluation",
            "b1bd06a3a6ea3ba199f1468d8073778406492dce027ff061942e6f1831b88b4e",
        ),
        (
            "answer-questions",
            "01355cf76d65a7e4dde16e9eed511814944cdc5cd9f0238eefa870c5692561d5",
        ),
        (
            "prompt-with-value",
            "9f8ea0b27e74eed388fd30c28553f7379019ad9d6ead5d75f0b7185865c15987",
        ),
        (
            "refine-questions",
            "7f258a7baeeab0453547e935d3909bdba35460a825d1e0e08fb17064749fb830",
        ),
        (
            "generate-questions",
            "cb72097997edceef08fdaa4a1813833d8bc5f714885ad3959f4ce3407fc89b62",
        ),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        match name {
            "generate-description-example" => Some(GENERATE_DESCRIPTION_EXAMPLE),
            "generate-descriptions" => Some(GENERATE_DESCRIPTIONS),
            "text-quality-evaluation" => Some(TEXT_QUALITY_EVALUATION),
            "answer-questions" => Some(ANSWER_QUESTIONS),
            "prompt-with-value" => Some(PROMPT_WITH_VALUE),
            "refine-questions" => Some(REFINE_QUESTIONS),
            "generate-questions" => Some(GENERATE_QUESTIONS),
            _ => None,
        }
    }

    /// Hex SHA-256 of one stored body.
    pub fn digest(name: &str) -> Option<String> {
        use sha2::{Digest, Sha256};
        get(name).map(|body| {
            let mut hasher = Sha256::new();
            hasher.update(body.as_bytes());
            hex::encode(hasher.finalize())
        })
    }
}

/// Case-insensitive whole-word matcher for one atomic name.
fn keyword_pattern(atomic: &str) -> Regex {
    Regex::new(&format!(r"(?i)\b{}\b", regex::escape(atomic)))
        .expect("atomic names compile to valid patterns")
}

/// Checks every structural invariant of one item against a value tree.
pub fn validate_item(item: &DatasetItem, tree: &ValueTree) -> Result<(), DatasetError> {
    let fail = |invariant: String| DatasetError::Validation { id: item.id.clone(), invariant };
    if item.id.is_empty() {
        return Err(fail("id is empty".to_string()));
    }
    if !tree.contains(item.dimension, &item.subvalue, &item.atomic) {
        return Err(fail(format!(
            "({}, {}, {}) does not resolve in the value tree",
            item.dimension, item.subvalue, item.atomic
        )));
    }
    if item.description.is_empty() {
        return Err(fail("description is empty".to_string()));
    }
    if item.question.is_empty() {
        return Err(fail("question is empty".to_string()));
    }
    if keyword_pattern(&item.atomic).is_match(&item.description) {
        return Err(fail(format!(
            "description contains the atomic value name {:?}",
            item.atomic
        )));
    }
    Ok(())
}

/// Loads a JSON Lines dataset file, validating every record against the
/// canonical tree. Order is the file order.
pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let tree = canonical_tree();
    let mut items = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: DatasetItem = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        validate_item(&item, &tree)?;
        if !seen.insert(item.id.clone()) {
            return Err(DatasetError::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(items)
}

/// Writes items as JSON Lines, one object per line, UTF-8.
pub fn save_dataset(path: &Path, items: &[DatasetItem]) -> Result<(), DatasetError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("items serialise"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Fills the stock prompt-with-value template with an item's description and
/// question, each replaced exactly once; every other template byte is kept.
pub fn assemble_prompt(item: &DatasetItem) -> PromptBundle {
    let prompt = templates::PROMPT_WITH_VALUE
        .replacen("{value}", &item.description, 1)
        .replacen("{question}", &item.question, 1);
    PromptBundle { item_id: item.id.clone(), prompt, polarity: item.polarity }
}

/// Splits a dimension's items into assembled positive and reversed prompt
/// sets, preserving input order. Items of other dimensions are ignored. A
/// contrastive study needs both sides, so an empty side is an error.
pub fn contrast_split(
    items: &[DatasetItem],
    dimension: Dimension,
) -> Result<(Vec<PromptBundle>, Vec<PromptBundle>), DatasetError> {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for item in items.iter().filter(|i| i.dimension == dimension) {
        let bundle = assemble_prompt(item);
        match item.polarity {
            Polarity::Positive => positive.push(bundle),
            Polarity::Reversed => negative.push(bundle),
        }
    }
    if positive.is_empty() {
        return Err(DatasetError::EmptySide { side: "positive", dimension });
    }
    if negative.is_empty() {
        return Err(DatasetError::EmptySide { side: "negative", dimension });
    }
    Ok((positive, negative))
}

/// Replaces every `{name}` placeholder with its slot value, then rejects any
/// placeholder left unfilled.
pub fn fill_template(
    template: &str,
    slots: &BTreeMap<String, String>,
) -> Result<String, DatasetError> {
    let mut filled = template.to_string();
    for (key, value) in slots {
        filled = filled.replace(&format!("{{{key}}}"), value);
    }
    let leftover = Regex::new(r"\{[a-z][a-z ]*\}").unwrap();
    if let Some(m) = leftover.find(&filled) {
        let name = m.as_str().trim_matches(['{', '}']);
        return Err(DatasetError::MissingSlot(name.to_string()));
    }
    Ok(filled)
}

/// Which item field a generation template's reply lines fill.
fn reply_field(template_name: &str) -> ReplyField {
    match template_name {
        "generate-description-example" | "generate-descriptions" => ReplyField::Description,
        _ => ReplyField::Question,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplyField {
    Description,
    Question,
}

/// A draft the validator rejected, with the violated invariant.
#[derive(Debug, Clone)]
pub struct RejectedDraft {
    pub text: String,
    pub reason: String,
}

/// Outcome of one generation call: validated drafts plus rejects.
#[derive(Debug, Clone, Default)]
pub struct GenerationOutcome {
    pub accepted: Vec<DatasetItem>,
    pub rejected: Vec<RejectedDraft>,
}

/// Builds draft items from one service reply. Each non-empty reply line
/// becomes one draft (leading list numbering stripped); the line fills the
/// description or question field according to the template, and the
/// remaining fields come from the slot map (`dimension`, `subvalue`,
/// `atomic`, `polarity`, `topic`, and the counterpart field).
pub fn drafts_from_reply(
    template_name: &str,
    slots: &BTreeMap<String, String>,
    reply: &str,
    id_offset: usize,
) -> Result<GenerationOutcome, DatasetError> {
    let field = reply_field(template_name);
    let tree = canonical_tree();
    let missing = |k: &str| DatasetError::MissingSlot(k.to_string());
    let dimension: Dimension =
        slots.get("dimension").ok_or_else(|| missing("dimension"))?.parse()?;
    let polarity: Polarity = slots.get("polarity").ok_or_else(|| missing("polarity"))?.parse()?;
    let subvalue = slots.get("subvalue").ok_or_else(|| missing("subvalue"))?.clone();
    let atomic = slots.get("atomic").ok_or_else(|| missing("atomic"))?.clone();
    let topic = slots.get("topic").ok_or_else(|| missing("topic"))?.clone();

    let numbering = Regex::new(r"^\d+[.)]\s*").unwrap();
    let mut outcome = GenerationOutcome::default();
    for (i, raw) in reply.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let line = numbering.replace(raw.trim(), "").to_string();
        let (description, question) = match field {
            ReplyField::Description => {
                (line.clone(), slots.get("question").cloned().unwrap_or_default())
            }
            ReplyField::Question => {
                (slots.get("description").cloned().unwrap_or_default(), line.clone())
            }
        };
        let item = DatasetItem {
            id: format!("draft-{:04}", id_offset + i),
            dimension,
            subvalue: subvalue.clone(),
            atomic: atomic.clone(),
            polarity,
            topic: topic.clone(),
            description,
            question,
            curated: false,
        };
        match validate_item(&item, &tree) {
            Ok(()) => outcome.accepted.push(item),
            Err(e) => outcome.rejected.push(RejectedDraft { text: line, reason: e.to_string() }),
        }
    }
    Ok(outcome)
}

/// Generates drafts through the external service: `count` requests, each
/// carrying the filled template verbatim; reply lines become drafts with
/// `curated = false`.
#[cfg(feature = "remote")]
pub fn generate_items(
    template_name: &str,
    slots: &BTreeMap<String, String>,
    service: &crate::chat::ServiceConfig,
    count: usize,
) -> Result<GenerationOutcome, DatasetError> {
    let template = templates::get(template_name)
        .ok_or_else(|| DatasetError::UnknownTemplate(template_name.to_string()))?;
    let filled = fill_template(template, slots)?;
    let mut outcome = GenerationOutcome::default();
    for _ in 0..count {
        let (reply, _) = crate::chat::request_completion(service, &filled)?;
        let batch = drafts_from_reply(template_name, slots, &reply, outcome.accepted.len())?;
        outcome.accepted.extend(batch.accepted);
        outcome.rejected.extend(batch.rejected);
    }
    Ok(outcome)
}

/// Exact counts over a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub per_dimension: BTreeMap<String, usize>,
    pub per_subvalue: BTreeMap<String, usize>,
    pub per_atomic: BTreeMap<String, usize>,
    pub per_polarity: BTreeMap<String, usize>,
    pub per_topic: BTreeMap<String, usize>,
}

pub fn dataset_stats(items: &[DatasetItem]) -> DatasetStats {
    let mut stats = DatasetStats { total: items.len(), ..DatasetStats::default() };
    for item in items {
        *stats.per_dimension.entry(item.dimension.to_string()).or_default() += 1;
        *stats.per_subvalue.entry(item.subvalue.clone()).or_default() += 1;
        *stats.per_atomic.entry(item.atomic.clone()).or_default() += 1;
        *stats.per_polarity.entry(item.polarity.to_string()).or_default() += 1;
        *stats.per_topic.entry(item.topic.clone()).or_default() += 1;
    }
    stats
}

#[cfg(test)]
pub(crate) fn sample_item(id: &str, dimension: Dimension, polarity: Polarity) -> DatasetItem {
    let (subvalue, atomic) = match dimension {
        Dimension::OpennessToChange => ("Self-Direction", "Creativity"),
        Dimension::SelfTranscendence => ("Benevolence", "Honesty"),
        Dimension::Conservation => ("Tradition", "Moderation"),
        Dimension::SelfEnhancement => ("Achievement", "Success"),
    };
    DatasetItem {
        id: id.to_string(),
        dimension,
        subvalue: subvalue.to_string(),
        atomic: atomic.to_string(),
        polarity,
        topic: "family".to_string(),
        description: match polarity {
            Polarity::Positive => "You cherish novelty and original paths.".to_string(),
            Polarity::Reversed => "You prefer the proven, familiar routine.".to_string(),
        },
        question: "What would you do when plans suddenly change?".to_string(),
        curated: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    #[test]
    fn template_digests_match_the_pins() {
        let mut drifted = Vec::new();
        for (name, pinned) in templates::PINNED_DIGESTS {
            let body = templates::get(name).expect("template exists");
            let mut hasher = Sha256::new();
            hasher.update(body.as_bytes());
            let digest = hex::encode(hasher.finalize());
            if digest != pinned {
                drifted.push(name);
            }
        }
        assert!(drifted.is_empty(), "templates drifted from pinned digests: {drifted:?}");
    }

    #[test]
    fn registry_covers_exactly_the_seven_names() {
        for name in templates::NAMES {
            assert!(templates::get(name).is_some(), "{name} missing");
        }
        assert!(templates::get("no-such-template").is_none());
    }

    #[test]
    fn assemble_prompt_places_both_fields() {
        let item = sample_item("a1", Dimension::OpennessToChange, Polarity::Positive);
        let bundle = assemble_prompt(&item);
        assert!(bundle
            .prompt
            .contains("###Value description:You cherish novelty and original paths."));
        assert!(bundle
            .prompt
            .contains("###Question:What would you do when plans suddenly change?"));
        // determinism: identical items produce identical bytes
        assert_eq!(bundle.prompt, assemble_prompt(&item).prompt);
    }

    #[test]
    fn round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.jsonl");
        let items = vec![
            sample_item("a", Dimension::Conservation, Polarity::Positive),
            sample_item("b", Dimension::Conservation, Polarity::Reversed),
            sample_item("c", Dimension::SelfEnhancement, Polarity::Positive),
            sample_item("d", Dimension::SelfEnhancement, Polarity::Reversed),
        ];
        save_dataset(&path, &items).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, items);

        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert!(load_dataset(&empty).unwrap().is_empty());
    }

    #[test]
    fn unknown_dimension_fails_at_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut value =
            serde_json::to_value(sample_item("x", Dimension::Conservation, Polarity::Positive))
                .unwrap();
        value["dimension"] = serde_json::Value::String("Ethics".to_string());
        std::fs::write(&path, format!("{value}\n")).unwrap();
        let err = load_dataset(&path).unwrap_err();
        match err {
            DatasetError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("Ethics") || message.contains("variant"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn validation_names_the_violated_invariant() {
        let tree = canonical_tree();
        let mut item = sample_item("v", Dimension::Conservation, Polarity::Positive);
        item.subvalue = "Power".to_string();
        let err = validate_item(&item, &tree).unwrap_err();
        assert!(err.to_string().contains("does not resolve"));

        let mut item = sample_item("k", Dimension::OpennessToChange, Polarity::Positive);
        item.description = "Your creativity drives you.".to_string();
        let err = validate_item(&item, &tree).unwrap_err();
        assert!(err.to_string().contains("atomic value name"));

        let mut item = sample_item("e", Dimension::Conservation, Polarity::Positive);
        item.description = String::new();
        assert!(validate_item(&item, &tree).is_err());
    }

    #[test]
    fn contrast_split_partitions_and_rejects_empty_sides() {
        let items = vec![
            sample_item("p1", Dimension::Conservation, Polarity::Positive),
            sample_item("p2", Dimension::Conservation, Polarity::Positive),
            sample_item("p3", Dimension::Conservation, Polarity::Positive),
            sample_item("n1", Dimension::Conservation, Polarity::Reversed),
            sample_item("n2", Dimension::Conservation, Polarity::Reversed),
            sample_item("n3", Dimension::Conservation, Polarity::Reversed),
        ];
        let (pos, neg) = contrast_split(&items, Dimension::Conservation).unwrap();
        assert_eq!(pos.len(), 3);
        assert_eq!(neg.len(), 3);
        assert_eq!(pos[0].item_id, "p1");

        let only_positive = vec![
            sample_item("p1", Dimension::Conservation, Polarity::Positive),
            sample_item("p2", Dimension::Conservation, Polarity::Positive),
        ];
        let err = contrast_split(&only_positive, Dimension::Conservation).unwrap_err();
        assert!(matches!(err, DatasetError::EmptySide { side: "negative", .. }));

        // items of other dimensions are ignored, so the negative side stays empty
        let mixed = vec![
            sample_item("p1", Dimension::Conservation, Polarity::Positive),
            sample_item("p2", Dimension::Conservation, Polarity::Positive),
            sample_item("o1", Dimension::OpennessToChange, Polarity::Positive),
            sample_item("o2", Dimension::OpennessToChange, Polarity::Reversed),
        ];
        assert!(matches!(
            contrast_split(&mixed, Dimension::Conservation),
            Err(DatasetError::EmptySide { side: "negative", .. })
        ));
    }

    #[test]
    fn fill_template_covers_all_placeholders() {
        let mut slots = BTreeMap::new();
        slots.insert("value".to_string(), "openness".to_string());
        slots.insert("key".to_string(), "novelty".to_string());
        let filled =
            fill_template(templates::GENERATE_DESCRIPTION_EXAMPLE, &slots).unwrap();
        assert!(filled.contains("key words of openness value: novelty, novelty, novelty"));

        let err = fill_template(templates::REFINE_QUESTIONS, &slots).unwrap_err();
        assert!(matches!(err, DatasetError::MissingSlot(_)));
    }

    #[test]
    fn drafts_fill_the_field_the_template_generates() {
        let mut slots = BTreeMap::new();
        slots.insert("dimension".to_string(), "Openness to Change".to_string());
        slots.insert("subvalue".to_string(), "Self-Direction".to_string());
        slots.insert("atomic".to_string(), "Creativity".to_string());
        slots.insert("polarity".to_string(), "Positive".to_string());
        slots.insert("topic".to_string(), "arts".to_string());
        slots.insert("description".to_string(), "You chase the untried.".to_string());

        let reply = "1. What would you do with a blank canvas?\n\n2. What do you think of routine?";
        let out = drafts_from_reply("generate-questions", &slots, reply, 0).unwrap();
        assert_eq!(out.accepted.len(), 2);
        assert_eq!(out.rejected.len(), 0);
        assert_eq!(out.accepted[0].question, "What would you do with a blank canvas?");
        assert_eq!(out.accepted[0].description, "You chase the untried.");
        assert!(!out.accepted[0].curated);
        assert_eq!(out.accepted[1].id, "draft-0001");
    }

    #[test]
    fn drafts_violating_the_keyword_rule_are_rejected() {
        let mut slots = BTreeMap::new();
        slots.insert("dimension".to_string(), "Openness to Change".to_string());
        slots.insert("subvalue".to_string(), "Self-Direction".to_string());
        slots.insert("atomic".to_string(), "Creativity".to_string());
        slots.insert("polarity".to_string(), "Positive".to_string());
        slots.insert("topic".to_string(), "arts".to_string());
        slots.insert("question".to_string(), "What would you paint first?".to_string());

        // a description template reply that contains the atomic name itself
        let reply = "You treasure creativity in all things.";
        let out = drafts_from_reply("generate-descriptions", &slots, reply, 0).unwrap();
        assert!(out.accepted.is_empty());
        assert_eq!(out.rejected.len(), 1);
        assert!(out.rejected[0].reason.contains("atomic value name"));
    }

    #[test]
    fn stats_count_exactly() {
        let mut items = Vec::new();
        for (i, d) in Dimension::ALL.iter().enumerate() {
            items.push(sample_item(&format!("p{i}"), *d, Polarity::Positive));
            items.push(sample_item(&format!("n{i}"), *d, Polarity::Reversed));
        }
        let stats = dataset_stats(&items);
        assert_eq!(stats.total, 8);
        for d in Dimension::ALL {
            assert_eq!(stats.per_dimension[&d.to_string()], 2);
        }
        assert_eq!(stats.per_polarity["Positive"], 4);
        assert_eq!(stats.per_polarity["Reversed"], 4);
        assert_eq!(stats.per_dimension.values().sum::<usize>(), stats.total);

        let empty = dataset_stats(&[]);
        assert_eq!(empty.total, 0);
        assert!(empty.per_dimension.is_empty());
    }

    #[test]
    fn topics_are_pinned() {
        assert_eq!(TOPICS.len(), 10);
        assert!(TOPICS.contains(&"family"));
        assert!(TOPICS.contains(&"environment"));
        assert!(TOPICS.contains(&"arts"));
    }
}
