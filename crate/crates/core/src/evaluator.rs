//! Scores generated responses for value orientation on a 1–5 scale.
//!
//! A judge returns a probability distribution over rating levels; the score
//! is the probability-weighted sum, and a response's final score averages
//! several independent judge runs. Two judges ship: a deterministic lexical
//! judge (a desk-scale proxy that counts value-word hits against the
//! taxonomy) and a remote chat-completion judge. The remote judge returns a
//! point mass per run rather than token-level probabilities — a black-box
//! wire API does not expose them — so the run average recovers a sampled
//! estimate of the same expectation.

#[cfg(feature = "remote")]
use crate::chat;
use crate::chat::{ChatError, ServiceConfig};
use crate::taxonomy::{Dimension, ValueTree};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluatorError {
    #[error("invalid rating distribution: {0}")]
    InvalidDistribution(String),
    #[error("n_runs must be at least 1")]
    ZeroRuns,
    #[error("judge reply has no rating digit 1-5: {reply:?}")]
    UnparseableReply { reply: String },
    #[error("judge run {completed} of {requested} failed: {source}")]
    RunFailed { completed: usize, requested: usize, source: ChatError },
}

/// Probabilities over the rating levels 1..=5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingDistribution {
    pub probs: [f64; 5],
}

impl RatingDistribution {
    pub fn new(probs: [f64; 5]) -> Result<RatingDistribution, EvaluatorError> {
        let dist = RatingDistribution { probs };
        dist.validate()?;
        Ok(dist)
    }

    pub fn point_mass(level: u8) -> RatingDistribution {
        let mut probs = [0.0; 5];
        probs[(level.clamp(1, 5) - 1) as usize] = 1.0;
        RatingDistribution { probs }
    }

    pub fn validate(&self) -> Result<(), EvaluatorError> {
        if self.probs.iter().any(|&p| p < 0.0) {
            return Err(EvaluatorError::InvalidDistribution("negative mass".to_string()));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvaluatorError::InvalidDistribution(format!("sum is {sum}, not 1")));
        }
        Ok(())
    }
}

/// Probability-weighted rating: sum of level x P(level).
pub fn geval_score(dist: &RatingDistribution) -> Result<f64, EvaluatorError> {
    dist.validate()?;
    Ok(dist
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 + 1.0) * p)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JudgeKind {
    Lexical,
    Remote,
}

impl std::fmt::Display for JudgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JudgeKind::Lexical => f.write_str("Lexical"),
            JudgeKind::Remote => f.write_str("Remote"),
        }
    }
}

/// Rates one response against a value dimension.
pub trait Judge {
    fn rate(&self, response: &str, dimension: Dimension)
        -> Result<RatingDistribution, EvaluatorError>;
    fn kind(&self) -> JudgeKind;
}

/// Deterministic lexical judge.
///
/// Counts case-insensitive whole-word hits of the target dimension's atomic
/// names (h+) and of every other dimension's atomics (h-); an atomic shared
/// between the target and another dimension counts on both sides. The signed
/// relevance r = (h+ - h-) / max(1, h+ + h-) maps to a rating level via
/// round(3 + 2r) clamped to 1..=5, returned as a point mass. This is a
/// deterministic proxy for testability, not a claim about judge-model
/// scores.
pub struct LexicalJudge {
    /// Per dimension: compiled whole-word patterns for its atomic names.
    patterns: Vec<(Dimension, Vec<Regex>)>,
}

impl LexicalJudge {
    pub fn new(tree: &ValueTree) -> LexicalJudge {
        let patterns = Dimension::ALL
            .into_iter()
            .map(|dimension| {
                let regexes = tree
                    .atomic_names(dimension)
                    .into_iter()
                    .map(|name| {
                        Regex::new(&format!(r"(?i)\b{}\b", regex::escape(name)))
                            .expect("atomic names compile to valid patterns")
                    })
                    .collect();
                (dimension, regexes)
            })
            .collect();
        LexicalJudge { patterns }
    }

    fn count_hits(&self, response: &str, dimension: Dimension, invert: bool) -> usize {
        self.patterns
            .iter()
            .filter(|(d, _)| (*d == dimension) != invert)
            .flat_map(|(_, regexes)| regexes.iter())
            .map(|re| re.find_iter(response).count())
            .sum()
    }
}

impl Judge for LexicalJudge {
    fn rate(
        &self,
        response: &str,
        dimension: Dimension,
    ) -> Result<RatingDistribution, EvaluatorError> {
        let h_plus = self.count_hits(response, dimension, false) as f64;
        let h_minus = self.count_hits(response, dimension, true) as f64;
        let r = (h_plus - h_minus) / (h_plus + h_minus).max(1.0);
        let level = (3.0 + 2.0 * r).round().clamp(1.0, 5.0) as u8;
        Ok(RatingDistribution::point_mass(level))
    }

    fn kind(&self) -> JudgeKind {
        JudgeKind::Lexical
    }
}

/// Which rubric a remote run asks the judge to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rubric {
    /// Relevance of the response to the target value dimension.
    Value,
    /// Pure text quality, using the stock quality-evaluation template.
    Quality,
}

/// Built-in value-relevance rubric. The wording is this crate's own.
pub fn value_rubric_prompt(response: &str, dimension: Dimension) -> String {
    format!(
        "Please act as an impartial judge and rate how strongly the following \
         response expresses the value dimension \"{dimension}\". Consider only the \
         presence and strength of that value orientation, not writing quality. \
         Give a score directly from 1 to 5, where 5 means the response is \
         strongly oriented toward the dimension and 1 means it is oriented \
         against it.\n\nResponse: {response}\n\nScore:"
    )
}

/// Builds the full judge prompt for a rubric.
pub fn rubric_prompt(rubric: Rubric, response: &str, dimension: Dimension) -> String {
    match rubric {
        Rubric::Value => value_rubric_prompt(response, dimension),
        Rubric::Quality => crate::dataset::templates::TEXT_QUALITY_EVALUATION
            .replace("{text}", response),
    }
}

/// First digit 1–5 in a reply, tolerating judge verbosity.
pub fn parse_rating(reply: &str) -> Result<u8, EvaluatorError> {
    reply
        .chars()
        .find(|c| ('1'..='5').contains(c))
        .map(|c| c as u8 - b'0')
        .ok_or_else(|| EvaluatorError::UnparseableReply { reply: reply.to_string() })
}

/// Settings for the remote judge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeConfig {
    #[serde(flatten)]
    pub service: ServiceConfig,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
}

fn default_n_runs() -> usize {
    10
}

/// Chat-completion judge: one request per run, point mass per reply.
#[cfg(feature = "remote")]
pub struct RemoteJudge {
    pub config: JudgeConfig,
    pub rubric: Rubric,
    retries_used: std::cell::Cell<u32>,
}

#[cfg(feature = "remote")]
impl RemoteJudge {
    pub fn new(config: JudgeConfig, rubric: Rubric) -> RemoteJudge {
        RemoteJudge { config, rubric, retries_used: std::cell::Cell::new(0) }
    }

    /// Total transport retries spent across runs so far.
    pub fn retries_used(&self) -> u32 {
        self.retries_used.get()
    }
}

#[cfg(feature = "remote")]
impl Judge for RemoteJudge {
    fn rate(
        &self,
        response: &str,
        dimension: Dimension,
    ) -> Result<RatingDistribution, EvaluatorError> {
        let prompt = rubric_prompt(self.rubric, response, dimension);
        let (reply, retries) =
            chat::request_completion(&self.config.service, &prompt).map_err(|source| {
                EvaluatorError::RunFailed { completed: 0, requested: 1, source }
            })?;
        self.retries_used.set(self.retries_used.get() + retries);
        let level = parse_rating(&reply)?;
        Ok(RatingDistribution::point_mass(level))
    }

    fn kind(&self) -> JudgeKind {
        JudgeKind::Remote
    }
}

/// Final score of one response: the mean of per-run weighted ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueScore {
    pub score: f64,
    pub n_runs: usize,
    pub per_run: Vec<f64>,
    pub judge: JudgeKind,
}

/// Invokes the judge `n_runs` times and averages the weighted ratings. A
/// failed run aborts with the number of runs that had completed.
pub fn score_response(
    response: &str,
    dimension: Dimension,
    judge: &dyn Judge,
    n_runs: usize,
) -> Result<ValueScore, EvaluatorError> {
    if n_runs == 0 {
        return Err(EvaluatorError::ZeroRuns);
    }
    let mut per_run = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let dist = judge.rate(response, dimension).map_err(|e| match e {
            EvaluatorError::RunFailed { source, .. } => {
                EvaluatorError::RunFailed { completed: run, requested: n_runs, source }
            }
            other => other,
        })?;
        per_run.push(geval_score(&dist)?);
    }
    let score = per_run.iter().sum::<f64>() / n_runs as f64;
    Ok(ValueScore { score, n_runs, per_run, judge: judge.kind() })
}

/// One row of the score export CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub item_id: String,
    pub dimension: Dimension,
    pub policy: String,
    pub judge: JudgeKind,
    pub n_runs: usize,
    pub score: f64,
}

/// CSV form `item_id,dimension,policy,judge,n_runs,score`.
pub fn scores_to_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("item_id,dimension,policy,judge,n_runs,score\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.item_id, r.dimension, r.policy, r.judge, r.n_runs, r.score
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::canonical_tree;
    use proptest::prelude::*;

    #[test]
    fn weighted_sum_examples() {
        let point5 = RatingDistribution::point_mass(5);
        assert_eq!(geval_score(&point5).unwrap(), 5.0);

        let uniform = RatingDistribution::new([0.2; 5]).unwrap();
        assert!((geval_score(&uniform).unwrap() - 3.0).abs() < 1e-12);

        let mixed = RatingDistribution::new([0.0, 0.0, 0.0, 0.6, 0.4]).unwrap();
        assert!((geval_score(&mixed).unwrap() - 4.4).abs() < 1e-12);
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(RatingDistribution::new([0.5, 0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(RatingDistribution::new([-0.1, 0.6, 0.5, 0.0, 0.0]).is_err());
        let bad = RatingDistribution { probs: [0.9, 0.0, 0.0, 0.0, 0.0] };
        assert!(geval_score(&bad).is_err());
    }

    #[test]
    fn lexical_judge_rates_aligned_text_high() {
        let tree = canonical_tree();
        let judge = LexicalJudge::new(&tree);
        // only Openness-to-Change atomics present: r = 1 -> level 5
        let dist = judge
            .rate("Creativity and Freedom matter most.", Dimension::OpennessToChange)
            .unwrap();
        assert_eq!(dist, RatingDistribution::point_mass(5));
    }

    #[test]
    fn lexical_judge_defaults_to_neutral() {
        let tree = canonical_tree();
        let judge = LexicalJudge::new(&tree);
        let dist = judge.rate("nothing relevant here", Dimension::Conservation).unwrap();
        assert_eq!(dist, RatingDistribution::point_mass(3));
    }

    #[test]
    fn lexical_judge_rates_opposing_text_low() {
        let tree = canonical_tree();
        let judge = LexicalJudge::new(&tree);
        // Obedience is a Conformity atomic under Conservation: for the
        // Openness-to-Change dimension r = -1 -> level 1
        let dist = judge.rate("Obedience above all.", Dimension::OpennessToChange).unwrap();
        assert_eq!(dist, RatingDistribution::point_mass(1));
    }

    #[test]
    fn lexical_judge_matches_whole_words_case_insensitively() {
        let tree = canonical_tree();
        let judge = LexicalJudge::new(&tree);
        // "creativityx" is not a word hit; "CREATIVITY" is
        let dist = judge.rate("creativityx", Dimension::OpennessToChange).unwrap();
        assert_eq!(dist, RatingDistribution::point_mass(3));
        let dist = judge.rate("CREATIVITY!", Dimension::OpennessToChange).unwrap();
        assert_eq!(dist, RatingDistribution::point_mass(5));
    }

    #[test]
    fn rating_parse_takes_first_digit() {
        assert_eq!(parse_rating("Score: 4").unwrap(), 4);
        assert_eq!(parse_rating("I'd say 3, maybe 5").unwrap(), 3);
        assert!(matches!(
            parse_rating("excellent"),
            Err(EvaluatorError::UnparseableReply { .. })
        ));
    }

    #[test]
    fn quality_rubric_embeds_the_text() {
        let p = rubric_prompt(Rubric::Quality, "my response", Dimension::Conservation);
        assert!(p.contains("Text: my response"));
        assert!(p.ends_with("Score:"));
    }

    #[test]
    fn deterministic_judge_is_invariant_in_n_runs() {
        let tree = canonical_tree();
        let judge = LexicalJudge::new(&tree);
        let text = "Creativity, Freedom, and Obedience.";
        let one = score_response(text, Dimension::OpennessToChange, &judge, 1).unwrap();
        let ten = score_response(text, Dimension::OpennessToChange, &judge, 10).unwrap();
        assert_eq!(one.score, ten.score);
        assert_eq!(ten.per_run.len(), 10);
        assert!(ten.per_run.iter().all(|&s| s == one.score));

        assert!(matches!(
            score_response(text, Dimension::OpennessToChange, &judge, 0),
            Err(EvaluatorError::ZeroRuns)
        ));
    }

    #[test]
    fn score_is_the_mean_of_runs() {
        struct Cycling(std::cell::Cell<usize>);
        impl Judge for Cycling {
            fn rate(&self, _: &str, _: Dimension) -> Result<RatingDistribution, EvaluatorError> {
                let i = self.0.get();
                self.0.set(i + 1);
                let levels = [4u8, 4, 5, 5];
                Ok(RatingDistribution::point_mass(levels[i % 4]))
            }
            fn kind(&self) -> JudgeKind {
                JudgeKind::Remote
            }
        }
        let judge = Cycling(std::cell::Cell::new(0));
        let score = score_response("x", Dimension::Conservation, &judge, 4).unwrap();
        assert_eq!(score.per_run, vec![4.0, 4.0, 5.0, 5.0]);
        assert_eq!(score.score, 4.5);
    }

    proptest! {
        #[test]
        fn geval_is_linear_and_bounded(raw in proptest::collection::vec(0.0f64..1.0, 5)) {
            let sum: f64 = raw.iter().sum();
            prop_assume!(sum > 1e-9);
            let mut probs = [0.0; 5];
            for (slot, v) in probs.iter_mut().zip(raw.iter()) {
                *slot = v / sum;
            }
            let dist = RatingDistribution { probs };
            let score = geval_score(&dist).unwrap();
            prop_assert!((1.0..=5.0 + 1e-9).contains(&score));
        }

        #[test]
        fn lexical_judge_is_pure(s in "[a-zA-Z ]{0,60}") {
            let tree = canonical_tree();
            let judge = LexicalJudge::new(&tree);
            let a = judge.rate(&s, Dimension::SelfTranscendence).unwrap();
            let b = judge.rate(&s, Dimension::SelfTranscendence).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
