//! The four pipeline stages plus the one-shot utility commands. Each stage
//! consumes the previous stage's files under the shared output directory and
//! leaves a manifest recording every input and output digest.

use crate::config::{JudgeSetting, RunConfig};
use crate::error::AppError;
use crate::manifest::{require_file, Manifest};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use vlk_core::dataset::{self, templates, DatasetItem, PromptBundle};
use vlk_core::editor::{self, EditPolicy, EditedResponse};
use vlk_core::evaluator::{self, Judge, LexicalJudge, ScoreRow};
use vlk_core::locator::{self, NeuronCatalog};
use vlk_core::model::{GenerationParams, Weights};
use vlk_core::recorder::{self, ActivationProfile, ContrastProfile};
use vlk_core::taxonomy::{canonical_tree, Dimension};
use vlk_core::{recorder::RecorderError, report};

pub fn record_dir(out: &Path) -> PathBuf {
    out.join("record")
}
pub fn locate_dir(out: &Path) -> PathBuf {
    out.join("locate")
}
pub fn edit_dir(out: &Path) -> PathBuf {
    out.join("edit")
}
pub fn eval_dir(out: &Path) -> PathBuf {
    out.join("eval")
}

fn config_snapshot(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serialises")
}

/// `export-tree`: the canonical hierarchy as tab-separated membership lines.
pub fn export_tree(out: &Path) -> Result<(), AppError> {
    std::fs::write(out, canonical_tree().export_tsv())?;
    println!("wrote {} membership lines to {}", canonical_tree().membership().len(), out.display());
    Ok(())
}

/// `init-model`: seeded weights for the configured model shape.
pub fn init_model(cfg: &RunConfig) -> Result<(), AppError> {
    let model_cfg = cfg.model_config();
    let path = cfg.model_path()?;
    let weights = Weights::init_seeded(&model_cfg)?;
    weights.save(path)?;
    println!("wrote weights (digest {}) to {}", weights.digest(), path.display());
    Ok(())
}

/// `dataset-stats`: exact counts printed as JSON.
pub fn dataset_stats(dataset: &Path) -> Result<(), AppError> {
    require_file(dataset, "dataset")?;
    let items = dataset::load_dataset(dataset)?;
    let stats = dataset::dataset_stats(&items);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

/// `gen-items`: template-driven drafts through the configured service.
pub fn gen_items(
    cfg: &RunConfig,
    template: &str,
    slot_args: &[String],
    count: usize,
    out: Option<&Path>,
) -> Result<(), AppError> {
    let service = cfg
        .service
        .as_ref()
        .ok_or_else(|| AppError::config("no service configured for gen-items".to_string()))?;
    let mut slots = std::collections::BTreeMap::new();
    for arg in slot_args {
        let (k, v) = arg.split_once('=').ok_or_else(|| {
            AppError::config(format!("slot {arg:?} is not of the form name=value"))
        })?;
        slots.insert(k.to_string(), v.to_string());
    }
    if templates::get(template).is_none() {
        return Err(AppError::config(format!(
            "no template named {template:?}; known: {}",
            templates::NAMES.join(", ")
        )));
    }
    let outcome = dataset::generate_items(template, &slots, service, count)?;
    for reject in &outcome.rejected {
        eprintln!("rejected draft: {}", reject.reason);
    }
    println!("accepted {} drafts, rejected {}", outcome.accepted.len(), outcome.rejected.len());
    if let Some(path) = out {
        dataset::save_dataset(path, &outcome.accepted)?;
        println!("wrote drafts to {}", path.display());
    }
    Ok(())
}

fn load_pipeline_inputs(cfg: &RunConfig) -> Result<(Weights, Vec<DatasetItem>), AppError> {
    let model_path = cfg.model_path()?;
    require_file(model_path, "model weights")?;
    let dataset_path = cfg.dataset_path()?;
    require_file(dataset_path, "dataset")?;
    let weights = Weights::load(model_path)?;
    let items = dataset::load_dataset(dataset_path)?;
    Ok((weights, items))
}

/// Records a bundle set into a profile on a bounded worker pool. Partial
/// profiles are folded per worker and combined with the exact merge, so the
/// result is bit-identical to sequential accumulation.
pub fn record_parallel(
    weights: &Weights,
    bundles: &[PromptBundle],
    generation: Option<&GenerationParams>,
    parallelism: usize,
) -> Result<ActivationProfile, AppError> {
    let cfg = &weights.config;
    let empty = || ActivationProfile::empty(cfg.n_layers, cfg.d_ff);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| AppError::config(e.to_string()))?;
    let profile = pool.install(|| {
        bundles
            .par_iter()
            .try_fold(empty, |mut profile, bundle| {
                let record = recorder::record_prompt(weights, bundle, generation)?;
                recorder::accumulate(&mut profile, &record)?;
                Ok::<_, RecorderError>(profile)
            })
            .try_reduce(empty, |a, b| recorder::merge(&a, &b))
    })?;
    Ok(profile)
}

/// `record`: contrastive firing profiles for one dimension.
pub fn record(cfg: &RunConfig) -> Result<(), AppError> {
    let (weights, items) = load_pipeline_inputs(cfg)?;
    let dimension = cfg.dimension()?;
    let (plus, minus) = dataset::contrast_split(&items, dimension)?;
    let generation = cfg
        .include_generation
        .then(|| GenerationParams::new(cfg.max_new_tokens));

    let profile_plus = record_parallel(&weights, &plus, generation.as_ref(), cfg.parallelism)?;
    let profile_minus = record_parallel(&weights, &minus, generation.as_ref(), cfg.parallelism)?;
    let contrast = recorder::contrast(&profile_plus, &profile_minus)?;

    let dir = record_dir(cfg.out_dir()?);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("profile_plus.csv"), recorder::profile_to_csv(&profile_plus)?)?;
    std::fs::write(dir.join("profile_minus.csv"), recorder::profile_to_csv(&profile_minus)?)?;
    std::fs::write(dir.join("contrast.csv"), recorder::contrast_to_csv(&contrast))?;

    let mut snapshot = config_snapshot(cfg);
    snapshot["model_digest"] = serde_json::Value::String(weights.digest());
    let mut manifest = Manifest::new("record", snapshot);
    manifest.add_input("model", cfg.model_path()?)?;
    manifest.add_input("dataset", cfg.dataset_path()?)?;
    for name in ["profile_plus.csv", "profile_minus.csv", "contrast.csv"] {
        manifest.add_output(name, &dir.join(name))?;
    }
    manifest.write(&dir)?;
    println!(
        "recorded {} positive and {} negative prompts for {dimension} into {}",
        contrast.n_plus,
        contrast.n_minus,
        dir.display()
    );
    Ok(())
}

/// Reads the record stage's contrast back, verifying it against the record
/// manifest, and returns the model digest the profiles were measured on.
pub fn load_recorded_contrast(out: &Path) -> Result<(ContrastProfile, String), AppError> {
    let dir = record_dir(out);
    let manifest = Manifest::read(&dir)?;
    let contrast_path = dir.join("contrast.csv");
    require_file(&contrast_path, "contrast profile")?;
    manifest.verify_output_unchanged("contrast.csv", &contrast_path)?;
    let digest = manifest
        .config_str("model_digest")
        .ok_or_else(|| AppError::config("record manifest lacks model_digest".to_string()))?
        .to_string();
    let contrast = recorder::contrast_from_csv(&std::fs::read_to_string(&contrast_path)?)?;
    Ok((contrast, digest))
}

/// `locate`: classify the recorded contrast into a neuron catalog.
pub fn locate(cfg: &RunConfig, svg: bool) -> Result<(), AppError> {
    let out = cfg.out_dir()?;
    let dimension = cfg.dimension()?;
    let (contrast, model_digest) = load_recorded_contrast(out)?;
    let catalog = locator::classify(&contrast, cfg.tau, dimension, &model_digest)?;
    let report_data = locator::distribution_report(&catalog);

    let dir = locate_dir(out);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("catalog.csv"), catalog.to_csv())?;
    std::fs::write(dir.join("report.csv"), report_data.to_csv())?;
    if svg {
        let chart = report::distribution_chart_svg(
            &format!("{dimension}: flagged neurons per layer"),
            &report_data,
        );
        std::fs::write(dir.join("report.svg"), chart)?;
    }

    let mut snapshot = config_snapshot(cfg);
    snapshot["model_digest"] = serde_json::Value::String(model_digest);
    let mut manifest = Manifest::new("locate", snapshot);
    manifest.add_input("contrast.csv", &record_dir(out).join("contrast.csv"))?;
    manifest.add_output("catalog.csv", &dir.join("catalog.csv"))?;
    manifest.add_output("report.csv", &dir.join("report.csv"))?;
    if svg {
        manifest.add_output("report.svg", &dir.join("report.svg"))?;
    }
    manifest.write(&dir)?;
    println!(
        "classified {} neurons ({} flagged, fraction {:.6}) into {}",
        catalog.entries.len(),
        catalog.n_flagged(),
        report_data.flagged_fraction,
        dir.display()
    );
    Ok(())
}

/// Reads the locate stage's catalog back under manifest verification.
pub fn load_catalog(out: &Path) -> Result<NeuronCatalog, AppError> {
    let dir = locate_dir(out);
    let manifest = Manifest::read(&dir)?;
    let path = dir.join("catalog.csv");
    require_file(&path, "neuron catalog")?;
    manifest.verify_output_unchanged("catalog.csv", &path)?;
    let tau = manifest
        .config_f64("tau")
        .ok_or_else(|| AppError::config("locate manifest lacks tau".to_string()))?;
    let dimension: Dimension = manifest
        .config_str("dimension")
        .ok_or_else(|| AppError::config("locate manifest lacks dimension".to_string()))?
        .parse()
        .map_err(|e: vlk_core::taxonomy::TaxonomyError| AppError::config(e.to_string()))?;
    let digest = manifest
        .config_str("model_digest")
        .ok_or_else(|| AppError::config("locate manifest lacks model_digest".to_string()))?;
    Ok(NeuronCatalog::from_csv(&std::fs::read_to_string(&path)?, tau, dimension, digest)?)
}

/// Builds the plain question-answering prompt for one item.
pub fn answer_prompt(item: &DatasetItem) -> PromptBundle {
    let prompt = templates::ANSWER_QUESTIONS.replacen("{question}", &item.question, 1);
    PromptBundle { item_id: item.id.clone(), prompt, polarity: item.polarity }
}

/// Generates edited responses for every in-dimension item.
pub fn generate_responses(
    weights: &Weights,
    items: &[DatasetItem],
    policy: &EditPolicy,
    params: &GenerationParams,
) -> Result<Vec<EditedResponse>, AppError> {
    let mut responses = Vec::new();
    for item in items.iter().filter(|i| i.dimension == policy.dimension) {
        let bundle = answer_prompt(item);
        responses.push(editor::generate_with_edit(weights, &bundle, policy, params)?);
    }
    Ok(responses)
}

/// `edit-generate`: answer every in-dimension question under the edit hook.
pub fn edit_generate(cfg: &RunConfig) -> Result<(), AppError> {
    let out = cfg.out_dir()?;
    let (weights, items) = load_pipeline_inputs(cfg)?;
    let catalog = load_catalog(out)?;
    let policy = EditPolicy::from_catalog(&catalog, cfg.direction()?, cfg.gamma)?;
    let params = GenerationParams::new(cfg.max_new_tokens);
    let responses = generate_responses(&weights, &items, &policy, &params)?;

    let dir = edit_dir(out);
    std::fs::create_dir_all(&dir)?;
    let policy_file = editor::PolicyFile {
        direction: policy.direction,
        gamma: policy.gamma,
        tau: policy.tau,
        dimension: policy.dimension,
        catalog_path: locate_dir(out).join("catalog.csv").display().to_string(),
        model_digest: policy.model_digest.clone(),
    };
    std::fs::write(dir.join("policy.json"), serde_json::to_string_pretty(&policy_file)?)?;
    let mut jsonl = String::new();
    for r in &responses {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("responses.jsonl"), jsonl)?;

    let mut manifest = Manifest::new("edit-generate", config_snapshot(cfg));
    manifest.add_input("model", cfg.model_path()?)?;
    manifest.add_input("dataset", cfg.dataset_path()?)?;
    manifest.add_input("catalog.csv", &locate_dir(out).join("catalog.csv"))?;
    manifest.add_output("policy.json", &dir.join("policy.json"))?;
    manifest.add_output("responses.jsonl", &dir.join("responses.jsonl"))?;
    manifest.write(&dir)?;
    println!("generated {} responses under {} into {}", responses.len(), policy_label(&policy), dir.display());
    Ok(())
}

pub fn policy_label(policy: &EditPolicy) -> String {
    format!("{}:g{}:t{}", policy.direction, policy.gamma, policy.tau)
}

/// Builds the configured judge.
pub fn make_judge(setting: &JudgeSetting) -> Result<Box<dyn Judge>, AppError> {
    match setting {
        JudgeSetting::Lexical { .. } => Ok(Box::new(LexicalJudge::new(&canonical_tree()))),
        JudgeSetting::Remote { config } => Ok(Box::new(evaluator::RemoteJudge::new(
            config.clone(),
            evaluator::Rubric::Value,
        ))),
    }
}

/// Scores a response set, returning score rows in input order.
pub fn score_responses(
    responses: &[EditedResponse],
    judge: &dyn Judge,
    n_runs: usize,
) -> Result<Vec<ScoreRow>, AppError> {
    let mut rows = Vec::new();
    for r in responses {
        let score = evaluator::score_response(&r.response, r.dimension, judge, n_runs)?;
        rows.push(ScoreRow {
            item_id: r.item_id.clone(),
            dimension: r.dimension,
            policy: format!("{}:g{}:t{}", r.direction, r.gamma, r.tau),
            judge: score.judge,
            n_runs: score.n_runs,
            score: score.score,
        });
    }
    Ok(rows)
}

/// `evaluate`: score the edit stage's responses.
pub fn evaluate(cfg: &RunConfig) -> Result<(), AppError> {
    let out = cfg.out_dir()?;
    let dir = edit_dir(out);
    let manifest_in = Manifest::read(&dir)?;
    let responses_path = dir.join("responses.jsonl");
    require_file(&responses_path, "responses")?;
    manifest_in.verify_output_unchanged("responses.jsonl", &responses_path)?;

    let mut responses = Vec::new();
    for (idx, line) in std::fs::read_to_string(&responses_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: EditedResponse = serde_json::from_str(line).map_err(|e| {
            AppError::config(format!("responses.jsonl line {}: {e}", idx + 1))
        })?;
        responses.push(r);
    }

    let judge = make_judge(&cfg.judge)?;
    let rows = score_responses(&responses, judge.as_ref(), cfg.judge.n_runs())?;
    let eval = eval_dir(out);
    std::fs::create_dir_all(&eval)?;
    std::fs::write(eval.join("scores.csv"), evaluator::scores_to_csv(&rows))?;

    let mut manifest = Manifest::new("evaluate", config_snapshot(cfg));
    manifest.add_input("responses.jsonl", &responses_path)?;
    manifest.add_output("scores.csv", &eval.join("scores.csv"))?;
    manifest.write(&eval)?;

    let mean = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64
    };
    println!("scored {} responses (mean {mean:.4}) into {}", rows.len(), eval.display());
    Ok(())
}
