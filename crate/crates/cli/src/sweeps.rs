//! Parameter sweeps: scaling factor and classification threshold, each
//! emitting one long-format CSV suitable for plotting.

use crate::config::RunConfig;
use crate::error::AppError;
use crate::stages;
use std::path::{Path, PathBuf};
use vlk_core::editor::{Direction, EditPolicy};
use vlk_core::evaluator::{self, Rubric};
use vlk_core::locator;
use vlk_core::model::GenerationParams;
use vlk_core::report::{self, Series};
use vlk_core::taxonomy::canonical_tree;

pub fn sweeps_dir(out: &Path) -> PathBuf {
    out.join("sweeps")
}

#[derive(Debug, Clone)]
struct SweepRow {
    param: f64,
    direction: Direction,
    dimension: String,
    score: f64,
    quality_score: Option<f64>,
    n_neurons_edited: usize,
}

fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,direction,dimension,score,quality_score,n_neurons_edited\n");
    for r in rows {
        let quality = r.quality_score.map(|q| q.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{quality},{}\n",
            r.param, r.direction, r.dimension, r.score, r.n_neurons_edited
        ));
    }
    out
}

/// Runs edit-generate + evaluate in memory for one policy and returns the
/// mean value score, plus the mean quality score when a remote judge is
/// configured (the deterministic lexical judge has no quality rubric).
fn run_policy(
    cfg: &RunConfig,
    weights: &vlk_core::model::Weights,
    items: &[vlk_core::dataset::DatasetItem],
    policy: &EditPolicy,
) -> Result<(f64, Option<f64>), AppError> {
    let params = GenerationParams::new(cfg.max_new_tokens);
    let responses = stages::generate_responses(weights, items, policy, &params)?;
    let judge = stages::make_judge(&cfg.judge)?;
    let rows = stages::score_responses(&responses, judge.as_ref(), cfg.judge.n_runs())?;
    let mean = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64
    };
    let quality = match &cfg.judge {
        crate::config::JudgeSetting::Remote { config } => {
            let judge = evaluator::RemoteJudge::new(config.clone(), Rubric::Quality);
            let rows = stages::score_responses(&responses, &judge, config.n_runs)?;
            Some(rows.iter().map(|r| r.score).sum::<f64>() / rows.len().max(1) as f64)
        }
        crate::config::JudgeSetting::Lexical { .. } => None,
    };
    Ok((mean, quality))
}

fn write_sweep(
    cfg: &RunConfig,
    name: &str,
    rows: &[SweepRow],
    svg: bool,
    x_label: &str,
) -> Result<(), AppError> {
    let dir = sweeps_dir(cfg.out_dir()?);
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join(format!("{name}.csv"));
    std::fs::write(&csv_path, rows_to_csv(rows))?;
    if svg {
        let mut series = Vec::new();
        for direction in [Direction::PositiveShift, Direction::NegativeShift] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.direction == direction)
                .map(|r| (r.param, r.score))
                .collect();
            if !points.is_empty() {
                series.push(Series {
                    name: match direction {
                        Direction::PositiveShift => "PositiveShift",
                        Direction::NegativeShift => "NegativeShift",
                    },
                    points,
                });
            }
        }
        let chart = report::line_chart_svg(&format!("{name} sweep"), x_label, &series);
        std::fs::write(dir.join(format!("{name}.svg")), chart)?;
    }
    println!("wrote {} rows to {}", rows.len(), csv_path.display());
    Ok(())
}

/// `sweep-gamma`: edit-generate + evaluate across the scaling-factor grid in
/// both shift directions, on the locate stage's catalog.
pub fn sweep_gamma(cfg: &RunConfig, svg: bool) -> Result<(), AppError> {
    let out = cfg.out_dir()?;
    let (weights, items) = {
        let model_path = cfg.model_path()?;
        crate::manifest::require_file(model_path, "model weights")?;
        let dataset_path = cfg.dataset_path()?;
        crate::manifest::require_file(dataset_path, "dataset")?;
        (
            vlk_core::model::Weights::load(model_path)?,
            vlk_core::dataset::load_dataset(dataset_path)?,
        )
    };
    let catalog = stages::load_catalog(out)?;
    let mut rows = Vec::new();
    for direction in [Direction::PositiveShift, Direction::NegativeShift] {
        for &gamma in &cfg.gamma_grid() {
            let policy = EditPolicy::from_catalog(&catalog, direction, gamma)?;
            let (score, quality_score) = run_policy(cfg, &weights, &items, &policy)?;
            rows.push(SweepRow {
                param: gamma as f64,
                direction,
                dimension: catalog.dimension.to_string(),
                score,
                quality_score,
                n_neurons_edited: policy.n_neurons_edited(),
            });
        }
    }
    write_sweep(cfg, "sweep_gamma", &rows, svg, "gamma")
}

/// `sweep-threshold`: re-run locate and the downstream stages across the
/// threshold grid, in both shift directions at the configured gamma.
pub fn sweep_threshold(cfg: &RunConfig, svg: bool) -> Result<(), AppError> {
    let out = cfg.out_dir()?;
    let (weights, items) = {
        let model_path = cfg.model_path()?;
        crate::manifest::require_file(model_path, "model weights")?;
        let dataset_path = cfg.dataset_path()?;
        crate::manifest::require_file(dataset_path, "dataset")?;
        (
            vlk_core::model::Weights::load(model_path)?,
            vlk_core::dataset::load_dataset(dataset_path)?,
        )
    };
    let (contrast, model_digest) = stages::load_recorded_contrast(out)?;
    let dimension = cfg.dimension()?;
    let _ = canonical_tree(); // dimension names validated at parse time

    let mut rows = Vec::new();
    for &tau in &cfg.tau_grid() {
        let catalog = locator::classify(&contrast, tau, dimension, &model_digest)?;
        for direction in [Direction::PositiveShift, Direction::NegativeShift] {
            let policy = EditPolicy::from_catalog(&catalog, direction, cfg.gamma)?;
            let (score, quality_score) = run_policy(cfg, &weights, &items, &policy)?;
            rows.push(SweepRow {
                param: tau,
                direction,
                dimension: dimension.to_string(),
                score,
                quality_score,
                n_neurons_edited: policy.n_neurons_edited(),
            });
        }
    }
    write_sweep(cfg, "sweep_threshold", &rows, svg, "tau")
}
