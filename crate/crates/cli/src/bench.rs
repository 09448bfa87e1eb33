//! `synth-bench`: builds planted fixtures across seeds, runs the full
//! locate-and-edit pipeline on each, and checks every bound. Exits nonzero
//! naming the first failed criterion.

use crate::error::AppError;
use std::path::Path;
use vlk_core::editor::{Direction, EditPolicy};
use vlk_core::locator;
use vlk_core::synthlab::{
    self, bench_config, bench_spec, build_planted_model, effect_probe, gen_class_prompts,
    random_control_policy, record_contrast,
};
use vlk_core::taxonomy::Dimension;

pub struct BenchSettings {
    pub seeds: u64,
    pub tau: f64,
    pub target_gap: f64,
    pub n_prompts_per_class: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings { seeds: 10, tau: 0.25, target_gap: 0.5, n_prompts_per_class: 500 }
    }
}

struct SeedOutcome {
    seed: u64,
    precision: f64,
    recall: f64,
    top_k_exact: bool,
    signs_agree: bool,
    shifts: Vec<f64>,
    negative_shift: f64,
    control_ratio: f64,
}

const PROBE_GAMMAS: [f32; 3] = [0.5, 1.0, 2.0];

fn run_seed(seed: u64, settings: &BenchSettings) -> Result<SeedOutcome, AppError> {
    let cfg = bench_config(seed);
    let spec = bench_spec(seed, settings.target_gap, settings.n_prompts_per_class);
    let (weights, truth) = build_planted_model(&cfg, &spec)?;
    let (plus, minus) = gen_class_prompts(&spec)?;
    let contrast = record_contrast(&weights, &plus, &minus)?;
    let catalog =
        locator::classify(&contrast, settings.tau, Dimension::Conservation, &truth.model_digest)?;
    let eval = synthlab::evaluate_locator(&catalog, &truth)?;

    let planted: std::collections::BTreeSet<(usize, usize)> =
        truth.planted.iter().map(|p| (p.layer, p.neuron)).collect();
    let top: std::collections::BTreeSet<(usize, usize)> = catalog
        .top_k(truth.planted.len())
        .iter()
        .map(|e| (e.layer, e.neuron))
        .collect();
    let top_k_exact = top == planted;

    let mut shifts = Vec::new();
    for gamma in PROBE_GAMMAS {
        let policy = EditPolicy::from_catalog(&catalog, Direction::PositiveShift, gamma)?;
        shifts.push(effect_probe(&weights, &policy, &truth, &plus)?);
    }
    let negative = EditPolicy::from_catalog(&catalog, Direction::NegativeShift, 2.0)?;
    let negative_shift = effect_probe(&weights, &negative, &truth, &plus)?;

    let planted_policy = EditPolicy::from_catalog(&catalog, Direction::PositiveShift, 2.0)?;
    let planted_shift = shifts[PROBE_GAMMAS.len() - 1];
    let control = random_control_policy(&planted_policy, &truth, seed.wrapping_add(0xC0117801))?;
    let control_shift = effect_probe(&weights, &control, &truth, &plus)?;
    let control_ratio = if planted_shift.abs() > 0.0 {
        control_shift.abs() / planted_shift.abs()
    } else {
        f64::INFINITY
    };

    Ok(SeedOutcome {
        seed,
        precision: eval.precision,
        recall: eval.recall,
        top_k_exact,
        signs_agree: eval.per_neuron.iter().all(|p| p.sign_agrees),
        shifts,
        negative_shift,
        control_ratio,
    })
}

pub fn synth_bench(settings: &BenchSettings, out: Option<&Path>) -> Result<(), AppError> {
    println!(
        "synthetic benchmark: {} seeds, tau {}, target gap {}, {} prompts per class",
        settings.seeds, settings.tau, settings.target_gap, settings.n_prompts_per_class
    );
    println!(
        "{:<6} {:>9} {:>7} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "seed", "precision", "recall", "top-k", "signs",
        "shift@0.5", "shift@1.0", "shift@2.0", "neg@2.0", "ctrl-ratio"
    );

    let mut outcomes = Vec::new();
    for seed in 0..settings.seeds {
        let o = run_seed(seed, settings)?;
        println!(
            "{:<6} {:>9.3} {:>7.3} {:>6} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            o.seed,
            o.precision,
            o.recall,
            o.top_k_exact,
            o.signs_agree,
            o.shifts[0],
            o.shifts[1],
            o.shifts[2],
            o.negative_shift,
            o.control_ratio
        );
        outcomes.push(o);
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from(
            "seed,precision,recall,top_k_exact,signs_agree,shift_0_5,shift_1_0,shift_2_0,negative_shift,control_ratio\n",
        );
        for o in &outcomes {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                o.seed,
                o.precision,
                o.recall,
                o.top_k_exact,
                o.signs_agree,
                o.shifts[0],
                o.shifts[1],
                o.shifts[2],
                o.negative_shift,
                o.control_ratio
            ));
        }
        std::fs::write(dir.join("results.csv"), csv)?;

        let cfg = bench_config(0);
        let spec = bench_spec(0, settings.target_gap, settings.n_prompts_per_class);
        let (weights, truth) = build_planted_model(&cfg, &spec)?;
        let (plus, minus) = gen_class_prompts(&spec)?;
        synthlab::write_fixture_bundle(
            &dir.join("fixture-seed0"),
            &cfg,
            &spec,
            &weights,
            &truth,
            &plus,
            &minus,
        )?;
        println!("wrote results and the seed-0 fixture bundle to {}", dir.display());
    }

    // Criteria.
    let all = outcomes.len() as f64;
    let fail = |name: &str| AppError::acceptance(format!("criterion failed: {name}"));
    if !outcomes.iter().all(|o| o.precision == 1.0) {
        let hit = outcomes.iter().filter(|o| o.precision == 1.0).count();
        eprintln!("precision 1.0 on {hit}/{all} seeds");
        return Err(fail("planted-neuron precision = 1.0 on every seed"));
    }
    if !outcomes.iter().all(|o| o.recall == 1.0) {
        return Err(fail("planted-neuron recall = 1.0 on every seed"));
    }
    if !outcomes.iter().all(|o| o.top_k_exact) {
        return Err(fail("top-k by |delta| returns exactly the planted set"));
    }
    if !outcomes.iter().all(|o| o.signs_agree) {
        return Err(fail("planted delta signs all agree"));
    }
    if !outcomes.iter().all(|o| o.shifts.iter().all(|&s| s > 0.0)) {
        return Err(fail("positive-shift marker-logit shift > 0"));
    }
    if !outcomes
        .iter()
        .all(|o| o.shifts.windows(2).all(|w| w[1] >= w[0]))
    {
        return Err(fail("marker-logit shift non-decreasing in gamma"));
    }
    if !outcomes.iter().all(|o| o.negative_shift < 0.0) {
        return Err(fail("negative-shift marker-logit shift < 0"));
    }
    let control_ok = outcomes.iter().filter(|o| o.control_ratio < 0.10).count();
    if (control_ok as f64) < (all - 1.0).max(1.0) {
        eprintln!("control ratio under 10% on {control_ok}/{all} seeds");
        return Err(fail("random-neuron control under 10% of planted shift on all but one seed"));
    }

    println!("all criteria passed on {} seeds", outcomes.len());
    Ok(())
}
