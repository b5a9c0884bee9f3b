//! Browser demo: verifier decision grid, simulated selection and synthesis,
//! and simulated pairwise difficulty rating. Every export takes plain
//! numbers and returns a JSON string.

use std::collections::BTreeMap;
use std::sync::Arc;

use rlvr_forge::gateway::{QualityModel, SimulatedWorld, VariantDifficulty};
use rlvr_forge::keyed::KeyedRng;
use rlvr_forge::plot::{histogram_svg, Series};
use rlvr_forge::rating::{bootstrap_ratings, judge_all, schedule_battles, Judgement, RatingItem};
use rlvr_forge::selector::pass_histogram;
use rlvr_forge::synth::{run_pipeline, verify_candidate, Backends};
use rlvr_forge::{Dataset, PipelineConfig, RatingConfig, Sample};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Grid {
    pub n: u32,
    /// `cells[c_ori][c_cand]`
    pub cells: Vec<Vec<&'static str>>,
    pub accepted: usize,
}

pub fn grid(n: u32, t_min: u32, delta_hard: u32) -> Result<Grid, String> {
    let mut cfg = PipelineConfig { n_rollouts: n, t_min, delta_hard, ..PipelineConfig::default() };
    cfg.select.n_rollouts = n;
    cfg.select.min_pass_for_selection = cfg.select.min_pass_for_selection.min(n);
    cfg.validate().map_err(|e| e.to_string())?;
    let cells: Vec<Vec<&'static str>> =
        (0..=n).map(|c_ori| (0..=n).map(|c_cand| verify_candidate(c_ori, c_cand, &cfg).as_str()).collect()).collect();
    let accepted = cells.iter().flatten().filter(|v| **v == "accepted").count();
    Ok(Grid { n, cells, accepted })
}

#[derive(Debug, Serialize)]
pub struct Synthesis {
    pub seeds: usize,
    pub selected: usize,
    pub synthesized: usize,
    pub exhausted: usize,
    pub tallies: BTreeMap<&'static str, usize>,
    pub mean_seed: f64,
    pub mean_selected: f64,
    pub mean_synth: f64,
    pub svg: String,
}

fn mean(xs: impl Iterator<Item = u32>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + f64::from(x), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Seeds solve with probability drawn from `[p_lo, p_hi)`; rewrites solve
/// with probability drawn from `[v_lo, v_hi)`.
pub fn synthesis(items: usize, p_lo: f64, p_hi: f64, v_lo: f64, v_hi: f64, min_pass: u32, seed: u64) -> Result<Synthesis, String> {
    for (name, lo, hi) in [("seed", p_lo, p_hi), ("rewrite", v_lo, v_hi)] {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(format!("{name} solve range must satisfy 0 <= lo <= hi <= 1"));
        }
    }
    if items == 0 || items > 2000 {
        return Err("items must be between 1 and 2000".into());
    }
    let mut cfg = PipelineConfig::default();
    cfg.select.min_pass_for_selection = min_pass;
    cfg.select.validate().map_err(|e| e.to_string())?;

    let mut world = SimulatedWorld::default();
    world.variant = VariantDifficulty::Uniform { lo: v_lo, hi: v_hi };
    world.quality = QualityModel::Fixed { score: 0.9 };
    let mut samples = Vec::with_capacity(items);
    for i in 0..items {
        let p = p_lo + (p_hi - p_lo) * KeyedRng::new(seed, "demo-p", i as u64).next_f64();
        let s = Sample::seed(format!("q{i:04}"), format!("img/{i:04}.png"), format!("Question {i}: find the value of x{i}."), format!("{}", 7 + i));
        world.add_question(s.question.clone(), s.answer.clone(), p, 0.0);
        samples.push(s);
    }
    let world = Arc::new(world);
    let dataset = Dataset::new("demo", samples).map_err(|e| e.to_string())?;
    let backends = Backends::new(Arc::new(world.solver("sim-target")), Arc::new(world.synthesizer("sim-synth")))
        .with_judge(Arc::new(world.quality_judge("sim-judge")));
    let run = run_pipeline(&dataset, &cfg, &backends, seed).map_err(|e| e.to_string())?;

    let selected: Vec<_> = run.seed_rollouts.iter().filter(|r| run.selected.contains(&r.sample_id)).cloned().collect();
    let n = cfg.n_rollouts;
    let svg = histogram_svg(
        "Pass counts before and after synthesis",
        &[
            Series { label: "selected seeds".into(), counts: pass_histogram(&selected, n) },
            Series { label: "synthesized".into(), counts: pass_histogram(&run.candidate_rollouts, n) },
        ],
    );
    Ok(Synthesis {
        seeds: items,
        selected: run.selected.len(),
        synthesized: run.synthesized.len(),
        exhausted: run.exhausted.len(),
        tallies: run.tallies().into_iter().map(|(v, c)| (v.as_str(), c)).collect(),
        mean_seed: mean(run.seed_rollouts.iter().map(|r| r.pass_count)),
        mean_selected: mean(selected.iter().map(|r| r.pass_count)),
        mean_synth: mean(run.candidate_rollouts.iter().map(|r| r.pass_count)),
        svg,
    })
}

#[derive(Debug, Serialize)]
pub struct RatedItem {
    pub id: String,
    pub true_theta: f64,
    pub theta: f64,
    pub elo: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tier: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Rating {
    pub battles: usize,
    pub spearman: f64,
    pub items: Vec<RatedItem>,
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, i) in order.into_iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = ranks(a).iter().zip(ranks(b)).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Latent log-difficulties are drawn from `[-spread, spread)`.
pub fn rating(items: usize, k: usize, rounds: usize, spread: f64, seed: u64) -> Result<Rating, String> {
    if !(3..=300).contains(&items) {
        return Err("items must be between 3 and 300".into());
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err("spread must be a non-negative number".into());
    }
    let cfg = RatingConfig { k_opponents: k, bootstrap_rounds: rounds, ..RatingConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let mut world = SimulatedWorld::default();
    let mut samples = Vec::with_capacity(items);
    let mut truth = Vec::with_capacity(items);
    for i in 0..items {
        let theta = spread * (2.0 * KeyedRng::new(seed, "demo-theta", i as u64).next_f64() - 1.0);
        let s = Sample::seed(format!("item{i:03}"), format!("img/{i:03}.png"), format!("Problem {i}"), "0");
        world.add_question(s.question.clone(), "0", 0.5, theta);
        truth.push(theta);
        samples.push(s);
    }
    let world = Arc::new(world);
    let rated: Vec<RatingItem> = samples.iter().map(RatingItem::from).collect();
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let schedule = schedule_battles(&ids, k, seed).map_err(|e| e.to_string())?;
    let judge = world.battle_judge("sim-judge");
    let battles: Vec<_> = judge_all(&judge, &schedule, &rated, seed, cfg.judge_retries)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter_map(|j| match j {
            Judgement::Decided(b) => Some(b),
            Judgement::Dropped { .. } => None,
        })
        .collect();
    let results = bootstrap_ratings(&battles, &ids, &cfg, seed).map_err(|e| e.to_string())?;
    let fitted: Vec<f64> = results.iter().map(|r| r.theta).collect();
    let items = results
        .into_iter()
        .zip(&truth)
        .map(|(r, t)| RatedItem {
            id: r.item_id,
            true_theta: *t,
            theta: r.theta,
            elo: r.elo_median,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            tier: r.tier.as_str(),
        })
        .collect();
    Ok(Rating { battles: battles.len(), spearman: spearman(&truth, &fitted), items })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = verifierGrid)]
pub fn verifier_grid(n: u32, t_min: u32, delta_hard: u32) -> Result<String, JsError> {
    to_js(grid(n, t_min, delta_hard))
}

#[wasm_bindgen(js_name = simulateSynthesis)]
pub fn simulate_synthesis(items: usize, p_lo: f64, p_hi: f64, v_lo: f64, v_hi: f64, min_pass: u32, seed: u32) -> Result<String, JsError> {
    to_js(synthesis(items, p_lo, p_hi, v_lo, v_hi, min_pass, u64::from(seed)))
}

#[wasm_bindgen(js_name = simulateRating)]
pub fn simulate_rating(items: usize, k: usize, rounds: usize, spread: f64, seed: u32) -> Result<String, JsError> {
    to_js(rating(items, k, rounds, spread, u64::from(seed)))
}
