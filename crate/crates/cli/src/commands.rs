use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rlvr_forge::dataset::{combine_augment, combine_replace, compute_stats, load_dataset, preprocess as run_preprocess, save_dataset, StepHeuristic};
use rlvr_forge::gateway::ModelBackend;
use rlvr_forge::plot::{histogram_svg, Series};
use rlvr_forge::rating::{
    bootstrap_ratings, judge_all, propagate_groups, schedule_battles, tier_summary, write_ratings_csv, BattleRecord, Judgement,
    RatingItem,
};
use rlvr_forge::rollout::{pass_count, RolloutCache, RolloutKey};
use rlvr_forge::selector::{pass_histogram, select_seeds, SelectionManifest};
use rlvr_forge::synth::{append_audit, load_audit, tally, CandidateRecord, Pipeline, PipelineEvent, SynthError};
use rlvr_forge::{Dataset, RolloutResult, Sample};
use serde_json::json;

use crate::backends::Profile;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{CombineArgs, Context, PreprocessArgs, RateArgs, RolloutArgs, SelectArgs, StatsArgs, Strategy, SynthArgs};

fn load_cache(path: &Path) -> CliResult<RolloutCache> {
    RolloutCache::load(path).map_err(|e| match e.kind() {
        io::ErrorKind::InvalidData => CliError::invalid(format!("{}: {e}", path.display())),
        _ => CliError::io(path, e),
    })
}

fn list_ids(ids: &[String]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

/// Drops a partially written last line left by an interrupted run.
fn repair_tail(path: &Path) -> CliResult<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(CliError::io(path, e)),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let file = OpenOptions::new().write(true).open(path).map_err(|e| CliError::io(path, e))?;
    file.set_len(keep as u64).map_err(|e| CliError::io(path, e))
}

/// Fills the cache for every sample of `dataset`, appending each new result
/// as soon as it is computed so an interrupted run keeps its progress.
/// Returns results in dataset order and the number newly computed.
fn ensure_rollouts(
    ctx: &Context,
    dataset: &Dataset,
    backend: &dyn ModelBackend,
    n: u32,
    cache_path: &Path,
) -> CliResult<(Vec<RolloutResult>, usize)> {
    repair_tail(cache_path)?;
    let mut cache = load_cache(cache_path)?;
    let policy = ctx.cfg.pipeline.match_policy;
    let mut out = Vec::with_capacity(dataset.len());
    let mut computed = 0;
    for s in dataset.samples() {
        let key = RolloutKey::new(&s.id, backend.backend_id(), n, ctx.cfg.seed);
        if let Some(r) = cache.get(&key) {
            out.push(r.clone());
            continue;
        }
        let r = pass_count(s, backend, n, ctx.cfg.seed, &policy)?;
        RolloutCache::append_to(cache_path, std::slice::from_ref(&r)).map_err(|e| CliError::io(cache_path, e))?;
        cache.insert(r.clone());
        out.push(r);
        computed += 1;
    }
    Ok((out, computed))
}

pub fn preprocess(ctx: &mut Context, a: &PreprocessArgs) -> CliResult<()> {
    if a.keep_mcq {
        ctx.cfg.preprocess.mcq_to_freeform = false;
    }
    if a.keep_yes_no {
        ctx.cfg.preprocess.drop_yes_no = false;
    }
    let input = load_dataset(&a.input)?;
    let (out, report) = run_preprocess(&input, ctx.cfg.preprocess)?;
    let path = ctx.out(&a.output, "preprocessed.jsonl");
    save_dataset(&out, &path)?;
    println!(
        "preprocess: {} in, {} multiple-choice converted, {} yes/no removed, {} out -> {}",
        report.input,
        report.converted_mcq,
        report.removed_yes_no,
        report.output,
        path.display()
    );
    RunManifest::new(ctx, "preprocess")
        .input("dataset", &a.input)
        .output("dataset", &path)
        .count("input", report.input)
        .count("converted_mcq", report.converted_mcq)
        .count("removed_yes_no", report.removed_yes_no)
        .count("output", report.output)
        .write(ctx)
}

pub fn rollout(ctx: &mut Context, a: &RolloutArgs) -> CliResult<()> {
    if let Some(n) = a.n {
        ctx.cfg.pipeline.n_rollouts = n;
        ctx.cfg.pipeline.select.n_rollouts = n;
    }
    let n = ctx.cfg.pipeline.n_rollouts;
    if n == 0 {
        return Err(CliError::invalid("n must be at least 1"));
    }
    ctx.cfg.validate()?;
    let dataset = load_dataset(&a.dataset)?;
    let samples: Vec<&Sample> = dataset.samples().iter().collect();
    let profile = Profile::new(&ctx.cfg, &samples)?;
    let target = profile.target()?;
    let cache_path = ctx.out(&a.cache, "rollouts.jsonl");
    let (results, computed) = ensure_rollouts(ctx, &dataset, target.as_ref(), n, &cache_path)?;
    let mean = results.iter().map(|r| f64::from(r.pass_count)).sum::<f64>() / results.len().max(1) as f64;
    println!(
        "rollout: {} samples, {computed} computed, {} cached, n={n}, mean pass count {mean:.3} -> {}",
        results.len(),
        results.len() - computed,
        cache_path.display()
    );
    RunManifest::new(ctx, "rollout")
        .input("dataset", &a.dataset)
        .output("cache", &cache_path)
        .count("samples", results.len())
        .count("computed", computed)
        .count("backend", target.backend_id())
        .write(ctx)
}

fn cached_results(ctx: &Context, dataset: &Dataset, backend_id: &str, cache_path: &Path) -> CliResult<Vec<RolloutResult>> {
    let cache = load_cache(cache_path)?;
    let n = ctx.cfg.pipeline.n_rollouts;
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for s in dataset.samples() {
        match cache.get(&RolloutKey::new(&s.id, backend_id, n, ctx.cfg.seed)) {
            Some(r) => out.push(r.clone()),
            None => missing.push(s.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::invalid(format!(
            "no cached rollouts (backend {backend_id}, n={n}, seed={}) for {} samples: {}",
            ctx.cfg.seed,
            missing.len(),
            list_ids(&missing)
        )));
    }
    Ok(out)
}

pub fn select(ctx: &mut Context, a: &SelectArgs) -> CliResult<()> {
    if let Some(m) = a.min_pass {
        ctx.cfg.pipeline.select.min_pass_for_selection = m;
    }
    ctx.cfg.validate()?;
    let dataset = load_dataset(&a.dataset)?;
    let samples: Vec<&Sample> = dataset.samples().iter().collect();
    let target_id = Profile::new(&ctx.cfg, &samples)?.target()?.backend_id().to_string();
    let cache_path = ctx.out(&a.cache, "rollouts.jsonl");
    let results = cached_results(ctx, &dataset, &target_id, &cache_path)?;
    let sel = &ctx.cfg.pipeline.select;
    let ids = select_seeds(&results, sel).map_err(|e| CliError::invalid(e.to_string()))?;
    let keep: Vec<Sample> = ids.iter().map(|id| dataset.get(id).expect("id from dataset").clone()).collect();
    let out = Dataset::new("selected", keep)?;
    let path = ctx.out(&a.output, "selected.jsonl");
    save_dataset(&out, &path)?;
    let manifest = SelectionManifest { config: *sel, considered: results.len(), selected: ids.clone() };
    let sel_path = ctx.out_dir.join("selection.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::invalid(e.to_string()))? + "\n";
    fs::write(&sel_path, text).map_err(|e| CliError::io(&sel_path, e))?;
    println!(
        "select: {} of {} samples with pass count >= {} -> {}",
        ids.len(),
        results.len(),
        sel.min_pass_for_selection,
        path.display()
    );
    RunManifest::new(ctx, "select")
        .input("dataset", &a.dataset)
        .input("cache", &cache_path)
        .output("dataset", &path)
        .output("selection", &sel_path)
        .count("considered", results.len())
        .count("selected", ids.len())
        .count("histogram", pass_histogram(&results, ctx.cfg.pipeline.n_rollouts))
        .write(ctx)
}

fn append_jsonl(path: &Path, records: &[CandidateRecord]) -> Result<(), SynthError> {
    append_audit(path, records).map_err(SynthError::Io)
}

pub fn synth(ctx: &mut Context, a: &SynthArgs) -> CliResult<()> {
    ctx.cfg.validate()?;
    let cfg = ctx.cfg.pipeline;
    let dataset = load_dataset(&a.dataset)?;
    let samples: Vec<&Sample> = dataset.samples().iter().collect();
    let profile = Profile::new(&ctx.cfg, &samples)?;
    let backends = profile.synth_backends(cfg.quality_gate_enabled())?;
    let pipeline = Pipeline::new(&cfg, &backends, ctx.cfg.seed)?;

    let cache_path = ctx.out(&a.cache, "rollouts.jsonl");
    let (results, computed) = ensure_rollouts(ctx, &dataset, backends.target.as_ref(), cfg.n_rollouts, &cache_path)?;
    let selected = select_seeds(&results, &cfg.select).map_err(|e| CliError::invalid(e.to_string()))?;
    let c_ori: HashMap<&str, u32> = results.iter().map(|r| (r.sample_id.as_str(), r.pass_count)).collect();
    let seeds: Vec<(&Sample, u32)> = selected.iter().map(|id| (dataset.get(id).expect("selected from dataset"), c_ori[id.as_str()])).collect();

    let audit_path = ctx.out(&a.audit, "audit.jsonl");
    let prior = if ctx.resume {
        repair_tail(&audit_path)?;
        load_audit(&audit_path).map_err(|e| CliError::invalid(format!("{}: {e}", audit_path.display())))?
    } else {
        fs::write(&audit_path, b"").map_err(|e| CliError::io(&audit_path, e))?;
        Vec::new()
    };
    let known: HashMap<&str, ()> = seeds.iter().map(|(s, _)| (s.id.as_str(), ())).collect();
    if let Some(stray) = prior.iter().find(|r| !known.contains_key(r.parent_id.as_str())) {
        return Err(CliError::invalid(format!(
            "{} has records for `{}`, which is not a selected seed of this run",
            audit_path.display(),
            stray.parent_id
        )));
    }

    let run = pipeline.run(&seeds, &prior, |event| {
        match event {
            PipelineEvent::Finished(o) => {
                append_jsonl(&audit_path, &o.records)?;
                if let Some(r) = &o.candidate_rollout {
                    RolloutCache::append_to(&cache_path, std::slice::from_ref(r))?;
                }
            }
            PipelineEvent::Failed(f) => append_jsonl(&audit_path, &f.records)?,
        }
        Ok(())
    })?;

    let out = Dataset::new("synth", run.synthesized.clone())?;
    let out_path = ctx.out(&a.output, "synth.jsonl");
    save_dataset(&out, &out_path)?;

    let mut all = prior.clone();
    all.extend(run.audit.iter().cloned());
    let tallies = tally(&all);
    println!(
        "synth: {} seeds, {} selected, {} synthesized, {} exhausted; {} attempts ({} new, {} resumed) -> {}",
        dataset.len(),
        selected.len(),
        out.len(),
        run.exhausted.len(),
        all.len(),
        run.audit.len(),
        prior.len(),
        out_path.display()
    );
    for (verdict, count) in &tallies {
        println!("  {:<22} {count}", verdict.as_str());
    }
    let tally_json: BTreeMap<&str, usize> = tallies.iter().map(|(v, c)| (v.as_str(), *c)).collect();
    RunManifest::new(ctx, "synth")
        .input("dataset", &a.dataset)
        .output("dataset", &out_path)
        .output("audit", &audit_path)
        .output("cache", &cache_path)
        .count("seed_rollouts_computed", computed)
        .count("selected", selected.len())
        .count("synthesized", out.len())
        .count("exhausted", run.exhausted.len())
        .count("attempts", all.len())
        .count("tallies", json!(tally_json))
        .count(
            "backends",
            json!({
                "target": backends.target.backend_id(),
                "verifier": backends.verifier().backend_id(),
                "synthesizer": backends.synthesizer.backend_id(),
                "judge": backends.judge.as_ref().map(|j| j.backend_id()),
            }),
        )
        .write(ctx)
}

pub fn rate(ctx: &mut Context, a: &RateArgs) -> CliResult<()> {
    if let Some(k) = a.k {
        ctx.cfg.rating.k_opponents = k;
    }
    if let Some(r) = a.rounds {
        ctx.cfg.rating.bootstrap_rounds = r;
    }
    ctx.cfg.validate()?;
    let rcfg = ctx.cfg.rating.clone();
    let dataset = load_dataset(&a.items)?;
    let samples: Vec<&Sample> = dataset.samples().iter().collect();

    // members of a rating group share the rating of its first member
    let mut representative: BTreeMap<String, String> = BTreeMap::new();
    let mut groups: BTreeMap<String, String> = BTreeMap::new();
    let mut rated: Vec<RatingItem> = Vec::new();
    for s in &samples {
        match s.meta.get("rating_group").and_then(|v| v.as_str()) {
            Some(g) => match representative.get(g) {
                Some(rep) => {
                    groups.insert(s.id.clone(), rep.clone());
                }
                None => {
                    representative.insert(g.to_string(), s.id.clone());
                    rated.push(RatingItem::from(*s));
                }
            },
            None => rated.push(RatingItem::from(*s)),
        }
    }
    let ids: Vec<String> = rated.iter().map(|i| i.id.clone()).collect();
    let profile = Profile::new(&ctx.cfg, &samples)?;
    let judge = profile.battle_judge()?;
    let schedule = schedule_battles(&ids, rcfg.k_opponents, ctx.cfg.seed)?;
    let judged = judge_all(judge.as_ref(), &schedule, &rated, ctx.cfg.seed, rcfg.judge_retries)?;
    let mut battles: Vec<BattleRecord> = Vec::with_capacity(judged.len());
    let mut dropped = 0;
    for j in judged {
        match j {
            Judgement::Decided(b) => battles.push(b),
            Judgement::Dropped { .. } => dropped += 1,
        }
    }
    let battle_path = ctx.out_dir.join("battles.jsonl");
    write_battles(&battle_path, &battles)?;

    let results = bootstrap_ratings(&battles, &ids, &rcfg, ctx.cfg.seed)?;
    let mut all = propagate_groups(&results, &groups);
    let order: HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    all.sort_by_key(|r| order[r.item_id.as_str()]);
    let out_path = ctx.out(&a.output, "ratings.csv");
    let file = fs::File::create(&out_path).map_err(|e| CliError::io(&out_path, e))?;
    write_ratings_csv(BufWriter::new(file), &all)?;

    let tiers = tier_summary(&all);
    println!(
        "rate: {} items ({} rated directly), {} battles judged, {} dropped -> {}",
        all.len(),
        ids.len(),
        battles.len(),
        dropped,
        out_path.display()
    );
    for (tier, count) in &tiers {
        println!("  {:<7} {count}", tier.as_str());
    }
    let tier_json: BTreeMap<&str, usize> = tiers.iter().map(|(t, c)| (t.as_str(), *c)).collect();
    RunManifest::new(ctx, "rate")
        .input("items", &a.items)
        .output("ratings", &out_path)
        .output("battles", &battle_path)
        .count("items", all.len())
        .count("battles", battles.len())
        .count("dropped", dropped)
        .count("judge", judge.backend_id())
        .count("tiers", json!(tier_json))
        .write(ctx)
}

fn write_battles(path: &Path, battles: &[BattleRecord]) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for b in battles {
        serde_json::to_writer(&mut w, b).map_err(|e| CliError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn combine(ctx: &mut Context, a: &CombineArgs) -> CliResult<()> {
    let seed = load_dataset(&a.seed_set)?;
    let synth = load_dataset(&a.synth_set)?;
    let (out, name) = match a.strategy {
        Strategy::Augment => (combine_augment(&seed, &synth)?, "augment"),
        Strategy::Replace => (combine_replace(&seed, &synth)?, "replace"),
    };
    let path = ctx.out(&a.output, "combined.jsonl");
    save_dataset(&out, &path)?;
    println!("combine ({name}): {} seed + {} synthesized -> {} samples in {}", seed.len(), synth.len(), out.len(), path.display());
    RunManifest::new(ctx, "combine")
        .input("seed", &a.seed_set)
        .input("synth", &a.synth_set)
        .output("dataset", &path)
        .count("strategy", name)
        .count("output", out.len())
        .write(ctx)
}

pub fn stats(ctx: &mut Context, a: &StatsArgs) -> CliResult<()> {
    if a.datasets.len() > 2 {
        return Err(CliError::invalid("stats takes one or two datasets"));
    }
    let cache_path = ctx.out(&a.cache, "rollouts.jsonl");
    let cache = load_cache(&cache_path)?;
    let mut series = Vec::new();
    let mut manifest = RunManifest::new(ctx, "stats").input("cache", &cache_path);
    let mut written = Vec::new();
    for (i, path) in a.datasets.iter().enumerate() {
        let dataset = load_dataset(path)?;
        let rollouts: HashMap<String, RolloutResult> =
            dataset.ids().filter_map(|id| cache.latest_for(id).map(|r| (id.to_string(), r.clone()))).collect();
        let report = compute_stats(&dataset, &rollouts, StepHeuristic::default())?;
        let label = if a.datasets.len() == 2 && a.datasets[0].file_stem() == a.datasets[1].file_stem() {
            format!("{}-{}", dataset.name, i + 1)
        } else {
            dataset.name.clone()
        };
        let csv_path = ctx.out_dir.join(format!("stats-{label}.csv"));
        let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
        report.write_csv(BufWriter::new(file))?;
        println!(
            "stats {label}: {} samples, n={}, mean pass count {:.3}, mean reasoning steps {:.2} -> {}",
            report.sample_count,
            report.n_rollouts,
            report.mean_pass,
            report.mean_reasoning_steps,
            csv_path.display()
        );
        written.push((label.clone(), report.mean_pass, report.mean_reasoning_steps, report.sample_count, csv_path));
        series.push(Series { label, counts: report.histogram });
    }
    let svg_path = ctx.out_dir.join("stats.svg");
    let title = if series.len() == 2 { "Pass-count distribution (paired)" } else { "Pass-count distribution" };
    fs::write(&svg_path, histogram_svg(title, &series)).map_err(|e| CliError::io(&svg_path, e))?;
    println!("stats: histogram -> {}", svg_path.display());
    let mut per_dataset = Vec::new();
    for ((label, mean, steps, count, csv_path), input) in written.iter().zip(&a.datasets) {
        per_dataset.push(json!({
            "label": label,
            "input": input.display().to_string(),
            "csv": csv_path.display().to_string(),
            "samples": count,
            "mean_pass": mean,
            "mean_reasoning_steps": steps,
        }));
    }
    manifest = manifest.output("svg", &svg_path).count("datasets", per_dataset);
    manifest.write(ctx)
}
