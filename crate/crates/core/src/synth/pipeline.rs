use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use super::{
    assess_quality, synthesize_candidate, synthesized_id, synthesized_sample, verify_candidate, Backends, CandidateRecord,
    PipelineConfig, SynthError, Verdict,
};
use crate::dataset::{Dataset, DatasetError, Sample};
use crate::gateway::CallKey;
use crate::rollout::{pass_count, pass_count_for, RolloutResult, Subject};
use crate::selector::select_seeds;

/// What happened to one selected seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub parent_id: String,
    /// Records produced by this run (earlier attempts restored on resume are
    /// not repeated here).
    pub records: Vec<CandidateRecord>,
    pub accepted: Option<Sample>,
    /// Verifier rollouts of the accepted candidate, keyed by the new id.
    /// `None` when the acceptance was restored from a prior audit.
    pub candidate_rollout: Option<RolloutResult>,
}

impl SynthesisOutcome {
    pub fn exhausted(&self) -> bool {
        self.accepted.is_none()
    }
}

/// A seed whose synthesis stopped on a backend error. `records` holds the
/// attempts finished before the failure.
#[derive(Debug, Error)]
#[error("synthesis of `{parent_id}` failed: {source}")]
pub struct SampleFailure {
    pub parent_id: String,
    pub records: Vec<CandidateRecord>,
    #[source]
    pub source: SynthError,
}

/// Everything produced by a pipeline run, also returned (partially) on error.
#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    pub seed_rollouts: Vec<RolloutResult>,
    pub selected: Vec<String>,
    pub synthesized: Vec<Sample>,
    pub audit: Vec<CandidateRecord>,
    pub candidate_rollouts: Vec<RolloutResult>,
    /// Selected ids for which every attempt was rejected.
    pub exhausted: Vec<String>,
}

impl PipelineRun {
    /// Count of attempt records per verdict.
    pub fn tallies(&self) -> BTreeMap<Verdict, usize> {
        tally(&self.audit)
    }

    pub fn synthesized_dataset(&self, name: &str) -> Result<Dataset, DatasetError> {
        Dataset::new(name, self.synthesized.clone())
    }

    fn absorb(&mut self, outcome: SynthesisOutcome) {
        if outcome.accepted.is_none() {
            self.exhausted.push(outcome.parent_id.clone());
        }
        self.audit.extend(outcome.records);
        self.synthesized.extend(outcome.accepted);
        self.candidate_rollouts.extend(outcome.candidate_rollout);
    }
}

pub fn tally(records: &[CandidateRecord]) -> BTreeMap<Verdict, usize> {
    let mut out: BTreeMap<Verdict, usize> = Verdict::ATTEMPT_VERDICTS.iter().map(|v| (*v, 0)).collect();
    for r in records {
        *out.entry(r.verdict).or_default() += 1;
    }
    out
}

#[derive(Debug, Error)]
#[error("{}{source}", .sample_id.as_ref().map(|id| format!("sample `{id}`: ")).unwrap_or_default())]
pub struct PipelineError {
    pub sample_id: Option<String>,
    pub partial: Box<PipelineRun>,
    #[source]
    pub source: SynthError,
}

impl PipelineError {
    pub fn is_transport(&self) -> bool {
        self.source.is_transport()
    }
}

/// Events handed to a [`Pipeline`] sink, in (sample, attempt) order.
#[derive(Debug, Clone, Copy)]
pub enum PipelineEvent<'a> {
    Finished(&'a SynthesisOutcome),
    Failed(&'a SampleFailure),
}

/// Runs synthesis over many seeds. Seeds are processed concurrently in
/// chunks; results are delivered to the sink in input order so that audit
/// logs are stable across runs.
pub struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    backends: &'a Backends,
    seed: u64,
    chunk: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig, backends: &'a Backends, seed: u64) -> Result<Self, SynthError> {
        cfg.validate()?;
        backends.validate(cfg)?;
        Ok(Self { cfg, backends, seed, chunk: 64 })
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    /// Runs the attempt loop for one seed, continuing after `prior` attempts
    /// (its earlier audit records).
    pub fn synthesize(&self, sample: &Sample, c_ori: u32, prior: &[CandidateRecord]) -> Result<SynthesisOutcome, SampleFailure> {
        let parent_id = sample.id.clone();
        if let Some(done) = prior.iter().find(|r| r.verdict == Verdict::Accepted) {
            return Ok(SynthesisOutcome {
                parent_id,
                records: Vec::new(),
                accepted: Some(synthesized_sample(sample, done)),
                candidate_rollout: None,
            });
        }
        let mut records = Vec::new();
        for attempt in prior.len() as u32..self.cfg.n_attempts {
            match self.attempt(sample, c_ori, attempt) {
                Ok((record, rollout)) => {
                    let accepted = record.verdict == Verdict::Accepted;
                    records.push(record);
                    if accepted {
                        let child = synthesized_sample(sample, records.last().expect("just pushed"));
                        let rollout = rollout.map(|mut r| {
                            r.sample_id = child.id.clone();
                            r
                        });
                        return Ok(SynthesisOutcome { parent_id, records, accepted: Some(child), candidate_rollout: rollout });
                    }
                }
                Err(source) => return Err(SampleFailure { parent_id, records, source }),
            }
        }
        Ok(SynthesisOutcome { parent_id, records, accepted: None, candidate_rollout: None })
    }

    fn attempt(&self, sample: &Sample, c_ori: u32, attempt: u32) -> Result<(CandidateRecord, Option<RolloutResult>), SynthError> {
        let cfg = self.cfg;
        let reply = synthesize_candidate(self.backends.synthesizer.as_ref(), sample, &CallKey::new(self.seed, sample.id.clone(), attempt.into()))?;
        let mut record = CandidateRecord {
            parent_id: sample.id.clone(),
            attempt_index: attempt,
            candidate_question: reply.question.clone().unwrap_or_default(),
            quality_score: None,
            c_ori,
            c_cand: None,
            verdict: Verdict::ParseError,
            raw_synth_output: reply.raw,
        };
        let Some(candidate) = reply.question else {
            return Ok((record, None));
        };

        if cfg.quality_gate_enabled() {
            let judge = self.backends.judge.as_deref().ok_or_else(|| SynthError::Config("quality gate enabled but no judge backend".into()))?;
            let item = format!("{}#quality{attempt}", sample.id);
            let mut score = None;
            for retry in 0..=cfg.quality_retries {
                match assess_quality(judge, sample, &candidate, &CallKey::new(self.seed, item.clone(), retry.into())) {
                    Ok(s) => {
                        score = Some(s);
                        break;
                    }
                    Err(SynthError::UnparseableScore { .. }) => continue,
                    // out-of-range scores are not retried: they signal judge drift
                    Err(SynthError::ScoreOutOfRange { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
            record.quality_score = score;
            if score.is_none_or(|s| s < cfg.t_quality) {
                record.verdict = Verdict::RejectedQuality;
                return Ok((record, None));
            }
        }

        let subject = Subject {
            id: &format!("{}#cand{attempt}", sample.id),
            image_ref: &sample.image_ref,
            question: &candidate,
            answer: &sample.answer,
        };
        let rollout = pass_count_for(subject, self.backends.verifier(), cfg.n_rollouts, self.seed, &cfg.match_policy)?;
        record.c_cand = Some(rollout.pass_count);
        record.verdict = verify_candidate(c_ori, rollout.pass_count, cfg);
        Ok((record, Some(rollout)))
    }

    /// Synthesizes every `(sample, c_ori)` pair. `prior` is an earlier audit
    /// log; seeds it already settled are not re-queried. The sink sees each
    /// outcome once, in input order; on a backend failure it also sees the
    /// failed seed's partial attempts before the error is returned.
    pub fn run(
        &self,
        seeds: &[(&Sample, u32)],
        prior: &[CandidateRecord],
        mut sink: impl FnMut(PipelineEvent<'_>) -> Result<(), SynthError>,
    ) -> Result<PipelineRun, PipelineError> {
        let mut by_parent: HashMap<&str, Vec<CandidateRecord>> = HashMap::new();
        for r in prior {
            by_parent.entry(r.parent_id.as_str()).or_default().push(r.clone());
        }
        for records in by_parent.values_mut() {
            records.sort_by_key(|r| r.attempt_index);
        }
        let empty = Vec::new();
        let mut run = PipelineRun::default();
        for chunk in seeds.chunks(self.chunk) {
            let results: Vec<_> = chunk
                .par_iter()
                .map(|(s, c_ori)| self.synthesize(s, *c_ori, by_parent.get(s.id.as_str()).unwrap_or(&empty)))
                .collect();
            let mut failure: Option<SampleFailure> = None;
            for result in results {
                let step = match &result {
                    Ok(outcome) => sink(PipelineEvent::Finished(outcome)),
                    Err(f) => sink(PipelineEvent::Failed(f)),
                };
                if let Err(source) = step {
                    return Err(PipelineError { sample_id: None, partial: Box::new(run), source });
                }
                match result {
                    Ok(outcome) => run.absorb(outcome),
                    Err(f) => {
                        run.audit.extend(f.records.iter().cloned());
                        failure.get_or_insert(f);
                    }
                }
            }
            if let Some(f) = failure {
                return Err(PipelineError { sample_id: Some(f.parent_id), partial: Box::new(run), source: f.source });
            }
        }
        Ok(run)
    }
}

/// Single-seed convenience wrapper around [`Pipeline::synthesize`].
pub fn synthesize_verified(
    sample: &Sample,
    c_ori: u32,
    cfg: &PipelineConfig,
    backends: &Backends,
    seed: u64,
) -> Result<SynthesisOutcome, SampleFailure> {
    let pipeline = Pipeline::new(cfg, backends, seed)
        .map_err(|source| SampleFailure { parent_id: sample.id.clone(), records: Vec::new(), source })?;
    pipeline.synthesize(sample, c_ori, &[])
}

/// Rolls out every seed under the target backend, selects, then synthesizes
/// and verifies each selected seed.
pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig, backends: &Backends, seed: u64) -> Result<PipelineRun, PipelineError> {
    let fail = |sample_id: Option<String>, partial: PipelineRun, source: SynthError| PipelineError {
        sample_id,
        partial: Box::new(partial),
        source,
    };
    let pipeline = Pipeline::new(cfg, backends, seed).map_err(|e| fail(None, PipelineRun::default(), e))?;
    let mut run = PipelineRun::default();
    for s in dataset.samples() {
        match pass_count(s, backends.target.as_ref(), cfg.n_rollouts, seed, &cfg.match_policy) {
            Ok(r) => run.seed_rollouts.push(r),
            Err(e) => return Err(fail(Some(s.id.clone()), run, e.into())),
        }
    }
    run.selected = select_seeds(&run.seed_rollouts, &cfg.select).map_err(|e| fail(None, run.clone(), SynthError::Config(e.to_string())))?;
    let c_ori: HashMap<&str, u32> = run.seed_rollouts.iter().map(|r| (r.sample_id.as_str(), r.pass_count)).collect();
    let seeds: Vec<(&Sample, u32)> = run
        .selected
        .iter()
        .map(|id| (dataset.get(id).expect("selected ids come from the dataset"), c_ori[id.as_str()]))
        .collect();
    match pipeline.run(&seeds, &[], |_| Ok(())) {
        Ok(synth) => {
            run.synthesized = synth.synthesized;
            run.audit = synth.audit;
            run.candidate_rollouts = synth.candidate_rollouts;
            run.exhausted = synth.exhausted;
            Ok(run)
        }
        Err(mut e) => {
            let synth = std::mem::take(&mut *e.partial);
            run.synthesized = synth.synthesized;
            run.audit = synth.audit;
            run.candidate_rollouts = synth.candidate_rollouts;
            run.exhausted = synth.exhausted;
            *e.partial = run;
            Err(e)
        }
    }
}

/// Id of the sample an accepted record produced.
pub fn child_id(record: &CandidateRecord) -> String {
    synthesized_id(&record.parent_id)
}
