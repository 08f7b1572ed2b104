use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{GeneratorMode, RunConfig};
use super::report::{
    histogram, report, CandidateRecord, IterationRecord, BINS, CANDIDATES_LOG, ITERATIONS_LOG, PREFERENCES_LOG,
    REPORT_JSON,
};
use super::DriverError;
use crate::benchmark::{make_instance, BenchmarkInstance};
use crate::dsl::{CanonicalHash, EvalBudget, GeneratorKind, MergeProgram, Provenance};
use crate::generator::{remote_generate, temperature, GeneratorPolicy, PromptTemplate};
use crate::merge::{apply_merged, grid_search_task_arithmetic, task_arithmetic, TaskVector};
use crate::pipeline::{
    build_preferences, filter_candidates, refine_policy, score_program, top_k, write_preferences_jsonl,
    CandidateOutcome, CandidateText, Category, ScoredAlgorithm, ScoringContext, ScoringFailure,
};
use crate::rng::{substream, tag};

pub const INSTANCE_FILE: &str = "instance.json";
pub const POLICY_FILE: &str = "policy.json";

/// Mixing ratios tried by the Task Arithmetic baseline.
pub const TASK_ARITHMETIC_GRID: [f64; 3] = [0.2, 0.4, 0.6];

/// Mutable state of the iteration loop.
#[derive(Debug, Clone)]
pub struct RunState {
    pub s_best: Option<f64>,
    pub best: Option<ScoredAlgorithm>,
    /// Every Success across the run, in iteration then batch order.
    pub scored: Vec<ScoredAlgorithm>,
    /// Chosen set of each finished iteration (with its carryover additions).
    pub chosen_sets: Vec<Vec<ScoredAlgorithm>>,
    pub policy: GeneratorPolicy,
}

impl RunState {
    pub fn new(policy: GeneratorPolicy) -> Self {
        Self {
            s_best: None,
            best: None,
            scored: Vec::new(),
            chosen_sets: Vec::new(),
            policy,
        }
    }

    /// Union of the chosen sets so far, first occurrence of each hash kept.
    pub fn carryover_pool(&self) -> Vec<ScoredAlgorithm> {
        let mut seen = HashSet::new();
        self.chosen_sets
            .iter()
            .flatten()
            .filter(|a| seen.insert(a.hash()))
            .cloned()
            .collect()
    }

    fn observe(&mut self, scored: &[ScoredAlgorithm]) {
        for a in scored {
            if self.s_best.is_none_or(|s| a.score() > s) {
                self.s_best = Some(a.score());
                self.best = Some(a.clone());
            }
        }
        self.scored.extend_from_slice(scored);
    }
}

/// Top `n` distinct dev performers: score descending, then earlier
/// iteration, then source text.
pub fn select_best(scored: &[ScoredAlgorithm], n: usize) -> Vec<ScoredAlgorithm> {
    if scored.is_empty() {
        log::warn!("no successful programs to select from");
    }
    top_k(scored, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u32,
    pub temperature: f64,
    pub counts: std::collections::BTreeMap<Category, usize>,
    pub histogram: [usize; BINS],
    pub success_best: Option<f64>,
    pub success_mean: Option<f64>,
    pub s_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestedProgram {
    pub source: String,
    pub hash: CanonicalHash,
    pub iteration: u32,
    pub dev_score: f64,
    pub test_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevTest {
    pub dev: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskArithmeticBaseline {
    pub grid: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub evaluations: usize,
    pub dev: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub seed_model: DevTest,
    pub single_candidates: Vec<DevTest>,
    pub task_arithmetic: TaskArithmeticBaseline,
}

impl Baselines {
    pub fn best_single_dev(&self) -> f64 {
        self.single_candidates.iter().map(|c| c.dev).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub iterations: Vec<IterationSummary>,
    pub s_best: Option<f64>,
    pub best: Option<TestedProgram>,
    pub top_n: Vec<TestedProgram>,
    pub baselines: Baselines,
    pub final_policy_version: u32,
}

struct Logs {
    dir: PathBuf,
    candidates: BufWriter<File>,
    iterations: BufWriter<File>,
    preferences: BufWriter<File>,
}

impl Logs {
    fn create(dir: &Path) -> Result<Self, DriverError> {
        let open = |name: &str| {
            let path = dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| DriverError::io(&path, e))
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            candidates: open(CANDIDATES_LOG)?,
            iterations: open(ITERATIONS_LOG)?,
            preferences: open(PREFERENCES_LOG)?,
        })
    }

    fn line<T: Serialize>(w: &mut BufWriter<File>, dir: &Path, name: &str, value: &T) -> Result<(), DriverError> {
        serde_json::to_writer(&mut *w, value)
            .map_err(std::io::Error::from)
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| DriverError::io(&dir.join(name), e))
    }

    fn flush(&mut self) -> Result<(), DriverError> {
        for (w, name) in [
            (&mut self.candidates, CANDIDATES_LOG),
            (&mut self.iterations, ITERATIONS_LOG),
            (&mut self.preferences, PREFERENCES_LOG),
        ] {
            w.flush().map_err(|e| DriverError::io(&self.dir.join(name), e))?;
        }
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DriverError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DriverError::io(path, e.into()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| DriverError::io(path, e))
}

fn generate(
    cfg: &RunConfig,
    policy: &GeneratorPolicy,
    prompt: &PromptTemplate,
    iteration: u32,
    t: crate::generator::Temperature,
) -> Result<Vec<CandidateText>, DriverError> {
    let n = cfg.candidates_per_iteration;
    match cfg.generator {
        GeneratorMode::Grammar => Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(cfg.seed, tag::CANDIDATE, u64::from(iteration), i as u64);
                CandidateText::Source(policy.sample_program(t, &mut rng))
            })
            .collect()),
        GeneratorMode::Remote => {
            let remote = cfg.remote.as_ref().ok_or_else(|| DriverError::Config("missing remote section".into()))?;
            let batch = remote_generate(remote, prompt, t, n)?;
            let retries: u32 = batch.retries.iter().sum();
            if retries > 0 {
                log::info!("iteration {iteration}: {retries} remote retries");
            }
            Ok(batch.completions.into_iter().map(CandidateText::Raw).collect())
        }
    }
}

fn score_on(instance: &BenchmarkInstance, tau: &TaskVector, test: bool) -> Result<f64, DriverError> {
    let model = apply_merged(instance.seed_model(), tau)?;
    let s = if test {
        instance.test_score(&model)?
    } else {
        instance.dev_score(&model)?
    };
    Ok(s.value())
}

/// Scores the reference points every run is compared against: the seed, each
/// candidate alone, and the Task Arithmetic grid (tuned on dev, tested once).
pub fn baselines(instance: &BenchmarkInstance) -> Result<Baselines, DriverError> {
    let seed = instance.seed_model();
    let seed_model = DevTest {
        dev: instance.dev_score(seed)?.value(),
        test: instance.test_score(seed)?.value(),
    };
    let single_candidates = instance
        .candidates()
        .iter()
        .map(|c| {
            Ok(DevTest {
                dev: instance.dev_score(c)?.value(),
                test: instance.test_score(c)?.value(),
            })
        })
        .collect::<Result<Vec<_>, DriverError>>()?;
    Ok(Baselines {
        seed_model,
        single_candidates,
        task_arithmetic: task_arithmetic_baseline(instance, &TASK_ARITHMETIC_GRID)?,
    })
}

/// Tunes Task Arithmetic mixing ratios over `grid` on dev probes, then scores
/// the winner once on test probes.
pub fn task_arithmetic_baseline(instance: &BenchmarkInstance, grid: &[f64]) -> Result<TaskArithmeticBaseline, DriverError> {
    let taus = instance.task_vectors();
    let best = grid_search_task_arithmetic::<DriverError, _>(&taus, grid, |tau| score_on(instance, tau, false))?;
    let tau = task_arithmetic(&taus, &best.lambdas)?;
    Ok(TaskArithmeticBaseline {
        grid: grid.to_vec(),
        dev: best.score,
        test: score_on(instance, &tau, true)?,
        lambdas: best.lambdas,
        evaluations: best.evaluations,
    })
}

/// Runs the full generate / filter / prefer / refine loop and writes the
/// logs, the final policy, `report.json` and the report CSVs into the
/// configured output directory.
pub fn run(cfg: &RunConfig) -> Result<RunReport, DriverError> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| DriverError::io(dir, e))?;

    let instance = make_instance(cfg.seed, &cfg.benchmark)?;
    fs::write(dir.join(INSTANCE_FILE), instance.to_json()).map_err(|e| DriverError::io(&dir.join(INSTANCE_FILE), e))?;
    let taus = instance.task_vectors();
    let ctx = ScoringContext::dev(&instance, &taus).with_layers(cfg.layer_sizes.as_deref());
    let budget = cfg.budget();
    let prompt = match &cfg.prompt_template {
        Some(path) => PromptTemplate::load(path).map_err(|e| DriverError::io(path, e))?,
        None => PromptTemplate::default(),
    };
    let generator_kind = match cfg.generator {
        GeneratorMode::Grammar => GeneratorKind::Grammar,
        GeneratorMode::Remote => GeneratorKind::Remote,
    };

    let mut logs = Logs::create(dir)?;
    let mut state = RunState::new(cfg.initial_policy()?);
    let mut summaries = Vec::new();
    let mut seen_all: HashSet<CanonicalHash> = HashSet::new();

    for t in 1..=cfg.iterations {
        let temp = temperature(t, cfg.t1, cfg.beta).map_err(DriverError::Config)?;
        let texts = match generate(cfg, &state.policy, &prompt, t, temp) {
            Ok(texts) => texts,
            Err(e) => {
                logs.flush()?;
                return Err(e);
            }
        };

        let mut seen_iter = HashSet::new();
        let seen = if cfg.dedupe_across_iterations {
            &mut seen_all
        } else {
            &mut seen_iter
        };
        let provenance = Provenance {
            iteration: t,
            generator: generator_kind,
        };
        let candidates = filter_candidates(&texts, provenance, seen, budget, &ctx);

        let mut sources_seen = HashSet::new();
        let mut exact_text_duplicates = 0;
        let mut scored = Vec::new();
        let mut counts = std::collections::BTreeMap::new();
        for c in &candidates {
            if let Some(src) = &c.source {
                if !sources_seen.insert(src.as_str()) {
                    exact_text_duplicates += 1;
                }
            }
            *counts.entry(c.outcome.category()).or_insert(0) += 1;
            let (score, reason) = match &c.outcome {
                CandidateOutcome::Success { program, dev_score } => {
                    scored.push(ScoredAlgorithm {
                        program: program.clone(),
                        dev_score: *dev_score,
                        iteration: t,
                    });
                    (Some(dev_score.value()), None)
                }
                CandidateOutcome::NonExecutable(reason) => (None, Some(reason.clone())),
                _ => (None, None),
            };
            let record = CandidateRecord {
                iteration: t,
                index: c.index,
                category: c.outcome.category(),
                score,
                hash: c.hash,
                source: c.source.clone(),
                reason,
            };
            Logs::line(&mut logs.candidates, dir, CANDIDATES_LOG, &record)?;
        }

        state.observe(&scored);
        let pool = state.carryover_pool();
        let mut rng = substream(cfg.seed, tag::PREFERENCES, u64::from(t), 0);
        let prefs = build_preferences(&scored, &pool, &cfg.refine, &mut rng);
        write_preferences_jsonl(&mut logs.preferences, &prefs.pairs, t)
            .map_err(|e| DriverError::io(&dir.join(PREFERENCES_LOG), e))?;
        let policy_version = state.policy.version;
        let (policy, stats) = refine_policy(&state.policy, &prefs.pairs, cfg.refine.eta);
        if stats.skipped > 0 {
            log::info!("iteration {t}: {} preference pairs not derivable", stats.skipped);
        }
        state.policy = policy;

        let scores: Vec<f64> = scored.iter().map(ScoredAlgorithm::score).collect();
        let success_best = scores.iter().copied().reduce(f64::max);
        let success_mean = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
        let record = IterationRecord {
            iteration: t,
            temperature: temp.value(),
            policy_version,
            candidates: candidates.len(),
            counts: counts.clone(),
            exact_text_duplicates,
            iteration_best: success_best,
            success_mean,
            s_best: state.s_best,
            best_source: state.best.as_ref().map(|b| b.source().to_string()),
            thresholds: prefs.thresholds,
            carryover_pool: pool.iter().map(ScoredAlgorithm::hash).collect(),
            chosen: prefs.chosen.iter().map(ScoredAlgorithm::hash).collect(),
            rejected: prefs.rejected.len(),
            s: cfg.refine.s,
            pairs: prefs.pairs.len(),
            dropped_pairs: prefs.dropped,
            refine_applied: stats.applied,
            refine_skipped: stats.skipped,
        };
        Logs::line(&mut logs.iterations, dir, ITERATIONS_LOG, &record)?;
        logs.flush()?;
        log::info!(
            "iteration {t}: T={:.4} success={} best={:?} s_best={:?}",
            temp.value(),
            scores.len(),
            success_best,
            state.s_best
        );

        state.chosen_sets.push(prefs.chosen);
        summaries.push(IterationSummary {
            iteration: t,
            temperature: temp.value(),
            counts,
            histogram: histogram(scores.iter().copied()),
            success_best,
            success_mean,
            s_best: state.s_best,
        });
    }

    write_json(&dir.join(POLICY_FILE), &state.policy)?;

    let test_ctx = ScoringContext::test(&instance, &taus).with_layers(cfg.layer_sizes.as_deref());
    let top_n = select_best(&state.scored, cfg.top_n_for_test)
        .iter()
        .map(|a| test_program(a, &test_ctx, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let report_value = RunReport {
        seed: cfg.seed,
        iterations: summaries,
        s_best: state.s_best,
        best: top_n.first().cloned(),
        top_n,
        baselines: baselines(&instance)?,
        final_policy_version: state.policy.version,
    };
    write_json(&dir.join(REPORT_JSON), &report_value)?;
    report(dir)?;
    Ok(report_value)
}

fn test_program(a: &ScoredAlgorithm, ctx: &ScoringContext<'_>, budget: EvalBudget) -> Result<TestedProgram, DriverError> {
    let (_, test) = score_program(&a.program, ctx, budget).map_err(|e| match e {
        ScoringFailure::Timeout => DriverError::Baseline(format!("`{}` timed out on test", a.source())),
        ScoringFailure::Runtime(m) => DriverError::Baseline(m),
    })?;
    Ok(TestedProgram {
        source: a.source().to_string(),
        hash: a.hash(),
        iteration: a.iteration,
        dev_score: a.score(),
        test_score: test.value(),
    })
}

/// Scores one program on an instance's dev and test probes.
pub fn eval_program(program: &MergeProgram, instance: &BenchmarkInstance) -> Result<DevTest, DriverError> {
    let (k, d) = instance.dims();
    let budget = EvalBudget::default_for(k, d);
    let taus = instance.task_vectors();
    let score = |ctx: ScoringContext<'_>| {
        score_program(program, &ctx, budget)
            .map(|(_, s)| s.value())
            .map_err(|e| DriverError::Program(format!("{e:?}")))
    };
    Ok(DevTest {
        dev: score(ScoringContext::dev(instance, &taus))?,
        test: score(ScoringContext::test(instance, &taus))?,
    })
}
