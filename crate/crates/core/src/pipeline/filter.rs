use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{score, BenchmarkInstance, ProbeSet, Score};
use crate::dsl::{CanonicalHash, EvalBudget, EvalError, GeneratorKind, MergeProgram, Provenance};
use crate::generator::extract_completion;
use crate::merge::{apply_merged, merge_layerwise, MergeError, ModelWeights, TaskVector};

/// Text of one generated candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateText {
    /// Raw completion that still needs code-block extraction.
    Raw(String),
    /// Program source.
    Source(String),
}

/// Filter category of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Duplicate,
    NoFunctionExtracted,
    Success,
    NonExecutable,
    Timeout,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Duplicate,
        Category::NoFunctionExtracted,
        Category::Success,
        Category::NonExecutable,
        Category::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Duplicate => "duplicate",
            Category::NoFunctionExtracted => "no_function_extracted",
            Category::Success => "success",
            Category::NonExecutable => "non_executable",
            Category::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    Duplicate,
    NoFunctionExtracted,
    NonExecutable(String),
    Timeout,
    Success { program: MergeProgram, dev_score: Score },
}

impl CandidateOutcome {
    pub fn category(&self) -> Category {
        match self {
            CandidateOutcome::Duplicate => Category::Duplicate,
            CandidateOutcome::NoFunctionExtracted => Category::NoFunctionExtracted,
            CandidateOutcome::NonExecutable(_) => Category::NonExecutable,
            CandidateOutcome::Timeout => Category::Timeout,
            CandidateOutcome::Success { .. } => Category::Success,
        }
    }
}

/// A filtered candidate with whatever could be recovered from its text.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub index: usize,
    /// Program source after extraction, if extraction succeeded.
    pub source: Option<String>,
    /// Canonical hash, if the program parsed and typechecked.
    pub hash: Option<CanonicalHash>,
    pub outcome: CandidateOutcome,
}

/// A successfully evaluated program with its dev score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAlgorithm {
    pub program: MergeProgram,
    pub dev_score: Score,
    pub iteration: u32,
}

impl ScoredAlgorithm {
    pub fn score(&self) -> f64 {
        self.dev_score.value()
    }

    pub fn hash(&self) -> CanonicalHash {
        self.program.hash()
    }

    pub fn source(&self) -> &str {
        self.program.source()
    }
}

/// What a program is scored against: the task vectors, the seed, a probe set
/// and the seed's MSE on it.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub models: &'a [TaskVector],
    pub seed: &'a ModelWeights,
    pub probes: &'a ProbeSet,
    pub baseline_mse: f64,
    /// When set, programs run independently on each layer slice.
    pub layer_sizes: Option<&'a [usize]>,
}

impl<'a> ScoringContext<'a> {
    pub fn dev(instance: &'a BenchmarkInstance, models: &'a [TaskVector]) -> Self {
        Self {
            models,
            seed: instance.seed_model(),
            probes: instance.dev_probes(),
            baseline_mse: instance.dev_baseline_mse(),
            layer_sizes: None,
        }
    }

    pub fn test(instance: &'a BenchmarkInstance, models: &'a [TaskVector]) -> Self {
        Self {
            models,
            seed: instance.seed_model(),
            probes: instance.test_probes(),
            baseline_mse: instance.test_baseline_mse(),
            layer_sizes: None,
        }
    }

    pub fn with_layers(mut self, layer_sizes: Option<&'a [usize]>) -> Self {
        self.layer_sizes = layer_sizes;
        self
    }
}

/// Why a program could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoringFailure {
    Timeout,
    Runtime(String),
}

impl From<EvalError> for ScoringFailure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Timeout => ScoringFailure::Timeout,
            other => ScoringFailure::Runtime(other.to_string()),
        }
    }
}

/// Runs `program` on the context's task vectors, adds the result to the
/// seed, and scores the merged model.
pub fn score_program(
    program: &MergeProgram,
    ctx: &ScoringContext<'_>,
    budget: EvalBudget,
) -> Result<(TaskVector, Score), ScoringFailure> {
    let tau = match ctx.layer_sizes {
        None => program.evaluate(ctx.models, budget)?,
        Some(sizes) => {
            let mut failure = None;
            let merged = merge_layerwise(ctx.models, sizes, |layer| {
                program.evaluate(layer, budget).map_err(|e| {
                    failure = Some(e);
                    MergeError::Argument("layer evaluation failed".into())
                })
            });
            match (merged, failure) {
                (Ok(t), _) => t,
                (Err(_), Some(e)) => return Err(e.into()),
                (Err(e), None) => return Err(ScoringFailure::Runtime(e.to_string())),
            }
        }
    };
    let model = apply_merged(ctx.seed, &tau).map_err(|e| ScoringFailure::Runtime(e.to_string()))?;
    let s = score(&model, ctx.probes, ctx.baseline_mse).map_err(|e| ScoringFailure::Runtime(e.to_string()))?;
    Ok((tau, s))
}

enum Compiled {
    NoFunction,
    Broken(String, String),
    Program(MergeProgram),
}

/// Classifies a batch of candidates, in this precedence order: extraction
/// (raw text only), parse/typecheck, duplicate, evaluation. `seen` gains the
/// hash of every program that parses, in batch order, so duplicate
/// classification does not depend on scheduling.
pub fn filter_candidates(
    texts: &[CandidateText],
    provenance: Provenance,
    seen: &mut HashSet<CanonicalHash>,
    budget: EvalBudget,
    ctx: &ScoringContext<'_>,
) -> Vec<Candidate> {
    let compiled: Vec<Compiled> = texts
        .par_iter()
        .map(|text| {
            let (source, prov) = match text {
                CandidateText::Raw(raw) => match extract_completion(raw) {
                    Ok(src) => (src, provenance),
                    Err(_) => return Compiled::NoFunction,
                },
                CandidateText::Source(src) => (src.clone(), provenance),
            };
            match MergeProgram::compile(source.clone(), prov) {
                Ok(p) => Compiled::Program(p),
                Err(e) => Compiled::Broken(source, e.to_string()),
            }
        })
        .collect();

    let fresh: Vec<bool> = compiled
        .iter()
        .map(|c| match c {
            Compiled::Program(p) => seen.insert(p.hash()),
            _ => false,
        })
        .collect();

    compiled
        .into_par_iter()
        .zip(fresh)
        .enumerate()
        .map(|(index, (c, fresh))| match c {
            Compiled::NoFunction => Candidate {
                index,
                source: None,
                hash: None,
                outcome: CandidateOutcome::NoFunctionExtracted,
            },
            Compiled::Broken(source, reason) => Candidate {
                index,
                source: Some(source),
                hash: None,
                outcome: CandidateOutcome::NonExecutable(reason),
            },
            Compiled::Program(program) => {
                let source = Some(program.source().to_string());
                let hash = Some(program.hash());
                let outcome = if !fresh {
                    CandidateOutcome::Duplicate
                } else {
                    match score_program(&program, ctx, budget) {
                        Ok((_, dev_score)) => CandidateOutcome::Success { program, dev_score },
                        Err(ScoringFailure::Timeout) => CandidateOutcome::Timeout,
                        Err(ScoringFailure::Runtime(reason)) => CandidateOutcome::NonExecutable(reason),
                    }
                };
                Candidate {
                    index,
                    source,
                    hash,
                    outcome,
                }
            }
        })
        .collect()
}

/// Scores already-filtered programs on the instance's dev probes, in input
/// order. A program that fails here is logged and left out.
pub fn evaluate_candidates(
    successes: &[MergeProgram],
    instance: &BenchmarkInstance,
    budget: EvalBudget,
) -> Vec<ScoredAlgorithm> {
    let taus = instance.task_vectors();
    let ctx = ScoringContext::dev(instance, &taus);
    successes
        .par_iter()
        .filter_map(|program| match score_program(program, &ctx, budget) {
            Ok((_, dev_score)) => Some(ScoredAlgorithm {
                program: program.clone(),
                dev_score,
                iteration: program.provenance.iteration,
            }),
            Err(e) => {
                log::warn!("reclassifying `{}` as non-executable: {e:?}", program.source());
                None
            }
        })
        .collect()
}

/// Counts per category, in [`Category::ALL`] order.
pub fn category_counts(candidates: &[Candidate]) -> [usize; 5] {
    let mut counts = [0; 5];
    for c in candidates {
        let i = Category::ALL
            .iter()
            .position(|&k| k == c.outcome.category())
            .expect("category listed");
        counts[i] += 1;
    }
    counts
}

/// Default provenance for grammar-sampled candidates of an iteration.
pub fn grammar_provenance(iteration: u32) -> Provenance {
    Provenance {
        iteration,
        generator: GeneratorKind::Grammar,
    }
}
