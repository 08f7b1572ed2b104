//! Candidate filtering, scoring, preference construction and policy refinement.

mod filter;
mod preferences;
mod refine;

pub use filter::{
    category_counts, evaluate_candidates, filter_candidates, grammar_provenance, score_program, Candidate,
    CandidateOutcome, CandidateText, Category, ScoredAlgorithm, ScoringContext, ScoringFailure,
};
pub use preferences::{
    build_preferences, percentile_thresholds, top_k, write_preferences_jsonl, PreferencePair, PreferenceRecord,
    PreferenceSet, RefineConfig, RefineConfigError, PROMPT_ID,
};
pub use refine::{refine_policy, RefineStats, LOGIT_BOUND};
