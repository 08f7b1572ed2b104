use std::collections::HashSet;
use std::io::{self, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::filter::ScoredAlgorithm;
use crate::dsl::CanonicalHash;

/// Identifier of the (constant) generation prompt; every pair shares it.
pub const PROMPT_ID: &str = "merge-strategies-v1";

#[derive(Debug, Error, PartialEq)]
#[error("invalid refine config: {0}")]
pub struct RefineConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Top percentile that defines the chosen set.
    pub p_w: f64,
    /// Bottom percentile that defines the rejected set.
    pub p_l: f64,
    /// Rejected samples paired with each chosen program.
    pub s: usize,
    /// Carryover programs taken from earlier iterations.
    pub k: usize,
    /// Policy step size.
    pub eta: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            p_w: 3.0,
            p_l: 10.0,
            s: 3,
            k: 3,
            eta: 0.1,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineConfigError> {
        let pct = |p: f64| p > 0.0 && p < 100.0;
        if !pct(self.p_w) || !pct(self.p_l) {
            return Err(RefineConfigError("percentiles must lie in (0, 100)".into()));
        }
        if self.s == 0 {
            return Err(RefineConfigError("s must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(RefineConfigError("eta must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub chosen: ScoredAlgorithm,
    pub rejected: ScoredAlgorithm,
}

/// One line of `preferences.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub prompt_id: String,
    pub chosen_source: String,
    pub rejected_source: String,
    pub chosen_score: f64,
    pub rejected_score: f64,
    pub iteration: u32,
}

impl PreferencePair {
    pub fn record(&self, iteration: u32) -> PreferenceRecord {
        PreferenceRecord {
            prompt_id: self.prompt_id.clone(),
            chosen_source: self.chosen.source().to_string(),
            rejected_source: self.rejected.source().to_string(),
            chosen_score: self.chosen.score(),
            rejected_score: self.rejected.score(),
            iteration,
        }
    }
}

pub fn write_preferences_jsonl<W: Write>(out: &mut W, pairs: &[PreferencePair], iteration: u32) -> io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut *out, &p.record(iteration))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// `ceil(p * n / 100)`, clamped to `1..=n`.
fn rank_count(p: f64, n: usize) -> usize {
    let r = (p * n as f64 / 100.0).ceil() as usize;
    r.clamp(1, n)
}

/// Score thresholds `(top, bottom)`: `top` is the `ceil(p_w n / 100)`-th
/// largest score and `bottom` the `ceil(p_l n / 100)`-th smallest.
/// `None` when `scores` is empty.
pub fn percentile_thresholds(scores: &[f64], p_w: f64, p_l: f64) -> Option<(f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let top = sorted[n - rank_count(p_w, n)];
    let bottom = sorted[rank_count(p_l, n) - 1];
    Some((top, bottom))
}

/// The `k` best distinct programs of a pool: score descending, then earlier
/// iteration, then source text.
pub fn top_k(pool: &[ScoredAlgorithm], k: usize) -> Vec<ScoredAlgorithm> {
    let mut sorted: Vec<&ScoredAlgorithm> = pool.iter().collect();
    sorted.sort_by(|a, b| {
        b.score()
            .total_cmp(&a.score())
            .then(a.iteration.cmp(&b.iteration))
            .then_with(|| a.source().cmp(b.source()))
    });
    let mut seen = HashSet::new();
    sorted
        .into_iter()
        .filter(|a| seen.insert(a.hash()))
        .take(k)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreferenceSet {
    /// Top-percentile programs of this iteration followed by carryover.
    pub chosen: Vec<ScoredAlgorithm>,
    pub rejected: Vec<ScoredAlgorithm>,
    pub pairs: Vec<PreferencePair>,
    pub thresholds: Option<(f64, f64)>,
    /// Sampled pairs discarded because the chosen side did not strictly win.
    pub dropped: usize,
}

/// Builds the chosen and rejected sets from this iteration's scored
/// programs plus the carryover pool, then pairs every chosen program with
/// up to `s` distinct rejected ones drawn without replacement.
pub fn build_preferences<R: Rng + ?Sized>(
    scored: &[ScoredAlgorithm],
    carryover_pool: &[ScoredAlgorithm],
    cfg: &RefineConfig,
    rng: &mut R,
) -> PreferenceSet {
    let scores: Vec<f64> = scored.iter().map(ScoredAlgorithm::score).collect();
    let thresholds = percentile_thresholds(&scores, cfg.p_w, cfg.p_l);

    let (mut chosen, rejected): (Vec<ScoredAlgorithm>, Vec<ScoredAlgorithm>) = match thresholds {
        Some((top, bottom)) => (
            scored.iter().filter(|a| a.score() >= top).cloned().collect(),
            scored.iter().filter(|a| a.score() <= bottom).cloned().collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let present: HashSet<CanonicalHash> = chosen.iter().map(ScoredAlgorithm::hash).collect();
    chosen.extend(
        top_k(carryover_pool, cfg.k)
            .into_iter()
            .filter(|a| !present.contains(&a.hash())),
    );

    let mut pairs = Vec::new();
    let mut dropped = 0;
    if !rejected.is_empty() {
        let amount = cfg.s.min(rejected.len());
        for c in &chosen {
            for j in sample(rng, rejected.len(), amount) {
                let r = &rejected[j];
                if c.hash() == r.hash() || c.score() <= r.score() {
                    dropped += 1;
                    continue;
                }
                pairs.push(PreferencePair {
                    prompt_id: PROMPT_ID.to_string(),
                    chosen: c.clone(),
                    rejected: r.clone(),
                });
            }
        }
    }
    if pairs.is_empty() {
        log::warn!(
            "no preference pairs ({} chosen, {} rejected, {} dropped)",
            chosen.len(),
            rejected.len(),
            dropped
        );
    }
    PreferenceSet {
        chosen,
        rejected,
        pairs,
        thresholds,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::Score;
    use crate::dsl::{MergeProgram, Provenance};
    use crate::rng::{substream, tag};

    /// Distinct programs `scale(i, models[0])`, each with its own score.
    fn alg(i: usize, score: f64, iteration: u32) -> ScoredAlgorithm {
        let src = format!("merge(models) = scale({i}.0, models[0])");
        ScoredAlgorithm {
            program: MergeProgram::compile(src, Provenance::default()).unwrap(),
            dev_score: Score::new(score).unwrap(),
            iteration,
        }
    }

    #[test]
    fn thresholds_on_1_to_100() {
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_thresholds(&scores, 3.0, 10.0), Some((98.0, 10.0)));
        assert_eq!(percentile_thresholds(&[], 3.0, 10.0), None);
        assert_eq!(percentile_thresholds(&[5.0], 3.0, 10.0), Some((5.0, 5.0)));
    }

    #[test]
    fn hundred_programs_example() {
        let scored: Vec<_> = (1..=100).map(|i| alg(i, i as f64 * 0.9, 1)).collect();
        let mut rng = substream(1, tag::PREFERENCES, 1, 0);
        let set = build_preferences(&scored, &[], &RefineConfig::default(), &mut rng);
        let chosen: Vec<f64> = set.chosen.iter().map(|a| a.score()).collect();
        assert_eq!(chosen.len(), 3);
        assert_eq!(set.rejected.len(), 10);
        assert_eq!(set.pairs.len(), 9);
        for p in &set.pairs {
            assert!(p.chosen.score() > p.rejected.score());
            assert_eq!(p.prompt_id, PROMPT_ID);
        }
    }

    #[test]
    fn carryover_adds_top_k_of_pool() {
        let scored: Vec<_> = (1..=100).map(|i| alg(i, i as f64 * 0.5, 2)).collect();
        let pool = vec![alg(201, 95.0, 1), alg(202, 99.0, 1), alg(203, 80.0, 1), alg(204, 97.0, 1)];
        let mut rng = substream(1, tag::PREFERENCES, 2, 0);
        let set = build_preferences(&scored, &pool, &RefineConfig::default(), &mut rng);
        let tail: Vec<f64> = set.chosen[3..].iter().map(|a| a.score()).collect();
        assert_eq!(tail, vec![99.0, 97.0, 95.0]);
        assert_eq!(set.pairs.len(), 18);
    }

    #[test]
    fn carryover_already_chosen_is_not_repeated() {
        let scored = vec![alg(1, 50.0, 2), alg(2, 10.0, 2)];
        let pool = vec![alg(1, 50.0, 1), alg(3, 40.0, 1)];
        let mut rng = substream(1, tag::PREFERENCES, 2, 0);
        let set = build_preferences(&scored, &pool, &RefineConfig::default(), &mut rng);
        let chosen: Vec<f64> = set.chosen.iter().map(|a| a.score()).collect();
        assert_eq!(chosen, vec![50.0, 40.0]);
    }

    #[test]
    fn all_equal_scores_give_no_pairs() {
        let scored: Vec<_> = (1..=20).map(|i| alg(i, 42.0, 1)).collect();
        let mut rng = substream(1, tag::PREFERENCES, 1, 0);
        let set = build_preferences(&scored, &[], &RefineConfig::default(), &mut rng);
        assert_eq!(set.chosen.len(), 20);
        assert!(set.pairs.is_empty());
        assert!(set.dropped > 0);
    }

    #[test]
    fn fewer_rejected_than_s() {
        let scored = vec![alg(1, 90.0, 1), alg(2, 10.0, 1)];
        let mut rng = substream(1, tag::PREFERENCES, 1, 0);
        let set = build_preferences(&scored, &[], &RefineConfig::default(), &mut rng);
        assert_eq!(set.pairs.len(), 1);
        assert_eq!(set.pairs[0].rejected.score(), 10.0);
    }

    #[test]
    fn jsonl_export() {
        let scored = vec![alg(1, 90.0, 1), alg(2, 10.0, 1)];
        let mut rng = substream(1, tag::PREFERENCES, 1, 0);
        let set = build_preferences(&scored, &[], &RefineConfig::default(), &mut rng);
        let mut buf = Vec::new();
        write_preferences_jsonl(&mut buf, &set.pairs, 1).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let rec: PreferenceRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(rec.chosen_score, 90.0);
        assert_eq!(rec.rejected_source, "merge(models) = scale(2.0, models[0])");
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig::default().validate().is_ok());
        for bad in [
            RefineConfig { p_w: 0.0, ..Default::default() },
            RefineConfig { p_l: 100.0, ..Default::default() },
            RefineConfig { s: 0, ..Default::default() },
            RefineConfig { eta: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
