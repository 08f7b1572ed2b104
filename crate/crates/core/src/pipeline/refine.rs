use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::preferences::PreferencePair;
use crate::generator::{GeneratorPolicy, Production};

/// Logits are kept inside `[-LOGIT_BOUND, LOGIT_BOUND]`.
pub const LOGIT_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefineStats {
    pub applied: usize,
    /// Pairs skipped because a side could not be re-derived in the grammar.
    pub skipped: usize,
}

fn usage(derivation: &[Production]) -> BTreeMap<Production, f64> {
    let mut counts = BTreeMap::new();
    for &p in derivation {
        *counts.entry(p).or_insert(0.0) += 1.0;
    }
    let total = derivation.len() as f64;
    counts.values_mut().for_each(|c| *c /= total);
    counts
}

/// Moves the policy toward productions used by chosen programs and away
/// from those used by rejected ones: each pair adds
/// `eta * (u_chosen - u_rejected)`, where `u` is the normalized production
/// usage of a derivation. The version is bumped even when nothing applies.
pub fn refine_policy(policy: &GeneratorPolicy, pairs: &[PreferencePair], eta: f64) -> (GeneratorPolicy, RefineStats) {
    let mut next = policy.clone();
    let mut stats = RefineStats::default();
    for pair in pairs {
        let derive = |a: &super::ScoredAlgorithm| policy.derivation(a.program.expr());
        let (Ok(c), Ok(r)) = (derive(&pair.chosen), derive(&pair.rejected)) else {
            stats.skipped += 1;
            continue;
        };
        let mut delta = usage(&c);
        for (p, u) in usage(&r) {
            *delta.entry(p).or_insert(0.0) -= u;
        }
        for (p, d) in delta {
            if let Some(l) = next.production_logits.get_mut(&p) {
                *l += eta * d;
            }
        }
        stats.applied += 1;
    }
    next.production_logits
        .values_mut()
        .for_each(|l| *l = l.clamp(-LOGIT_BOUND, LOGIT_BOUND));
    next.version += 1;
    (next, stats)
}
