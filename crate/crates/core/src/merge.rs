//! Task-vector arithmetic and the built-in reference merge algorithms.
//!
//! Everything here is a pure function over immutable slices, so callers may
//! share inputs freely across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T, E = MergeError> = std::result::Result<T, E>;

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(MergeError::Argument("vector must have length > 0".into()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MergeError::NonFinite(i));
    }
    Ok(())
}

fn same_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(MergeError::Dimension { expected, actual });
    }
    Ok(())
}

/// Weight delta of a candidate model relative to the seed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TaskVector(Vec<f64>);

/// Flat parameter vector of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModelWeights(Vec<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                check_values(&values)?;
                Ok(Self(values))
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = MergeError;

            fn try_from(values: Vec<f64>) -> Result<Self> {
                Self::new(values)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

vector_newtype!(TaskVector);
vector_newtype!(ModelWeights);

/// A merged task vector together with the model it produces on top of the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub merged_tau: TaskVector,
    pub merged_model: ModelWeights,
}

impl MergeResult {
    pub fn new(seed: &ModelWeights, merged_tau: TaskVector) -> Result<Self> {
        let merged_model = apply_merged(seed, &merged_tau)?;
        Ok(Self {
            merged_tau,
            merged_model,
        })
    }
}

pub fn task_vector(candidate: &ModelWeights, seed: &ModelWeights) -> Result<TaskVector> {
    same_len(seed.len(), candidate.len())?;
    let values = candidate
        .values()
        .iter()
        .zip(seed.values())
        .map(|(c, s)| c - s)
        .collect();
    TaskVector::new(values)
}

pub fn apply_merged(seed: &ModelWeights, tau: &TaskVector) -> Result<ModelWeights> {
    same_len(seed.len(), tau.len())?;
    let values = seed
        .values()
        .iter()
        .zip(tau.values())
        .map(|(s, t)| s + t)
        .collect();
    ModelWeights::new(values)
}

fn common_dim(taus: &[TaskVector]) -> Result<usize> {
    let first = taus
        .first()
        .ok_or_else(|| MergeError::Argument("at least one task vector is required".into()))?;
    for tau in &taus[1..] {
        same_len(first.len(), tau.len())?;
    }
    Ok(first.len())
}

/// Weighted sum of task vectors, `sum_j lambdas[j] * taus[j]`.
pub fn task_arithmetic(taus: &[TaskVector], lambdas: &[f64]) -> Result<TaskVector> {
    let d = common_dim(taus)?;
    same_len(taus.len(), lambdas.len())?;
    let mut out = vec![0.0; d];
    for (tau, &lambda) in taus.iter().zip(lambdas) {
        for (o, t) in out.iter_mut().zip(tau.values()) {
            *o += lambda * t;
        }
    }
    TaskVector::new(out)
}

/// Outcome of an exhaustive Task Arithmetic grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub lambdas: Vec<f64>,
    pub score: f64,
    pub evaluations: usize,
}

/// Evaluates every `|grid|^K` mixing-ratio tuple and returns the best one.
///
/// Tuples are visited in lexicographic order of their values (the grid is
/// sorted first) and only a strictly better score replaces the incumbent, so
/// ties resolve to the lexicographically smallest tuple.
pub fn grid_search_task_arithmetic<E, F>(
    taus: &[TaskVector],
    grid: &[f64],
    mut scorer: F,
) -> std::result::Result<GridSearchResult, E>
where
    E: From<MergeError>,
    F: FnMut(&TaskVector) -> std::result::Result<f64, E>,
{
    let k = taus.len();
    common_dim(taus)?;
    if grid.is_empty() {
        return Err(MergeError::Argument("grid must be nonempty".into()).into());
    }
    if let Some(i) = grid.iter().position(|g| !g.is_finite()) {
        return Err(MergeError::NonFinite(i).into());
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut digits = vec![0usize; k];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    loop {
        let lambdas: Vec<f64> = digits.iter().map(|&i| sorted[i]).collect();
        let merged = task_arithmetic(taus, &lambdas)?;
        let score = scorer(&merged)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((lambdas, score));
        }

        // odometer increment, last position fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                let (lambdas, score) = best.expect("at least one evaluation");
                return Ok(GridSearchResult {
                    lambdas,
                    score,
                    evaluations,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < sorted.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sequential fold `merged <- 0.5 * (merged + mean(tau_i) * 1)` over taus[1..],
/// starting from taus[0].
pub fn algorithm_a(taus: &[TaskVector]) -> Result<TaskVector> {
    common_dim(taus)?;
    let mut merged = taus[0].values().to_vec();
    for tau in &taus[1..] {
        let mu = mean(tau.values());
        for m in merged.iter_mut() {
            *m = 0.5 * (*m + mu);
        }
    }
    TaskVector::new(merged)
}

/// Scales each task vector by its factor, stacks them, and takes the mean
/// along the model axis.
pub fn fig3_weighted_sum(taus: &[TaskVector], factors: &[f64]) -> Result<TaskVector> {
    let d = common_dim(taus)?;
    same_len(taus.len(), factors.len())?;
    let mut out = vec![0.0; d];
    for (tau, &f) in taus.iter().zip(factors) {
        for (o, t) in out.iter_mut().zip(tau.values()) {
            *o += f * t;
        }
    }
    let k = taus.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    TaskVector::new(out)
}

/// Applies a merge function independently to each contiguous layer slice
/// (sizes given by `layer_sizes`) and concatenates the results.
pub fn merge_layerwise<F>(taus: &[TaskVector], layer_sizes: &[usize], mut merge: F) -> Result<TaskVector>
where
    F: FnMut(&[TaskVector]) -> Result<TaskVector>,
{
    let d = common_dim(taus)?;
    let total: usize = layer_sizes.iter().sum();
    same_len(d, total)?;
    if layer_sizes.contains(&0) {
        return Err(MergeError::Argument("layer sizes must be positive".into()));
    }
    let mut out = Vec::with_capacity(d);
    let mut offset = 0;
    for &size in layer_sizes {
        let layer: Vec<TaskVector> = taus
            .iter()
            .map(|t| TaskVector::new(t.values()[offset..offset + size].to_vec()))
            .collect::<Result<_>>()?;
        let merged = merge(&layer)?;
        same_len(size, merged.len())?;
        out.extend_from_slice(merged.values());
        offset += size;
    }
    TaskVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(v: &[f64]) -> TaskVector {
        TaskVector::new(v.to_vec()).unwrap()
    }

    fn mw(v: &[f64]) -> ModelWeights {
        ModelWeights::new(v.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(TaskVector::new(vec![]), Err(MergeError::Argument(_))));
        assert_eq!(TaskVector::new(vec![1.0, f64::NAN]), Err(MergeError::NonFinite(1)));
        assert!(serde_json::from_str::<TaskVector>("[]").is_err());
    }

    #[test]
    fn task_vector_examples() {
        assert_eq!(task_vector(&mw(&[1., 2.]), &mw(&[1., 2.])).unwrap(), tv(&[0., 0.]));
        assert_eq!(task_vector(&mw(&[3., 5.]), &mw(&[1., 2.])).unwrap(), tv(&[2., 3.]));
        assert_eq!(
            task_vector(&mw(&[1.]), &mw(&[1., 2.])),
            Err(MergeError::Dimension { expected: 2, actual: 1 })
        );
    }

    #[test]
    fn apply_merged_examples() {
        assert_eq!(apply_merged(&mw(&[1., 2.]), &tv(&[0., 0.])).unwrap(), mw(&[1., 2.]));
        assert_eq!(apply_merged(&mw(&[1., 2.]), &tv(&[2., 3.])).unwrap(), mw(&[3., 5.]));
        let seed = mw(&[0.25, -7.5]);
        let c = mw(&[1.5, 2.0]);
        assert_eq!(apply_merged(&seed, &task_vector(&c, &seed).unwrap()).unwrap(), c);
        assert!(apply_merged(&seed, &tv(&[1.])).is_err());
    }

    #[test]
    fn task_arithmetic_examples() {
        let basis = [tv(&[1., 0.]), tv(&[0., 1.])];
        assert_eq!(task_arithmetic(&basis, &[0.5, 0.5]).unwrap(), tv(&[0.5, 0.5]));
        assert_eq!(task_arithmetic(&basis, &[1., 0.]).unwrap(), tv(&[1., 0.]));
        let three = [tv(&[2., 4.]), tv(&[6., 2.]), tv(&[1., 1.])];
        let out = task_arithmetic(&three, &[0.2, 0.4, 0.6]).unwrap();
        assert_close(out.values(), &[3.4, 2.2], 1e-12);
        assert!(matches!(task_arithmetic(&[], &[]), Err(MergeError::Argument(_))));
        assert!(matches!(task_arithmetic(&basis, &[1.0]), Err(MergeError::Dimension { .. })));
        assert!(matches!(
            task_arithmetic(&[tv(&[1.]), tv(&[1., 2.])], &[1., 1.]),
            Err(MergeError::Dimension { .. })
        ));
    }

    #[test]
    fn grid_search_counts_and_single() {
        let taus = [tv(&[1., 0.]), tv(&[0., 1.]), tv(&[1., 1.])];
        let res: GridSearchResult =
            grid_search_task_arithmetic::<MergeError, _>(&taus, &[0.2, 0.4, 0.6], |t| {
                Ok(-t.values().iter().map(|v| (v - 1.0).powi(2)).sum::<f64>())
            })
            .unwrap();
        assert_eq!(res.evaluations, 27);

        let single = grid_search_task_arithmetic::<MergeError, _>(&[tv(&[2.])], &[1.0], |_| Ok(3.0)).unwrap();
        assert_eq!(single.lambdas, vec![1.0]);
        assert_eq!(single.evaluations, 1);
    }

    #[test]
    fn grid_search_ties_pick_smallest_tuple() {
        let taus = [tv(&[1.]), tv(&[1.])];
        // constant scorer: every tuple ties
        let res = grid_search_task_arithmetic::<MergeError, _>(&taus, &[0.6, 0.2, 0.4], |_| Ok(1.0)).unwrap();
        assert_eq!(res.lambdas, vec![0.2, 0.2]);
        // score depends only on the sum, so (0.2, 0.6) and (0.6, 0.2) tie
        let res = grid_search_task_arithmetic::<MergeError, _>(&taus, &[0.2, 0.6], |t| {
            Ok(-(t.values()[0] - 0.8).abs().max(1e-9))
        })
        .unwrap();
        assert_eq!(res.lambdas, vec![0.2, 0.6]);
    }

    #[test]
    fn grid_search_propagates_scorer_error() {
        #[derive(Debug)]
        enum E {
            Merge,
            Scorer,
        }
        impl From<MergeError> for E {
            fn from(_: MergeError) -> Self {
                E::Merge
            }
        }
        let err = grid_search_task_arithmetic(&[tv(&[1.])], &[1.0], |_| Err::<f64, _>(E::Scorer)).unwrap_err();
        assert!(matches!(err, E::Scorer));
        let err = grid_search_task_arithmetic(&[tv(&[1.])], &[], |_| Ok::<f64, E>(0.0)).unwrap_err();
        assert!(matches!(err, E::Merge));
    }

    #[test]
    fn algorithm_a_examples() {
        assert_eq!(algorithm_a(&[tv(&[1., 2.])]).unwrap(), tv(&[1., 2.]));
        assert_eq!(algorithm_a(&[tv(&[1., 2.]), tv(&[3., 5.])]).unwrap(), tv(&[2.5, 3.0]));
        assert_eq!(
            algorithm_a(&[tv(&[1., 2.]), tv(&[3., 5.]), tv(&[0., 2.])]).unwrap(),
            tv(&[1.75, 2.0])
        );
        assert!(matches!(algorithm_a(&[]), Err(MergeError::Argument(_))));
    }

    #[test]
    fn fig3_examples() {
        let ones = [tv(&[1., 1.]), tv(&[1., 1.]), tv(&[1., 1.])];
        let out = fig3_weighted_sum(&ones, &[0.6, 0.3, 0.4]).unwrap();
        assert_close(out.values(), &[1.3 / 3.0, 1.3 / 3.0], 1e-12);
        assert_eq!(fig3_weighted_sum(&[tv(&[3., 3.])], &[1.0]).unwrap(), tv(&[3., 3.]));
        let out = fig3_weighted_sum(&[tv(&[2., 0.]), tv(&[0., 2.])], &[0.5, 0.5]).unwrap();
        assert_close(out.values(), &[0.5, 0.5], 1e-12);
        assert!(matches!(
            fig3_weighted_sum(&ones, &[1.0]),
            Err(MergeError::Dimension { .. })
        ));
    }

    #[test]
    fn layerwise_matches_flat_for_elementwise_merges() {
        let taus = [tv(&[1., 2., 3., 4.]), tv(&[5., 6., 7., 8.])];
        let flat = task_arithmetic(&taus, &[0.5, 0.25]).unwrap();
        let layered = merge_layerwise(&taus, &[1, 3], |l| task_arithmetic(l, &[0.5, 0.25])).unwrap();
        assert_eq!(flat, layered);
        // algorithm A uses per-layer means, so layering changes the result
        let layered_a = merge_layerwise(&taus, &[2, 2], algorithm_a).unwrap();
        assert_eq!(layered_a, tv(&[3.25, 3.75, 5.25, 5.75]));
        assert!(merge_layerwise(&taus, &[2, 1], algorithm_a).is_err());
    }
}
