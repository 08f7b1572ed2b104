//! Synthetic merge benchmark.
//!
//! A hidden target `w*` and a seed model `M0` are drawn; the coordinates are
//! shuffled and split into `K` blocks (each optionally borrowing a fraction of
//! the next block's coordinates). Candidate `j` knows the target only on its
//! block, `C_j = M0 + mask_j * (w* - M0) + noise_j`, so merging is genuinely
//! useful. Models are scored on linear probes `y = x . w*` by their MSE
//! relative to `M0`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::{task_vector, MergeError, ModelWeights, TaskVector};
use crate::rng::{substream, tag, StreamRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("instance file does not match its regenerated instance: {0}")]
    Replay(String),
    #[error("malformed instance file: {0}")]
    Format(String),
}

/// Size and noise parameters of a benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkParams {
    pub d: usize,
    pub k: usize,
    pub component_noise: f64,
    pub n_dev: usize,
    pub n_test: usize,
    /// Fraction of the next block's coordinates each candidate also knows.
    pub overlap: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            d: 64,
            k: 3,
            component_noise: 0.05,
            n_dev: 100,
            n_test: 1000,
            overlap: 0.25,
        }
    }
}

impl BenchmarkParams {
    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let err = |m: &str| Err(BenchmarkError::Argument(m.into()));
        if self.d < 2 {
            return err("d must be at least 2");
        }
        if self.k < 2 {
            return err("K must be at least 2");
        }
        if self.k > self.d {
            return err("K must not exceed d");
        }
        if !(self.component_noise >= 0.0 && self.component_noise.is_finite()) {
            return err("component_noise must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return err("overlap must lie in [0, 1]");
        }
        if self.n_dev == 0 || self.n_test == 0 {
            return err("probe counts must be positive");
        }
        Ok(())
    }
}

/// A dev/test score in `[0, 100]`, higher is better.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub fn new(value: f64) -> Result<Self, BenchmarkError> {
        if (0.0..=100.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(BenchmarkError::Argument(format!("score {value} outside [0, 100]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = BenchmarkError;

    fn try_from(v: f64) -> Result<Self, BenchmarkError> {
        Self::new(v)
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    probes: Vec<Probe>,
}

impl ProbeSet {
    pub fn new(probes: Vec<Probe>) -> Result<Self, BenchmarkError> {
        if probes.is_empty() {
            return Err(BenchmarkError::Argument("probe set must be nonempty".into()));
        }
        if probes.iter().any(|p| p.x.iter().any(|v| !v.is_finite()) || !p.y.is_finite()) {
            return Err(BenchmarkError::Argument("probe entries must be finite".into()));
        }
        Ok(Self { probes })
    }

    fn draw(rng: &mut StreamRng, n: usize, target: &[f64]) -> Self {
        let probes = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..target.len()).map(|_| rng.sample(StandardNormal)).collect();
                let y = dot(&x, target);
                Probe { x, y }
            })
            .collect();
        Self { probes }
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean squared probe error of `model`.
pub fn mse(model: &[f64], probes: &ProbeSet) -> Result<f64, BenchmarkError> {
    if probes.is_empty() {
        return Err(BenchmarkError::Argument("probe set must be nonempty".into()));
    }
    let mut total = 0.0;
    for p in probes.probes() {
        if p.x.len() != model.len() {
            return Err(MergeError::Dimension {
                expected: p.x.len(),
                actual: model.len(),
            }
            .into());
        }
        let r = dot(&p.x, model) - p.y;
        total += r * r;
    }
    Ok(total / probes.len() as f64)
}

/// `100 * max(0, 1 - MSE(model) / baseline_mse)`.
pub fn score(model: &ModelWeights, probes: &ProbeSet, baseline_mse: f64) -> Result<Score, BenchmarkError> {
    if !(baseline_mse > 0.0 && baseline_mse.is_finite()) {
        return Err(BenchmarkError::Argument("baseline MSE must be positive and finite".into()));
    }
    let err = mse(model.values(), probes)?;
    let value = 100.0 * (1.0 - err / baseline_mse).max(0.0);
    // non-finite MSE means the model is hopeless, not that scoring failed
    Score::new(if value.is_finite() { value.min(100.0) } else { 0.0 })
}

/// Which RNG sub-stream produced each component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamIds {
    pub target: [u64; 3],
    pub seed_model: [u64; 3],
    pub permutation: [u64; 3],
    pub noise: Vec<[u64; 3]>,
    pub dev_probes: [u64; 3],
    pub test_probes: [u64; 3],
}

impl StreamIds {
    fn for_k(k: usize) -> Self {
        Self {
            target: [tag::TARGET, 0, 0],
            seed_model: [tag::SEED_MODEL, 0, 0],
            permutation: [tag::PERMUTATION, 0, 0],
            noise: (0..k as u64).map(|j| [tag::NOISE, j, 0]).collect(),
            dev_probes: [tag::DEV_PROBES, 0, 0],
            test_probes: [tag::TEST_PROBES, 0, 0],
        }
    }
}

fn open(seed: u64, id: [u64; 3]) -> StreamRng {
    substream(seed, id[0], id[1], id[2])
}

/// On-disk form of an instance: everything needed to regenerate it bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub rng_seed: u64,
    pub params: BenchmarkParams,
    pub streams: StreamIds,
    pub masks: Vec<Vec<usize>>,
}

pub const INSTANCE_FORMAT: &str = "mergeforge-instance/1";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInstance {
    rng_seed: u64,
    params: BenchmarkParams,
    seed: ModelWeights,
    candidates: Vec<ModelWeights>,
    target: ModelWeights,
    masks: Vec<Vec<usize>>,
    dev: ProbeSet,
    test: ProbeSet,
    dev_baseline: f64,
    test_baseline: f64,
}

fn normal_vec(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Shuffled coordinates split into `k` contiguous blocks; block `j` also
/// takes the first `ceil(overlap * len)` coordinates of block `j + 1`
/// (cyclically). Each mask is returned sorted.
fn block_masks(rng: &mut StreamRng, d: usize, k: usize, overlap: f64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let blocks: Vec<&[usize]> = (0..k).map(|j| &perm[j * d / k..(j + 1) * d / k]).collect();
    (0..k)
        .map(|j| {
            let next = blocks[(j + 1) % k];
            let borrow = (overlap * next.len() as f64).ceil() as usize;
            let mut mask: Vec<usize> = blocks[j].iter().chain(&next[..borrow.min(next.len())]).copied().collect();
            mask.sort_unstable();
            mask.dedup();
            mask
        })
        .collect()
}

pub fn make_instance(rng_seed: u64, params: &BenchmarkParams) -> Result<BenchmarkInstance, BenchmarkError> {
    params.validate()?;
    let BenchmarkParams {
        d,
        k,
        component_noise,
        n_dev,
        n_test,
        overlap,
    } = *params;
    let ids = StreamIds::for_k(k);

    let target = normal_vec(&mut open(rng_seed, ids.target), d);
    let seed = normal_vec(&mut open(rng_seed, ids.seed_model), d);
    let masks = block_masks(&mut open(rng_seed, ids.permutation), d, k, overlap);

    let candidates = masks
        .iter()
        .zip(&ids.noise)
        .map(|(mask, &noise_id)| {
            let noise = normal_vec(&mut open(rng_seed, noise_id), d);
            let mut c: Vec<f64> = seed.iter().zip(&noise).map(|(s, n)| s + component_noise * n).collect();
            for &i in mask {
                c[i] += target[i] - seed[i];
            }
            ModelWeights::new(c)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dev = ProbeSet::draw(&mut open(rng_seed, ids.dev_probes), n_dev, &target);
    let test = ProbeSet::draw(&mut open(rng_seed, ids.test_probes), n_test, &target);
    let dev_baseline = mse(&seed, &dev)?;
    let test_baseline = mse(&seed, &test)?;
    if !(dev_baseline > 0.0 && test_baseline > 0.0) {
        return Err(BenchmarkError::Argument("seed model coincides with the target".into()));
    }

    Ok(BenchmarkInstance {
        rng_seed,
        params: params.clone(),
        seed: ModelWeights::new(seed)?,
        candidates,
        target: ModelWeights::new(target)?,
        masks,
        dev,
        test,
        dev_baseline,
        test_baseline,
    })
}

impl BenchmarkInstance {
    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn params(&self) -> &BenchmarkParams {
        &self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.params.d, self.params.k)
    }

    pub fn seed_model(&self) -> &ModelWeights {
        &self.seed
    }

    pub fn candidates(&self) -> &[ModelWeights] {
        &self.candidates
    }

    pub fn masks(&self) -> &[Vec<usize>] {
        &self.masks
    }

    /// The hidden optimum. Only diagnostics and tests read this; the search
    /// loop sees nothing but dev scores.
    pub fn target(&self) -> &ModelWeights {
        &self.target
    }

    pub fn dev_probes(&self) -> &ProbeSet {
        &self.dev
    }

    pub fn test_probes(&self) -> &ProbeSet {
        &self.test
    }

    pub fn dev_baseline_mse(&self) -> f64 {
        self.dev_baseline
    }

    pub fn test_baseline_mse(&self) -> f64 {
        self.test_baseline
    }

    pub fn task_vectors(&self) -> Vec<TaskVector> {
        self.candidates
            .iter()
            .map(|c| task_vector(c, &self.seed).expect("candidates share the seed's dimension"))
            .collect()
    }

    pub fn dev_score(&self, model: &ModelWeights) -> Result<Score, BenchmarkError> {
        score(model, &self.dev, self.dev_baseline)
    }

    pub fn test_score(&self, model: &ModelWeights) -> Result<Score, BenchmarkError> {
        score(model, &self.test, self.test_baseline)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            format: INSTANCE_FORMAT.into(),
            rng_seed: self.rng_seed,
            params: self.params.clone(),
            streams: StreamIds::for_k(self.params.k),
            masks: self.masks.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance file serializes")
    }

    /// Regenerates the instance described by a file and checks that the
    /// recorded masks and stream ids match.
    pub fn from_file(file: &InstanceFile) -> Result<Self, BenchmarkError> {
        if file.format != INSTANCE_FORMAT {
            return Err(BenchmarkError::Format(format!("unsupported format `{}`", file.format)));
        }
        let inst = make_instance(file.rng_seed, &file.params)?;
        if file.streams != StreamIds::for_k(file.params.k) {
            return Err(BenchmarkError::Replay("stream ids differ".into()));
        }
        if file.masks != inst.masks {
            return Err(BenchmarkError::Replay("masks differ".into()));
        }
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchmarkError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| BenchmarkError::Format(e.to_string()))?;
        Self::from_file(&file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::{apply_merged, task_arithmetic};

    fn small(overlap: f64, noise: f64) -> BenchmarkParams {
        BenchmarkParams {
            d: 12,
            k: 3,
            component_noise: noise,
            n_dev: 20,
            n_test: 40,
            overlap,
        }
    }

    #[test]
    fn deterministic() {
        let a = make_instance(11, &BenchmarkParams::default()).unwrap();
        let b = make_instance(11, &BenchmarkParams::default()).unwrap();
        assert_eq!(a, b);
        let c = make_instance(12, &BenchmarkParams::default()).unwrap();
        assert_ne!(a.seed_model(), c.seed_model());
    }

    #[test]
    fn disjoint_noiseless_blocks_sum_to_the_target_delta() {
        let inst = make_instance(3, &small(0.0, 0.0)).unwrap();
        let mut covered: Vec<usize> = inst.masks().concat();
        covered.sort_unstable();
        assert_eq!(covered, (0..12).collect::<Vec<_>>());
        let taus = inst.task_vectors();
        let sum = task_arithmetic(&taus, &[1.0; 3]).unwrap();
        let delta: Vec<f64> = inst
            .target()
            .values()
            .iter()
            .zip(inst.seed_model().values())
            .map(|(t, s)| t - s)
            .collect();
        assert_eq!(sum.values(), delta.as_slice());
        let merged = apply_merged(inst.seed_model(), &sum).unwrap();
        assert_eq!(inst.dev_score(&merged).unwrap().value(), 100.0);
    }

    #[test]
    fn overlap_extends_blocks() {
        let inst = make_instance(3, &small(0.5, 0.0)).unwrap();
        for mask in inst.masks() {
            assert_eq!(mask.len(), 6);
        }
    }

    #[test]
    fn score_anchors() {
        let inst = make_instance(5, &BenchmarkParams::default()).unwrap();
        assert_eq!(inst.dev_score(inst.seed_model()).unwrap().value(), 0.0);
        assert_eq!(inst.dev_score(inst.target()).unwrap().value(), 100.0);
        // twice the seed's error vector gives 4x the MSE: clamped to 0
        let far: Vec<f64> = inst
            .seed_model()
            .values()
            .iter()
            .zip(inst.target().values())
            .map(|(s, t)| t + 2.0 * (s - t))
            .collect();
        assert_eq!(inst.dev_score(&ModelWeights::new(far).unwrap()).unwrap().value(), 0.0);
    }

    #[test]
    fn score_argument_errors() {
        let inst = make_instance(5, &small(0.0, 0.0)).unwrap();
        assert!(score(inst.seed_model(), inst.dev_probes(), 0.0).is_err());
        assert!(ProbeSet::new(vec![]).is_err());
        let short = ModelWeights::new(vec![1.0]).unwrap();
        assert!(inst.dev_score(&short).is_err());
        assert!(Score::new(100.5).is_err());
        assert!(Score::new(-0.1).is_err());
    }

    #[test]
    fn invalid_params() {
        for p in [
            BenchmarkParams { d: 1, ..Default::default() },
            BenchmarkParams { k: 1, ..Default::default() },
            BenchmarkParams { d: 2, k: 3, ..Default::default() },
            BenchmarkParams {
                component_noise: -1.0,
                ..Default::default()
            },
            BenchmarkParams {
                overlap: 1.5,
                ..Default::default()
            },
            BenchmarkParams { n_dev: 0, ..Default::default() },
        ] {
            assert!(matches!(make_instance(1, &p), Err(BenchmarkError::Argument(_))), "{p:?}");
        }
    }

    #[test]
    fn json_replay_is_bit_exact() {
        let inst = make_instance(99, &BenchmarkParams::default()).unwrap();
        let back = BenchmarkInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);

        let mut file = inst.to_file();
        file.masks[0].push(63);
        file.masks[0].dedup();
        file.masks[0][0] = 1000;
        assert!(matches!(BenchmarkInstance::from_file(&file), Err(BenchmarkError::Replay(_))));
        assert!(matches!(BenchmarkInstance::from_json("{"), Err(BenchmarkError::Format(_))));
    }
}
