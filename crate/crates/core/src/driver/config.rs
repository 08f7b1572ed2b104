use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::benchmark::BenchmarkParams;
use crate::dsl::EvalBudget;
use crate::generator::{GeneratorPolicy, Production, RemoteConfig};
use crate::pipeline::RefineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    #[default]
    Grammar,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: u32,
    pub candidates_per_iteration: usize,
    pub refine: RefineConfig,
    pub t1: f64,
    pub beta: f64,
    pub generator: GeneratorMode,
    /// Seeds the benchmark instance and every generation stream.
    pub seed: u64,
    pub benchmark: BenchmarkParams,
    /// Per-candidate step budget; defaults to `EvalBudget::default_for(K, d)`.
    pub budget: Option<EvalBudget>,
    pub top_n_for_test: usize,
    pub output_dir: PathBuf,
    pub remote: Option<RemoteConfig>,
    /// Prompt template file for remote mode; the built-in one otherwise.
    pub prompt_template: Option<PathBuf>,
    /// Enabled grammar productions; the full grammar when absent.
    pub productions: Option<Vec<Production>>,
    pub max_depth: Option<usize>,
    /// Treat a program seen in any earlier iteration as a duplicate.
    pub dedupe_across_iterations: bool,
    /// Run programs separately on each contiguous layer slice of this size.
    pub layer_sizes: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            candidates_per_iteration: 200,
            refine: RefineConfig::default(),
            t1: 1.2,
            beta: 0.2,
            generator: GeneratorMode::Grammar,
            seed: 0,
            benchmark: BenchmarkParams::default(),
            budget: None,
            top_n_for_test: 15,
            output_dir: PathBuf::from("runs/latest"),
            remote: None,
            prompt_template: None,
            productions: None,
            max_depth: None,
            dedupe_across_iterations: false,
            layer_sizes: None,
        }
    }
}

impl RunConfig {
    /// Large-scale preset: 3000 candidates per iteration.
    pub fn full_scale() -> Self {
        Self {
            candidates_per_iteration: 3000,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DriverError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn budget(&self) -> EvalBudget {
        self.budget
            .unwrap_or_else(|| EvalBudget::default_for(self.benchmark.k, self.benchmark.d))
    }

    pub fn initial_policy(&self) -> Result<GeneratorPolicy, DriverError> {
        let k = self.benchmark.k;
        let mut policy = match &self.productions {
            Some(prods) => GeneratorPolicy::restricted(k, prods).map_err(|e| DriverError::Config(e.to_string()))?,
            None => GeneratorPolicy::new(k),
        };
        if let Some(depth) = self.max_depth {
            policy.max_depth = depth;
        }
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::Config(m.into()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.candidates_per_iteration == 0 {
            return bad("candidates_per_iteration must be at least 1");
        }
        if !(self.t1 > 0.0 && self.t1.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("t1 must be positive and beta non-negative");
        }
        self.refine
            .validate()
            .map_err(|e| DriverError::Config(e.to_string()))?;
        self.benchmark
            .validate()
            .map_err(|e| DriverError::Config(e.to_string()))?;
        if self.generator == GeneratorMode::Remote && self.remote.is_none() {
            return bad("remote generator mode needs a `remote` section");
        }
        if let Some(sizes) = &self.layer_sizes {
            if sizes.contains(&0) || sizes.iter().sum::<usize>() != self.benchmark.d {
                return bad("layer_sizes must be positive and sum to d");
            }
        }
        self.initial_policy()?;
        Ok(())
    }
}
