//! The iteration engine: run configuration, the generate / evaluate / refine
//! loop, best-program tracking, final test evaluation and reports.

mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{GeneratorMode, RunConfig};
pub use report::{
    bin_index, histogram, read_jsonl, report, tabulate, CandidateRecord, IterationRecord, ReportError, ReportTables,
    BINS, BIN_WIDTH, CANDIDATES_LOG, CATEGORY_CSV, HISTOGRAM_CSV, ITERATIONS_LOG, PREFERENCES_LOG, REPORT_JSON,
    TOKEN_CSV,
};
pub use run::{
    baselines, eval_program, run, select_best, task_arithmetic_baseline, Baselines, DevTest, IterationSummary, RunReport, RunState,
    TaskArithmeticBaseline, TestedProgram, INSTANCE_FILE, POLICY_FILE, TASK_ARITHMETIC_GRID,
};

use crate::benchmark::BenchmarkError;
use crate::generator::RemoteError;
use crate::merge::MergeError;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("remote generator: {0}")]
    Remote(#[from] RemoteError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("program failed: {0}")]
    Program(String),
    #[error("baseline: {0}")]
    Baseline(String),
}

impl DriverError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DriverError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
