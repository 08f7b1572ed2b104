use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{CanonicalHash, MergeProgram, Provenance};
use crate::pipeline::Category;

pub const CANDIDATES_LOG: &str = "candidates.jsonl";
pub const ITERATIONS_LOG: &str = "iterations.jsonl";
pub const PREFERENCES_LOG: &str = "preferences.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const HISTOGRAM_CSV: &str = "histograms.csv";
pub const CATEGORY_CSV: &str = "categories.csv";
pub const TOKEN_CSV: &str = "tokens.csv";

pub const BIN_WIDTH: f64 = 5.0;
pub const BINS: usize = 20;

/// Histogram bin of a score; 100 falls in the last bin.
pub fn bin_index(score: f64) -> usize {
    ((score / BIN_WIDTH).floor().max(0.0) as usize).min(BINS - 1)
}

/// Dev-score histogram with bins `[0,5), [5,10), ..., [95,100]`.
pub fn histogram(scores: impl IntoIterator<Item = f64>) -> [usize; BINS] {
    let mut bins = [0; BINS];
    for s in scores {
        bins[bin_index(s)] += 1;
    }
    bins
}

/// One line of `candidates.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub iteration: u32,
    pub index: usize,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<CanonicalHash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// One line of `iterations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub temperature: f64,
    /// Policy version used to generate this iteration's candidates.
    pub policy_version: u32,
    pub candidates: usize,
    pub counts: BTreeMap<Category, usize>,
    /// Candidates whose source text repeats an earlier one of the same batch.
    pub exact_text_duplicates: usize,
    pub iteration_best: Option<f64>,
    pub success_mean: Option<f64>,
    pub s_best: Option<f64>,
    pub best_source: Option<String>,
    pub thresholds: Option<(f64, f64)>,
    pub carryover_pool: Vec<CanonicalHash>,
    pub chosen: Vec<CanonicalHash>,
    pub rejected: usize,
    pub s: usize,
    pub pairs: usize,
    pub dropped_pairs: usize,
    pub refine_applied: usize,
    pub refine_skipped: usize,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: missing run log", path.display())]
    Missing { path: PathBuf },
    #[error("{}: line {line}: {message}", path.display())]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ReportError::Missing { path: path.into() },
        _ => ReportError::Io {
            path: path.into(),
            source: e,
        },
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Corrupt {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Aggregates recomputed from the run logs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTables {
    pub histograms: BTreeMap<u32, [usize; BINS]>,
    pub categories: BTreeMap<u32, BTreeMap<Category, usize>>,
    /// Operator occurrences across Success programs.
    pub tokens: BTreeMap<String, usize>,
}

impl ReportTables {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("iteration");
        for b in 0..BINS {
            let lo = b as f64 * BIN_WIDTH;
            let _ = write!(out, ",{}-{}", lo, lo + BIN_WIDTH);
        }
        out.push('\n');
        for (it, bins) in &self.histograms {
            let _ = write!(out, "{it}");
            for c in bins {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn category_csv(&self) -> String {
        let mut out = String::from("iteration");
        for c in Category::ALL {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (it, counts) in &self.categories {
            let _ = write!(out, "{it}");
            for c in Category::ALL {
                let _ = write!(out, ",{}", counts.get(&c).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out
    }

    pub fn token_csv(&self) -> String {
        let mut rows: Vec<(&String, &usize)> = self.tokens.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let mut out = String::from("token,count\n");
        for (t, c) in rows {
            let _ = writeln!(out, "{t},{c}");
        }
        out
    }
}

/// Recomputes the report tables from the logs in `run_dir`.
pub fn tabulate(run_dir: &Path) -> Result<ReportTables, ReportError> {
    let iterations: Vec<IterationRecord> = read_jsonl(&run_dir.join(ITERATIONS_LOG))?;
    let cand_path = run_dir.join(CANDIDATES_LOG);
    let candidates: Vec<CandidateRecord> = read_jsonl(&cand_path)?;

    let mut tables = ReportTables::default();
    for it in iterations.iter().map(|r| r.iteration).chain(candidates.iter().map(|c| c.iteration)) {
        tables.histograms.entry(it).or_insert([0; BINS]);
        tables.categories.entry(it).or_default();
    }
    for (line, c) in candidates.iter().enumerate() {
        *tables
            .categories
            .entry(c.iteration)
            .or_default()
            .entry(c.category)
            .or_insert(0) += 1;
        if c.category != Category::Success {
            continue;
        }
        let corrupt = |message: &str| ReportError::Corrupt {
            path: cand_path.clone(),
            line: line + 1,
            message: message.into(),
        };
        let score = c.score.ok_or_else(|| corrupt("success record without a score"))?;
        tables.histograms.entry(c.iteration).or_insert([0; BINS])[bin_index(score)] += 1;
        let source = c.source.as_deref().ok_or_else(|| corrupt("success record without a source"))?;
        let program = MergeProgram::compile(source, Provenance::default()).map_err(|e| corrupt(&e.to_string()))?;
        for t in program.op_tokens() {
            *tables.tokens.entry(t.to_string()).or_insert(0) += 1;
        }
    }
    Ok(tables)
}

/// Writes the histogram, category and token CSVs next to the logs.
pub fn report(run_dir: &Path) -> Result<ReportTables, ReportError> {
    let tables = tabulate(run_dir)?;
    for (name, body) in [
        (HISTOGRAM_CSV, tables.histogram_csv()),
        (CATEGORY_CSV, tables.category_csv()),
        (TOKEN_CSV, tables.token_csv()),
    ] {
        let path = run_dir.join(name);
        fs::write(&path, body).map_err(|e| ReportError::Io { path, source: e })?;
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning() {
        let h = histogram([2.0, 7.0, 51.0]);
        assert_eq!(h[0], 1);
        assert_eq!(h[1], 1);
        assert_eq!(h[10], 1);
        assert_eq!(h.iter().sum::<usize>(), 3);
        assert_eq!(histogram([100.0, 95.0, 0.0, 4.999])[19], 2);
        assert_eq!(histogram([]), [0; BINS]);
    }

    #[test]
    fn csv_headers() {
        let t = ReportTables::default();
        assert!(t.histogram_csv().starts_with("iteration,0-5,5-10,"));
        assert!(t.histogram_csv().trim_end().ends_with("95-100"));
        assert_eq!(
            t.category_csv(),
            "iteration,duplicate,no_function_extracted,success,non_executable,timeout\n"
        );
        assert_eq!(t.token_csv(), "token,count\n");
    }
}
