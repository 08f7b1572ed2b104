use std::collections::HashSet;
use std::fs;
use std::path::Path;

use mergeforge::benchmark::{make_instance, Score};
use mergeforge::driver::{
    read_jsonl, report, run, select_best, CandidateRecord, IterationRecord, ReportError, RunConfig, CANDIDATES_LOG,
    CATEGORY_CSV, HISTOGRAM_CSV, ITERATIONS_LOG, TOKEN_CSV,
};
use mergeforge::dsl::{MergeProgram, Provenance};
use mergeforge::pipeline::{Category, ScoredAlgorithm};

fn small(dir: &Path, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        candidates_per_iteration: 60,
        output_dir: dir.into(),
        ..Default::default()
    }
}

#[test]
fn logs_reconcile_with_the_loop_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 11);
    let rep = run(&cfg).unwrap();
    let iterations: Vec<IterationRecord> = read_jsonl(&dir.path().join(ITERATIONS_LOG)).unwrap();
    let candidates: Vec<CandidateRecord> = read_jsonl(&dir.path().join(CANDIDATES_LOG)).unwrap();
    assert_eq!(iterations.len(), 3);
    assert_eq!(candidates.len(), 180);

    let mut prev = f64::NEG_INFINITY;
    let mut chosen_so_far: Vec<String> = Vec::new();
    for it in &iterations {
        let t = f64::from(it.iteration);
        let expected = cfg.t1 / (1.0 + cfg.beta * (t - 1.0));
        assert!((it.temperature - expected).abs() <= 1e-12);

        let s = it.s_best.unwrap();
        assert!(s >= prev);
        prev = s;
        let max_so_far = candidates
            .iter()
            .filter(|c| c.iteration <= it.iteration)
            .filter_map(|c| c.score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(s, max_so_far);

        let mut seen = HashSet::new();
        let union: Vec<String> = chosen_so_far.iter().filter(|h| seen.insert(*h)).cloned().collect();
        let pool: Vec<String> = it.carryover_pool.iter().map(|h| h.to_hex()).collect();
        assert_eq!(pool, union, "iteration {}", it.iteration);
        chosen_so_far.extend(it.chosen.iter().map(|h| h.to_hex()));

        let logged_success = candidates
            .iter()
            .filter(|c| c.iteration == it.iteration && c.category == Category::Success)
            .count();
        let summary = &rep.iterations[it.iteration as usize - 1];
        assert_eq!(summary.histogram.iter().sum::<usize>(), logged_success);
        assert_eq!(summary.counts.get(&Category::Success).copied().unwrap_or(0), logged_success);
        assert_eq!(it.counts.values().sum::<usize>(), 60);
    }

    assert_eq!(rep.s_best, Some(prev));
    assert_eq!(rep.best.as_ref().unwrap().dev_score, prev);
    assert!(rep.top_n.len() <= 15);
    assert!(rep.top_n.windows(2).all(|w| w[0].dev_score >= w[1].dev_score));
    assert_eq!(rep.baselines.task_arithmetic.evaluations, 27);
    assert_eq!(rep.baselines.seed_model.dev, 0.0);
    for f in [HISTOGRAM_CSV, CATEGORY_CSV, TOKEN_CSV, "report.json", "policy.json", "instance.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn forced_identity_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        iterations: 1,
        candidates_per_iteration: 1,
        productions: Some(vec!["vector.index".parse().unwrap(), "index.0".parse().unwrap()]),
        seed: 4,
        output_dir: dir.path().into(),
        ..Default::default()
    };
    let rep = run(&cfg).unwrap();
    let inst = make_instance(4, &cfg.benchmark).unwrap();
    let c1 = inst.dev_score(&inst.candidates()[0]).unwrap().value();
    let best = rep.best.unwrap();
    assert_eq!(best.source, "merge(models) = models[0]");
    assert_eq!(rep.s_best, Some(c1));
    assert_eq!(best.test_score, inst.test_score(&inst.candidates()[0]).unwrap().value());
}

#[test]
fn identical_configs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&small(a.path(), 5)).unwrap();
    run(&small(b.path(), 5)).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn cross_iteration_dedupe_and_layered_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        dedupe_across_iterations: true,
        layer_sizes: Some(vec![16, 16, 32]),
        ..small(dir.path(), 2)
    };
    run(&cfg).unwrap();
    let candidates: Vec<CandidateRecord> = read_jsonl(&dir.path().join(CANDIDATES_LOG)).unwrap();
    let mut seen = HashSet::new();
    for c in candidates.iter().filter(|c| c.hash.is_some()) {
        let first = seen.insert(c.hash.unwrap());
        assert_eq!(first, c.category != Category::Duplicate);
    }
}

fn scored(src: &str, score: f64, iteration: u32) -> ScoredAlgorithm {
    ScoredAlgorithm {
        program: MergeProgram::compile(src, Provenance::default()).unwrap(),
        dev_score: Score::new(score).unwrap(),
        iteration,
    }
}

#[test]
fn select_best_orders_and_dedupes() {
    let pool = vec![
        scored("merge(models) = models[0]", 90.0, 1),
        scored("merge(models) = models[2]", 95.0, 2),
        scored("merge(models) = models[1]", 95.0, 2),
        scored("merge(models) = mean_stack(models)", 80.0, 1),
    ];
    let best = select_best(&pool, 2);
    let top: Vec<&str> = best.iter().map(|a| a.source()).collect();
    assert_eq!(top, vec!["merge(models) = models[1]", "merge(models) = models[2]"]);
    assert_eq!(select_best(&pool, 10).len(), 4);
    assert!(select_best(&[], 3).is_empty());

    let twins = vec![
        scored("merge(models) = add(models[1], models[0])", 70.0, 3),
        scored("merge(models) = add(models[0], models[1])", 70.0, 1),
    ];
    let top = select_best(&twins, 5);
    assert_eq!(top.len(), 1);
    assert_eq!(top[0].iteration, 1);
}

fn write_lines<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let body: String = rows
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    fs::write(path, body).unwrap();
}

fn iteration_record(iteration: u32) -> IterationRecord {
    IterationRecord {
        iteration,
        temperature: 1.0,
        policy_version: iteration,
        candidates: 0,
        counts: Default::default(),
        exact_text_duplicates: 0,
        iteration_best: None,
        success_mean: None,
        s_best: None,
        best_source: None,
        thresholds: None,
        carryover_pool: vec![],
        chosen: vec![],
        rejected: 0,
        s: 3,
        pairs: 0,
        dropped_pairs: 0,
        refine_applied: 0,
        refine_skipped: 0,
    }
}

fn success(iteration: u32, index: usize, score: f64, source: &str) -> CandidateRecord {
    CandidateRecord {
        iteration,
        index,
        category: Category::Success,
        score: Some(score),
        hash: None,
        source: Some(source.into()),
        reason: None,
    }
}

#[test]
fn report_tables_from_fixture_logs() {
    let dir = tempfile::tempdir().unwrap();
    write_lines(&dir.path().join(ITERATIONS_LOG), &[iteration_record(1), iteration_record(2)]);
    let mut rows = vec![CandidateRecord {
        iteration: 1,
        index: 0,
        category: Category::Timeout,
        score: None,
        hash: None,
        source: Some("merge(models) = models[0]".into()),
        reason: None,
    }];
    rows.push(success(2, 0, 2.0, "merge(models) = add(mean_stack(models), mean_stack(tail(models)))"));
    rows.push(success(2, 1, 7.0, "merge(models) = mean_stack([mean_stack(models), mean_stack(models)])"));
    rows.push(success(
        2,
        2,
        51.0,
        "merge(models) = add(mean_stack(models), add(mean_stack(models), add(mean_stack(models), \
         add(mean_stack(models), add(mean_stack(models), mean_stack(models))))))",
    ));
    rows.push(success(2, 3, 100.0, "merge(models) = sub(mean_stack(models), mean_stack(models))"));
    write_lines(&dir.path().join(CANDIDATES_LOG), &rows);

    let tables = report(dir.path()).unwrap();
    assert_eq!(tables.histograms[&1], [0; 20]);
    let h2 = tables.histograms[&2];
    assert_eq!((h2[0], h2[1], h2[10], h2[19]), (1, 1, 1, 1));
    assert_eq!(tables.tokens["mean_stack"], 13);
    assert_eq!(tables.tokens["add"], 6);

    let hist = fs::read_to_string(dir.path().join(HISTOGRAM_CSV)).unwrap();
    assert_eq!(hist.lines().nth(1).unwrap(), format!("1{}", ",0".repeat(20)));
    let cats = fs::read_to_string(dir.path().join(CATEGORY_CSV)).unwrap();
    assert_eq!(cats.lines().nth(1).unwrap(), "1,0,0,0,0,1");
    assert_eq!(cats.lines().nth(2).unwrap(), "2,0,0,4,0,0");
    let tokens = fs::read_to_string(dir.path().join(TOKEN_CSV)).unwrap();
    assert_eq!(tokens.lines().nth(1).unwrap(), "mean_stack,13");
}

#[test]
fn twelve_mean_stack_uses() {
    let dir = tempfile::tempdir().unwrap();
    write_lines(&dir.path().join(ITERATIONS_LOG), &[iteration_record(1)]);
    let rows: Vec<_> = (0..6)
        .map(|i| success(1, i, 40.0, "merge(models) = add(mean_stack(models), mean_stack(tail(models)))"))
        .collect();
    write_lines(&dir.path().join(CANDIDATES_LOG), &rows);
    report(dir.path()).unwrap();
    let tokens = fs::read_to_string(dir.path().join(TOKEN_CSV)).unwrap();
    assert!(tokens.lines().any(|l| l == "mean_stack,12"));
}

#[test]
fn broken_logs_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    match report(dir.path()) {
        Err(ReportError::Missing { path }) => assert!(path.ends_with(ITERATIONS_LOG)),
        other => panic!("{other:?}"),
    }
    write_lines(&dir.path().join(ITERATIONS_LOG), &[iteration_record(1)]);
    fs::write(dir.path().join(CANDIDATES_LOG), "{\"iteration\": 1, \"index\": 0, \"category\": \"success\"}\nnot json\n").unwrap();
    let err = report(dir.path()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains(CANDIDATES_LOG), "{msg}");
    assert!(matches!(err, ReportError::Corrupt { .. }));
}
