use std::fs;
use std::path::Path;

use mergeforge::dsl::{EvalBudget, GeneratorKind, MergeProgram, Provenance};
use mergeforge::generator::{GeneratorPolicy, PromptTemplate};
use mergeforge::merge::{fig3_weighted_sum, TaskVector};

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

fn fixture(name: &str) -> MergeProgram {
    let src = fs::read_to_string(fixture_dir().join(name)).unwrap();
    MergeProgram::compile(
        src,
        Provenance {
            iteration: 0,
            generator: GeneratorKind::Fixture,
        },
    )
    .unwrap()
}

fn models() -> Vec<TaskVector> {
    vec![
        TaskVector::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap(),
        TaskVector::new(vec![0.5, 1.0, -1.5, 2.0]).unwrap(),
        TaskVector::new(vec![-1.0, 0.25, 2.0, 1.0]).unwrap(),
    ]
}

#[test]
fn every_fixture_compiles_and_runs() {
    let mut names: Vec<_> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".merge"))
        .collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        let p = fixture(&name);
        let out = p.evaluate(&models(), EvalBudget::default_for(3, 4)).unwrap();
        assert_eq!(out.len(), 4, "{name}");
    }
}

#[test]
fn weighted_mean_fixture_matches_reference() {
    let out = fixture("weighted_mean.merge")
        .evaluate(&models(), EvalBudget::default_for(3, 4))
        .unwrap();
    let reference = fig3_weighted_sum(&models(), &[0.6, 0.3, 0.4]).unwrap();
    for (x, y) in out.values().iter().zip(reference.values()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn fixtures_in_the_grammar_rederive() {
    let policy = GeneratorPolicy::new(3);
    for name in ["identity.merge", "mean.merge", "task_arithmetic.merge", "weighted_mean.merge"] {
        assert!(policy.derivation(fixture(name).expr()).is_ok(), "{name}");
    }
}

#[test]
fn prompt_embeds_the_one_shot_example() {
    let prompt = PromptTemplate::default();
    let one_shot = fs::read_to_string(fixture_dir().join("one_shot.merge")).unwrap();
    assert!(prompt.text.contains(one_shot.trim_end()));
    assert!(!prompt.text.contains("{one_shot}"));
    assert!(prompt.text.trim_end().ends_with("# New strategies for merging the task vectors:"));
}
