mod common;

use std::fs;

use proptest::prelude::*;
use ptrs::curation::{CohortSummary, GroupTag};
use ptrs::ingest::{parse_raw, Schema};
use ptrs::models::ModelKind;
use ptrs::report::{cell_name, cmd_run, cmd_synth, cmd_tables, execute, load_bundle, ExperimentConfig, Manifest, ReportError};
use ptrs::synth::{binormal_auc, generate, SynthConfig};
use rand_distr::{Distribution, StandardNormal};

fn small_synth() -> SynthConfig {
    SynthConfig {
        n: 120,
        prevalence: 0.6,
        ..SynthConfig::default()
    }
}

#[test]
fn synthetic_cohort_survives_ingest_and_curation() {
    let (c, ds) = common::cohort(&SynthConfig::default());
    assert_eq!(parse_raw(&c.csv, &Schema::default()).unwrap().len(), 93);
    assert_eq!(ds.n_rows(), 93);
    assert_eq!(ds.labels, c.labels);
    assert_eq!(ds.labels.iter().filter(|&&y| y == 1).count(), 74);

    let header = c.csv.lines().next().unwrap();
    // nine biomarkers and eleven questionnaire indicators
    assert_eq!(c.sidecar.columns.len(), 20);
    for col in &c.sidecar.columns {
        assert!(header.split(',').any(|h| h == col.name), "{} missing from header", col.name);
        assert!((0.0..=1.0).contains(&col.implied_auc));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn positive_count_is_exact(n in 10usize..300, prevalence in 0.05f64..0.95, seed in 0u64..500) {
        let config = SynthConfig { n, prevalence, seed, ..SynthConfig::default() };
        let c = generate(&config).unwrap();
        let pos = c.labels.iter().filter(|&&y| y == 1).count();
        prop_assert_eq!(pos, (n as f64 * prevalence).round() as usize);
        prop_assert_eq!(c.sidecar.n_positive + c.sidecar.n_negative, n);
    }
}

#[test]
fn binormal_shift_matches_monte_carlo() {
    let delta = 1.19;
    let mut rng = common::rng(4);
    let draws = 200_000;
    let wins = (0..draws)
        .filter(|_| {
            let pos: f64 = StandardNormal.sample(&mut rng);
            let neg: f64 = StandardNormal.sample(&mut rng);
            pos + delta > neg
        })
        .count();
    let empirical = wins as f64 / draws as f64;
    assert!((binormal_auc(delta) - 0.80).abs() < 0.002);
    assert!((empirical - binormal_auc(delta)).abs() < 0.005, "{empirical}");
}

fn config_for(dir: &std::path::Path, extra: &str) -> ExperimentConfig {
    cmd_synth(&small_synth(), dir).unwrap();
    let text = format!("[input]\npath = \"cohort.csv\"\n{extra}");
    ExperimentConfig::from_toml(&text, dir.to_path_buf()).unwrap()
}

#[test]
fn restricted_grid_reports_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_for(dir.path(), "[run]\nmodels = [\"RF\"]\ngroups = [\"F2\"]\n");
    let records = parse_raw(&common::read(&dir.path().join("cohort.csv")), &config.schema).unwrap();
    let out = execute(&config, records).unwrap();
    assert_eq!(out.bundle.reports.len(), 1);
    assert!(out.bundle.reports.contains_key(&(GroupTag::F2, ModelKind::Rf)));
    assert_eq!(out.oof.len(), 1);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let one = config_for(dir.path(), "[run]\nthreads = 1\n");
    let four = config_for(dir.path(), "[run]\nthreads = 4\n");
    let records = || parse_raw(&common::read(&dir.path().join("cohort.csv")), &one.schema).unwrap();
    let a = execute(&one, records()).unwrap();
    let b = execute(&four, records()).unwrap();
    assert_eq!(a.bundle, b.bundle);
    assert_eq!(a.oof, b.oof);
}

#[test]
fn tables_need_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_for(dir.path(), "[run]\nmodels = [\"LR\", \"DT\"]\ngroups = [\"F1\"]\n");
    let out = dir.path().join("bundle");
    cmd_run(&config, &out).unwrap();
    assert_eq!(load_bundle(&config, &out).unwrap().reports.len(), 2);

    let dt = format!("reports/{}.json", cell_name(GroupTag::F1, ModelKind::Dt));
    fs::remove_file(out.join(dt)).unwrap();
    match cmd_tables(&config, &out) {
        Err(e @ ReportError::IncompleteBundle(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected an incomplete bundle error, got {other:?}"),
    }
}

#[test]
fn failed_run_leaves_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml("[input]\npath = \"absent.csv\"\n", dir.path().to_path_buf()).unwrap();
    let out = dir.path().join("bundle");
    let err = cmd_run(&config, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let manifest = Manifest::load(&out).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.error.is_some());
}

#[test]
fn age_histogram_conserves_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_for(dir.path(), "[run]\nmodels = [\"LR\"]\ngroups = [\"F1\"]\n");
    let out = dir.path().join("bundle");
    cmd_run(&config, &out).unwrap();
    let summary: CohortSummary =
        serde_json::from_str(&common::read(&out.join("cohort_summary.json"))).unwrap();
    assert_eq!(summary.n, 120);
    let bins = summary.age_histogram.expect("synthetic cohorts carry ages");
    assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), summary.n);
    let plot = common::read(&out.join("plotdata/age_histogram.tsv"));
    let counted: usize = plot
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("bin_start"))
        .map(|l| l.rsplit('\t').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counted, 120);
}
