//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use ptrs::curation::GroupTag;
use ptrs::evaluation::bootstrap::{bootstrap_ci, resample_indices, BootstrapConfig};
use ptrs::evaluation::{
    auc, confusion, fit_fold, run_oof, stratified_kfold, threshold_metrics, Metric, MetricValue,
};
use ptrs::ingest::{parse_semiquant, parse_visual, SemiQuantValue};
use ptrs::models::logistic::{gradient, objective, sigmoid};
use ptrs::models::{compute_class_weights, fit_pipeline, ModelKind, ModelSpec};
use ptrs::report::{cell_stream, cmd_run, cmd_synth, ExperimentConfig, Manifest};
use ptrs::rng::Substream;
use ptrs::synth::SynthConfig;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn check_time(limit: Duration, elapsed: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

// 1 -------------------------------------------------------------------------

fn auc_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    let mut tie_heavy = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let prev = rng.random_range(0.1..0.9);
        let y = random_labels(&mut rng, n, prev);
        let p: Vec<f64> = if case % 2 == 0 {
            tie_heavy += 1;
            let levels = rng.random_range(1..=5);
            (0..n).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let fast = auc(&y, &p).unwrap();
        let slow = pairwise_auc(&y, &p).unwrap();
        worst = worst.max((fast - slow).abs());
    }
    let (fast_enough, t) = check_time(Duration::from_secs(5), start.elapsed());
    outcome(
        worst < 1e-12 && fast_enough,
        format!("100 instances ({tie_heavy} tie-heavy), max |delta| = {worst:e}, {t}"),
    )
}

// 2 -------------------------------------------------------------------------

fn metric_formula_equivalence() -> Outcome {
    let mut rng = rng(2);
    let mut mismatches = 0;
    let mut zero_div = 0;
    for case in 0..100 {
        let n = rng.random_range(1..=60);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let y_hat: Vec<u8> = if case % 10 == 0 {
            vec![0; n]
        } else {
            (0..n).map(|_| rng.random_range(0..=1)).collect()
        };
        let d = direct_metrics(&y, &y_hat);
        let c = confusion(&y, &y_hat);
        let m = threshold_metrics(&c);
        let counts_ok = (c.tp, c.tn, c.fp, c.fn_) == (d.tp, d.tn, d.fp, d.fn_) && c.total() == n;
        let plain = |v: MetricValue, want: Option<f64>| match (v, want) {
            (MetricValue::Defined(a), Some(b)) => a == b,
            (MetricValue::Undefined, None) => true,
            _ => false,
        };
        let precision_ok = match d.precision {
            Some(p) => m.precision == MetricValue::Defined(p),
            None => {
                zero_div += 1;
                m.precision == MetricValue::ZeroDivision(0.0)
            }
        };
        let f1_ok = match (d.f1, d.sensitivity) {
            (Some(f), _) => m.f1 == MetricValue::Defined(f),
            (None, None) => m.f1 == MetricValue::Undefined,
            (None, Some(_)) => m.f1 == MetricValue::ZeroDivision(0.0),
        };
        if !(counts_ok
            && plain(m.sensitivity, d.sensitivity)
            && plain(m.specificity, d.specificity)
            && precision_ok
            && f1_ok)
        {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && zero_div > 0,
        format!("100 instances, {mismatches} mismatches, {zero_div} zero-division cases flagged"),
    )
}

// 3 -------------------------------------------------------------------------

fn lr_gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(4..=50);
        let p = rng.random_range(1..=10);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y = random_labels(&mut rng, n, 0.5);
        let w = compute_class_weights(&y).unwrap();
        let theta: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = rng.random_range(0.1..10.0);
        let g = gradient(&theta, x.view(), &y, &w, c);
        let h = 1e-6;
        let fd: Vec<f64> = (0..=p)
            .map(|j| {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                (objective(&up, x.view(), &y, &w, c) - objective(&down, x.view(), &y, &w, c)) / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(diff / scale.max(1e-12));
    }

    let xs: Vec<f64> = vec![-3.0, -2.5, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 2.5, 3.0];
    let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
    let x = Array2::from_shape_vec((xs.len(), 1), xs).unwrap();
    let pipe = fit_pipeline(&ModelSpec::fixed(ModelKind::Lr), x.view(), &y, Substream::root(0)).unwrap();
    let in_sample = auc(&y, &pipe.predict_proba(x.view()).unwrap()).unwrap();
    let (fast_enough, t) = check_time(Duration::from_secs(10), start.elapsed());
    outcome(
        worst < 1e-5 && in_sample == 1.0 && fast_enough,
        format!("max relative gradient error {worst:.2e} over 20 instances, separable 1-D in-sample AUC {in_sample}, {t}"),
    )
}

// 4 -------------------------------------------------------------------------

fn protocol_invariants() -> Outcome {
    let mut rng = rng(4);
    let mut unbalanced = 0;
    for _ in 0..50 {
        let n = rng.random_range(20..=300);
        let prev = rng.random_range(0.1..0.9);
        let y = random_labels(&mut rng, n, prev);
        let folds = stratified_kfold(&y, 5, 42).unwrap();
        for class in 0..2u8 {
            let n_c = y.iter().filter(|&&v| v == class).count();
            let lo = n_c / 5;
            let hi = n_c.div_ceil(5);
            for counts in folds.class_counts(&y) {
                let got = counts[class as usize];
                if got < lo || got > hi {
                    unbalanced += 1;
                }
            }
        }
    }

    let (_, ds) = cohort(&SynthConfig {
        n: 80,
        prevalence: 0.6,
        seed: 4,
        ..SynthConfig::default()
    });
    let folds = stratified_kfold(&ds.labels, 5, 42).unwrap();
    let mut coverage_failures = 0;
    for model in ModelKind::ALL {
        let oof = run_oof(
            ds.matrix(GroupTag::F3).view(),
            &ds.labels,
            &ds.row_ids,
            &ModelSpec::fixed(model),
            &folds,
            GroupTag::F3,
            cell_stream(42, GroupTag::F3, model),
        )
        .unwrap();
        let ids: BTreeSet<&str> = oof.entries.iter().map(|e| e.record_id.as_str()).collect();
        let aligned = oof
            .entries
            .iter()
            .enumerate()
            .all(|(i, e)| e.record_id == ds.row_ids[i] && e.fold == folds.fold_of[i] && e.p_hat.is_finite());
        if oof.len() != ds.n_rows() || ids.len() != ds.n_rows() || !aligned {
            coverage_failures += 1;
        }
    }

    // Perturb only the held-out rows and refit: the fold's pipeline must not move.
    let x = ds.matrix(GroupTag::F3);
    let mut leaks = 0;
    for fold in 0..folds.k {
        let mut perturbed = x.clone();
        for i in folds.test_rows(fold) {
            for v in perturbed.row_mut(i) {
                *v = *v * 1000.0 + 17.0;
            }
        }
        for model in ModelKind::ALL {
            let spec = ModelSpec::fixed(model);
            let stream = cell_stream(42, GroupTag::F3, model);
            let a = fit_fold(x.view(), &ds.labels, &spec, &folds, fold, stream).unwrap();
            let b = fit_fold(perturbed.view(), &ds.labels, &spec, &folds, fold, stream).unwrap();
            let bits = |p: &ptrs::models::FittedPipeline| serde_json::to_string(&p.standardizer).unwrap();
            if bits(&a) != bits(&b) || a != b {
                leaks += 1;
            }
        }
    }
    outcome(
        unbalanced == 0 && coverage_failures == 0 && leaks == 0,
        format!(
            "50 label vectors, {unbalanced} fold/class counts off proportion; OOF coverage failures {coverage_failures}/5 models; leakage differences {leaks}/25 fold-model fits"
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn bootstrap_correctness() -> Outcome {
    let start = Instant::now();

    // (a) perfect predictions: AUC and F1 are 1 on every resample
    let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 != 0)).collect();
    let p: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let cfg = BootstrapConfig::default();
    let a_auc = bootstrap_ci(&y, &p, Metric::Auc, 0.5, &cfg).unwrap();
    let a_f1 = bootstrap_ci(&y, &p, Metric::F1, 0.5, &cfg).unwrap();
    let a_ok = (a_auc.low, a_auc.high) == (Some(1.0), Some(1.0)) && (a_f1.low, a_f1.high) == (Some(1.0), Some(1.0));

    // (b) naive oracle on an n = 30 fixture with B = 200
    let mut r = rng(5);
    let y = random_labels(&mut r, 30, 0.4);
    let p: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
    let cfg = BootstrapConfig {
        resamples: 200,
        alpha: 0.05,
        seed: 42,
    };
    let got = bootstrap_ci(&y, &p, Metric::Auc, 0.5, &cfg).unwrap();
    let mut draw = cfg.stream().rng();
    let resamples: Vec<Vec<usize>> = (0..200).map(|_| (0..30).map(|_| draw.random_range(0..30)).collect()).collect();
    let mut values = Vec::new();
    for idx in &resamples {
        let yb: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let pb: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        if let Some(v) = pairwise_auc(&yb, &pb) {
            values.push(v);
        }
    }
    let discarded = 200 - values.len();
    values.sort_by(f64::total_cmp);
    let want = (naive_quantile(&values, 0.025), naive_quantile(&values, 0.975));
    let b_ok = got.low == Some(want.0) && got.high == Some(want.1) && got.discarded == discarded;
    // the library's draw helper follows the same order
    let mut again = cfg.stream().rng();
    let b_ok = b_ok && resample_indices(&mut again, 30) == resamples[0];

    // (c) coverage of the implied AUC of one planted biomarker
    let normal = Normal::standard();
    let mut covered = 0;
    let mut implied = 0.0;
    for rep in 0..100u64 {
        let config = SynthConfig {
            n: 400,
            prevalence: 0.5,
            missing_rate: 0.0,
            semiquant_rate: 0.0,
            seed: 1000 + rep,
            ..SynthConfig::default()
        };
        let (c, ds) = cohort(&config);
        implied = c.sidecar.implied_auc("leukocytes").unwrap();
        let j = ds.feature_names(GroupTag::F3).iter().position(|n| n == "leukocytes").unwrap();
        let scores: Vec<f64> = ds
            .matrix(GroupTag::F3)
            .column(j)
            .iter()
            .map(|v| sigmoid((v - 40.0) / 15.0))
            .collect();
        let ci = bootstrap_ci(
            &ds.labels,
            &scores,
            Metric::Auc,
            0.5,
            &BootstrapConfig {
                resamples: 1000,
                alpha: 0.05,
                seed: rep,
            },
        )
        .unwrap();
        if ci.low.unwrap() <= implied && implied <= ci.high.unwrap() {
            covered += 1;
        }
    }
    let check = normal.cdf(0.954 / std::f64::consts::SQRT_2);
    let (fast_enough, t) = check_time(Duration::from_secs(180), start.elapsed());
    outcome(
        a_ok && b_ok && covered >= 85 && (implied - check).abs() < 1e-12 && fast_enough,
        format!(
            "(a) zero-width {a_ok}; (b) oracle match {b_ok} ({discarded} discarded); (c) coverage {covered}/100 of implied AUC {implied:.4}; {t}"
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn oof_auc(config: &SynthConfig, model: ModelKind) -> f64 {
    let (_, ds) = cohort(config);
    let folds = stratified_kfold(&ds.labels, 5, 42).unwrap();
    let oof = run_oof(
        ds.matrix(GroupTag::F3).view(),
        &ds.labels,
        &ds.row_ids,
        &ModelSpec::fixed(model),
        &folds,
        GroupTag::F3,
        cell_stream(42, GroupTag::F3, model),
    )
    .unwrap();
    auc(&oof.labels(), &oof.scores()).unwrap()
}

fn planted_signal() -> Outcome {
    let normal = Normal::standard();
    let delta = std::f64::consts::SQRT_2 * normal.inverse_cdf(0.75);
    let planted: Vec<f64> = (0..5)
        .map(|seed| {
            oof_auc(
                &SynthConfig {
                    n: 500,
                    prevalence: 0.5,
                    biomarker_signal: delta,
                    seed,
                    ..SynthConfig::default()
                },
                ModelKind::Rf,
            )
        })
        .collect();
    let planted_median = median(planted);
    // best achievable AUC from the three planted biomarkers alone
    let bayes = normal.cdf(delta * 3f64.sqrt() / std::f64::consts::SQRT_2);

    let mut null_medians = Vec::new();
    for model in ModelKind::ALL {
        let aucs: Vec<f64> = (0..20)
            .map(|seed| {
                oof_auc(
                    &SynthConfig {
                        n: 500,
                        prevalence: 0.5,
                        biomarker_signal: 0.0,
                        reported_signal: 0.0,
                        seed: 500 + seed,
                        ..SynthConfig::default()
                    },
                    model,
                )
            })
            .collect();
        null_medians.push((model, median(aucs)));
    }
    let null_ok = null_medians.iter().all(|(_, m)| (0.40..=0.60).contains(m));
    let nulls: Vec<String> = null_medians.iter().map(|(m, v)| format!("{m} {v:.3}")).collect();
    outcome(
        planted_median >= 0.90 && null_ok,
        format!(
            "planted RF median OOF AUC {planted_median:.4} (need >= 0.90; three-biomarker Bayes bound {bayes:.4}); null medians {}",
            nulls.join(", ")
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn paper_scale_smoke() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let synth = SynthConfig::default();
    cmd_synth(&synth, &data).unwrap();
    let config = ExperimentConfig::from_toml("[input]\npath = \"data/cohort.csv\"\n", dir.path().to_path_buf()).unwrap();

    let start = Instant::now();
    let first = cmd_run(&config, &dir.path().join("out1"));
    let (fast_enough, t) = check_time(Duration::from_secs(60), start.elapsed());
    let second = cmd_run(&config, &dir.path().join("out2"));
    let (first, second): (Manifest, Manifest) = match (first, second) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("run failed: {e}")),
    };

    let mut expected: Vec<String> = vec![
        "curation_report.json".into(),
        "cohort_summary.json".into(),
        "plotdata/age_histogram.tsv".into(),
        "plotdata/auc_ci.tsv".into(),
        "plotdata/sens_spec.tsv".into(),
    ];
    for g in GroupTag::ALL {
        expected.push(format!("tables/table_{g}.tsv"));
        expected.push(format!("tables/table_{g}_extended.tsv"));
        for m in ModelKind::ALL {
            expected.push(format!("reports/{g}_{}.json", m.code()));
            expected.push(format!("oof/{g}_{}.csv", m.code()));
        }
    }
    let missing: Vec<&String> = expected.iter().filter(|f| !first.files.contains_key(*f)).collect();
    let auc_rows = read(&dir.path().join("out1/plotdata/auc_ci.tsv"))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("model"))
        .count();
    let table_rows: Vec<String> = read(&dir.path().join("out1/tables/table_F3.tsv"))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("model"))
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect();
    let identical = first.files == second.files && first.config_sha256 == second.config_sha256;
    outcome(
        fast_enough
            && first.complete
            && missing.is_empty()
            && auc_rows == 15
            && table_rows == ["LR", "DT", "RF", "XGB", "KNN"]
            && identical,
        format!(
            "n = 93 ({} positive), 5x3 grid with B = 1000 in {t}; {} files, missing {missing:?}; AUC plot rows {auc_rows}; re-run digests identical {identical}",
            synth.n_positive(),
            first.files.len()
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn parser_corpus() -> Outcome {
    let text = read(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/parser_corpus.tsv"));
    let (mut visual, mut semi, mut failures) = (0, 0, Vec::new());
    let mut cases = BTreeSet::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [kind, input, expected, case] = fields[..] else {
            failures.push(format!("malformed line {line:?}"));
            continue;
        };
        cases.insert(case.to_string());
        let ok = match kind {
            "visual" => {
                visual += 1;
                let v = parse_visual(input);
                let got = format!(
                    "{},{}",
                    v.color.name(),
                    serde_json::to_value(v.cloudiness).unwrap().as_str().unwrap()
                );
                got == expected
            }
            "semiquant" => {
                semi += 1;
                match (parse_semiquant(input), expected) {
                    (SemiQuantValue::Missing, "missing") => true,
                    (SemiQuantValue::Value { value, was_inequality }, e) => {
                        let (v, ineq) = e.split_once(',').unwrap();
                        value == v.parse::<f64>().unwrap() && was_inequality == (ineq == "true")
                    }
                    _ => false,
                }
            }
            _ => false,
        };
        if !ok {
            failures.push(format!("{kind} {input:?}"));
        }
    }
    let required = ["parenthetical-noise", "separator-slash", "decimal-comma", "empty"];
    let has_required = required.iter().all(|c| cases.contains(*c));
    outcome(
        visual >= 20 && semi >= 12 && failures.is_empty() && has_required,
        format!("{visual} visual and {semi} semi-quantitative fixtures, failures {failures:?}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("AUC oracle equivalence", auc_oracle_equivalence),
        ("metric formula equivalence", metric_formula_equivalence),
        ("LR gradient check", lr_gradient_check),
        ("protocol invariants", protocol_invariants),
        ("bootstrap correctness", bootstrap_correctness),
        ("planted-signal discrimination", planted_signal),
        ("paper-scale smoke", paper_scale_smoke),
        ("parser corpus", parser_corpus),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
