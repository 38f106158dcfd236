use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crowdirt::commands::{pipeline, PipelineArgs};
use crowdirt::io::{load_fit, load_ratings_csv, ratings_csv_bytes};
use crowdirt_core::evaluate::{elpd_loo, ppc_report, LooUnit};
use crowdirt_core::math::derive_seed;
use crowdirt_core::sampler::SamplerConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdirt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn simulate(dir: &Path, model: &str, items: usize, raters: usize, seed: u64) -> PathBuf {
    let out = dir.join("sim");
    ok(&[
        "simulate", "--model", model, "--items", &items.to_string(), "--raters", &raters.to_string(), "--seed",
        &seed.to_string(), "--out", s(&out),
    ]);
    out.join("ratings.csv")
}

const SHORT: [&str; 6] = ["--chains", "2", "--warmup", "150", "--samples", "100"];

#[test]
fn simulate_complete_design_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "ABC", 100, 5, 3);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("item,rater,rating\n"));
    assert_eq!(text.lines().count(), 501);
    for side in ["truth_items.csv", "truth_raters.csv", "truth.json"] {
        assert!(path.with_file_name(side).exists(), "{side}");
    }
    let items = std::fs::read_to_string(path.with_file_name("truth_items.csv")).unwrap();
    assert_eq!(items.lines().count(), 101);
}

#[test]
fn two_row_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "r.csv", "item,rater,rating\na,x,1\nb,y,0\n");
    let data = load_ratings_csv(&p).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(data.num_items(), 2);
}

#[test]
fn bad_rating_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "r.csv", "item,rater,rating\na,x,1\na,y,0\nb,x,1\nb,y,2\n");
    let err = load_ratings_csv(&p).unwrap_err();
    assert!(err.to_string().contains(":5:"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let out = run(&["fit", "--model", "ABC", "--data", s(&p), "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line") || String::from_utf8_lossy(&out.stderr).contains(":5:"));
}

#[test]
fn header_must_match_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["rater,item,rating\nx,a,1\n", "a,x,1\n", "", "item,rater,rating,extra\na,x,1,0\n"] {
        let p = write(dir.path(), "r.csv", text);
        let err = load_ratings_csv(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text:?}: {err}");
    }
}

#[test]
fn short_row_and_empty_file_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "r.csv", "item,rater,rating\na,x\n");
    assert!(load_ratings_csv(&p).unwrap_err().to_string().contains(":2:"));
    let p = write(dir.path(), "r.csv", "item,rater,rating\n");
    assert_eq!(load_ratings_csv(&p).unwrap_err().exit_code(), 2);
}

#[test]
fn ratings_round_trip_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "item,rater,rating\nq7,ann,1\nq2,bob,0\nq7,bob,1\n\"a,b\",ann,0\n";
    let p = write(dir.path(), "r.csv", text);
    let data = load_ratings_csv(&p).unwrap();
    assert_eq!(ratings_csv_bytes(&data), text.as_bytes());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "ABC", 5, 3, 0);
    let out = run(&["fit", "--model", "Q", "--data", s(&data), "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["fit", "--model", "ABE", "--data", s(&data), "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("use AB"));
    let out = run(&["fit", "--model", "ABC", "--data", s(&dir.path().join("missing.csv")), "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["fit", "--model", "ABC", "--data", s(&data), "--chains", "0", "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn fit_defaults_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "ABC", 10, 3, 1);
    let out = dir.path().join("fit");
    ok(&["fit", "--model", "ABC", "--data", s(&data), "--out", s(&out)]);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["chains"], 4);
    assert_eq!(manifest["warmup_iters"], 1000);
    assert_eq!(manifest["sampling_iters"], 1000);
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 4001);
    assert!(draws.starts_with("chain,iter,pi,alpha_sens[1],"));
    let post = std::fs::read_to_string(out.join("category_posterior.csv")).unwrap();
    let mut n = 0;
    for line in post.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
        n += 1;
    }
    assert_eq!(n, 10);
    for f in ["diagnostics.json", "items.csv", "raters.csv", "sampler_stats.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "AB", 12, 4, 9);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let mut args = vec!["pipeline", "--model", "AB", "--data", s(&data), "--seed", "5", "--out", s(&out)];
        args.extend(SHORT);
        ok(&args);
        outputs.push(dir_bytes(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<_> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for f in ["draws.csv", "manifest.json", "ppc.json", "vote_histogram.csv", "loo.json", "category_posterior.csv"] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
}

#[test]
fn saved_draws_reproduce_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = simulate(dir.path(), "ABC", 15, 4, 2);
    let out = dir.path().join("p");
    let sampler = SamplerConfig { chains: 2, warmup_iters: 150, sampling_iters: 100, seed: 4, ..SamplerConfig::default() };
    let (fit, ppc, loo) = pipeline(&PipelineArgs {
        data: data_path.clone(),
        model: "ABC".into(),
        allow_adversarial: false,
        sampler,
        unit: LooUnit::Rating,
        out: out.clone(),
    })
    .unwrap();
    let (reloaded, _) = load_fit(&out).unwrap();
    assert_eq!(reloaded.layout, fit.layout);
    assert_eq!(reloaded.draws.values(), fit.draws.values());
    assert_eq!(reloaded.draws.stats, fit.draws.stats);
    assert_eq!(reloaded.draws.adaptation, fit.draws.adaptation);
    assert_eq!(reloaded.diagnostics, fit.diagnostics);
    assert_eq!(reloaded, fit);
    let data = load_ratings_csv(&data_path).unwrap();
    assert_eq!(elpd_loo(&reloaded, &data, LooUnit::Rating).unwrap(), loo);
    assert_eq!(ppc_report(&reloaded, &data, derive_seed(4, &[1])).unwrap(), ppc);

    // The standalone commands agree with the pipeline.
    let sep = dir.path().join("sep");
    ok(&["loo", "--data", s(&data_path), "--fit", s(&out), "--out", s(&sep)]);
    assert_eq!(std::fs::read(sep.join("loo.json")).unwrap(), std::fs::read(out.join("loo.json")).unwrap());
    let seed = derive_seed(4, &[1]).to_string();
    ok(&["ppc", "--data", s(&data_path), "--fit", s(&out), "--seed", &seed, "--out", s(&sep)]);
    assert_eq!(std::fs::read(sep.join("ppc.json")).unwrap(), std::fs::read(out.join("ppc.json")).unwrap());

    let loo_json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("loo.json")).unwrap()).unwrap();
    assert_eq!(loo_json["pareto_k"].as_array().unwrap().len(), 60);
}

#[test]
fn ppc_rejects_other_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&dir.path().join("a"), "ABC", 8, 3, 0);
    let b = simulate(&dir.path().join("b"), "ABC", 9, 3, 0);
    let out = dir.path().join("fit");
    let mut args = vec!["fit", "--model", "ABC", "--data", s(&a), "--out", s(&out)];
    args.extend(SHORT);
    ok(&args);
    let r = run(&["ppc", "--data", s(&b), "--fit", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(&["loo", "--data", s(&a), "--fit", s(&dir.path().join("nothing"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn compare_all_models_and_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "ABC", 12, 3, 7);
    let out = dir.path().join("cmp");
    let mut args = vec!["compare", "--data", s(&data), "--out", s(&out)];
    args.extend(SHORT);
    ok(&args);
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("comparison.json")).unwrap()).unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r["status"] == "ok"), "{rows:?}");
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);

    // 50 draws are too few for the predictive check: rows fail, table survives.
    let out = dir.path().join("cmp_fail");
    ok(&[
        "compare", "--data", s(&data), "--models", "ABC,AB", "--chains", "1", "--warmup", "50", "--samples", "50",
        "--out", s(&out),
    ]);
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("comparison.json")).unwrap()).unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["status"], "failed");
        assert!(r["elpd_loo"].is_null());
        assert!(r["error"].as_str().unwrap().contains("draws"));
    }
}

#[test]
fn train_experiment_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    ok(&[
        "train-experiment", "--trials", "32", "--dim", "3", "--rows", "40", "--chains", "1", "--warmup", "100",
        "--samples", "100", "--seed", "1", "--out", s(&out),
    ]);
    let csv = std::fs::read_to_string(out.join("train_results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 321);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("train_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"].as_array().unwrap().len(), 10);
}

#[test]
fn variants_lists_eighteen() {
    let out = ok(&["variants", "--items", "10", "--raters", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 19);
    assert!(text.lines().nth(1).unwrap().starts_with("ABCDE\t"));
}
