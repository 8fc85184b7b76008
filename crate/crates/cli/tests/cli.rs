use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use esrn::dataset::Sample;
use esrn::models::{predict, ModelId};
use esrn_cli::RunConfig;

fn esrn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esrn")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = esrn(args);
    assert!(
        out.status.success(),
        "esrn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_samples(path: &Path) -> Vec<Sample> {
    esrn_cli::read_samples(path).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn noiseless_synth_reproduces_the_formula() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--output-dir", s(dir.path()), "synth", "--formula", "fischer1979", "--n", "50", "--noise", "0", "--seed", "4"]);
    let data = read_samples(&dir.path().join("synthetic.csv"));
    assert_eq!(data.len(), 50);
    for x in &data {
        assert_eq!(x.dl, predict(ModelId::Fischer1979, x).dl);
        assert!((0.20..=867.0).contains(&x.w) && (0.002..=0.553).contains(&x.ustar));
    }
}

#[test]
fn equal_configs_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--output-dir", s(dir.path()), "synth", "--n", "30", "--seed", "9"];
    ok(&args);
    let csv1 = fs::read(dir.path().join("synthetic.csv")).unwrap();
    let manifest1 = fs::read(dir.path().join("manifest_synth.json")).unwrap();
    ok(&args);
    assert_eq!(fs::read(dir.path().join("synthetic.csv")).unwrap(), csv1);
    assert_eq!(fs::read(dir.path().join("manifest_synth.json")).unwrap(), manifest1);
}

#[test]
fn clean_reports_stage_counts_and_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let mut text = String::from("w,d,U,Ustar,Dl\n");
    for i in 0..20 {
        let k = 1.0 + i as f64 * 0.1;
        text.push_str(&format!("{},{},{},{},{}\n", 20.0 * k, 1.0 * k, 0.5, 0.05 * k, 10.0 * k));
    }
    text.push_str("30,1,0.5,,12\n");
    text.push_str("30,-1,0.5,0.05,12\n");
    text.push_str("1e6,1,0.5,0.05,12\n");
    fs::write(&raw, text).unwrap();
    let out = dir.path().join("out");
    ok(&["--output-dir", s(&out), "clean", "--input", s(&raw)]);
    let m = json(&out.join("manifest_clean.json"));
    let counts = &m["details"]["row_counts"];
    assert_eq!(counts["parsed"], 23);
    assert_eq!(counts["cleaned"], 21);
    assert_eq!(counts["filtered"], 20);
    assert_eq!(read_samples(&out.join("cleaned.csv")).len(), 20);
    let stats = json(&out.join("stats.json"));
    assert_eq!(stats["columns"]["w"]["count"], 20);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "w,d,U,Ustar,Dl\n").unwrap();
    let failed = esrn(&["--output-dir", s(&dir.path().join("e")), "clean", "--input", s(&empty)]);
    assert!(!failed.status.success());
}

#[test]
fn split_writes_both_sets_and_indices() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--output-dir", s(dir.path()), "synth", "--n", "40", "--seed", "1"]);
    let input = dir.path().join("synthetic.csv");
    ok(&["--output-dir", s(dir.path()), "split", "--input", s(&input), "--fraction", "0.7", "--seed", "3"]);
    let train = read_samples(&dir.path().join("train.csv"));
    let test = read_samples(&dir.path().join("test.csv"));
    assert_eq!((train.len(), test.len()), (28, 12));
    let m = json(&dir.path().join("manifest_split.json"));
    assert_eq!(m["details"]["train_indices"].as_array().unwrap().len(), 28);
    assert_eq!(m["details"]["test_indices"].as_array().unwrap().len(), 12);
    assert_eq!(m["seeds"]["split"], 3);
}

fn prepare_split(dir: &Path, formula: &str, n: &str) {
    ok(&["--output-dir", s(dir), "synth", "--formula", formula, "--n", n, "--seed", "2"]);
    ok(&["--output-dir", s(dir), "split", "--input", s(&dir.join("synthetic.csv"))]);
}

fn evolve_args<'a>(dir: &'a Path, out: &'a Path, gens: &'a str) -> Vec<String> {
    [
        "--output-dir",
        s(out),
        "evolve",
        "--train",
        s(&dir.join("train.csv")),
        "--test",
        s(&dir.join("test.csv")),
        "--pop",
        "4",
        "--gens",
        gens,
        "--topology",
        "3,2,1",
        "--metric",
        "r2",
        "--seed",
        "5",
    ]
    .map(String::from)
    .to_vec()
}

#[test]
fn single_generation_evolve_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    prepare_split(dir.path(), "esrn_final", "40");
    let out = dir.path().join("ev");
    let args = evolve_args(dir.path(), &out, "1");
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = fs::read_to_string(out.join("generations.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "generation,r2_train,r2_test");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,"));
    for f in ["best_expression.txt", "network.json", "generations.json", "manifest_evolve.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let net: esrn::network::SymbolicNetwork =
        serde_json::from_str(&fs::read_to_string(out.join("network.json")).unwrap()).unwrap();
    net.validate(Some(&[3, 2, 1])).unwrap();
}

#[test]
fn seeded_evolve_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    prepare_split(dir.path(), "esrn_final", "40");
    let runs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let args = evolve_args(dir.path(), &out, "3");
            ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
            fs::read(out.join("generations.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn bench_covers_the_catalog_and_ranks_the_true_formula_first() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--output-dir", s(dir.path()), "synth", "--n", "200", "--noise", "0.05", "--seed", "8"]);
    let data = dir.path().join("synthetic.csv");
    let out = dir.path().join("bench");
    ok(&["--output-dir", s(&out), "bench", "--models", "all", "--data", s(&data)]);

    let taylor = fs::read_to_string(out.join("taylor.csv")).unwrap();
    assert_eq!(taylor.lines().next().unwrap(), "model,std,correlation,centered_rms");
    assert_eq!(taylor.lines().count(), 23);
    assert!(out.join("dr_hist.csv").exists());
    assert_eq!(json(&out.join("catalog.json")).as_array().unwrap().len(), 22);
    let predictions = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().next().unwrap(), "sample,model,Dl_pred");
    assert_eq!(predictions.lines().count(), 1 + 22 * 200);

    let report = json(&out.join("eval_report.json"));
    let r2 = |m: &str| report[m]["r2"].as_f64().unwrap();
    assert!(r2("esrn_final") > r2("memarzadeh_a"));
    assert!(r2("esrn_final") > r2("memarzadeh_b"));
    assert!(r2("esrn_final") > 0.95);
}

#[test]
fn bench_accepts_a_subset_and_a_network() {
    let dir = tempfile::tempdir().unwrap();
    prepare_split(dir.path(), "esrn_final", "40");
    let ev = dir.path().join("ev");
    let args = evolve_args(dir.path(), &ev, "1");
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let out = dir.path().join("bench");
    ok(&[
        "--output-dir",
        s(&out),
        "bench",
        "--models",
        "elder1959,esrn_final",
        "--data",
        s(&dir.path().join("test.csv")),
        "--network",
        s(&ev.join("network.json")),
    ]);
    let taylor = fs::read_to_string(out.join("taylor.csv")).unwrap();
    let models: Vec<&str> = taylor.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["elder1959", "esrn_final", "esrn_network"]);

    let bad = esrn(&["--output-dir", s(&out), "bench", "--models", "nope", "--data", s(&dir.path().join("test.csv"))]);
    assert!(!bad.status.success());
}

#[test]
fn config_file_round_trips_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "[synth]\nn = 12\nseed = 77\n[evolve.search]\npopulation = 8\n").unwrap();
    let out = esrn(&["--config", s(&path), "config"]);
    assert!(out.status.success());
    let echoed: RunConfig = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(echoed.synth.n, 12);
    assert_eq!(echoed.evolve.search.population, 8);
    assert_eq!(echoed.evolve.search.generations, 200);
    assert_eq!(echoed, RunConfig::load(&path).unwrap());

    let run = dir.path().join("run");
    ok(&["--config", s(&path), "--output-dir", s(&run), "synth", "--seed", "78"]);
    let m = json(&run.join("manifest_synth.json"));
    assert_eq!(m["config"]["synth"]["n"], 12);
    assert_eq!(m["config"]["synth"]["seed"], 78);
    assert_eq!(m["config"]["split"]["fraction"], 0.7);
    assert_eq!(read_samples(&run.join("synthetic.csv")).len(), 12);
}

#[test]
fn unreadable_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert!(!esrn(&["--output-dir", s(dir.path()), "split", "--input", s(&missing)]).status.success());
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 3\n").unwrap();
    assert!(!esrn(&["--config", s(&bad), "config"]).status.success());
}
