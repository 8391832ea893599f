use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lda-search"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, rows: &str) -> String {
    let path = dir.join("data.csv").to_string_lossy().into_owned();
    let o = bin(&["synth", "--out", &path, "--seed", "3", "--rows", rows]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

#[test]
fn summarize_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "300");
    let out = dir.path().join("sum");
    let o = bin(&[
        "summarize",
        "--input",
        &data,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["records"], 300);
    assert_eq!(v["summary"]["total"], 300);
    assert!(v["summary"]["by_race"]["White"]["share"].as_f64().unwrap() > 0.3);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&[
        "summarize",
        "--input",
        "/no/such/file.csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"));

    let header_only = dir.path().join("h.csv");
    std::fs::write(&header_only, lda_cli::synth::HEADER.join(",") + "\n").unwrap();
    let o = bin(&[
        "summarize",
        "--input",
        header_only.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zero usable rows"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin(&["search", "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "50");
    let o = bin(&["search", "--input", &data, "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
    let o = bin(&[
        "search",
        "--input",
        &data,
        "--out",
        "x",
        "--seed",
        "1",
        "--families",
        "svm",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = bin(&["synth", "--out", "x.csv", "--seed", "1", "--strength", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_candidate_search_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "400");
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = bin(&[
            "search",
            "--input",
            &data,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
            "--families",
            "lr",
            "--configs",
            "race_blind",
            "--resamples",
            "2",
            "--cap",
            "5000000",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("wrote"));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let tradeoff = std::fs::read_to_string(a.join("tradeoff.csv")).unwrap();
    assert_eq!(tradeoff.lines().count(), 2);
    assert!(tradeoff.contains("LR/race_blind"));
    for f in lda_core::report::REPORT_FILES {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn all_candidates_failing_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "200");
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"hyperparams": {"KNN": {"family": "KNN", "k": 2}}}"#,
    )
    .unwrap();
    let o = bin(&[
        "search",
        "--config",
        config.to_str().unwrap(),
        "--input",
        &data,
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--seed",
        "1",
        "--families",
        "KNN",
        "--resamples",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    use lda_cli::{FileConfig, SearchArgs, SearchOptions};
    let file = FileConfig {
        input: Some("from_file.csv".into()),
        out: Some("file_out".into()),
        seed: Some(5),
        resamples: Some(4),
        families: Some(vec!["NB".into()]),
        ..FileConfig::default()
    };
    let args = SearchArgs {
        seed: Some(7),
        cap: Some("250.50".into()),
        ..Default::default()
    };
    let o = SearchOptions::resolve(args, &file).unwrap();
    assert_eq!(o.seed, 7);
    assert_eq!(o.resamples, 4);
    assert_eq!(o.ingest.input, Path::new("from_file.csv"));
    assert_eq!(o.families, vec![lda_core::ModelFamily::NaiveBayes]);
    assert_eq!(o.cap, lda_core::Cents(25_050));
    assert_eq!(o.train_frac, 0.8);
    assert_eq!(o.search_config(500).sample_size, 500);
    assert_eq!(o.search_config(500_000).sample_size, 100_000);
}

#[test]
fn schema_overrides_rename_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "100");
    let text = std::fs::read_to_string(&data)
        .unwrap()
        .replacen("applicant_race_1", "race_code", 1);
    std::fs::write(&data, text).unwrap();
    let out = dir.path().join("s");
    let o = bin(&[
        "summarize",
        "--input",
        &data,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&[
        "summarize",
        "--input",
        &data,
        "--out",
        out.to_str().unwrap(),
        "--schema",
        r#"{"race": "race_code"}"#,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn partial_hyperparameters_fill_from_defaults() {
    use lda_cli::FileConfig;
    use lda_core::models::{forest::ForestParams, Hyperparams, ModelFamily};
    let c: FileConfig =
        serde_json::from_str(r#"{"hyperparams": {"RF": {"family": "RF", "n_trees": 7}}}"#).unwrap();
    let want = Hyperparams::RandomForest(ForestParams {
        n_trees: 7,
        ..Default::default()
    });
    assert_eq!(c.hyperparams.unwrap()[&ModelFamily::RandomForest], want);

    let typo = serde_json::from_str::<FileConfig>(
        r#"{"hyperparams": {"RF": {"family": "RF", "n_tress": 7}}}"#,
    );
    assert!(typo.is_err());
}
