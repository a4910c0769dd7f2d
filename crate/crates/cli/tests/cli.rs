use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(path)
}

fn tabsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabsynth"))
        .args(args)
        .env_remove("TABSYNTH_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_prints_the_drop_program() {
    let out = tabsynth(&[
        "synth",
        path(&repo("corpus/micro/op01_drop.json")),
        "--approach",
        "search",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("program: drop(1)"), "{text}");
    assert!(text.contains("test 1: match"));
}

#[test]
fn synth_replays_the_item_totals_ground_truth() {
    let out = tabsynth(&["synth", path(&repo("corpus/micro/comp3_item_totals.json"))]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(!stdout(&out).contains("mismatch"));
}

#[test]
fn synth_reports_an_unsolved_scenario() {
    let out = tabsynth(&[
        "synth",
        path(&repo("corpus/regression/author_death_years.json")),
        "--max-expansions",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("no program: search stopped"));
}

#[test]
fn missing_scenario_file_is_an_ingestion_error() {
    let out = tabsynth(&["synth", "does/not/exist.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("No such file"), "{}", stderr(&out));
}

#[test]
fn empty_corpus_is_an_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tabsynth(&[
        "eval",
        path(dir.path()),
        "--out",
        path(&dir.path().join("reports")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("no scenario files"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(tabsynth(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        tabsynth(&["synth", "x.json", "--approach", "telepathy"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tabsynth(&["synth", "x.json", "--api-key", "secret"])
            .status
            .code(),
        Some(1)
    );
    assert!(tabsynth(&["--help"]).status.success());
}

#[test]
fn model_approaches_need_exactly_one_client() {
    let scenario = repo("corpus/micro/op01_drop.json");
    let none = tabsynth(&["synth", path(&scenario), "--approach", "llm_multi_a"]);
    assert_eq!(none.status.code(), Some(1));
    assert!(stderr(&none).contains("exactly one of --endpoint or --mock-script"));

    let both = tabsynth(&[
        "synth",
        path(&scenario),
        "--approach",
        "hybrid",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--model",
        "m",
        "--mock-script",
        path(&repo("mock/bundled_script.json")),
    ]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn endpoint_without_credential_is_a_config_error() {
    let out = tabsynth(&[
        "synth",
        path(&repo("corpus/micro/op01_drop.json")),
        "--approach",
        "llm_one_shot",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--model",
        "m",
        "--api-key-env",
        "TABSYNTH_TEST_UNSET_KEY",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("TABSYNTH_TEST_UNSET_KEY"),
        "{}",
        stderr(&out)
    );
}

fn read_reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn search_eval_twice_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = repo("corpus");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = tabsynth(&[
            "eval",
            path(&corpus),
            "--max-expansions",
            "300",
            "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        runs.push(read_reports(&out_dir));
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["scores.csv", "summary.txt"]);
}

#[test]
fn hybrid_eval_with_the_mock_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "4")] {
        let out_dir = dir.path().join(name);
        let out = tabsynth(&[
            "eval",
            path(&repo("corpus")),
            "--approach",
            "hybrid",
            "--mock-script",
            path(&repo("mock/bundled_script.json")),
            "--max-expansions",
            "300",
            "--jobs",
            jobs,
            "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        runs.push(read_reports(&out_dir));
    }
    assert_eq!(runs[0], runs[1]);
    let routing = String::from_utf8(
        runs[0]
            .iter()
            .find(|(n, _)| n == "routing.txt")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert!(routing.contains("% test cases passed to LLM"));
}

#[test]
fn import_converts_a_legacy_file() {
    let dir = tempfile::tempdir().unwrap();
    let legacy = dir.path().join("scenario.txt");
    fs::write(
        &legacy,
        "name: 'swap'\nsource_dataset: 'legacy'\nexample_input: [['a', 'b']]\nexample_output: [['b', 'a']]\n\
         test_input: [['c', 'd']]\ntest_output: [['d', 'c']]\n",
    )
    .unwrap();
    let canonical = dir.path().join("swap.json");
    let out = tabsynth(&["import", path(&legacy), "--out", path(&canonical)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&canonical).unwrap()).unwrap();
    assert_eq!(doc["name"], "swap");
    assert_eq!(doc["source_dataset"], "legacy");
    assert_eq!(
        doc["tests"][0]["expected_output"],
        serde_json::json!([["d", "c"]])
    );

    // the converted file is a valid scenario
    let solved = tabsynth(&["synth", path(&canonical)]);
    assert!(solved.status.success(), "{}", stdout(&solved));
}

#[test]
fn import_rejects_a_broken_literal() {
    let dir = tempfile::tempdir().unwrap();
    let legacy = dir.path().join("broken.txt");
    fs::write(&legacy, "name: 'x'\nexample_input: [['a', 'b']\n").unwrap();
    let out = tabsynth(&["import", path(&legacy)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_rebuilds_the_accuracy_table() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(
        &scores,
        "name,dataset,approach,table_accuracy,rows,flags\n\
         a,A,search,1,3,\n\
         b,A,search,0,1,no_program\n\
         c,B,search,0.5,2,\n",
    )
    .unwrap();
    let out = tabsynth(&["report", path(&scores)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("Approach") && lines[0].ends_with("Overall (Weighted Avg.)"));
    // A: 3 of 4 rows; B: 0.5; weights 2 and 1 scenarios
    let cells: Vec<&str> = lines[1].split_whitespace().collect();
    assert_eq!(cells, ["search", "0.750", "0.500", "0.667"]);

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "name,dataset,approach,table_accuracy,rows,flags\na,A,search,oops,1,\n",
    )
    .unwrap();
    assert_eq!(tabsynth(&["report", path(&bad)]).status.code(), Some(2));
}

#[test]
fn report_reads_eval_output() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    let eval = tabsynth(&["eval", path(&repo("corpus/micro")), "--out", path(&reports)]);
    assert!(eval.status.success());
    let out = tabsynth(&["report", path(&reports.join("scores.csv"))]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().nth(1).unwrap().ends_with("1.000"));
}
