use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edgeadapt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeadapt"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn front_in(dir: &Path) {
    let out = edgeadapt(dir, &["search", "--sampler", "random", "--budget", "300", "--seed", "1", "--out", "t.jsonl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = edgeadapt(dir, &["front", "extract", "--trials", "t.jsonl", "--out", "front.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn budget_fraction_of_pedestrian_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgeadapt(dir.path(), &["search", "--sampler", "nsga2", "--budget-frac", "0.1", "--seed", "7", "--out", "t.jsonl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.path().join("t.jsonl")).unwrap().lines().count(), 340);
    assert!(dir.path().join("t.jsonl.manifest.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgeadapt(dir.path(), &["search", "--budget", "10", "--budget-frac", "0.1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = edgeadapt(dir.path(), &["search", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = edgeadapt(dir.path(), &["report", "--input", "x", "--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn over_tight_thresholds_exit_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    front_in(dir.path());
    fs::write(
        dir.path().join("tight.toml"),
        "[[modes]]\nname = \"impossible\"\nweights = [1.0, 0.0, 0.0]\nthresholds = [0.99, 0.0, 0.0]\n",
    )
    .unwrap();
    let out = edgeadapt(dir.path(), &["modes", "select", "--front", "front.json", "--modes", "tight.toml", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no front member survives the thresholds"), "{}", stderr(&out));
    assert!(!dir.path().join("m.json").exists());
    assert!(!dir.path().join("m.json.manifest.json").exists());
}

#[test]
fn invalid_fsm_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "states = ['a', 'b', 'c']\ninitial = 'a'\n\
         [[transitions]]\nfrom = 'a'\nto = 'b'\nlo = 1.0\nhi = 4.0\n\
         [[transitions]]\nfrom = 'a'\nto = 'b'\nlo = 2.0\n",
    )
    .unwrap();
    let out = edgeadapt(dir.path(), &["fsm", "validate", "--fsm", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("can both be enabled") && err.contains("`c` is unreachable"), "{err}");

    let out = edgeadapt(dir.path(), &["fsm", "validate"]);
    assert!(out.status.success());
}

#[test]
fn repeats_write_one_log_per_seed_and_a_frequency_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgeadapt(
        dir.path(),
        &["search", "--budget", "200", "--seed", "4", "--repeats", "3", "--out", "trials.jsonl"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for seed in 4..7 {
        assert!(dir.path().join(format!("trials.seed{seed}.jsonl")).exists());
    }
    let summary = fs::read_to_string(dir.path().join("trials.mode-frequency.csv")).unwrap();
    assert!(summary.starts_with("mode,configuration,count,repeats,tied\n"));
    for mode in ["power-saving", "low-energy", "high-accuracy", "high-rate", "balanced"] {
        assert!(summary.lines().any(|l| l.starts_with(&format!("{mode},"))), "{summary}");
    }
    for line in summary.lines().skip(1) {
        let fields: Vec<&str> = line.rsplitn(4, ',').collect();
        // repeats column
        assert_eq!(fields[1], "3");
    }
}

#[test]
fn full_workflow_and_report_views() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    front_in(d);
    let ok = |args: &[&str]| {
        let out = edgeadapt(d, args);
        assert!(out.status.success(), "{:?}: {}", args, stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    ok(&["modes", "select", "--front", "front.json", "--out", "modes.json"]);
    ok(&["simulate", "--scenario", "weekends", "--modes-table", "modes.json", "--seed", "2", "--out", "a.json"]);
    let mut reports = vec!["a.json".to_string()];
    for mode in ["power-saving", "low-energy", "high-accuracy", "high-rate"] {
        let name = format!("{mode}.json");
        ok(&["simulate", "--scenario", "weekends", "--static", mode, "--modes-table", "modes.json", "--seed", "2", "--out", &name]);
        reports.push(name);
    }
    let mut args = vec!["compare", "--out", "cmp.json", "--reports"];
    args.extend(reports.iter().map(String::as_str));
    ok(&args);

    let csv = ok(&["report", "--input", "cmp.json", "--format", "csv"]);
    let blocks: Vec<&str> = csv.split("\n\n").collect();
    assert_eq!(blocks[0].lines().count(), 1 + 5);
    assert_eq!(blocks[1].lines().count(), 1 + 4);
    let radar = ok(&["report", "--input", "cmp.json", "--format", "csv", "--view", "radar"]);
    assert_eq!(radar.lines().next(), Some("subject,acc,eng,rate"));
    let boxplot = ok(&["report", "--input", "cmp.json", "--format", "csv", "--view", "boxplot"]);
    assert_eq!(boxplot.lines().count(), 1 + 5 * 8);
    let windows = ok(&["report", "--input", "a.json", "--format", "csv"]);
    assert_eq!(windows.lines().count(), 1 + 24 + 1 + 2);

    let out = edgeadapt(d, &["report", "--input", "a.json", "--view", "radar"]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(d.join("flat.toml"), format!("name = \"flat\"\nhours = [{}]\n", vec!["\"zero\""; 24].join(", "))).unwrap();
    ok(&["simulate", "--scenario", "flat.toml", "--modes-table", "modes.json", "--out", "flat.json"]);
    let flat: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("flat.json")).unwrap()).unwrap();
    let modes: Vec<&str> = flat["windows"].as_array().unwrap().iter().map(|w| w["mode"].as_str().unwrap()).collect();
    assert!(modes.iter().all(|m| *m == "power-saving"));
}
