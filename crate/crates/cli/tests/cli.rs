use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn twostage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twostage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

const SMALL: &str = r#"
seed = 11
recipes = ["clinical", "genetic_lasso_logistic", "genetic_logic_class",
           "genetic_logic_logistic", "composite", "weighted_average", "two_stage"]

[data]
source = "csv"
path = "DATA"

[lasso.select]
bound = { method = "fixed", bound = 2.0 }

[logic.anneal]
iterations = 3000
"#;

fn simulate(dir: &TempDir) -> PathBuf {
    let data = dir.path().join("cohort.csv");
    let sim_cfg = dir.path().join("sim.toml");
    std::fs::write(&sim_cfg, "n_samples = 300\np = 8\np_prime = 3\nplanted_linear_coefficients = [0.0, 1.0, -1.0]\n").unwrap();
    let out = twostage(&["simulate", "--config", path_str(&sim_cfg), "--seed", "5", "--out", path_str(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.exists());
    assert!(dir.path().join("cohort.schema.toml").exists());
    data
}

#[test]
fn simulate_run_evaluate_inspect() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir);
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, SMALL.replace("DATA", path_str(&data))).unwrap();
    let out_dir = dir.path().join("out");

    let out = twostage(&["run", "--config", path_str(&cfg), "--out", path_str(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 7 * 2 * 4);
    assert!(rows.iter().all(|r| r.ends_with(",ok")), "{csv}");
    let text = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(text.contains("config sha256"));
    assert!(text.contains("Validation"));

    let preds = out_dir.join("predictions").join("validation_two_stage.csv");
    let out = twostage(&[
        "evaluate",
        "--predictions",
        path_str(&preds),
        "--data",
        path_str(&data),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = String::from_utf8(out.stdout).unwrap();
    // The evaluated auROC is the one the report printed for the same file.
    let reported = rows
        .iter()
        .find(|r| r.starts_with("two_stage,validation,auROC,"))
        .and_then(|r| r.split(',').nth(3))
        .unwrap();
    assert!(metrics.contains(&format!("auROC,{reported}")), "{metrics} vs {reported}");

    let models: Vec<PathBuf> = std::fs::read_dir(out_dir.join("models"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert!(!models.is_empty());
    for m in &models {
        let out = twostage(&["inspect", path_str(m)]);
        assert_eq!(code(&out), 0, "{}: {}", m.display(), String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = TempDir::new().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"not a number\"\n").unwrap();
    assert_eq!(code(&twostage(&["run", "--config", path_str(&bad)])), 1);
    assert_eq!(code(&twostage(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&twostage(&["run", "--config", path_str(&dir.path().join("missing.toml"))])), 1);

    let cfg = dir.path().join("exp.toml");
    let missing = dir.path().join("nowhere.csv");
    std::fs::write(&cfg, SMALL.replace("DATA", path_str(&missing))).unwrap();
    assert_eq!(code(&twostage(&["run", "--config", path_str(&cfg)])), 2);

    let data = simulate(&dir);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[3].push_str(",extra");
    std::fs::write(&data, lines.join("\n")).unwrap();
    std::fs::write(&cfg, SMALL.replace("DATA", path_str(&data))).unwrap();
    assert_eq!(code(&twostage(&["run", "--config", path_str(&cfg)])), 2);
}

#[test]
fn randtest_writes_histograms() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("rt.toml");
    std::fs::write(
        &cfg,
        "seed = 3\n[data]\nsource = \"synthetic\"\n[data.synthetic]\nn_samples = 80\np = 6\n\n[logic.anneal]\niterations = 300\n\n[randtest]\npermutations = 19\nmax_size = 3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("rt");
    let out = twostage(&[
        "randtest",
        "--config",
        path_str(&cfg),
        "--kind",
        "model-size",
        "--family",
        "classification",
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..=3 {
        let h = std::fs::read_to_string(out_dir.join(format!("histogram_k{k}.csv"))).unwrap();
        let counts: usize = h.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(counts, 19);
    }
    let result = std::fs::read_to_string(out_dir.join("randtest.toml")).unwrap();
    assert!(result.contains("chosen_size"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("chosen model size"));
}
