use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
n = 3
m = 0
layer_grid = [1, 2]
stages = ["SP2", "SP3"]
repeats = 1

[optimizer]
learning_rate = 0.02
max_iters = 200
"#;

fn symprune(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("tiny.toml");
    if !config.exists() {
        fs::write(&config, TINY).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_symprune"))
        .args(args)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prune_writes_every_stage_and_a_census() {
    let dir = tempfile::tempdir().unwrap();
    let o = symprune(dir.path(), &["prune", "--layers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for s in ["SP0", "SP1", "SP2", "SP3"] {
        assert!(out.join(format!("{s}.json")).is_file());
    }
    let census = fs::read_to_string(out.join("census.csv")).unwrap();
    let rows: Vec<&str> = census.lines().collect();
    assert_eq!(rows[0], "stage,gates,free_params,removed_gates,d_eff");
    assert_eq!(rows.len(), 5);
    let params: Vec<usize> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(params.windows(2).all(|w| w[1] <= w[0]), "{params:?}");
}

#[test]
fn train_is_reproducible_under_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = symprune(d.path(), &["train", "--layers", "2", "--seed", "5"]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read_to_string(d.path().join("out/trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = tempfile::tempdir().unwrap();
    symprune(c.path(), &["train", "--layers", "2", "--seed", "6"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn qntk_reports_theory_next_to_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = symprune(dir.path(), &["qntk", "--layers", "2", "--trials", "8"]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/qntk.json")).unwrap()).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 8);
    assert!(v["theory_qbar_s"].as_f64().unwrap() > 0.0);
    assert!(v["mc_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn complete_sweep_exits_zero_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let o = symprune(dir.path(), &["sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("4 of 4 cells completed"));
    let out = dir.path().join("out");
    let first = fs::read_to_string(out.join("sweep.csv")).unwrap();
    for f in ["summary.json", "q_init.svg", "final_loss.svg", "t_eps.svg", "journal.csv", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // rerun picks everything up from the journal
    let again = symprune(dir.path(), &["sweep"]);
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stderr).is_empty());
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap(), first);
}

#[test]
fn sweep_with_a_foreign_journal_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("journal.csv"), "# symprune sweep journal 0000000000000000\n").unwrap();
    let o = symprune(dir.path(), &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dynamics_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let dyn_cfg = dir.path().join("dyn.toml");
    fs::write(&dyn_cfg, "n = 3\nlayers = 4\nrepeats = 2\nmax_iters = 50\nlearning_rate = 0.01\n").unwrap();
    let o = symprune(dir.path(), &["dynamics", "--dynamics", dyn_cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/dynamics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn automorphisms_of_a_square() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("square.txt");
    fs::write(&g, "4 4\n0 1\n1 2\n2 3\n3 0\n").unwrap();
    let o = symprune(dir.path(), &["automorphisms", "--graph", g.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("order 8\n"), "{text}");
    assert!(text.contains("vertex orbit [0, 1, 2, 3]"));
}

#[test]
fn automorphisms_of_the_configured_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = symprune(dir.path(), &["automorphisms"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("order 2\n"));
    assert!(dir.path().join("out/graph.txt").is_file());
}

#[test]
fn spectrum_prints_ground_energy_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = symprune(dir.path(), &["spectrum", "--levels", "3", "--layers", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with('E')).count(), 3);
    assert!(text.contains("d_eff: "));
    let values: Vec<f64> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap()).unwrap();
    assert_eq!(values.len(), 8);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn bad_input_exits_with_an_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let o = symprune(dir.path(), &["automorphisms", "--graph", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "repeats = 0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_symprune"))
        .args(["sweep", "--config", bad.to_str().unwrap(), "--out-dir"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn global_flags_parse_before_or_after_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_symprune"))
        .arg("--full")
        .arg("--seed")
        .arg("3")
        .args(["--out-dir"])
        .arg(dir.path())
        .args(["automorphisms"])
        .output()
        .unwrap();
    assert!(o.status.success());
    // the full preset is a six-qubit chain
    let graph = fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert!(graph.starts_with("6 5\n"), "{graph}");
    let unknown = Command::new(env!("CARGO_BIN_EXE_symprune")).arg("teleport").output().unwrap();
    assert!(!unknown.status.success());
}
