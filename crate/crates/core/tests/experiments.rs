use std::collections::BTreeMap;
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};

use symprune::experiments::{
    critical_point, dynamics_experiment, emit_dynamics, emit_outputs, rows_from_csv, run_sweep,
    run_sweep_with, DynamicsConfig, ExperimentConfig, InputKind, Problem, SweepResult,
    SWEEP_COLUMNS,
};
use symprune::pruning::StageLabel;
use symprune::training::OptimizerConfig;

fn small(stages: Vec<StageLabel>, grid: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        n: 3,
        m: 0,
        stages,
        layer_grid: grid,
        repeats: 2,
        optimizer: OptimizerConfig {
            learning_rate: 0.02,
            max_iters: 1500,
            ..OptimizerConfig::default()
        },
        master_seed: 17,
        ..ExperimentConfig::desk()
    }
}

#[test]
fn smoke_single_cell() {
    let cfg = ExperimentConfig {
        n: 2,
        m: 0,
        stages: vec![StageLabel::SP3],
        layer_grid: vec![1],
        repeats: 1,
        ..ExperimentConfig::desk()
    };
    let r = run_sweep(&cfg).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].q_init > 0.0);
    assert!(r.is_complete());
}

#[test]
fn row_count_and_reproducibility() {
    let cfg = small(vec![StageLabel::SP2, StageLabel::SP3], vec![1, 2, 3]);
    let a = run_sweep(&cfg).unwrap();
    assert_eq!(a.rows.len(), 2 * 3 * 2);
    assert!(a.is_complete());
    assert_eq!(a.to_csv(), run_sweep(&cfg).unwrap().to_csv());
    let other = run_sweep(&ExperimentConfig { master_seed: 18, ..cfg }).unwrap();
    assert_ne!(a.to_csv(), other.to_csv());
}

#[test]
fn interrupted_sweep_resumes_to_the_same_csv() {
    let full = small(vec![StageLabel::SP1, StageLabel::SP3], vec![1, 2, 3]);
    let reference = run_sweep(&full).unwrap().to_csv();

    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.csv");
    // first run covers part of the grid, then dies mid-line
    let part = ExperimentConfig {
        layer_grid: vec![1, 3],
        ..full.clone()
    };
    run_sweep_with(&part, Some(&journal), |_| {}).unwrap();
    let mut text = fs::read_to_string(&journal).unwrap();
    text.push_str("SP3,2,8,0,1.2");
    fs::write(&journal, text).unwrap();

    let resumed = run_sweep_with(&full, Some(&journal), |_| {}).unwrap();
    assert_eq!(resumed.to_csv(), reference);
    // a second resume has nothing left to do and still agrees
    let calls = AtomicUsize::new(0);
    let again = run_sweep_with(&full, Some(&journal), |_| {
        calls.fetch_add(1, Ordering::SeqCst);
    })
    .unwrap();
    assert_eq!(again.to_csv(), reference);
    assert_eq!(calls.into_inner(), 0);
}

#[test]
fn journal_from_other_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.csv");
    let cfg = small(vec![StageLabel::SP3], vec![1]);
    run_sweep_with(&cfg, Some(&journal), |_| {}).unwrap();
    let changed = ExperimentConfig {
        h_field: 0.5,
        ..cfg.clone()
    };
    assert!(run_sweep_with(&changed, Some(&journal), |_| {}).is_err());
    // growing the grid is not a different configuration
    let grown = ExperimentConfig {
        layer_grid: vec![1, 2],
        ..cfg
    };
    assert_eq!(run_sweep_with(&grown, Some(&journal), |_| {}).unwrap().rows.len(), 4);
}

fn over_parameterised_violations(r: &SweepResult, stage: StageLabel) -> usize {
    let mut by: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    for row in r.stage_rows(stage) {
        by.entry(row.num_params).or_default().push(row.t_eps);
    }
    // cells where every repeat reached epsilon, in increasing LK
    let medians: Vec<usize> = by
        .into_values()
        .skip_while(|ts| ts.iter().any(Option::is_none))
        .filter(|ts| ts.iter().all(Option::is_some))
        .map(|ts| {
            let mut v: Vec<usize> = ts.into_iter().flatten().collect();
            v.sort_unstable();
            v[v.len() / 2]
        })
        .collect();
    medians.windows(2).filter(|w| w[1] > w[0]).count()
}

#[test]
fn steps_to_epsilon_shrink_with_width() {
    let cfg = ExperimentConfig {
        repeats: 5,
        ..small(vec![StageLabel::SP2, StageLabel::SP3], vec![2, 3, 4, 6, 8])
    };
    let r = run_sweep(&cfg).unwrap();
    let total: usize = cfg.stages.iter().map(|&s| over_parameterised_violations(&r, s)).sum();
    assert!(total <= 1, "{total} increases of T(eps)\n{}", r.to_csv());
}

#[test]
fn maxcut_symmetric_stages_do_not_train() {
    // ZZ-only generators commute with a diagonal Hamiltonian
    let cfg = ExperimentConfig {
        problem: Problem::MaxcutRegular,
        n: 4,
        graph_degree: 3,
        ..small(vec![StageLabel::SP2, StageLabel::SP3], vec![1, 2])
    };
    let r = run_sweep(&cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.q_init < 1e-20));
    assert_eq!(critical_point(&r, StageLabel::SP3).unwrap(), None);
}

#[test]
fn outputs_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(StageLabel::ALL.to_vec(), vec![1, 2]);
    let r = run_sweep(&cfg).unwrap();
    let files = emit_outputs(&r, dir.path()).unwrap();
    let csv = fs::read_to_string(&files.csv).unwrap();
    assert!(csv.starts_with(&SWEEP_COLUMNS.join(",")));
    assert_eq!(rows_from_csv(&csv).unwrap().len(), r.rows.len());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files.summary).unwrap()).unwrap();
    assert_eq!(summary["stages"].as_array().unwrap().len(), 4);
    assert_eq!(summary["complete"], true);
    assert_eq!(files.charts.len(), 3);
    for chart in &files.charts {
        let text = fs::read_to_string(chart).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(lines, 4, "{}", chart.display());
    }
}

#[test]
fn empty_result_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let r = SweepResult {
        config: ExperimentConfig::desk(),
        rows: vec![],
        failures: vec![],
    };
    let files = emit_outputs(&r, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(&files.csv).unwrap(), SWEEP_COLUMNS.join(",") + "\n");
    for chart in &files.charts {
        roxmltree::Document::parse(&fs::read_to_string(chart).unwrap()).unwrap();
    }
    assert!(!r.is_complete());
}

#[test]
fn unwritable_destination_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let r = SweepResult {
        config: ExperimentConfig::desk(),
        rows: vec![],
        failures: vec![],
    };
    assert!(emit_outputs(&r, &blocker.join("sub")).is_err());
}

#[test]
fn dynamics_single_repeat_and_overlay() {
    let cfg = DynamicsConfig {
        n: 3,
        layers: 6,
        learning_rate: 1e-2,
        repeats: 1,
        max_iters: 200,
        input: InputKind::Plus,
        ..DynamicsConfig::default()
    };
    let r = dynamics_experiment(&cfg).unwrap();
    assert_eq!(r.traces.len(), 1);
    assert_eq!(r.mean_eps, r.traces[0]);
    assert_eq!(r.mean_eps.len(), 201);
    assert_eq!(r.theory_gamma, cfg.learning_rate * r.qbar_s);
    let e0 = r.mean_eps[0];
    assert_eq!(r.theory_eps[10], e0 * (-r.theory_gamma * 10.0).exp());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_dynamics(&r, dir.path()).unwrap();
    assert!(fs::read_to_string(&files[0]).unwrap().starts_with("t,mean_eps,theory_eps\n"));
    assert!(dynamics_experiment(&DynamicsConfig { repeats: 0, ..cfg }).is_err());
}
