//! Declarative sweeps over pruning stages and depths, training-dynamics runs,
//! and their CSV / JSON / SVG outputs.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_hea, sample_params, AnsatzDesign};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    build_maxcut, build_tfim, embed_identity, erdos_renyi, project_hamiltonian, random_regular,
    EmbeddedHamiltonian,
};
use crate::pruning::{symmetric_prune, StageLabel};
use crate::seed::{derive_seed, tag};
use crate::symmetry::{ansatz_subspace, theory_qbar_s};
use crate::training::{
    fit_decay_rate, fit_decay_series, steps_to_epsilon, train, DecayFit, InputState, LossSpec,
    OptimizerConfig, StopReason,
};

/// Largest register a sweep may simulate.
pub const MAX_SWEEP_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Tfim,
    MaxcutEr,
    MaxcutRegular,
}

/// Input register for the problem qubits; redundant qubits always start in `|0>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Zero,
    Plus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Problem qubits.
    pub n: usize,
    /// Redundant identity qubits appended after the problem.
    pub m: usize,
    pub h_field: f64,
    pub graph_p: f64,
    pub graph_degree: usize,
    pub graph_seed: u64,
    pub input: InputKind,
    pub stages: Vec<StageLabel>,
    pub layer_grid: Vec<usize>,
    pub repeats: usize,
    pub optimizer: OptimizerConfig,
    pub epsilon: f64,
    pub master_seed: u64,
    pub shots_per_param: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// TFIM `n = 4`, `m = 1`, `L ∈ {2, 4, …, 20}`, three repeats.
    pub fn desk() -> Self {
        Self {
            problem: Problem::Tfim,
            n: 4,
            m: 1,
            h_field: 1.0,
            graph_p: 0.5,
            graph_degree: 3,
            graph_seed: 0,
            input: InputKind::Plus,
            stages: StageLabel::ALL.to_vec(),
            layer_grid: (1..=10).map(|k| 2 * k).collect(),
            repeats: 3,
            optimizer: OptimizerConfig::default(),
            epsilon: 1e-5,
            master_seed: 0,
            shots_per_param: 1,
        }
    }

    /// TFIM `n = 6`, `m = 2`, `L ∈ {4, 6, …, 28}`, five repeats.
    pub fn full() -> Self {
        Self {
            n: 6,
            m: 2,
            layer_grid: (2..=14).map(|k| 2 * k).collect(),
            repeats: 5,
            ..Self::desk()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.layer_grid.is_empty() {
            return bad("layer grid is empty");
        }
        if self.layer_grid.contains(&0) {
            return bad("layer counts must be positive");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.stages.is_empty() {
            return bad("stage set is empty");
        }
        if self.n == 0 {
            return bad("problem needs at least one qubit");
        }
        if self.n + self.m > MAX_SWEEP_QUBITS {
            return Err(Error::TooLarge {
                num_qubits: self.n + self.m,
                budget: MAX_SWEEP_QUBITS,
            });
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        self.optimizer.validate()
    }

    pub fn input_state(&self) -> InputState {
        match self.input {
            InputKind::Zero => InputState::Zero,
            InputKind::Plus => InputState::Plus(self.n),
        }
    }

    pub fn hamiltonian(&self) -> Result<EmbeddedHamiltonian> {
        let h = match self.problem {
            Problem::Tfim => build_tfim(self.n, self.h_field)?,
            Problem::MaxcutEr => build_maxcut(&erdos_renyi(self.n, self.graph_p, self.graph_seed)?)?,
            Problem::MaxcutRegular => {
                build_maxcut(&random_regular(self.n, self.graph_degree, self.graph_seed)?)?
            }
        };
        Ok(embed_identity(&h, self.m))
    }

    pub fn loss_spec(&self) -> Result<LossSpec> {
        Ok(LossSpec::ground(&self.hamiltonian()?.full)?.with_input(self.input_state()))
    }

    /// Hash of the fields that determine a cell's content; the grid, stage
    /// set and repeat count are excluded so that growing them keeps old cells valid.
    pub fn cell_fingerprint(&self) -> u64 {
        let mut c = self.clone();
        c.layer_grid.clear();
        c.stages.clear();
        c.repeats = 0;
        c.shots_per_param = 0;
        tag(&serde_json::to_string(&c).expect("config serialises"))
    }
}

/// Seed for one `(stage, L, repeat)` cell.
pub fn cell_seed(master: u64, stage: StageLabel, layers: usize, repeat: usize) -> u64 {
    derive_seed(master, &[tag(&stage.to_string()), layers as u64, repeat as u64])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub stage: StageLabel,
    pub layers: usize,
    pub num_params: usize,
    pub repeat: usize,
    /// Kernel `‖∇ε‖²` at the initial parameters.
    pub q_init: f64,
    pub grad_norm_init: f64,
    pub final_loss: f64,
    pub t_eps: Option<usize>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub decay_gamma: Option<f64>,
    pub decay_r2: Option<f64>,
    /// Kept out of the CSV so that it stays reproducible.
    pub wall_time_secs: f64,
}

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 12] = [
    "stage",
    "layers",
    "num_params",
    "repeat",
    "q_init",
    "grad_norm_init",
    "final_loss",
    "t_eps",
    "iterations",
    "stop_reason",
    "decay_gamma",
    "decay_r2",
];

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::LossThreshold => "loss_threshold",
        StopReason::Plateau => "plateau",
        StopReason::MaxIters => "max_iters",
    }
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepRow {
    fn key(&self) -> (StageLabel, usize, usize) {
        (self.stage, self.layers, self.repeat)
    }

    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.stage,
            self.layers,
            self.num_params,
            self.repeat,
            self.q_init,
            self.grad_norm_init,
            self.final_loss,
            opt_field(self.t_eps),
            self.iterations,
            stop_name(self.stop_reason),
            opt_field(self.decay_gamma),
            opt_field(self.decay_r2),
        )
    }

    fn parse_fields(f: &[&str]) -> Result<Self> {
        fn p<T: std::str::FromStr>(s: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            s.trim().parse().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        }
        fn o<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                p(s).map(Some)
            }
        }
        let stop_reason = match f[9].trim() {
            "loss_threshold" => StopReason::LossThreshold,
            "plateau" => StopReason::Plateau,
            "max_iters" => StopReason::MaxIters,
            other => return Err(Error::Parse(format!("unknown stop reason {other:?}"))),
        };
        Ok(Self {
            stage: p(f[0])?,
            layers: p(f[1])?,
            num_params: p(f[2])?,
            repeat: p(f[3])?,
            q_init: p(f[4])?,
            grad_norm_init: p(f[5])?,
            final_loss: p(f[6])?,
            t_eps: o(f[7])?,
            iterations: p(f[8])?,
            stop_reason,
            decay_gamma: o(f[10])?,
            decay_r2: o(f[11])?,
            wall_time_secs: f.get(12).map(|s| p(s)).transpose()?.unwrap_or(0.0),
        })
    }
}

/// A cell that could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub stage: StageLabel,
    pub layers: usize,
    pub repeat: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    /// Sorted by `(stage, layers, repeat)`.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
            && self.rows.len()
                == self.config.stages.len() * self.config.layer_grid.len() * self.config.repeats
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn stage_rows(&self, stage: StageLabel) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = SWEEP_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_fields());
        s.push('\n');
    }
    s
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != SWEEP_COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected sweep header {header:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != SWEEP_COLUMNS.len() {
                return Err(Error::Parse(format!("bad sweep row {l:?}")));
            }
            SweepRow::parse_fields(&f)
        })
        .collect()
}

/// Journal of finished cells; a restarted sweep skips whatever is recorded here.
struct Journal {
    file: Option<Mutex<File>>,
}

const JOURNAL_MAGIC: &str = "# symprune sweep journal";

impl Journal {
    fn open(path: Option<&Path>, fingerprint: u64) -> Result<(Self, Vec<SweepRow>)> {
        let Some(path) = path else {
            return Ok((Self { file: None }, Vec::new()));
        };
        let head = format!("{JOURNAL_MAGIC} {fingerprint:016x}");
        let mut rows = Vec::new();
        if path.exists() {
            let text = fs::read_to_string(path)?;
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == head => {}
                Some(h) if h.starts_with(JOURNAL_MAGIC) => {
                    return Err(Error::InvalidArgument(format!(
                        "journal {} belongs to a different configuration",
                        path.display()
                    )))
                }
                _ => {}
            }
            // a killed run can leave a torn last line; keep only rows that parse
            for l in lines {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() == SWEEP_COLUMNS.len() + 1 {
                    if let Ok(r) = SweepRow::parse_fields(&f) {
                        rows.push(r);
                    }
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut text = head + "\n";
        for r in &rows {
            writeln!(text, "{},{}", r.csv_fields(), r.wall_time_secs).expect("write to string");
        }
        fs::write(path, text)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok((
            Self {
                file: Some(Mutex::new(file)),
            },
            rows,
        ))
    }

    fn record(&self, r: &SweepRow) -> Result<()> {
        if let Some(f) = &self.file {
            let mut f = f.lock().expect("journal lock");
            writeln!(f, "{},{}", r.csv_fields(), r.wall_time_secs)?;
            f.flush()?;
        }
        Ok(())
    }
}

/// Per-cell progress events.
pub enum CellEvent<'a> {
    Done(&'a SweepRow),
    Failed(&'a CellFailure),
}

/// [`run_sweep_with`] without a journal or progress callback.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with(cfg, None, |_| {})
}

/// Trains every `(stage, L, repeat)` cell in parallel.
///
/// With a `journal` path, finished rows are appended there as they complete
/// and rows already present are reused, so an interrupted sweep can resume.
pub fn run_sweep_with<F>(cfg: &ExperimentConfig, journal: Option<&Path>, progress: F) -> Result<SweepResult>
where
    F: Fn(CellEvent<'_>) + Sync,
{
    cfg.validate()?;
    let h = cfg.hamiltonian()?;
    let spec = cfg.loss_spec()?;
    let (journal, done) = Journal::open(journal, cfg.cell_fingerprint())?;
    let wanted: HashSet<(StageLabel, usize, usize)> = cfg
        .stages
        .iter()
        .flat_map(|&s| {
            cfg.layer_grid
                .iter()
                .flat_map(move |&l| (0..cfg.repeats).map(move |r| (s, l, r)))
        })
        .collect();
    let mut rows: Vec<SweepRow> = done.into_iter().filter(|r| wanted.contains(&r.key())).collect();
    rows.sort_by_key(SweepRow::key);
    rows.dedup_by_key(|r| r.key());
    let have: HashSet<_> = rows.iter().map(SweepRow::key).collect();

    let mut failures = Vec::new();
    let mut jobs: Vec<(StageLabel, usize, usize, AnsatzDesign)> = Vec::new();
    let mut grid = cfg.layer_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    for &l in &grid {
        let stages = build_hea(h.num_qubits(), l).and_then(|a| symmetric_prune(&a, &h));
        for &label in &cfg.stages {
            for r in 0..cfg.repeats {
                if have.contains(&(label, l, r)) {
                    continue;
                }
                match &stages {
                    Ok(st) => {
                        let a = st.iter().find(|s| s.label == label).expect("all stages built");
                        jobs.push((label, l, r, a.ansatz.clone()));
                    }
                    Err(e) => failures.push(CellFailure {
                        stage: label,
                        layers: l,
                        repeat: r,
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    for f in &failures {
        progress(CellEvent::Failed(f));
    }
    let outcomes: Vec<std::result::Result<SweepRow, CellFailure>> = jobs
        .par_iter()
        .map(|(label, l, r, a)| {
            let out = run_cell(cfg, &spec, a, *label, *l, *r).and_then(|row| {
                journal.record(&row)?;
                Ok(row)
            });
            match out {
                Ok(row) => {
                    progress(CellEvent::Done(&row));
                    Ok(row)
                }
                Err(e) => {
                    let f = CellFailure {
                        stage: *label,
                        layers: *l,
                        repeat: *r,
                        message: e.to_string(),
                    };
                    progress(CellEvent::Failed(&f));
                    Err(f)
                }
            }
        })
        .collect();
    for o in outcomes {
        match o {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    rows.sort_by_key(SweepRow::key);
    failures.sort_by_key(|f| (f.stage, f.layers, f.repeat));
    Ok(SweepResult {
        config: cfg.clone(),
        rows,
        failures,
    })
}

fn run_cell(
    cfg: &ExperimentConfig,
    spec: &LossSpec,
    a: &AnsatzDesign,
    stage: StageLabel,
    layers: usize,
    repeat: usize,
) -> Result<SweepRow> {
    let init = sample_params(a, cell_seed(cfg.master_seed, stage, layers, repeat));
    let trace = train(a, spec, &cfg.optimizer, &init)?;
    let first = &trace.records[0];
    let fit = fit_decay_rate(&trace).ok();
    Ok(SweepRow {
        stage,
        layers,
        num_params: a.num_free_params(),
        repeat,
        q_init: first.kernel.unwrap_or(0.0),
        grad_norm_init: first.grad_norm,
        final_loss: trace.final_loss(),
        t_eps: steps_to_epsilon(&trace, cfg.epsilon),
        iterations: trace.records.len() - 1,
        stop_reason: trace.stop_reason,
        decay_gamma: fit.map(|f| f.gamma),
        decay_r2: fit.map(|f| f.r_squared),
        wall_time_secs: trace.wall_time_secs,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// `(num_params, layers, median final loss)` per grid point, ascending in `num_params`.
pub fn median_losses(result: &SweepResult, stage: StageLabel) -> Vec<(usize, usize, f64)> {
    let mut by: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in result.stage_rows(stage) {
        by.entry((r.num_params, r.layers)).or_default().push(r.final_loss);
    }
    by.into_iter().map(|((k, l), mut v)| (k, l, median(&mut v))).collect()
}

/// Smallest parameter count whose median final loss is at most `ε` and at
/// least ten times below the median of the largest smaller count that missed
/// `ε`; when no smaller count missed, the first converging count qualifies.
///
/// `Ok(None)` means no grid point qualifies.
pub fn critical_point(result: &SweepResult, stage: StageLabel) -> Result<Option<usize>> {
    Ok(critical_cell(result, stage)?.map(|(k, _)| k))
}

fn critical_cell(result: &SweepResult, stage: StageLabel) -> Result<Option<(usize, usize)>> {
    let pts = median_losses(result, stage);
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "stage {stage} has {} grid points, need 2",
            pts.len()
        )));
    }
    let eps = result.config.epsilon;
    let mut last_miss: Option<f64> = None;
    for &(k, l, loss) in &pts {
        if loss <= eps {
            if last_miss.is_none_or(|miss| loss * 10.0 <= miss) {
                return Ok(Some((k, l)));
            }
        } else {
            last_miss = Some(loss);
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HardwareMetrics {
    pub stage: StageLabel,
    pub critical_params: usize,
    /// Shots per optimisation step, `critical_params · s`.
    pub measurements: usize,
    /// Layer count at the critical point.
    pub depth: usize,
}

pub fn hardware_metrics(result: &SweepResult, stage: StageLabel, shots: usize) -> Result<HardwareMetrics> {
    let (k, l) = critical_cell(result, stage)?
        .ok_or_else(|| Error::InvalidArgument(format!("stage {stage} has no critical point")))?;
    Ok(HardwareMetrics {
        stage,
        critical_params: k,
        measurements: k * shots,
        depth: l,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: StageLabel,
    pub critical_point: Option<usize>,
    pub hardware: Option<HardwareMetrics>,
    /// `(num_params, per-repeat Q at init, mean)`.
    pub q_init: Vec<(usize, Vec<f64>, f64)>,
    pub total_wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub config: ExperimentConfig,
    pub complete: bool,
    pub stages: Vec<StageSummary>,
    pub failures: Vec<CellFailure>,
}

pub fn summarize(result: &SweepResult) -> SweepSummary {
    let stages = result
        .config
        .stages
        .iter()
        .map(|&stage| {
            let mut q: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in result.stage_rows(stage) {
                q.entry(r.num_params).or_default().push(r.q_init);
            }
            StageSummary {
                stage,
                critical_point: critical_point(result, stage).ok().flatten(),
                hardware: hardware_metrics(result, stage, result.config.shots_per_param).ok(),
                q_init: q
                    .into_iter()
                    .map(|(k, v)| {
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        (k, v, mean)
                    })
                    .collect(),
                total_wall_time_secs: result.stage_rows(stage).map(|r| r.wall_time_secs).sum(),
            }
        })
        .collect();
    SweepSummary {
        config: result.config.clone(),
        complete: result.is_complete(),
        stages,
        failures: result.failures.clone(),
    }
}

/// One curve of a line chart.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line chart, one `<polyline>` per series.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, log_y: bool, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (80.0, 130.0, 40.0, 60.0);
    let ty = |y: f64| if log_y { y.max(1e-16).log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (x, ty(y))))
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let span = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (false, _) => (0.0, 1.0),
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, lo + 0.5),
        }
    };
    let (x0, x1) = span(pts.iter().map(|p| p.0).collect());
    let (y0, y1) = span(pts.iter().map(|p| p.1).collect());
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ax1, ay0, ay1) = (left, w - right, h - bottom, top);
    let _ = writeln!(
        s,
        r#"<path d="M{ax0} {ay1} L{ax0} {ay0} L{ax1} {ay0}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylab = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.0}</text>"#,
            px(xv),
            ay0 + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#,
            ax0 - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        h - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| (x, ty(y)))
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = top + 20.0 * i as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ax1 + 10.0,
            ax1 + 30.0,
            ax1 + 36.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn stage_series<F>(result: &SweepResult, value: F) -> Vec<Series>
where
    F: Fn(&SweepRow) -> Option<f64>,
{
    result
        .config
        .stages
        .iter()
        .map(|&stage| {
            let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in result.stage_rows(stage) {
                if let Some(v) = value(r) {
                    by.entry(r.num_params).or_default().push(v);
                }
            }
            Series {
                label: stage.to_string(),
                points: by.into_iter().map(|(k, mut v)| (k as f64, median(&mut v))).collect(),
            }
        })
        .collect()
}

/// Files written by [`emit_outputs`].
#[derive(Clone, Debug)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub charts: Vec<PathBuf>,
}

/// Writes `sweep.csv`, `summary.json` and three SVG panels
/// (kernel at initialisation, final loss, `T(ε)`) against the parameter count.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir)?;
    let csv = dir.join("sweep.csv");
    fs::write(&csv, result.to_csv())?;
    let summary = dir.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&summarize(result))?)?;
    let panels: [(&str, &str, &str, bool, fn(&SweepRow) -> Option<f64>); 3] = [
        ("q_init.svg", "Kernel at initialisation", "Q_S", true, |r| Some(r.q_init)),
        ("final_loss.svg", "Loss after convergence", "loss", true, |r| Some(r.final_loss)),
        ("t_eps.svg", "Iterations to epsilon", "T(eps)", false, |r| r.t_eps.map(|t| t as f64)),
    ];
    let mut charts = Vec::new();
    for (file, title, y, log_y, f) in panels {
        let path = dir.join(file);
        fs::write(&path, svg_line_chart(title, "LK", y, log_y, &stage_series(result, f)))?;
        charts.push(path);
    }
    Ok(EmittedFiles { csv, summary, charts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub n: usize,
    pub m: usize,
    pub h_field: f64,
    pub input: InputKind,
    pub stage: StageLabel,
    pub layers: usize,
    pub learning_rate: f64,
    pub repeats: usize,
    pub max_iters: usize,
    pub master_seed: u64,
}

impl Default for DynamicsConfig {
    /// TFIM `n = 4`, SP3, `L = 40`, `η = 1e-4`, ten initialisations.
    fn default() -> Self {
        Self {
            n: 4,
            m: 0,
            h_field: 1.0,
            input: InputKind::Plus,
            stage: StageLabel::SP3,
            layers: 40,
            learning_rate: 1e-4,
            repeats: 10,
            max_iters: 1000,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsResult {
    pub config: DynamicsConfig,
    pub num_params: usize,
    pub d_eff: usize,
    /// Kernel prediction used for the overlay.
    pub qbar_s: f64,
    /// Residual `ε_t` of every initialisation.
    pub traces: Vec<Vec<f64>>,
    pub mean_eps: Vec<f64>,
    /// `ε̄₀ · exp(-η Q̄_S t)`.
    pub theory_eps: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub theory_gamma: f64,
}

impl DynamicsResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_eps,theory_eps\n");
        for (t, (e, th)) in self.mean_eps.iter().zip(&self.theory_eps).enumerate() {
            let _ = writeln!(s, "{t},{e},{th}");
        }
        s
    }
}

/// Plain gradient descent from `repeats` initialisations with a fixed step
/// budget, averaged and fitted against the kernel prediction.
pub fn dynamics_experiment(cfg: &DynamicsConfig) -> Result<DynamicsResult> {
    if cfg.repeats == 0 || cfg.layers == 0 {
        return Err(Error::InvalidArgument("repeats and layers must be positive".into()));
    }
    let sweep_like = ExperimentConfig {
        n: cfg.n,
        m: cfg.m,
        h_field: cfg.h_field,
        input: cfg.input,
        ..ExperimentConfig::desk()
    };
    sweep_like.validate()?;
    let h = sweep_like.hamiltonian()?;
    let spec = sweep_like.loss_spec()?;
    let stages = symmetric_prune(&build_hea(h.num_qubits(), cfg.layers)?, &h)?;
    let a = &stages.iter().find(|s| s.label == cfg.stage).expect("all stages built").ansatz;
    let basis = ansatz_subspace(a, &spec)?;
    let h_star = project_hamiltonian(&h.full, &basis)?;
    let k = a.num_free_params();
    let qbar_s = theory_qbar_s(k, &h_star, basis.dim())?;
    let opt = OptimizerConfig {
        loss_stop: 0.0,
        plateau_count: usize::MAX,
        ..OptimizerConfig::gradient_descent(cfg.learning_rate, cfg.max_iters)
    };
    let traces = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let init = sample_params(a, derive_seed(cfg.master_seed, &[tag("dynamics"), r as u64]));
            Ok(train(a, &spec, &opt, &init)?.eps_series())
        })
        .collect::<Result<Vec<_>>>()?;
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    let mean_eps: Vec<f64> = (0..len)
        .map(|t| traces.iter().map(|tr| tr[t]).sum::<f64>() / traces.len() as f64)
        .collect();
    let theory_gamma = cfg.learning_rate * qbar_s;
    let e0 = mean_eps.first().copied().unwrap_or(0.0);
    let theory_eps = (0..len).map(|t| e0 * (-theory_gamma * t as f64).exp()).collect();
    Ok(DynamicsResult {
        config: cfg.clone(),
        num_params: k,
        d_eff: basis.dim(),
        qbar_s,
        fit: fit_decay_series(&mean_eps).ok(),
        traces,
        mean_eps,
        theory_eps,
        theory_gamma,
    })
}

/// Writes `dynamics.csv`, `dynamics.json` and `dynamics.svg`.
pub fn emit_dynamics(result: &DynamicsResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join("dynamics.csv");
    fs::write(&csv, result.to_csv())?;
    let json = dir.join("dynamics.json");
    fs::write(&json, serde_json::to_string_pretty(result)?)?;
    let svg = dir.join("dynamics.svg");
    let idx = |v: &[f64]| v.iter().enumerate().map(|(t, &e)| (t as f64, e.abs())).collect();
    let series = [
        Series {
            label: "mean".into(),
            points: idx(&result.mean_eps),
        },
        Series {
            label: "theory".into(),
            points: idx(&result.theory_eps),
        },
    ];
    fs::write(&svg, svg_line_chart("Residual error", "t", "eps", true, &series))?;
    Ok(vec![csv, json, svg])
}
