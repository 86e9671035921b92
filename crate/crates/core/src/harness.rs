//! Experiment pipelines: run one configuration end to end, write its logs,
//! re-verify a log directory from scratch, and run seed sweeps.
//!
//! A log directory holds
//!  * `instance.json` and `run.json` (configuration and per-phase metadata),
//!  * `step_log.csv`, `assignment_log.csv`, `phase_log.csv`,
//!  * `y_log.csv` (every fractional assignment with `x` at job completion),
//!  * `machines.csv` (final `x` and load per live machine and phase),
//!  * `report.csv` (one report row).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doubling::{
    run_fixed_alpha, run_with_doubling, write_phase_log, DoublingConfig, PipelineOutcome,
    RecoverPolicy, DEFAULT_BOUND_CONSTANT,
};
use crate::error::{Error, Result};
use crate::fractional::{write_step_log, EngineConfig, JobRow, DEFAULT_BASE, TOLERANCE};
use crate::generator::{generate, GeneratorConfig, PtimeModel};
use crate::instance::Instance;
use crate::oracle::{oracle_if_small, OracleResult, EXHAUSTIVE_LIMIT};
use crate::rounding::write_assignment_log;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// Exact offline optimum from the oracle.
    Oracle,
    Fixed(f64),
    /// Guess-and-double from the trivial lower bound.
    Doubling,
}

impl FromStr for AlphaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(AlphaMode::Oracle),
            "double" | "doubling" => Ok(AlphaMode::Doubling),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(AlphaMode::Fixed(v)),
                _ => Err(Error::InvalidArgument(format!(
                    "alpha must be `oracle`, `double` or a positive number, got `{other}`"
                ))),
            },
        }
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaMode::Oracle => f.write_str("oracle"),
            AlphaMode::Doubling => f.write_str("double"),
            AlphaMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Invariant families checked during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSet {
    /// Relaxed LP feasibility after every job.
    pub rfslp: bool,
    /// Potential after pre-processing and per-step potential increase.
    pub potential: bool,
    /// Tracked loads against loads recomputed from `y`.
    pub consistency: bool,
    /// Integer schedule bookkeeping.
    pub rounding: bool,
}

impl Default for CheckSet {
    fn default() -> Self {
        CheckSet {
            rfslp: true,
            potential: true,
            consistency: true,
            rounding: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub alpha: AlphaMode,
    pub seed: u64,
    pub base: f64,
    pub bound_constant: f64,
    pub recover: RecoverPolicy,
    pub checks: CheckSet,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: AlphaMode::Oracle,
            seed: 0,
            base: DEFAULT_BASE,
            bound_constant: DEFAULT_BOUND_CONSTANT,
            recover: RecoverPolicy::TriggeringJob,
            checks: CheckSet::default(),
        }
    }
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub seed: u64,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    /// `sum_i c_i x_i` with original costs, final phase.
    pub frac_cost: f64,
    /// Maximum fractional load, instance units.
    pub frac_makespan: f64,
    pub int_cost: f64,
    pub int_makespan: f64,
    pub cost_ratio: Option<f64>,
    pub makespan_ratio: f64,
    pub clamp_count: u64,
    pub fallback_count: u64,
    pub invariant_violations: u64,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub instance: Instance,
    pub config: RunConfig,
    pub oracle: Option<OracleResult>,
    pub outcome: PipelineOutcome,
    pub violations: Vec<String>,
    pub row: ReportRow,
}

impl RunArtifacts {
    /// Fractional cost of the final phase in normalized units.
    pub fn frac_cost_scaled(&self) -> f64 {
        self.outcome
            .final_state()
            .map_or(0.0, |s| s.fractional_cost())
    }

    /// Largest per-step potential increase over all phases.
    pub fn max_step_potential(&self) -> f64 {
        self.outcome
            .states
            .iter()
            .flatten()
            .flat_map(|s| s.step_log())
            .map(|s| s.delta_potential)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-job relaxed LP checks over a phase's rows, in processing order.
pub fn check_rfslp(rows: &[JobRow], live: &[usize], m: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut is_live = vec![false; m];
    for &i in live {
        is_live[i] = true;
    }
    let mut load = vec![0.0; m];
    let mut prev_x: Option<&[f64]> = None;
    for row in rows {
        for &i in live {
            load[i] += row.p[i] * row.y[i];
        }
        if !row.is_complete() {
            continue;
        }
        let cov = row.coverage();
        if !(1.0 - TOLERANCE..=1.0).contains(&cov) {
            out.push(format!(
                "job {}: coverage {cov} outside [1 - 1e-9, 1]",
                row.job
            ));
        }
        for i in 0..m {
            let (y, x) = (row.y[i], row.x_after[i]);
            if !is_live[i] {
                if y != 0.0 {
                    out.push(format!(
                        "job {}: discarded machine {i} has y = {y}",
                        row.job
                    ));
                }
                continue;
            }
            if !(0.0..=1.0 + TOLERANCE).contains(&y) {
                out.push(format!("job {}: y[{i}] = {y} outside [0, 1]", row.job));
            }
            if y > 2.0 * x + TOLERANCE {
                out.push(format!("job {}: y[{i}] = {y} > 2 x = {}", row.job, 2.0 * x));
            }
            if x < 1.0 && load[i] > 6.0 * x + TOLERANCE {
                out.push(format!(
                    "job {}: machine {i} partially active with load {} > 6 x = {}",
                    row.job,
                    load[i],
                    6.0 * x
                ));
            }
            if let Some(prev) = prev_x {
                if x < prev[i] {
                    out.push(format!(
                        "job {}: x[{i}] decreased from {} to {x}",
                        row.job, prev[i]
                    ));
                }
            }
        }
        prev_x = Some(&row.x_after);
    }
    out
}

/// Potential bounds: at most `m` after pre-processing, at most `2/n` per step.
pub fn check_potential(
    initial_potential: f64,
    m: usize,
    n: usize,
    step_deltas: impl IntoIterator<Item = (usize, u64, f64)>,
) -> Vec<String> {
    let mut out = Vec::new();
    if initial_potential > m as f64 + TOLERANCE {
        out.push(format!(
            "potential {initial_potential} after pre-processing exceeds m = {m}"
        ));
    }
    let limit = 2.0 / n.max(1) as f64 + TOLERANCE;
    for (job, step, delta) in step_deltas {
        if delta > limit {
            out.push(format!(
                "job {job} step {step}: potential increase {delta} exceeds 2/n = {}",
                2.0 / n.max(1) as f64
            ));
        }
    }
    out
}

fn check_loads(rows: &[JobRow], live: &[usize], loads: &[f64], x: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    for &i in live {
        let recomputed: f64 = rows.iter().map(|r| r.p[i] * r.y[i]).sum();
        if (recomputed - loads[i]).abs() > TOLERANCE * loads[i].abs().max(1.0) {
            out.push(format!(
                "machine {i}: reported load {} differs from recomputed {recomputed}",
                loads[i]
            ));
        }
        if !(0.0..=1.0).contains(&x[i]) {
            out.push(format!("machine {i}: x = {} outside [0, 1]", x[i]));
        }
    }
    out
}

fn collect_violations(
    instance: &Instance,
    outcome: &PipelineOutcome,
    checks: CheckSet,
) -> Vec<String> {
    let mut out = Vec::new();
    let m = instance.m();
    for (phase, state) in outcome.states.iter().enumerate() {
        let Some(state) = state else { continue };
        let tag = |v: String| format!("phase {phase}: {v}");
        if checks.rfslp {
            out.extend(
                check_rfslp(state.rows(), state.live_machines(), m)
                    .into_iter()
                    .map(tag),
            );
        }
        if checks.potential {
            let steps = state
                .step_log()
                .iter()
                .map(|s| (s.job, s.step_idx, s.delta_potential));
            out.extend(
                check_potential(state.initial_potential(), m, instance.n_declared, steps)
                    .into_iter()
                    .map(tag),
            );
        }
        if checks.consistency {
            out.extend(
                check_loads(
                    state.rows(),
                    state.live_machines(),
                    state.loads(),
                    state.x(),
                )
                .into_iter()
                .map(tag),
            );
        }
    }
    if checks.rounding {
        out.extend(outcome.rounding.violations(instance));
        if let Some(j) = outcome
            .rounding
            .assignment()
            .iter()
            .position(Option::is_none)
        {
            out.push(format!("job {j} has no integer assignment"));
        }
    }
    out
}

/// Runs one pipeline configuration on `instance`.
pub fn run_pipeline(instance: &Instance, config: &RunConfig) -> Result<RunArtifacts> {
    let engine = EngineConfig::with_base(config.base);
    engine.validate()?;
    let oracle = oracle_if_small(instance)?;
    let outcome = match config.alpha {
        AlphaMode::Oracle => {
            let b = oracle
                .as_ref()
                .ok_or(Error::TooLarge {
                    size: (instance.m() as f64).powi(instance.n() as i32),
                    limit: EXHAUSTIVE_LIMIT,
                })?
                .optimal_cost;
            // an empty trace has B = 0; any positive guess behaves the same
            let alpha = if b > 0.0 { b } else { instance.total_cost() };
            run_fixed_alpha(instance, alpha, engine, config.seed)?
        }
        AlphaMode::Fixed(alpha) => run_fixed_alpha(instance, alpha, engine, config.seed)?,
        AlphaMode::Doubling => run_with_doubling(
            instance,
            DoublingConfig {
                initial_guess: None,
                bound_constant: config.bound_constant,
                engine,
                recover: config.recover,
            },
            config.seed,
        )?,
    };
    let violations = collect_violations(instance, &outcome, config.checks);
    let l = instance.makespan_budget;
    let clamp_count = outcome
        .states
        .iter()
        .flatten()
        .map(|s| s.clamps().total())
        .sum();
    let (frac_cost, frac_makespan) = outcome.final_state().map_or((0.0, 0.0), |s| {
        (s.fractional_cost_original(), s.fractional_makespan() * l)
    });
    let rounding = &outcome.rounding;
    let b = oracle.as_ref().map(|o| o.optimal_cost);
    let int_cost = rounding.int_cost();
    let row = ReportRow {
        seed: config.seed,
        b,
        l,
        frac_cost,
        frac_makespan,
        int_cost,
        int_makespan: rounding.int_makespan() * l,
        cost_ratio: b.filter(|&b| b > 0.0).map(|b| int_cost / b),
        makespan_ratio: rounding.int_makespan(),
        clamp_count,
        fallback_count: rounding.fallback_count(),
        invariant_violations: violations.len() as u64,
    };
    Ok(RunArtifacts {
        instance: instance.clone(),
        config: *config,
        oracle,
        outcome,
        violations,
        row,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PhaseMeta {
    phase: usize,
    guess: f64,
    initial_potential: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunMeta {
    version: u64,
    m: usize,
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    a: f64,
    #[serde(rename = "C")]
    c: f64,
    seed: u64,
    alpha: String,
    recover_all: bool,
    checks: CheckSet,
    phases: Vec<PhaseMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct YRecord {
    phase: usize,
    job: usize,
    machine: usize,
    p: f64,
    y: f64,
    x_after: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MachineRecord {
    phase: usize,
    machine: usize,
    cost: f64,
    x: f64,
    load: f64,
    fully_active: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct StepRecord {
    job: usize,
    step_idx: u64,
    #[serde(rename = "type")]
    step_type: String,
    delta_phi: f64,
    delta_coverage: f64,
    #[allow(dead_code)]
    machines_touched: String,
}

#[derive(Debug, Clone, Deserialize)]
struct AssignmentCsv {
    job: usize,
    machine: usize,
    p_ij: f64,
    newly_activated_cost: f64,
    cum_cost: f64,
    int_makespan: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct PhaseCsv {
    phase: usize,
    guess: f64,
    jobs_processed: usize,
    #[allow(dead_code)]
    frac_cost: f64,
    int_cost_delta: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes every log and the report row of `run` into `dir`.
pub fn write_run_logs(dir: &Path, run: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    run.instance.save(dir.join("instance.json"))?;

    let meta = RunMeta {
        version: 1,
        m: run.instance.m(),
        n: run.instance.n_declared,
        l: run.instance.makespan_budget,
        a: run.config.base,
        c: run.config.bound_constant,
        seed: run.config.seed,
        alpha: run.config.alpha.to_string(),
        recover_all: run.config.recover == RecoverPolicy::AllJobs,
        checks: run.config.checks,
        phases: run
            .outcome
            .phases
            .iter()
            .zip(&run.outcome.states)
            .map(|(p, s)| PhaseMeta {
                phase: p.phase,
                guess: p.guess,
                initial_potential: s.as_ref().map(|s| s.initial_potential()),
            })
            .collect(),
    };
    let meta_path = dir.join("run.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n",
    )
    .map_err(|e| Error::io(&meta_path, e))?;

    let steps: Vec<_> = run
        .outcome
        .states
        .iter()
        .flatten()
        .flat_map(|s| s.step_log().iter().cloned())
        .collect();
    write_step_log(&steps, create(&dir.join("step_log.csv"))?)?;
    write_assignment_log(
        run.outcome.rounding.log(),
        create(&dir.join("assignment_log.csv"))?,
    )?;
    write_phase_log(&run.outcome.phases, create(&dir.join("phase_log.csv"))?)?;

    let mut ylog = csv_writer(&dir.join("y_log.csv"))?;
    let mut mlog = csv_writer(&dir.join("machines.csv"))?;
    for (phase, state) in run.outcome.states.iter().enumerate() {
        let Some(state) = state else { continue };
        for row in state.rows() {
            for &i in state.live_machines() {
                ylog.serialize(YRecord {
                    phase,
                    job: row.job,
                    machine: i,
                    p: row.p[i],
                    y: row.y[i],
                    x_after: row.x_after.get(i).copied(),
                })?;
            }
        }
        for &i in state.live_machines() {
            mlog.serialize(MachineRecord {
                phase,
                machine: i,
                cost: state.scaled_costs()[i],
                x: state.x()[i],
                load: state.loads()[i],
                fully_active: state.is_fully_active(i),
            })?;
        }
    }
    ylog.flush()
        .map_err(|e| Error::io(dir.join("y_log.csv"), e))?;
    mlog.flush()
        .map_err(|e| Error::io(dir.join("machines.csv"), e))?;

    let mut report = csv_writer(&dir.join("report.csv"))?;
    report.serialize(&run.row)?;
    report
        .flush()
        .map_err(|e| Error::io(dir.join("report.csv"), e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(Error::from)
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: usize,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, found: Vec<String>) {
        self.checks += 1;
        self.violations.extend(found);
    }
}

/// Re-checks every invariant from the files in a log directory.
pub fn verify_logdir(dir: &Path) -> Result<VerifyReport> {
    let meta_path = dir.join("run.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RunMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let instance = Instance::load(dir.join("instance.json"))?;
    let ys: Vec<YRecord> = read_csv(&dir.join("y_log.csv"))?;
    let machines: Vec<MachineRecord> = read_csv(&dir.join("machines.csv"))?;
    let steps: Vec<StepRecord> = read_csv(&dir.join("step_log.csv"))?;
    let assignments: Vec<AssignmentCsv> = read_csv(&dir.join("assignment_log.csv"))?;
    let phases: Vec<PhaseCsv> = read_csv(&dir.join("phase_log.csv"))?;
    let reports: Vec<ReportRow> = read_csv(&dir.join("report.csv"))?;

    let m = instance.m();
    let l = instance.makespan_budget;
    let mut report = VerifyReport::default();

    if meta.m != m || meta.n != instance.n_declared || meta.l != l {
        report.violations.push(format!(
            "run.json (m = {}, n = {}, L = {}) disagrees with instance.json",
            meta.m, meta.n, meta.l
        ));
    }

    // fractional rows and machine state per phase
    for phase in &meta.phases {
        let Some(initial) = phase.initial_potential else {
            continue;
        };
        let tag = |v: String| format!("phase {}: {v}", phase.phase);
        let live_records: Vec<&MachineRecord> =
            machines.iter().filter(|r| r.phase == phase.phase).collect();
        let live: Vec<usize> = live_records.iter().map(|r| r.machine).collect();
        let mut loads = vec![0.0; m];
        let mut x = vec![0.0; m];
        let mut flags = Vec::new();
        for r in &live_records {
            loads[r.machine] = r.load;
            x[r.machine] = r.x;
            if r.fully_active != (r.x == 1.0) {
                flags.push(format!(
                    "machine {}: fully_active = {} but x = {}",
                    r.machine, r.fully_active, r.x
                ));
            }
        }
        report.record(flags.into_iter().map(tag).collect());

        let mut rows: Vec<JobRow> = Vec::new();
        for y in ys.iter().filter(|y| y.phase == phase.phase) {
            if rows.last().is_none_or(|r| r.job != y.job) {
                rows.push(JobRow {
                    job: y.job,
                    p: vec![0.0; m],
                    y: vec![0.0; m],
                    x_after: if y.x_after.is_some() {
                        vec![0.0; m]
                    } else {
                        Vec::new()
                    },
                });
            }
            let row = rows.last_mut().expect("just pushed");
            row.p[y.machine] = y.p;
            row.y[y.machine] = y.y;
            if let Some(xa) = y.x_after {
                if row.x_after.is_empty() {
                    report.violations.push(format!(
                        "phase {}: job {} mixes complete and incomplete records",
                        phase.phase, y.job
                    ));
                } else {
                    row.x_after[y.machine] = xa;
                }
            }
        }
        for row in &rows {
            let expected = instance.jobs.get(row.job).map(|j| &j.processing_times);
            let Some(expected) = expected else {
                report
                    .violations
                    .push(format!("y_log names unknown job {}", row.job));
                continue;
            };
            for &i in &live {
                if (row.p[i] - expected[i] / l).abs() > TOLERANCE * row.p[i].abs().max(1.0) {
                    report.violations.push(format!(
                        "phase {}: job {} machine {i}: logged p {} differs from instance",
                        phase.phase, row.job, row.p[i]
                    ));
                }
            }
        }
        report.record(check_rfslp(&rows, &live, m).into_iter().map(tag).collect());
        report.record(
            check_loads(&rows, &live, &loads, &x)
                .into_iter()
                .map(tag)
                .collect(),
        );
        report.record(
            check_potential(initial, m, meta.n, std::iter::empty())
                .into_iter()
                .map(tag)
                .collect(),
        );
    }

    let mut bad_steps = check_potential(
        0.0,
        m,
        meta.n,
        steps.iter().map(|s| (s.job, s.step_idx, s.delta_phi)),
    );
    for s in &steps {
        if s.delta_coverage <= 0.0 {
            bad_steps.push(format!(
                "job {} step {}: no coverage progress",
                s.job, s.step_idx
            ));
        }
        if s.step_type != "A" && s.step_type != "B" {
            bad_steps.push(format!(
                "job {} step {}: unknown type {}",
                s.job, s.step_idx, s.step_type
            ));
        }
    }
    report.record(bad_steps);

    // integer schedule
    let mut found = Vec::new();
    let mut seen = vec![0usize; instance.n()];
    let mut int_load = vec![0.0; m];
    let mut cum = 0.0;
    for a in &assignments {
        let Some(job) = instance.jobs.get(a.job) else {
            found.push(format!("assignment log names unknown job {}", a.job));
            continue;
        };
        if a.machine >= m {
            found.push(format!("job {}: unknown machine {}", a.job, a.machine));
            continue;
        }
        seen[a.job] += 1;
        if a.p_ij != job.p(a.machine) {
            found.push(format!(
                "job {}: logged p_ij {} differs from instance {}",
                a.job,
                a.p_ij,
                job.p(a.machine)
            ));
        }
        int_load[a.machine] += a.p_ij;
        cum += a.newly_activated_cost;
        if (cum - a.cum_cost).abs() > TOLERANCE * cum.max(1.0) {
            found.push(format!(
                "job {}: cum_cost {} differs from summed activations {cum}",
                a.job, a.cum_cost
            ));
        }
        let makespan = int_load.iter().cloned().fold(0.0, f64::max);
        if (makespan - a.int_makespan).abs() > TOLERANCE * makespan.max(1.0) {
            found.push(format!(
                "job {}: int_makespan {} differs from recomputed {makespan}",
                a.job, a.int_makespan
            ));
        }
    }
    for (j, &count) in seen.iter().enumerate() {
        if count != 1 {
            found.push(format!("job {j} assigned {count} times"));
        }
    }
    report.record(found);

    // phases and report
    let mut found = Vec::new();
    for w in phases.windows(2) {
        if w[1].guess != 2.0 * w[0].guess || w[1].phase != w[0].phase + 1 {
            found.push(format!(
                "phase {} guess {} does not double phase {} guess {}",
                w[1].phase, w[1].guess, w[0].phase, w[0].guess
            ));
        }
    }
    let jobs: usize = phases.iter().map(|p| p.jobs_processed).sum();
    if jobs != instance.n() {
        found.push(format!(
            "phases processed {jobs} jobs, instance has {}",
            instance.n()
        ));
    }
    let sunk: f64 = phases.iter().map(|p| p.int_cost_delta).sum();
    match reports.as_slice() {
        [row] => {
            if (sunk - row.int_cost).abs() > TOLERANCE * row.int_cost.max(1.0) {
                found.push(format!(
                    "phase cost deltas sum to {sunk}, report says {}",
                    row.int_cost
                ));
            }
            if (cum - row.int_cost).abs() > TOLERANCE * row.int_cost.max(1.0) {
                found.push(format!(
                    "assignment log cost {cum} differs from report {}",
                    row.int_cost
                ));
            }
            let makespan = int_load.iter().cloned().fold(0.0, f64::max);
            if (makespan - row.int_makespan).abs() > TOLERANCE * makespan.max(1.0)
                || (row.makespan_ratio - makespan / l).abs()
                    > TOLERANCE * row.makespan_ratio.max(1.0)
            {
                found.push(format!(
                    "report makespan {} / ratio {} inconsistent with assignments ({makespan})",
                    row.int_makespan, row.makespan_ratio
                ));
            }
            if row.invariant_violations != 0 {
                found.push(format!(
                    "report records {} invariant violations",
                    row.invariant_violations
                ));
            }
        }
        other => found.push(format!("report.csv holds {} rows, expected 1", other.len())),
    }
    report.record(found);
    Ok(report)
}

fn default_instances() -> u64 {
    10
}
fn default_model() -> PtimeModel {
    PtimeModel::Uniform
}
fn default_cost_range() -> (f64, f64) {
    (1.0, 10.0)
}
fn default_alpha() -> String {
    "oracle".into()
}
fn default_one() -> u64 {
    1
}
fn default_base() -> f64 {
    DEFAULT_BASE
}
fn default_c() -> f64 {
    DEFAULT_BOUND_CONSTANT
}

/// Seed grid for [`run_sweep`]; deserializable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    /// Instances generated per `(m, n)` pair.
    #[serde(default = "default_instances")]
    pub instances: u64,
    #[serde(default)]
    pub instance_seed: u64,
    #[serde(default = "default_model")]
    pub model: PtimeModel,
    #[serde(default = "default_cost_range")]
    pub cost_range: (f64, f64),
    #[serde(default = "default_alpha")]
    pub alpha: String,
    /// Rounding seeds per instance, starting at `seed`.
    #[serde(default = "default_one")]
    pub rounding_seeds: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_base")]
    pub a: f64,
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub recover_all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub instance_seed: u64,
    pub seed: u64,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    pub frac_cost: f64,
    pub frac_cost_scaled: f64,
    pub frac_makespan: f64,
    pub int_cost: f64,
    pub int_makespan: f64,
    pub cost_ratio: Option<f64>,
    pub makespan_ratio: f64,
    pub clamp_count: u64,
    pub fallback_count: u64,
    pub phases: usize,
    pub max_step_potential: f64,
    pub invariant_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn summarize(metric: &str, values: &[f64]) -> SummaryRow {
    let count = values.len();
    SummaryRow {
        metric: metric.to_string(),
        count,
        mean: values.iter().sum::<f64>() / count.max(1) as f64,
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        p95: percentile(values, 0.95),
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let alpha: AlphaMode = config.alpha.parse()?;
    let mut jobs = Vec::new();
    for &m in &config.m {
        for &n in &config.n {
            for k in 0..config.instances {
                for r in 0..config.rounding_seeds {
                    jobs.push((m, n, config.instance_seed + k, config.seed + r));
                }
            }
        }
    }
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(m, n, instance_seed, seed)| {
            let gen = GeneratorConfig {
                m,
                n,
                seed: instance_seed,
                cost_range: config.cost_range,
                ptime_model: config.model,
                shuffle: false,
            };
            gen.validate()?;
            let instance = generate(&gen);
            let run = run_pipeline(
                &instance,
                &RunConfig {
                    alpha,
                    seed,
                    base: config.a,
                    bound_constant: config.c,
                    recover: if config.recover_all {
                        RecoverPolicy::AllJobs
                    } else {
                        RecoverPolicy::TriggeringJob
                    },
                    checks: CheckSet::default(),
                },
            )?;
            let r = &run.row;
            Ok(SweepRow {
                m,
                n,
                instance_seed,
                seed,
                b: r.b,
                l: r.l,
                frac_cost: r.frac_cost,
                frac_cost_scaled: run.frac_cost_scaled(),
                frac_makespan: r.frac_makespan,
                int_cost: r.int_cost,
                int_makespan: r.int_makespan,
                cost_ratio: r.cost_ratio,
                makespan_ratio: r.makespan_ratio,
                clamp_count: r.clamp_count,
                fallback_count: r.fallback_count,
                phases: run.outcome.phase_count(),
                max_step_potential: run.max_step_potential(),
                invariant_violations: r.invariant_violations,
            })
        })
        .collect::<Result<_>>()?;

    let col =
        |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let log_m = |row: &SweepRow| 1.0 + (row.m as f64).ln();
    let summary = vec![
        summarize("cost_ratio", &col(&|r| r.cost_ratio)),
        summarize("makespan_ratio", &col(&|r| Some(r.makespan_ratio))),
        summarize(
            "frac_cost_per_m_log_m",
            &col(&|r| Some(r.frac_cost_scaled / (r.m as f64 * log_m(r)))),
        ),
        summarize(
            "frac_load_per_log_m",
            &col(&|r| Some(r.frac_makespan / r.l / log_m(r))),
        ),
        summarize(
            "step_potential_times_n",
            &col(&|r| Some(r.max_step_potential * r.n as f64)),
        ),
        summarize("fallback_count", &col(&|r| Some(r.fallback_count as f64))),
        summarize("phases", &col(&|r| Some(r.phases as f64))),
        summarize(
            "invariant_violations",
            &col(&|r| Some(r.invariant_violations as f64)),
        ),
    ];
    Ok(SweepReport { rows, summary })
}

/// Writes `runs.csv` and `summary.csv` into `dir`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let runs = dir.join("runs.csv");
    let mut w = csv_writer(&runs)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&runs, e))?;
    let summary = dir.join("summary.csv");
    let mut w = csv_writer(&summary)?;
    for row in &report.summary {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&summary, e))?;
    Ok(vec![runs, summary])
}
