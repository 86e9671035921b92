//! Online fractional primal-dual engine.
//!
//! The engine keeps a fractional solution `(x, y)` to the relaxed scheduling
//! LP: packing `sum_j p_ij y_ij <= 6 x_i` on partially active machines,
//! `y_ij <= 2 x_i`, and covering `sum_i y_ij >= 1`. Processing times are
//! measured in units of `L` and startup costs are normalized so that the
//! offline optimum costs between `m` and `2m`.
//!
//! For each arriving job the engine repeats algorithmic steps until the job
//! is covered. Each step sorts the live machines by virtual cost, splits off
//! the maximal prefix whose `x` sums strictly below one, and then either
//! raises `x` multiplicatively on the prefix and the pivot (type A, pivot
//! not fully active) or raises `x` on the prefix and pushes load directly
//! onto the fully active pivot (type B).

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Instance, Job};

pub const DEFAULT_BASE: f64 = 1.05;
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;
pub const TOLERANCE: f64 = 1e-9;

/// Upper end (exclusive) of the admissible exponential base.
pub const BASE_UPPER: f64 = 13.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StepType {
    A,
    B,
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepType::A => "A",
            StepType::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub job: usize,
    pub step_idx: u64,
    pub step_type: StepType,
    pub machines_touched: Vec<usize>,
    pub delta_potential: f64,
    pub delta_coverage: f64,
    /// Part of `delta_potential` caused by machines switching to the fully
    /// active branch of the potential (`c a^(l-1)` replacing `c x`).
    pub transition_jump: f64,
}

/// Ordering of live machines for one job: the prefix `P(j)` and pivot `k(j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub order: Vec<usize>,
    pub prefix: Vec<usize>,
    pub pivot: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounts {
    /// Increments cut by `y_ij <= min(2 x_i, 1)`.
    pub fraction: u64,
    /// Increments cut so that coverage does not exceed one.
    pub coverage: u64,
}

impl ClampCounts {
    pub fn total(&self) -> u64 {
        self.fraction + self.coverage
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Exponential base `a` of the virtual cost, in `(1, 13/12)`.
    pub base: f64,
    pub step_cap: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            base: DEFAULT_BASE,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl EngineConfig {
    pub fn with_base(base: f64) -> Self {
        EngineConfig {
            base,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 1.0 && self.base < BASE_UPPER) {
            return Err(Error::InvalidArgument(format!(
                "exponential base a = {} must lie strictly between 1 and 13/12",
                self.base
            )));
        }
        if self.step_cap == 0 {
            return Err(Error::InvalidArgument("step cap must be positive".into()));
        }
        Ok(())
    }
}

/// Fractional assignment of one processed (or in-progress) job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRow {
    pub job: usize,
    /// Processing times in units of `L`.
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    /// `x` at the end of this job's update; empty while the job is in progress.
    pub x_after: Vec<f64>,
}

impl JobRow {
    pub fn coverage(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn is_complete(&self) -> bool {
        !self.x_after.is_empty()
    }
}

/// Result of [`FractionalState::process_job_within`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobProgress {
    Covered {
        steps: u64,
    },
    /// The potential passed the supplied limit before the job was covered.
    LimitExceeded {
        steps: u64,
        potential: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FractionalState {
    m: usize,
    n: usize,
    base: f64,
    alpha: f64,
    step_cap: u64,
    original_costs: Vec<f64>,
    costs: Vec<f64>,
    discarded: Vec<bool>,
    live: Vec<usize>,
    x: Vec<f64>,
    load: Vec<f64>,
    rows: Vec<JobRow>,
    step_log: Vec<StepOutcome>,
    clamps: ClampCounts,
    phi: f64,
    initial_phi: f64,
    job_steps: u64,
}

impl FractionalState {
    /// Normalizes costs for the guess `alpha` and initializes `x`.
    ///
    /// Costs are multiplied by `m / alpha`. Machines whose normalized cost
    /// exceeds `m` are discarded; those at or below one are raised to one and
    /// start fully active; the rest start at `x = 1/m`.
    pub fn preprocess(instance: &Instance, alpha: f64, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        let m = instance.m();
        let mf = m as f64;
        let scale = mf / alpha;
        let original_costs = instance.costs();
        let mut costs = vec![0.0; m];
        let mut discarded = vec![false; m];
        let mut x = vec![0.0; m];
        for (i, &c) in original_costs.iter().enumerate() {
            let scaled = c * scale;
            // compare in original units so a machine costing exactly alpha survives rounding
            if c > alpha {
                discarded[i] = true;
                costs[i] = scaled;
            } else if scaled <= 1.0 {
                costs[i] = 1.0;
                x[i] = 1.0;
            } else {
                costs[i] = scaled.min(mf);
                x[i] = 1.0 / mf;
            }
        }
        let live: Vec<usize> = (0..m).filter(|&i| !discarded[i]).collect();
        if live.is_empty() {
            return Err(Error::GuessTooSmall { alpha });
        }
        let mut state = FractionalState {
            m,
            n: instance.n_declared,
            base: config.base,
            alpha,
            step_cap: config.step_cap,
            original_costs,
            costs,
            discarded,
            live,
            x,
            load: vec![0.0; m],
            rows: Vec::new(),
            step_log: Vec::new(),
            clamps: ClampCounts::default(),
            phi: 0.0,
            initial_phi: 0.0,
            job_steps: 0,
        };
        state.phi = state.potential();
        state.initial_phi = state.phi;
        Ok(state)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn loads(&self) -> &[f64] {
        &self.load
    }

    pub fn scaled_costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn discarded(&self) -> &[bool] {
        &self.discarded
    }

    pub fn live_machines(&self) -> &[usize] {
        &self.live
    }

    pub fn is_fully_active(&self, i: usize) -> bool {
        self.x[i] == 1.0
    }

    pub fn rows(&self) -> &[JobRow] {
        &self.rows
    }

    pub fn row(&self, job: usize) -> Option<&JobRow> {
        self.rows.iter().rev().find(|r| r.job == job)
    }

    pub fn step_log(&self) -> &[StepOutcome] {
        &self.step_log
    }

    pub fn clamps(&self) -> ClampCounts {
        self.clamps
    }

    fn n_for_updates(&self) -> f64 {
        self.n.max(1) as f64
    }

    fn machine_potential(&self, i: usize) -> f64 {
        if self.is_fully_active(i) {
            self.costs[i] * self.base.powf(self.load[i] - 1.0)
        } else {
            self.costs[i] * self.x[i]
        }
    }

    /// Sum of per-machine potentials over live machines.
    pub fn potential(&self) -> f64 {
        self.live.iter().map(|&i| self.machine_potential(i)).sum()
    }

    /// Potential right after pre-processing.
    pub fn initial_potential(&self) -> f64 {
        self.initial_phi
    }

    /// Incrementally tracked potential; equals [`potential`](Self::potential) up to rounding.
    pub fn running_potential(&self) -> f64 {
        self.phi
    }

    /// `sum_i c_i x_i` in normalized cost units.
    pub fn fractional_cost(&self) -> f64 {
        self.live.iter().map(|&i| self.costs[i] * self.x[i]).sum()
    }

    /// `sum_i c_i x_i` with the instance's original startup costs.
    pub fn fractional_cost_original(&self) -> f64 {
        self.live
            .iter()
            .map(|&i| self.original_costs[i] * self.x[i])
            .sum()
    }

    /// Maximum fractional load, in units of `L`.
    pub fn fractional_makespan(&self) -> f64 {
        self.live.iter().map(|&i| self.load[i]).fold(0.0, f64::max)
    }

    fn virtual_cost_scaled(&self, i: usize, p: f64) -> f64 {
        if self.is_fully_active(i) {
            self.costs[i] * self.base.powf(self.load[i] - 1.0) * p
        } else {
            self.costs[i] * p
        }
    }

    /// Virtual cost of `job` on live machine `i`.
    pub fn virtual_cost(&self, i: usize, job: &Job, makespan_budget: f64) -> f64 {
        debug_assert!(!self.discarded[i]);
        self.virtual_cost_scaled(i, job.p(i) / makespan_budget)
    }

    fn split_for(&self, p: &[f64]) -> Split {
        let mut keyed: Vec<(f64, usize)> = self
            .live
            .iter()
            .map(|&i| (self.virtual_cost_scaled(i, p[i]), i))
            .collect();
        keyed.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let order: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
        let mut prefix = Vec::new();
        let mut sum = 0.0;
        let mut pivot = None;
        for &i in &order {
            if sum + self.x[i] < 1.0 {
                sum += self.x[i];
                prefix.push(i);
            } else {
                pivot = Some(i);
                break;
            }
        }
        Split {
            order,
            prefix,
            pivot,
        }
    }

    /// Sorts live machines by virtual cost (ties by id) and splits off the prefix.
    pub fn order_and_split(&self, job: &Job, makespan_budget: f64) -> Split {
        let p: Vec<f64> = job
            .processing_times
            .iter()
            .map(|&v| v / makespan_budget)
            .collect();
        self.split_for(&p)
    }

    /// Opens a row for `job` unless it is already the job in progress.
    pub fn begin_job(&mut self, job: &Job, makespan_budget: f64) {
        if let Some(last) = self.rows.last() {
            if last.job == job.id && !last.is_complete() {
                return;
            }
        }
        self.job_steps = 0;
        self.rows.push(JobRow {
            job: job.id,
            p: job
                .processing_times
                .iter()
                .map(|&v| v / makespan_budget)
                .collect(),
            y: vec![0.0; self.m],
            x_after: Vec::new(),
        });
    }

    fn current_row_index(&self) -> Result<usize> {
        match self.rows.last() {
            Some(r) if !r.is_complete() => Ok(self.rows.len() - 1),
            _ => Err(Error::InvalidArgument(
                "no job in progress; call begin_job first".into(),
            )),
        }
    }

    /// Executes one type A or type B step for the job in progress.
    pub fn execute_step(&mut self) -> Result<StepOutcome> {
        let r = self.current_row_index()?;
        let job = self.rows[r].job;
        let coverage_before = self.rows[r].coverage();
        let split = self.split_for(&self.rows[r].p);
        let pivot_full = split.pivot.is_some_and(|k| self.is_fully_active(k));
        let step_type = if pivot_full { StepType::B } else { StepType::A };

        let mut raised = split.prefix.clone();
        if step_type == StepType::A {
            raised.extend(split.pivot);
        }
        let mut touched = raised.clone();
        if step_type == StepType::B {
            touched.extend(split.pivot);
        }
        let phi_before: f64 = touched.iter().map(|&i| self.machine_potential(i)).sum();

        let was_partial: Vec<bool> = raised.iter().map(|&i| !self.is_fully_active(i)).collect();
        let n = self.n_for_updates();
        let mut increments: Vec<(usize, f64)> = Vec::with_capacity(touched.len());
        for &i in &raised {
            let p = self.rows[r].p[i];
            let before = self.x[i];
            let after = (before * (1.0 + 1.0 / (self.costs[i] * n))).min(1.0);
            self.x[i] = after;
            increments.push((i, effective_capacity(before, after - before, p)));
        }
        if let (StepType::B, Some(k)) = (step_type, split.pivot) {
            let eta = self.virtual_cost_scaled(k, self.rows[r].p[k]);
            increments.push((k, 6.0 / (eta * n)));
        }

        for (i, inc) in increments.iter_mut() {
            let room = ((2.0 * self.x[*i]).min(1.0) - self.rows[r].y[*i]).max(0.0);
            if *inc > room {
                *inc = room;
                self.clamps.fraction += 1;
            }
        }
        let total: f64 = increments.iter().map(|(_, d)| d).sum();
        let remaining = (1.0 - coverage_before).max(0.0);
        if total > remaining {
            let scale = remaining / total;
            for (_, d) in increments.iter_mut() {
                *d *= scale;
            }
            self.clamps.coverage += 1;
        }

        {
            let row = &mut self.rows[r];
            for &(i, d) in &increments {
                row.y[i] += d;
            }
            // Scaling can leave the sum a few ulps above one.
            let mut excess = row.coverage() - 1.0;
            while excess > 0.0 {
                let Some(&(i, _)) = increments
                    .iter()
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
                else {
                    break;
                };
                let cut = excess.min(row.y[i]);
                row.y[i] -= cut;
                let pos = increments.iter().position(|e| e.0 == i).expect("present");
                increments[pos].1 -= cut;
                let next = row.coverage() - 1.0;
                if next >= excess {
                    break;
                }
                excess = next;
            }
        }
        for &(i, d) in &increments {
            self.load[i] += self.rows[r].p[i] * d;
        }

        let delta_coverage = self.rows[r].coverage() - coverage_before;
        let phi_after: f64 = touched.iter().map(|&i| self.machine_potential(i)).sum();
        let delta_potential = phi_after - phi_before;
        let transition_jump: f64 = raised
            .iter()
            .zip(&was_partial)
            .filter(|&(&i, &partial)| partial && self.is_fully_active(i))
            .map(|(&i, _)| self.machine_potential(i) - self.costs[i])
            .sum();
        self.phi += delta_potential;
        if delta_coverage <= 0.0 {
            return Err(Error::StalledStep { job });
        }
        let step_idx = self.job_steps;
        self.job_steps += 1;
        let outcome = StepOutcome {
            job,
            step_idx,
            step_type,
            machines_touched: touched,
            delta_potential,
            delta_coverage,
            transition_jump,
        };
        self.step_log.push(outcome.clone());
        Ok(outcome)
    }

    /// Covers `job` fractionally and returns the steps taken.
    pub fn process_job(&mut self, job: &Job, makespan_budget: f64) -> Result<&[StepOutcome]> {
        let start = self.step_log.len();
        self.process_job_within(job, makespan_budget, None)?;
        Ok(&self.step_log[start..])
    }

    /// Like [`process_job`](Self::process_job), but stops early once the
    /// running potential passes `potential_limit`. The job row is left
    /// incomplete in that case.
    pub fn process_job_within(
        &mut self,
        job: &Job,
        makespan_budget: f64,
        potential_limit: Option<f64>,
    ) -> Result<JobProgress> {
        self.begin_job(job, makespan_budget);
        let r = self.rows.len() - 1;
        let mut steps = 0u64;
        while self.rows[r].coverage() < 1.0 - TOLERANCE {
            if steps >= self.step_cap {
                return Err(Error::StepCapExceeded {
                    job: job.id,
                    cap: self.step_cap,
                    coverage: self.rows[r].coverage(),
                    dump: self.dump(),
                });
            }
            self.execute_step()?;
            steps += 1;
            if let Some(limit) = potential_limit {
                if self.phi > limit {
                    return Ok(JobProgress::LimitExceeded {
                        steps,
                        potential: self.phi,
                    });
                }
            }
        }
        self.rows[r].x_after = self.x.clone();
        Ok(JobProgress::Covered { steps })
    }

    /// Recomputes `sum_j p_ij y_ij` for machine `i` from the stored rows.
    pub fn recomputed_load(&self, i: usize) -> f64 {
        self.rows.iter().map(|r| r.p[i] * r.y[i]).sum()
    }

    /// Checks the relaxed LP constraints and internal consistency.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for row in self.rows.iter().filter(|r| r.is_complete()) {
            let cov = row.coverage();
            if !(1.0 - TOLERANCE..=1.0 + TOLERANCE).contains(&cov) {
                out.push(format!("job {}: coverage {cov}", row.job));
            }
            for &i in &self.live {
                if row.y[i] > 2.0 * self.x[i] + TOLERANCE {
                    out.push(format!(
                        "job {}: y[{i}] = {} exceeds 2x = {}",
                        row.job,
                        row.y[i],
                        2.0 * self.x[i]
                    ));
                }
            }
        }
        for &i in &self.live {
            if !self.is_fully_active(i) && self.load[i] > 6.0 * self.x[i] + TOLERANCE {
                out.push(format!(
                    "machine {i}: load {} exceeds 6x = {} while partially active",
                    self.load[i],
                    6.0 * self.x[i]
                ));
            }
            let recomputed = self.recomputed_load(i);
            if (recomputed - self.load[i]).abs() > TOLERANCE * self.load[i].max(1.0) {
                out.push(format!(
                    "machine {i}: tracked load {} differs from recomputed {recomputed}",
                    self.load[i]
                ));
            }
            if !(0.0..=1.0).contains(&self.x[i]) {
                out.push(format!("machine {i}: x = {} out of range", self.x[i]));
            }
        }
        out
    }

    fn dump(&self) -> String {
        let mut s = format!(
            "alpha = {}, a = {}, n = {}, potential = {}\n",
            self.alpha, self.base, self.n, self.phi
        );
        for &i in &self.live {
            s.push_str(&format!(
                "  machine {i}: c = {}, x = {}, load = {}\n",
                self.costs[i], self.x[i], self.load[i]
            ));
        }
        if let Some(row) = self.rows.last() {
            s.push_str(&format!("  job {} y = {:?}\n", row.job, row.y));
        }
        s
    }

    pub fn has_incomplete_row(&self) -> bool {
        self.rows.last().is_some_and(|r| !r.is_complete())
    }
}

/// Increase of `y_ij` unlocked by raising `x_i` by `delta_x`.
pub fn effective_capacity(x_before: f64, delta_x: f64, p: f64) -> f64 {
    (2.0 * x_before).min(6.0 * delta_x / p)
}

/// Writes a step log as CSV with columns
/// `job,step_idx,type,delta_phi,delta_coverage,machines_touched`.
pub fn write_step_log<W: Write>(steps: &[StepOutcome], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "job",
        "step_idx",
        "type",
        "delta_phi",
        "delta_coverage",
        "machines_touched",
    ])?;
    for s in steps {
        let touched = s
            .machines_touched
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            s.job.to_string(),
            s.step_idx.to_string(),
            s.step_type.to_string(),
            s.delta_potential.to_string(),
            s.delta_coverage.to_string(),
            touched,
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}
