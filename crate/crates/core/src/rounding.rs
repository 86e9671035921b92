//! Online randomized rounding of the fractional schedule.
//!
//! Each machine draws a threshold `r_i` uniformly from `[0, 1]` before any
//! job arrives. After job `j`'s fractional update, every inactive machine with
//! `r_i <= 5 x_i(j) ln(mn)` is activated, and job `j` is sent to an active
//! machine with probability proportional to `z_ij`, where `z_ij` rescales
//! `y_ij` by `1 / (2 x_i(j))` for machines whose `x_i(j)` is below
//! `1 / (5 ln(mn))`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fractional::{FractionalState, TOLERANCE};
use crate::instance::{Instance, Job};

const THRESHOLD_STREAM: u64 = 0;
const ASSIGNMENT_STREAM: u64 = 1;

/// Draws the per-machine activation thresholds for `seed`.
pub fn draw_thresholds(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(THRESHOLD_STREAM);
    (0..m).map(|_| rng.random::<f64>()).collect()
}

/// Scaling of `y_ij` used by the assignment step.
pub fn z_value(y: f64, x_snapshot: f64, ln_mn: f64) -> f64 {
    if x_snapshot < 1.0 / (5.0 * ln_mn) {
        if x_snapshot > 0.0 {
            y / (2.0 * x_snapshot)
        } else {
            0.0
        }
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRecord {
    pub job: usize,
    pub machine: usize,
    /// Processing time on the chosen machine, in instance units.
    pub p: f64,
    pub newly_activated_cost: f64,
    pub cum_cost: f64,
    /// Integer makespan after this job, in instance units.
    pub int_makespan: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct RoundingState {
    seed: u64,
    m: usize,
    ln_mn: f64,
    makespan_budget: f64,
    costs: Vec<f64>,
    thresholds: Vec<f64>,
    active: Vec<bool>,
    assignment: Vec<Option<usize>>,
    int_load: Vec<f64>,
    int_cost: f64,
    sampler: ChaCha8Rng,
    log: Vec<AssignmentRecord>,
    fallback_count: u64,
    deficit_count: u64,
    z_bound_violations: u64,
    pending_cost: f64,
}

impl RoundingState {
    pub fn new(instance: &Instance, seed: u64) -> Self {
        let m = instance.m();
        let mn = (m * instance.n_declared.max(1)) as f64;
        let mut sampler = ChaCha8Rng::seed_from_u64(seed);
        sampler.set_stream(ASSIGNMENT_STREAM);
        RoundingState {
            seed,
            m,
            ln_mn: mn.ln(),
            makespan_budget: instance.makespan_budget,
            costs: instance.costs(),
            thresholds: draw_thresholds(m, seed),
            active: vec![false; m],
            assignment: vec![None; instance.n()],
            int_load: vec![0.0; m],
            int_cost: 0.0,
            sampler,
            log: Vec::new(),
            fallback_count: 0,
            deficit_count: 0,
            z_bound_violations: 0,
            pending_cost: 0.0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ln_mn(&self) -> f64 {
        self.ln_mn
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// Integer loads in units of `L`.
    pub fn int_load(&self) -> &[f64] {
        &self.int_load
    }

    /// Startup cost of the active set, in instance units.
    pub fn int_cost(&self) -> f64 {
        self.int_cost
    }

    /// Integer makespan in units of `L`.
    pub fn int_makespan(&self) -> f64 {
        self.int_load.iter().cloned().fold(0.0, f64::max)
    }

    pub fn log(&self) -> &[AssignmentRecord] {
        &self.log
    }

    /// Jobs for which no active machine had positive `z`.
    pub fn fallback_count(&self) -> u64 {
        self.fallback_count
    }

    /// Jobs for which the active machines' `z` summed below one.
    pub fn deficit_count(&self) -> u64 {
        self.deficit_count
    }

    pub fn z_bound_violations(&self) -> u64 {
        self.z_bound_violations
    }

    fn activate(&mut self, i: usize) -> f64 {
        if self.active[i] {
            return 0.0;
        }
        self.active[i] = true;
        self.int_cost += self.costs[i];
        self.costs[i]
    }

    /// Activates every inactive live machine whose threshold is met.
    pub fn activation_step(&mut self, fstate: &FractionalState, job: usize) -> Result<Vec<usize>> {
        let row = completed_row(fstate, job)?;
        let mut newly = Vec::new();
        for &i in fstate.live_machines() {
            if !self.active[i] && self.thresholds[i] <= 5.0 * row.x_after[i] * self.ln_mn {
                self.pending_cost += self.activate(i);
                newly.push(i);
            }
        }
        Ok(newly)
    }

    /// `z_ij` for every machine (zero on discarded ones).
    pub fn z_values(&self, fstate: &FractionalState, job: usize) -> Result<Vec<f64>> {
        let row = completed_row(fstate, job)?;
        let mut z = vec![0.0; self.m];
        for &i in fstate.live_machines() {
            z[i] = z_value(row.y[i], row.x_after[i], self.ln_mn);
        }
        Ok(z)
    }

    /// Samples a machine for `job` among the active ones.
    pub fn assignment_step(&mut self, fstate: &FractionalState, job: &Job) -> Result<usize> {
        let row = completed_row(fstate, job.id)?;
        let z = self.z_values(fstate, job.id)?;
        for &i in fstate.live_machines() {
            if row.x_after[i] < 1.0 / (5.0 * self.ln_mn) && z[i] > 1.0 + TOLERANCE {
                self.z_bound_violations += 1;
            }
        }
        let active_z: Vec<(usize, f64)> = fstate
            .live_machines()
            .iter()
            .filter(|&&i| self.active[i])
            .map(|&i| (i, z[i]))
            .filter(|&(_, zi)| zi > 0.0)
            .collect();
        let total: f64 = active_z.iter().map(|(_, zi)| zi).sum();
        // coverage itself may sit a few ulps below one
        if total < 1.0 - TOLERANCE {
            self.deficit_count += 1;
        }

        let (machine, fallback) = if total > 0.0 {
            let u = self.sampler.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = active_z.last().expect("nonempty").0;
            for &(i, zi) in &active_z {
                acc += zi;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            (chosen, false)
        } else {
            self.fallback_count += 1;
            let live = fstate.live_machines();
            let best_z = live
                .iter()
                .copied()
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if z[b] >= z[i] => Some(b),
                    _ if z[i] > 0.0 => Some(i),
                    _ => best,
                });
            let machine = best_z.unwrap_or_else(|| {
                live.iter()
                    .copied()
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if self.costs[b] * job.p(b) <= self.costs[i] * job.p(i) => Some(b),
                        _ => Some(i),
                    })
                    .expect("at least one live machine")
            });
            self.pending_cost += self.activate(machine);
            (machine, true)
        };

        self.assignment[job.id] = Some(machine);
        let p = job.p(machine);
        self.int_load[machine] += p / self.makespan_budget;
        self.log.push(AssignmentRecord {
            job: job.id,
            machine,
            p,
            newly_activated_cost: std::mem::take(&mut self.pending_cost),
            cum_cost: self.int_cost,
            int_makespan: self.int_makespan() * self.makespan_budget,
            fallback,
        });
        Ok(machine)
    }

    /// Fractional update, activation and assignment for the next job.
    pub fn process_job_rounded(
        &mut self,
        fstate: &mut FractionalState,
        job: &Job,
    ) -> Result<AssignmentRecord> {
        fstate.process_job(job, self.makespan_budget)?;
        self.activation_step(fstate, job.id)?;
        self.assignment_step(fstate, job)?;
        Ok(self.log.last().cloned().expect("record just pushed"))
    }

    /// Checks activation monotonicity bookkeeping and load consistency.
    pub fn violations(&self, instance: &Instance) -> Vec<String> {
        let mut out = Vec::new();
        let active_cost: f64 = (0..self.m)
            .filter(|&i| self.active[i])
            .map(|i| self.costs[i])
            .sum();
        if (active_cost - self.int_cost).abs() > TOLERANCE * active_cost.max(1.0) {
            out.push(format!(
                "integer cost {} differs from active-set cost {active_cost}",
                self.int_cost
            ));
        }
        let mut load = vec![0.0; self.m];
        for (j, a) in self.assignment.iter().enumerate() {
            if let Some(i) = *a {
                if !self.active[i] {
                    out.push(format!("job {j} assigned to inactive machine {i}"));
                }
                load[i] += instance.jobs[j].p(i) / self.makespan_budget;
            }
        }
        for (i, (&recomputed, &tracked)) in load.iter().zip(&self.int_load).enumerate() {
            if (recomputed - tracked).abs() > TOLERANCE * recomputed.max(1.0) {
                out.push(format!(
                    "machine {i}: integer load {tracked} differs from recomputed {recomputed}"
                ));
            }
        }
        if self.z_bound_violations > 0 {
            out.push(format!(
                "{} assignment steps saw z > 1 on a small-x machine",
                self.z_bound_violations
            ));
        }
        out
    }
}

fn completed_row(fstate: &FractionalState, job: usize) -> Result<&crate::fractional::JobRow> {
    fstate.row(job).filter(|r| r.is_complete()).ok_or_else(|| {
        Error::InvalidArgument(format!("job {job} has no completed fractional update"))
    })
}

/// Writes an assignment log as CSV with columns
/// `job,machine,p_ij,newly_activated_cost,cum_cost,int_makespan`.
pub fn write_assignment_log<W: Write>(records: &[AssignmentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "job",
        "machine",
        "p_ij",
        "newly_activated_cost",
        "cum_cost",
        "int_makespan",
    ])?;
    for r in records {
        w.write_record([
            r.job.to_string(),
            r.machine.to_string(),
            r.p.to_string(),
            r.newly_activated_cost.to_string(),
            r.cum_cost.to_string(),
            r.int_makespan.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}
