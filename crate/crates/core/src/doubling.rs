//! Guess-and-double wrapper for an unknown offline optimum.
//!
//! A phase runs the fractional and rounding engines under the current guess
//! `alpha`. When the phase's fractional solution outgrows the bound
//! `C m (1 + ln m)` the guess doubles and a new phase starts from a freshly
//! pre-processed fractional state. Integer activations and assignments made
//! in earlier phases are kept.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fractional::{EngineConfig, FractionalState, JobProgress};
use crate::instance::Instance;
use crate::rounding::RoundingState;

pub const DEFAULT_BOUND_CONSTANT: f64 = 50.0;

/// What a new phase does with jobs finished in earlier phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoverPolicy {
    /// Only the job that triggered the doubling is processed again.
    #[default]
    TriggeringJob,
    /// Every earlier job is re-covered fractionally (integer decisions stay).
    AllJobs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingConfig {
    /// Starting guess; defaults to [`trivial_lower_bound`].
    pub initial_guess: Option<f64>,
    pub bound_constant: f64,
    pub engine: EngineConfig,
    pub recover: RecoverPolicy,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        DoublingConfig {
            initial_guess: None,
            bound_constant: DEFAULT_BOUND_CONSTANT,
            engine: EngineConfig::default(),
            recover: RecoverPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub phase: usize,
    pub guess: f64,
    /// Jobs whose integer assignment happened in this phase.
    pub jobs_processed: usize,
    /// Fractional cost at the end of the phase, normalized units.
    pub frac_cost: f64,
    pub int_cost_delta: f64,
    pub triggered: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub phases: Vec<PhaseRecord>,
    /// Fractional state of each phase; `None` when pre-processing rejected the guess.
    pub states: Vec<Option<FractionalState>>,
    pub rounding: RoundingState,
}

impl PipelineOutcome {
    /// Fractional state of the last phase.
    pub fn final_state(&self) -> Option<&FractionalState> {
        self.states.last().and_then(Option::as_ref)
    }

    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }
}

/// `min_j min_{i : p_ij <= L} c_i`, a lower bound on the optimum.
pub fn trivial_lower_bound(instance: &Instance) -> f64 {
    let l = instance.makespan_budget;
    let per_job = instance.jobs.iter().filter_map(|job| {
        instance
            .machines
            .iter()
            .filter(|mc| job.p(mc.id) <= l)
            .map(|mc| mc.cost)
            .min_by(f64::total_cmp)
    });
    per_job
        .min_by(f64::total_cmp)
        .unwrap_or_else(|| instance.costs().into_iter().fold(f64::INFINITY, f64::min))
}

/// Cost threshold `C m (1 + ln m)` in normalized units.
pub fn phase_bound(m: usize, bound_constant: f64) -> f64 {
    let mf = m as f64;
    bound_constant * mf * (1.0 + mf.ln())
}

/// Runs the fractional and rounding engines with a fixed `alpha`.
pub fn run_fixed_alpha(
    instance: &Instance,
    alpha: f64,
    engine: EngineConfig,
    seed: u64,
) -> Result<PipelineOutcome> {
    let mut state = FractionalState::preprocess(instance, alpha, engine)?;
    let mut rounding = RoundingState::new(instance, seed);
    for job in &instance.jobs {
        rounding.process_job_rounded(&mut state, job)?;
    }
    Ok(PipelineOutcome {
        phases: vec![PhaseRecord {
            phase: 0,
            guess: alpha,
            jobs_processed: instance.n(),
            frac_cost: state.fractional_cost(),
            int_cost_delta: rounding.int_cost(),
            triggered: false,
        }],
        states: vec![Some(state)],
        rounding,
    })
}

/// Runs phases with a doubling guess until every job is scheduled.
pub fn run_with_doubling(
    instance: &Instance,
    config: DoublingConfig,
    seed: u64,
) -> Result<PipelineOutcome> {
    config.engine.validate()?;
    if config.bound_constant.is_nan() || config.bound_constant <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bound constant C must be positive, got {}",
            config.bound_constant
        )));
    }
    let mut guess = config
        .initial_guess
        .unwrap_or_else(|| trivial_lower_bound(instance));
    if !(guess > 0.0 && guess.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "initial guess must be positive and finite, got {guess}"
        )));
    }
    let l = instance.makespan_budget;
    let bound = phase_bound(instance.m(), config.bound_constant);
    let total_cost = instance.total_cost();
    let mut rounding = RoundingState::new(instance, seed);
    let mut phases = Vec::new();
    let mut states = Vec::new();
    let mut next_job = 0;

    loop {
        let phase = phases.len();
        let cost_at_start = rounding.int_cost();
        let mut record = PhaseRecord {
            phase,
            guess,
            jobs_processed: 0,
            frac_cost: 0.0,
            int_cost_delta: 0.0,
            triggered: false,
        };
        let state = match FractionalState::preprocess(instance, guess, config.engine) {
            Ok(mut state) => {
                let over = |s: &FractionalState, p: JobProgress| {
                    matches!(p, JobProgress::LimitExceeded { .. }) || s.fractional_cost() > bound
                };
                if config.recover == RecoverPolicy::AllJobs {
                    for job in &instance.jobs[..next_job] {
                        let progress = state.process_job_within(job, l, Some(bound))?;
                        if over(&state, progress) {
                            record.triggered = true;
                            break;
                        }
                    }
                }
                while !record.triggered && next_job < instance.n() {
                    let job = &instance.jobs[next_job];
                    let progress = state.process_job_within(job, l, Some(bound))?;
                    if over(&state, progress) {
                        record.triggered = true;
                        break;
                    }
                    rounding.activation_step(&state, job.id)?;
                    rounding.assignment_step(&state, job)?;
                    record.jobs_processed += 1;
                    next_job += 1;
                }
                record.frac_cost = state.fractional_cost();
                Some(state)
            }
            Err(Error::GuessTooSmall { .. }) => {
                record.triggered = true;
                None
            }
            Err(e) => return Err(e),
        };
        record.int_cost_delta = rounding.int_cost() - cost_at_start;
        let triggered = record.triggered;
        phases.push(record);
        states.push(state);
        if !triggered {
            break;
        }
        if guess >= total_cost {
            return Err(Error::DoublingAborted {
                guess,
                total_cost,
                bound_constant: config.bound_constant,
            });
        }
        guess *= 2.0;
    }

    Ok(PipelineOutcome {
        phases,
        states,
        rounding,
    })
}

/// Writes a phase log as CSV with columns
/// `phase,guess,jobs_processed,frac_cost,int_cost_delta`.
pub fn write_phase_log<W: Write>(phases: &[PhaseRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "phase",
        "guess",
        "jobs_processed",
        "frac_cost",
        "int_cost_delta",
    ])?;
    for p in phases {
        w.write_record([
            p.phase.to_string(),
            p.guess.to_string(),
            p.jobs_processed.to_string(),
            p.frac_cost.to_string(),
            p.int_cost_delta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, GeneratorConfig, PtimeModel};
    use crate::instance::{Job, Machine};
    use crate::oracle::optimal_bnb;

    #[test]
    fn empty_trace_single_phase() {
        let inst = Instance::new(vec![Machine { id: 0, cost: 2.0 }], vec![], 1.0).unwrap();
        let out = run_with_doubling(&inst, DoublingConfig::default(), 0).unwrap();
        assert_eq!(out.phase_count(), 1);
        assert_eq!(out.rounding.int_cost(), 0.0);
        assert_eq!(out.phases[0].jobs_processed, 0);
    }

    #[test]
    fn lower_bound_uses_feasible_machines() {
        let inst = Instance::new(
            vec![Machine { id: 0, cost: 1.0 }, Machine { id: 1, cost: 5.0 }],
            vec![
                Job {
                    id: 0,
                    processing_times: vec![3.0, 0.5],
                },
                Job {
                    id: 1,
                    processing_times: vec![0.5, 0.5],
                },
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(trivial_lower_bound(&inst), 1.0);
    }

    #[test]
    fn oracle_guess_needs_no_doubling() {
        for seed in 0..10 {
            let inst = generate(&GeneratorConfig::new(4, 8, seed, PtimeModel::Uniform));
            let b = optimal_bnb(&inst).unwrap().optimal_cost;
            let cfg = DoublingConfig {
                initial_guess: Some(b),
                ..DoublingConfig::default()
            };
            let out = run_with_doubling(&inst, cfg, seed).unwrap();
            assert_eq!(out.phase_count(), 1, "seed {seed}");
            assert!(out.rounding.assignment().iter().all(Option::is_some));
        }
    }

    #[test]
    fn small_guess_doubles_and_finishes() {
        for policy in [RecoverPolicy::TriggeringJob, RecoverPolicy::AllJobs] {
            let inst = generate(&GeneratorConfig::new(
                4,
                8,
                3,
                PtimeModel::RestrictedAssignment,
            ));
            let cfg = DoublingConfig {
                initial_guess: Some(1e-3),
                recover: policy,
                ..DoublingConfig::default()
            };
            let out = run_with_doubling(&inst, cfg, 1).unwrap();
            assert!(out.phase_count() > 1);
            for w in out.phases.windows(2) {
                assert_eq!(w[1].guess, 2.0 * w[0].guess);
            }
            assert!(out.rounding.assignment().iter().all(Option::is_some));
            let jobs: usize = out.phases.iter().map(|p| p.jobs_processed).sum();
            assert_eq!(jobs, inst.n());
            let sunk: f64 = out.phases.iter().map(|p| p.int_cost_delta).sum();
            assert!((sunk - out.rounding.int_cost()).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_bound_constant_aborts() {
        let inst = generate(&GeneratorConfig::new(3, 6, 2, PtimeModel::Uniform));
        let cfg = DoublingConfig {
            initial_guess: Some(1.0),
            bound_constant: 1e-6,
            ..DoublingConfig::default()
        };
        assert!(matches!(
            run_with_doubling(&inst, cfg, 0),
            Err(Error::DoublingAborted { .. })
        ));
    }

    #[test]
    fn phase_log_header() {
        let mut buf = Vec::new();
        write_phase_log(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "phase,guess,jobs_processed,frac_cost,int_cost_delta\n"
        );
    }
}
