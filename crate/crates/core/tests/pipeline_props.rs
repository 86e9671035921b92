use actsched::doubling::{run_with_doubling, DoublingConfig, RecoverPolicy};
use actsched::harness::{
    run_pipeline, verify_logdir, write_run_logs, AlphaMode, CheckSet, RunConfig,
};
use actsched::oracle::oracle_if_small;
use actsched::{generate, EngineConfig, FractionalState, GeneratorConfig, Instance, PtimeModel};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = PtimeModel> {
    prop_oneof![
        Just(PtimeModel::Uniform),
        Just(PtimeModel::RestrictedAssignment),
        Just(PtimeModel::PowerLaw),
    ]
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=6, 1usize..=12, any::<u64>(), model())
        .prop_map(|(m, n, seed, model)| generate(&GeneratorConfig::new(m, n, seed, model)))
}

/// The oracle optimum where the guard admits it, the total cost otherwise.
fn alpha_for(inst: &Instance) -> AlphaMode {
    match oracle_if_small(inst).unwrap() {
        Some(r) => AlphaMode::Fixed(r.optimal_cost),
        None => AlphaMode::Fixed(inst.total_cost()),
    }
}

const NO_POTENTIAL: CheckSet = CheckSet {
    rfslp: true,
    potential: false,
    consistency: true,
    rounding: true,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_and_schedule_invariants_hold(inst in instance(), seed in any::<u64>()) {
        let config = RunConfig { alpha: alpha_for(&inst), seed, checks: NO_POTENTIAL, ..RunConfig::default() };
        let run = run_pipeline(&inst, &config).unwrap();
        prop_assert!(run.violations.is_empty(), "{:?}", run.violations);
        let state = run.outcome.final_state().unwrap();
        let m = inst.m() as f64;
        for &i in state.live_machines() {
            let x = state.x()[i];
            prop_assert!(x >= 1.0 / m && x <= 1.0);
            prop_assert_eq!(state.is_fully_active(i), x == 1.0);
        }
        prop_assert!(state.initial_potential() <= m + 1e-9);
        for step in state.step_log() {
            prop_assert!(step.delta_coverage > 0.0);
        }
        let rounding = &run.outcome.rounding;
        let mut active_cost = 0.0;
        for (i, &on) in rounding.active().iter().enumerate() {
            if on {
                active_cost += inst.machines[i].cost;
            }
        }
        prop_assert!((active_cost - rounding.int_cost()).abs() <= 1e-9 * active_cost.max(1.0));
        for (j, assigned) in rounding.assignment().iter().enumerate() {
            let i = assigned.expect("every job assigned");
            prop_assert!(rounding.active()[i], "job {} on inactive machine {}", j, i);
        }
    }

    #[test]
    fn runs_are_deterministic(inst in instance(), seed in any::<u64>()) {
        let config = RunConfig { alpha: alpha_for(&inst), seed, ..RunConfig::default() };
        let a = run_pipeline(&inst, &config).unwrap();
        let b = run_pipeline(&inst, &config).unwrap();
        prop_assert_eq!(&a.row, &b.row);
        prop_assert_eq!(a.outcome.rounding.assignment(), b.outcome.rounding.assignment());
    }

    #[test]
    fn fractional_engine_ignores_rounding_seed(inst in instance(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let config = RunConfig { alpha: alpha_for(&inst), ..RunConfig::default() };
        let a = run_pipeline(&inst, &RunConfig { seed: s1, ..config }).unwrap();
        let b = run_pipeline(&inst, &RunConfig { seed: s2, ..config }).unwrap();
        let (fa, fb) = (a.outcome.final_state().unwrap(), b.outcome.final_state().unwrap());
        prop_assert_eq!(fa.x(), fb.x());
        prop_assert_eq!(fa.loads(), fb.loads());
    }

    #[test]
    fn x_never_decreases_within_a_run(inst in instance()) {
        let alpha = match alpha_for(&inst) { AlphaMode::Fixed(a) => a, _ => unreachable!() };
        let mut state = FractionalState::preprocess(&inst, alpha, EngineConfig::default()).unwrap();
        let mut prev = state.x().to_vec();
        for job in &inst.jobs {
            state.process_job(job, inst.makespan_budget).unwrap();
            for (a, b) in prev.iter().zip(state.x()) {
                prop_assert!(b >= a);
            }
            prev = state.x().to_vec();
        }
    }

    #[test]
    fn doubling_phase_accounting(inst in instance(), seed in any::<u64>(), all in any::<bool>(), shift in 1u32..6) {
        let cfg = DoublingConfig {
            initial_guess: Some(inst.total_cost() / 2f64.powi(shift as i32 + 4)),
            recover: if all { RecoverPolicy::AllJobs } else { RecoverPolicy::TriggeringJob },
            ..DoublingConfig::default()
        };
        let out = run_with_doubling(&inst, cfg, seed).unwrap();
        for w in out.phases.windows(2) {
            prop_assert_eq!(w[1].guess, 2.0 * w[0].guess);
            prop_assert!(w[0].triggered);
        }
        prop_assert!(!out.phases.last().unwrap().triggered);
        prop_assert_eq!(out.phases.iter().map(|p| p.jobs_processed).sum::<usize>(), inst.n());
        let sunk: f64 = out.phases.iter().map(|p| p.int_cost_delta).sum();
        prop_assert!((sunk - out.rounding.int_cost()).abs() <= 1e-9 * sunk.max(1.0));
        prop_assert!(out.rounding.assignment().iter().all(Option::is_some));
    }

    #[test]
    fn verify_agrees_with_in_run_checks(inst in instance(), seed in any::<u64>(), double in any::<bool>()) {
        let alpha = if double { AlphaMode::Doubling } else { alpha_for(&inst) };
        let run = run_pipeline(&inst, &RunConfig { alpha, seed, ..RunConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_logs(dir.path(), &run).unwrap();
        let report = verify_logdir(dir.path()).unwrap();
        prop_assert_eq!(report.ok(), run.violations.is_empty(), "{:?} vs {:?}", report.violations, run.violations);
    }
}
