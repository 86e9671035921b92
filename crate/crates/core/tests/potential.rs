use actsched::oracle::oracle_if_small;
use actsched::{generate, EngineConfig, FractionalState, GeneratorConfig, Instance, PtimeModel};

fn run(inst: &Instance) -> FractionalState {
    let alpha = oracle_if_small(inst)
        .unwrap()
        .map_or(inst.total_cost(), |r| r.optimal_cost);
    let mut state = FractionalState::preprocess(inst, alpha, EngineConfig::default()).unwrap();
    for job in &inst.jobs {
        state.process_job(job, inst.makespan_budget).unwrap();
    }
    state
}

/// Excluding the jump a machine makes when its potential switches from
/// `c x` to `c a^(l-1)` (negative when its load is below `L`), no step raises
/// the potential by more than `2/n`.
#[test]
fn step_increase_outside_transitions_is_bounded() {
    let models = [
        PtimeModel::Uniform,
        PtimeModel::RestrictedAssignment,
        PtimeModel::PowerLaw,
    ];
    for seed in 0..150u64 {
        for model in models {
            let m = 2 + (seed % 9) as usize;
            let n = 2 + (seed % 11) as usize;
            let inst = generate(&GeneratorConfig::new(m, n, seed, model));
            let state = run(&inst);
            assert!(state.initial_potential() <= m as f64 + 1e-9);
            for s in state.step_log() {
                let accounted = s.delta_potential - s.transition_jump;
                assert!(
                    accounted <= 2.0 / n as f64 + 1e-9,
                    "{model} seed {seed} job {} step {}: {accounted}",
                    s.job,
                    s.step_idx
                );
            }
        }
    }
}

/// A machine that turns fully active while carrying load above `L` jumps in
/// potential by `c (a^(l-1) - x)`, which can exceed `2/n` in a single step.
#[test]
fn transition_jump_can_exceed_step_bound() {
    let inst = generate(&GeneratorConfig::new(
        9,
        6,
        79,
        PtimeModel::RestrictedAssignment,
    ));
    let state = run(&inst);
    let worst = state
        .step_log()
        .iter()
        .max_by(|a, b| a.delta_potential.total_cmp(&b.delta_potential))
        .unwrap();
    assert!(worst.delta_potential > 2.0 / 6.0, "{worst:?}");
    assert!(worst.delta_potential - worst.transition_jump <= 2.0 / 6.0 + 1e-9);
    for &i in &worst.machines_touched {
        if state.is_fully_active(i) && worst.transition_jump > 0.0 {
            return;
        }
    }
    panic!("no touched machine became fully active: {worst:?}");
}
