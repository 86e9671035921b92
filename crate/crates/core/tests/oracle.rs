use actsched::oracle::{feasible, optimal_bnb, optimal_exhaustive, oracle_if_small};
use actsched::{generate, GeneratorConfig, Instance, Job, Machine, PtimeModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Optima of generated m = 3, n = 6 instances, computed by a separate
/// brute-force script over all 3^6 assignments.
const FROZEN: &[(PtimeModel, u64, f64)] = &[
    (PtimeModel::Uniform, 0, 5.193295500606491),
    (PtimeModel::Uniform, 1, 1.7234533803680367),
    (PtimeModel::Uniform, 2, 14.867945263265206),
    (PtimeModel::Uniform, 3, 5.63696624059068),
    (PtimeModel::Uniform, 4, 9.164936556182694),
    (PtimeModel::RestrictedAssignment, 0, 7.381678738839056),
    (PtimeModel::RestrictedAssignment, 1, 1.7234533803680367),
    (PtimeModel::RestrictedAssignment, 2, 14.867945263265206),
    (PtimeModel::RestrictedAssignment, 3, 6.606707175489319),
    (PtimeModel::RestrictedAssignment, 4, 18.071366370205084),
    (PtimeModel::PowerLaw, 0, 5.193295500606491),
    (PtimeModel::PowerLaw, 1, 1.7234533803680367),
    (PtimeModel::PowerLaw, 2, 8.932066564155187),
    (PtimeModel::PowerLaw, 3, 3.905250965674065),
    (PtimeModel::PowerLaw, 4, 16.443005677831568),
];

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn frozen_optima_match_both_solvers() {
    for &(model, seed, b) in FROZEN {
        let inst = generate(&GeneratorConfig::new(3, 6, seed, model));
        let ex = optimal_exhaustive(&inst).unwrap();
        let bb = optimal_bnb(&inst).unwrap();
        assert!(
            close(ex.optimal_cost, b),
            "{model} {seed}: exhaustive {}",
            ex.optimal_cost
        );
        assert!(
            close(bb.optimal_cost, b),
            "{model} {seed}: bnb {}",
            bb.optimal_cost
        );
        assert!(bb.exact);
    }
}

#[test]
fn bnb_matches_exhaustive_on_small_instances() {
    let models = [
        PtimeModel::Uniform,
        PtimeModel::RestrictedAssignment,
        PtimeModel::PowerLaw,
    ];
    for seed in 0..60u64 {
        let m = 1 + (seed % 3) as usize;
        let n = 1 + (seed % 6) as usize;
        let inst = generate(&GeneratorConfig::new(
            m,
            n,
            1000 + seed,
            models[seed as usize % 3],
        ));
        let ex = optimal_exhaustive(&inst).unwrap();
        let bb = optimal_bnb(&inst).unwrap();
        assert!(close(ex.optimal_cost, bb.optimal_cost), "seed {seed}");
        for r in [&ex, &bb] {
            assert!(feasible(&inst, &r.witness));
            assert!(r.witness_makespan <= inst.makespan_budget * (1.0 + 1e-9));
            let mut used: Vec<usize> = r.witness.clone();
            used.sort_unstable();
            used.dedup();
            let cost: f64 = used.iter().map(|&i| inst.machines[i].cost).sum();
            assert!(close(cost, r.optimal_cost));
        }
    }
}

#[test]
fn optimum_ignores_arrival_order() {
    for seed in 0..20u64 {
        let inst = generate(&GeneratorConfig::new(
            3,
            7,
            seed,
            PtimeModel::RestrictedAssignment,
        ));
        let b = optimal_bnb(&inst).unwrap().optimal_cost;
        let mut jobs = inst.jobs.clone();
        jobs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (id, job) in jobs.iter_mut().enumerate() {
            job.id = id;
        }
        let shuffled = Instance::new(inst.machines.clone(), jobs, inst.makespan_budget).unwrap();
        let b2 = optimal_bnb(&shuffled).unwrap().optimal_cost;
        assert!(close(b, b2), "seed {seed}: {b} vs {b2}");
    }
}

/// After scaling costs by m / B and raising costs below 1 to 1, the optimum
/// lies in [m, 2m].
#[test]
fn normalized_optimum_between_m_and_2m() {
    for seed in 0..30u64 {
        let m = 2 + (seed % 3) as usize;
        let inst = generate(&GeneratorConfig::new(m, 6, seed, PtimeModel::Uniform));
        let b = optimal_bnb(&inst).unwrap().optimal_cost;
        let scale = m as f64 / b;
        let machines = inst
            .machines
            .iter()
            .map(|mc| Machine {
                id: mc.id,
                cost: (mc.cost * scale).max(1.0),
            })
            .collect();
        let scaled = Instance::new(machines, inst.jobs.clone(), inst.makespan_budget).unwrap();
        let opt = optimal_bnb(&scaled).unwrap().optimal_cost;
        let mf = m as f64;
        assert!(
            opt >= mf - 1e-9 && opt <= 2.0 * mf + 1e-9,
            "seed {seed}: {opt} for m = {m}"
        );
    }
}

#[test]
fn single_machine_fitting_everything() {
    let jobs = (0..4)
        .map(|id| Job {
            id,
            processing_times: vec![0.2, 0.1, 0.9],
        })
        .collect();
    let machines = [3.0, 1.5, 1.0]
        .iter()
        .enumerate()
        .map(|(id, &cost)| Machine { id, cost })
        .collect();
    let inst = Instance::new(machines, jobs, 1.0).unwrap();
    assert_eq!(optimal_bnb(&inst).unwrap().optimal_cost, 1.5);
    assert_eq!(optimal_exhaustive(&inst).unwrap().optimal_cost, 1.5);
}

#[test]
fn guard_returns_none_for_large_instances() {
    let inst = generate(&GeneratorConfig::new(10, 10, 0, PtimeModel::Uniform));
    assert!(oracle_if_small(&inst).unwrap().is_none());
}
