use actsched::harness::{run_sweep, write_sweep, SweepConfig};
use actsched::instance::sentinel;
use actsched::{generate, GeneratorConfig, Instance, PtimeModel};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = PtimeModel> {
    prop_oneof![
        Just(PtimeModel::Uniform),
        Just(PtimeModel::RestrictedAssignment),
        Just(PtimeModel::PowerLaw),
    ]
}

#[test]
fn restricted_jobs_fit_somewhere() {
    let inst = generate(&GeneratorConfig::new(
        4,
        8,
        42,
        PtimeModel::RestrictedAssignment,
    ));
    for job in &inst.jobs {
        assert!(job
            .processing_times
            .iter()
            .any(|&p| p <= inst.makespan_budget));
    }
}

#[test]
fn one_by_one_instance() {
    let inst = generate(&GeneratorConfig::new(1, 1, 7, PtimeModel::Uniform));
    assert_eq!((inst.m(), inst.n()), (1, 1));
    assert!(inst.jobs[0].p(0) <= inst.makespan_budget);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_instances_are_valid(m in 1usize..12, n in 1usize..40, seed in any::<u64>(), model in model(), shuffle in any::<bool>()) {
        let cfg = GeneratorConfig { shuffle, ..GeneratorConfig::new(m, n, seed, model) };
        let inst = generate(&cfg);
        prop_assert!(inst.validate().is_ok());
        prop_assert!(inst.every_job_fits_somewhere());
        prop_assert_eq!(inst.n_declared, n);
        let s = sentinel(inst.makespan_budget);
        for job in &inst.jobs {
            for &p in &job.processing_times {
                prop_assert!(p > 0.0 && p.is_finite());
                // largest power-law size times the fastest speed factor
                prop_assert!(p == s || p <= 20.0, "p = {}", p);
            }
        }
        prop_assert_eq!(generate(&cfg), inst);
    }

    #[test]
    fn files_round_trip(m in 1usize..6, n in 0usize..10, seed in any::<u64>(), model in model()) {
        let inst = if n == 0 {
            let base = generate(&GeneratorConfig::new(m, 1, seed, model));
            Instance::new(base.machines, vec![], base.makespan_budget).unwrap()
        } else {
            generate(&GeneratorConfig::new(m, n, seed, model))
        };
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("i.json");
        let trace = dir.path().join("i.jsonl");
        inst.save(&json).unwrap();
        inst.save_trace(&trace).unwrap();
        prop_assert_eq!(&Instance::load(&json).unwrap(), &inst);
        prop_assert_eq!(&Instance::load_trace(&trace).unwrap(), &inst);
    }
}

fn small_sweep() -> SweepConfig {
    toml::from_str(
        r#"
m = [2, 3]
n = [4]
instances = 3
rounding_seeds = 2
alpha = "oracle"
"#,
    )
    .unwrap()
}

#[test]
fn sweep_rows_follow_grid_order() {
    let report = run_sweep(&small_sweep()).unwrap();
    assert_eq!(report.rows.len(), 2 * 3 * 2);
    let keys: Vec<_> = report
        .rows
        .iter()
        .map(|r| (r.m, r.instance_seed, r.seed))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(report
        .rows
        .iter()
        .all(|r| r.b.is_some() && r.cost_ratio.unwrap().is_finite()));
    let ratio = report
        .summary
        .iter()
        .find(|s| s.metric == "cost_ratio")
        .unwrap();
    assert_eq!(ratio.count, 12);
    assert!(ratio.max >= ratio.p95 && ratio.p95 >= 0.0);
}

#[test]
fn sweep_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_sweep(a.path(), &run_sweep(&small_sweep()).unwrap()).unwrap();
    write_sweep(b.path(), &run_sweep(&small_sweep()).unwrap()).unwrap();
    for f in ["runs.csv", "summary.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        assert!(!x.contains(&b'\r'));
    }
}
