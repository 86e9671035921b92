use actsched::doubling::run_fixed_alpha;
use actsched::oracle::optimal_bnb;
use actsched::rounding::draw_thresholds;
use actsched::{generate, EngineConfig, GeneratorConfig, PtimeModel};

const SEEDS: u64 = 500;

/// Jobs whose active machines carry less than one unit of `z` stay rare.
#[test]
fn active_z_mass_rarely_short() {
    let models = [
        PtimeModel::Uniform,
        PtimeModel::RestrictedAssignment,
        PtimeModel::PowerLaw,
    ];
    let (mut jobs, mut short, mut fallbacks) = (0u64, 0u64, 0u64);
    for k in 0..3u64 {
        let inst = generate(&GeneratorConfig::new(10, 10, 300 + k, models[k as usize]));
        let b = optimal_bnb(&inst).unwrap().optimal_cost;
        for seed in 0..SEEDS {
            let out = run_fixed_alpha(&inst, b, EngineConfig::default(), seed).unwrap();
            jobs += inst.n() as u64;
            short += out.rounding.deficit_count();
            fallbacks += out.rounding.fallback_count();
            assert_eq!(out.rounding.z_bound_violations(), 0);
        }
    }
    assert!(short as f64 <= 0.05 * jobs as f64, "{short} of {jobs}");
    assert!(fallbacks <= short);
}

#[test]
fn threshold_streams_differ_across_seeds() {
    let a = draw_thresholds(50, 1);
    let b = draw_thresholds(50, 2);
    assert_ne!(a, b);
    assert!(a.iter().chain(&b).all(|r| (0.0..=1.0).contains(r)));
}
