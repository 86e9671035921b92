//! Fixtures shared by the benchmarks.

use actsched::oracle::optimal_bnb;
use actsched::{generate, GeneratorConfig, Instance, PtimeModel};

/// A generated instance together with its offline optimum.
pub fn fixture(m: usize, n: usize, seed: u64, model: PtimeModel) -> (Instance, f64) {
    let inst = generate(&GeneratorConfig::new(m, n, seed, model));
    let b = optimal_bnb(&inst).expect("generated instances are feasible");
    (inst, b.optimal_cost)
}
