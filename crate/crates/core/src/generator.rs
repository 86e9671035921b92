//! Seeded instance generators.
//!
//! Every generated instance carries a planted schedule: a random subset of
//! machines receives all jobs, and `L` is set to the planted makespan. The
//! offline optimum therefore always exists, and every job has at least one
//! machine with `p_ij <= L`.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{sentinel, Instance, Job, Machine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtimeModel {
    /// `p_ij` uniform in `[0.05, 1]`.
    Uniform,
    /// Each job runs on a random machine subset; the sentinel elsewhere.
    RestrictedAssignment,
    /// Pareto job sizes scaled by a per-machine speed factor.
    PowerLaw,
}

impl FromStr for PtimeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PtimeModel::Uniform),
            "restricted_assignment" | "restricted" => Ok(PtimeModel::RestrictedAssignment),
            "power_law" => Ok(PtimeModel::PowerLaw),
            other => Err(Error::InvalidConfig(format!(
                "unknown processing-time model `{other}` (expected uniform, restricted_assignment or power_law)"
            ))),
        }
    }
}

impl fmt::Display for PtimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PtimeModel::Uniform => "uniform",
            PtimeModel::RestrictedAssignment => "restricted_assignment",
            PtimeModel::PowerLaw => "power_law",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub cost_range: (f64, f64),
    pub ptime_model: PtimeModel,
    /// Shuffle the arrival order after generation.
    #[serde(default)]
    pub shuffle: bool,
}

impl GeneratorConfig {
    pub fn new(m: usize, n: usize, seed: u64, ptime_model: PtimeModel) -> Self {
        GeneratorConfig {
            m,
            n,
            seed,
            cost_range: (1.0, 10.0),
            ptime_model,
            shuffle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (low, high) = self.cost_range;
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "m and n must be at least 1 (got m = {}, n = {})",
                self.m, self.n
            )));
        }
        if !(low > 0.0 && low <= high && high.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cost range must satisfy 0 < low <= high < inf (got {low}, {high})"
            )));
        }
        Ok(())
    }
}

const P_MIN: f64 = 0.05;
const P_MAX: f64 = 1.0;
const POWER_LAW_CAP: f64 = 10.0;

pub fn generate(config: &GeneratorConfig) -> Instance {
    debug_assert!(config.validate().is_ok());
    let m = config.m;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (low, high) = config.cost_range;

    let costs: Vec<f64> = (0..m)
        .map(|_| {
            if low == high {
                low
            } else {
                rng.random_range(low..=high)
            }
        })
        .collect();

    let mut machine_order: Vec<usize> = (0..m).collect();
    machine_order.shuffle(&mut rng);
    let planted_count = rng.random_range(1..=m);
    let planted = &machine_order[..planted_count];

    let speed: Vec<f64> = match config.ptime_model {
        PtimeModel::PowerLaw => (0..m).map(|_| rng.random_range(0.5..2.0)).collect(),
        _ => vec![1.0; m],
    };
    let size_dist = Pareto::new(P_MIN, 1.5).expect("valid pareto parameters");

    // `None` marks an unusable machine; the sentinel depends on L and is filled in last.
    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(config.n);
    let mut planted_load = vec![0.0; m];
    for _ in 0..config.n {
        let home = *planted.choose(&mut rng).expect("planted set is nonempty");
        let row: Vec<Option<f64>> = match config.ptime_model {
            PtimeModel::Uniform => (0..m)
                .map(|_| Some(rng.random_range(P_MIN..=P_MAX)))
                .collect(),
            PtimeModel::RestrictedAssignment => (0..m)
                .map(|i| {
                    let usable = i == home || rng.random_bool(0.5);
                    let p = rng.random_range(P_MIN..=P_MAX);
                    usable.then_some(p)
                })
                .collect(),
            PtimeModel::PowerLaw => {
                let size: f64 = size_dist.sample(&mut rng).min(POWER_LAW_CAP);
                (0..m).map(|i| Some(size * speed[i])).collect()
            }
        };
        planted_load[home] += row[home].expect("home machine is usable");
        rows.push(row);
    }

    let l = planted_load.iter().cloned().fold(0.0, f64::max);
    let unusable = sentinel(l);
    let mut jobs: Vec<Job> = rows
        .into_iter()
        .enumerate()
        .map(|(id, row)| Job {
            id,
            processing_times: row.into_iter().map(|p| p.unwrap_or(unusable)).collect(),
        })
        .collect();
    if config.shuffle {
        jobs.shuffle(&mut rng);
        for (id, job) in jobs.iter_mut().enumerate() {
            job.id = id;
        }
    }

    let machines = costs
        .into_iter()
        .enumerate()
        .map(|(id, cost)| Machine { id, cost })
        .collect();
    Instance::new(machines, jobs, l).expect("generator produces valid instances")
}
