//! Exact offline optimum: minimum total startup cost of a schedule whose
//! makespan is at most `L`.
//!
//! Two independent solvers are provided. [`optimal_exhaustive`] enumerates
//! every assignment and is the ground truth on tiny instances;
//! [`optimal_bnb`] is a depth-first branch and bound that scales further and
//! must agree with it wherever both run.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Largest `m^n` the exhaustive solver accepts.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Relative slack on the makespan budget when checking loads.
const LOAD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    #[serde(rename = "B")]
    pub optimal_cost: f64,
    /// Machine of each job in arrival order.
    pub witness: Vec<usize>,
    pub witness_makespan: f64,
    pub nodes_explored: u64,
    /// False when the node budget ran out and only an incumbent is known.
    pub exact: bool,
}

fn capacity(instance: &Instance) -> f64 {
    instance.makespan_budget * (1.0 + LOAD_SLACK)
}

/// True iff every machine's load under `assignment` stays within `L`.
pub fn feasible(instance: &Instance, assignment: &[usize]) -> bool {
    assignment.len() == instance.n()
        && makespan(instance, assignment).is_some_and(|ms| ms <= capacity(instance))
}

fn makespan(instance: &Instance, assignment: &[usize]) -> Option<f64> {
    let mut load = vec![0.0; instance.m()];
    for (job, &i) in instance.jobs.iter().zip(assignment) {
        *load.get_mut(i)? += job.p(i);
    }
    Some(load.into_iter().fold(0.0, f64::max))
}

fn activation_cost(instance: &Instance, assignment: &[usize]) -> f64 {
    let mut used = vec![false; instance.m()];
    for &i in assignment {
        used[i] = true;
    }
    instance
        .machines
        .iter()
        .filter(|mc| used[mc.id])
        .map(|mc| mc.cost)
        .sum()
}

fn check_every_job_fits(instance: &Instance) -> Result<()> {
    let cap = capacity(instance);
    if let Some(job) = instance
        .jobs
        .iter()
        .find(|j| j.processing_times.iter().all(|&p| p > cap))
    {
        return Err(Error::Infeasible(format!(
            "job {} exceeds L = {} on every machine",
            job.id, instance.makespan_budget
        )));
    }
    Ok(())
}

/// Enumerates all `m^n` assignments in lexicographic order.
pub fn optimal_exhaustive(instance: &Instance) -> Result<OracleResult> {
    let m = instance.m();
    let n = instance.n();
    let size = (m as f64).powi(n as i32);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    check_every_job_fits(instance)?;
    let cap = capacity(instance);
    let mut assignment = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        if makespan(instance, &assignment).is_some_and(|ms| ms <= cap) {
            let cost = activation_cost(instance, &assignment);
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, assignment.clone()));
            }
        }
        // odometer with job 0 as the most significant digit
        let mut pos = n;
        loop {
            if pos == 0 {
                return finish(instance, best, nodes, true);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < m {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

fn finish(
    instance: &Instance,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    exact: bool,
) -> Result<OracleResult> {
    let (cost, witness) = best.ok_or_else(|| {
        Error::Infeasible("no assignment keeps every machine within L".to_string())
    })?;
    let witness_makespan = makespan(instance, &witness).expect("witness indexes machines");
    Ok(OracleResult {
        optimal_cost: cost,
        witness,
        witness_makespan,
        nodes_explored: nodes,
        exact,
    })
}

struct Search<'a> {
    instance: &'a Instance,
    cap: f64,
    /// Jobs in branching order.
    order: Vec<usize>,
    /// Machines sorted by cost, ties by id.
    by_cost: Vec<usize>,
    load: Vec<f64>,
    active: Vec<bool>,
    cost: f64,
    current: Vec<usize>,
    best_cost: f64,
    best: Option<Vec<usize>>,
    nodes: u64,
    budget: u64,
    out_of_budget: bool,
}

impl Search<'_> {
    /// Admissible bound on the extra cost needed by the unassigned jobs:
    /// the most expensive "cheapest new machine" over jobs that no longer fit
    /// on any active machine. `None` when some job fits nowhere.
    fn extra_cost_bound(&self, depth: usize) -> Option<f64> {
        let mut bound: f64 = 0.0;
        for &j in &self.order[depth..] {
            let job = &self.instance.jobs[j];
            let fits_active =
                (0..self.load.len()).any(|i| self.active[i] && self.load[i] + job.p(i) <= self.cap);
            if fits_active {
                continue;
            }
            let cheapest = self
                .by_cost
                .iter()
                .find(|&&i| !self.active[i] && job.p(i) <= self.cap)
                .map(|&i| self.instance.machines[i].cost)?;
            bound = bound.max(cheapest);
        }
        Some(bound)
    }

    fn dfs(&mut self, depth: usize) {
        if self.out_of_budget {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.out_of_budget = true;
            return;
        }
        if depth == self.order.len() {
            if self.cost < self.best_cost {
                self.best_cost = self.cost;
                let mut witness = vec![0; self.order.len()];
                for (k, &j) in self.order.iter().enumerate() {
                    witness[j] = self.current[k];
                }
                self.best = Some(witness);
            }
            return;
        }
        match self.extra_cost_bound(depth) {
            Some(extra) if self.cost + extra < self.best_cost => {}
            _ => return,
        }
        let j = self.order[depth];
        // active machines first, then inactive ones by cost
        let mut choices: Vec<usize> = self
            .by_cost
            .iter()
            .copied()
            .filter(|&i| self.active[i])
            .collect();
        choices.extend(self.by_cost.iter().copied().filter(|&i| !self.active[i]));
        for i in choices {
            let p = self.instance.jobs[j].p(i);
            if self.load[i] + p > self.cap {
                continue;
            }
            let opened = !self.active[i];
            let added = if opened {
                self.instance.machines[i].cost
            } else {
                0.0
            };
            if self.cost + added >= self.best_cost {
                continue;
            }
            self.load[i] += p;
            self.active[i] = true;
            self.cost += added;
            self.current.push(i);
            self.dfs(depth + 1);
            self.current.pop();
            self.cost -= added;
            if opened {
                self.active[i] = false;
            }
            self.load[i] -= p;
            if self.out_of_budget {
                return;
            }
        }
    }
}

pub fn optimal_bnb(instance: &Instance) -> Result<OracleResult> {
    optimal_bnb_with_budget(instance, DEFAULT_NODE_BUDGET)
}

pub fn optimal_bnb_with_budget(instance: &Instance, node_budget: u64) -> Result<OracleResult> {
    check_every_job_fits(instance)?;
    let m = instance.m();
    let cap = capacity(instance);
    let mut order: Vec<usize> = (0..instance.n()).collect();
    // most constrained jobs first, then larger jobs
    let key = |j: usize| {
        let job = &instance.jobs[j];
        let usable = job.processing_times.iter().filter(|&&p| p <= cap).count();
        let smallest = job
            .processing_times
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        (usable, -smallest)
    };
    order.sort_by(|&a, &b| {
        let (ua, sa) = key(a);
        let (ub, sb) = key(b);
        ua.cmp(&ub).then(sa.total_cmp(&sb)).then(a.cmp(&b))
    });
    let mut by_cost: Vec<usize> = (0..m).collect();
    by_cost.sort_by(|&a, &b| {
        instance.machines[a]
            .cost
            .total_cmp(&instance.machines[b].cost)
            .then(a.cmp(&b))
    });
    let mut search = Search {
        instance,
        cap,
        order,
        by_cost,
        load: vec![0.0; m],
        active: vec![false; m],
        cost: 0.0,
        current: Vec::with_capacity(instance.n()),
        best_cost: f64::INFINITY,
        best: None,
        nodes: 0,
        budget: node_budget,
        out_of_budget: false,
    };
    search.dfs(0);
    let exact = !search.out_of_budget;
    let nodes = search.nodes;
    match search.best {
        Some(witness) => {
            // report the cost of the witness itself so the two always agree
            let cost = activation_cost(instance, &witness);
            finish(instance, Some((cost, witness)), nodes, exact)
        }
        None if !exact => Err(Error::NodeBudgetExhausted { nodes: node_budget }),
        None => finish(instance, None, nodes, true),
    }
}

/// Oracle used by the experiment harness: branch and bound when `m^n` is
/// within the exhaustive guard, `None` otherwise.
pub fn oracle_if_small(instance: &Instance) -> Result<Option<OracleResult>> {
    let size = (instance.m() as f64).powi(instance.n() as i32);
    if size > EXHAUSTIVE_LIMIT {
        return Ok(None);
    }
    optimal_bnb(instance).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Job, Machine};

    fn inst(costs: &[f64], jobs: &[&[f64]], l: f64) -> Instance {
        Instance::new(
            costs
                .iter()
                .enumerate()
                .map(|(id, &cost)| Machine { id, cost })
                .collect(),
            jobs.iter()
                .enumerate()
                .map(|(id, p)| Job {
                    id,
                    processing_times: p.to_vec(),
                })
                .collect(),
            l,
        )
        .unwrap()
    }

    #[test]
    fn feasibility_checks() {
        let a = inst(&[1.0, 1.0], &[&[0.5, 0.5]], 1.0);
        assert!(feasible(&a, &[1]));
        let b = inst(&[1.0, 1.0], &[&[2.0, 0.5]], 1.0);
        assert!(!feasible(&b, &[0]));
        let c = inst(&[1.0, 1.0], &[], 1.0);
        assert!(feasible(&c, &[]));
    }

    #[test]
    fn cheaper_machine_suffices() {
        let i = inst(&[1.0, 2.0], &[&[0.5, 0.5]], 1.0);
        for r in [optimal_exhaustive(&i).unwrap(), optimal_bnb(&i).unwrap()] {
            assert_eq!(r.optimal_cost, 1.0);
            assert_eq!(r.witness, vec![0]);
            assert!(r.exact);
        }
    }

    #[test]
    fn forced_machine() {
        let i = inst(&[1.0, 2.0], &[&[2.0, 0.5]], 1.0);
        assert_eq!(optimal_exhaustive(&i).unwrap().optimal_cost, 2.0);
        assert_eq!(optimal_bnb(&i).unwrap().optimal_cost, 2.0);
    }

    #[test]
    fn capacity_forces_both() {
        let i = inst(&[1.0, 2.0], &[&[0.6, 0.6], &[0.6, 0.6]], 1.0);
        let r = optimal_exhaustive(&i).unwrap();
        assert_eq!(r.optimal_cost, 3.0);
        assert!(r.witness_makespan <= 1.0);
        assert_eq!(optimal_bnb(&i).unwrap().optimal_cost, 3.0);
    }

    #[test]
    fn one_machine_fits_all() {
        let i = inst(
            &[4.0, 2.5, 3.0],
            &[&[0.2, 0.3, 0.2], &[0.2, 0.3, 0.2], &[0.2, 0.3, 0.2]],
            1.0,
        );
        assert_eq!(optimal_bnb(&i).unwrap().optimal_cost, 2.5);
    }

    #[test]
    fn infeasible_instance() {
        let i = inst(&[1.0, 2.0], &[&[2.0, 3.0]], 1.0);
        assert!(matches!(optimal_bnb(&i), Err(Error::Infeasible(_))));
        assert!(matches!(optimal_exhaustive(&i), Err(Error::Infeasible(_))));
        // every job fits alone but not together
        let j = inst(&[1.0], &[&[0.6], &[0.6]], 1.0);
        assert!(matches!(optimal_bnb(&j), Err(Error::Infeasible(_))));
        assert!(matches!(optimal_exhaustive(&j), Err(Error::Infeasible(_))));
    }

    #[test]
    fn too_large_guard() {
        let jobs: Vec<Vec<f64>> = vec![vec![0.1; 10]; 8];
        let refs: Vec<&[f64]> = jobs.iter().map(|v| v.as_slice()).collect();
        let i = inst(&[1.0; 10], &refs, 1.0);
        assert!(matches!(
            optimal_exhaustive(&i),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn empty_job_set() {
        let i = inst(&[1.0, 2.0], &[], 1.0);
        let r = optimal_exhaustive(&i).unwrap();
        assert_eq!(r.optimal_cost, 0.0);
        assert_eq!(optimal_bnb(&i).unwrap().optimal_cost, 0.0);
    }

    #[test]
    fn tiny_budget_flags_incumbent() {
        let jobs: Vec<Vec<f64>> = (0..8)
            .map(|j| {
                (0..5)
                    .map(|i| 0.1 + 0.05 * ((i * 7 + j * 3) % 11) as f64)
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = jobs.iter().map(|v| v.as_slice()).collect();
        let i = inst(&[1.0, 1.5, 2.0, 2.5, 3.0], &refs, 0.6);
        match optimal_bnb_with_budget(&i, 12) {
            Ok(r) => assert!(!r.exact),
            Err(Error::NodeBudgetExhausted { .. }) => {}
            Err(e) => panic!("unexpected {e}"),
        }
        assert!(optimal_bnb(&i).unwrap().exact);
    }
}
