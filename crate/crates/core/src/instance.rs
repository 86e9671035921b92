//! Problem instances and their on-disk formats.
//!
//! An [`Instance`] is a set of machines with startup costs, a stream of jobs
//! in arrival order (each with one processing time per machine) and a
//! makespan budget `L`. Jobs that cannot run on a machine carry the
//! [`sentinel`] processing time instead of an infinite value.
//!
//! Two file formats are supported:
//!  * a single JSON document (`version`, `m`, `n`, `L`, `machines`, `jobs`);
//!  * an online trace in JSON-lines form: a header object carrying `m`, `L`
//!    and `n` followed by one job object per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Multiplier applied to `L` for "cannot run here" processing times.
pub const SENTINEL_FACTOR: f64 = 1e6;

/// Processing time that marks a machine as unusable for a job.
pub fn sentinel(makespan_budget: f64) -> f64 {
    SENTINEL_FACTOR * makespan_budget
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub id: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: usize,
    #[serde(rename = "p")]
    pub processing_times: Vec<f64>,
}

impl Job {
    pub fn p(&self, machine: usize) -> f64 {
        self.processing_times[machine]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub machines: Vec<Machine>,
    pub jobs: Vec<Job>,
    pub makespan_budget: f64,
    pub n_declared: usize,
}

impl Instance {
    /// Builds an instance and checks all structural invariants.
    pub fn new(machines: Vec<Machine>, jobs: Vec<Job>, makespan_budget: f64) -> Result<Self> {
        let n_declared = jobs.len();
        let inst = Instance {
            machines,
            jobs,
            makespan_budget,
            n_declared,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn m(&self) -> usize {
        self.machines.len()
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.cost).collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.machines.iter().map(|m| m.cost).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.machines.is_empty() {
            return bad("instance has no machines".into());
        }
        if !(self.makespan_budget > 0.0 && self.makespan_budget.is_finite()) {
            return bad(format!(
                "makespan budget must be positive and finite, got {}",
                self.makespan_budget
            ));
        }
        for (idx, machine) in self.machines.iter().enumerate() {
            if machine.id != idx {
                return bad(format!(
                    "machine ids must be contiguous from 0: position {idx} has id {}",
                    machine.id
                ));
            }
            if !(machine.cost > 0.0 && machine.cost.is_finite()) {
                return bad(format!(
                    "machine {idx}: startup cost must be positive and finite, got {}",
                    machine.cost
                ));
            }
        }
        let m = self.m();
        for (idx, job) in self.jobs.iter().enumerate() {
            if job.id != idx {
                return bad(format!(
                    "job ids must follow arrival order: position {idx} has id {}",
                    job.id
                ));
            }
            if job.processing_times.len() != m {
                return bad(format!(
                    "job {idx}: expected {m} processing times, got {}",
                    job.processing_times.len()
                ));
            }
            if let Some((i, p)) = job
                .processing_times
                .iter()
                .enumerate()
                .find(|(_, p)| !(**p > 0.0 && p.is_finite()))
            {
                return bad(format!(
                    "job {idx}: processing time on machine {i} must be positive and finite, got {p}"
                ));
            }
        }
        if self.n_declared != self.jobs.len() {
            return bad(format!(
                "declared n = {} but trace holds {} jobs",
                self.n_declared,
                self.jobs.len()
            ));
        }
        Ok(())
    }

    /// True when every job fits on at least one machine within `L`.
    pub fn every_job_fits_somewhere(&self) -> bool {
        self.jobs.iter().all(|j| {
            j.processing_times
                .iter()
                .any(|&p| p <= self.makespan_budget)
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = InstanceFile::from(self);
        let text = serde_json::to_string_pretty(&doc).expect("instance serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
        check_version(&value, origin)?;
        // parse the text again so errors carry line and column
        let doc: InstanceFile = serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
        doc.into_instance(origin)
    }

    /// Writes the instance as an online trace: header line, then one job per line.
    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = TraceHeader {
            version: SCHEMA_VERSION,
            m: self.m(),
            n: self.n_declared,
            l: self.makespan_budget,
            machines: self.machines.clone(),
        };
        let mut write_line = |s: String| -> Result<()> {
            out.write_all(s.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::io(path, e))
        };
        write_line(serde_json::to_string(&header).expect("header serializes"))?;
        for job in &self.jobs {
            write_line(serde_json::to_string(job).expect("job serializes"))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_trace(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let shift = |e: serde_json::Error, line_no: usize| Error::Parse {
            path: path.to_path_buf(),
            line: line_no + 1,
            column: e.column(),
            message: e.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: "empty trace: missing header line".into(),
        })?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&first).map_err(|e| shift(e, 0))?;
        check_version(&value, path)?;
        let header: TraceHeader = serde_json::from_str(&first).map_err(|e| shift(e, 0))?;
        let mut jobs = Vec::with_capacity(header.n);
        for (line_no, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let job: Job = serde_json::from_str(&line).map_err(|e| shift(e, line_no))?;
            jobs.push(job);
        }
        if header.machines.len() != header.m {
            return Err(Error::InvalidInstance(format!(
                "header declares m = {} but lists {} machines",
                header.m,
                header.machines.len()
            )));
        }
        let inst = Instance {
            machines: header.machines,
            jobs,
            makespan_budget: header.l,
            n_declared: header.n,
        };
        inst.validate()?;
        Ok(inst)
    }
}

fn parse_error(path: &Path, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn check_version(value: &serde_json::Value, path: &Path) -> Result<()> {
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(found) => Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found,
            expected: SCHEMA_VERSION,
        }),
        None => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: "missing or non-integer field `version`".into(),
        }),
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u64,
    m: usize,
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    machines: Vec<Machine>,
    jobs: Vec<Job>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            version: SCHEMA_VERSION,
            m: inst.m(),
            n: inst.n_declared,
            l: inst.makespan_budget,
            machines: inst.machines.clone(),
            jobs: inst.jobs.clone(),
        }
    }
}

impl InstanceFile {
    fn into_instance(self, origin: &Path) -> Result<Instance> {
        if self.machines.len() != self.m {
            return Err(Error::InvalidInstance(format!(
                "{}: header declares m = {} but lists {} machines",
                origin.display(),
                self.m,
                self.machines.len()
            )));
        }
        let inst = Instance {
            machines: self.machines,
            jobs: self.jobs,
            makespan_budget: self.l,
            n_declared: self.n,
        };
        inst.validate()?;
        Ok(inst)
    }
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    version: u64,
    m: usize,
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    machines: Vec<Machine>,
}
