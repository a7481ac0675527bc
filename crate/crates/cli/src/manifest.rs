//! The JSON manifest written next to every set of trace CSVs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use danebench_core::metrics::{self, DEFAULT_HOLDOUT_SIZE, DEFAULT_TARGET_LOG10};
use danebench_core::sim::{AccessMode, RunOutput, SeedPolicy, DEFAULT_A0, DEFAULT_C, DEFAULT_DECAY, DEFAULT_SVRG_ALPHA};
use danebench_core::trace::{CSV_COLUMNS, SUBOPT_FLOOR};
use danebench_core::{Error, Result, RunConfig};

use crate::config::{EvalBlock, ExperimentFile, ProblemBlock};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL: &str = "danebench";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub a0: f64,
    pub decay: f64,
    pub c: f64,
    pub svrg_alpha: f64,
    pub holdout_size: usize,
    pub target_log_subopt: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            a0: DEFAULT_A0,
            decay: DEFAULT_DECAY,
            c: DEFAULT_C,
            svrg_alpha: DEFAULT_SVRG_ALPHA,
            holdout_size: DEFAULT_HOLDOUT_SIZE,
            target_log_subopt: DEFAULT_TARGET_LOG10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub d: usize,
    pub n_total: usize,
    pub machines: usize,
    pub noise_std: f64,
    pub cov_exponent: f64,
    pub reg: f64,
    pub seed: u64,
    pub w_star: Vec<f64>,
}

impl From<&ProblemBlock> for ProblemRecord {
    fn from(p: &ProblemBlock) -> Self {
        ProblemRecord {
            d: p.spec.d,
            n_total: p.spec.n_total,
            machines: p.machines,
            noise_std: p.spec.noise_std,
            cov_exponent: p.spec.cov_exponent,
            reg: p.reg,
            seed: p.spec.seed,
            w_star: p.spec.w_star.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub holdout_size: usize,
    pub target_log_subopt: f64,
}

impl From<&EvalBlock> for EvalRecord {
    fn from(e: &EvalBlock) -> Self {
        EvalRecord {
            holdout_size: e.holdout_size,
            target_log_subopt: e.target_log_subopt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub kind: String,
    pub a0: f64,
    pub decay: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub rounds_to_target: Option<usize>,
    pub grads_to_target: Option<f64>,
    pub final_log10_subopt: f64,
    pub best_log10_subopt: f64,
    pub max_grads_per_machine: u64,
    pub comm_rounds: u64,
    pub floats_communicated: u64,
    pub exact_solve_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub csv: String,
    pub algorithm: String,
    pub machines: usize,
    pub rounds: usize,
    #[serde(rename = "T")]
    pub t: String,
    pub inner_steps: u64,
    pub eta: f64,
    pub mu: f64,
    pub schedule: ScheduleRecord,
    pub svrg_alpha: f64,
    pub access: String,
    pub fraction: Option<f64>,
    pub seed: u64,
    pub equalize_svrg_budget: bool,
    pub seed_policy: String,
    pub workers: usize,
    pub result: ResultRecord,
}

impl RunRecord {
    pub fn new(label: &str, csv: &str, c: &RunConfig, out: &RunOutput, target: f64) -> Self {
        let best = out.trace.points.iter().map(|p| p.log10_subopt).fold(f64::INFINITY, f64::min);
        RunRecord {
            label: label.to_string(),
            csv: csv.to_string(),
            algorithm: c.algorithm.name().to_string(),
            machines: c.machines,
            rounds: c.rounds,
            t: c.inner_steps.to_string(),
            inner_steps: out.inner_steps,
            eta: c.eta,
            mu: c.mu,
            schedule: ScheduleRecord {
                kind: c.schedule.kind.name().to_string(),
                a0: c.schedule.a0,
                decay: c.schedule.decay,
                c: c.schedule.c,
            },
            svrg_alpha: c.svrg_alpha,
            access: c.access.name().to_string(),
            fraction: match c.access {
                AccessMode::Full => None,
                AccessMode::FixedSubset(x) | AccessMode::SubsampledGradient(x) => Some(x),
            },
            seed: c.seed,
            equalize_svrg_budget: c.equalize_svrg_budget,
            seed_policy: match c.seed_policy {
                SeedPolicy::PerMachine => "per_machine",
                SeedPolicy::Aligned => "aligned",
            }
            .to_string(),
            workers: c.workers,
            result: ResultRecord {
                rounds_to_target: metrics::rounds_to_target(&out.trace, target),
                grads_to_target: metrics::grads_to_target(&out.trace, target),
                final_log10_subopt: out.trace.last().map_or(f64::NAN, |p| p.log10_subopt),
                best_log10_subopt: best,
                max_grads_per_machine: out.ledger.max_grads_per_machine(),
                comm_rounds: out.ledger.comm_rounds,
                floats_communicated: out.ledger.floats_communicated,
                exact_solve_events: out.ledger.exact_solve_events,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub axis: String,
    pub values: Vec<String>,
    pub summary_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub log_base: u32,
    pub subopt_floor: f64,
    pub comm_rounds_per_dane_round: u32,
    pub csv_columns: Vec<String>,
    pub seed_override: Option<u64>,
    pub defaults: Defaults,
    pub problem: ProblemRecord,
    pub eval: EvalRecord,
    pub sweep: Option<SweepRecord>,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    pub fn new(command: &str, file: &ExperimentFile, seed_override: Option<u64>) -> Self {
        Manifest {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            log_base: 10,
            subopt_floor: SUBOPT_FLOOR,
            comm_rounds_per_dane_round: 2,
            csv_columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
            seed_override,
            defaults: Defaults::default(),
            problem: (&file.problem).into(),
            eval: (&file.eval).into(),
            sweep: None,
            runs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Parses and schema-checks a manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("manifest", e.to_string()))?;
        validate(&value)?;
        serde_json::from_value(value).map_err(|e| Error::config("manifest", e.to_string()))
    }

    pub fn run_for_csv(&self, csv: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.csv == csv)
    }
}

/// Checks that `value` carries every field a manifest must record, with the right JSON type.
pub fn validate(value: &Value) -> Result<()> {
    fn require<'a>(v: &'a Value, path: &str, key: &str, ok: fn(&Value) -> bool) -> Result<&'a Value> {
        let full = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
        match v.get(key) {
            Some(x) if ok(x) => Ok(x),
            Some(_) => Err(Error::config(format!("manifest.{full}"), "has the wrong type")),
            None => Err(Error::config(format!("manifest.{full}"), "missing")),
        }
    }
    let num = Value::is_number;
    let string = Value::is_string;
    for key in ["tool", "version", "command"] {
        require(value, "", key, string)?;
    }
    for key in ["log_base", "subopt_floor", "comm_rounds_per_dane_round"] {
        require(value, "", key, num)?;
    }
    require(value, "", "csv_columns", Value::is_array)?;
    let defaults = require(value, "", "defaults", Value::is_object)?;
    for key in ["a0", "decay", "c", "svrg_alpha", "holdout_size", "target_log_subopt"] {
        require(defaults, "defaults", key, num)?;
    }
    let problem = require(value, "", "problem", Value::is_object)?;
    for key in ["d", "n_total", "machines", "noise_std", "cov_exponent", "reg", "seed"] {
        require(problem, "problem", key, num)?;
    }
    let eval = require(value, "", "eval", Value::is_object)?;
    for key in ["holdout_size", "target_log_subopt"] {
        require(eval, "eval", key, num)?;
    }
    let runs = require(value, "", "runs", Value::is_array)?;
    for (i, run) in runs.as_array().into_iter().flatten().enumerate() {
        let path = format!("runs[{i}]");
        for key in ["label", "csv", "algorithm", "T", "access", "seed_policy"] {
            require(run, &path, key, string)?;
        }
        for key in ["machines", "rounds", "inner_steps", "eta", "mu", "svrg_alpha", "seed", "workers"] {
            require(run, &path, key, num)?;
        }
        let schedule = require(run, &path, "schedule", Value::is_object)?;
        for key in ["a0", "decay", "c"] {
            require(schedule, &format!("{path}.schedule"), key, num)?;
        }
        require(run, &path, "result", Value::is_object)?;
    }
    Ok(())
}
