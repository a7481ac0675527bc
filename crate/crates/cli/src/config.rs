//! Experiment files: flat `section.key = value` lines, `#` comments.
//!
//! ```text
//! problem.d = 500
//! problem.n_total = 6000
//! run.svrg.algorithm = DaneSvrg
//! run.svrg.T = 2n
//! eval.holdout_size = 100000
//! ```
//!
//! Keys are case-insensitive. Any key can be overridden from the environment as
//! `DANEBENCH_` followed by the key in upper case with each `.` written as `__`, e.g.
//! `DANEBENCH_RUN__SVRG__ROUNDS=5`.

use std::collections::BTreeMap;
use std::path::Path;

use danebench_core::metrics::{DEFAULT_HOLDOUT_SIZE, DEFAULT_TARGET_LOG10};
use danebench_core::objective::RidgeLoss;
use danebench_core::schedules::ScheduleKind;
use danebench_core::sim::{AccessMode, RunConfig, SeedPolicy, StepCount};
use danebench_core::{Algorithm, Error, Result, Schedule, SyntheticSpec};

pub const ENV_PREFIX: &str = "DANEBENCH_";

pub const DEFAULT_D: usize = 500;
pub const DEFAULT_N_TOTAL: usize = 6000;
pub const DEFAULT_MACHINES: usize = 4;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBlock {
    pub spec: SyntheticSpec,
    pub machines: usize,
    pub reg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalBlock {
    pub holdout_size: usize,
    pub target_log_subopt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunBlock {
    pub label: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFile {
    pub problem: ProblemBlock,
    pub runs: Vec<RunBlock>,
    pub eval: EvalBlock,
}

/// Ordered `key -> value` entries. Later assignments replace earlier ones but keep the
/// position of the first.
#[derive(Debug, Clone, Default)]
pub struct Entries {
    order: Vec<String>,
    values: BTreeMap<String, String>,
}

impl Entries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Entries::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(Error::config(format!("line {}", lineno + 1), format!("malformed key `{key}`")));
            }
            entries.set(key, value.trim());
        }
        Ok(entries)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        let key = key.to_ascii_lowercase();
        if !self.values.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.values.insert(key, value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Applies `DANEBENCH_*` variables from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) {
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.replace("__", "."), v)))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        overrides.sort();
        for (k, v) in overrides {
            self.set(&k, &v);
        }
    }

    fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}` as {}", std::any::type_name::<T>())))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

fn normalized(s: &str) -> String {
    s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase()
}

fn parse_algorithm(key: &str, value: &str) -> Result<Algorithm> {
    Algorithm::ALL
        .into_iter()
        .find(|a| normalized(a.name()) == normalized(value))
        .ok_or_else(|| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::config(key, format!("unknown algorithm `{value}`; expected one of {}", names.join(", ")))
        })
}

fn parse_schedule_kind(key: &str, value: &str) -> Result<ScheduleKind> {
    [ScheduleKind::Constant, ScheduleKind::InverseDecay, ScheduleKind::DaneExpDecay]
        .into_iter()
        .find(|k| normalized(k.name()) == normalized(value))
        .ok_or_else(|| Error::config(key, format!("unknown schedule `{value}`; expected constant, inverse_decay or dane_exp_decay")))
}

fn parse_w_star(key: &str, value: &str, d: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = value.split(',').map(|p| parse_value(key, p.trim())).collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; d]),
        n if n == d => Ok(parts),
        n => Err(Error::config(key, format!("expected 1 or d = {d} values, got {n}"))),
    }
}

const PROBLEM_KEYS: [&str; 8] = ["d", "n_total", "machines", "noise_std", "cov_exponent", "reg", "seed", "w_star"];
const EVAL_KEYS: [&str; 2] = ["holdout_size", "target_log_subopt"];
const RUN_KEYS: [&str; 17] = [
    "algorithm",
    "machines",
    "rounds",
    "t",
    "eta",
    "mu",
    "schedule",
    "a0",
    "decay",
    "c",
    "svrg_alpha",
    "access",
    "fraction",
    "seed",
    "equalize_svrg_budget",
    "seed_policy",
    "workers",
];

impl ExperimentFile {
    /// Reads `path` and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut entries = Entries::parse(&text)?;
        entries.apply_env(vars);
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &Entries) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        for key in entries.keys() {
            let parts: Vec<&str> = key.split('.').collect();
            let known = match parts.as_slice() {
                ["problem", k] => PROBLEM_KEYS.contains(k),
                ["eval", k] => EVAL_KEYS.contains(k),
                ["run", label, k] => {
                    if !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                        return Err(Error::config(key, "run labels may contain only letters, digits and `_`"));
                    }
                    if !labels.iter().any(|l| l == label) {
                        labels.push(label.to_string());
                    }
                    RUN_KEYS.contains(k)
                }
                _ => false,
            };
            if !known {
                return Err(Error::config(key, "unknown key"));
            }
        }
        if labels.is_empty() {
            return Err(Error::config("run", "no run blocks; add at least one `run.<label>.algorithm = ...`"));
        }

        let problem = Self::problem(entries)?;
        let eval = EvalBlock {
            holdout_size: Self::get_or(entries, "eval.holdout_size", DEFAULT_HOLDOUT_SIZE)?,
            target_log_subopt: Self::get_or(entries, "eval.target_log_subopt", DEFAULT_TARGET_LOG10)?,
        };
        if eval.holdout_size == 0 {
            return Err(Error::config("eval.holdout_size", "must be at least 1"));
        }
        if !eval.target_log_subopt.is_finite() {
            return Err(Error::config("eval.target_log_subopt", "must be finite"));
        }
        let runs = labels
            .into_iter()
            .map(|label| {
                let config = Self::run(entries, &label, &problem)?;
                Ok(RunBlock { label, config })
            })
            .collect::<Result<_>>()?;
        Ok(ExperimentFile { problem, runs, eval })
    }

    fn get_or<T: std::str::FromStr>(entries: &Entries, key: &str, default: T) -> Result<T> {
        entries.get(key).map(|v| parse_value(key, v)).unwrap_or(Ok(default))
    }

    fn problem(entries: &Entries) -> Result<ProblemBlock> {
        let d: usize = Self::get_or(entries, "problem.d", DEFAULT_D)?;
        let n_total = Self::get_or(entries, "problem.n_total", DEFAULT_N_TOTAL)?;
        let seed = Self::get_or(entries, "problem.seed", DEFAULT_SEED)?;
        let mut spec = SyntheticSpec::standard(d, n_total, seed);
        spec.noise_std = Self::get_or(entries, "problem.noise_std", spec.noise_std)?;
        spec.cov_exponent = Self::get_or(entries, "problem.cov_exponent", spec.cov_exponent)?;
        if let Some(v) = entries.get("problem.w_star") {
            spec.w_star = parse_w_star("problem.w_star", v, d)?;
        }
        spec.validate().map_err(|e| e.within("problem"))?;
        let reg = Self::get_or(entries, "problem.reg", RidgeLoss::DEFAULT_REG)?;
        RidgeLoss::new(reg).map_err(|e| e.within("problem"))?;
        let machines = Self::get_or(entries, "problem.machines", DEFAULT_MACHINES)?;
        if machines == 0 || !n_total.is_multiple_of(machines) {
            return Err(Error::config(
                "problem.machines",
                format!("must be positive and divide n_total = {n_total}, got {machines}"),
            ));
        }
        Ok(ProblemBlock { spec, machines, reg })
    }

    fn run(entries: &Entries, label: &str, problem: &ProblemBlock) -> Result<RunConfig> {
        let key = |k: &str| format!("run.{label}.{k}");
        let get = |k: &str| entries.get(&key(k));
        let algorithm = match get("algorithm") {
            Some(v) => parse_algorithm(&key("algorithm"), v)?,
            None => return Err(Error::config(key("algorithm"), "missing")),
        };
        let machines = match get("machines") {
            Some(v) => parse_value(&key("machines"), v)?,
            None => problem.machines,
        };
        let mut c = RunConfig::new(algorithm, machines);
        if let Some(v) = get("rounds") {
            c.rounds = parse_value(&key("rounds"), v)?;
        }
        if let Some(v) = get("t") {
            c.inner_steps = v.parse::<StepCount>().map_err(|e| e.within(&format!("run.{label}")))?;
        }
        if let Some(v) = get("eta") {
            c.eta = parse_value(&key("eta"), v)?;
        }
        if let Some(v) = get("mu") {
            c.mu = parse_value(&key("mu"), v)?;
        }
        if let Some(v) = get("schedule") {
            let kind = parse_schedule_kind(&key("schedule"), v)?;
            let Schedule { a0, decay, c: damp, .. } = c.schedule;
            c.schedule = match kind {
                ScheduleKind::Constant => Schedule::constant(a0),
                ScheduleKind::InverseDecay => Schedule::inverse_decay(a0, decay),
                ScheduleKind::DaneExpDecay => Schedule::dane_exp_decay(a0, decay, damp),
            };
        }
        if let Some(v) = get("a0") {
            c.schedule.a0 = parse_value(&key("a0"), v)?;
        }
        if let Some(v) = get("decay") {
            c.schedule.decay = parse_value(&key("decay"), v)?;
        }
        if let Some(v) = get("c") {
            c.schedule.c = parse_value(&key("c"), v)?;
        }
        if let Some(v) = get("svrg_alpha") {
            c.svrg_alpha = parse_value(&key("svrg_alpha"), v)?;
        }
        let fraction: Option<f64> = get("fraction").map(|v| parse_value(&key("fraction"), v)).transpose()?;
        c.access = match (get("access").map(normalized).as_deref(), fraction) {
            (None | Some("full"), None) => AccessMode::Full,
            (None | Some("full"), Some(_)) => {
                return Err(Error::config(key("fraction"), "requires access = FixedSubset or SubsampledGradient"))
            }
            (Some("fixedsubset"), Some(x)) => AccessMode::FixedSubset(x),
            (Some("subsampledgradient"), Some(x)) => AccessMode::SubsampledGradient(x),
            (Some("fixedsubset" | "subsampledgradient"), None) => {
                return Err(Error::config(key("fraction"), "missing; limited access needs a fraction in (0, 1]"))
            }
            (Some(other), _) => {
                return Err(Error::config(
                    key("access"),
                    format!("unknown access mode `{other}`; expected Full, FixedSubset or SubsampledGradient"),
                ))
            }
        };
        if let Some(v) = get("seed") {
            c.seed = parse_value(&key("seed"), v)?;
        }
        if let Some(v) = get("equalize_svrg_budget") {
            c.equalize_svrg_budget = parse_bool(&key("equalize_svrg_budget"), v)?;
        }
        if let Some(v) = get("seed_policy") {
            c.seed_policy = match normalized(v).as_str() {
                "permachine" => SeedPolicy::PerMachine,
                "aligned" => SeedPolicy::Aligned,
                _ => return Err(Error::config(key("seed_policy"), format!("expected per_machine or aligned, got `{v}`"))),
            };
        }
        if let Some(v) = get("workers") {
            c.workers = parse_value(&key("workers"), v)?;
        }
        if machines == 0 || !problem.spec.n_total.is_multiple_of(machines) {
            return Err(Error::config(
                key("machines"),
                format!("must be positive and divide n_total = {}, got {machines}", problem.spec.n_total),
            ));
        }
        c.validate().map_err(|e| e.within(&format!("run.{label}")))?;
        Ok(c)
    }
}
