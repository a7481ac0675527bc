use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use danebench_core::sim::{self, AccessMode, Problem, StepCount};
use danebench_core::{Error, Result, RidgeLoss, RunConfig, Trace};

use crate::config::ExperimentFile;
use crate::manifest::{Manifest, RunRecord, SweepRecord, MANIFEST_FILE};
use crate::plot::{self, Series, XAxis, YAxis};

pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

/// Process exit status for an error: 3 for numerical failures, 2 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => 3,
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    T,
    Fraction,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::T => "T",
            SweepAxis::Fraction => "fraction",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepAxis::T => &["0.5n", "n", "2n", "4n", "6n"],
            SweepAxis::Fraction => &["1.0", "0.5", "0.25"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn build_problem(file: &ExperimentFile) -> Result<Problem> {
    info!(
        "generating problem: d={} N={} holdout={}",
        file.problem.spec.d, file.problem.spec.n_total, file.eval.holdout_size
    );
    Problem::synthetic(&file.problem.spec, RidgeLoss::new(file.problem.reg)?, file.eval.holdout_size)
}

fn execute(label: &str, config: &RunConfig, problem: &Problem) -> Result<sim::RunOutput> {
    info!("run {label}: {} on {} machines, {} rounds", config.algorithm, config.machines, config.rounds);
    sim::run(config, problem).map_err(|e| match e {
        Error::Numerical { round, machine, message } => Error::numerical(round, machine, format!("run `{label}`: {message}")),
        other => other.within(&format!("run.{label}")),
    })
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

/// Executes every run block, writing `<label>.csv` per run and `manifest.json` into `out`.
pub fn cmd_run(config: &Path, out: &Path, seed: Option<u64>) -> Result<Manifest> {
    let mut file = ExperimentFile::load(config)?;
    if let Some(s) = seed {
        file.runs.iter_mut().for_each(|r| r.config.seed = s);
    }
    prepare_out_dir(out)?;
    let problem = build_problem(&file)?;
    let mut manifest = Manifest::new("run", &file, seed);
    for run in &file.runs {
        let output = execute(&run.label, &run.config, &problem)?;
        let csv = format!("{}.csv", run.label);
        write_file(&out.join(&csv), output.trace.to_csv_string().as_bytes())?;
        manifest.runs.push(RunRecord::new(&run.label, &csv, &run.config, &output, file.eval.target_log_subopt));
    }
    write_file(&out.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

fn sweep_config(base: &RunConfig, label: &str, axis: SweepAxis, value: &str) -> Result<RunConfig> {
    let mut c = base.clone();
    match axis {
        SweepAxis::T => c.inner_steps = value.parse::<StepCount>()?,
        SweepAxis::Fraction => {
            let x: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::config("fraction", format!("cannot parse `{value}` as a number")))?;
            c.access = match c.access {
                AccessMode::FixedSubset(_) => AccessMode::FixedSubset(x),
                AccessMode::SubsampledGradient(_) => AccessMode::SubsampledGradient(x),
                AccessMode::Full => {
                    return Err(Error::config(
                        format!("run.{label}.access"),
                        "a fraction sweep needs FixedSubset or SubsampledGradient access",
                    ))
                }
            };
        }
    }
    c.validate().map_err(|e| e.within(&format!("run.{label}")))?;
    Ok(c)
}

/// Runs every run block once per axis value and writes a summary of rounds to target.
pub fn cmd_sweep(config: &Path, axis: SweepAxis, values: Option<Vec<String>>, out: &Path, seed: Option<u64>) -> Result<Manifest> {
    let mut file = ExperimentFile::load(config)?;
    if let Some(s) = seed {
        file.runs.iter_mut().for_each(|r| r.config.seed = s);
    }
    let values = values.unwrap_or_else(|| axis.default_values());
    if values.is_empty() {
        return Err(Error::config("values", "no sweep values"));
    }
    let mut jobs = Vec::new();
    for run in &file.runs {
        for value in &values {
            let c = sweep_config(&run.config, &run.label, axis, value).map_err(|e| e.within("values"))?;
            let label = format!("{}_{}_{}", run.label, axis.name(), value.trim());
            jobs.push((run.label.clone(), value.trim().to_string(), label, c));
        }
    }
    prepare_out_dir(out)?;
    let problem = build_problem(&file)?;
    let mut manifest = Manifest::new("sweep", &file, seed);
    let summary_path = out.join(SWEEP_SUMMARY_FILE);
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|e| Error::Io(format!("{}: {e}", summary_path.display())))?;
    summary.write_record([
        "run",
        "axis",
        "value",
        "inner_steps",
        "fraction",
        "rounds_to_target",
        "grads_to_target",
        "best_log10_subopt",
        "final_log10_subopt",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (base, value, label, c) in &jobs {
        let output = execute(label, c, &problem)?;
        let csv = format!("{label}.csv");
        write_file(&out.join(&csv), output.trace.to_csv_string().as_bytes())?;
        let record = RunRecord::new(label, &csv, c, &output, file.eval.target_log_subopt);
        summary.write_record([
            base.clone(),
            axis.name().to_string(),
            value.clone(),
            record.inner_steps.to_string(),
            opt(record.fraction.map(|x| x.to_string())),
            opt(record.result.rounds_to_target.map(|r| r.to_string())),
            opt(record.result.grads_to_target.map(|g| g.to_string())),
            record.result.best_log10_subopt.to_string(),
            record.result.final_log10_subopt.to_string(),
        ])?;
        manifest.runs.push(record);
    }
    summary.flush().map_err(|e| io_err(&summary_path, e))?;
    manifest.sweep = Some(SweepRecord {
        axis: axis.name().to_string(),
        values,
        summary_csv: SWEEP_SUMMARY_FILE.to_string(),
    });
    write_file(&out.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

/// Legend name for a trace: the run label from a manifest beside the CSV when there is one.
fn series_name(path: &Path, trace: &Trace) -> Result<String> {
    let algorithm = trace.algorithm.name();
    let manifest_path = path.parent().map(|d| d.join(MANIFEST_FILE)).unwrap_or_else(|| PathBuf::from(MANIFEST_FILE));
    if !manifest_path.exists() {
        return Ok(algorithm.to_string());
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest = Manifest::from_json(&text)?;
    let file_name = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
    Ok(match manifest.run_for_csv(file_name) {
        Some(r) if !r.label.eq_ignore_ascii_case(algorithm) => format!("{} ({algorithm})", r.label),
        _ => algorithm.to_string(),
    })
}

/// Draws one series per CSV into a single SVG chart.
pub fn cmd_plot(csvs: &[PathBuf], out: &Path, x: XAxis, y: YAxis) -> Result<()> {
    if csvs.is_empty() {
        return Err(Error::config("csv", "no input CSV files"));
    }
    let mut series = Vec::with_capacity(csvs.len());
    for path in csvs {
        let reader = fs::File::open(path).map_err(|e| io_err(path, e))?;
        let trace = Trace::read_csv(reader).map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("{}: {key}", path.display()), message),
            other => other,
        })?;
        series.push(Series {
            name: series_name(path, &trace)?,
            trace,
        });
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out_dir(dir)?;
    }
    write_file(out, plot::render(&series, x, y).as_bytes())
}
