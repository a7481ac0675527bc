//! Synchronous round orchestration over simulated machines.
//!
//! A round is a barrier: per-machine work may run on any number of threads, but every
//! reduction runs in machine-id order after the barrier, so results do not depend on
//! the thread count. Communication is counted, not performed.

use rayon::prelude::*;

use crate::cost::{CostLedger, MachineCost};
use crate::data::{self, Dataset, Shard, SyntheticSpec, View};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{self, EvalContext};
use crate::objective::{build_subproblem, full_grad, ExactLocalSolver, RidgeLoss};
use crate::rng::{self, Purpose, StreamRng};
use crate::schedules::Schedule;
use crate::solvers::{self, LocalSolverKind};
use crate::trace::{Algorithm, Trace, TracePoint};

/// Default initial step for SGD-type schedules.
pub const DEFAULT_A0: f64 = 0.05;
/// Default inverse-decay rate.
pub const DEFAULT_DECAY: f64 = 1e-3;
/// Default per-round damping of the DANE+SGD step size.
pub const DEFAULT_C: f64 = 0.5;
/// Default constant SVRG step.
pub const DEFAULT_SVRG_ALPHA: f64 = 0.05;

/// Which part of a machine's data each DANE round may touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccessMode {
    Full,
    /// A fresh random subset of `fraction * n` local examples per round serves both the
    /// gradient phase and the local solver.
    FixedSubset(f64),
    /// A fresh random subset per round serves the gradient phase only; the local solver
    /// samples from the whole shard.
    SubsampledGradient(f64),
}

impl AccessMode {
    pub fn fraction(self) -> Option<f64> {
        match self {
            AccessMode::Full => None,
            AccessMode::FixedSubset(x) | AccessMode::SubsampledGradient(x) => Some(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessMode::Full => "Full",
            AccessMode::FixedSubset(_) => "FixedSubset",
            AccessMode::SubsampledGradient(_) => "SubsampledGradient",
        }
    }
}

/// Number of local steps per round, either absolute or as a multiple of the shard size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepCount {
    Absolute(u64),
    PerShard(f64),
}

impl StepCount {
    pub fn resolve(self, n: usize) -> u64 {
        match self {
            StepCount::Absolute(t) => t,
            StepCount::PerShard(x) => (x * n as f64).round() as u64,
        }
    }
}

impl std::fmt::Display for StepCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepCount::Absolute(t) => write!(f, "{t}"),
            StepCount::PerShard(x) => write!(f, "{x}n"),
        }
    }
}

impl std::str::FromStr for StepCount {
    type Err = Error;

    /// Accepts an absolute count (`1500`) or a multiple of `n` (`2n`, `0.5n`, `n`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config("T", format!("expected a count like 1500 or a multiple like 2n, got `{s}`"));
        match s.strip_suffix('n') {
            Some("") => Ok(StepCount::PerShard(1.0)),
            Some(x) => x.trim().parse().map(StepCount::PerShard).map_err(|_| bad()),
            None => s.parse().map(StepCount::Absolute).map_err(|_| bad()),
        }
    }
}

/// How random streams are assigned to machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Every machine draws from its own streams.
    PerMachine,
    /// Every machine draws from machine 0's streams. With identical shards this makes
    /// all machines compute the same thing.
    Aligned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub machines: usize,
    pub rounds: usize,
    /// Local steps `T` per round (SGD steps between averages for the SGD baselines).
    pub inner_steps: StepCount,
    pub eta: f64,
    pub mu: f64,
    pub schedule: Schedule,
    pub svrg_alpha: f64,
    pub access: AccessMode,
    pub seed: u64,
    /// Halve the SVRG step count so its gradient budget matches SGD with the same `T`.
    pub equalize_svrg_budget: bool,
    pub seed_policy: SeedPolicy,
    /// Worker threads for per-machine work; 0 uses all available cores.
    pub workers: usize,
}

impl RunConfig {
    /// Defaults: `η = 1`, `μ = 0`, `T = 2n`, 20 rounds, full access, and the stochastic
    /// schedule that suits the algorithm.
    pub fn new(algorithm: Algorithm, machines: usize) -> Self {
        let schedule = match algorithm {
            Algorithm::DaneSgd => Schedule::dane_exp_decay(DEFAULT_A0, DEFAULT_DECAY, DEFAULT_C),
            Algorithm::DaneSvrg | Algorithm::DaneExact => Schedule::constant(DEFAULT_SVRG_ALPHA),
            Algorithm::Sgd | Algorithm::IdealDistSgd | Algorithm::DistSgd => {
                Schedule::inverse_decay(DEFAULT_A0, DEFAULT_DECAY)
            }
        };
        RunConfig {
            algorithm,
            machines,
            rounds: 20,
            inner_steps: StepCount::PerShard(2.0),
            eta: 1.0,
            mu: 0.0,
            schedule,
            svrg_alpha: DEFAULT_SVRG_ALPHA,
            access: AccessMode::Full,
            seed: 0,
            equalize_svrg_budget: false,
            seed_policy: SeedPolicy::PerMachine,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        if self.machines == 0 {
            return Err(Error::config("machines", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", format!("must be positive, got {}", self.eta)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::config("mu", format!("must be >= 0, got {}", self.mu)));
        }
        match self.inner_steps {
            StepCount::Absolute(0) => return Err(Error::config("T", "must be at least 1")),
            StepCount::PerShard(x) if !(x > 0.0 && x.is_finite()) => {
                return Err(Error::config("T", format!("multiple of n must be positive, got {x}")))
            }
            _ => {}
        }
        if self.algorithm == Algorithm::DaneSvrg && !(self.svrg_alpha > 0.0 && self.svrg_alpha.is_finite()) {
            return Err(Error::config("svrg_alpha", format!("must be positive, got {}", self.svrg_alpha)));
        }
        if matches!(self.algorithm, Algorithm::DaneSgd | Algorithm::Sgd | Algorithm::IdealDistSgd | Algorithm::DistSgd) {
            self.schedule.validate().map_err(|e| e.within("schedule"))?;
        }
        if let Some(x) = self.access.fraction() {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::config("fraction", format!("must lie in (0, 1], got {x}")));
            }
            if !self.algorithm.is_dane() {
                return Err(Error::config(
                    "access",
                    format!("limited data access applies to DANE variants, not {}", self.algorithm),
                ));
            }
        }
        if self.algorithm == Algorithm::DaneExact && matches!(self.access, AccessMode::FixedSubset(_)) {
            return Err(Error::Unsupported(
                "the exact local solver cannot be combined with FixedSubset access".into(),
            ));
        }
        Ok(())
    }

    /// Local steps actually taken per round for shards of size `n`.
    pub fn effective_inner_steps(&self, n: usize) -> u64 {
        let t = self.inner_steps.resolve(n).max(1);
        if self.algorithm == Algorithm::DaneSvrg && self.equalize_svrg_budget {
            (t / 2).max(1)
        } else {
            t
        }
    }

    fn local_solver(&self, n: usize) -> LocalSolverKind {
        let steps = self.effective_inner_steps(n);
        match self.algorithm {
            Algorithm::DaneExact => LocalSolverKind::Exact,
            Algorithm::DaneSgd => LocalSolverKind::Sgd {
                steps,
                schedule: self.schedule,
            },
            Algorithm::DaneSvrg => LocalSolverKind::Svrg {
                steps,
                alpha: self.svrg_alpha,
            },
            other => unreachable!("{other} has no DANE local solver"),
        }
    }

    fn stream_machine(&self, machine: usize) -> u64 {
        match self.seed_policy {
            SeedPolicy::PerMachine => machine as u64,
            SeedPolicy::Aligned => 0,
        }
    }
}

/// Training data plus the evaluation context used to score iterates.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dataset: Dataset,
    pub ctx: EvalContext,
    /// Seed of the example-to-machine permutation.
    pub partition_seed: u64,
}

impl Problem {
    /// Generates the training set and holdout for `spec`.
    pub fn synthetic(spec: &SyntheticSpec, loss: RidgeLoss, holdout_size: usize) -> Result<Self> {
        let dataset = data::generate_synthetic(spec)?;
        let ctx = EvalContext::for_synthetic(&dataset, loss, spec, holdout_size)?;
        Ok(Problem {
            dataset,
            ctx,
            partition_seed: spec.seed,
        })
    }

    pub fn loss(&self) -> &RidgeLoss {
        &self.ctx.loss
    }

    pub fn partition(&self, machines: usize) -> Result<Vec<Shard>> {
        data::partition(&self.dataset, machines, self.partition_seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub ledger: CostLedger,
    /// `w^(0), w^(1), ..., w^(rounds)`.
    pub iterates: Vec<Vec<f64>>,
    /// Local steps per round after resolving `T` against the shard size.
    pub inner_steps: u64,
}

impl RunOutput {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("at least the starting point")
    }
}

fn point(round: usize, w: &[f64], ledger: &CostLedger, grads: f64, ctx: &EvalContext) -> TracePoint {
    let subopt = metrics::suboptimality(w, ctx);
    TracePoint {
        round,
        max_grads_per_machine: grads,
        comm_rounds: ledger.comm_rounds,
        floats_communicated: ledger.floats_communicated,
        train_subopt: subopt,
        log10_subopt: metrics::log10_of_subopt(subopt),
        pop_error: metrics::population_error(w, ctx),
    }
}

fn check_finite(w: &[f64], round: usize, machine: Option<usize>) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(round, machine, "iterate is not finite (diverged); reduce the step size"))
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    Ok(pool.install(f))
}

fn check_shards(shards: &[Shard], config: &RunConfig, dataset: &Dataset) -> Result<usize> {
    if shards.len() != config.machines {
        return Err(Error::config(
            "machines",
            format!("{} shards supplied for {} machines", shards.len(), config.machines),
        ));
    }
    let n = shards[0].len();
    if n == 0 || shards.iter().any(|s| s.len() != n) {
        return Err(Error::config("machines", "shards must be nonempty and of equal size"));
    }
    if shards.iter().flat_map(|s| &s.indices).any(|&i| i >= dataset.len()) {
        return Err(Error::config("shards", "shard index outside the dataset"));
    }
    Ok(n)
}

/// Local SGD on every machine with iterate averaging after each block of `T` steps.
pub fn run_dist_sgd(config: &RunConfig, problem: &Problem, shards: &[Shard]) -> Result<RunOutput> {
    config.validate()?;
    if config.algorithm != Algorithm::DistSgd {
        return Err(Error::config("algorithm", format!("expected DistSgd, got {}", config.algorithm)));
    }
    let dataset = &problem.dataset;
    let n = check_shards(shards, config, dataset)?;
    let steps = config.effective_inner_steps(n);
    let loss = problem.loss();
    let d = dataset.dim();

    let mut rngs: Vec<StreamRng> = (0..config.machines)
        .map(|i| rng::stream(config.seed, Purpose::Sgd, config.stream_machine(i), 0))
        .collect();
    let mut ledger = CostLedger::new(config.machines);
    let mut w = vec![0.0; d];
    let mut iterates = vec![w.clone()];
    let mut points = vec![point(0, &w, &ledger, 0.0, &problem.ctx)];

    with_pool(config.workers, || -> Result<()> {
        for t in 1..=config.rounds {
            let k_start = (t as u64 - 1) * steps;
            let locals: Vec<(Vec<f64>, MachineCost)> = rngs
                .par_iter_mut()
                .zip(shards.par_iter())
                .map(|(rng, shard)| {
                    let mut cost = MachineCost::default();
                    let mut wi = w.clone();
                    solvers::sgd_steps(loss, shard.view(dataset), &config.schedule, &mut wi, rng, k_start, steps, &mut cost);
                    (wi, cost)
                })
                .collect();
            let mut ws = Vec::with_capacity(locals.len());
            for (i, (wi, cost)) in locals.into_iter().enumerate() {
                check_finite(&wi, t, Some(i))?;
                ledger.charge(i, cost);
                ws.push(wi);
            }
            w = linalg::tree_mean(&ws);
            ledger.synchronize(d);
            points.push(point(t, &w, &ledger, ledger.max_grads_per_machine() as f64, &problem.ctx));
            iterates.push(w.clone());
        }
        Ok(())
    })??;

    Ok(RunOutput {
        trace: Trace {
            algorithm: Algorithm::DistSgd,
            points,
        },
        ledger,
        iterates,
        inner_steps: steps,
    })
}

/// Single-machine SGD over the whole dataset, recorded every `T` steps.
///
/// `T` resolves against the per-machine shard size `N / machines` so that trace points line
/// up with the distributed runs.
pub fn run_sgd(config: &RunConfig, problem: &Problem) -> Result<RunOutput> {
    config.validate()?;
    let dataset = &problem.dataset;
    if !dataset.len().is_multiple_of(config.machines) {
        return Err(Error::config("machines", "machines must divide the number of examples"));
    }
    let steps = config.effective_inner_steps(dataset.len() / config.machines);
    let loss = problem.loss();
    let mut rng = rng::stream(config.seed, Purpose::Sgd, 0, 0);
    let mut ledger = CostLedger::new(1);
    let mut w = vec![0.0; dataset.dim()];
    let mut iterates = vec![w.clone()];
    let mut points = vec![point(0, &w, &ledger, 0.0, &problem.ctx)];
    for t in 1..=config.rounds {
        let mut cost = MachineCost::default();
        solvers::sgd_steps(loss, dataset.view(), &config.schedule, &mut w, &mut rng, (t as u64 - 1) * steps, steps, &mut cost);
        check_finite(&w, t, Some(0))?;
        ledger.charge(0, cost);
        points.push(point(t, &w, &ledger, ledger.max_grads_per_machine() as f64, &problem.ctx));
        iterates.push(w.clone());
    }
    Ok(RunOutput {
        trace: Trace {
            algorithm: Algorithm::Sgd,
            points,
        },
        ledger,
        iterates,
        inner_steps: steps,
    })
}

struct GradientPhase {
    local_grad: Vec<f64>,
    subset: Option<Vec<usize>>,
    cost: MachineCost,
}

/// DANE with the configured local solver (exact, SGD or single-stage SVRG).
pub fn run_dane(config: &RunConfig, problem: &Problem, shards: &[Shard]) -> Result<RunOutput> {
    config.validate()?;
    if !config.algorithm.is_dane() {
        return Err(Error::config("algorithm", format!("{} is not a DANE variant", config.algorithm)));
    }
    let dataset = &problem.dataset;
    let n = check_shards(shards, config, dataset)?;
    if let Some(x) = config.access.fraction() {
        data::subset_size(n, x)?;
    }
    let solver = config.local_solver(n);
    let loss = problem.loss();
    let d = dataset.dim();

    with_pool(config.workers, || -> Result<RunOutput> {
        // The exact solver's factorization is independent of the anchor.
        let exact: Vec<ExactLocalSolver> = if solver == LocalSolverKind::Exact {
            shards
                .par_iter()
                .map(|s| ExactLocalSolver::prepare(loss, s.view(dataset), config.mu))
                .collect::<Vec<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| relocate(e, 1, i)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        let mut ledger = CostLedger::new(config.machines);
        let mut w = vec![0.0; d];
        let mut iterates = vec![w.clone()];
        let mut points = vec![point(0, &w, &ledger, 0.0, &problem.ctx)];

        for t in 1..=config.rounds {
            // gradient phase
            let phases: Vec<Result<GradientPhase>> = shards
                .par_iter()
                .map(|shard| {
                    let subset = match config.access.fraction() {
                        None => None,
                        Some(x) => Some(subset_for(shard, x, config, t)?),
                    };
                    let view = match &subset {
                        Some(ix) => dataset.subset(ix),
                        None => shard.view(dataset),
                    };
                    let mut cost = MachineCost::default();
                    let local_grad = full_grad(loss, &w, view, &mut cost);
                    Ok(GradientPhase { local_grad, subset, cost })
                })
                .collect();
            let mut phases = phases.into_iter().collect::<Result<Vec<_>>>()?;
            for (i, p) in phases.iter().enumerate() {
                check_finite(&p.local_grad, t, Some(i))?;
                ledger.charge(i, p.cost);
            }
            let local_grads: Vec<Vec<f64>> = phases.iter_mut().map(|p| std::mem::take(&mut p.local_grad)).collect();
            let global_grad = linalg::tree_mean(&local_grads);
            ledger.synchronize(d);

            // local phase
            let locals: Vec<Result<(Vec<f64>, MachineCost)>> = shards
                .par_iter()
                .zip(phases.par_iter())
                .zip(local_grads.into_par_iter())
                .enumerate()
                .map(|(i, ((shard, phase), local_grad))| {
                    let sub = build_subproblem(w.clone(), local_grad, global_grad.clone(), config.eta, config.mu)?;
                    let view: View<'_> = match (config.access, &phase.subset) {
                        (AccessMode::FixedSubset(_), Some(ix)) => dataset.subset(ix),
                        _ => shard.view(dataset),
                    };
                    let seed = rng::stream_seed(config.seed, Purpose::LocalSteps, config.stream_machine(i), t as u64);
                    let mut cost = MachineCost::default();
                    let wi = match solver {
                        LocalSolverKind::Exact => exact[i].solve(&sub, loss, view, &mut cost).map_err(|e| relocate(e, t, i))?,
                        LocalSolverKind::Sgd { steps, schedule } => {
                            solvers::local_solve_sgd(&sub, loss, view, steps, &schedule, seed, t, &mut cost)
                        }
                        LocalSolverKind::Svrg { steps, alpha } => {
                            solvers::local_solve_svrg(&sub, loss, view, steps, alpha, seed, t, &mut cost)
                        }
                    };
                    Ok((wi, cost))
                })
                .collect();
            let mut ws = Vec::with_capacity(config.machines);
            for (i, r) in locals.into_iter().enumerate() {
                let (wi, cost) = r?;
                check_finite(&wi, t, Some(i))?;
                ledger.charge(i, cost);
                ws.push(wi);
            }

            // averaging
            w = linalg::tree_mean(&ws);
            ledger.synchronize(d);
            let p = point(t, &w, &ledger, ledger.max_grads_per_machine() as f64, &problem.ctx);
            if config.algorithm == Algorithm::DaneExact && config.access == AccessMode::Full {
                let prev = points.last().expect("starting point").train_subopt;
                if p.train_subopt > prev + 1e-9 {
                    return Err(Error::numerical(
                        t,
                        None,
                        format!("exact DANE suboptimality increased from {prev:e} to {:e}", p.train_subopt),
                    ));
                }
            }
            points.push(p);
            iterates.push(w.clone());
        }

        Ok(RunOutput {
            trace: Trace {
                algorithm: config.algorithm,
                points,
            },
            ledger,
            iterates,
            inner_steps: match solver {
                LocalSolverKind::Exact => 0,
                LocalSolverKind::Sgd { steps, .. } | LocalSolverKind::Svrg { steps, .. } => steps,
            },
        })
    })?
}

fn subset_for(shard: &Shard, fraction: f64, config: &RunConfig, round: usize) -> Result<Vec<usize>> {
    match config.seed_policy {
        SeedPolicy::PerMachine => data::sample_subset(shard, fraction, config.seed, round),
        SeedPolicy::Aligned => {
            let aligned = Shard {
                machine_id: 0,
                indices: shard.indices.clone(),
            };
            data::sample_subset(&aligned, fraction, config.seed, round)
        }
    }
}

fn relocate(e: Error, round: usize, machine: usize) -> Error {
    match e {
        Error::Numerical { message, .. } => Error::numerical(round, Some(machine), message),
        other => other,
    }
}

/// Runs any algorithm on `problem`, partitioning its data across `config.machines`.
pub fn run(config: &RunConfig, problem: &Problem) -> Result<RunOutput> {
    config.validate()?;
    match config.algorithm {
        Algorithm::Sgd => run_sgd(config, problem),
        Algorithm::IdealDistSgd => {
            let mut out = run_sgd(config, problem)?;
            out.trace = solvers::ideal_dist_sgd(&out.trace, config.machines);
            out.trace.algorithm = Algorithm::IdealDistSgd;
            Ok(out)
        }
        Algorithm::DistSgd => run_dist_sgd(config, problem, &problem.partition(config.machines)?),
        Algorithm::DaneExact | Algorithm::DaneSgd | Algorithm::DaneSvrg => {
            run_dane(config, problem, &problem.partition(config.machines)?)
        }
    }
}
