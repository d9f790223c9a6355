//! Runs every (solver, seed) cell of a spec and writes traces and a summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hsdmpg_core::{
    fgd_solve, hsdmpg_generic_solve, hsdmpg_quadratic_solve, scsg_solve, sgd_solve,
    svrg_full_solve, Clock, ErmObjective, ErmProblem, FgdConfig, GenericConfig, HsdmpgConfig,
    IfoCounter, ScsgConfig, SgdConfig, SolveOutcome, SolverTrace, StopRule, SvrgConfig,
    SvrgFullConfig,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::atomic_write;
use crate::error::{Error, Result};
use crate::reference::{cached_reference, ReferenceValue};
use crate::spec::{ExperimentSpec, SolverKind, SolverSettings};

pub const SUMMARY_CSV_HEADER: &str = "solver,seed,final_subopt,ifo_to_target,wall_ms";

/// `round(n^0.75)`, the default SCSG batch and HSDMPG anchor size.
pub fn default_scsg_batch(n: usize) -> usize {
    ((n as f64).powf(0.75).round() as usize).clamp(1, n.max(1))
}

/// Runs one solver from `θ = 0` on `problem`.
#[allow(clippy::too_many_arguments)]
pub fn run_solver(
    kind: SolverKind,
    problem: &ErmProblem,
    settings: &SolverSettings,
    seed: u64,
    max_outer: usize,
    stop: &StopRule,
    reference: Option<f64>,
    clock: Clock,
    counter: &IfoCounter,
) -> Result<SolveOutcome> {
    let outcome = match kind {
        SolverKind::Hsdmpg => {
            let inner = HsdmpgConfig {
                seed,
                clock,
                max_outer,
                ..settings.hsdmpg.clone()
            };
            if problem.is_quadratic() {
                hsdmpg_quadratic_solve(problem, &inner, stop, reference, counter)?.outcome
            } else {
                let config = GenericConfig {
                    inner,
                    outer_stopping: settings.per_model,
                    sigma_eff: settings.sigma_eff,
                    max_outer,
                    seed,
                    ..GenericConfig::default()
                };
                hsdmpg_generic_solve(problem, &config, stop, reference, counter)?.outcome
            }
        }
        SolverKind::Svrg => {
            let config = SvrgFullConfig {
                svrg: SvrgConfig {
                    seed,
                    max_epochs: max_outer,
                    ..settings.svrg.clone()
                },
                clock,
            };
            svrg_full_solve(problem, &config, stop, reference, counter)?
        }
        SolverKind::Sgd => {
            let config = SgdConfig {
                seed,
                clock,
                max_epochs: max_outer,
                ..settings.sgd.clone()
            };
            sgd_solve(problem, &config, stop, reference, counter)?
        }
        SolverKind::Scsg => {
            let config = ScsgConfig {
                batch: settings
                    .scsg_batch
                    .unwrap_or_else(|| default_scsg_batch(problem.n())),
                seed,
                clock,
                max_outer,
                ..settings.scsg.clone()
            };
            scsg_solve(problem, &config, stop, reference, counter)?
        }
        SolverKind::Fgd => {
            let config = FgdConfig {
                seed,
                clock,
                max_iters: max_outer,
                ..settings.fgd.clone()
            };
            fgd_solve(problem, &config, stop, reference, counter)?
        }
    };
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: SolverKind,
    pub seed: u64,
    pub final_subopt: Option<f64>,
    pub ifo_to_target: Option<u64>,
    pub wall_ms: f64,
}

impl SummaryRow {
    pub fn from_trace(solver: SolverKind, trace: &SolverTrace, target: Option<f64>) -> Self {
        Self {
            solver,
            seed: trace.meta.seed,
            final_subopt: trace.last().and_then(|r| r.suboptimality),
            ifo_to_target: target
                .and_then(|eps| trace.first_reaching(eps))
                .map(|r| r.ifo_total),
            wall_ms: trace.last().map_or(0.0, |r| r.wall_ms),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub solver: SolverKind,
    pub seed: u64,
    pub trace: SolverTrace,
    pub converged: bool,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// `None` when the reference computation failed; traces then have no
    /// suboptimality column values.
    pub reference: Option<ReferenceValue>,
    pub reference_error: Option<String>,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
}

pub fn trace_file_name(solver: SolverKind, seed: u64) -> String {
    format!("{solver}_seed{seed}.csv")
}

fn meta_text(trace: &SolverTrace, spec: &ExperimentSpec, reference: &Option<ReferenceValue>) -> String {
    let mut out = format!(
        "solver = {}\nseed = {}\nloss = {:?}\nmu = {:e}\n",
        trace.meta.solver, trace.meta.seed, spec.loss, spec.mu
    );
    match reference {
        Some(r) => out.push_str(&format!(
            "reference = {:.17e}\nreference_method = {}\n",
            r.value,
            r.method.name()
        )),
        None => out.push_str("reference = unavailable\n"),
    }
    for (k, v) in &trace.meta.config {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER.split(','))?;
    for row in rows {
        w.write_record([
            row.solver.name().to_string(),
            row.seed.to_string(),
            opt(row.final_subopt.map(|s| format!("{s:.16e}"))),
            opt(row.ifo_to_target),
            format!("{:.16e}", row.wall_ms),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    atomic_write(path, &bytes)
}

/// Reads a summary written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::Invalid(format!("{}: bad {what}", path.display()));
        rows.push(SummaryRow {
            solver: field(0).parse().map_err(|_| bad("solver"))?,
            seed: field(1).parse().map_err(|_| bad("seed"))?,
            final_subopt: match field(2) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("final_subopt"))?),
            },
            ifo_to_target: match field(3) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("ifo_to_target"))?),
            },
            wall_ms: field(4).parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(rows)
}

/// Runs every (solver, seed) cell on a pool of `spec.workers` threads. Each
/// cell is single-threaded and writes `{solver}_seed{seed}.csv` plus a
/// `.meta` sidecar; `summary.csv` lists cells in spec order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let data = spec.load_dataset()?;
    let problem = spec.build_problem(data)?;
    info!(
        "n = {}, d = {}, loss = {:?}, mu = {:e}",
        problem.n(),
        problem.dim(),
        spec.loss,
        spec.mu
    );
    std::fs::create_dir_all(&spec.output).map_err(|e| Error::io(&spec.output, e))?;

    let (reference, reference_error) =
        match cached_reference(&problem, &spec.reference, &spec.cache_dir()) {
            Ok(r) => (Some(r), None),
            Err(e) => {
                warn!("reference optimum unavailable, traces carry no suboptimality: {e}");
                (None, Some(e.to_string()))
            }
        };
    let f_star = reference.as_ref().map(|r| r.value);
    let stop = spec.target.stop_rule(problem.n());
    let clock = if spec.record_wall_time {
        Clock::Wall
    } else {
        Clock::Frozen
    };

    let cells: Vec<(SolverKind, u64)> = spec
        .solvers
        .iter()
        .flat_map(|&s| spec.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<CellResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(solver, seed)| {
                let started = Instant::now();
                let counter = IfoCounter::new();
                let out = run_solver(
                    solver,
                    &problem,
                    &spec.settings,
                    seed,
                    spec.target.max_outer,
                    &stop,
                    f_star,
                    clock,
                    &counter,
                )?;
                let trace_path = spec.output.join(trace_file_name(solver, seed));
                atomic_write(&trace_path, out.trace.to_csv_string().as_bytes())?;
                atomic_write(
                    &trace_path.with_extension("meta"),
                    meta_text(&out.trace, spec, &reference).as_bytes(),
                )?;
                info!(
                    "{solver} seed {seed}: {} records, {} IFO, converged = {} ({:.1?})",
                    out.trace.records.len(),
                    out.trace.last().map_or(0, |r| r.ifo_total),
                    out.converged,
                    started.elapsed()
                );
                Ok(CellResult {
                    solver,
                    seed,
                    trace: out.trace,
                    converged: out.converged,
                    trace_path,
                })
            })
            .collect()
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summary: Vec<SummaryRow> = cells
        .iter()
        .map(|c| SummaryRow::from_trace(c.solver, &c.trace, spec.target.subopt))
        .collect();
    let summary_path = spec.output.join("summary.csv");
    write_summary(&summary_path, &summary)?;
    Ok(ExperimentReport {
        reference,
        reference_error,
        cells,
        summary,
        summary_path,
    })
}
