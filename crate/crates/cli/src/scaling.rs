//! IFO-to-target scaling across dataset sizes.
//!
//! For every size `n` the base spec's synthetic family is regenerated with
//! `n` rows, and both `μ` and the target suboptimality are set to `1/√n`.
//! Each (solver, seed) run stops at the target or at a hard IFO cap of
//! `cap_epochs · n`. Runs that hit the cap are censored: they are excluded
//! from the medians and the fit, and the fit is flagged.

use std::path::PathBuf;

use hsdmpg_core::stats::{linear_fit, median};
use hsdmpg_core::{Clock, ErmObjective, IfoCounter, StopRule};
use log::{info, warn};
use rayon::prelude::*;

use crate::atomic_write;
use crate::error::{Error, Result};
use crate::experiment::run_solver;
use crate::reference::cached_reference;
use crate::spec::{DatasetSource, ExperimentSpec, SolverKind};

pub const SCALING_CSV_HEADER: &str = "solver,n,mu,epsilon,median_ifo,runs,censored";
pub const FIT_CSV_HEADER: &str = "solver,slope,r2,sizes_used,censored_runs";

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingOptions {
    pub sizes: Vec<usize>,
    /// Hard IFO cap per run, in epochs of the current `n`.
    pub cap_epochs: f64,
    /// Keep this many distinct base rows at every size (duplication grows
    /// with `n`). `None` keeps the base spec's duplication factor.
    pub base_rows: Option<usize>,
}

impl ScalingOptions {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            cap_epochs: 50.0,
            base_rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub solver: SolverKind,
    pub n: usize,
    pub seed: u64,
    /// `None` when censored, including targets first met past the cap.
    pub ifo_to_target: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub solver: SolverKind,
    pub n: usize,
    pub mu: f64,
    pub epsilon: f64,
    /// Median over uncensored runs.
    pub median_ifo: Option<f64>,
    pub runs: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverFit {
    pub solver: SolverKind,
    /// Least-squares slope of `log(median IFO)` against `log n`; `None`
    /// with fewer than two usable sizes.
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub sizes_used: usize,
    pub censored_runs: usize,
}

impl SolverFit {
    pub fn flagged(&self) -> bool {
        self.censored_runs > 0
    }
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub runs: Vec<RunResult>,
    pub points: Vec<ScalingPoint>,
    pub fits: Vec<SolverFit>,
    pub table_path: PathBuf,
    pub fit_path: PathBuf,
}

impl ScalingReport {
    pub fn fit(&self, solver: SolverKind) -> Option<&SolverFit> {
        self.fits.iter().find(|f| f.solver == solver)
    }
}

fn spec_for_size(base: &ExperimentSpec, n: usize, opts: &ScalingOptions) -> Result<ExperimentSpec> {
    let DatasetSource::Synthetic(mut synth) = base.dataset.clone() else {
        return Err(Error::Invalid("scaling needs a synthetic dataset family".into()));
    };
    synth.n = n;
    if let Some(rows) = opts.base_rows {
        if rows == 0 || n % rows != 0 {
            return Err(Error::Invalid(format!(
                "size {n} is not a multiple of {rows} base rows"
            )));
        }
        synth.duplication = n / rows;
    }
    let mu = 1.0 / (n as f64).sqrt();
    let mut spec = base.clone();
    spec.dataset = DatasetSource::Synthetic(synth);
    spec.mu = mu;
    spec.target.subopt = Some(mu);
    spec.validate()?;
    Ok(spec)
}

/// Runs the study and writes `scaling.csv` and `scaling_fit.csv` to the
/// base spec's output directory.
pub fn scaling_study(base: &ExperimentSpec, opts: &ScalingOptions) -> Result<ScalingReport> {
    let mut sizes = opts.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::Invalid(format!(
            "scaling needs at least 4 distinct sizes, got {}",
            sizes.len()
        )));
    }
    if !(opts.cap_epochs > 0.0) {
        return Err(Error::Invalid("cap_epochs must be positive".into()));
    }
    let specs = sizes
        .iter()
        .map(|&n| spec_for_size(base, n, opts))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&base.output).map_err(|e| Error::io(&base.output, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;

    let mut runs = Vec::new();
    let mut points = Vec::new();
    for spec in &specs {
        let problem = spec.build_problem(spec.load_dataset()?)?;
        let n = problem.data().n();
        let eps = spec.mu;
        let f_star = cached_reference(&problem, &spec.reference, &spec.cache_dir())?.value;
        let cap = (opts.cap_epochs * n as f64).ceil() as u64;
        let stop = StopRule::suboptimality(eps).with_ifo_budget(cap);
        let cells: Vec<(SolverKind, u64)> = spec
            .solvers
            .iter()
            .flat_map(|&s| spec.seeds.iter().map(move |&seed| (s, seed)))
            .collect();
        let results: Vec<Result<RunResult>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(solver, seed)| {
                    let out = run_solver(
                        solver,
                        &problem,
                        &spec.settings,
                        seed,
                        spec.target.max_outer,
                        &stop,
                        Some(f_star),
                        Clock::Frozen,
                        &IfoCounter::new(),
                    )?;
                    Ok(RunResult {
                        solver,
                        n,
                        seed,
                        ifo_to_target: out
                            .trace
                            .first_reaching(eps)
                            .map(|r| r.ifo_total)
                            .filter(|&ifo| ifo <= cap),
                    })
                })
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        for &solver in &spec.solvers {
            let mine: Vec<&RunResult> = results.iter().filter(|r| r.solver == solver).collect();
            let done: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.ifo_to_target.map(|x| x as f64))
                .collect();
            let censored = mine.len() - done.len();
            if censored > 0 {
                warn!("{solver} at n = {n}: {censored} of {} runs hit the IFO cap {cap}", mine.len());
            }
            let point = ScalingPoint {
                solver,
                n,
                mu: spec.mu,
                epsilon: eps,
                median_ifo: median(&done),
                runs: mine.len(),
                censored,
            };
            info!(
                "{solver} n = {n}: median IFO {:?} ({:.3} epochs)",
                point.median_ifo,
                point.median_ifo.map_or(f64::NAN, |m| m / n as f64)
            );
            points.push(point);
        }
        runs.extend(results);
    }

    let fits: Vec<SolverFit> = base
        .solvers
        .iter()
        .map(|&solver| {
            let mine: Vec<&ScalingPoint> = points.iter().filter(|p| p.solver == solver).collect();
            let xy: Vec<(f64, f64)> = mine
                .iter()
                .filter_map(|p| p.median_ifo.map(|m| ((p.n as f64).ln(), m.ln())))
                .collect();
            let (slope, r2) = if xy.len() >= 2 {
                let (s, r) = linear_fit(&xy);
                (Some(s), Some(r))
            } else {
                (None, None)
            };
            let fit = SolverFit {
                solver,
                slope,
                r2,
                sizes_used: xy.len(),
                censored_runs: mine.iter().map(|p| p.censored).sum(),
            };
            if fit.flagged() {
                warn!(
                    "{solver}: slope fitted on survivors only ({} censored runs)",
                    fit.censored_runs
                );
            }
            fit
        })
        .collect();

    let table_path = base.output.join("scaling.csv");
    let fit_path = base.output.join("scaling_fit.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCALING_CSV_HEADER.split(','))?;
    for p in &points {
        w.write_record([
            p.solver.name().to_string(),
            p.n.to_string(),
            format!("{:.16e}", p.mu),
            format!("{:.16e}", p.epsilon),
            p.median_ifo.map(|m| format!("{m}")).unwrap_or_default(),
            p.runs.to_string(),
            p.censored.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&table_path, e.into_error()))?;
    atomic_write(&table_path, &bytes)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FIT_CSV_HEADER.split(','))?;
    for f in &fits {
        w.write_record([
            f.solver.name().to_string(),
            f.slope.map(|s| format!("{s:.6}")).unwrap_or_default(),
            f.r2.map(|s| format!("{s:.6}")).unwrap_or_default(),
            f.sizes_used.to_string(),
            f.censored_runs.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&fit_path, e.into_error()))?;
    atomic_write(&fit_path, &bytes)?;

    Ok(ScalingReport {
        runs,
        points,
        fits,
        table_path,
        fit_path,
    })
}
