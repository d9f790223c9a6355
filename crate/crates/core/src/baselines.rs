//! Comparison solvers on the full objective: full gradient descent, SGD,
//! SVRG and SCSG (SVRG with subsampled snapshot gradients), plus the exact
//! ridge solution used as a reference optimum.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::loss::{dot, ErmObjective};
use crate::oracle::{
    norm, Clock, IfoCounter, OracleKind, Recorder, SolveOutcome, StopRule, TraceMeta,
};
use crate::stats::{rng_stream, sample_subset};
use crate::svrg::{svrg_run, FiniteSum, SvrgConfig, SvrgStopping};

/// `F` as a finite sum of `f_i(θ) = φ_i(X_i θ) + (μ/2)‖θ‖²`.
#[derive(Debug, Clone, Copy)]
pub struct ErmSum<'a, P: ?Sized> {
    problem: &'a P,
}

impl<'a, P: ErmObjective + ?Sized> ErmSum<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        Self { problem }
    }
}

impl<P: ErmObjective + ?Sized> FiniteSum for ErmSum<'_, P> {
    fn len(&self) -> usize {
        self.problem.n()
    }

    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn strong_convexity(&self) -> f64 {
        self.problem.mu()
    }

    fn smoothness(&self) -> f64 {
        self.problem.smoothness_bound()
    }

    fn oracle_kind(&self) -> OracleKind {
        self.problem.oracle_kind()
    }

    fn component_value(&self, i: usize, theta: &[f64]) -> f64 {
        self.problem.sample_loss(i, theta) + 0.5 * self.problem.mu() * dot(theta, theta)
    }

    fn add_component_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        self.problem.add_sample_gradient(i, theta, scale, out);
        let mu = self.problem.mu();
        for (o, t) in out.iter_mut().zip(theta) {
            *o += scale * mu * t;
        }
    }

    fn add_component_difference(
        &self,
        i: usize,
        theta: &[f64],
        anchor: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        let k = self.problem.classes();
        let mut z: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, k);
        let mut g: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, k);
        let mut g_anchor: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, k);
        self.problem.predict(i, theta, &mut z);
        self.problem.sample_derivative(i, &z, &mut g);
        self.problem.predict(i, anchor, &mut z);
        self.problem.sample_derivative(i, &z, &mut g_anchor);
        for (a, b) in g.iter_mut().zip(&g_anchor) {
            *a -= b;
        }
        self.problem.scatter(i, &g, scale, out);
        let mu = scale * self.problem.mu();
        for ((o, t), a) in out.iter_mut().zip(theta).zip(anchor) {
            *o += mu * (t - a);
        }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.problem.objective(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.problem.gradient(theta)
    }
}

/// High-accuracy minimizer from full gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

/// Full gradient descent with step `1/L_F` (`L_F` from power iteration on
/// `H̄`) until `‖∇F‖ ≤ tol` or `max_iters` steps.
pub fn fgd_reference<P: ErmObjective + ?Sized>(
    problem: &P,
    tol: f64,
    max_iters: usize,
    counter: &IfoCounter,
) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let step = 1.0 / power_bound(problem, 0, counter);
    let mut theta = vec![0.0; problem.dim()];
    let mut iterations = 0;
    loop {
        let g = problem.full_gradient(&theta, counter);
        let gn = norm(&g);
        if !gn.is_finite() {
            return Err(Error::Diverged { steps: iterations as u64 });
        }
        if gn <= tol || iterations >= max_iters {
            return Ok(Reference {
                value: problem.objective(&theta),
                theta,
                grad_norm: gn,
                iterations,
                converged: gn <= tol,
            });
        }
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= step * gi;
        }
        iterations += 1;
    }
}

fn power_bound<P: ErmObjective + ?Sized>(problem: &P, seed: u64, counter: &IfoCounter) -> f64 {
    crate::loss::power_iteration_bound(problem, 100, seed, counter)
}

/// Exact minimizer of a quadratic-loss problem from the normal equations
/// `(XᵀX/n + μI) θ = Xᵀy/n`.
pub fn ridge_closed_form<P: ErmObjective + ?Sized>(problem: &P) -> Result<Vec<f64>> {
    if !problem.is_quadratic() || problem.classes() != 1 {
        return Err(Error::InvalidArgument(
            "closed form needs a single-output quadratic loss".into(),
        ));
    }
    let data = problem.data();
    let (n, d) = (data.n(), data.d());
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (row, &y) in data.rows().iter().zip(data.labels()) {
        for (a, va) in row.iter() {
            rhs[a] += va * y / n as f64;
            for (b, vb) in row.iter() {
                gram[(a, b)] += va * vb / n as f64;
            }
        }
    }
    for j in 0..d {
        gram[(j, j)] += problem.mu();
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Linalg("normal equations are not positive definite".into()))?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgdConfig {
    /// Defaults to `1/L_F` with `L_F` from power iteration (charged as
    /// curvature touches).
    pub step_size: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub clock: Clock,
}

impl Default for FgdConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iters: 100_000,
            seed: 0,
            clock: Clock::Wall,
        }
    }
}

/// Full gradient descent from `θ = 0`, one trace row per iteration.
pub fn fgd_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &FgdConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<SolveOutcome> {
    let step = match config.step_size {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::InvalidArgument(format!("step size must be positive, got {s}"))),
        None => 1.0 / power_bound(problem, config.seed, counter),
    };
    let mut meta = TraceMeta::new("fgd", config.seed);
    meta.set("step", step);
    let mut recorder = Recorder::new(meta, reference, config.clock);
    let mut theta = vec![0.0; problem.dim()];
    let mut rec = recorder.record(0, problem, &theta, counter).clone();
    let mut iter = 0;
    while !stop.should_stop(&rec) && iter < config.max_iters {
        let g = problem.full_gradient(&theta, counter);
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= step * gi;
        }
        iter += 1;
        rec = recorder.record(iter, problem, &theta, counter).clone();
        if !rec.objective.is_finite() {
            return Err(Error::Diverged { steps: iter as u64 });
        }
    }
    Ok(SolveOutcome {
        theta,
        converged: stop.accuracy_met(&rec),
        trace: recorder.finish(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `η_j = η₀ / (1 + η₀ μ j)`, which behaves like `1/(μ j)` for large `j`.
    /// `None` uses `η₀ = 1/L_F`.
    InvT(Option<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub step: StepSize,
    pub minibatch: usize,
    /// Cap on effective epochs (`n` touches each).
    pub max_epochs: usize,
    pub seed: u64,
    pub clock: Clock,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            step: StepSize::InvT(None),
            minibatch: 1,
            max_epochs: 1000,
            seed: 0,
            clock: Clock::Wall,
        }
    }
}

/// Minibatch SGD from `θ = 0` (indices drawn with replacement). One trace
/// row per effective epoch of `⌈n/b⌉` steps.
pub fn sgd_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &SgdConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<SolveOutcome> {
    let b = config.minibatch;
    if b == 0 {
        return Err(Error::InvalidArgument("minibatch must be at least 1".into()));
    }
    let n = problem.n();
    let mu = problem.mu();
    let step_at: Box<dyn Fn(u64) -> f64> = match config.step {
        StepSize::Constant(eta) if eta > 0.0 => Box::new(move |_| eta),
        StepSize::InvT(eta0) => {
            let eta0 = eta0.unwrap_or(1.0 / problem.smoothness_bound());
            if !(eta0 > 0.0) {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {eta0}")));
            }
            Box::new(move |j| eta0 / (1.0 + eta0 * mu * j as f64))
        }
        StepSize::Constant(eta) => {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")))
        }
    };
    let steps_per_epoch = n.div_ceil(b);
    let mut meta = TraceMeta::new("sgd", config.seed);
    meta.set("step", format!("{:?}", config.step));
    meta.set("minibatch", b);
    let mut recorder = Recorder::new(meta, reference, config.clock);
    let mut rng = rng_stream(config.seed, 2);
    let mut theta = vec![0.0; problem.dim()];
    let mut dir = vec![0.0; problem.dim()];
    let mut rec = recorder.record(0, problem, &theta, counter).clone();
    let mut j = 0u64;
    let mut epoch = 0;
    let kind = problem.oracle_kind();
    while !stop.should_stop(&rec) && epoch < config.max_epochs {
        for _ in 0..steps_per_epoch {
            for (d, t) in dir.iter_mut().zip(&theta) {
                *d = mu * t;
            }
            for _ in 0..b {
                let i = rng.random_range(0..n);
                problem.add_sample_gradient(i, &theta, 1.0 / b as f64, &mut dir);
            }
            let eta = step_at(j);
            for (t, d) in theta.iter_mut().zip(&dir) {
                *t -= eta * d;
            }
            j += 1;
        }
        counter.add(kind, (steps_per_epoch * b) as u64);
        epoch += 1;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { steps: j });
        }
        rec = recorder.record(epoch, problem, &theta, counter).clone();
    }
    Ok(SolveOutcome {
        theta,
        converged: stop.accuracy_met(&rec),
        trace: recorder.finish(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrgFullConfig {
    /// Step size, epoch length and snapshot rule. Stopping is driven by the
    /// stop rule instead; `max_epochs` caps the run.
    pub svrg: SvrgConfig,
    pub clock: Clock,
}

impl Default for SvrgFullConfig {
    fn default() -> Self {
        Self {
            svrg: SvrgConfig {
                max_epochs: 10_000,
                ..SvrgConfig::default()
            },
            clock: Clock::Wall,
        }
    }
}

/// SVRG on `F` from `θ = 0`, one trace row per epoch.
pub fn svrg_full_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &SvrgFullConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<SolveOutcome> {
    let obj = ErmSum::new(problem);
    let inner = SvrgConfig {
        stopping: SvrgStopping::FixedEpochs(config.svrg.max_epochs),
        ..config.svrg.clone()
    };
    let mut meta = TraceMeta::new("svrg", config.svrg.seed);
    meta.set("step", inner.resolved_step(&obj));
    meta.set("epoch_length", inner.resolved_epoch_length(&obj));
    meta.set("snapshot", format!("{:?}", inner.snapshot));
    let mut recorder = Recorder::new(meta, reference, config.clock);
    let init = vec![0.0; problem.dim()];
    let first = recorder.record(0, problem, &init, counter).clone();
    let mut converged = stop.accuracy_met(&first);
    if stop.should_stop(&first) {
        return Ok(SolveOutcome {
            theta: init,
            converged,
            trace: recorder.finish(),
        });
    }
    let mut rng = rng_stream(config.svrg.seed, 2);
    let out = svrg_run(&obj, &init, &inner, counter, &mut rng, |epoch, snapshot| {
        let rec = recorder.record(epoch, problem, snapshot, counter);
        converged = stop.accuracy_met(rec);
        if stop.should_stop(rec) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(SolveOutcome {
        theta: out.theta,
        converged,
        trace: recorder.finish(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScsgConfig {
    /// Snapshot batch size `B` (clamped to `n`).
    pub batch: usize,
    /// Inner minibatch size `b`.
    pub minibatch: usize,
    /// Inner steps per outer iteration; defaults to `2B/b`.
    pub epoch_length: Option<usize>,
    /// Defaults to `1/(10 L_F)`.
    pub step_size: Option<f64>,
    pub max_outer: usize,
    pub seed: u64,
    pub clock: Clock,
}

impl Default for ScsgConfig {
    fn default() -> Self {
        Self {
            batch: 1000,
            minibatch: 1,
            epoch_length: None,
            step_size: None,
            max_outer: 10_000,
            seed: 0,
            clock: Clock::Wall,
        }
    }
}

/// SCSG from `θ = 0`: each outer iteration replaces SVRG's full snapshot
/// gradient by an average over `B` samples drawn without replacement.
/// With `B = n` and `b = 1` the iterates coincide with [`svrg_full_solve`]
/// for the same seed, step and epoch length.
pub fn scsg_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &ScsgConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<SolveOutcome> {
    let n = problem.n();
    let big_b = config.batch.min(n);
    let b = config.minibatch;
    if big_b == 0 || b == 0 {
        return Err(Error::InvalidArgument("batch sizes must be at least 1".into()));
    }
    let obj = ErmSum::new(problem);
    let step = match config.step_size {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::InvalidArgument(format!("step size must be positive, got {s}"))),
        None => 1.0 / (10.0 * obj.smoothness()),
    };
    let epoch_length = config.epoch_length.unwrap_or((2 * big_b).div_ceil(b)).max(1);
    let mut meta = TraceMeta::new("scsg", config.seed);
    meta.set("batch", big_b);
    meta.set("minibatch", b);
    meta.set("epoch_length", epoch_length);
    meta.set("step", step);
    let mut recorder = Recorder::new(meta, reference, config.clock);
    let mut batch_rng = rng_stream(config.seed, 1);
    let mut rng = rng_stream(config.seed, 2);
    let kind = problem.oracle_kind();

    let mut snapshot = vec![0.0; problem.dim()];
    let mut theta = snapshot.clone();
    let mut dir = snapshot.clone();
    let mut rec = recorder.record(0, problem, &snapshot, counter).clone();
    let mut outer = 0;
    let mut steps = 0u64;
    while !stop.should_stop(&rec) && outer < config.max_outer {
        let estimate = if big_b == n {
            obj.gradient(&snapshot)
        } else {
            let idx = sample_subset(&mut batch_rng, n, big_b);
            problem.subset_gradient(&idx, &snapshot)
        };
        counter.add(kind, big_b as u64);
        theta.copy_from_slice(&snapshot);
        let scale = 1.0 / b as f64;
        for _ in 0..epoch_length {
            dir.copy_from_slice(&estimate);
            for _ in 0..b {
                let i = rng.random_range(0..n);
                obj.add_component_difference(i, &theta, &snapshot, scale, &mut dir);
            }
            for (t, g) in theta.iter_mut().zip(&dir) {
                *t -= step * g;
            }
        }
        counter.add(kind, (2 * b * epoch_length) as u64);
        steps += epoch_length as u64;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { steps });
        }
        snapshot.copy_from_slice(&theta);
        outer += 1;
        rec = recorder.record(outer, problem, &snapshot, counter).clone();
    }
    Ok(SolveOutcome {
        theta: snapshot,
        converged: stop.accuracy_met(&rec),
        trace: recorder.finish(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_redundant;
    use crate::loss::{ErmProblem, LossModel};

    fn ridge(n: usize, d: usize, mu: f64, seed: u64) -> ErmProblem {
        let data = synthesize_redundant(n, d, 1, 0.1, seed).unwrap();
        ErmProblem::new(data, LossModel::quadratic(), mu).unwrap()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    /// Normal equations assembled densely and solved by Gaussian elimination.
    fn dense_ridge(p: &ErmProblem) -> Vec<f64> {
        let n = p.n() as f64;
        let d = p.data().d();
        let x: Vec<Vec<f64>> = p.data().rows().iter().map(|r| r.to_dense()).collect();
        let mut a = vec![vec![0.0; d + 1]; d];
        for (xi, &yi) in x.iter().zip(p.data().labels()) {
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += xi[r] * xi[c] / n;
                }
                a[r][d] += xi[r] * yi / n;
            }
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[r] += p.mu();
        }
        for col in 0..d {
            let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..d {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=d {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..d).map(|r| a[r][d] / a[r][r]).collect()
    }

    #[test]
    fn closed_form_matches_dense_elimination() {
        let p = ridge(200, 6, 0.01, 1);
        let a = ridge_closed_form(&p).unwrap();
        let b = dense_ridge(&p);
        assert!(dist(&a, &b) <= 1e-10);
        assert!(norm(&p.gradient(&a)) <= 1e-12);
    }

    #[test]
    fn fgd_reference_matches_closed_form() {
        let p = ridge(100, 3, 0.01, 2);
        let r = fgd_reference(&p, 1e-10, 1_000_000, &IfoCounter::new()).unwrap();
        assert!(r.converged);
        assert!(dist(&r.theta, &ridge_closed_form(&p).unwrap()) <= 1e-7);
    }

    #[test]
    fn fgd_reference_at_zero_optimum() {
        let p = ridge(50, 3, 0.1, 3);
        let p = ErmProblem::new(p.data().with_labels(vec![0.0; 50]).unwrap(), LossModel::quadratic(), 0.1)
            .unwrap();
        let c = IfoCounter::new();
        let r = fgd_reference(&p, 1e-10, 100, &c).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(norm(&r.theta) == 0.0);
    }

    #[test]
    fn fgd_reference_flags_cap() {
        let p = ridge(100, 5, 0.001, 4);
        let r = fgd_reference(&p, 1e-12, 3, &IfoCounter::new()).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn fgd_is_monotone_and_counts_n_per_step() {
        let data = synthesize_redundant(120, 5, 1, 0.5, 5).unwrap().binarized();
        let p = ErmProblem::new(data, LossModel::logistic(), 0.01).unwrap();
        let c = IfoCounter::new();
        let cfg = FgdConfig {
            step_size: Some(1.0),
            ..FgdConfig::default()
        };
        let out = fgd_solve(&p, &cfg, &StopRule::outer_iters(40), None, &c).unwrap();
        let recs = &out.trace.records;
        assert_eq!(recs.len(), 41);
        for (j, w) in recs.windows(2).enumerate() {
            assert!(w[1].objective <= w[0].objective);
            assert_eq!(w[1].ifo_total - w[0].ifo_total, 120, "step {j}");
        }
        assert_eq!(c.snapshot().hvp_touches, 0);
    }

    #[test]
    fn svrg_accounting_and_accuracy() {
        let p = ridge(300, 5, 0.05, 6);
        let c = IfoCounter::new();
        let out = svrg_full_solve(&p, &SvrgFullConfig::default(), &StopRule::grad_norm(1e-8), None, &c)
            .unwrap();
        assert!(out.converged);
        assert!(dist(&out.theta, &ridge_closed_form(&p).unwrap()) <= 1e-5);
        for w in out.trace.records.windows(2) {
            assert_eq!(w[1].ifo_total - w[0].ifo_total, 300 + 2 * 600);
        }
    }

    #[test]
    fn sgd_accounting_and_progress() {
        let p = ridge(200, 4, 0.1, 7);
        let f_star = p.objective(&ridge_closed_form(&p).unwrap());
        let (mut at_one, mut at_ten) = (0.0, 0.0);
        for seed in 0..20 {
            let cfg = SgdConfig {
                minibatch: 3,
                seed,
                ..SgdConfig::default()
            };
            let out = sgd_solve(&p, &cfg, &StopRule::outer_iters(10), None, &IfoCounter::new()).unwrap();
            let recs = &out.trace.records;
            for w in recs.windows(2) {
                assert_eq!(w[1].ifo_total - w[0].ifo_total, 67 * 3);
            }
            at_one += recs[1].objective - f_star;
            at_ten += recs[10].objective - f_star;
        }
        assert!(at_ten < at_one);
    }

    #[test]
    fn sgd_rejects_bad_steps() {
        let p = ridge(20, 2, 0.1, 8);
        let cfg = SgdConfig {
            step: StepSize::Constant(0.0),
            ..SgdConfig::default()
        };
        assert!(sgd_solve(&p, &cfg, &StopRule::outer_iters(1), None, &IfoCounter::new()).is_err());
    }

    #[test]
    fn scsg_accounting() {
        let p = ridge(500, 4, 0.05, 9);
        let cfg = ScsgConfig {
            batch: 100,
            minibatch: 4,
            ..ScsgConfig::default()
        };
        let out = scsg_solve(&p, &cfg, &StopRule::outer_iters(5), None, &IfoCounter::new()).unwrap();
        for w in out.trace.records.windows(2) {
            assert_eq!(w[1].ifo_total - w[0].ifo_total, 100 + 2 * 4 * 50);
        }
    }

    #[test]
    fn scsg_with_full_batch_is_svrg() {
        let p = ridge(150, 4, 0.05, 10);
        let svrg = svrg_full_solve(
            &p,
            &SvrgFullConfig {
                svrg: SvrgConfig {
                    seed: 3,
                    ..SvrgFullConfig::default().svrg
                },
                clock: Clock::Frozen,
            },
            &StopRule::outer_iters(6),
            None,
            &IfoCounter::new(),
        )
        .unwrap();
        let scsg = scsg_solve(
            &p,
            &ScsgConfig {
                batch: 150,
                seed: 3,
                clock: Clock::Frozen,
                ..ScsgConfig::default()
            },
            &StopRule::outer_iters(6),
            None,
            &IfoCounter::new(),
        )
        .unwrap();
        assert_eq!(svrg.theta, scsg.theta);
        let a: Vec<_> = svrg.trace.records.iter().map(|r| (r.ifo_total, r.objective)).collect();
        let b: Vec<_> = scsg.trace.records.iter().map(|r| (r.ifo_total, r.objective)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_rejects_other_losses() {
        let data = synthesize_redundant(20, 3, 1, 0.5, 11).unwrap().binarized();
        let p = ErmProblem::new(data, LossModel::logistic(), 0.1).unwrap();
        assert!(ridge_closed_form(&p).is_err());
    }
}
