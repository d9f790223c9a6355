//! Hybrid stochastic-deterministic minibatch proximal gradient for quadratic
//! losses.
//!
//! A fixed anchor subset `S` of size `s` supplies the curvature of every
//! subproblem. At outer iteration `t` a fresh minibatch `S_t` (growing in `t`)
//! supplies a gradient estimate, and the next iterate approximately minimizes
//!
//! ```text
//! P(θ) = F_S(θ) + ⟨∇F_{S_t}(w) − ∇F_S(w), θ⟩ + (γ/2)‖θ − w‖²
//! ```
//!
//! around the previous iterate `w`, using SVRG warm-started at `w`. Since
//! `∇P(w) = ∇F_{S_t}(w)`, the step is a preconditioned minibatch gradient
//! step whose variance shrinks as `|S_t|` grows.

use std::ops::ControlFlow;

use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::loss::{check_index_set, dot, ErmObjective};
use crate::oracle::{
    norm, Clock, IfoCounter, OracleKind, Recorder, SolveOutcome, StopRule, TraceMeta,
};
use crate::stats::{rng_stream, sample_subset};
use crate::svrg::{svrg_run, FiniteSum, SvrgConfig, SvrgStopping};

/// How the anchor size `s` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorSize {
    Fixed(usize),
    /// `round(n^p)`; the default exponent is 0.75.
    Power(f64),
    /// `ν n^0.75 √log d / log n`.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// `(√log d + √2) L r² / √s`
    Theory,
    /// `√(log d / s)`
    Experimental,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Batch sizes and inner tolerances from the convergence theory.
    Theory,
    /// `|S_t| = initial_batch · exp(growth_rate (t − 1))`.
    Practical,
}

/// Exponent of the theory batch schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleExponent {
    /// `exp(μt / (μ + 2γ))`, large enough for the minibatch variance bound.
    #[default]
    Single,
    /// `exp(μt / (2(μ + 2γ)))`, half the growth of `Single`.
    Doubled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuMode {
    Fixed(f64),
    /// Per-sample gradient variance at `θ = 0` over up to 1000 samples,
    /// divided by `μ`.
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerStopping {
    /// `‖∇P(w_t)‖ ≤ ε_t` with the theory tolerance schedule.
    TheoryEps,
    FixedEpochs(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsdmpgConfig {
    pub anchor: AnchorSize,
    pub gamma: GammaMode,
    pub nu: NuMode,
    pub schedule: ScheduleMode,
    pub exponent: ScheduleExponent,
    /// `|S_1|` in practical mode.
    pub initial_batch: usize,
    /// Per-iteration log growth of `|S_t|` in practical mode.
    pub growth_rate: f64,
    pub inner_stopping: InnerStopping,
    /// Step size, epoch length and epoch cap of the inner SVRG. Its stopping
    /// rule and seed are ignored.
    pub inner: SvrgConfig,
    pub max_outer: usize,
    pub seed: u64,
    /// Evaluate the telescoping identity `∇P(w) = ∇F_{S_t}(w)` every
    /// iteration (uncounted).
    pub check_identities: bool,
    pub clock: Clock,
}

impl Default for HsdmpgConfig {
    fn default() -> Self {
        Self {
            anchor: AnchorSize::Power(0.75),
            gamma: GammaMode::Experimental,
            nu: NuMode::Fixed(1.0),
            schedule: ScheduleMode::Practical,
            exponent: ScheduleExponent::Single,
            initial_batch: 50,
            growth_rate: 0.2,
            inner_stopping: InnerStopping::FixedEpochs(3),
            inner: SvrgConfig::default(),
            max_outer: 500,
            seed: 0,
            check_identities: false,
            clock: Clock::Wall,
        }
    }
}

impl HsdmpgConfig {
    /// All-theory configuration: theory `γ`, batch schedule and inner tolerances.
    pub fn theory() -> Self {
        Self {
            gamma: GammaMode::Theory,
            schedule: ScheduleMode::Theory,
            inner_stopping: InnerStopping::TheoryEps,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.initial_batch == 0 {
            return Err(Error::InvalidArgument("initial batch must be at least 1".into()));
        }
        if !(self.growth_rate > 0.0 && self.growth_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "growth rate must be positive, got {}",
                self.growth_rate
            )));
        }
        match self.anchor {
            AnchorSize::Fixed(0) => {
                return Err(Error::InvalidArgument("anchor size must be at least 1".into()))
            }
            AnchorSize::Power(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidArgument(format!("anchor exponent {p} not in (0, 1]")))
            }
            _ => {}
        }
        if let NuMode::Fixed(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    /// Anchor size for `n` samples in dimension `d`, clamped to `[1, n]`.
    pub fn anchor_size(&self, n: usize, d: usize, nu: f64) -> usize {
        let raw = match self.anchor {
            AnchorSize::Fixed(s) => s as f64,
            AnchorSize::Power(p) => (n as f64).powf(p).round(),
            AnchorSize::Theory => {
                let n = n as f64;
                let log_n = n.ln().max(1.0);
                (nu * n.powf(0.75) * (d as f64).ln().max(0.0).sqrt() / log_n).round()
            }
        };
        (raw.max(1.0) as usize).min(n)
    }
}

/// Proximal weight `γ` for dimension `d` (real-valued so that `log d` can be
/// any nonnegative number), loss smoothness `L`, radius `r` and anchor size `s`.
pub fn gamma_value(mode: GammaMode, d: f64, smoothness: f64, radius: f64, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidArgument("anchor size must be at least 1".into()));
    }
    let log_d = d.ln().max(0.0);
    let gamma = match mode {
        GammaMode::Theory => {
            (log_d.sqrt() + 2f64.sqrt()) * smoothness * radius * radius / (s as f64).sqrt()
        }
        GammaMode::Experimental => (log_d / s as f64).sqrt(),
        GammaMode::Explicit(g) => g,
    };
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "proximal weight must be positive, got {gamma} from {mode:?} (d = {d})"
        )));
    }
    Ok(gamma)
}

/// Inputs of the minibatch schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub mode: ScheduleMode,
    pub exponent: ScheduleExponent,
    pub nu: f64,
    pub mu: f64,
    pub gamma: f64,
    pub initial_batch: usize,
    pub growth_rate: f64,
}

/// `|S_t|` for `t ≥ 1`, rounded up and clamped to `[1, n]`. Computed in log
/// space so large exponents saturate at `n` instead of overflowing.
pub fn batch_schedule(t: usize, params: &ScheduleParams, n: usize) -> usize {
    let t = t.max(1) as f64;
    let log_size = match params.mode {
        ScheduleMode::Theory => {
            let ratio = (params.mu + 2.0 * params.gamma) / params.mu;
            let denom = match params.exponent {
                ScheduleExponent::Single => params.mu + 2.0 * params.gamma,
                ScheduleExponent::Doubled => 2.0 * (params.mu + 2.0 * params.gamma),
            };
            (16.0 * params.nu * params.nu).ln() + 2.0 * ratio.ln() + params.mu * t / denom
        }
        ScheduleMode::Practical => {
            (params.initial_batch as f64).ln() + params.growth_rate * (t - 1.0)
        }
    };
    if !(log_size < (n as f64).ln()) {
        return n;
    }
    // Guard against exp(ln x) landing a hair above an integer.
    let size = log_size.exp();
    let rounded = size.round();
    let size = if (size - rounded).abs() <= 1e-9 * rounded {
        rounded
    } else {
        size.ceil()
    };
    (size as usize).clamp(1, n)
}

/// Inner tolerance `ε_t = μ^1.5 / (4(μ+2γ)) · exp(−μ(t−1) / (2(μ+2γ)))`.
pub fn inner_tolerance(t: usize, mu: f64, gamma: f64) -> f64 {
    let t = t.max(1) as f64;
    let c = mu + 2.0 * gamma;
    mu.powf(1.5) / (4.0 * c) * (-mu * (t - 1.0) / (2.0 * c)).exp()
}

/// Plug-in estimate of `ν`: empirical per-sample gradient variance at
/// `θ = 0` over up to `samples` indices, divided by `μ`, square-rooted.
/// Charges one touch per sampled index.
pub fn estimate_nu<P: ErmObjective + ?Sized>(
    problem: &P,
    samples: usize,
    rng: &mut ChaCha8Rng,
    counter: &IfoCounter,
) -> f64 {
    let idx = sample_subset(rng, problem.n(), samples.max(1));
    counter.add(problem.oracle_kind(), idx.len() as u64);
    let zero = vec![0.0; problem.dim()];
    let grads: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let mut g = vec![0.0; problem.dim()];
            problem.add_sample_gradient(i, &zero, 1.0, &mut g);
            g
        })
        .collect();
    let m = grads.len() as f64;
    let mut mean = vec![0.0; problem.dim()];
    for g in &grads {
        for (a, b) in mean.iter_mut().zip(g) {
            *a += b / m;
        }
    }
    let var = grads
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum::<f64>()
        / m;
    (var / problem.mu()).sqrt().max(f64::MIN_POSITIVE)
}

/// The surrogate `P(θ) = F_S(θ) + ⟨shift, θ⟩ + (γ/2)‖θ − center‖²` as a
/// finite sum over the anchor samples.
#[derive(Debug, Clone)]
pub struct ProximalSubproblem<'a, P: ?Sized> {
    problem: &'a P,
    anchor: &'a [usize],
    center: Vec<f64>,
    shift: Vec<f64>,
    gamma: f64,
    batch_gradient: Vec<f64>,
}

impl<'a, P: ErmObjective + ?Sized> ProximalSubproblem<'a, P> {
    pub fn anchor(&self) -> &[usize] {
        self.anchor
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `∇F_{S_t}(w) − ∇F_S(w)`
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `∇F_{S_t}(w)` as computed while building the subproblem.
    pub fn batch_gradient(&self) -> &[f64] {
        &self.batch_gradient
    }

    /// `‖∇P(w) − ∇F_{S_t}(w)‖ / (1 + ‖∇F_{S_t}(w)‖)`, which is zero up to
    /// rounding (uncounted).
    pub fn telescoping_residual(&self) -> f64 {
        let grad = FiniteSum::gradient(self, &self.center);
        let diff: Vec<f64> = grad
            .iter()
            .zip(&self.batch_gradient)
            .map(|(a, b)| a - b)
            .collect();
        norm(&diff) / (1.0 + norm(&self.batch_gradient))
    }

    fn shared_terms(&self, theta: &[f64]) -> f64 {
        let dist: f64 = theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| (t - c) * (t - c))
            .sum();
        dot(&self.shift, theta) + 0.5 * self.gamma * dist
    }
}

/// Builds `P` around `center` from the anchor `S` and minibatch `S_t`,
/// charging `|S_t| + |S|` touches.
pub fn build_subproblem<'a, P: ErmObjective + ?Sized>(
    problem: &'a P,
    anchor: &'a [usize],
    center: &[f64],
    batch: &[usize],
    gamma: f64,
    counter: &IfoCounter,
) -> Result<ProximalSubproblem<'a, P>> {
    check_index_set(anchor, problem.n())?;
    check_index_set(batch, problem.n())?;
    if center.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: center.len(),
        });
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")));
    }
    let batch_gradient = problem.minibatch_gradient(center, batch, counter)?;
    let anchor_gradient = problem.minibatch_gradient(center, anchor, counter)?;
    let shift = batch_gradient
        .iter()
        .zip(&anchor_gradient)
        .map(|(b, a)| b - a)
        .collect();
    Ok(ProximalSubproblem {
        problem,
        anchor,
        center: center.to_vec(),
        shift,
        gamma,
        batch_gradient,
    })
}

impl<P: ErmObjective + ?Sized> FiniteSum for ProximalSubproblem<'_, P> {
    fn len(&self) -> usize {
        self.anchor.len()
    }

    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn strong_convexity(&self) -> f64 {
        self.problem.mu() + self.gamma
    }

    fn smoothness(&self) -> f64 {
        self.problem.smoothness_bound() + self.gamma
    }

    fn oracle_kind(&self) -> OracleKind {
        self.problem.oracle_kind()
    }

    fn component_value(&self, j: usize, theta: &[f64]) -> f64 {
        self.problem.sample_loss(self.anchor[j], theta)
            + 0.5 * self.problem.mu() * dot(theta, theta)
            + self.shared_terms(theta)
    }

    fn add_component_gradient(&self, j: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        self.problem.add_sample_gradient(self.anchor[j], theta, scale, out);
        let mu = self.problem.mu();
        for (((o, t), g), c) in out.iter_mut().zip(theta).zip(&self.shift).zip(&self.center) {
            *o += scale * (mu * t + g + self.gamma * (t - c));
        }
    }

    fn add_component_difference(
        &self,
        j: usize,
        theta: &[f64],
        anchor: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        let i = self.anchor[j];
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
        let curvature = scale * (self.problem.mu() + self.gamma);
        for ((o, t), a) in out.iter_mut().zip(theta).zip(anchor) {
            *o += curvature * (t - a);
        }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.problem.subset_objective(self.anchor, theta) + self.shared_terms(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = self.problem.subset_gradient(self.anchor, theta);
        for (((o, t), g), c) in out.iter_mut().zip(theta).zip(&self.shift).zip(&self.center) {
            *o += g + self.gamma * (t - c);
        }
        out
    }
}

/// Per-iteration bookkeeping of an HSDMPG run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HsdmpgDiagnostics {
    pub anchor_size: usize,
    pub gamma: f64,
    pub nu: f64,
    pub batch_sizes: Vec<usize>,
    /// Inner tolerance used at each iteration (`None` for fixed epochs).
    pub inner_tolerances: Vec<Option<f64>>,
    pub inner_epochs: Vec<usize>,
    /// Telescoping residuals, when identity checks are enabled.
    pub telescoping_residuals: Vec<f64>,
}

impl HsdmpgDiagnostics {
    pub fn max_telescoping_residual(&self) -> Option<f64> {
        self.telescoping_residuals.iter().copied().reduce(f64::max)
    }
}

/// Anchor subset, schedule position and random streams of an HSDMPG run.
///
/// Three independent streams derived from the seed drive the anchor draw,
/// the minibatch draws and the inner SVRG sampler.
#[derive(Debug, Clone)]
pub struct HsdmpgState {
    config: HsdmpgConfig,
    anchor: Vec<usize>,
    schedule: ScheduleParams,
    t: usize,
    batch_rng: ChaCha8Rng,
    inner_rng: ChaCha8Rng,
    diagnostics: HsdmpgDiagnostics,
}

impl HsdmpgState {
    /// Resolves `ν`, `s` and `γ` for `problem` and draws the anchor subset.
    pub fn new<P: ErmObjective + ?Sized>(
        problem: &P,
        config: &HsdmpgConfig,
        counter: &IfoCounter,
    ) -> Result<Self> {
        config.validate()?;
        let n = problem.n();
        let d = problem.data().d();
        let nu = match config.nu {
            NuMode::Fixed(nu) => nu,
            NuMode::PlugIn => {
                let mut rng = rng_stream(config.seed, 3);
                estimate_nu(problem, 1000, &mut rng, counter)
            }
        };
        let s = config.anchor_size(n, d, nu);
        let gamma = gamma_value(
            config.gamma,
            d as f64,
            problem.link_smoothness(),
            problem.data().r(),
            s,
        )?;
        let mut anchor_rng = rng_stream(config.seed, 0);
        let anchor = sample_subset(&mut anchor_rng, n, s);
        let schedule = ScheduleParams {
            mode: config.schedule,
            exponent: config.exponent,
            nu,
            mu: problem.mu(),
            gamma,
            initial_batch: config.initial_batch,
            growth_rate: config.growth_rate,
        };
        Ok(Self {
            config: config.clone(),
            anchor,
            schedule,
            t: 0,
            batch_rng: rng_stream(config.seed, 1),
            inner_rng: rng_stream(config.seed, 2),
            diagnostics: HsdmpgDiagnostics {
                anchor_size: s,
                gamma,
                nu,
                ..HsdmpgDiagnostics::default()
            },
        })
    }

    pub fn anchor(&self) -> &[usize] {
        &self.anchor
    }

    pub fn gamma(&self) -> f64 {
        self.schedule.gamma
    }

    pub fn nu(&self) -> f64 {
        self.schedule.nu
    }

    /// Outer iterations taken so far.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn diagnostics(&self) -> &HsdmpgDiagnostics {
        &self.diagnostics
    }

    pub fn into_diagnostics(self) -> HsdmpgDiagnostics {
        self.diagnostics
    }

    /// Batch size the next step will use.
    pub fn next_batch_size(&self, n: usize) -> usize {
        batch_schedule(self.t + 1, &self.schedule, n)
    }

    /// One outer iteration from `w`: draw `S_t`, build `P`, solve it with
    /// SVRG warm-started at `w`.
    pub fn step<P: ErmObjective + ?Sized>(
        &mut self,
        problem: &P,
        w: &[f64],
        counter: &IfoCounter,
    ) -> Result<Vec<f64>> {
        self.t += 1;
        let t = self.t;
        let n = problem.n();
        let batch_size = batch_schedule(t, &self.schedule, n);
        let batch = sample_subset(&mut self.batch_rng, n, batch_size);
        let sub = build_subproblem(problem, &self.anchor, w, &batch, self.schedule.gamma, counter)?;
        if self.config.check_identities {
            self.diagnostics
                .telescoping_residuals
                .push(sub.telescoping_residual());
        }
        let (stopping, tolerance) = match self.config.inner_stopping {
            InnerStopping::TheoryEps => {
                let eps = inner_tolerance(t, problem.mu(), self.schedule.gamma);
                (SvrgStopping::GradNormLeq(eps), Some(eps))
            }
            InnerStopping::FixedEpochs(e) => (SvrgStopping::FixedEpochs(e), None),
        };
        let inner_cfg = SvrgConfig {
            stopping,
            ..self.config.inner.clone()
        };
        let out = svrg_run(&sub, w, &inner_cfg, counter, &mut self.inner_rng, |_, _| {
            ControlFlow::Continue(())
        })?;
        self.diagnostics.batch_sizes.push(batch_size);
        self.diagnostics.inner_tolerances.push(tolerance);
        self.diagnostics.inner_epochs.push(out.epochs);
        Ok(out.theta)
    }
}

/// Result of [`hsdmpg_quadratic_solve`].
#[derive(Debug, Clone)]
pub struct HsdmpgOutcome {
    pub outcome: SolveOutcome,
    pub diagnostics: HsdmpgDiagnostics,
}

/// Runs HSDMPG on a quadratic-loss problem from `θ = 0` until `stop` holds
/// or `config.max_outer` iterations have run. Records one trace row per
/// outer iteration (plus the starting point). If the accuracy target is not
/// met, the iterate with the lowest objective is returned and `converged`
/// is false.
pub fn hsdmpg_quadratic_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &HsdmpgConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<HsdmpgOutcome> {
    let init = vec![0.0; problem.dim()];
    hsdmpg_quadratic_solve_from(problem, config, stop, reference, &init, counter)
}

/// [`hsdmpg_quadratic_solve`] from an explicit starting point.
pub fn hsdmpg_quadratic_solve_from<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &HsdmpgConfig,
    stop: &StopRule,
    reference: Option<f64>,
    init: &[f64],
    counter: &IfoCounter,
) -> Result<HsdmpgOutcome> {
    if !problem.is_quadratic() {
        return Err(Error::InvalidArgument(
            "the quadratic solver needs a quadratic loss; use the majorization solver".into(),
        ));
    }
    if init.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: init.len(),
        });
    }
    let mut state = HsdmpgState::new(problem, config, counter)?;
    let mut meta = TraceMeta::new("hsdmpg", config.seed);
    meta.set("s", state.diagnostics.anchor_size);
    meta.set("gamma", state.gamma());
    meta.set("gamma_mode", format!("{:?}", config.gamma));
    meta.set("nu", state.nu());
    meta.set("nu_mode", format!("{:?}", config.nu));
    meta.set("schedule", format!("{:?}", config.schedule));
    meta.set("exponent", format!("{:?}", config.exponent));
    meta.set("initial_batch", config.initial_batch);
    meta.set("growth_rate", config.growth_rate);
    meta.set("inner_stopping", format!("{:?}", config.inner_stopping));
    let mut recorder = Recorder::new(meta, reference, config.clock);

    let mut w = init.to_vec();
    let first = recorder.record(0, problem, &w, counter).clone();
    let mut best = (first.objective, w.clone());
    let mut converged = stop.accuracy_met(&first);
    let mut done = converged || stop.budget_exhausted(&first);

    while !done && state.iteration() < config.max_outer {
        w = state.step(problem, &w, counter)?;
        let rec = recorder.record(state.iteration(), problem, &w, counter).clone();
        if !rec.objective.is_finite() {
            return Err(Error::Diverged {
                steps: state.iteration() as u64,
            });
        }
        if rec.objective < best.0 {
            best = (rec.objective, w.clone());
        }
        converged = stop.accuracy_met(&rec);
        done = converged || stop.budget_exhausted(&rec);
    }

    let theta = if converged { w } else { best.1 };
    Ok(HsdmpgOutcome {
        outcome: SolveOutcome {
            theta,
            trace: recorder.finish(),
            converged,
        },
        diagnostics: state.into_diagnostics(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_redundant;
    use crate::loss::{ErmProblem, LossModel};
    use std::f64::consts::E;

    #[test]
    fn gamma_formulas() {
        let g = gamma_value(GammaMode::Theory, E, 1.0, 1.0, 4).unwrap();
        assert!((g - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((g - 1.20711).abs() < 1e-5);
        let g = gamma_value(GammaMode::Experimental, E, 1.0, 1.0, 4).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
        assert_eq!(gamma_value(GammaMode::Explicit(0.3), 5.0, 1.0, 1.0, 4).unwrap(), 0.3);
        // d = 1: theory stays positive, experimental collapses to zero.
        assert!(gamma_value(GammaMode::Theory, 1.0, 1.0, 1.0, 4).unwrap() > 0.0);
        assert!(gamma_value(GammaMode::Experimental, 1.0, 1.0, 1.0, 4).is_err());
        assert!(gamma_value(GammaMode::Explicit(0.0), 3.0, 1.0, 1.0, 4).is_err());
    }

    fn theory(nu: f64, mu: f64, gamma: f64, exponent: ScheduleExponent) -> ScheduleParams {
        ScheduleParams {
            mode: ScheduleMode::Theory,
            exponent,
            nu,
            mu,
            gamma,
            initial_batch: 50,
            growth_rate: 0.2,
        }
    }

    #[test]
    fn theory_batch_schedule() {
        // 16·ν²(μ+2γ)²/μ² · e¹ = 64e ≈ 173.97
        let p = theory(1.0, 1.0, 0.5, ScheduleExponent::Doubled);
        assert_eq!(batch_schedule(4, &p, 10_000), 174);
        assert_eq!(batch_schedule(4, &p, 100), 100);
        // `Single` doubles the exponent: 64e² ≈ 472.9.
        let p = theory(1.0, 1.0, 0.5, ScheduleExponent::Single);
        assert_eq!(batch_schedule(4, &p, 10_000), 473);
        // γ = 0 saturates at n for large t without overflow.
        let p = theory(1.0, 1.0, 0.0, ScheduleExponent::Single);
        assert_eq!(batch_schedule(1_000_000, &p, 100), 100);
        assert_eq!(batch_schedule(usize::MAX, &p, 100), 100);
    }

    #[test]
    fn practical_batch_schedule() {
        let p = ScheduleParams {
            mode: ScheduleMode::Practical,
            ..theory(1.0, 0.01, 0.1, ScheduleExponent::Single)
        };
        assert_eq!(batch_schedule(1, &p, 1000), 50);
        assert_eq!(batch_schedule(2, &p, 1000), (50.0 * 0.2f64.exp()).ceil() as usize);
        assert_eq!(batch_schedule(100, &p, 1000), 1000);
        assert_eq!(batch_schedule(1, &p, 10), 10);
    }

    #[test]
    fn schedule_is_nondecreasing_and_reaches_n() {
        for exponent in [ScheduleExponent::Single, ScheduleExponent::Doubled] {
            let p = theory(0.5, 0.1, 0.3, exponent);
            let sizes: Vec<usize> = (1..2000).map(|t| batch_schedule(t, &p, 5000)).collect();
            assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*sizes.last().unwrap(), 5000);
        }
    }

    #[test]
    fn inner_tolerance_values() {
        assert!((inner_tolerance(1, 1.0, 0.5) - 0.125).abs() < 1e-15);
        let t5 = inner_tolerance(5, 1.0, 0.5);
        assert!((t5 - 0.125 / E).abs() < 1e-15);
        assert!((t5 - 0.045985).abs() < 1e-6);
        for t in 1..50 {
            assert!(inner_tolerance(t + 1, 0.01, 0.2) < inner_tolerance(t, 0.01, 0.2));
        }
    }

    #[test]
    fn anchor_sizes() {
        let cfg = HsdmpgConfig::default();
        assert_eq!(cfg.anchor_size(10_000, 5, 1.0), 1000);
        let cfg = HsdmpgConfig {
            anchor: AnchorSize::Fixed(500),
            ..HsdmpgConfig::default()
        };
        assert_eq!(cfg.anchor_size(100, 5, 1.0), 100);
        let cfg = HsdmpgConfig {
            anchor: AnchorSize::Theory,
            ..HsdmpgConfig::default()
        };
        let n = 65536f64;
        let want = (n.powf(0.75) * 20f64.ln().sqrt() / n.ln()).round() as usize;
        assert_eq!(cfg.anchor_size(65536, 20, 1.0), want);
    }

    fn ridge(n: usize, d: usize, mu: f64, seed: u64) -> ErmProblem {
        let data = synthesize_redundant(n, d, 1, 0.1, seed).unwrap();
        ErmProblem::new(data, LossModel::quadratic(), mu).unwrap()
    }

    #[test]
    fn subproblem_with_batch_equal_anchor_has_no_shift() {
        let p = ridge(10, 3, 0.1, 1);
        let anchor = [0, 3, 5, 8];
        let center = [0.2, -0.4, 1.0];
        let c = IfoCounter::new();
        let sub = build_subproblem(&p, &anchor, &center, &anchor, 0.7, &c).unwrap();
        assert!(sub.shift().iter().all(|&g| g == 0.0));
        let want = p.subset_gradient(&anchor, &center);
        let got = FiniteSum::gradient(&sub, &center);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert_eq!(c.total(), 8);
    }

    #[test]
    fn subproblem_matches_dense_expansion() {
        let p = ridge(10, 3, 0.1, 2);
        let anchor = [1, 2, 6, 9];
        let batch = [0, 2, 3, 4, 7, 8];
        let center = [0.5, 0.1, -0.3];
        let gamma = 0.4;
        let c = IfoCounter::new();
        let sub = build_subproblem(&p, &anchor, &center, &batch, gamma, &c).unwrap();
        assert_eq!(c.total(), 10);
        assert!(sub.telescoping_residual() <= 1e-12);

        // Dense brute force of F_S(θ) + ⟨∇F_B(w) − ∇F_S(w), θ⟩ + (γ/2)‖θ − w‖².
        let x: Vec<Vec<f64>> = p.data().rows().iter().map(|r| r.to_dense()).collect();
        let y = p.data().labels();
        let f_sub = |idx: &[usize], th: &[f64]| -> f64 {
            idx.iter()
                .map(|&i| {
                    let z: f64 = x[i].iter().zip(th).map(|(a, b)| a * b).sum();
                    0.5 * (z - y[i]).powi(2)
                })
                .sum::<f64>()
                / idx.len() as f64
                + 0.05 * th.iter().map(|t| t * t).sum::<f64>()
        };
        let g_sub = |idx: &[usize], th: &[f64]| -> Vec<f64> {
            let mut g: Vec<f64> = th.iter().map(|t| 0.1 * t).collect();
            for &i in idx {
                let z: f64 = x[i].iter().zip(th).map(|(a, b)| a * b).sum();
                for j in 0..3 {
                    g[j] += (z - y[i]) * x[i][j] / idx.len() as f64;
                }
            }
            g
        };
        let gb = g_sub(&batch, &center);
        let ga = g_sub(&anchor, &center);
        let mut rng = rng_stream(5, 0);
        for _ in 0..5 {
            let th: Vec<f64> = (0..3)
                .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            let lin: f64 = (0..3).map(|j| (gb[j] - ga[j]) * th[j]).sum();
            let prox: f64 = (0..3).map(|j| (th[j] - center[j]).powi(2)).sum::<f64>();
            let want = f_sub(&anchor, &th) + lin + 0.5 * gamma * prox;
            let got = FiniteSum::value(&sub, &th);
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
            // The component average agrees with the closed form of P as well.
            let avg = (0..4).map(|j| sub.component_value(j, &th)).sum::<f64>() / 4.0;
            assert!((avg - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn empty_sets_rejected() {
        let p = ridge(10, 3, 0.1, 3);
        let c = IfoCounter::new();
        assert!(build_subproblem(&p, &[], &[0.0; 3], &[1], 0.1, &c).is_err());
        assert!(build_subproblem(&p, &[1], &[0.0; 3], &[], 0.1, &c).is_err());
    }

    #[test]
    fn rejects_non_quadratic_losses() {
        let data = synthesize_redundant(50, 3, 1, 0.1, 1).unwrap().binarized();
        let p = ErmProblem::new(data, LossModel::logistic(), 0.1).unwrap();
        let res = hsdmpg_quadratic_solve(
            &p,
            &HsdmpgConfig::default(),
            &StopRule::outer_iters(2),
            None,
            &IfoCounter::new(),
        );
        assert!(res.is_err());
    }

    #[test]
    fn outer_iteration_accounting() {
        let p = ridge(400, 4, 0.05, 4);
        let cfg = HsdmpgConfig {
            anchor: AnchorSize::Fixed(40),
            inner_stopping: InnerStopping::FixedEpochs(2),
            ..HsdmpgConfig::default()
        };
        let counter = IfoCounter::new();
        let mut state = HsdmpgState::new(&p, &cfg, &counter).unwrap();
        let mut w = vec![0.0; 4];
        for _ in 0..5 {
            let b = state.next_batch_size(400) as u64;
            let before = counter.total();
            w = state.step(&p, &w, &counter).unwrap();
            // |S_t| + s for the subproblem, then 2 epochs of (s + 2·2s).
            assert_eq!(counter.total() - before, b + 40 + 2 * (40 + 2 * 80));
        }
    }

    #[test]
    fn full_anchor_and_batch_is_a_proximal_point_step() {
        // s = n and S_t = [n]: each step solves min F(θ) + (γ/2)‖θ − w‖².
        let p = ridge(60, 5, 0.1, 6);
        let cfg = HsdmpgConfig {
            anchor: AnchorSize::Fixed(60),
            gamma: GammaMode::Explicit(0.5),
            schedule: ScheduleMode::Practical,
            initial_batch: 60,
            inner_stopping: InnerStopping::FixedEpochs(60),
            ..HsdmpgConfig::default()
        };
        let counter = IfoCounter::new();
        let mut state = HsdmpgState::new(&p, &cfg, &counter).unwrap();
        let w1 = state.step(&p, &[0.0; 5], &counter).unwrap();
        let w2 = state.step(&p, &w1, &counter).unwrap();

        // Dense proximal point: (H + γI) w⁺ = Xᵀy/n + γ w.
        use nalgebra::{DMatrix, DVector};
        let x = DMatrix::from_fn(60, 5, |i, j| p.data().row(i).to_dense()[j]);
        let y = DVector::from_column_slice(p.data().labels());
        let h = x.transpose() * &x / 60.0 + DMatrix::identity(5, 5) * 0.1;
        let lhs = &h + DMatrix::identity(5, 5) * 0.5;
        let b = x.transpose() * y / 60.0;
        let mut w = DVector::zeros(5);
        for got in [&w1, &w2] {
            w = lhs.clone().lu().solve(&(&b + &w * 0.5)).unwrap();
            for j in 0..5 {
                assert!((got[j] - w[j]).abs() <= 1e-8, "{} vs {}", got[j], w[j]);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = ridge(300, 4, 0.05, 7);
        let cfg = HsdmpgConfig {
            clock: Clock::Frozen,
            seed: 9,
            ..HsdmpgConfig::default()
        };
        let a = hsdmpg_quadratic_solve(&p, &cfg, &StopRule::outer_iters(6), None, &IfoCounter::new())
            .unwrap();
        let b = hsdmpg_quadratic_solve(&p, &cfg, &StopRule::outer_iters(6), None, &IfoCounter::new())
            .unwrap();
        assert_eq!(a.outcome.theta, b.outcome.theta);
        assert_eq!(a.outcome.trace, b.outcome.trace);
        assert_eq!(a.outcome.trace.records.len(), 7);
    }

    #[test]
    fn plug_in_nu_is_recorded() {
        let p = ridge(300, 4, 0.05, 8);
        let cfg = HsdmpgConfig {
            nu: NuMode::PlugIn,
            ..HsdmpgConfig::default()
        };
        let counter = IfoCounter::new();
        let out = hsdmpg_quadratic_solve(&p, &cfg, &StopRule::outer_iters(1), None, &counter).unwrap();
        assert!(out.diagnostics.nu > 0.0);
        assert_eq!(out.outcome.trace.meta.get("nu_mode"), Some("PlugIn"));
        assert_eq!(
            out.outcome.trace.meta.get("nu").unwrap().parse::<f64>().unwrap(),
            out.diagnostics.nu
        );
    }

    #[test]
    fn returns_best_iterate_when_budget_runs_out() {
        let p = ridge(300, 4, 0.05, 10);
        let cfg = HsdmpgConfig {
            max_outer: 3,
            ..HsdmpgConfig::default()
        };
        let out = hsdmpg_quadratic_solve(&p, &cfg, &StopRule::grad_norm(1e-14), None, &IfoCounter::new())
            .unwrap();
        assert!(!out.outcome.converged);
        let best = out
            .outcome
            .trace
            .records
            .iter()
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(p.objective(&out.outcome.theta), best);
    }
}
