//! Sequential quadratic majorization for generic smooth losses.
//!
//! Around a center `w` the objective is bounded above by
//!
//! ```text
//! Q(θ) = F(w) + ⟨∇F(w), θ − w⟩ + ½ (θ − w)ᵀ H̄ (θ − w),   H̄ = (L/n) Σ x_i x_iᵀ + μI
//! ```
//!
//! and `Q` is itself a ridge-type ERM: with `a_i = X_i w` and `g_i = ∇φ_i(a_i)`,
//! each sample contributes `φ_i(a_i) + ⟨g_i, z − a_i⟩ + (L/2)‖z − a_i‖²` and the
//! regularizer is unchanged. The quadratic solver therefore runs on `Q`
//! directly, and each touch of a `Q` component is one curvature-row product.

use crate::error::{Error, Result};
use crate::hsdmpg::{HsdmpgConfig, HsdmpgDiagnostics, HsdmpgState};
use crate::loss::{dot, ErmObjective};
use crate::oracle::{norm, IfoCounter, OracleKind, Recorder, SolveOutcome, StopRule, TraceMeta};
use crate::data::Dataset;

/// The majorant `Q` built at a center.
#[derive(Debug, Clone)]
pub struct QuadraticModel<'a, P: ?Sized> {
    problem: &'a P,
    center: Vec<f64>,
    grad_at_center: Vec<f64>,
    value_at_center: f64,
    /// `a_i`, sample-major blocks of length `k`.
    predictions: Vec<f64>,
    /// `g_i`, same layout.
    derivatives: Vec<f64>,
    /// `φ_i(a_i)`
    losses: Vec<f64>,
}

/// Builds `Q` at `center`, charging `n` loss touches for `∇F(center)`.
pub fn build_quadratic_model<'a, P: ErmObjective + ?Sized>(
    problem: &'a P,
    center: &[f64],
    counter: &IfoCounter,
) -> Result<QuadraticModel<'a, P>> {
    if center.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: center.len(),
        });
    }
    let n = problem.n();
    let k = problem.classes();
    counter.add_loss(n as u64);
    let mut predictions = vec![0.0; n * k];
    let mut derivatives = vec![0.0; n * k];
    let mut losses = vec![0.0; n];
    let mut grad: Vec<f64> = center.iter().map(|t| problem.mu() * t).collect();
    for i in 0..n {
        let a = &mut predictions[i * k..(i + 1) * k];
        problem.predict(i, center, a);
        losses[i] = problem.sample_value(i, a);
        let g = &mut derivatives[i * k..(i + 1) * k];
        problem.sample_derivative(i, a, g);
        problem.scatter(i, g, 1.0 / n as f64, &mut grad);
    }
    let value = losses.iter().sum::<f64>() / n as f64 + 0.5 * problem.mu() * dot(center, center);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged { steps: 0 });
    }
    Ok(QuadraticModel {
        problem,
        center: center.to_vec(),
        grad_at_center: grad,
        value_at_center: value,
        predictions,
        derivatives,
        losses,
    })
}

impl<P: ErmObjective + ?Sized> QuadraticModel<'_, P> {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `∇F(center)`
    pub fn grad_at_center(&self) -> &[f64] {
        &self.grad_at_center
    }

    /// `F(center)`
    pub fn value_at_center(&self) -> f64 {
        self.value_at_center
    }

    /// `Q(θ)` from the defining formula with one matrix-free `H̄` product
    /// (`n` curvature touches).
    pub fn matrix_free_value(&self, theta: &[f64], counter: &IfoCounter) -> f64 {
        let delta: Vec<f64> = theta.iter().zip(&self.center).map(|(t, c)| t - c).collect();
        let hd = self.problem.upper_hessian_vp(&delta, counter);
        self.value_at_center + dot(&self.grad_at_center, &delta) + 0.5 * dot(&delta, &hd)
    }

    /// `∇Q(θ) = ∇F(w) + H̄(θ − w)` with one matrix-free product.
    pub fn matrix_free_gradient(&self, theta: &[f64], counter: &IfoCounter) -> Vec<f64> {
        let delta: Vec<f64> = theta.iter().zip(&self.center).map(|(t, c)| t - c).collect();
        let mut out = self.problem.upper_hessian_vp(&delta, counter);
        for (o, g) in out.iter_mut().zip(&self.grad_at_center) {
            *o += g;
        }
        out
    }
}

impl<P: ErmObjective + ?Sized> ErmObjective for QuadraticModel<'_, P> {
    fn data(&self) -> &Dataset {
        self.problem.data()
    }

    fn classes(&self) -> usize {
        self.problem.classes()
    }

    fn mu(&self) -> f64 {
        self.problem.mu()
    }

    fn link_smoothness(&self) -> f64 {
        self.problem.link_smoothness()
    }

    fn link_strong_convexity(&self) -> f64 {
        self.problem.link_smoothness()
    }

    fn oracle_kind(&self) -> OracleKind {
        OracleKind::Hvp
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    fn sample_value(&self, i: usize, z: &[f64]) -> f64 {
        let k = z.len();
        let a = &self.predictions[i * k..(i + 1) * k];
        let g = &self.derivatives[i * k..(i + 1) * k];
        let half_l = 0.5 * self.problem.link_smoothness();
        let mut v = self.losses[i];
        for c in 0..k {
            let dz = z[c] - a[c];
            v += g[c] * dz + half_l * dz * dz;
        }
        v
    }

    fn sample_derivative(&self, i: usize, z: &[f64], out: &mut [f64]) {
        let k = z.len();
        let a = &self.predictions[i * k..(i + 1) * k];
        let g = &self.derivatives[i * k..(i + 1) * k];
        let l = self.problem.link_smoothness();
        for c in 0..k {
            out[c] = g[c] + l * (z[c] - a[c]);
        }
    }
}

/// Outer tolerance `ε'_t = (σ/2L) exp(−(σ/2L) t)` for `0 < σ ≤ L`.
pub fn outer_tolerance(t: usize, sigma: f64, smoothness: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "outer tolerance needs sigma > 0, got {sigma}; use a fixed inner budget"
        )));
    }
    if sigma > smoothness {
        return Err(Error::InvalidArgument(format!(
            "sigma {sigma} exceeds smoothness {smoothness}"
        )));
    }
    let rho = sigma / (2.0 * smoothness);
    Ok(rho * (-rho * t as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterStopping {
    /// Solve each model until `‖∇Q‖² ≤ 2μ ε'_t`, which certifies
    /// `Q(w_t) − min Q ≤ ε'_t`.
    TheoryEps,
    /// Run this many quadratic-solver outer iterations per model.
    FixedInnerBudget(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericConfig {
    /// Configuration of the quadratic subsolver. Its seed is replaced by `seed`.
    pub inner: HsdmpgConfig,
    pub outer_stopping: OuterStopping,
    /// `σ` used by the outer tolerance when the loss is not strongly convex
    /// in the prediction (logistic, softmax).
    pub sigma_eff: f64,
    pub max_outer: usize,
    /// Cap on subsolver iterations per model in theory mode.
    pub max_inner: usize,
    pub seed: u64,
}

impl Default for GenericConfig {
    fn default() -> Self {
        Self {
            inner: HsdmpgConfig::default(),
            outer_stopping: OuterStopping::FixedInnerBudget(5),
            sigma_eff: 0.01,
            max_outer: 200,
            max_inner: 500,
            seed: 0,
        }
    }
}

/// What happened at one outer step `w_{t−1} → w_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterStep {
    /// `F(w_{t−1}) = Q_{t−1}(w_{t−1})`
    pub f_prev: f64,
    /// `Q_{t−1}(w_t)`
    pub q_new: f64,
    /// `F(w_t)`
    pub f_new: f64,
    /// `ε'_t`, when `σ` is available.
    pub tolerance: Option<f64>,
    pub inner_iterations: usize,
    /// Whether the gradient certificate was reached (always true in
    /// fixed-budget mode).
    pub certified: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenericDiagnostics {
    /// `σ` used for `ε'_t`, and whether it is the configured effective value.
    pub sigma: Option<f64>,
    pub sigma_is_effective: bool,
    pub steps: Vec<OuterStep>,
    pub inner: HsdmpgDiagnostics,
}

#[derive(Debug, Clone)]
pub struct GenericOutcome {
    pub outcome: SolveOutcome,
    pub diagnostics: GenericDiagnostics,
}

/// Runs sequential majorization from `θ = 0`. The anchor subset and the
/// minibatch schedule persist across models, so the schedule index keeps
/// growing from one model to the next. The trace records `F`, not `Q`.
pub fn hsdmpg_generic_solve<P: ErmObjective + ?Sized>(
    problem: &P,
    config: &GenericConfig,
    stop: &StopRule,
    reference: Option<f64>,
    counter: &IfoCounter,
) -> Result<GenericOutcome> {
    let inner = HsdmpgConfig {
        seed: config.seed,
        ..config.inner.clone()
    };
    let smoothness = problem.link_smoothness();
    let (sigma, sigma_is_effective) = match problem.link_strong_convexity() {
        s if s > 0.0 => (s.min(smoothness), false),
        _ => (config.sigma_eff, true),
    };
    let tolerance_at = |t: usize| outer_tolerance(t, sigma, smoothness);
    if config.outer_stopping == OuterStopping::TheoryEps {
        tolerance_at(1)?;
    }
    let mut state = HsdmpgState::new(problem, &inner, counter)?;

    let mut meta = TraceMeta::new("hsdmpg-generic", config.seed);
    meta.set("s", state.diagnostics().anchor_size);
    meta.set("gamma", state.gamma());
    meta.set("nu", state.nu());
    meta.set("outer_stopping", format!("{:?}", config.outer_stopping));
    meta.set("sigma", sigma);
    meta.set("sigma_is_effective", sigma_is_effective);
    meta.set("schedule", format!("{:?}", inner.schedule));
    meta.set("inner_stopping", format!("{:?}", inner.inner_stopping));
    let mut recorder = Recorder::new(meta, reference, inner.clock);

    let mut w = vec![0.0; problem.dim()];
    let first = recorder.record(0, problem, &w, counter).clone();
    let mut best = (first.objective, w.clone());
    let mut converged = stop.accuracy_met(&first);
    let mut done = converged || stop.budget_exhausted(&first);
    let mut steps = Vec::new();
    let mut t = 0usize;

    while !done && t < config.max_outer {
        t += 1;
        let model = build_quadratic_model(problem, &w, counter)?;
        let tolerance = tolerance_at(t).ok();
        let mut theta = w.clone();
        let mut inner_iterations = 0usize;
        let certified = match config.outer_stopping {
            OuterStopping::FixedInnerBudget(e) => {
                for _ in 0..e {
                    theta = state.step(&model, &theta, counter)?;
                }
                inner_iterations = e;
                true
            }
            OuterStopping::TheoryEps => {
                let target = 2.0 * problem.mu() * tolerance.expect("checked above");
                // ∇Q(w) = ∇F(w) is already known.
                let mut gq = norm(model.grad_at_center());
                while gq * gq > target && inner_iterations < config.max_inner {
                    theta = state.step(&model, &theta, counter)?;
                    inner_iterations += 1;
                    gq = norm(&model.full_gradient(&theta, counter));
                }
                gq * gq <= target
            }
        };
        let q_new = model.objective(&theta);
        w = theta;
        let rec = recorder.record(t, problem, &w, counter).clone();
        if !rec.objective.is_finite() {
            return Err(Error::Diverged { steps: t as u64 });
        }
        steps.push(OuterStep {
            f_prev: model.value_at_center(),
            q_new,
            f_new: rec.objective,
            tolerance,
            inner_iterations,
            certified,
        });
        if rec.objective < best.0 {
            best = (rec.objective, w.clone());
        }
        converged = stop.accuracy_met(&rec);
        done = converged || stop.budget_exhausted(&rec);
    }

    let theta = if converged { w } else { best.1 };
    Ok(GenericOutcome {
        outcome: SolveOutcome {
            theta,
            trace: recorder.finish(),
            converged,
        },
        diagnostics: GenericDiagnostics {
            sigma: Some(sigma),
            sigma_is_effective,
            steps,
            inner: state.into_diagnostics(),
        },
    })
}
