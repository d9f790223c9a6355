//! SVRG for strongly convex finite sums.
//!
//! Each epoch takes a full-gradient snapshot (`m` touches) followed by
//! `epoch_length` variance-reduced steps, each touching one component at the
//! current iterate and at the snapshot (2 touches). Components are sampled
//! uniformly with replacement.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::{norm, IfoCounter, OracleKind};

/// `f(θ) = (1/m) Σ_i f_i(θ)` with `λ`-strongly convex, `Λ`-smooth average.
pub trait FiniteSum: Sync {
    /// Number of components `m`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    /// `λ > 0`
    fn strong_convexity(&self) -> f64;

    /// `Λ ≥ λ`, a bound valid for every component.
    fn smoothness(&self) -> f64;

    fn oracle_kind(&self) -> OracleKind {
        OracleKind::Loss
    }

    fn component_value(&self, i: usize, theta: &[f64]) -> f64;

    /// `out += scale · ∇f_i(θ)`
    fn add_component_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]);

    /// `out += scale · (∇f_i(θ) − ∇f_i(anchor))`
    fn add_component_difference(
        &self,
        i: usize,
        theta: &[f64],
        anchor: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        self.add_component_gradient(i, theta, scale, out);
        self.add_component_gradient(i, anchor, -scale, out);
    }

    /// Average value (uncounted).
    fn value(&self, theta: &[f64]) -> f64 {
        let m = self.len();
        (0..m).map(|i| self.component_value(i, theta)).sum::<f64>() / m as f64
    }

    /// Average gradient (uncounted).
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; self.dim()];
        for i in 0..m {
            self.add_component_gradient(i, theta, 1.0 / m as f64, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvrgStopping {
    /// Stop at the first snapshot whose full gradient norm is at most the bound.
    GradNormLeq(f64),
    /// Run exactly this many snapshot epochs.
    FixedEpochs(usize),
}

/// How the next snapshot is formed from an epoch's iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotRule {
    /// The last inner iterate ("option B").
    #[default]
    LastIterate,
    /// The average of the epoch's inner iterates.
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrgConfig {
    /// Inner steps per snapshot; `None` means `2m`.
    pub epoch_length: Option<usize>,
    /// `None` means `1/(10Λ)`.
    pub step_size: Option<f64>,
    pub stopping: SvrgStopping,
    pub snapshot: SnapshotRule,
    /// Hard cap on epochs under [`SvrgStopping::GradNormLeq`].
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvrgConfig {
    fn default() -> Self {
        Self {
            epoch_length: None,
            step_size: None,
            stopping: SvrgStopping::FixedEpochs(10),
            snapshot: SnapshotRule::LastIterate,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl SvrgConfig {
    pub fn with_stopping(mut self, stopping: SvrgStopping) -> Self {
        self.stopping = stopping;
        self
    }

    pub fn resolved_step<F: FiniteSum + ?Sized>(&self, obj: &F) -> f64 {
        self.step_size.unwrap_or_else(|| 1.0 / (10.0 * obj.smoothness()))
    }

    pub fn resolved_epoch_length<F: FiniteSum + ?Sized>(&self, obj: &F) -> usize {
        self.epoch_length.unwrap_or(2 * obj.len())
    }

    fn validate(&self) -> Result<()> {
        if let Some(step) = self.step_size {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {step}")));
            }
        }
        if self.epoch_length == Some(0) {
            return Err(Error::InvalidArgument("epoch length must be at least 1".into()));
        }
        if let SvrgStopping::GradNormLeq(eps) = self.stopping {
            if !(eps >= 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {eps}")));
            }
        }
        Ok(())
    }
}

/// Result of an SVRG run.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgOutcome {
    pub theta: Vec<f64>,
    pub epochs: usize,
    /// Norm of the last snapshot gradient that was evaluated.
    pub grad_norm: Option<f64>,
}

/// Minimizes `obj` from `init`, seeding the sampler from `config.seed`.
pub fn svrg_minimize<F: FiniteSum + ?Sized>(
    obj: &F,
    init: &[f64],
    config: &SvrgConfig,
    counter: &IfoCounter,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    svrg_run(obj, init, config, counter, &mut rng, |_, _| ControlFlow::Continue(()))
        .map(|out| out.theta)
}

/// SVRG with an explicit sampler and an observer called after every epoch
/// with `(epochs_done, snapshot)`. Returning `Break` ends the run early.
pub fn svrg_run<F, R, O>(
    obj: &F,
    init: &[f64],
    config: &SvrgConfig,
    counter: &IfoCounter,
    rng: &mut R,
    mut observer: O,
) -> Result<SvrgOutcome>
where
    F: FiniteSum + ?Sized,
    R: Rng + ?Sized,
    O: FnMut(usize, &[f64]) -> ControlFlow<()>,
{
    config.validate()?;
    if obj.dim() != init.len() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: init.len(),
        });
    }
    let m = obj.len();
    if m == 0 {
        return Err(Error::EmptyIndexSet);
    }
    let step = config.resolved_step(obj);
    let epoch_length = config.resolved_epoch_length(obj);
    let kind = obj.oracle_kind();

    let mut snapshot = init.to_vec();
    let mut theta = vec![0.0; init.len()];
    let mut dir = vec![0.0; init.len()];
    let mut average = vec![0.0; init.len()];
    let mut epochs = 0usize;
    let mut grad_norm = None;
    let mut steps = 0u64;

    loop {
        if let SvrgStopping::FixedEpochs(total) = config.stopping {
            if epochs >= total {
                break;
            }
        }
        let full = obj.gradient(&snapshot);
        counter.add(kind, m as u64);
        let gn = norm(&full);
        if !gn.is_finite() {
            return Err(Error::Diverged { steps });
        }
        grad_norm = Some(gn);
        if let SvrgStopping::GradNormLeq(eps) = config.stopping {
            if gn <= eps {
                break;
            }
            if epochs >= config.max_epochs {
                return Err(Error::StoppingNotReached {
                    epochs,
                    grad_norm: gn,
                    tolerance: eps,
                });
            }
        }

        theta.copy_from_slice(&snapshot);
        if config.snapshot == SnapshotRule::Average {
            average.iter_mut().for_each(|a| *a = 0.0);
        }
        for _ in 0..epoch_length {
            let i = rng.random_range(0..m);
            dir.copy_from_slice(&full);
            obj.add_component_difference(i, &theta, &snapshot, 1.0, &mut dir);
            for (t, g) in theta.iter_mut().zip(&dir) {
                *t -= step * g;
            }
            if config.snapshot == SnapshotRule::Average {
                for (a, t) in average.iter_mut().zip(&theta) {
                    *a += t;
                }
            }
        }
        counter.add(kind, 2 * epoch_length as u64);
        steps += epoch_length as u64;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { steps });
        }
        match config.snapshot {
            SnapshotRule::LastIterate => snapshot.copy_from_slice(&theta),
            SnapshotRule::Average => {
                for (s, a) in snapshot.iter_mut().zip(&average) {
                    *s = a / epoch_length as f64;
                }
            }
        }
        epochs += 1;
        if observer(epochs, &snapshot).is_break() {
            break;
        }
    }

    Ok(SvrgOutcome {
        theta: snapshot,
        epochs,
        grad_norm,
    })
}
