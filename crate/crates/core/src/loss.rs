//! Per-sample losses and the ℓ2-regularized ERM objective
//!
//! `F(θ) = (1/n) Σ ℓ(θᵀx_i, y_i) + (μ/2)‖θ‖²`.
//!
//! Softmax parameters are stored class-major: the weights of class `c` occupy
//! `theta[c*d .. (c+1)*d]`, and the prediction vector is `z_c = x_iᵀθ_c`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smallvec::SmallVec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{norm, IfoCounter, OracleKind};

type Buf = SmallVec<[f64; 8]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `½(z − y)²`
    Quadratic,
    /// `log(1 + exp(−y z))`, `y ∈ {−1, +1}`
    Logistic,
    /// `log Σ_c exp(z_c) − z_y`, `y ∈ {0, …, k−1}`
    Softmax,
}

/// A scalar (or `k`-vector) loss of the prediction together with its
/// curvature constants with respect to the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    classes: usize,
    smoothness: f64,
    strong_convexity: f64,
}

impl LossModel {
    pub fn quadratic() -> Self {
        Self {
            kind: LossKind::Quadratic,
            classes: 1,
            smoothness: 1.0,
            strong_convexity: 1.0,
        }
    }

    /// `σ = 0`: logistic loss is only strongly convex on bounded predictions.
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            classes: 1,
            smoothness: 0.25,
            strong_convexity: 0.0,
        }
    }

    /// Softmax over `k ≥ 2` classes with the per-block bound `L = 1/2`.
    pub fn softmax(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("softmax needs k >= 2, got {k}")));
        }
        Ok(Self {
            kind: LossKind::Softmax,
            classes: k,
            smoothness: 0.5,
            strong_convexity: 0.0,
        })
    }

    /// Overrides `σ`, e.g. with an effective value valid on a bounded domain.
    pub fn with_strong_convexity(mut self, sigma: f64) -> Result<Self> {
        if !(0.0..=self.smoothness).contains(&sigma) {
            return Err(Error::InvalidArgument(format!(
                "strong convexity {sigma} must lie in [0, {}]",
                self.smoothness
            )));
        }
        self.strong_convexity = sigma;
        Ok(self)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Length of the prediction vector.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `L`: smoothness with respect to the prediction.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// `σ`: strong convexity with respect to the prediction.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn validate(&self, z: &[f64], y: f64) -> Result<()> {
        if z.len() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                found: z.len(),
            });
        }
        let ok = match self.kind {
            LossKind::Quadratic => y.is_finite(),
            LossKind::Logistic => y == 1.0 || y == -1.0,
            LossKind::Softmax => y.fract() == 0.0 && y >= 0.0 && (y as usize) < self.classes,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLabel {
                label: y,
                reason: format!("not a valid {:?} label", self.kind),
            })
        }
    }

    pub fn value(&self, z: &[f64], y: f64) -> Result<f64> {
        self.validate(z, y)?;
        Ok(self.value_unchecked(z, y))
    }

    pub fn gradient(&self, z: &[f64], y: f64) -> Result<Vec<f64>> {
        self.validate(z, y)?;
        let mut out = vec![0.0; self.classes];
        self.gradient_into(z, y, &mut out);
        Ok(out)
    }

    /// Curvature of the loss in the prediction, bounded by `L`.
    ///
    /// Scalar losses return `ℓ''(z, y)`. Softmax returns the Gershgorin bound
    /// `max_c 2 p_c (1 − p_c)` on the spectrum of `diag(p) − ppᵀ`.
    pub fn curvature(&self, z: &[f64], y: f64) -> Result<f64> {
        self.validate(z, y)?;
        Ok(match self.kind {
            LossKind::Quadratic => 1.0,
            LossKind::Logistic => {
                let p = sigmoid(z[0]);
                p * (1.0 - p)
            }
            LossKind::Softmax => softmax_probs(z)
                .iter()
                .map(|p| 2.0 * p * (1.0 - p))
                .fold(0.0, f64::max),
        })
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, z: &[f64], y: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic => 0.5 * (z[0] - y) * (z[0] - y),
            LossKind::Logistic => softplus(-y * z[0]),
            LossKind::Softmax => log_sum_exp(z) - z[y as usize],
        }
    }

    #[inline]
    pub(crate) fn gradient_into(&self, z: &[f64], y: f64, out: &mut [f64]) {
        match self.kind {
            LossKind::Quadratic => out[0] = z[0] - y,
            LossKind::Logistic => out[0] = -y * sigmoid(-y * z[0]),
            LossKind::Softmax => {
                let lse = log_sum_exp(z);
                for (o, &zc) in out.iter_mut().zip(z) {
                    *o = (zc - lse).exp();
                }
                out[y as usize] -= 1.0;
            }
        }
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_probs(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|&v| (v - lse).exp()).collect()
}

/// A finite sum `(1/n) Σ φ_i(X_i θ) + (μ/2)‖θ‖²` over the rows of a dataset,
/// where `φ_i` is an arbitrary smooth per-sample function of the `k`-vector
/// prediction. Implemented by the ERM problem itself and by its quadratic
/// majorants, so the same solvers run on both.
///
/// Methods named `objective`/`gradient`/`subset_*` are instrumentation and
/// never charge a counter; `full_gradient`, `minibatch_gradient` and
/// `upper_hessian_vp` are the algorithmic oracles and do.
pub trait ErmObjective: Sync {
    fn data(&self) -> &Dataset;

    /// Prediction dimension `k`.
    fn classes(&self) -> usize;

    fn mu(&self) -> f64;

    /// Smoothness `L` of every `φ_i` in the prediction.
    fn link_smoothness(&self) -> f64;

    /// Strong convexity `σ` of every `φ_i` in the prediction (0 if none).
    fn link_strong_convexity(&self) -> f64 {
        0.0
    }

    /// Which tally a per-sample touch goes to.
    fn oracle_kind(&self) -> OracleKind {
        OracleKind::Loss
    }

    /// True when every `φ_i` is a quadratic function of the prediction.
    fn is_quadratic(&self) -> bool {
        false
    }

    fn sample_value(&self, i: usize, z: &[f64]) -> f64;

    /// Writes `∇φ_i(z)` into `out` (length `k`).
    fn sample_derivative(&self, i: usize, z: &[f64], out: &mut [f64]);

    fn n(&self) -> usize {
        self.data().n()
    }

    /// Length of the parameter vector, `d·k`.
    fn dim(&self) -> usize {
        self.data().d() * self.classes()
    }

    /// Upper bound on the smoothness of `F`: `L·r² + μ`.
    fn smoothness_bound(&self) -> f64 {
        self.link_smoothness() * self.data().r().powi(2) + self.mu()
    }

    #[inline]
    fn predict(&self, i: usize, theta: &[f64], z: &mut [f64]) {
        let d = self.data().d();
        let row = self.data().row(i);
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = row.dot_unchecked(&theta[c * d..(c + 1) * d]);
        }
    }

    /// Value of the data term of sample `i` (no regularizer).
    fn sample_loss(&self, i: usize, theta: &[f64]) -> f64 {
        let mut z: Buf = SmallVec::from_elem(0.0, self.classes());
        self.predict(i, theta, &mut z);
        self.sample_value(i, &z)
    }

    /// `out += scale · ∇_θ φ_i(X_i θ)` (no regularizer, no counting).
    #[inline]
    fn add_sample_gradient(&self, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        let k = self.classes();
        let mut z: Buf = SmallVec::from_elem(0.0, k);
        let mut g: Buf = SmallVec::from_elem(0.0, k);
        self.predict(i, theta, &mut z);
        self.sample_derivative(i, &z, &mut g);
        self.scatter(i, &g, scale, out);
    }

    /// `out += scale · X_iᵀ g` for a prediction-space vector `g`.
    #[inline]
    fn scatter(&self, i: usize, g: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.data().d();
        let row = self.data().row(i);
        for (c, &gc) in g.iter().enumerate() {
            if gc != 0.0 {
                row.axpy_into(scale * gc, &mut out[c * d..(c + 1) * d]);
            }
        }
    }

    /// `F_S(θ) = (1/|S|) Σ_{i∈S} φ_i + (μ/2)‖θ‖²` (uncounted).
    fn subset_objective(&self, subset: &[usize], theta: &[f64]) -> f64 {
        let data: f64 = subset.iter().map(|&i| self.sample_loss(i, theta)).sum();
        data / subset.len() as f64 + 0.5 * self.mu() * dot(theta, theta)
    }

    /// `∇F_S(θ)` (uncounted).
    fn subset_gradient(&self, subset: &[usize], theta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = theta.iter().map(|t| self.mu() * t).collect();
        let scale = 1.0 / subset.len() as f64;
        for &i in subset {
            self.add_sample_gradient(i, theta, scale, &mut out);
        }
        out
    }

    /// `F(θ)` (uncounted).
    fn objective(&self, theta: &[f64]) -> f64 {
        let data: f64 = (0..self.n()).map(|i| self.sample_loss(i, theta)).sum();
        data / self.n() as f64 + 0.5 * self.mu() * dot(theta, theta)
    }

    /// `∇F(θ)` (uncounted).
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = theta.iter().map(|t| self.mu() * t).collect();
        let scale = 1.0 / self.n() as f64;
        for i in 0..self.n() {
            self.add_sample_gradient(i, theta, scale, &mut out);
        }
        out
    }

    /// `∇F(θ)`, charging `n` touches.
    fn full_gradient(&self, theta: &[f64], counter: &IfoCounter) -> Vec<f64> {
        counter.add(self.oracle_kind(), self.n() as u64);
        self.gradient(theta)
    }

    /// `∇F_B(θ)`, charging `|B|` touches. Repeated indices count repeatedly.
    fn minibatch_gradient(
        &self,
        theta: &[f64],
        batch: &[usize],
        counter: &IfoCounter,
    ) -> Result<Vec<f64>> {
        check_index_set(batch, self.n())?;
        counter.add(self.oracle_kind(), batch.len() as u64);
        Ok(self.subset_gradient(batch, theta))
    }

    /// Matrix-free product with the majorizing curvature
    /// `H̄ = (L/n) Σ x_i x_iᵀ + μI` (block-diagonal over classes), charging
    /// `n` curvature-row touches.
    fn upper_hessian_vp(&self, v: &[f64], counter: &IfoCounter) -> Vec<f64> {
        counter.add_hvp(self.n() as u64);
        let data = self.data();
        let d = data.d();
        let scale = self.link_smoothness() / self.n() as f64;
        let mut out: Vec<f64> = v.iter().map(|x| self.mu() * x).collect();
        for row in data.rows() {
            for c in 0..self.classes() {
                let proj = row.dot_unchecked(&v[c * d..(c + 1) * d]);
                if proj != 0.0 {
                    row.axpy_into(scale * proj, &mut out[c * d..(c + 1) * d]);
                }
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_index_set(set: &[usize], n: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    Ok(())
}

/// The regularized ERM problem over a dataset.
#[derive(Debug, Clone)]
pub struct ErmProblem {
    data: Dataset,
    loss: LossModel,
    mu: f64,
    /// Labels in the form the loss expects: raw reals, `±1`, or class ids.
    targets: Vec<f64>,
}

impl ErmProblem {
    pub fn new(data: Dataset, loss: LossModel, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        let targets = match loss.kind() {
            LossKind::Quadratic => data.labels().to_vec(),
            LossKind::Logistic => {
                let (ids, k) = data.class_ids()?;
                if k > 2 {
                    return Err(Error::InvalidArgument(format!(
                        "logistic loss needs binary labels, found {k} classes"
                    )));
                }
                ids.into_iter().map(|c| if c == 1 { 1.0 } else { -1.0 }).collect()
            }
            LossKind::Softmax => {
                let (ids, k) = data.class_ids()?;
                if k > loss.classes() {
                    return Err(Error::InvalidArgument(format!(
                        "data has {k} classes but the softmax model has {}",
                        loss.classes()
                    )));
                }
                ids.into_iter().map(|c| c as f64).collect()
            }
        };
        Ok(Self {
            data,
            loss,
            mu,
            targets,
        })
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }

    /// Labels as seen by the loss.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Copy with a different regularization weight.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.data.clone(), self.loss, mu)
    }

    /// Condition number `κ = L/μ`.
    pub fn condition_number(&self) -> f64 {
        self.loss.smoothness() / self.mu
    }
}

impl ErmObjective for ErmProblem {
    fn data(&self) -> &Dataset {
        &self.data
    }

    fn classes(&self) -> usize {
        self.loss.classes()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn link_smoothness(&self) -> f64 {
        self.loss.smoothness()
    }

    fn link_strong_convexity(&self) -> f64 {
        self.loss.strong_convexity()
    }

    fn is_quadratic(&self) -> bool {
        self.loss.kind() == LossKind::Quadratic
    }

    #[inline]
    fn sample_value(&self, i: usize, z: &[f64]) -> f64 {
        self.loss.value_unchecked(z, self.targets[i])
    }

    #[inline]
    fn sample_derivative(&self, i: usize, z: &[f64], out: &mut [f64]) {
        self.loss.gradient_into(z, self.targets[i], out);
    }
}

/// Estimates `λ_max(H̄)` by power iteration with a 1% safety margin. Each
/// iteration charges `n` curvature-row touches.
pub fn power_iteration_bound<P: ErmObjective + ?Sized>(
    problem: &P,
    iterations: usize,
    seed: u64,
    counter: &IfoCounter,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..problem.dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut estimate = problem.mu();
    for _ in 0..iterations.max(1) {
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let hv = problem.upper_hessian_vp(&v, counter);
        let next = dot(&v, &hv);
        let converged = (next - estimate).abs() <= 1e-10 * next.abs();
        estimate = next;
        v = hv;
        if converged {
            break;
        }
    }
    1.01 * estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_redundant, Dataset, SparseVector};
    use proptest::prelude::*;

    fn fd_derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn logistic_at_zero() {
        let m = LossModel::logistic();
        assert!((m.value(&[0.0], 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((m.gradient(&[0.0], 1.0).unwrap()[0] + 0.5).abs() < 1e-15);
        assert!((m.curvature(&[0.0], 1.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quadratic_basics() {
        let m = LossModel::quadratic();
        assert_eq!(m.value(&[2.5], 2.5).unwrap(), 0.0);
        assert_eq!(m.gradient(&[3.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(m.curvature(&[-7.0], 1.0).unwrap(), 1.0);
        assert_eq!((m.smoothness(), m.strong_convexity()), (1.0, 1.0));
    }

    #[test]
    fn softmax_uniform_logits() {
        let m = LossModel::softmax(4).unwrap();
        for c in [-3.0, 0.0, 11.0] {
            let v = m.value(&[c; 4], 2.0).unwrap();
            assert!((v - 4f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(LossModel::logistic().value(&[0.0], 0.0).is_err());
        assert!(LossModel::softmax(3).unwrap().value(&[0.0; 3], 3.0).is_err());
        assert!(LossModel::softmax(3).unwrap().value(&[0.0; 3], 1.5).is_err());
        assert!(LossModel::softmax(1).is_err());
        assert!(LossModel::logistic().value(&[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let m = LossModel::logistic();
        assert!(m.value(&[800.0], -1.0).unwrap().is_finite());
        assert!(m.value(&[800.0], 1.0).unwrap() >= 0.0);
        assert!(m.gradient(&[-800.0], 1.0).unwrap()[0].is_finite());
    }

    proptest! {
        #[test]
        fn logistic_gradient_matches_fd(z in -20.0f64..20.0, pos in any::<bool>()) {
            let m = LossModel::logistic();
            let y = if pos { 1.0 } else { -1.0 };
            let g = m.gradient(&[z], y).unwrap()[0];
            let fd = fd_derivative(|t| m.value(&[t], y).unwrap(), z);
            prop_assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-3));
        }

        #[test]
        fn logistic_curvature_in_range(z in -30.0f64..30.0) {
            let c = LossModel::logistic().curvature(&[z], 1.0).unwrap();
            prop_assert!(c > 0.0 && c <= 0.25);
        }

        #[test]
        fn softmax_curvature_bounded(z in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let m = LossModel::softmax(3).unwrap();
            let c = m.curvature(&z, 0.0).unwrap();
            prop_assert!((0.0..=0.5).contains(&c));
        }
    }

    fn toy_problem(loss: LossModel, n: usize, d: usize, seed: u64) -> ErmProblem {
        let data = synthesize_redundant(n, d, 1, 0.3, seed).unwrap();
        let data = match loss.kind() {
            LossKind::Quadratic => data,
            LossKind::Logistic => data.binarized(),
            LossKind::Softmax => data.discretized(loss.classes()).unwrap(),
        };
        ErmProblem::new(data, loss, 0.1).unwrap()
    }

    #[test]
    fn single_sample_optimum_at_origin() {
        let row = SparseVector::new(vec![0], vec![1.0], 2).unwrap();
        let data = Dataset::new(vec![row], vec![0.0], 2).unwrap();
        let p = ErmProblem::new(data, LossModel::quadratic(), 1.0).unwrap();
        let c = IfoCounter::new();
        assert_eq!(p.full_gradient(&[0.0, 0.0], &c), vec![0.0, 0.0]);
        assert_eq!(p.objective(&[0.0, 0.0]), 0.0);
        assert_eq!(c.total(), 1);
    }

    #[test]
    fn full_gradient_counts_n() {
        let p = toy_problem(LossModel::logistic(), 37, 3, 1);
        let c = IfoCounter::new();
        p.full_gradient(&[0.1, 0.2, 0.3], &c);
        assert_eq!(c.snapshot().loss_touches, 37);
        assert_eq!(c.snapshot().hvp_touches, 0);
    }

    #[test]
    fn minibatch_gradient_reduces_to_full() {
        let p = toy_problem(LossModel::quadratic(), 20, 4, 2);
        let theta = [0.3, -0.1, 0.7, 0.2];
        let c = IfoCounter::new();
        let all: Vec<usize> = (0..20).collect();
        let mb = p.minibatch_gradient(&theta, &all, &c).unwrap();
        let full = p.gradient(&theta);
        for (a, b) in mb.iter().zip(&full) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert_eq!(c.total(), 20);
        assert!(matches!(
            p.minibatch_gradient(&theta, &[], &c),
            Err(Error::EmptyIndexSet)
        ));
        assert!(p.minibatch_gradient(&theta, &[20], &c).is_err());
        let once = p.minibatch_gradient(&theta, &[3], &c).unwrap();
        let twice = p.minibatch_gradient(&theta, &[3], &c).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn minibatch_gradient_matches_dense_average() {
        let p = toy_problem(LossModel::quadratic(), 20, 3, 3);
        let theta = [0.5, 0.25, -1.0];
        let batch = [1, 4, 7, 11, 19];
        let c = IfoCounter::new();
        let got = p.minibatch_gradient(&theta, &batch, &c).unwrap();
        // Dense oracle: (1/|B|) Σ (xᵀθ − y) x + μθ
        let mut want = theta.map(|t| 0.1 * t).to_vec();
        for &i in &batch {
            let x = p.data().row(i).to_dense();
            let resid: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>()
                - p.data().labels()[i];
            for j in 0..3 {
                want[j] += resid * x[j] / batch.len() as f64;
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn upper_hvp_matches_explicit_matrix() {
        let p = toy_problem(LossModel::logistic(), 6, 4, 4);
        let v = [0.3, -1.2, 0.8, 2.0];
        let c = IfoCounter::new();
        let got = p.upper_hessian_vp(&v, &c);
        assert_eq!(c.snapshot().hvp_touches, 6);
        // Explicit (L/n) XᵀX + μI.
        let mut h = [[0.0; 4]; 4];
        for row in p.data().rows() {
            let x = row.to_dense();
            for a in 0..4 {
                for b in 0..4 {
                    h[a][b] += 0.25 / 6.0 * x[a] * x[b];
                }
            }
        }
        for (a, row) in h.iter_mut().enumerate() {
            row[a] += 0.1;
        }
        for a in 0..4 {
            let want: f64 = (0..4).map(|b| h[a][b] * v[b]).sum();
            assert!((got[a] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        assert_eq!(p.upper_hessian_vp(&[0.0; 4], &c), vec![0.0; 4]);
        let scaled = p.upper_hessian_vp(&v.map(|x| -2.5 * x), &c);
        for (s, g) in scaled.iter().zip(&got) {
            assert!((s + 2.5 * g).abs() <= 1e-12 * g.abs().max(1.0));
        }
    }

    fn central_fd_gradient(p: &ErmProblem, theta: &[f64]) -> Vec<f64> {
        let h = 1e-5 * (1.0 + norm(theta));
        (0..theta.len())
            .map(|j| {
                let mut plus = theta.to_vec();
                let mut minus = theta.to_vec();
                plus[j] += h;
                minus[j] -= h;
                (p.objective(&plus) - p.objective(&minus)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let models = [
            LossModel::quadratic(),
            LossModel::logistic(),
            LossModel::softmax(3).unwrap(),
        ];
        for (s, loss) in models.into_iter().enumerate() {
            let p = toy_problem(loss, 8, 3, 10 + s as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
            let theta: Vec<f64> = (0..p.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let g = p.full_gradient(&theta, &IfoCounter::new());
            let fd = central_fd_gradient(&p, &theta);
            let err = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-6 * norm(&g).max(1e-8), "{loss:?}: {err}");
        }
    }

    #[test]
    fn strong_convexity_inequality() {
        let p = toy_problem(LossModel::logistic(), 30, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut draw = || -> f64 {
                let v: f64 = StandardNormal.sample(&mut rng);
                3.0 * v
            };
            let a: Vec<f64> = (0..3).map(|_| draw()).collect();
            let b: Vec<f64> = (0..3).map(|_| draw()).collect();
            let diff: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            let lower = p.objective(&a) + dot(&p.gradient(&a), &diff) + 0.05 * dot(&diff, &diff);
            assert!(p.objective(&b) >= lower - 1e-12);
        }
    }

    #[test]
    fn power_iteration_bounds_and_is_tight() {
        let p = toy_problem(LossModel::quadratic(), 200, 5, 6);
        let c = IfoCounter::new();
        let est = power_iteration_bound(&p, 200, 1, &c);
        assert!(c.snapshot().hvp_touches > 0);
        assert!(est <= p.smoothness_bound());
        // Rayleigh quotients never exceed the estimate.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let v: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            let hv = p.upper_hessian_vp(&v, &c);
            assert!(dot(&v, &hv) / dot(&v, &v) <= est);
        }
    }

    #[test]
    fn logistic_rejects_multiclass_data() {
        let data = synthesize_redundant(30, 2, 1, 0.0, 1).unwrap().discretized(3).unwrap();
        assert!(ErmProblem::new(data.clone(), LossModel::logistic(), 0.1).is_err());
        assert!(ErmProblem::new(data.clone(), LossModel::softmax(2).unwrap(), 0.1).is_err());
        assert!(ErmProblem::new(data, LossModel::softmax(3).unwrap(), 0.0).is_err());
    }
}
