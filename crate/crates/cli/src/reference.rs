//! Reference optima, cached on disk by a hash of the problem content.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hsdmpg_core::{
    fgd_reference, ridge_closed_form, ErmObjective, ErmProblem, IfoCounter, LossKind,
};
use log::{debug, info};
use sha2::{Digest, Sha256};

use crate::atomic_write;
use crate::error::{Error, Result};
use crate::spec::ReferenceSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    ClosedForm,
    Fgd,
}

impl ReferenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceMethod::ClosedForm => "closed_form",
            ReferenceMethod::Fgd => "fgd",
        }
    }

    pub fn for_problem(problem: &ErmProblem, settings: &ReferenceSettings) -> Self {
        if problem.loss().kind() == LossKind::Quadratic && problem.dim() <= settings.dense_max_d {
            ReferenceMethod::ClosedForm
        } else {
            ReferenceMethod::Fgd
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValue {
    pub value: f64,
    pub method: ReferenceMethod,
    /// `‖∇F‖` at the reference point.
    pub grad_norm: f64,
    /// Whether the value came from the cache.
    pub cached: bool,
}

/// Computes `F*` without touching the cache.
pub fn compute_reference(problem: &ErmProblem, settings: &ReferenceSettings) -> Result<ReferenceValue> {
    let method = ReferenceMethod::for_problem(problem, settings);
    let (theta, grad_norm) = match method {
        ReferenceMethod::ClosedForm => {
            let theta = ridge_closed_form(problem)?;
            let g = problem.gradient(&theta);
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            (theta, gn)
        }
        ReferenceMethod::Fgd => {
            let r = fgd_reference(problem, settings.tol, settings.max_iters, &IfoCounter::new())?;
            if !r.converged {
                return Err(Error::Core(hsdmpg_core::Error::StoppingNotReached {
                    epochs: r.iterations,
                    grad_norm: r.grad_norm,
                    tolerance: settings.tol,
                }));
            }
            (r.theta, r.grad_norm)
        }
    };
    Ok(ReferenceValue {
        value: problem.objective(&theta),
        method,
        grad_norm,
        cached: false,
    })
}

/// Content key: data, labels, loss, `μ` and the reference method settings.
pub fn cache_key(problem: &ErmProblem, settings: &ReferenceSettings) -> String {
    let mut h = Sha256::new();
    let data = problem.data();
    h.update(b"hsdmpg-reference-v1");
    h.update((data.n() as u64).to_le_bytes());
    h.update((data.d() as u64).to_le_bytes());
    for row in data.rows() {
        h.update((row.nnz() as u64).to_le_bytes());
        for (j, v) in row.iter() {
            h.update((j as u64).to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
    }
    for y in problem.targets() {
        h.update(y.to_bits().to_le_bytes());
    }
    let loss = problem.loss();
    h.update(format!("{:?}/{}", loss.kind(), loss.classes()).as_bytes());
    h.update(loss.strong_convexity().to_bits().to_le_bytes());
    h.update(problem.mu().to_bits().to_le_bytes());
    let method = ReferenceMethod::for_problem(problem, settings);
    h.update(method.name().as_bytes());
    if method == ReferenceMethod::Fgd {
        h.update(settings.tol.to_bits().to_le_bytes());
        h.update((settings.max_iters as u64).to_le_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.ref"))
}

fn read_cached(path: &Path) -> Option<ReferenceValue> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut bits = None;
    let mut grad_bits = None;
    let mut method = None;
    for line in text.lines() {
        match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
            Some(("value_bits", v)) => bits = u64::from_str_radix(v, 16).ok(),
            Some(("grad_norm_bits", v)) => grad_bits = u64::from_str_radix(v, 16).ok(),
            Some(("method", "closed_form")) => method = Some(ReferenceMethod::ClosedForm),
            Some(("method", "fgd")) => method = Some(ReferenceMethod::Fgd),
            _ => {}
        }
    }
    Some(ReferenceValue {
        value: f64::from_bits(bits?),
        method: method?,
        grad_norm: f64::from_bits(grad_bits?),
        cached: true,
    })
}

/// Returns the cached `F*` for `problem`, computing and storing it on a miss.
/// Values are stored as raw bits, so a cache hit reproduces the computed
/// value exactly.
pub fn cached_reference(
    problem: &ErmProblem,
    settings: &ReferenceSettings,
    cache_dir: &Path,
) -> Result<ReferenceValue> {
    let key = cache_key(problem, settings);
    let path = cache_path(cache_dir, &key);
    if let Some(hit) = read_cached(&path) {
        debug!("reference cache hit {}", path.display());
        return Ok(hit);
    }
    let fresh = compute_reference(problem, settings)?;
    info!(
        "reference F* = {:.12e} via {} (‖∇F‖ = {:.2e})",
        fresh.value,
        fresh.method.name(),
        fresh.grad_norm
    );
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let body = format!(
        "value = {:.17e}\nvalue_bits = {:016x}\ngrad_norm_bits = {:016x}\nmethod = {}\n",
        fresh.value,
        fresh.value.to_bits(),
        fresh.grad_norm.to_bits(),
        fresh.method.name()
    );
    atomic_write(&path, body.as_bytes())?;
    Ok(fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsdmpg_core::{synthesize_redundant, LossModel};

    fn ridge(seed: u64) -> ErmProblem {
        let data = synthesize_redundant(120, 6, 1, 0.3, seed).unwrap();
        ErmProblem::new(data, LossModel::quadratic(), 0.05).unwrap()
    }

    #[test]
    fn key_depends_on_content() {
        let s = ReferenceSettings::default();
        let a = ridge(1);
        assert_eq!(cache_key(&a, &s), cache_key(&ridge(1), &s));
        assert_ne!(cache_key(&a, &s), cache_key(&ridge(2), &s));
        assert_ne!(cache_key(&a, &s), cache_key(&a.with_mu(0.06).unwrap(), &s));
        let fgd = ReferenceSettings {
            dense_max_d: 0,
            ..s.clone()
        };
        assert_ne!(cache_key(&a, &s), cache_key(&a, &fgd));
    }

    #[test]
    fn cache_round_trips_bits() {
        let dir = tempfile::tempdir().unwrap();
        let s = ReferenceSettings::default();
        let p = ridge(3);
        let first = cached_reference(&p, &s, dir.path()).unwrap();
        assert!(!first.cached);
        let second = cached_reference(&p, &s, dir.path()).unwrap();
        assert!(second.cached);
        assert_eq!(first.value.to_bits(), second.value.to_bits());
        assert_eq!(second.method, ReferenceMethod::ClosedForm);
    }

    #[test]
    fn corrupt_cache_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let s = ReferenceSettings::default();
        let p = ridge(4);
        std::fs::write(cache_path(dir.path(), &cache_key(&p, &s)), "value_bits = zz\n").unwrap();
        let r = cached_reference(&p, &s, dir.path()).unwrap();
        assert!(!r.cached);
        assert!(cached_reference(&p, &s, dir.path()).unwrap().cached);
    }
}
