//! Shared fixtures for the criterion benchmarks.

use hsdmpg_core::{synthesize_redundant, ErmProblem, LossModel};

/// Unit-radius ridge problem with 4-fold near-duplicate rows.
pub fn ridge(n: usize, d: usize, mu: f64) -> ErmProblem {
    let data = synthesize_redundant(n, d, 4, 0.1, 7)
        .expect("valid sizes")
        .scaled_to_unit_radius();
    ErmProblem::new(data, LossModel::quadratic(), mu).expect("positive mu")
}

/// Unit-radius logistic problem on noisy rows.
pub fn logistic(n: usize, d: usize, mu: f64) -> ErmProblem {
    let data = synthesize_redundant(n, d, 1, 2.0, 11)
        .expect("valid sizes")
        .scaled_to_unit_radius()
        .binarized();
    ErmProblem::new(data, LossModel::logistic(), mu).expect("positive mu")
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsdmpg_core::ErmObjective;

    #[test]
    fn fixtures_have_requested_shape() {
        let p = ridge(64, 5, 0.1);
        assert_eq!((p.n(), p.dim()), (64, 5));
        assert!(p.data().r() <= 1.0 + 1e-12);
        assert!(!logistic(40, 3, 0.1).is_quadratic());
    }
}
