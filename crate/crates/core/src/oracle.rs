//! Incremental first-order oracle accounting and solver traces.
//!
//! One IFO is one touch of one sample: evaluating its loss value and gradient.
//! Touches of the majorizing curvature rows (`H̄ = (L/n) Σ x_i x_iᵀ + μI`) are
//! tallied separately but count with the same weight in [`IfoCount::total`].
//! Objective evaluations made for traces never touch a counter.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use crate::error::Result;
use crate::loss::ErmObjective;

/// Which tally an oracle touch goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Per-sample loss value and gradient.
    Loss,
    /// One row of the majorizing curvature operator.
    Hvp,
}

/// Thread-safe, monotone IFO counter.
#[derive(Debug, Default)]
pub struct IfoCounter {
    loss_touches: AtomicU64,
    hvp_touches: AtomicU64,
}

/// Point-in-time copy of an [`IfoCounter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IfoCount {
    pub loss_touches: u64,
    pub hvp_touches: u64,
}

impl IfoCount {
    pub fn total(&self) -> u64 {
        self.loss_touches + self.hvp_touches
    }
}

impl std::ops::Sub for IfoCount {
    type Output = IfoCount;

    fn sub(self, rhs: IfoCount) -> IfoCount {
        IfoCount {
            loss_touches: self.loss_touches - rhs.loss_touches,
            hvp_touches: self.hvp_touches - rhs.hvp_touches,
        }
    }
}

impl IfoCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, kind: OracleKind, touches: u64) {
        match kind {
            OracleKind::Loss => self.loss_touches.fetch_add(touches, Ordering::Relaxed),
            OracleKind::Hvp => self.hvp_touches.fetch_add(touches, Ordering::Relaxed),
        };
    }

    pub fn add_loss(&self, touches: u64) {
        self.add(OracleKind::Loss, touches);
    }

    pub fn add_hvp(&self, touches: u64) {
        self.add(OracleKind::Hvp, touches);
    }

    pub fn snapshot(&self) -> IfoCount {
        IfoCount {
            loss_touches: self.loss_touches.load(Ordering::Relaxed),
            hvp_touches: self.hvp_touches.load(Ordering::Relaxed),
        }
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub ifo_total: u64,
    pub wall_ms: f64,
    pub objective: f64,
    /// `objective - F(θ*)`, present only when a reference optimum is attached.
    pub suboptimality: Option<f64>,
    pub grad_norm: f64,
}

/// Identification of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub solver: String,
    pub seed: u64,
    /// Flat `key=value` snapshot of the configuration actually used.
    pub config: Vec<(String, String)>,
}

impl TraceMeta {
    pub fn new(solver: impl Into<String>, seed: u64) -> Self {
        Self {
            solver: solver.into(),
            seed,
            config: Vec::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.config.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.config.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub const TRACE_CSV_HEADER: &str = "iter,ifo,wall_ms,objective,subopt,grad_norm";

/// Time-stamped convergence history of one solver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub meta: TraceMeta,
    pub reference: Option<f64>,
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// First record whose suboptimality is at most `eps`.
    pub fn first_reaching(&self, eps: f64) -> Option<&TraceRecord> {
        self.records
            .iter()
            .find(|rec| rec.suboptimality.is_some_and(|s| s <= eps))
    }

    /// CSV with header [`TRACE_CSV_HEADER`]; floats carry 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for rec in &self.records {
            let subopt = rec
                .suboptimality
                .map(|s| format!("{s:.16e}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{},{:.16e}",
                rec.outer_iter, rec.ifo_total, rec.wall_ms, rec.objective, subopt, rec.grad_norm
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Whether traces carry real elapsed time or a constant zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Wall,
    /// Every record reports `wall_ms = 0`, making traces reproducible byte for byte.
    Frozen,
}

/// Conditions checked at every trace record; a run stops when any holds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StopRule {
    pub max_outer: Option<usize>,
    pub ifo_budget: Option<u64>,
    pub grad_norm: Option<f64>,
    /// Requires a reference optimum on the recorder.
    pub suboptimality: Option<f64>,
}

impl StopRule {
    pub fn outer_iters(t: usize) -> Self {
        Self {
            max_outer: Some(t),
            ..Self::default()
        }
    }

    pub fn ifo_budget(budget: u64) -> Self {
        Self {
            ifo_budget: Some(budget),
            ..Self::default()
        }
    }

    pub fn grad_norm(eps: f64) -> Self {
        Self {
            grad_norm: Some(eps),
            ..Self::default()
        }
    }

    pub fn suboptimality(eps: f64) -> Self {
        Self {
            suboptimality: Some(eps),
            ..Self::default()
        }
    }

    pub fn with_ifo_budget(mut self, budget: u64) -> Self {
        self.ifo_budget = Some(budget);
        self
    }

    pub fn with_max_outer(mut self, t: usize) -> Self {
        self.max_outer = Some(t);
        self
    }

    /// True once `rec` meets the accuracy part of the rule (gradient norm or
    /// suboptimality), as opposed to running out of budget.
    pub fn accuracy_met(&self, rec: &TraceRecord) -> bool {
        let grad_ok = self.grad_norm.is_some_and(|eps| rec.grad_norm <= eps);
        let sub_ok = self
            .suboptimality
            .is_some_and(|eps| rec.suboptimality.is_some_and(|s| s <= eps));
        grad_ok || sub_ok
    }

    pub fn budget_exhausted(&self, rec: &TraceRecord) -> bool {
        self.max_outer.is_some_and(|t| rec.outer_iter >= t)
            || self.ifo_budget.is_some_and(|b| rec.ifo_total >= b)
    }

    pub fn should_stop(&self, rec: &TraceRecord) -> bool {
        self.accuracy_met(rec) || self.budget_exhausted(rec)
    }

    /// A rule with nothing to check would never stop.
    pub fn is_bounded(&self) -> bool {
        self.max_outer.is_some() || self.ifo_budget.is_some()
    }
}

/// Appends trace records for one run.
#[derive(Debug)]
pub struct Recorder {
    trace: SolverTrace,
    start: Instant,
    clock: Clock,
}

impl Recorder {
    pub fn new(meta: TraceMeta, reference: Option<f64>, clock: Clock) -> Self {
        Self {
            trace: SolverTrace {
                meta,
                reference,
                records: Vec::new(),
            },
            start: Instant::now(),
            clock,
        }
    }

    pub fn meta_mut(&mut self) -> &mut TraceMeta {
        &mut self.trace.meta
    }

    pub fn reference(&self) -> Option<f64> {
        self.trace.reference
    }

    /// Evaluates `F(θ)` and `‖∇F(θ)‖` without charging `counter` and appends a record.
    pub fn record<P: ErmObjective + ?Sized>(
        &mut self,
        outer_iter: usize,
        problem: &P,
        theta: &[f64],
        counter: &IfoCounter,
    ) -> &TraceRecord {
        let wall_ms = match self.clock {
            Clock::Wall => self.start.elapsed().as_secs_f64() * 1e3,
            Clock::Frozen => 0.0,
        };
        let objective = problem.objective(theta);
        let grad_norm = norm(&problem.gradient(theta));
        let rec = TraceRecord {
            outer_iter,
            ifo_total: counter.total(),
            wall_ms,
            objective,
            suboptimality: self.trace.reference.map(|f_star| objective - f_star),
            grad_norm,
        };
        self.trace.records.push(rec);
        self.trace.records.last().expect("just pushed")
    }

    pub fn finish(self) -> SolverTrace {
        self.trace
    }
}

/// Final iterate and history of a solver run.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub theta: Vec<f64>,
    pub trace: SolverTrace,
    /// Whether the accuracy part of the stop rule was met (as opposed to
    /// running out of budget or iterations).
    pub converged: bool,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_redundant;
    use crate::loss::{ErmProblem, LossModel};

    fn problem(n: usize) -> ErmProblem {
        let data = synthesize_redundant(n, 3, 1, 0.1, 5).unwrap();
        ErmProblem::new(data, LossModel::quadratic(), 0.1).unwrap()
    }

    #[test]
    fn counter_tallies_separately() {
        let c = IfoCounter::new();
        c.add_loss(3);
        c.add_hvp(4);
        let snap = c.snapshot();
        assert_eq!(snap.loss_touches, 3);
        assert_eq!(snap.hvp_touches, 4);
        assert_eq!(snap.total(), 7);
    }

    #[test]
    fn counter_is_shareable_across_threads() {
        let c = IfoCounter::new();
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..1000 {
                        c.add_loss(1);
                    }
                });
            }
        });
        assert_eq!(c.total(), 4000);
    }

    #[test]
    fn recording_is_free_and_monotone() {
        let p = problem(100);
        let c = IfoCounter::new();
        let theta = vec![0.1, -0.2, 0.3];
        let mut rec = Recorder::new(TraceMeta::new("test", 0), None, Clock::Wall);
        rec.record(0, &p, &theta, &c);
        assert_eq!(c.total(), 0);
        p.full_gradient(&theta, &c);
        rec.record(1, &p, &theta, &c);
        let trace = rec.finish();
        assert_eq!(trace.records[1].ifo_total - trace.records[0].ifo_total, 100);
        assert!(trace.records[0].suboptimality.is_none());
    }

    #[test]
    fn suboptimality_at_reference_is_zero() {
        let p = problem(30);
        let c = IfoCounter::new();
        let theta = vec![0.5, 0.5, -1.0];
        let f = p.objective(&theta);
        let mut rec = Recorder::new(TraceMeta::new("test", 0), Some(f), Clock::Frozen);
        let r = rec.record(0, &p, &theta, &c);
        assert!(r.suboptimality.unwrap().abs() <= 1e-12 * (1.0 + f.abs()));
        assert_eq!(r.wall_ms, 0.0);
    }

    #[test]
    fn csv_layout() {
        let trace = SolverTrace {
            meta: TraceMeta::new("x", 1),
            reference: None,
            records: vec![
                TraceRecord {
                    outer_iter: 0,
                    ifo_total: 0,
                    wall_ms: 0.0,
                    objective: 1.0 / 3.0,
                    suboptimality: None,
                    grad_norm: 2.0,
                },
                TraceRecord {
                    outer_iter: 1,
                    ifo_total: 10,
                    wall_ms: 1.5,
                    objective: 0.25,
                    suboptimality: Some(1e-3),
                    grad_norm: 0.5,
                },
            ],
        };
        let csv = trace.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(
            lines[1],
            "0,0,0.0000000000000000e0,3.3333333333333331e-1,,2.0000000000000000e0"
        );
        assert!(lines[2].starts_with("1,10,"));
        // 17 significant digits round-trip exactly.
        let obj: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(obj, 1.0 / 3.0);
    }

    #[test]
    fn stop_rule() {
        let rec = TraceRecord {
            outer_iter: 5,
            ifo_total: 100,
            wall_ms: 0.0,
            objective: 0.0,
            suboptimality: Some(1e-4),
            grad_norm: 1e-3,
        };
        assert!(StopRule::outer_iters(5).should_stop(&rec));
        assert!(!StopRule::outer_iters(6).should_stop(&rec));
        assert!(StopRule::suboptimality(1e-3).accuracy_met(&rec));
        assert!(!StopRule::grad_norm(1e-4).should_stop(&rec));
        assert!(StopRule::ifo_budget(100).budget_exhausted(&rec));
    }
}
