//! Diagonal metrics and metric schedules.
//!
//! A [`DiagonalMetric`] is a self-adjoint operator `U = diag(w)` with
//! `U ≽ α·Id`. A [`MetricSchedule`] produces the sequence `(U_n)` consumed by
//! the variable-metric iterations, together with the slacks `η_n` of the
//! chain condition `(1 + η_n)·U_{n+1} ≽ U_n` and a declared bound
//! `μ ≥ sup_n ‖U_n‖`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::point::Point;

/// Absolute tolerance for Loewner comparisons of diagonal weights.
pub const LOEWNER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric {
    weights: Vec<f64>,
    alpha_bound: f64,
}

impl DiagonalMetric {
    /// Builds `diag(weights)`, checking membership in `P_α` with `α = alpha_bound`.
    pub fn new(weights: Vec<f64>, alpha_bound: f64) -> Result<Self> {
        if !(alpha_bound > 0.0 && alpha_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha bound must be positive and finite, got {alpha_bound}"
            )));
        }
        for (j, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < alpha_bound {
                return Err(Error::InvalidArgument(format!(
                    "metric weight {j} = {w} is below the alpha bound {alpha_bound}"
                )));
            }
        }
        Ok(DiagonalMetric {
            weights,
            alpha_bound,
        })
    }

    /// Uses the smallest weight as the alpha bound.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let alpha = weights.iter().copied().fold(f64::INFINITY, f64::min);
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty metric".into()));
        }
        Self::new(weights, alpha)
    }

    pub fn identity(dim: usize) -> Self {
        DiagonalMetric {
            weights: vec![1.0; dim],
            alpha_bound: 1.0,
        }
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim], value)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha_bound(&self) -> f64 {
        self.alpha_bound
    }

    /// Operator norm, i.e. the largest weight.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `U x`
    pub fn apply(&self, x: &Point) -> Point {
        assert_eq!(self.dim(), x.dim(), "metric apply: dimension mismatch");
        Point::from(
            self.weights
                .iter()
                .zip(x.iter())
                .map(|(w, c)| w * c)
                .collect::<Vec<_>>(),
        )
    }

    /// `U^{-1} x`
    pub fn apply_inverse(&self, x: &Point) -> Point {
        assert_eq!(self.dim(), x.dim(), "metric apply: dimension mismatch");
        Point::from(
            self.weights
                .iter()
                .zip(x.iter())
                .map(|(w, c)| c / w)
                .collect::<Vec<_>>(),
        )
    }

    /// The metric `U^{-1}`.
    pub fn inverse(&self) -> DiagonalMetric {
        let weights: Vec<f64> = self.weights.iter().map(|w| 1.0 / w).collect();
        let alpha = weights.iter().copied().fold(f64::INFINITY, f64::min);
        DiagonalMetric {
            weights,
            alpha_bound: alpha,
        }
    }

    /// The metric `s·U` for `s > 0`.
    pub fn scaled(&self, s: f64) -> DiagonalMetric {
        assert!(s > 0.0, "metric scale must be positive");
        DiagonalMetric {
            weights: self.weights.iter().map(|w| s * w).collect(),
            alpha_bound: s * self.alpha_bound,
        }
    }

    /// Block-diagonal metric on a direct sum.
    pub fn block_diagonal(blocks: &[DiagonalMetric]) -> DiagonalMetric {
        let weights: Vec<f64> = blocks.iter().flat_map(|b| b.weights.iter().copied()).collect();
        let alpha = blocks
            .iter()
            .map(|b| b.alpha_bound)
            .fold(f64::INFINITY, f64::min);
        DiagonalMetric {
            weights,
            alpha_bound: alpha,
        }
    }

    /// Splits a block-diagonal metric into blocks of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Vec<DiagonalMetric> {
        let mut offset = 0;
        sizes
            .iter()
            .map(|&s| {
                let w = self.weights[offset..offset + s].to_vec();
                offset += s;
                let alpha = w.iter().copied().fold(self.alpha_bound, f64::min);
                DiagonalMetric {
                    weights: w,
                    alpha_bound: alpha,
                }
            })
            .collect()
    }
}

/// `⟨Mx, y⟩`
pub fn metric_inner(m: &DiagonalMetric, x: &Point, y: &Point) -> Result<f64> {
    check_dim("metric_inner (x)", m.dim(), x.dim())?;
    check_dim("metric_inner (y)", m.dim(), y.dim())?;
    Ok(m.weights
        .iter()
        .zip(x.iter().zip(y.iter()))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// `‖x‖_M = √⟨Mx, x⟩`
pub fn metric_norm(m: &DiagonalMetric, x: &Point) -> Result<f64> {
    Ok(metric_inner(m, x, x)?.sqrt())
}

/// Loewner order with slack: `(1 + slack)·M1 ≽ M2`.
pub fn loewner_geq(m1: &DiagonalMetric, m2: &DiagonalMetric, slack: f64) -> Result<bool> {
    check_dim("loewner_geq", m1.dim(), m2.dim())?;
    if !(slack >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Loewner slack must be nonnegative, got {slack}"
        )));
    }
    Ok(weights_dominate(&m1.weights, &m2.weights, slack).is_none())
}

/// First component where `(1 + slack)·w1 ≽ w2` fails, if any.
fn weights_dominate(w1: &[f64], w2: &[f64], slack: f64) -> Option<usize> {
    w1.iter()
        .zip(w2)
        .position(|(a, b)| (1.0 + slack) * a < b - LOEWNER_TOL)
}

/// Smallest `η ≥ 0` with `(1 + η)·upper ≽ lower` componentwise.
fn smallest_slack(upper: &[f64], lower: &[f64]) -> f64 {
    upper
        .iter()
        .zip(lower)
        .map(|(u, l)| l / u - 1.0)
        .fold(0.0, f64::max)
}

type WeightFn = Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>;
type SlackFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ScheduleKind {
    Constant(Vec<f64>),
    /// `U_n = Id + c·ρ^n·D`
    Geometric {
        c: f64,
        rho: f64,
        direction: Vec<f64>,
    },
    Table {
        metrics: Vec<Vec<f64>>,
        etas: Vec<f64>,
        reverse: Option<Vec<f64>>,
    },
    Stacked(Vec<MetricSchedule>),
    Custom {
        weights: WeightFn,
        eta: SlackFn,
        reverse: Option<SlackFn>,
    },
}

/// A sequence of diagonal metrics with declared bounds.
#[derive(Clone)]
pub struct MetricSchedule {
    kind: ScheduleKind,
    dim: usize,
    alpha_bound: f64,
    mu_bound: f64,
    summable: bool,
}

impl fmt::Debug for MetricSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSchedule")
            .field("kind", &self.kind_name())
            .field("dim", &self.dim)
            .field("alpha_bound", &self.alpha_bound)
            .field("mu_bound", &self.mu_bound)
            .field("summable", &self.summable)
            .finish()
    }
}

impl MetricSchedule {
    /// `U_n = U` for every `n`, with `η_n = 0`.
    pub fn constant(metric: DiagonalMetric) -> Self {
        MetricSchedule {
            dim: metric.dim(),
            alpha_bound: metric.alpha_bound,
            mu_bound: metric.max_weight(),
            summable: true,
            kind: ScheduleKind::Constant(metric.weights),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(DiagonalMetric::identity(dim))
    }

    /// `U_n = Id + c·ρ^n·diag(direction)` with `c ≥ 0`, `0 < ρ < 1`,
    /// `direction ≥ 0`. The slack `η_n` is the smallest value for which the
    /// chain condition holds; the reverse chain holds with zero slack.
    pub fn geometric(c: f64, rho: f64, direction: Vec<f64>) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "geometric schedule: c must be >= 0, got {c}"
            )));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "geometric schedule: rho must lie in (0, 1), got {rho}"
            )));
        }
        if direction.is_empty() || direction.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument(
                "geometric schedule: direction must be nonempty and nonnegative".into(),
            ));
        }
        let dmax = direction.iter().copied().fold(0.0, f64::max);
        Ok(MetricSchedule {
            dim: direction.len(),
            alpha_bound: 1.0,
            mu_bound: 1.0 + c * dmax,
            summable: true,
            kind: ScheduleKind::Geometric { c, rho, direction },
        })
    }

    /// A user-supplied finite table; the last metric is held afterwards.
    ///
    /// `etas[n]` is the slack between entries `n` and `n + 1`; when absent
    /// the smallest admissible slack is derived from the table.
    pub fn table(
        metrics: Vec<DiagonalMetric>,
        etas: Option<Vec<f64>>,
        reverse: Option<Vec<f64>>,
    ) -> Result<Self> {
        let first = metrics
            .first()
            .ok_or_else(|| Error::InvalidArgument("metric table is empty".into()))?;
        let dim = first.dim();
        for (n, m) in metrics.iter().enumerate() {
            check_dim(&format!("metric table entry {n}"), dim, m.dim())?;
        }
        let weights: Vec<Vec<f64>> = metrics.iter().map(|m| m.weights.clone()).collect();
        let etas = match etas {
            Some(e) => {
                if e.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(Error::InvalidArgument(
                        "metric table slacks must be nonnegative".into(),
                    ));
                }
                e
            }
            None => weights
                .windows(2)
                .map(|w| smallest_slack(&w[1], &w[0]))
                .collect(),
        };
        let alpha = metrics
            .iter()
            .map(|m| m.alpha_bound)
            .fold(f64::INFINITY, f64::min);
        let mu = metrics.iter().map(|m| m.max_weight()).fold(0.0, f64::max);
        Ok(MetricSchedule {
            dim,
            alpha_bound: alpha,
            mu_bound: mu,
            summable: true,
            kind: ScheduleKind::Table {
                metrics: weights,
                etas,
                reverse,
            },
        })
    }

    /// Block-diagonal schedule on a direct sum. Bounds and slacks are the
    /// worst case over the blocks.
    pub fn stacked(blocks: Vec<MetricSchedule>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("stacked schedule needs blocks".into()));
        }
        Ok(MetricSchedule {
            dim: blocks.iter().map(|b| b.dim).sum(),
            alpha_bound: blocks.iter().map(|b| b.alpha_bound).fold(f64::INFINITY, f64::min),
            mu_bound: blocks.iter().map(|b| b.mu_bound).fold(0.0, f64::max),
            summable: blocks.iter().all(|b| b.summable),
            kind: ScheduleKind::Stacked(blocks),
        })
    }

    /// Arbitrary generator with declared bounds; nothing is assumed about
    /// the generator until [`schedule_validate`] checks it.
    pub fn from_fn(
        dim: usize,
        alpha_bound: f64,
        mu_bound: f64,
        summable: bool,
        weights: impl Fn(usize) -> Vec<f64> + Send + Sync + 'static,
        eta: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        MetricSchedule {
            dim,
            alpha_bound,
            mu_bound,
            summable,
            kind: ScheduleKind::Custom {
                weights: Arc::new(weights),
                eta: Arc::new(eta),
                reverse: None,
            },
        }
    }

    /// Declares a reverse slack sequence `ν_n` with `(1 + ν_n)·U_n ≽ U_{n+1}`
    /// for a schedule built with [`MetricSchedule::from_fn`].
    pub fn with_reverse_slack(mut self, nu: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        if let ScheduleKind::Custom { reverse, .. } = &mut self.kind {
            *reverse = Some(Arc::new(nu));
        }
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScheduleKind::Constant(_) => "constant",
            ScheduleKind::Geometric { .. } => "geometric",
            ScheduleKind::Table { .. } => "table",
            ScheduleKind::Stacked(_) => "stacked",
            ScheduleKind::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha_bound(&self) -> f64 {
        self.alpha_bound
    }

    /// Declared `μ ≥ sup_n ‖U_n‖`.
    pub fn mu_bound(&self) -> f64 {
        self.mu_bound
    }

    pub fn declared_summable(&self) -> bool {
        self.summable
    }

    /// Raw weights of `U_n` (not checked against the bounds).
    pub fn weights_at(&self, n: usize) -> Vec<f64> {
        match &self.kind {
            ScheduleKind::Constant(w) => w.clone(),
            ScheduleKind::Geometric { c, rho, direction } => {
                let scale = c * rho.powi(n.min(i32::MAX as usize) as i32);
                direction.iter().map(|d| 1.0 + scale * d).collect()
            }
            ScheduleKind::Table { metrics, .. } => metrics[n.min(metrics.len() - 1)].clone(),
            ScheduleKind::Stacked(blocks) => {
                blocks.iter().flat_map(|b| b.weights_at(n)).collect()
            }
            ScheduleKind::Custom { weights, .. } => weights(n),
        }
    }

    /// `U_n`, failing if it leaves `P_α` or exceeds the declared `μ`.
    pub fn metric(&self, n: usize) -> Result<DiagonalMetric> {
        let w = self.weights_at(n);
        check_dim("metric schedule", self.dim, w.len())?;
        if let Some(v) = self.point_violations(n, &w).into_iter().next() {
            return Err(v.into_error());
        }
        Ok(DiagonalMetric {
            weights: w,
            alpha_bound: self.alpha_bound,
        })
    }

    /// Chain slack `η_n`.
    pub fn eta(&self, n: usize) -> f64 {
        match &self.kind {
            ScheduleKind::Constant(_) => 0.0,
            ScheduleKind::Geometric { .. } => {
                smallest_slack(&self.weights_at(n + 1), &self.weights_at(n))
            }
            ScheduleKind::Table { etas, .. } => etas.get(n).copied().unwrap_or(0.0),
            ScheduleKind::Stacked(blocks) => blocks.iter().map(|b| b.eta(n)).fold(0.0, f64::max),
            ScheduleKind::Custom { eta, .. } => eta(n),
        }
    }

    /// Reverse slack `ν_n` with `(1 + ν_n)·U_n ≽ U_{n+1}`, when declared.
    pub fn reverse_eta(&self, n: usize) -> Option<f64> {
        match &self.kind {
            ScheduleKind::Constant(_) | ScheduleKind::Geometric { .. } => Some(0.0),
            ScheduleKind::Table { reverse, .. } => {
                reverse.as_ref().map(|r| r.get(n).copied().unwrap_or(0.0))
            }
            ScheduleKind::Stacked(blocks) => blocks
                .iter()
                .map(|b| b.reverse_eta(n))
                .try_fold(0.0, |acc, v| v.map(|v| f64::max(acc, v))),
            ScheduleKind::Custom { reverse, .. } => reverse.as_ref().map(|r| r(n)),
        }
    }

    fn point_violations(&self, n: usize, w: &[f64]) -> Vec<Violation> {
        let mut out = Vec::new();
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max <= self.mu_bound + LOEWNER_TOL) {
            let component = w.iter().position(|x| *x == max).unwrap_or(0);
            out.push(Violation {
                n,
                component,
                kind: ViolationKind::Mu { weight: max },
            });
        }
        for (j, &x) in w.iter().enumerate() {
            if !(x >= self.alpha_bound - LOEWNER_TOL) {
                out.push(Violation {
                    n,
                    component: j,
                    kind: ViolationKind::Alpha { weight: x },
                });
            }
        }
        out
    }

    /// Checks step `n` of a run: bounds on `U_n` and the chain to `U_{n+1}`.
    pub fn check_step(&self, n: usize) -> Result<()> {
        let current = self.weights_at(n);
        let next = self.weights_at(n + 1);
        check_dim("metric schedule", self.dim, current.len())?;
        check_dim("metric schedule", self.dim, next.len())?;
        if let Some(v) = self.point_violations(n, &current).into_iter().next() {
            return Err(v.into_error());
        }
        if let Some(j) = weights_dominate(&next, &current, self.eta(n)) {
            return Err(Violation {
                n,
                component: j,
                kind: ViolationKind::Chain,
            }
            .into_error());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// `(1 + η_n)·U_{n+1} ≽ U_n` fails.
    Chain,
    /// `(1 + ν_n)·U_n ≽ U_{n+1}` fails.
    ReverseChain,
    /// Weight exceeds the declared `μ`.
    Mu { weight: f64 },
    /// Weight below the declared `α`.
    Alpha { weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub n: usize,
    pub component: usize,
    pub kind: ViolationKind,
}

impl Violation {
    fn into_error(self) -> Error {
        let message = match self.kind {
            ViolationKind::Chain => "(1 + eta_n) U_{n+1} >= U_n fails".to_string(),
            ViolationKind::ReverseChain => "(1 + nu_n) U_n >= U_{n+1} fails".to_string(),
            ViolationKind::Mu { weight } => format!("weight {weight} exceeds declared mu"),
            ViolationKind::Alpha { weight } => format!("weight {weight} below declared alpha"),
        };
        Error::ScheduleViolation {
            n: self.n,
            component: self.component,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn chain_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Chain)
    }
}

/// Checks the schedule on the prefix `n = 0..n_max`.
///
/// At most one chain violation (the first offending component) is recorded
/// per index; bound violations are recorded per component.
pub fn schedule_validate(schedule: &MetricSchedule, n_max: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let mut current = schedule.weights_at(0);
    for n in 0..n_max {
        let next = schedule.weights_at(n + 1);
        if current.len() != schedule.dim || next.len() != schedule.dim {
            violations.push(Violation {
                n,
                component: 0,
                kind: ViolationKind::Alpha { weight: f64::NAN },
            });
            current = next;
            continue;
        }
        violations.extend(schedule.point_violations(n, &current));
        if let Some(j) = weights_dominate(&next, &current, schedule.eta(n)) {
            violations.push(Violation {
                n,
                component: j,
                kind: ViolationKind::Chain,
            });
        }
        if let Some(nu) = schedule.reverse_eta(n) {
            if let Some(j) = weights_dominate(&current, &next, nu) {
                violations.push(Violation {
                    n,
                    component: j,
                    kind: ViolationKind::ReverseChain,
                });
            }
        }
        current = next;
    }
    ValidationReport {
        checked: n_max,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(w: &[f64]) -> DiagonalMetric {
        DiagonalMetric::from_weights(w.to_vec()).unwrap()
    }

    fn p(c: &[f64]) -> Point {
        Point::from(c.to_vec())
    }

    #[test]
    fn inner_examples() {
        let id = DiagonalMetric::identity(2);
        assert_eq!(metric_inner(&id, &p(&[3.0, 4.0]), &p(&[3.0, 4.0])).unwrap(), 25.0);
        assert_eq!(metric_inner(&diag(&[2.0, 8.0]), &p(&[1.0, 1.0]), &p(&[1.0, 1.0])).unwrap(), 10.0);
        assert_eq!(metric_inner(&diag(&[2.0, 8.0]), &p(&[0.0, 0.0]), &p(&[5.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(metric_norm(&DiagonalMetric::identity(2), &p(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(metric_norm(&diag(&[4.0, 4.0]), &p(&[1.0, 0.0])).unwrap(), 2.0);
        let v = metric_norm(&diag(&[2.0, 8.0]), &p(&[1.0, 1.0])).unwrap();
        assert!((v - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let id = DiagonalMetric::identity(2);
        assert!(matches!(
            metric_inner(&id, &p(&[1.0]), &p(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(metric_norm(&id, &p(&[1.0, 2.0, 3.0])).is_err());
        assert!(loewner_geq(&id, &DiagonalMetric::identity(3), 0.0).is_err());
    }

    #[test]
    fn metric_rejects_weights_below_alpha() {
        assert!(DiagonalMetric::new(vec![1.0, 0.5], 0.75).is_err());
        assert!(DiagonalMetric::new(vec![1.0, 0.5], 0.0).is_err());
        assert!(DiagonalMetric::new(vec![1.0, 0.5], 0.5).is_ok());
    }

    #[test]
    fn loewner_examples() {
        let m = diag(&[1.5, 2.0]);
        assert!(loewner_geq(&m, &m, 0.0).unwrap());
        let m1 = diag(&[1.0, 1.0]);
        let m2 = diag(&[2.0, 1.0]);
        assert!(!loewner_geq(&m1, &m2, 0.0).unwrap());
        assert!(loewner_geq(&m1, &m2, 1.0).unwrap());
        assert!(loewner_geq(&diag(&[3.0, 3.0]), &DiagonalMetric::identity(2), 0.0).unwrap());
    }

    #[test]
    fn constant_schedule_validates() {
        let s = MetricSchedule::identity(3);
        assert!(schedule_validate(&s, 10_000).is_admissible());
    }

    #[test]
    fn decreasing_schedule_without_slack_is_rejected() {
        // U_n = 1 + 2^{-n}; the violation is representable while 2^{-n-1} > 1e-14.
        let s = MetricSchedule::from_fn(
            1,
            1.0,
            2.0,
            true,
            |n| vec![1.0 + 0.5f64.powi(n as i32)],
            |_| 0.0,
        );
        let report = schedule_validate(&s, 40);
        let chain: Vec<usize> = report.chain_violations().map(|v| v.n).collect();
        assert_eq!(chain, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn decreasing_schedule_with_slack_passes() {
        let s = MetricSchedule::from_fn(
            1,
            1.0,
            2.0,
            true,
            |n| vec![1.0 + 0.5f64.powi(n as i32)],
            |n| 0.5f64.powi(n as i32 + 1),
        );
        assert!(schedule_validate(&s, 200).is_admissible());
    }

    #[test]
    fn geometric_schedule_validates() {
        let s = MetricSchedule::geometric(1.0, 0.5, vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(s.mu_bound(), 4.0);
        let report = schedule_validate(&s, 10_000);
        assert!(report.is_admissible(), "{:?}", &report.violations[..1]);
        let total: f64 = (0..200).map(|n| s.eta(n)).sum();
        assert!(total < 2.0);
    }

    #[test]
    fn mu_and_alpha_violations_are_reported() {
        let s = MetricSchedule::from_fn(2, 1.0, 2.0, true, |n| vec![0.5, 1.0 + n as f64], |_| 0.0);
        let report = schedule_validate(&s, 3);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::Alpha { .. }) && v.component == 0));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::Mu { .. }) && v.n == 2));
    }

    #[test]
    fn reverse_chain_is_checked_when_declared() {
        let increasing = MetricSchedule::from_fn(
            1,
            1.0,
            3.0,
            true,
            |n| vec![2.0 - 0.5f64.powi(n as i32)],
            |_| 0.0,
        )
        .with_reverse_slack(|_| 0.0);
        let report = schedule_validate(&increasing, 5);
        assert!(report
            .violations
            .iter()
            .all(|v| v.kind == ViolationKind::ReverseChain));
        assert_eq!(report.violations.len(), 5);
    }

    #[test]
    fn table_schedule_derives_slack() {
        let t = MetricSchedule::table(
            vec![diag(&[2.0, 1.0]), diag(&[1.5, 1.0]), diag(&[1.0, 1.0])],
            None,
            None,
        )
        .unwrap();
        assert!((t.eta(0) - (2.0 / 1.5 - 1.0)).abs() < 1e-15);
        assert_eq!(t.eta(5), 0.0);
        assert!(schedule_validate(&t, 100).is_admissible());
        assert_eq!(t.weights_at(50), vec![1.0, 1.0]);
    }

    #[test]
    fn check_step_names_index_and_component() {
        let s = MetricSchedule::from_fn(2, 1.0, 5.0, true, |n| vec![1.0, 4.0 - n as f64], |_| 0.0);
        match s.check_step(0) {
            Err(Error::ScheduleViolation { n, component, .. }) => {
                assert_eq!((n, component), (0, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stacked_schedule_combines_blocks() {
        let s = MetricSchedule::stacked(vec![
            MetricSchedule::identity(1),
            MetricSchedule::geometric(2.0, 0.5, vec![1.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.mu_bound(), 3.0);
        assert_eq!(s.weights_at(1), vec![1.0, 2.0]);
        assert!(s.eta(0) > 0.0);
        assert!(schedule_validate(&s, 1000).is_admissible());
    }

    fn metric_strategy(dim: usize) -> impl Strategy<Value = DiagonalMetric> {
        prop::collection::vec(0.1f64..10.0, dim).prop_map(|w| DiagonalMetric::from_weights(w).unwrap())
    }

    fn point_strategy(dim: usize) -> impl Strategy<Value = Point> {
        prop::collection::vec(-100.0f64..100.0, dim).prop_map(Point::from)
    }

    proptest! {
        #[test]
        fn norm_squared_matches_inner(m in metric_strategy(4), x in point_strategy(4)) {
            let n = metric_norm(&m, &x).unwrap();
            let i = metric_inner(&m, &x, &x).unwrap();
            prop_assert!((n * n - i).abs() <= 1e-12 * i.max(1e-300));
        }

        #[test]
        fn metric_cauchy_schwarz(m in metric_strategy(4), x in point_strategy(4), y in point_strategy(4)) {
            let lhs = metric_inner(&m, &x, &y).unwrap().abs();
            let rhs = metric_norm(&m, &x).unwrap() * metric_norm(&m, &y).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn metric_norm_bounds(m in metric_strategy(3), x in point_strategy(3)) {
            let n = metric_norm(&m, &x).unwrap();
            let e = x.norm();
            prop_assert!(m.alpha_bound().sqrt() * e <= n * (1.0 + 1e-12) + 1e-300);
            prop_assert!(n <= m.max_weight().sqrt() * e * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn loewner_antisymmetry(a in metric_strategy(3), b in metric_strategy(3)) {
            if loewner_geq(&a, &b, 0.0).unwrap() && loewner_geq(&b, &a, 0.0).unwrap() {
                for (x, y) in a.weights().iter().zip(b.weights()) {
                    prop_assert!((x - y).abs() <= 2.0 * LOEWNER_TOL);
                }
            }
            prop_assert!(loewner_geq(&a, &a, 0.0).unwrap());
        }
    }
}
