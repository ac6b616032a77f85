//! Variable-metric forward–backward–forward iteration.
//!
//! Finds a zero of `A + B` with `A` maximally monotone (resolvent access)
//! and `B` monotone and `β`-Lipschitzian. One step reads
//!
//! ```text
//! y_n     = x_n − γ_n U_n (B x_n + a_n)
//! p_n     = J_{γ_n U_n A}(y_n) + b_n
//! q_n     = p_n − γ_n U_n (B p_n + c_n)
//! x_{n+1} = x_n − y_n + q_n
//! ```
//!
//! with `γ_n ∈ [ε, (1 − ε)/(βμ)]` and errors `a_n, b_n, c_n`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::metric::{metric_norm, DiagonalMetric, MetricSchedule};
use crate::operators::LipschitzMonotoneMap;
use crate::point::Point;
use crate::resolvent::ResolventOracle;

/// Iterates whose norm exceeds this abort the run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Slack allowed by the Fejér certificate on top of the theoretical bound.
pub const FEJER_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FbfProblem {
    pub a: Arc<dyn ResolventOracle>,
    pub b: Arc<dyn LipschitzMonotoneMap>,
    pub dimension: usize,
    /// A point of `zer(A + B)`, used by certificates only.
    pub known_zero: Option<Point>,
}

impl FbfProblem {
    pub fn new(
        a: Arc<dyn ResolventOracle>,
        b: Arc<dyn LipschitzMonotoneMap>,
        dimension: usize,
    ) -> Result<Self> {
        check_dim("operator B", dimension, b.dim())?;
        if let Some(d) = a.dim() {
            check_dim("operator A", dimension, d)?;
        }
        let beta = b.lipschitz_constant();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant of B must be positive, got {beta}"
            )));
        }
        Ok(FbfProblem {
            a,
            b,
            dimension,
            known_zero: None,
        })
    }

    pub fn with_known_zero(mut self, zero: Point) -> Result<Self> {
        check_dim("known zero", self.dimension, zero.dim())?;
        self.known_zero = Some(zero);
        Ok(self)
    }

    pub fn beta(&self) -> f64 {
        self.b.lipschitz_constant()
    }
}

/// A perturbation sequence `(e_n)`.
#[derive(Clone)]
pub enum ErrorSequence {
    Zero,
    /// `e_n = ratio^n · scale`
    Geometric { scale: Point, ratio: f64 },
    /// `e_n = scale / (n + 1)`; not summable.
    Harmonic { scale: Point },
    /// Listed values, zero afterwards.
    Table(Vec<Point>),
    /// Direct sum of sequences, each with its dimension and a sign.
    Stacked(Vec<(ErrorSequence, usize, f64)>),
    Custom {
        f: Arc<dyn Fn(usize) -> Point + Send + Sync>,
        summable: bool,
    },
}

impl fmt::Debug for ErrorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSequence::Zero => write!(f, "Zero"),
            ErrorSequence::Geometric { scale, ratio } => f
                .debug_struct("Geometric")
                .field("scale", scale)
                .field("ratio", ratio)
                .finish(),
            ErrorSequence::Harmonic { scale } => {
                f.debug_struct("Harmonic").field("scale", scale).finish()
            }
            ErrorSequence::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            ErrorSequence::Stacked(parts) => f
                .debug_list()
                .entries(parts.iter().map(|(s, d, sign)| (s, d, sign)))
                .finish(),
            ErrorSequence::Custom { summable, .. } => f
                .debug_struct("Custom")
                .field("summable", summable)
                .finish(),
        }
    }
}

impl ErrorSequence {
    pub fn custom(summable: bool, f: impl Fn(usize) -> Point + Send + Sync + 'static) -> Self {
        ErrorSequence::Custom {
            f: Arc::new(f),
            summable,
        }
    }

    /// `e_n`, or `None` when it is exactly zero.
    pub fn at(&self, n: usize) -> Option<Point> {
        match self {
            ErrorSequence::Zero => None,
            ErrorSequence::Geometric { scale, ratio } => {
                Some(ratio.powi(n.min(i32::MAX as usize) as i32) * scale)
            }
            ErrorSequence::Harmonic { scale } => Some((1.0 / (n as f64 + 1.0)) * scale),
            ErrorSequence::Table(values) => values.get(n).cloned(),
            ErrorSequence::Stacked(parts) => {
                let blocks: Vec<(Option<Point>, usize, f64)> =
                    parts.iter().map(|(s, d, sign)| (s.at(n), *d, *sign)).collect();
                if blocks.iter().all(|(b, _, _)| b.is_none()) {
                    return None;
                }
                let filled: Vec<Point> = blocks
                    .into_iter()
                    .map(|(b, d, sign)| match b {
                        Some(p) if sign == 1.0 => p,
                        Some(p) => sign * &p,
                        None => Point::zeros(d),
                    })
                    .collect();
                Some(Point::concat(filled.iter()))
            }
            ErrorSequence::Custom { f, .. } => Some(f(n)),
        }
    }

    pub fn declared_summable(&self) -> bool {
        match self {
            ErrorSequence::Zero | ErrorSequence::Table(_) => true,
            ErrorSequence::Geometric { ratio, .. } => ratio.abs() < 1.0,
            ErrorSequence::Harmonic { .. } => false,
            ErrorSequence::Stacked(parts) => parts.iter().all(|(s, _, _)| s.declared_summable()),
            ErrorSequence::Custom { summable, .. } => *summable,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ErrorSequence::Zero => true,
            ErrorSequence::Table(t) => t.is_empty(),
            ErrorSequence::Stacked(parts) => parts.iter().all(|(s, _, _)| s.is_zero()),
            _ => false,
        }
    }

    fn check_dim(&self, dim: usize, slot: &str) -> Result<()> {
        match self {
            ErrorSequence::Geometric { scale, .. } | ErrorSequence::Harmonic { scale } => {
                check_dim(slot, dim, scale.dim())
            }
            ErrorSequence::Table(values) => values
                .iter()
                .try_for_each(|v| check_dim(slot, dim, v.dim())),
            ErrorSequence::Stacked(parts) => {
                check_dim(slot, dim, parts.iter().map(|(_, d, _)| d).sum())
            }
            ErrorSequence::Zero | ErrorSequence::Custom { .. } => Ok(()),
        }
    }
}

/// Errors `(a_n, b_n, c_n)` injected into the forward, backward and
/// second forward steps.
#[derive(Debug, Clone)]
pub struct ErrorSchedule {
    pub a: ErrorSequence,
    pub b: ErrorSequence,
    pub c: ErrorSequence,
}

impl Default for ErrorSchedule {
    fn default() -> Self {
        Self::zero()
    }
}

impl ErrorSchedule {
    pub fn zero() -> Self {
        ErrorSchedule {
            a: ErrorSequence::Zero,
            b: ErrorSequence::Zero,
            c: ErrorSequence::Zero,
        }
    }

    /// The same sequence in all three slots.
    pub fn uniform(seq: ErrorSequence) -> Self {
        ErrorSchedule {
            a: seq.clone(),
            b: seq.clone(),
            c: seq,
        }
    }

    pub fn declared_summable(&self) -> bool {
        self.a.declared_summable() && self.b.declared_summable() && self.c.declared_summable()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        self.a.check_dim(dim, "error sequence a")?;
        self.b.check_dim(dim, "error sequence b")?;
        self.c.check_dim(dim, "error sequence c")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaRule {
    Constant(f64),
    /// `γ_n = (1 − ε)/(βμ)`
    MaxAdmissible,
    /// Listed step sizes; the last one is held afterwards.
    Table(Vec<f64>),
}

/// The admissible step-size interval `[ε, (1 − ε)/(βμ)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GammaInterval {
    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.lo && gamma <= self.hi
    }
}

/// Step-size bounds for given `β`, `μ` and `ε ∈ (0, 1/(βμ + 1))`.
pub fn gamma_bounds(beta: f64, mu: f64, epsilon: f64) -> Result<GammaInterval> {
    if !(beta > 0.0 && beta.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!(
            "beta and mu must be positive and finite (beta = {beta}, mu = {mu})"
        )));
    }
    let sup = 1.0 / (beta * mu + 1.0);
    if !(epsilon > 0.0 && epsilon < sup) {
        return Err(Error::Config(format!(
            "epsilon = {epsilon} must lie in (0, {sup}) = (0, 1/(beta*mu + 1))"
        )));
    }
    Ok(GammaInterval {
        lo: epsilon,
        hi: (1.0 - epsilon) / (beta * mu),
    })
}

impl GammaRule {
    pub fn gamma(&self, n: usize, bounds: GammaInterval) -> Result<f64> {
        let g = match self {
            GammaRule::Constant(g) => *g,
            GammaRule::MaxAdmissible => bounds.hi,
            GammaRule::Table(values) => *values
                .get(n)
                .or(values.last())
                .ok_or_else(|| Error::Config("empty step-size table".into()))?,
        };
        if !bounds.contains(g) {
            return Err(Error::Config(format!(
                "step size gamma_{n} = {g} outside [{}, {}]",
                bounds.lo, bounds.hi
            )));
        }
        Ok(g)
    }

    pub(crate) fn validate(&self, bounds: GammaInterval) -> Result<()> {
        match self {
            GammaRule::Table(values) => {
                if values.is_empty() {
                    return Err(Error::Config("empty step-size table".into()));
                }
                for n in 0..values.len() {
                    self.gamma(n, bounds)?;
                }
                Ok(())
            }
            _ => self.gamma(0, bounds).map(|_| ()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FbfConfig {
    pub schedule: MetricSchedule,
    pub epsilon: f64,
    pub gamma_rule: GammaRule,
    pub errors: ErrorSchedule,
    pub initial: Point,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub record_trace: bool,
}

impl FbfConfig {
    /// Defaults: `ε = 0.01`, largest admissible step, no errors,
    /// 10 000 iterations, tolerance `1e-10`, trace recorded.
    pub fn new(schedule: MetricSchedule, initial: Point) -> Self {
        FbfConfig {
            schedule,
            epsilon: 0.01,
            gamma_rule: GammaRule::MaxAdmissible,
            errors: ErrorSchedule::zero(),
            initial,
            max_iter: 10_000,
            stop_tol: 1e-10,
            record_trace: true,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_gamma(mut self, rule: GammaRule) -> Self {
        self.gamma_rule = rule;
        self
    }

    pub fn with_errors(mut self, errors: ErrorSchedule) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn with_record_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn gamma_interval(&self, beta: f64) -> Result<GammaInterval> {
        gamma_bounds(beta, self.schedule.mu_bound(), self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbfStep {
    pub x_next: Point,
    pub p: Point,
    pub y: Point,
    pub q: Point,
}

/// `x − γ U v`
pub(crate) fn forward(x: &Point, gamma: f64, metric: &DiagonalMetric, v: &Point) -> Point {
    Point::from(
        x.iter()
            .zip(metric.weights())
            .zip(v.iter())
            .map(|((xj, uj), vj)| xj - gamma * uj * vj)
            .collect::<Vec<_>>(),
    )
}

fn add_error(v: Point, e: Option<Point>) -> Point {
    match e {
        Some(e) => &v + &e,
        None => v,
    }
}

/// One iteration with explicit step size, metric and errors.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_with(
    a: &dyn ResolventOracle,
    b: &dyn LipschitzMonotoneMap,
    x: &Point,
    gamma: f64,
    metric: &DiagonalMetric,
    err_a: Option<Point>,
    err_b: Option<Point>,
    err_c: Option<Point>,
) -> Result<FbfStep> {
    let y = forward(x, gamma, metric, &add_error(b.apply(x), err_a));
    let p = add_error(a.resolve(gamma, metric, &y)?, err_b);
    let q = forward(&p, gamma, metric, &add_error(b.apply(&p), err_c));
    let x_next = &(x - &y) + &q;
    Ok(FbfStep { x_next, p, y, q })
}

/// One step from `x` at index `n`.
pub fn fbf_step(x: &Point, n: usize, problem: &FbfProblem, config: &FbfConfig) -> Result<FbfStep> {
    check_dim("iterate", problem.dimension, x.dim())?;
    check_dim("metric schedule", problem.dimension, config.schedule.dim())?;
    let bounds = config.gamma_interval(problem.beta())?;
    let gamma = config.gamma_rule.gamma(n, bounds)?;
    let metric = config.schedule.metric(n)?;
    step_with(
        problem.a.as_ref(),
        problem.b.as_ref(),
        x,
        gamma,
        &metric,
        config.errors.a.at(n),
        config.errors.b.at(n),
        config.errors.c.at(n),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIter,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Converged => write!(f, "converged"),
            RunStatus::MaxIter => write!(f, "max_iter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub gamma: f64,
    /// `‖x_n − p_n‖` (primal block only for primal–dual runs).
    pub primal_residual: f64,
    /// `(Σ_i ‖v_{i,n} − p_{2,i,n}‖²)^{1/2}` for primal–dual runs.
    pub dual_residual: Option<f64>,
    /// `‖y_n − q_n‖`
    pub shadow_residual: f64,
    /// `‖x_n − x̄‖_{U_n^{-1}}` when a zero is known.
    pub metric_distance: Option<f64>,
    /// Running sum of squared residuals up to and including `n`.
    pub cumulative_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub rows: Vec<IterationRecord>,
    pub final_x: Point,
    pub final_p: Point,
    pub status: RunStatus,
    /// Index of the last evaluated step.
    pub iterations: usize,
    pub cumulative_sq: f64,
    pub errors_summable: bool,
    pub beta: f64,
    pub mu: f64,
    pub gamma_interval: GammaInterval,
}

impl IterateTrace {
    pub fn final_residual(&self) -> Option<&IterationRecord> {
        self.rows.last()
    }
}

/// Shared iteration driver for the direct and primal–dual solvers.
pub(crate) struct TraceBuilder {
    record: bool,
    rows: Vec<IterationRecord>,
    cumulative: f64,
    last: Option<IterationRecord>,
}

impl TraceBuilder {
    pub(crate) fn new(record: bool) -> Self {
        TraceBuilder {
            record,
            rows: Vec::new(),
            cumulative: 0.0,
            last: None,
        }
    }

    pub(crate) fn push(&mut self, mut row: IterationRecord) {
        self.cumulative += row.primal_residual.powi(2) + row.dual_residual.map_or(0.0, |d| d * d);
        row.cumulative_sq = self.cumulative;
        if self.record {
            self.rows.push(row.clone());
        }
        self.last = Some(row);
    }

    pub(crate) fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub(crate) fn into_rows(self) -> Vec<IterationRecord> {
        self.rows
    }
}

pub(crate) fn divergence_check(n: usize, x: &Point) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || norm > DIVERGENCE_BOUND {
        return Err(Error::Divergence { n, norm });
    }
    Ok(())
}

/// Runs the iteration until `‖x_n − p_n‖ ≤ stop_tol` or `max_iter` steps.
pub fn fbf_solve(problem: &FbfProblem, config: &FbfConfig) -> Result<IterateTrace> {
    let dim = problem.dimension;
    check_dim("initial point", dim, config.initial.dim())?;
    check_dim("metric schedule", dim, config.schedule.dim())?;
    config.errors.check_dim(dim)?;
    if !config.initial.is_finite() {
        return Err(Error::InvalidArgument("initial point is not finite".into()));
    }
    if !(config.stop_tol >= 0.0) {
        return Err(Error::Config(format!("stop tolerance must be >= 0, got {}", config.stop_tol)));
    }
    let beta = problem.beta();
    let bounds = config.gamma_interval(beta)?;
    config.gamma_rule.validate(bounds)?;

    let mut trace = TraceBuilder::new(config.record_trace);
    let mut x = config.initial.clone();
    let mut final_p = x.clone();
    let mut status = RunStatus::MaxIter;
    let mut iterations = config.max_iter;
    for n in 0..config.max_iter {
        config.schedule.check_step(n)?;
        let metric = config.schedule.metric(n)?;
        let gamma = config.gamma_rule.gamma(n, bounds)?;
        let step = step_with(
            problem.a.as_ref(),
            problem.b.as_ref(),
            &x,
            gamma,
            &metric,
            config.errors.a.at(n),
            config.errors.b.at(n),
            config.errors.c.at(n),
        )?;
        let residual = x.distance(&step.p);
        if !residual.is_finite() {
            return Err(Error::Divergence { n, norm: residual });
        }
        let distance = match &problem.known_zero {
            Some(z) => Some(metric_norm(&metric.inverse(), &(&x - z))?),
            None => None,
        };
        trace.push(IterationRecord {
            n,
            gamma,
            primal_residual: residual,
            dual_residual: None,
            shadow_residual: step.y.distance(&step.q),
            metric_distance: distance,
            cumulative_sq: 0.0,
        });
        final_p = step.p;
        if residual <= config.stop_tol {
            status = RunStatus::Converged;
            iterations = n;
            break;
        }
        x = step.x_next;
        divergence_check(n + 1, &x)?;
    }
    let cumulative = trace.cumulative();
    Ok(IterateTrace {
        rows: trace.into_rows(),
        final_x: x,
        final_p,
        status,
        iterations,
        cumulative_sq: cumulative,
        errors_summable: config.errors.declared_summable(),
        beta,
        mu: config.schedule.mu_bound(),
        gamma_interval: bounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FejerCertificate {
    pub checked: usize,
    /// Indices `n` where the bound on `‖x_{n+1} − x̄‖_{U_{n+1}^{-1}}` fails.
    pub violations: Vec<usize>,
    /// Largest observed `lhs − rhs` (negative when every step has room).
    pub max_excess: f64,
    /// `Σ ε_n` over the checked steps.
    pub total_error_bound: f64,
    pub total_eta: f64,
}

impl FejerCertificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies `‖x_{n+1} − x̄‖_{U_{n+1}^{-1}} ≤ (1 + η_n)‖x_n − x̄‖_{U_n^{-1}} + ε_n`
/// along a recorded trace, with `ε_n` built from the measured error norms:
///
/// `ε_n = √(μ/α)·(2(‖b_n‖_{U_n^{-1}} + ‖a_n‖_{U_n}/(βμ)) + ‖c_n‖_{U_n}/(βμ) + ‖a_n‖_{U_n}/(βμ))`.
pub fn fejer_certificate(
    trace: &IterateTrace,
    problem: &FbfProblem,
    config: &FbfConfig,
) -> Result<FejerCertificate> {
    if problem.known_zero.is_none() {
        return Err(Error::Precondition("Fejér certificate needs a known zero".into()));
    }
    let distances: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| r.metric_distance)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Precondition("trace lacks metric distances".into()))?;
    let beta = problem.beta();
    let mu = config.schedule.mu_bound();
    let alpha = config.schedule.alpha_bound();
    let scale = (mu / alpha).sqrt();
    let inv_bm = 1.0 / (beta * mu);

    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut total_eps = 0.0;
    let mut total_eta = 0.0;
    for (k, pair) in distances.windows(2).enumerate() {
        let n = trace.rows[k].n;
        let metric = config.schedule.metric(n)?;
        let inv = metric.inverse();
        let norm_u = |e: Option<Point>| -> Result<f64> {
            e.map_or(Ok(0.0), |e| metric_norm(&metric, &e))
        };
        let a = norm_u(config.errors.a.at(n))?;
        let c = norm_u(config.errors.c.at(n))?;
        let b = config.errors.b.at(n).map_or(Ok(0.0), |e| metric_norm(&inv, &e))?;
        let eps_n = scale * (2.0 * (b + inv_bm * a) + inv_bm * c + inv_bm * a);
        let eta_n = config.schedule.eta(n);
        total_eps += eps_n;
        total_eta += eta_n;
        let rhs = (1.0 + eta_n) * pair[0] + eps_n;
        let excess = pair[1] - rhs;
        max_excess = max_excess.max(excess);
        if excess > FEJER_TOL * (1.0 + pair[0]) {
            violations.push(n);
        }
    }
    Ok(FejerCertificate {
        checked: distances.len().saturating_sub(1),
        violations,
        max_excess,
        total_error_bound: total_eps,
        total_eta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityCertificate {
    pub rows: usize,
    /// `Σ_n ‖x_n − p_n‖²` (plus the dual analog for primal–dual traces).
    pub total: f64,
    /// Same sum restricted to `n ≥ N/2`.
    pub tail: f64,
    pub tail_fraction: f64,
    pub declared_summable: bool,
    /// `false` when the error hypothesis fails or the trace is shorter than 10 rows.
    pub claim_made: bool,
    /// Heuristic: tail above half of the total.
    pub suspected_divergence: bool,
}

/// Reports the square-summability of the stopping residual along a trace.
pub fn summability_certificate(trace: &IterateTrace) -> SummabilityCertificate {
    let sq = |r: &IterationRecord| r.primal_residual.powi(2) + r.dual_residual.map_or(0.0, |d| d * d);
    let total: f64 = trace.rows.iter().map(sq).sum();
    let half = trace.rows.len() / 2;
    let tail: f64 = trace.rows[half..].iter().map(sq).sum();
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    let claim_made = trace.errors_summable && trace.rows.len() >= 10;
    SummabilityCertificate {
        rows: trace.rows.len(),
        total,
        tail,
        tail_fraction,
        declared_summable: trace.errors_summable,
        claim_made,
        suspected_divergence: claim_made && tail > 0.5 * total,
    }
}
