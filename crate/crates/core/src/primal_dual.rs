//! Structured primal–dual inclusions.
//!
//! Primal problem: find `x` with
//! `z ∈ Ax + Σ_i L_i*((B_i □ D_i)(L_i x − r_i)) + Cx`,
//! where `A` and each `B_i` are maximally monotone (resolvent access),
//! `C` and each `D_i^{-1}` are monotone and Lipschitzian, and `L_i` are
//! bounded linear maps. The dual variables `v_i` live in the ranges of
//! the `L_i`.
//!
//! The iteration is the forward–backward–forward method on the product
//! space `H ⊕ G_1 ⊕ … ⊕ G_m` with block-diagonal metrics;
//! [`assemble_product`] builds that product instance explicitly.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::fbf::{
    divergence_check, fbf_step, forward, gamma_bounds, ErrorSchedule, ErrorSequence, FbfConfig,
    FbfProblem, GammaInterval, GammaRule, IterateTrace, IterationRecord, RunStatus, TraceBuilder,
};
use crate::linear::{operator_norm, LinearMap};
use crate::metric::{metric_norm, DiagonalMetric, MetricSchedule};
use crate::operators::LipschitzMonotoneMap;
use crate::point::Point;
use crate::resolvent::{inverse_resolvent_scaled, ResolventOracle};

/// Tolerance used for the `‖L_i‖` estimates inside `β`.
pub const NORM_TOL: f64 = 1e-10;
const NORM_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct DualBlock {
    pub r: Point,
    pub b: Arc<dyn ResolventOracle>,
    /// `D_i^{-1}`, with Lipschitz constant `ν_i`.
    pub d_inv: Arc<dyn LipschitzMonotoneMap>,
    /// `L_i : H → G_i`.
    pub l: LinearMap,
}

impl DualBlock {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }
}

#[derive(Debug, Clone)]
pub struct StructuredProblem {
    pub z: Point,
    pub a: Arc<dyn ResolventOracle>,
    /// `C`, with Lipschitz constant `ν_0`.
    pub c: Arc<dyn LipschitzMonotoneMap>,
    pub blocks: Vec<DualBlock>,
    /// A primal–dual solution, used by certificates only.
    pub known_solution: Option<PdState>,
}

impl StructuredProblem {
    pub fn new(
        z: Point,
        a: Arc<dyn ResolventOracle>,
        c: Arc<dyn LipschitzMonotoneMap>,
        blocks: Vec<DualBlock>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least one dual block is required".into()));
        }
        let n = z.dim();
        check_dim("C", n, c.dim())?;
        if let Some(d) = a.dim() {
            check_dim("A", n, d)?;
        }
        positive_constant("C", c.lipschitz_constant())?;
        for (i, blk) in blocks.iter().enumerate() {
            check_dim(&format!("blocks[{i}].L columns"), n, blk.l.cols())?;
            if blk.l.is_zero() {
                return Err(Error::InvalidArgument(format!("blocks[{i}].L is the zero map")));
            }
            let g = blk.dim();
            check_dim(&format!("blocks[{i}].r"), g, blk.r.dim())?;
            check_dim(&format!("blocks[{i}].D_inv"), g, blk.d_inv.dim())?;
            if let Some(d) = blk.b.dim() {
                check_dim(&format!("blocks[{i}].B"), g, d)?;
            }
            positive_constant(&format!("blocks[{i}].D_inv"), blk.d_inv.lipschitz_constant())?;
        }
        Ok(StructuredProblem {
            z,
            a,
            c,
            blocks,
            known_solution: None,
        })
    }

    pub fn with_known_solution(mut self, solution: PdState) -> Result<Self> {
        self.check_state(&solution, "known solution")?;
        self.known_solution = Some(solution);
        Ok(self)
    }

    pub fn primal_dim(&self) -> usize {
        self.z.dim()
    }

    pub fn dual_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(DualBlock::dim).collect()
    }

    /// Block sizes of the product space, primal first.
    pub fn block_sizes(&self) -> Vec<usize> {
        std::iter::once(self.primal_dim()).chain(self.dual_dims()).collect()
    }

    pub fn product_dim(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    fn check_state(&self, s: &PdState, what: &str) -> Result<()> {
        check_dim(&format!("{what} x"), self.primal_dim(), s.x.dim())?;
        check_dim(&format!("{what} dual blocks"), self.blocks.len(), s.v.len())?;
        for (i, (v, g)) in s.v.iter().zip(self.dual_dims()).enumerate() {
            check_dim(&format!("{what} v[{i}]"), g, v.dim())?;
        }
        Ok(())
    }
}

fn positive_constant(what: &str, nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant of {what} must be positive, got {nu}"
        )));
    }
    Ok(())
}

/// `β = max(ν_0, …, ν_m) + (Σ_i ‖L_i‖²)^{1/2}`, with safe (upper) estimates
/// of the norms.
pub fn beta_compute(problem: &StructuredProblem, tol: f64) -> Result<f64> {
    let nu = problem
        .blocks
        .iter()
        .map(|b| b.d_inv.lipschitz_constant())
        .fold(problem.c.lipschitz_constant(), f64::max);
    let mut sum_sq = 0.0;
    for blk in &problem.blocks {
        let est = operator_norm(&blk.l, tol, NORM_MAX_ITER)?;
        sum_sq += est.safe * est.safe;
    }
    Ok(nu + sum_sq.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub x: Point,
    pub v: Vec<Point>,
}

impl PdState {
    pub fn zeros(problem: &StructuredProblem) -> Self {
        PdState {
            x: Point::zeros(problem.primal_dim()),
            v: problem.dual_dims().into_iter().map(Point::zeros).collect(),
        }
    }

    /// `(x, v_1, …, v_m)` as one vector.
    pub fn to_product(&self) -> Point {
        Point::concat(std::iter::once(&self.x).chain(self.v.iter()))
    }

    pub fn from_product(w: &Point, sizes: &[usize]) -> Self {
        let mut parts = w.split(sizes).into_iter();
        let x = parts.next().expect("at least one block");
        PdState { x, v: parts.collect() }
    }
}

/// Errors in the primal and each dual block.
#[derive(Debug, Clone)]
pub struct PdErrors {
    pub primal: ErrorSchedule,
    pub dual: Vec<ErrorSchedule>,
}

impl PdErrors {
    pub fn zero(blocks: usize) -> Self {
        PdErrors {
            primal: ErrorSchedule::zero(),
            dual: vec![ErrorSchedule::zero(); blocks],
        }
    }

    pub fn declared_summable(&self) -> bool {
        self.primal.declared_summable() && self.dual.iter().all(ErrorSchedule::declared_summable)
    }
}

#[derive(Debug, Clone)]
pub struct PdConfig {
    pub primal_schedule: MetricSchedule,
    pub dual_schedules: Vec<MetricSchedule>,
    pub epsilon: f64,
    pub gamma_rule: GammaRule,
    pub errors: PdErrors,
    pub initial: PdState,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub record_trace: bool,
}

impl PdConfig {
    /// Identity metrics, zero start and the defaults of [`FbfConfig::new`].
    pub fn new(problem: &StructuredProblem) -> Self {
        PdConfig {
            primal_schedule: MetricSchedule::identity(problem.primal_dim()),
            dual_schedules: problem.dual_dims().into_iter().map(MetricSchedule::identity).collect(),
            epsilon: 0.01,
            gamma_rule: GammaRule::MaxAdmissible,
            errors: PdErrors::zero(problem.blocks.len()),
            initial: PdState::zeros(problem),
            max_iter: 10_000,
            stop_tol: 1e-10,
            record_trace: true,
        }
    }

    /// Block-diagonal schedule on the product space.
    pub fn stacked_schedule(&self) -> Result<MetricSchedule> {
        MetricSchedule::stacked(
            std::iter::once(self.primal_schedule.clone())
                .chain(self.dual_schedules.iter().cloned())
                .collect(),
        )
    }

    fn validate(&self, problem: &StructuredProblem) -> Result<()> {
        let m = problem.blocks.len();
        check_dim("dual metric schedules", m, self.dual_schedules.len())?;
        check_dim("dual error schedules", m, self.errors.dual.len())?;
        check_dim("primal metric schedule", problem.primal_dim(), self.primal_schedule.dim())?;
        self.errors.primal.check_dim(problem.primal_dim())?;
        for (i, g) in problem.dual_dims().into_iter().enumerate() {
            check_dim(&format!("blocks[{i}] metric schedule"), g, self.dual_schedules[i].dim())?;
            self.errors.dual[i].check_dim(g)?;
        }
        problem.check_state(&self.initial, "initial point")?;
        if !self.initial.to_product().is_finite() {
            return Err(Error::InvalidArgument("initial point is not finite".into()));
        }
        Ok(())
    }
}

/// All intermediate points of one primal–dual step.
#[derive(Debug, Clone, PartialEq)]
pub struct PdStep {
    pub next: PdState,
    pub y1: Point,
    pub p1: Point,
    pub q1: Point,
    pub y2: Vec<Point>,
    pub p2: Vec<Point>,
    pub q2: Vec<Point>,
}

impl PdStep {
    /// `(p_1, p_{2,1}, …, p_{2,m})`
    pub fn p_state(&self) -> PdState {
        PdState {
            x: self.p1.clone(),
            v: self.p2.clone(),
        }
    }
}

/// `y + sign·γ U s`
fn shift(y: &Point, gamma: f64, metric: &DiagonalMetric, s: &Point, sign: f64) -> Point {
    forward(y, -sign * gamma, metric, s)
}

fn plus(v: Point, e: Option<Point>) -> Point {
    match e {
        Some(e) => &v + &e,
        None => v,
    }
}

fn sum_adjoint(problem: &StructuredProblem, v: &[Point]) -> Point {
    problem
        .blocks
        .iter()
        .zip(v)
        .fold(Point::zeros(problem.primal_dim()), |acc, (blk, vi)| &acc + &blk.l.apply_adjoint(vi))
}

/// One primal–dual step at index `n` with step size `gamma`.
pub fn pd_step(
    state: &PdState,
    n: usize,
    gamma: f64,
    problem: &StructuredProblem,
    config: &PdConfig,
) -> Result<PdStep> {
    problem.check_state(state, "state")?;
    let u0 = config.primal_schedule.metric(n)?;
    let us = config
        .dual_schedules
        .iter()
        .map(|s| s.metric(n))
        .collect::<Result<Vec<_>>>()?;
    let err = &config.errors;

    let x = &state.x;
    let cx = problem.c.apply(x);
    let y1 = forward(x, gamma, &u0, &plus(&cx + &sum_adjoint(problem, &state.v), err.primal.a.at(n)));
    let p1 = plus(
        problem.a.resolve(gamma, &u0, &shift(&y1, gamma, &u0, &problem.z, 1.0))?,
        err.primal.b.at(n),
    );

    let mut y2 = Vec::with_capacity(problem.blocks.len());
    let mut p2 = Vec::with_capacity(problem.blocks.len());
    let mut q2 = Vec::with_capacity(problem.blocks.len());
    let mut v_next = Vec::with_capacity(problem.blocks.len());
    for (i, (blk, vi)) in problem.blocks.iter().zip(&state.v).enumerate() {
        let ui = &us[i];
        let ei = &err.dual[i];
        let g = &blk.l.apply(x) - &blk.d_inv.apply(vi);
        let y2i = shift(vi, gamma, ui, &plus(g, ei.a.at(n)), 1.0);
        let arg = shift(&y2i, gamma, ui, &blk.r, -1.0);
        let p2i = plus(inverse_resolvent_scaled(blk.b.as_ref(), gamma, ui, &arg)?, ei.b.at(n));
        let h = &blk.l.apply(&p1) - &blk.d_inv.apply(&p2i);
        let q2i = shift(&p2i, gamma, ui, &plus(h, ei.c.at(n)), 1.0);
        v_next.push(&(vi - &y2i) + &q2i);
        y2.push(y2i);
        p2.push(p2i);
        q2.push(q2i);
    }

    let cp = problem.c.apply(&p1);
    let q1 = forward(&p1, gamma, &u0, &plus(&cp + &sum_adjoint(problem, &p2), err.primal.c.at(n)));
    let x_next = &(x - &y1) + &q1;
    Ok(PdStep {
        next: PdState { x: x_next, v: v_next },
        y1,
        p1,
        q1,
        y2,
        p2,
        q2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdOutcome {
    /// Trace over the product space; `final_x` and `final_p` are stacked.
    pub trace: IterateTrace,
    pub state: PdState,
    pub p_state: PdState,
}

/// Step-size interval for the primal–dual run, `β` from [`beta_compute`].
pub fn pd_gamma_interval(problem: &StructuredProblem, config: &PdConfig) -> Result<(f64, GammaInterval)> {
    let beta = beta_compute(problem, NORM_TOL)?;
    let mu = config.stacked_schedule()?.mu_bound();
    Ok((beta, gamma_bounds(beta, mu, config.epsilon)?))
}

/// Runs the primal–dual iteration until the stacked residual
/// `(‖x − p_1‖² + Σ_i ‖v_i − p_{2,i}‖²)^{1/2}` is at most `stop_tol`.
pub fn pd_solve(problem: &StructuredProblem, config: &PdConfig) -> Result<PdOutcome> {
    config.validate(problem)?;
    let schedule = config.stacked_schedule()?;
    let (beta, bounds) = pd_gamma_interval(problem, config)?;
    config.gamma_rule.validate(bounds)?;
    let known = problem.known_solution.as_ref().map(PdState::to_product);

    let mut trace = TraceBuilder::new(config.record_trace);
    let mut state = config.initial.clone();
    let mut p_state = state.clone();
    let mut status = RunStatus::MaxIter;
    let mut iterations = config.max_iter;
    for n in 0..config.max_iter {
        schedule.check_step(n)?;
        let gamma = config.gamma_rule.gamma(n, bounds)?;
        let step = pd_step(&state, n, gamma, problem, config)?;
        let primal = state.x.distance(&step.p1);
        let dual = state
            .v
            .iter()
            .zip(&step.p2)
            .map(|(v, p)| (v - p).norm_sq())
            .sum::<f64>()
            .sqrt();
        let combined = primal.hypot(dual);
        if !combined.is_finite() {
            return Err(Error::Divergence { n, norm: combined });
        }
        let shadow = Point::concat(std::iter::once(&step.y1).chain(&step.y2))
            .distance(&Point::concat(std::iter::once(&step.q1).chain(&step.q2)));
        let distance = match &known {
            Some(k) => Some(metric_norm(&schedule.metric(n)?.inverse(), &(&state.to_product() - k))?),
            None => None,
        };
        trace.push(IterationRecord {
            n,
            gamma,
            primal_residual: primal,
            dual_residual: Some(dual),
            shadow_residual: shadow,
            metric_distance: distance,
            cumulative_sq: 0.0,
        });
        p_state = step.p_state();
        if combined <= config.stop_tol {
            status = RunStatus::Converged;
            iterations = n;
            break;
        }
        state = step.next;
        divergence_check(n + 1, &state.to_product())?;
    }
    let cumulative = trace.cumulative();
    Ok(PdOutcome {
        trace: IterateTrace {
            rows: trace.into_rows(),
            final_x: state.to_product(),
            final_p: p_state.to_product(),
            status,
            iterations,
            cumulative_sq: cumulative,
            errors_summable: config.errors.declared_summable(),
            beta,
            mu: schedule.mu_bound(),
            gamma_interval: bounds,
        },
        state,
        p_state,
    })
}

/// Fixed-point residual `‖(x, v) − (x⁺, v⁺)‖` of one error-free step with
/// `U = Id` and `γ = 1/(2β)`. Zero exactly at primal–dual solutions.
pub fn kkt_residual(problem: &StructuredProblem, state: &PdState) -> Result<f64> {
    let beta = beta_compute(problem, NORM_TOL)?;
    let config = PdConfig::new(problem);
    let step = pd_step(state, 0, 0.5 / beta, problem, &config)?;
    Ok(state.to_product().distance(&step.next.to_product()))
}

/// Resolvent of `(−z + A) × (r_1 + B_1^{-1}) × … × (r_m + B_m^{-1})`.
#[derive(Debug, Clone)]
pub struct StackedResolvent {
    a: Arc<dyn ResolventOracle>,
    z: Point,
    duals: Vec<(Arc<dyn ResolventOracle>, Point)>,
    sizes: Vec<usize>,
}

impl ResolventOracle for StackedResolvent {
    fn resolve(&self, gamma: f64, metric: &DiagonalMetric, y: &Point) -> Result<Point> {
        check_dim("stacked resolvent", self.sizes.iter().sum(), y.dim())?;
        let ys = y.split(&self.sizes);
        let us = metric.split(&self.sizes);
        let mut out = Vec::with_capacity(ys.len());
        out.push(self.a.resolve(gamma, &us[0], &shift(&ys[0], gamma, &us[0], &self.z, 1.0))?);
        for (i, (b, r)) in self.duals.iter().enumerate() {
            let arg = shift(&ys[i + 1], gamma, &us[i + 1], r, -1.0);
            out.push(inverse_resolvent_scaled(b.as_ref(), gamma, &us[i + 1], &arg)?);
        }
        Ok(Point::concat(out.iter()))
    }

    fn dim(&self) -> Option<usize> {
        Some(self.sizes.iter().sum())
    }

    fn descriptor(&self) -> String {
        format!("stacked({} dual blocks)", self.duals.len())
    }
}

/// `(x, v) ↦ (Cx + Σ_i L_i* v_i, (D_i^{-1} v_i − L_i x)_i)`, declared `β`-Lipschitz.
#[derive(Debug, Clone)]
pub struct ProductMap {
    problem: StructuredProblem,
    sizes: Vec<usize>,
    beta: f64,
}

impl LipschitzMonotoneMap for ProductMap {
    fn apply(&self, w: &Point) -> Point {
        let s = PdState::from_product(w, &self.sizes);
        let primal = &self.problem.c.apply(&s.x) + &sum_adjoint(&self.problem, &s.v);
        let duals: Vec<Point> = self
            .problem
            .blocks
            .iter()
            .zip(&s.v)
            .map(|(blk, vi)| &blk.d_inv.apply(vi) - &blk.l.apply(&s.x))
            .collect();
        Point::concat(std::iter::once(&primal).chain(duals.iter()))
    }

    fn lipschitz_constant(&self) -> f64 {
        self.beta
    }

    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// The product-space problem and configuration equivalent to a primal–dual
/// run. Dual forward errors enter with a flipped sign because the dual rows
/// of the product map carry `−L_i x`.
pub fn assemble_product(
    problem: &StructuredProblem,
    config: &PdConfig,
) -> Result<(FbfProblem, FbfConfig)> {
    config.validate(problem)?;
    let sizes = problem.block_sizes();
    let beta = beta_compute(problem, NORM_TOL)?;
    let a = Arc::new(StackedResolvent {
        a: problem.a.clone(),
        z: problem.z.clone(),
        duals: problem.blocks.iter().map(|b| (b.b.clone(), b.r.clone())).collect(),
        sizes: sizes.clone(),
    });
    let b = Arc::new(ProductMap {
        problem: problem.clone(),
        sizes: sizes.clone(),
        beta,
    });
    let mut fbf_problem = FbfProblem::new(a, b, sizes.iter().sum())?;
    if let Some(sol) = &problem.known_solution {
        fbf_problem = fbf_problem.with_known_zero(sol.to_product())?;
    }

    let stack = |pick: fn(&ErrorSchedule) -> &ErrorSequence, dual_sign: f64| {
        ErrorSequence::Stacked(
            std::iter::once((pick(&config.errors.primal).clone(), sizes[0], 1.0))
                .chain(
                    config
                        .errors
                        .dual
                        .iter()
                        .zip(&sizes[1..])
                        .map(|(e, g)| (pick(e).clone(), *g, dual_sign)),
                )
                .collect(),
        )
    };
    let errors = ErrorSchedule {
        a: stack(|e| &e.a, -1.0),
        b: stack(|e| &e.b, 1.0),
        c: stack(|e| &e.c, -1.0),
    };
    let fbf_config = FbfConfig {
        schedule: config.stacked_schedule()?,
        epsilon: config.epsilon,
        gamma_rule: config.gamma_rule.clone(),
        errors,
        initial: config.initial.to_product(),
        max_iter: config.max_iter,
        stop_tol: config.stop_tol,
        record_trace: config.record_trace,
    };
    Ok((fbf_problem, fbf_config))
}

pub const EQUIVALENCE_ITERATE_TOL: f64 = 1e-12;
pub const EQUIVALENCE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub steps: usize,
    /// Largest `‖w_n^{pd} − w_n^{product}‖ / (1 + ‖w_n^{pd}‖)`.
    pub max_iterate_gap: f64,
    /// Largest gap between the two stacked residuals `‖w_n − p_n‖`.
    pub max_residual_gap: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_iterate_gap <= EQUIVALENCE_ITERATE_TOL
            && self.max_residual_gap <= EQUIVALENCE_RESIDUAL_TOL
    }
}

/// Runs `steps` iterations of the primal–dual method and of the direct
/// method on the assembled product problem side by side.
pub fn equivalence_check(
    problem: &StructuredProblem,
    config: &PdConfig,
    steps: usize,
) -> Result<EquivalenceReport> {
    let (fbf_problem, fbf_config) = assemble_product(problem, config)?;
    let sizes = problem.block_sizes();
    let (_, bounds) = pd_gamma_interval(problem, config)?;
    let mut pd = config.initial.clone();
    let mut prod = fbf_config.initial.clone();
    let mut max_iterate_gap: f64 = 0.0;
    let mut max_residual_gap: f64 = 0.0;
    for n in 0..steps {
        let gamma = config.gamma_rule.gamma(n, bounds)?;
        let a = pd_step(&pd, n, gamma, problem, config)?;
        let b = fbf_step(&prod, n, &fbf_problem, &fbf_config)?;
        let r_pd = pd.to_product().distance(&a.p_state().to_product());
        let r_prod = prod.distance(&b.p);
        max_residual_gap = max_residual_gap.max((r_pd - r_prod).abs());
        pd = a.next;
        prod = b.x_next;
        let w = pd.to_product();
        max_iterate_gap = max_iterate_gap.max(w.distance(&prod) / (1.0 + w.norm()));
        debug_assert_eq!(w.dim(), sizes.iter().sum::<usize>());
    }
    Ok(EquivalenceReport {
        steps,
        max_iterate_gap,
        max_residual_gap,
    })
}
