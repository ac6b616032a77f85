//! Maximally monotone operators represented through their resolvents.
//!
//! For a diagonal metric `U` and `γ > 0`, the scaled resolvent
//! `J_{γUA}(y)` is the unique `p` with `y ∈ p + γ·U·A(p)`. Every operator
//! the solvers touch is accessed only through this map.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linear::LinearMap;
use crate::metric::DiagonalMetric;
use crate::point::Point;

/// A maximally monotone operator `A`, known through `(γ, U, y) ↦ J_{γUA}(y)`.
pub trait ResolventOracle: Send + Sync + fmt::Debug {
    fn resolve(&self, gamma: f64, metric: &DiagonalMetric, y: &Point) -> Result<Point>;

    /// Fixed dimension, or `None` for operators defined in every dimension.
    fn dim(&self) -> Option<usize>;

    fn descriptor(&self) -> String;

    /// Closed-form test of `a ∈ A(p)` within `tol`, when available.
    fn contains(&self, _p: &Point, _a: &Point, _tol: f64) -> Option<bool> {
        None
    }
}

/// A continuous nondecreasing scalar function `g`, the operator applied
/// componentwise by [`ProxCatalogEntry::CustomSeparable`].
#[derive(Clone)]
pub enum ScalarMonotone {
    /// Linear interpolation between knots `(t, g(t))`, extended by the end
    /// slopes.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `g(t) = k·t³`
    Cubic(f64),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ScalarMonotone {
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("piecewise-linear function needs knots".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(
                    "piecewise-linear knots must be strictly increasing in t".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument(
                    "piecewise-linear values must be nondecreasing".into(),
                ));
            }
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidArgument("piecewise-linear knots must be finite".into()));
        }
        Ok(ScalarMonotone::PiecewiseLinear(knots))
    }

    pub fn cubic(k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cubic coefficient must be nonnegative, got {k}"
            )));
        }
        Ok(ScalarMonotone::Cubic(k))
    }

    /// `f` must be continuous and nondecreasing; this is not checked.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarMonotone::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarMonotone::PiecewiseLinear(knots) => piecewise_eval(knots, t),
            ScalarMonotone::Cubic(k) => k * t * t * t,
            ScalarMonotone::Custom { f, .. } => f(t),
        }
    }
}

fn piecewise_eval(knots: &[(f64, f64)], t: f64) -> f64 {
    if knots.len() == 1 {
        return knots[0].1;
    }
    let seg = match knots.iter().position(|(k, _)| *k > t) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => knots.len() - 2,
    };
    let (t0, v0) = knots[seg];
    let (t1, v1) = knots[seg + 1];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

impl fmt::Debug for ScalarMonotone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarMonotone::PiecewiseLinear(k) => f.debug_tuple("PiecewiseLinear").field(k).finish(),
            ScalarMonotone::Cubic(k) => f.debug_tuple("Cubic").field(k).finish(),
            ScalarMonotone::Custom { name, .. } => f.debug_tuple("Custom").field(name).finish(),
        }
    }
}

/// Catalog of operators with closed-form (or bisection) scaled resolvents.
#[derive(Debug, Clone)]
pub enum ProxCatalogEntry {
    /// `A = 0`
    Zero,
    /// `A = ∂(w‖·‖₁)`; resolvent is soft thresholding at `γ·u_j·w`.
    L1 { weight: f64 },
    /// Normal cone of the box `[lo, hi]^d`; resolvent is the projection.
    BoxNormalCone { lo: f64, hi: f64 },
    /// `A x = Q x + b` with `Q` monotone (positive semidefinite symmetric part).
    Quadratic { q: LinearMap, b: Point },
    /// `A = (∂(w|·|))^{-1}`, the normal cone of `[−w, w]^d`.
    SupportAbs { weight: f64 },
    /// `A x = (g(x_1), …, g(x_d))` for a nondecreasing continuous `g`.
    CustomSeparable(ScalarMonotone),
}

impl ProxCatalogEntry {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("l1 weight must be >= 0, got {weight}")));
        }
        Ok(ProxCatalogEntry::L1 { weight })
    }

    pub fn box_normal_cone(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid box [{lo}, {hi}]")));
        }
        Ok(ProxCatalogEntry::BoxNormalCone { lo, hi })
    }

    pub fn support_abs(weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "support_abs weight must be >= 0, got {weight}"
            )));
        }
        Ok(ProxCatalogEntry::SupportAbs { weight })
    }

    pub fn quadratic(q: LinearMap, b: Point) -> Result<Self> {
        if q.rows() != q.cols() {
            return Err(Error::InvalidArgument(format!(
                "quadratic operator needs a square matrix, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        check_dim("quadratic operator offset", q.rows(), b.dim())?;
        let m = q.to_nalgebra();
        let sym = (&m + m.transpose()) * 0.5;
        let min_eig = sym.symmetric_eigenvalues().min();
        let scale = sym.abs().max().max(1.0);
        if min_eig < -1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "quadratic operator is not monotone (min eigenvalue of symmetric part {min_eig})"
            )));
        }
        Ok(ProxCatalogEntry::Quadratic { q, b })
    }

    pub fn custom_separable(g: ScalarMonotone) -> Self {
        ProxCatalogEntry::CustomSeparable(g)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProxCatalogEntry::Zero => "zero",
            ProxCatalogEntry::L1 { .. } => "l1",
            ProxCatalogEntry::BoxNormalCone { .. } => "box_normal_cone",
            ProxCatalogEntry::Quadratic { .. } => "quadratic",
            ProxCatalogEntry::SupportAbs { .. } => "support_abs",
            ProxCatalogEntry::CustomSeparable(_) => "custom_separable",
        }
    }

    pub fn into_oracle(self) -> Arc<dyn ResolventOracle> {
        Arc::new(self)
    }

    /// Value of the convex function `f` with `∂f` equal to this operator.
    /// `None` when the operator is not a catalogued subdifferential.
    pub fn function_value(&self, x: &Point) -> Option<f64> {
        match self {
            ProxCatalogEntry::Zero => Some(0.0),
            ProxCatalogEntry::L1 { weight } => Some(weight * x.iter().map(|c| c.abs()).sum::<f64>()),
            ProxCatalogEntry::BoxNormalCone { lo, hi } => Some(indicator(x, *lo, *hi)),
            ProxCatalogEntry::SupportAbs { weight } => Some(indicator(x, -weight, *weight)),
            ProxCatalogEntry::Quadratic { q, b } if q.is_symmetric() => {
                Some(0.5 * q.apply(x).dot(x) + b.dot(x))
            }
            ProxCatalogEntry::Quadratic { .. } | ProxCatalogEntry::CustomSeparable(_) => None,
        }
    }
}

fn indicator(x: &Point, lo: f64, hi: f64) -> f64 {
    if x.iter().all(|c| *c >= lo && *c <= hi) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Soft thresholding: the resolvent of `∂(t|·|)` at `y`.
pub fn soft_threshold(y: f64, t: f64) -> f64 {
    if y > t {
        y - t
    } else if y < -t {
        y + t
    } else {
        0.0
    }
}

/// Membership in the normal cone of `[lo, hi]` at `p`.
fn normal_cone_contains(p: f64, a: f64, lo: f64, hi: f64, tol: f64) -> bool {
    if p < lo - tol || p > hi + tol {
        return false;
    }
    let at_lo = (p - lo).abs() <= tol;
    let at_hi = (hi - p).abs() <= tol;
    match (at_lo, at_hi) {
        (true, true) => true,
        (true, false) => a <= tol,
        (false, true) => a >= -tol,
        (false, false) => a.abs() <= tol,
    }
}

/// Solves `t + s·g(t) = y` for `t` by bisection. The left side is strictly
/// increasing, so a sign change brackets the unique root.
pub(crate) fn scalar_resolvent_bisect(
    g: &ScalarMonotone,
    s: f64,
    y: f64,
    component: usize,
) -> Result<f64> {
    let h = |t: f64| t + s * g.eval(t) - y;
    let mut width = 10.0 * (1.0 + y.abs());
    let mut lo = y - width;
    let mut hi = y + width;
    let mut expansions = 0;
    loop {
        let (hl, hh) = (h(lo), h(hi));
        if !hl.is_finite() || !hh.is_finite() {
            return Err(Error::Numerical {
                component,
                message: format!("scalar residual is not finite on [{lo}, {hi}]"),
            });
        }
        if hl <= 0.0 && hh >= 0.0 {
            break;
        }
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Numerical {
                component,
                message: "could not bracket the scalar resolvent".into(),
            });
        }
        width *= 2.0;
        if hl > 0.0 {
            lo = y - width;
        }
        if hh < 0.0 {
            hi = y + width;
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-12 {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let hm = h(mid);
        if hm == 0.0 {
            return Ok(mid);
        }
        if hm.is_nan() {
            return Err(Error::Numerical {
                component,
                message: format!("scalar residual is NaN at {mid}"),
            });
        }
        if hm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical {
        component,
        message: "bisection did not converge".into(),
    })
}

impl ResolventOracle for ProxCatalogEntry {
    fn resolve(&self, gamma: f64, metric: &DiagonalMetric, y: &Point) -> Result<Point> {
        let w = metric.weights();
        let out: Vec<f64> = match self {
            ProxCatalogEntry::Zero => y.as_slice().to_vec(),
            ProxCatalogEntry::L1 { weight } => y
                .iter()
                .zip(w)
                .map(|(yj, uj)| soft_threshold(*yj, gamma * uj * weight))
                .collect(),
            ProxCatalogEntry::BoxNormalCone { lo, hi } => {
                y.iter().map(|yj| yj.clamp(*lo, *hi)).collect()
            }
            ProxCatalogEntry::SupportAbs { weight } => {
                y.iter().map(|yj| yj.clamp(-weight, *weight)).collect()
            }
            ProxCatalogEntry::Quadratic { q, b } => {
                // (I + γUQ) p = y − γUb
                let d = q.rows();
                let mut m = q.to_nalgebra();
                for i in 0..d {
                    let s = gamma * w[i];
                    for j in 0..d {
                        m[(i, j)] *= s;
                    }
                    m[(i, i)] += 1.0;
                }
                let rhs = DVector::from_iterator(
                    d,
                    (0..d).map(|i| y[i] - gamma * w[i] * b[i]),
                );
                let sol = DMatrix::lu(m).solve(&rhs).ok_or_else(|| Error::Numerical {
                    component: 0,
                    message: "singular system in quadratic resolvent".into(),
                })?;
                sol.iter().copied().collect()
            }
            ProxCatalogEntry::CustomSeparable(g) => y
                .iter()
                .zip(w)
                .enumerate()
                .map(|(j, (yj, uj))| scalar_resolvent_bisect(g, gamma * uj, *yj, j))
                .collect::<Result<Vec<f64>>>()?,
        };
        Ok(Point::from(out))
    }

    fn dim(&self) -> Option<usize> {
        match self {
            ProxCatalogEntry::Quadratic { q, .. } => Some(q.rows()),
            _ => None,
        }
    }

    fn descriptor(&self) -> String {
        match self {
            ProxCatalogEntry::Zero => "zero".into(),
            ProxCatalogEntry::L1 { weight } => format!("l1(weight={weight})"),
            ProxCatalogEntry::BoxNormalCone { lo, hi } => format!("box_normal_cone([{lo}, {hi}])"),
            ProxCatalogEntry::Quadratic { q, .. } => format!("quadratic({}x{})", q.rows(), q.cols()),
            ProxCatalogEntry::SupportAbs { weight } => format!("support_abs(weight={weight})"),
            ProxCatalogEntry::CustomSeparable(g) => format!("custom_separable({g:?})"),
        }
    }

    fn contains(&self, p: &Point, a: &Point, tol: f64) -> Option<bool> {
        if p.dim() != a.dim() {
            return Some(false);
        }
        let pairs = p.iter().copied().zip(a.iter().copied());
        let ok = match self {
            ProxCatalogEntry::Zero => a.iter().all(|x| x.abs() <= tol),
            ProxCatalogEntry::L1 { weight } => pairs.into_iter().all(|(pj, aj)| {
                if pj != 0.0 {
                    (aj - weight * pj.signum()).abs() <= tol
                } else {
                    aj.abs() <= weight + tol
                }
            }),
            ProxCatalogEntry::BoxNormalCone { lo, hi } => pairs
                .into_iter()
                .all(|(pj, aj)| normal_cone_contains(pj, aj, *lo, *hi, tol)),
            ProxCatalogEntry::SupportAbs { weight } => pairs
                .into_iter()
                .all(|(pj, aj)| normal_cone_contains(pj, aj, -weight, *weight, tol)),
            ProxCatalogEntry::Quadratic { q, b } => {
                let ap = &q.apply(p) + b;
                ap.iter()
                    .zip(a.iter())
                    .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
            }
            ProxCatalogEntry::CustomSeparable(g) => pairs.into_iter().all(|(pj, aj)| {
                let gj = g.eval(pj);
                (gj - aj).abs() <= tol * (1.0 + gj.abs())
            }),
        };
        Some(ok)
    }
}

fn check_resolvent_args(
    a: &dyn ResolventOracle,
    gamma: f64,
    metric: &DiagonalMetric,
    y: &Point,
) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {gamma}")));
    }
    check_dim("resolvent metric", y.dim(), metric.dim())?;
    if let Some(d) = a.dim() {
        check_dim("resolvent operator", d, y.dim())?;
    }
    Ok(())
}

/// `J_{γUA}(y)`
pub fn resolvent_scaled(
    a: &dyn ResolventOracle,
    gamma: f64,
    metric: &DiagonalMetric,
    y: &Point,
) -> Result<Point> {
    check_resolvent_args(a, gamma, metric, y)?;
    a.resolve(gamma, metric, y)
}

/// `J_{γUB^{-1}}(y)`, computed from the resolvent of `B` as
/// `p = y − γU·J_{(γU)^{-1}B}((γU)^{-1} y)`.
///
/// The result satisfies `p ∈ B((y − p)/(γU))`.
pub fn inverse_resolvent_scaled(
    b: &dyn ResolventOracle,
    gamma: f64,
    metric: &DiagonalMetric,
    y: &Point,
) -> Result<Point> {
    check_resolvent_args(b, gamma, metric, y)?;
    let step = metric.scaled(gamma);
    let inner_metric = step.inverse();
    let inner_y = step.apply_inverse(y);
    let q = b.resolve(1.0, &inner_metric, &inner_y)?;
    Ok(y - &step.apply(&q))
}
