//! Variational inequalities `⟨x − y, Bx⟩ + f(x) ≤ f(y)` for all `y`,
//! solved as the inclusion `0 ∈ ∂f(x) + Bx`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::fbf::{fbf_solve, ErrorSchedule, FbfConfig, FbfProblem, IterateTrace};
use crate::metric::DiagonalMetric;
use crate::operators::LipschitzMonotoneMap;
use crate::point::Point;
use crate::resolvent::ProxCatalogEntry;

pub const VI_PROBES: usize = 100;
pub const VI_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ViCheck {
    pub probes: usize,
    /// `max_y ⟨x − y, Bx⟩ + f(x) − f(y)` over probes in `dom f`.
    pub max_violation: f64,
    pub slack: f64,
}

impl ViCheck {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.slack
    }
}

#[derive(Debug, Clone)]
pub struct ViOutcome {
    pub trace: IterateTrace,
    pub check: ViCheck,
}

/// Runs the solver on `A = ∂f` without errors and checks the inequality
/// at the final backward point `p`, which lies in `dom f`.
pub fn vi_solve(
    f: &ProxCatalogEntry,
    b: Arc<dyn LipschitzMonotoneMap>,
    config: &FbfConfig,
) -> Result<ViOutcome> {
    if f.function_value(&Point::zeros(b.dim())).is_none() {
        return Err(Error::InvalidArgument(format!(
            "operator `{}` is not a subdifferential with a known function",
            f.kind_name()
        )));
    }
    let dim = b.dim();
    let problem = FbfProblem::new(f.clone().into_oracle(), b.clone(), dim)?;
    let mut config = config.clone();
    config.errors = ErrorSchedule::zero();
    let trace = fbf_solve(&problem, &config)?;
    let check = vi_check(f, b.as_ref(), &trace.final_p, VI_PROBES, 0)?;
    Ok(ViOutcome { trace, check })
}

/// Probes the inequality at `x`. Half the probes are uniform in a box of
/// radius 2 around `x`; the other half are those points mapped into
/// `dom f` by the resolvent of `∂f`.
pub fn vi_check(
    f: &ProxCatalogEntry,
    b: &dyn LipschitzMonotoneMap,
    x: &Point,
    probes: usize,
    seed: u64,
) -> Result<ViCheck> {
    check_dim("VI point", b.dim(), x.dim())?;
    let fx = f
        .function_value(x)
        .ok_or_else(|| Error::InvalidArgument(format!("no function value for `{}`", f.kind_name())))?;
    if !fx.is_finite() {
        return Err(Error::Precondition("VI point lies outside dom f".into()));
    }
    let bx = b.apply(x);
    let oracle = f.clone().into_oracle();
    let id = DiagonalMetric::identity(x.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for k in 0..probes {
        let raw = Point::from(x.iter().map(|xj| xj + rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
        let y = if k % 2 == 0 { raw } else { oracle.resolve(1.0, &id, &raw)? };
        let fy = f.function_value(&y).unwrap_or(f64::INFINITY);
        if fy.is_infinite() {
            continue;
        }
        let v = (x - &y).dot(&bx) + fx - fy;
        max_violation = max_violation.max(v);
    }
    Ok(ViCheck {
        probes,
        max_violation,
        slack: VI_SLACK,
    })
}
