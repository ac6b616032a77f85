//! JSON run configuration: schema, loading and conversion into solver objects.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use vmfbf::{
    AffineMap, DiagonalMetric, DualBlock, ErrorSchedule, ErrorSequence, FbfConfig, FbfProblem,
    GammaRule, LinearMap, LipschitzMonotoneMap, MetricSchedule, PdConfig, PdErrors, PdState,
    Point, ProxCatalogEntry, ScalarMonotone, StructuredProblem,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown kind at `{field}`: {message}")]
    UnknownKind { field: String, message: String },

    #[error("dimension mismatch at `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid value at `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(field: impl Into<String>, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: e.to_string(),
    }
}

fn check_len(field: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ConfigError::Dimension {
            field: field.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Seed for certificate probes; the solvers themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub problem: ProblemDesc,
    #[serde(default)]
    pub solver: SolverDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemType {
    /// `0 ∈ Ax + Bx` with `A` from the catalog.
    Fbf,
    /// Variational inequality with function `f` and map `B`.
    Vi,
    /// Structured primal–dual inclusion.
    Pd,
}

/// Problem block. Which fields are required depends on `type`:
/// `fbf` needs `dimension`, `A`, `B`; `vi` needs `dimension`, `f`, `B`;
/// `pd` needs `z`, `A`, `C`, `blocks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDesc {
    #[serde(rename = "type")]
    pub kind: ProblemType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<OperatorDesc>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MapDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<OperatorDesc>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MapDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_zero: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_solution: Option<StateDesc>,
}

impl ProblemDesc {
    pub fn type_name(&self) -> &'static str {
        match self.kind {
            ProblemType::Fbf => "fbf",
            ProblemType::Vi => "vi",
            ProblemType::Pd => "pd",
        }
    }

    fn check_fields(&self) -> Result<()> {
        let present = [
            ("dimension", self.dimension.is_some()),
            ("A", self.a.is_some()),
            ("B", self.b.is_some()),
            ("f", self.f.is_some()),
            ("C", self.c.is_some()),
            ("z", self.z.is_some()),
            ("blocks", self.blocks.is_some()),
            ("known_zero", self.known_zero.is_some()),
            ("known_solution", self.known_solution.is_some()),
        ];
        let (required, optional): (&[&str], &[&str]) = match self.kind {
            ProblemType::Fbf => (&["dimension", "A", "B"], &["known_zero"]),
            ProblemType::Vi => (&["dimension", "f", "B"], &[]),
            ProblemType::Pd => (&["z", "A", "C", "blocks"], &["known_solution"]),
        };
        for (name, is_set) in present {
            let field = format!("problem.{name}");
            if required.contains(&name) && !is_set {
                return Err(invalid(field, format!("required for `{}` problems", self.type_name())));
            }
            if !required.contains(&name) && !optional.contains(&name) && is_set {
                return Err(invalid(field, format!("not allowed for `{}` problems", self.type_name())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDesc {
    pub r: Vec<f64>,
    #[serde(rename = "B")]
    pub b: OperatorDesc,
    #[serde(rename = "D_inv")]
    pub d_inv: MapDesc,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDesc {
    pub x: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

/// Catalog operators with resolvent access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorDesc {
    Zero,
    L1 { weight: f64 },
    BoxNormalCone { lo: f64, hi: f64 },
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    SupportAbs { weight: f64 },
    CustomSeparable { function: ScalarFunctionDesc },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFunctionDesc {
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    Cubic { k: f64 },
}

/// Single-valued monotone Lipschitzian maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDesc {
    Zero {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    Identity,
    Affine {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleDesc {
    Identity,
    Constant {
        weights: Vec<f64>,
    },
    Geometric {
        c: f64,
        rho: f64,
        direction: Vec<f64>,
    },
    Table {
        metrics: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        etas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceDesc {
    Zero,
    Geometric { scale: Vec<f64>, ratio: f64 },
    Harmonic { scale: Vec<f64> },
    Table { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaDesc {
    Constant { value: f64 },
    MaxAdmissible,
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorsDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<SequenceDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<SequenceDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<SequenceDesc>,
}

/// Solver settings. `schedule`, `errors` and `initial` refer to the primal
/// block for `pd` problems; the `dual_*` fields apply to `pd` only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_schedules: Option<Vec<ScheduleDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorsDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_errors: Option<Vec<ErrorsDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_dual: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol: Option<f64>,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_config(&text)?;
    config.build()?;
    Ok(config)
}

/// Parses without building; errors carry the JSON location and field path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        if message.starts_with("unknown variant") {
            ConfigError::UnknownKind { field, message }
        } else {
            ConfigError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message,
            }
        }
    })?;
    if config.format_version != FORMAT_VERSION {
        return Err(ConfigError::Version(config.format_version));
    }
    Ok(config)
}

/// Canonical pretty-printed JSON.
pub fn to_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("configuration is serializable")
}

/// Validated solver objects ready to run.
#[derive(Debug, Clone)]
pub enum BuiltRun {
    Fbf {
        problem: FbfProblem,
        config: FbfConfig,
    },
    Vi {
        f: ProxCatalogEntry,
        b: Arc<dyn LipschitzMonotoneMap>,
        config: FbfConfig,
    },
    Pd {
        problem: StructuredProblem,
        config: PdConfig,
    },
}

fn point(field: &str, v: &[f64], dim: usize) -> Result<Point> {
    check_len(field, dim, v.len())?;
    Point::new(v.to_vec()).map_err(|e| invalid(field, e))
}

fn matrix(field: &str, rows: &[Vec<f64>], shape: (usize, usize)) -> Result<LinearMap> {
    check_len(field, shape.0, rows.len())?;
    for (i, row) in rows.iter().enumerate() {
        check_len(&format!("{field}[{i}]"), shape.1, row.len())?;
    }
    LinearMap::from_rows(rows).map_err(|e| invalid(field, e))
}

impl OperatorDesc {
    pub fn build(&self, field: &str, dim: usize) -> Result<ProxCatalogEntry> {
        let err = |e| invalid(field, e);
        match self {
            OperatorDesc::Zero => Ok(ProxCatalogEntry::Zero),
            OperatorDesc::L1 { weight } => ProxCatalogEntry::l1(*weight).map_err(err),
            OperatorDesc::BoxNormalCone { lo, hi } => {
                ProxCatalogEntry::box_normal_cone(*lo, *hi).map_err(err)
            }
            OperatorDesc::SupportAbs { weight } => {
                ProxCatalogEntry::support_abs(*weight).map_err(err)
            }
            OperatorDesc::Quadratic { q, b } => {
                let q = matrix(&format!("{field}.Q"), q, (dim, dim))?;
                let b = point(&format!("{field}.b"), b, dim)?;
                ProxCatalogEntry::quadratic(q, b).map_err(err)
            }
            OperatorDesc::CustomSeparable { function } => {
                let g = match function {
                    ScalarFunctionDesc::PiecewiseLinear { knots } => {
                        ScalarMonotone::piecewise_linear(knots.clone())
                    }
                    ScalarFunctionDesc::Cubic { k } => ScalarMonotone::cubic(*k),
                }
                .map_err(|e| invalid(format!("{field}.function"), e))?;
                Ok(ProxCatalogEntry::custom_separable(g))
            }
        }
    }
}

impl MapDesc {
    pub fn build(&self, field: &str, dim: usize) -> Result<Arc<dyn LipschitzMonotoneMap>> {
        let map = match self {
            MapDesc::Zero { lipschitz } => AffineMap::zero(dim, lipschitz.unwrap_or(1.0)),
            MapDesc::Identity => Ok(AffineMap::identity(dim)),
            MapDesc::Affine {
                matrix: m,
                offset,
                lipschitz,
            } => {
                let m = matrix(&format!("{field}.matrix"), m, (dim, dim))?;
                let offset = match offset {
                    Some(o) => point(&format!("{field}.offset"), o, dim)?,
                    None => Point::zeros(dim),
                };
                AffineMap::new(m, offset, *lipschitz)
            }
        }
        .map_err(|e| invalid(field, e))?;
        Ok(Arc::new(map))
    }
}

impl ScheduleDesc {
    pub fn build(&self, field: &str, dim: usize) -> Result<MetricSchedule> {
        let err = |e| invalid(field, e);
        match self {
            ScheduleDesc::Identity => Ok(MetricSchedule::identity(dim)),
            ScheduleDesc::Constant { weights } => {
                check_len(&format!("{field}.weights"), dim, weights.len())?;
                Ok(MetricSchedule::constant(
                    DiagonalMetric::from_weights(weights.clone()).map_err(err)?,
                ))
            }
            ScheduleDesc::Geometric { c, rho, direction } => {
                check_len(&format!("{field}.direction"), dim, direction.len())?;
                MetricSchedule::geometric(*c, *rho, direction.clone()).map_err(err)
            }
            ScheduleDesc::Table { metrics, etas } => {
                let built = metrics
                    .iter()
                    .enumerate()
                    .map(|(n, w)| {
                        let f = format!("{field}.metrics[{n}]");
                        check_len(&f, dim, w.len())?;
                        DiagonalMetric::from_weights(w.clone()).map_err(|e| invalid(f, e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MetricSchedule::table(built, etas.clone(), None).map_err(err)
            }
        }
    }
}

impl SequenceDesc {
    pub fn build(&self, field: &str, dim: usize) -> Result<ErrorSequence> {
        Ok(match self {
            SequenceDesc::Zero => ErrorSequence::Zero,
            SequenceDesc::Geometric { scale, ratio } => {
                if !(ratio.is_finite() && *ratio >= 0.0) {
                    return Err(invalid(format!("{field}.ratio"), "must be finite and >= 0"));
                }
                ErrorSequence::Geometric {
                    scale: point(&format!("{field}.scale"), scale, dim)?,
                    ratio: *ratio,
                }
            }
            SequenceDesc::Harmonic { scale } => ErrorSequence::Harmonic {
                scale: point(&format!("{field}.scale"), scale, dim)?,
            },
            SequenceDesc::Table { values } => ErrorSequence::Table(
                values
                    .iter()
                    .enumerate()
                    .map(|(n, v)| point(&format!("{field}.values[{n}]"), v, dim))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}

impl ErrorsDesc {
    pub fn build(&self, field: &str, dim: usize) -> Result<ErrorSchedule> {
        let seq = |s: &Option<SequenceDesc>, slot: &str| match s {
            Some(s) => s.build(&format!("{field}.{slot}"), dim),
            None => Ok(ErrorSequence::Zero),
        };
        Ok(ErrorSchedule {
            a: seq(&self.a, "a")?,
            b: seq(&self.b, "b")?,
            c: seq(&self.c, "c")?,
        })
    }
}

impl GammaDesc {
    pub fn build(&self) -> GammaRule {
        match self {
            GammaDesc::Constant { value } => GammaRule::Constant(*value),
            GammaDesc::MaxAdmissible => GammaRule::MaxAdmissible,
            GammaDesc::Table { values } => GammaRule::Table(values.clone()),
        }
    }
}

impl SolverDesc {
    fn reject_dual_fields(&self, problem: &str) -> Result<()> {
        let set = [
            ("solver.dual_schedules", self.dual_schedules.is_some()),
            ("solver.dual_errors", self.dual_errors.is_some()),
            ("solver.initial_dual", self.initial_dual.is_some()),
        ];
        match set.iter().find(|(_, present)| *present) {
            Some((field, _)) => Err(invalid(*field, format!("not allowed for `{problem}` problems"))),
            None => Ok(()),
        }
    }

    fn fbf_config(&self, dim: usize) -> Result<FbfConfig> {
        let schedule = match &self.schedule {
            Some(s) => s.build("solver.schedule", dim)?,
            None => MetricSchedule::identity(dim),
        };
        let initial = match &self.initial {
            Some(x) => point("solver.initial", x, dim)?,
            None => Point::zeros(dim),
        };
        let mut config = FbfConfig::new(schedule, initial);
        self.apply_common(&mut config.epsilon, &mut config.gamma_rule, &mut config.max_iter, &mut config.stop_tol)?;
        if let Some(e) = &self.errors {
            config.errors = e.build("solver.errors", dim)?;
        }
        Ok(config)
    }

    fn apply_common(
        &self,
        epsilon: &mut f64,
        gamma: &mut GammaRule,
        max_iter: &mut usize,
        stop_tol: &mut f64,
    ) -> Result<()> {
        if let Some(e) = self.epsilon {
            *epsilon = e;
        }
        if let Some(g) = &self.gamma {
            *gamma = g.build();
        }
        if let Some(m) = self.max_iter {
            *max_iter = m;
        }
        if let Some(t) = self.stop_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("solver.stop_tol", "must be finite and >= 0"));
            }
            *stop_tol = t;
        }
        Ok(())
    }
}

impl RunConfig {
    /// Converts the descriptors into validated solver objects.
    pub fn build(&self) -> Result<BuiltRun> {
        let s = &self.solver;
        let p = &self.problem;
        p.check_fields()?;
        let req = |name: &str| invalid(format!("problem.{name}"), "missing");
        match p.kind {
            ProblemType::Fbf => {
                s.reject_dual_fields("fbf")?;
                let dim = positive_dim(p.dimension.ok_or_else(|| req("dimension"))?)?;
                let a = p.a.as_ref().ok_or_else(|| req("A"))?.build("problem.A", dim)?.into_oracle();
                let b = p.b.as_ref().ok_or_else(|| req("B"))?.build("problem.B", dim)?;
                let mut problem = FbfProblem::new(a, b, dim).map_err(|e| invalid("problem", e))?;
                if let Some(z) = &p.known_zero {
                    let z = point("problem.known_zero", z, dim)?;
                    problem = problem.with_known_zero(z).map_err(|e| invalid("problem.known_zero", e))?;
                }
                Ok(BuiltRun::Fbf {
                    problem,
                    config: s.fbf_config(dim)?,
                })
            }
            ProblemType::Vi => {
                s.reject_dual_fields("vi")?;
                if s.errors.is_some() {
                    return Err(invalid("solver.errors", "not allowed for `vi` problems"));
                }
                let dim = positive_dim(p.dimension.ok_or_else(|| req("dimension"))?)?;
                let f = p.f.as_ref().ok_or_else(|| req("f"))?.build("problem.f", dim)?;
                if f.function_value(&Point::zeros(dim)).is_none() {
                    return Err(invalid("problem.f", format!("`{}` has no function value", f.kind_name())));
                }
                Ok(BuiltRun::Vi {
                    f,
                    b: p.b.as_ref().ok_or_else(|| req("B"))?.build("problem.B", dim)?,
                    config: s.fbf_config(dim)?,
                })
            }
            ProblemType::Pd => self.build_pd(),
        }
    }

    fn build_pd(&self) -> Result<BuiltRun> {
        let s = &self.solver;
        let p = &self.problem;
        let req = |name: &str| invalid(format!("problem.{name}"), "missing");
        let z_desc = p.z.as_ref().ok_or_else(|| req("z"))?;
        let block_descs = p.blocks.as_ref().ok_or_else(|| req("blocks"))?;
        let n = positive_dim(z_desc.len()).map_err(|_| invalid("problem.z", "must be nonempty"))?;
        if block_descs.is_empty() {
            return Err(invalid("problem.blocks", "at least one block is required"));
        }
        let z = point("problem.z", z_desc, n)?;
        let a = p.a.as_ref().ok_or_else(|| req("A"))?.build("problem.A", n)?.into_oracle();
        let c = p.c.as_ref().ok_or_else(|| req("C"))?.build("problem.C", n)?;
        let mut blocks = Vec::with_capacity(block_descs.len());
        for (i, b) in block_descs.iter().enumerate() {
            let field = format!("problem.blocks[{i}]");
            let g = b.r.len();
            if g == 0 {
                return Err(invalid(format!("{field}.r"), "dual block must be nonempty"));
            }
            let l = matrix(&format!("{field}.L"), &b.l, (g, n))?;
            if l.is_zero() {
                return Err(invalid(format!("{field}.L"), "zero map"));
            }
            blocks.push(DualBlock {
                r: point(&format!("{field}.r"), &b.r, g)?,
                b: b.b.build(&format!("{field}.B"), g)?.into_oracle(),
                d_inv: b.d_inv.build(&format!("{field}.D_inv"), g)?,
                l,
            });
        }
        let dims: Vec<usize> = block_descs.iter().map(|b| b.r.len()).collect();
        let m = dims.len();
        let mut problem = StructuredProblem::new(z, a, c, blocks).map_err(|e| invalid("problem", e))?;
        if let Some(sol) = &p.known_solution {
            let state = state("problem.known_solution", sol, n, &dims)?;
            problem = problem
                .with_known_solution(state)
                .map_err(|e| invalid("problem.known_solution", e))?;
        }

        let mut config = PdConfig::new(&problem);
        s.apply_common(&mut config.epsilon, &mut config.gamma_rule, &mut config.max_iter, &mut config.stop_tol)?;
        if let Some(sch) = &s.schedule {
            config.primal_schedule = sch.build("solver.schedule", n)?;
        }
        if let Some(list) = &s.dual_schedules {
            check_len("solver.dual_schedules", m, list.len())?;
            config.dual_schedules = list
                .iter()
                .zip(&dims)
                .enumerate()
                .map(|(i, (sch, g))| sch.build(&format!("solver.dual_schedules[{i}]"), *g))
                .collect::<Result<_>>()?;
        }
        let mut errors = PdErrors::zero(m);
        if let Some(e) = &s.errors {
            errors.primal = e.build("solver.errors", n)?;
        }
        if let Some(list) = &s.dual_errors {
            check_len("solver.dual_errors", m, list.len())?;
            errors.dual = list
                .iter()
                .zip(&dims)
                .enumerate()
                .map(|(i, (e, g))| e.build(&format!("solver.dual_errors[{i}]"), *g))
                .collect::<Result<_>>()?;
        }
        config.errors = errors;
        if let Some(x) = &s.initial {
            config.initial.x = point("solver.initial", x, n)?;
        }
        if let Some(v) = &s.initial_dual {
            check_len("solver.initial_dual", m, v.len())?;
            config.initial.v = v
                .iter()
                .zip(&dims)
                .enumerate()
                .map(|(i, (vi, g))| point(&format!("solver.initial_dual[{i}]"), vi, *g))
                .collect::<Result<_>>()?;
        }
        Ok(BuiltRun::Pd { problem, config })
    }
}

fn positive_dim(d: usize) -> Result<usize> {
    if d == 0 {
        return Err(invalid("problem.dimension", "must be positive"));
    }
    Ok(d)
}

fn state(field: &str, s: &StateDesc, n: usize, dims: &[usize]) -> Result<PdState> {
    check_len(&format!("{field}.v"), dims.len(), s.v.len())?;
    Ok(PdState {
        x: point(&format!("{field}.x"), &s.x, n)?,
        v: s.v
            .iter()
            .zip(dims)
            .enumerate()
            .map(|(i, (v, g))| point(&format!("{field}.v[{i}]"), v, *g))
            .collect::<Result<_>>()?,
    })
}
