//! Single-valued monotone Lipschitzian operators.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linear::{operator_norm, LinearMap};
use crate::point::Point;

/// A monotone, Lipschitz-continuous map `H → H` with a declared constant.
///
/// Implementations must be pure: `apply` may be called concurrently and in
/// any order.
pub trait LipschitzMonotoneMap: Send + Sync + fmt::Debug {
    fn apply(&self, x: &Point) -> Point;

    /// Declared Lipschitz constant (`β`, `ν_0` or `ν_i`).
    fn lipschitz_constant(&self) -> f64;

    fn dim(&self) -> usize;
}

/// `x ↦ M x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: LinearMap,
    offset: Point,
    lipschitz: f64,
}

impl AffineMap {
    /// When `lipschitz` is `None` the constant is the safe spectral-norm
    /// estimate of `matrix`.
    pub fn new(matrix: LinearMap, offset: Point, lipschitz: Option<f64>) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::InvalidArgument(format!(
                "affine map needs a square matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        check_dim("affine map offset", matrix.rows(), offset.dim())?;
        let lipschitz = match lipschitz {
            Some(l) => l,
            None if matrix.is_zero() => {
                return Err(Error::InvalidArgument(
                    "zero affine map needs a declared Lipschitz constant".into(),
                ))
            }
            None => operator_norm(&matrix, 1e-10, 100_000)?.safe,
        };
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        Ok(AffineMap {
            matrix,
            offset,
            lipschitz,
        })
    }

    pub fn linear(matrix: LinearMap, lipschitz: Option<f64>) -> Result<Self> {
        let d = matrix.rows();
        Self::new(matrix, Point::zeros(d), lipschitz)
    }

    /// The zero map, declared `lipschitz`-Lipschitz (any positive constant is valid).
    pub fn zero(dim: usize, lipschitz: f64) -> Result<Self> {
        Self::new(LinearMap::zeros(dim, dim), Point::zeros(dim), Some(lipschitz))
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            matrix: LinearMap::identity(dim),
            offset: Point::zeros(dim),
            lipschitz: 1.0,
        }
    }

    /// Rotation by 90° in the plane, `(a, b) ↦ (−b, a)`: monotone, skew,
    /// 1-Lipschitz and not cocoercive.
    pub fn rotation90() -> Self {
        AffineMap {
            matrix: LinearMap::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
            offset: Point::zeros(2),
            lipschitz: 1.0,
        }
    }

    pub fn matrix(&self) -> &LinearMap {
        &self.matrix
    }

    pub fn offset(&self) -> &Point {
        &self.offset
    }
}

impl LipschitzMonotoneMap for AffineMap {
    fn apply(&self, x: &Point) -> Point {
        &self.matrix.apply(x) + &self.offset
    }

    fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// A map given by a closure.
#[derive(Clone)]
pub struct FnMap {
    name: String,
    dim: usize,
    lipschitz: f64,
    f: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
}

impl FnMap {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        f: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        FnMap {
            name: name.into(),
            dim,
            lipschitz,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl LipschitzMonotoneMap for FnMap {
    fn apply(&self, x: &Point) -> Point {
        (self.f)(x)
    }

    fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub samples: usize,
    /// `min ⟨x − y, Bx − By⟩` over the sampled pairs.
    pub min_inner: f64,
    /// `max ‖Bx − By‖ / ‖x − y‖` over the sampled pairs.
    pub max_ratio: f64,
    pub monotonicity_violated: bool,
    pub lipschitz_violated: bool,
}

impl ProbeReport {
    pub fn violation(&self) -> bool {
        self.monotonicity_violated || self.lipschitz_violated
    }
}

/// Samples pairs in `[−10, 10]^d` and checks the monotone/Lipschitz hypotheses.
pub fn monotonicity_probe(b: &dyn LipschitzMonotoneMap, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = b.dim();
    let mut min_inner = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let draw = |rng: &mut ChaCha8Rng| {
        Point::from((0..d).map(|_| rng.gen_range(-10.0..10.0)).collect::<Vec<_>>())
    };
    for _ in 0..samples.max(1) {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let dx = &x - &y;
        let db = &b.apply(&x) - &b.apply(&y);
        min_inner = min_inner.min(dx.dot(&db));
        let dn = dx.norm();
        if dn > 0.0 {
            max_ratio = max_ratio.max(db.norm() / dn);
        }
    }
    ProbeReport {
        samples: samples.max(1),
        min_inner,
        max_ratio,
        monotonicity_violated: min_inner < -1e-8,
        lipschitz_violated: max_ratio > b.lipschitz_constant() * (1.0 + 1e-8),
    }
}
