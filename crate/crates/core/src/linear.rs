//! Dense bounded linear maps and spectral-norm estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::point::Point;

/// A dense matrix `L ∈ B(H, G)` stored row-major; `rows = dim G`, `cols = dim H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("linear map storage", rows * cols, data.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("linear map with empty shape".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("linear map has non-finite entries".into()));
        }
        Ok(LinearMap { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            check_dim(&format!("matrix row {i}"), c, row.len())?;
        }
        Self::new(r, c, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let d = entries.len();
        let mut data = vec![0.0; d * d];
        for (i, e) in entries.iter().enumerate() {
            data[i * d + i] = *e;
        }
        LinearMap {
            rows: d,
            cols: d,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearMap {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| *x == 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `L x`
    pub fn apply(&self, x: &Point) -> Point {
        assert_eq!(x.dim(), self.cols, "linear map: domain dimension mismatch");
        let xs = x.as_slice();
        Point::from(
            self.data
                .chunks(self.cols)
                .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
                .collect::<Vec<f64>>(),
        )
    }

    /// `L* y`, the transpose applied to `y`.
    pub fn apply_adjoint(&self, y: &Point) -> Point {
        assert_eq!(y.dim(), self.rows, "linear map: codomain dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y.iter()) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        Point::from(out)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Result of [`operator_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// `√ρ` with `ρ` the final Rayleigh quotient of `L*L`; never above `‖L‖`.
    pub raw: f64,
    /// `raw·(1 + tol)`, an upper bound on `‖L‖` once converged.
    pub safe: f64,
    pub iterations: usize,
}

/// Estimates `‖L‖` by power iteration on `L*L`.
///
/// Starts from the normalized all-ones vector; if the iterate collapses onto
/// the kernel it is replaced by a deterministic pseudo-random vector. Stops
/// when `‖L*L v − ρ v‖ ≤ tol·ρ`.
pub fn operator_norm(l: &LinearMap, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("norm tolerance must be positive, got {tol}")));
    }
    if l.is_zero() {
        return Err(Error::Precondition("operator_norm requires a nonzero map".into()));
    }
    let n = l.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = Point::filled(n, 1.0 / (n as f64).sqrt());
    let mut restarts = 0;
    for it in 1..=max_iter {
        let w = l.apply_adjoint(&l.apply(&v));
        let rho = v.dot(&w);
        let wn = w.norm();
        if !(rho > f64::MIN_POSITIVE) || wn == 0.0 {
            restarts += 1;
            if restarts > 64 {
                break;
            }
            let fresh: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fresh = Point::from(fresh);
            v = (1.0 / fresh.norm()) * &fresh;
            continue;
        }
        let residual = (&w - &(rho * &v)).norm();
        if residual <= tol * rho {
            let raw = rho.sqrt();
            return Ok(NormEstimate {
                raw,
                safe: raw * (1.0 + tol),
                iterations: it,
            });
        }
        v = (1.0 / wn) * &w;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        message: "power iteration did not stabilize".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn norm_of_diagonal() {
        let e = operator_norm(&LinearMap::diagonal(&[3.0, 4.0]), 1e-12, 10_000).unwrap();
        assert!((e.raw - 4.0).abs() < 1e-10);
        assert!(e.safe >= 4.0);
    }

    #[test]
    fn norm_of_rotation() {
        let r = LinearMap::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let e = operator_norm(&r, 1e-12, 100).unwrap();
        assert!((e.raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_of_shear_matches_quadratic_formula() {
        // L*L = [[1,1],[1,2]]: eigenvalues (3 ± √5)/2.
        let oracle = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        let l = LinearMap::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let e = operator_norm(&l, 1e-12, 10_000).unwrap();
        assert!((e.raw - oracle).abs() <= 1e-10 * oracle);
        assert!(e.safe >= oracle);
    }

    #[test]
    fn seed_in_kernel_is_recovered() {
        // all-ones lies in the kernel of [1, -1].
        let l = LinearMap::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let e = operator_norm(&l, 1e-12, 1000).unwrap();
        assert!((e.raw - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn zero_map_is_rejected() {
        assert!(matches!(
            operator_norm(&LinearMap::zeros(2, 2), 1e-8, 10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn iteration_budget_exhaustion_is_an_error() {
        let l = LinearMap::from_rows(&[vec![1.0, 0.3], vec![0.2, 0.9]]).unwrap();
        assert!(matches!(
            operator_norm(&l, 1e-15, 1),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let l = LinearMap::new(3, 4, data).unwrap();
            let x = Point::from((0..4).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let y = Point::from((0..3).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let lhs = l.apply(&x).dot(&y);
            let rhs = x.dot(&l.apply_adjoint(&y));
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    /// Brute-force oracle: fixed-count power iteration with no early exit.
    fn brute_force_norm(l: &LinearMap) -> f64 {
        let mut v = Point::filled(l.cols(), 1.0);
        let mut rho = 0.0;
        for _ in 0..1_000_000 {
            let w = l.apply_adjoint(&l.apply(&v));
            let n = w.norm();
            let next_rho = v.dot(&w) / v.norm_sq();
            v = (1.0 / n) * &w;
            if (next_rho - rho).abs() <= 1e-14 * next_rho {
                rho = next_rho;
                break;
            }
            rho = next_rho;
        }
        rho.sqrt()
    }

    #[test]
    fn random_matrices_match_brute_force_and_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let data: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l = LinearMap::new(5, 5, data).unwrap();
            let est = operator_norm(&l, 1e-10, 1_000_000).unwrap();
            let brute = brute_force_norm(&l);
            let svd = l.to_nalgebra().singular_values().max();
            assert!((est.raw - brute).abs() <= 1e-6 * brute, "{} vs {}", est.raw, brute);
            assert!((est.raw - svd).abs() <= 1e-6 * svd);
            assert!(est.safe >= svd * (1.0 - 1e-12));
        }
    }
}
