//! Dense finite-dimensional vectors.

use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// An element of a finite-dimensional real Hilbert space.
///
/// `Point::new` rejects non-finite coordinates. The `From<Vec<f64>>`
/// conversion does not validate and is meant for internally produced data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(j) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {j} is not finite ({})",
                coords[j]
            )));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Point(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot: dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self - other).norm()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Point {
        Point(self.0.iter().map(|&c| f(c)).collect())
    }

    /// Concatenates blocks into one vector (direct-sum embedding).
    pub fn concat<'a>(blocks: impl IntoIterator<Item = &'a Point>) -> Point {
        let mut out = Vec::new();
        for b in blocks {
            out.extend_from_slice(&b.0);
        }
        Point(out)
    }

    /// Splits into consecutive blocks of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Vec<Point> {
        assert_eq!(
            sizes.iter().sum::<usize>(),
            self.dim(),
            "split: block sizes do not cover the point"
        );
        let mut offset = 0;
        sizes
            .iter()
            .map(|&s| {
                let block = Point(self.0[offset..offset + s].to_vec());
                offset += s;
                block
            })
            .collect()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl<'a> IntoIterator for &'a Point {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "add: dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "sub: dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<&Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: &Point) -> Point {
        Point(rhs.0.iter().map(|a| self * a).collect())
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(self.0.iter().map(|a| -a).collect())
    }
}
