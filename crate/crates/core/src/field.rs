//! Grid functions on the `(n+1) x (n+1)` reference lattice.

use crate::error::Error;
use crate::geometry::Domain;
use crate::scalar::Real;

/// Scalar values at lattice nodes, stored row-major with `eta` rows
/// (index `j * (n + 1) + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(d: &Domain<T>) -> Self {
        Self::constant(d, T::zero())
    }

    pub fn constant(d: &Domain<T>, c: T) -> Self {
        Self { n: d.n(), values: vec![c; d.node_count()] }
    }

    pub fn from_values(n: usize, values: Vec<T>) -> Result<Self, Error> {
        let expected = (n + 1) * (n + 1);
        if values.len() != expected {
            return Err(Error::ShapeMismatch { n, expected, found: values.len() });
        }
        Ok(Self { n, values })
    }

    /// Samples `f(xi, eta)` at every node.
    pub fn from_reference_fn(d: &Domain<T>, f: impl Fn(T, T) -> T) -> Self {
        let np = d.points_per_side();
        let mut values = Vec::with_capacity(d.node_count());
        for j in 0..np {
            for i in 0..np {
                let (xi, eta) = d.node(i, j);
                values.push(f(xi, eta));
            }
        }
        Self { n: d.n(), values }
    }

    /// Samples `f(x, y)` at the physical position of every node.
    pub fn from_physical_fn(d: &Domain<T>, f: impl Fn(T, T) -> T) -> Self {
        Self::from_reference_fn(d, |xi, eta| {
            let (x, y) = d.to_physical(xi, eta);
            f(x, y)
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points_per_side(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * (self.n + 1) + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * (self.n + 1) + i] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn matches(&self, d: &Domain<T>) -> Result<(), Error> {
        if self.n != d.n() {
            return Err(Error::ShapeMismatch { n: d.n(), expected: d.node_count(), found: self.values.len() });
        }
        Ok(())
    }

    /// First non-finite node, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        let np = self.n + 1;
        self.values.iter().position(|v| !v.is_finite()).map(|k| (k % np, k / np))
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Max-norm distance to another field of the same shape.
    pub fn max_diff(&self, other: &Field<T>) -> T {
        self.values.iter().zip(&other.values).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    /// Bilinear interpolation at lattice coordinates, clamped to the square.
    pub fn sample(&self, xi: T, eta: T) -> T {
        let (i, j, s, t) = self.locate(xi, eta);
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        let one = T::one();
        (one - s) * (one - t) * v00 + s * (one - t) * v10 + (one - s) * t * v01 + s * t * v11
    }

    /// Cell containing `(xi, eta)` and local coordinates in `[0, 1]^2`.
    pub(crate) fn locate(&self, xi: T, eta: T) -> (usize, usize, T, T) {
        let nf = T::from_usize_lossy(self.n);
        let clamp = |u: T| u.max(T::zero()).min(T::one()) * nf;
        let (u, w) = (clamp(xi), clamp(eta));
        let i = u.floor().to_usize().unwrap_or(0).min(self.n - 1);
        let j = w.floor().to_usize().unwrap_or(0).min(self.n - 1);
        (i, j, u - T::from_usize_lossy(i), w - T::from_usize_lossy(j))
    }
}

/// Spatially varying weight `Q` with recorded bounds `0 < m <= Q <= M`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    values: Vec<T>,
    min: T,
    max: T,
}

impl<T: Real> CoefficientField<T> {
    pub fn uniform(d: &Domain<T>, q: T) -> Result<Self, Error> {
        Self::from_values(vec![q; d.node_count()])
    }

    pub fn ones(d: &Domain<T>) -> Self {
        Self::uniform(d, T::one()).expect("Q = 1 is admissible")
    }

    pub fn from_physical_fn(d: &Domain<T>, f: impl Fn(T, T) -> T) -> Result<Self, Error> {
        Self::from_values(Field::from_physical_fn(d, f).into_values())
    }

    pub fn from_values(values: Vec<T>) -> Result<Self, Error> {
        let mut min = T::infinity();
        let mut max = T::zero();
        for &q in &values {
            if !(q > T::zero()) || !q.is_finite() {
                return Err(Error::InvalidModel(format!("coefficient Q must be positive and finite, got {q}")));
            }
            min = min.min(q);
            max = max.max(q);
        }
        Ok(Self { values, min, max })
    }

    #[inline]
    pub fn at(&self, k: usize) -> T {
        self.values[k]
    }

    #[inline]
    pub fn squared(&self, k: usize) -> T {
        self.values[k] * self.values[k]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Lower bound `m`.
    pub fn min(&self) -> T {
        self.min
    }

    /// Upper bound `M`.
    pub fn max(&self) -> T {
        self.max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, d: &Domain<T>) -> Result<(), Error> {
        if self.values.len() != d.node_count() {
            return Err(Error::ShapeMismatch { n: d.n(), expected: d.node_count(), found: self.values.len() });
        }
        Ok(())
    }
}
