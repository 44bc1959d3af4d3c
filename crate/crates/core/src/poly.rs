//! Dense multivariate polynomials with exact rational coefficients,
//! homogenization, Weyl (Bombieri) geometry and the normalized evaluators
//! used by the subdivision predicates.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{pow_i, rat_int, sqrt_f64, to_f64};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a nonzero polynomial")]
    ZeroPolynomial,
    #[error("multi-index degree {got} exceeds bound {bound}")]
    DegreeOutOfRange { got: u32, bound: u32 },
    #[error("multi-index has {got} entries, expected {expected}")]
    IndexLength { expected: usize, got: usize },
}

/// Exponent vector of a monomial. Ordered graded-lexicographically, which
/// fixes the coefficient order everywhere (storage, file format, kernels).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// All multi-indices on `vars` variables with degree at most `d`,
    /// in graded-lexicographic order.
    pub fn all_up_to(vars: usize, d: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for deg in 0..=d {
            Self::collect_exact(vars, deg, &mut Vec::new(), &mut out);
        }
        out
    }

    /// All multi-indices on `vars` variables with degree exactly `d`,
    /// in lexicographic order.
    pub fn all_exact(vars: usize, d: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        Self::collect_exact(vars, d, &mut Vec::new(), &mut out);
        out
    }

    fn collect_exact(vars: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == vars - 1 {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            Self::collect_exact(vars, left - e, prefix, out);
            prefix.pop();
        }
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), &self.0).cmp(&(other.degree(), &other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multinomial coefficient `d! / (a_0! ... a_k!)`; requires `|alpha| = d`.
pub fn multinomial(d: u32, alpha: &MultiIndex) -> BigInt {
    assert_eq!(alpha.degree(), d, "multinomial needs |alpha| = d");
    let mut acc = BigInt::one();
    let mut used = 0u32;
    for &e in alpha.exponents() {
        // running product of binomial(used + e, e)
        for j in 1..=e {
            acc = acc * BigInt::from(used + j) / BigInt::from(j);
        }
        used += e;
    }
    acc
}

/// Polynomial in `n` variables with degree bound `d`, dense rational
/// coefficients keyed by multi-index.
#[derive(Clone, PartialEq, Eq)]
pub struct AffinePoly {
    n: usize,
    d: u32,
    coeffs: BTreeMap<MultiIndex, BigRational>,
}

impl fmt::Debug for AffinePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AffinePoly(n={}, d={}, {} terms)", self.n, self.d, self.coeffs.len())
    }
}

impl AffinePoly {
    pub fn new(n: usize, d: u32) -> Self {
        AffinePoly { n, d, coeffs: BTreeMap::new() }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn degree_bound(&self) -> u32 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn term_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Dimension of the ambient coefficient space, `binomial(n + d, n)`.
    pub fn space_dim(&self) -> usize {
        MultiIndex::all_up_to(self.n, self.d).len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> BigRational {
        self.coeffs.get(alpha).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn set_coeff(&mut self, alpha: MultiIndex, c: BigRational) -> Result<(), PolyError> {
        if alpha.len() != self.n {
            return Err(PolyError::IndexLength { expected: self.n, got: alpha.len() });
        }
        if alpha.degree() > self.d {
            return Err(PolyError::DegreeOutOfRange { got: alpha.degree(), bound: self.d });
        }
        if c.is_zero() {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, c);
        }
        Ok(())
    }

    /// Build from `(exponents, coefficient)` pairs.
    pub fn from_terms(
        n: usize,
        d: u32,
        terms: impl IntoIterator<Item = (Vec<u32>, BigRational)>,
    ) -> Result<Self, PolyError> {
        let mut p = AffinePoly::new(n, d);
        for (alpha, c) in terms {
            let idx = MultiIndex::new(alpha);
            let prev = p.coeff(&idx);
            p.set_coeff(idx, prev + c)?;
        }
        Ok(p)
    }

    pub fn scale(&self, t: &BigRational) -> AffinePoly {
        if t.is_zero() {
            return AffinePoly::new(self.n, self.d);
        }
        let coeffs = self.coeffs.iter().map(|(a, c)| (a.clone(), c * t)).collect();
        AffinePoly { n: self.n, d: self.d, coeffs }
    }

    pub fn add(&self, other: &AffinePoly) -> Result<AffinePoly, PolyError> {
        if other.n != self.n {
            return Err(PolyError::DimensionMismatch { expected: self.n, got: other.n });
        }
        let d = self.d.max(other.d);
        let mut out = AffinePoly::new(self.n, d);
        for (a, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            let prev = out.coeff(a);
            out.set_coeff(a.clone(), prev + c)?;
        }
        Ok(out)
    }

    /// Substitute `X_i <- s * X_i`, staying in the same space.
    pub fn rescale_domain(&self, s: &BigRational) -> AffinePoly {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, c)| (a.clone(), c * pow_i(s, a.degree() as i64)))
            .collect();
        AffinePoly { n: self.n, d: self.d, coeffs }
    }

    pub fn partial(&self, j: usize) -> AffinePoly {
        assert!(j < self.n);
        let mut out = AffinePoly::new(self.n, self.d.saturating_sub(1));
        for (a, c) in &self.coeffs {
            let e = a.exponents()[j];
            if e == 0 {
                continue;
            }
            let mut alpha = a.exponents().to_vec();
            alpha[j] -= 1;
            let prev = out.coeff(&MultiIndex::new(alpha.clone()));
            out.set_coeff(MultiIndex::new(alpha), prev + c * rat_int(e as i64))
                .expect("derivative index stays in range");
        }
        out
    }

    pub fn partials(&self) -> Vec<AffinePoly> {
        (0..self.n).map(|j| self.partial(j)).collect()
    }

    fn power_table(x: &[BigRational], d: u32) -> Vec<Vec<BigRational>> {
        x.iter()
            .map(|xi| {
                let mut row = Vec::with_capacity(d as usize + 1);
                row.push(BigRational::one());
                for k in 1..=d as usize {
                    let next = &row[k - 1] * xi;
                    row.push(next);
                }
                row
            })
            .collect()
    }

    /// Exact evaluation at a rational point.
    pub fn eval(&self, x: &[BigRational]) -> Result<BigRational, PolyError> {
        if x.len() != self.n {
            return Err(PolyError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let table = Self::power_table(x, self.d);
        let mut acc = BigRational::zero();
        for (a, c) in &self.coeffs {
            let mut term = c.clone();
            for (j, &e) in a.exponents().iter().enumerate() {
                if e > 0 {
                    term *= &table[j][e as usize];
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Exact gradient at a rational point.
    pub fn gradient(&self, x: &[BigRational]) -> Result<Vec<BigRational>, PolyError> {
        self.partials().iter().map(|p| p.eval(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for (a, c) in &self.coeffs {
            let mut term = to_f64(c);
            for (j, &e) in a.exponents().iter().enumerate() {
                term *= x[j].powi(e as i32);
            }
            acc += term;
        }
        acc
    }

    pub fn homogenize(&self) -> HomoPoly {
        let mut coeffs = BTreeMap::new();
        for (a, c) in &self.coeffs {
            let mut alpha = Vec::with_capacity(self.n + 1);
            alpha.push(self.d - a.degree());
            alpha.extend_from_slice(a.exponents());
            coeffs.insert(MultiIndex::new(alpha), c.clone());
        }
        HomoPoly { n: self.n, d: self.d, coeffs }
    }

    /// Squared Weyl norm of the homogenization, exactly.
    pub fn weyl_norm_sq(&self) -> BigRational {
        let mut acc = BigRational::zero();
        for (a, c) in &self.coeffs {
            let mut alpha = Vec::with_capacity(self.n + 1);
            alpha.push(self.d - a.degree());
            alpha.extend_from_slice(a.exponents());
            let w = multinomial(self.d, &MultiIndex::new(alpha));
            acc += c * c / BigRational::from_integer(w);
        }
        acc
    }

    pub fn weyl_norm(&self) -> f64 {
        sqrt_f64(&self.weyl_norm_sq())
    }

    /// Squared normalized value: `fhat(x)^2 = f(x)^2 / (|f|^2 (1+|x|^2)^{d-1})`.
    pub fn fhat_sq(&self, x: &[BigRational]) -> Result<BigRational, PolyError> {
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        let v = self.eval(x)?;
        let t = one_plus_norm_sq(x);
        Ok(&v * &v / (self.weyl_norm_sq() * pow_i(&t, self.d as i64 - 1)))
    }

    /// Squared norm of the normalized gradient:
    /// `|dfhat(x)|^2 = |grad f(x)|^2 / (d^2 |f|^2 (1+|x|^2)^{d-2})`.
    pub fn dfhat_norm_sq(&self, x: &[BigRational]) -> Result<BigRational, PolyError> {
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        let g = self.gradient(x)?;
        let gsq: BigRational = g.iter().map(|v| v * v).sum();
        let t = one_plus_norm_sq(x);
        let d = rat_int(self.d as i64);
        Ok(gsq / (&d * &d * self.weyl_norm_sq() * pow_i(&t, self.d as i64 - 2)))
    }

    /// Normalized value `fhat(x)`, floating point.
    pub fn eval_fhat(&self, x: &[BigRational]) -> Result<f64, PolyError> {
        let sq = self.fhat_sq(x)?;
        let sign = if self.eval(x)?.is_negative() { -1.0 } else { 1.0 };
        Ok(sign * sqrt_f64(&sq))
    }

    /// Normalized gradient `dfhat(x)`, floating point.
    pub fn eval_dfhat(&self, x: &[BigRational]) -> Result<Vec<f64>, PolyError> {
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        let g = self.gradient(x)?;
        let t = one_plus_norm_sq(x);
        // (1+|x|^2)^{d/2-1} split into an integer power and at most one root
        let d = self.d as i64;
        let int_pow = to_f64(&pow_i(&t, d.div_euclid(2) - 1));
        let half = if d % 2 == 1 { sqrt_f64(&t) } else { 1.0 };
        let denom = self.d as f64 * self.weyl_norm() * int_pow * half;
        Ok(g.iter().map(|v| to_f64(v) / denom).collect())
    }
}

/// `1 + |x|^2` as an exact rational.
pub fn one_plus_norm_sq(x: &[BigRational]) -> BigRational {
    let mut acc = BigRational::one();
    for xi in x {
        acc += xi * xi;
    }
    acc
}

/// Homogeneous polynomial of exact degree `d` in `n + 1` variables.
#[derive(Clone, PartialEq, Eq)]
pub struct HomoPoly {
    n: usize,
    d: u32,
    coeffs: BTreeMap<MultiIndex, BigRational>,
}

impl fmt::Debug for HomoPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HomoPoly(n+1={}, d={}, {} terms)", self.n + 1, self.d, self.coeffs.len())
    }
}

impl HomoPoly {
    pub fn new(n: usize, d: u32) -> Self {
        HomoPoly { n, d, coeffs: BTreeMap::new() }
    }

    /// Number of affine variables; the polynomial has `vars() + 1` of them.
    pub fn affine_vars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> BigRational {
        self.coeffs.get(alpha).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn set_coeff(&mut self, alpha: MultiIndex, c: BigRational) -> Result<(), PolyError> {
        if alpha.len() != self.n + 1 {
            return Err(PolyError::IndexLength { expected: self.n + 1, got: alpha.len() });
        }
        if alpha.degree() != self.d {
            return Err(PolyError::DegreeOutOfRange { got: alpha.degree(), bound: self.d });
        }
        if c.is_zero() {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, c);
        }
        Ok(())
    }

    /// Set `X_0 = 1`.
    pub fn dehomogenize(&self) -> AffinePoly {
        let mut coeffs = BTreeMap::new();
        for (a, c) in &self.coeffs {
            let alpha = a.exponents()[1..].to_vec();
            coeffs.insert(MultiIndex::new(alpha), c.clone());
        }
        AffinePoly { n: self.n, d: self.d, coeffs }
    }

    pub fn eval(&self, y: &[BigRational]) -> Result<BigRational, PolyError> {
        if y.len() != self.n + 1 {
            return Err(PolyError::DimensionMismatch { expected: self.n + 1, got: y.len() });
        }
        let table = AffinePoly::power_table(y, self.d);
        let mut acc = BigRational::zero();
        for (a, c) in &self.coeffs {
            let mut term = c.clone();
            for (j, &e) in a.exponents().iter().enumerate() {
                if e > 0 {
                    term *= &table[j][e as usize];
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.n + 1);
        let mut acc = 0.0;
        for (a, c) in &self.coeffs {
            let mut term = to_f64(c);
            for (j, &e) in a.exponents().iter().enumerate() {
                term *= y[j].powi(e as i32);
            }
            acc += term;
        }
        acc
    }

    pub fn partial(&self, j: usize) -> HomoPoly {
        assert!(j <= self.n);
        let mut out = HomoPoly::new(self.n, self.d.saturating_sub(1));
        for (a, c) in &self.coeffs {
            let e = a.exponents()[j];
            if e == 0 {
                continue;
            }
            let mut alpha = a.exponents().to_vec();
            alpha[j] -= 1;
            let prev = out.coeff(&MultiIndex::new(alpha.clone()));
            out.set_coeff(MultiIndex::new(alpha), prev + c * rat_int(e as i64))
                .expect("derivative index stays homogeneous");
        }
        out
    }

    pub fn gradient(&self, y: &[BigRational]) -> Result<Vec<BigRational>, PolyError> {
        (0..=self.n).map(|j| self.partial(j).eval(y)).collect()
    }

    pub fn weyl_norm_sq(&self) -> BigRational {
        let mut acc = BigRational::zero();
        for (a, c) in &self.coeffs {
            let w = multinomial(self.d, a);
            acc += c * c / BigRational::from_integer(w);
        }
        acc
    }

    pub fn weyl_norm(&self) -> f64 {
        sqrt_f64(&self.weyl_norm_sq())
    }
}

/// Point on the unit sphere, stored in floating point.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Wraps a vector, checking `| |y| - 1 | <= 1e-12`.
    pub fn new(coords: Vec<f64>) -> Option<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= 1e-12 {
            Some(SpherePoint { coords })
        } else {
            None
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Central projection of `R^n` onto the upper half sphere:
/// `x -> (1, x) / sqrt(1 + |x|^2)`.
pub fn io_project(x: &[f64]) -> SpherePoint {
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    let scale = 1.0 / (1.0 + norm_sq).sqrt();
    let mut coords = Vec::with_capacity(x.len() + 1);
    coords.push(scale);
    coords.extend(x.iter().map(|v| v * scale));
    SpherePoint::new(coords).expect("central projection lands on the sphere")
}
