//! Local condition number of a polynomial at a point, its independent
//! projection-distance route, the regularity inequality and the local size
//! bounds that feed continuous amortization.
//!
//! The condition number compares the Weyl norm of `f` against how far `f`
//! is from having a singular zero at `x`; everything here reduces to exact
//! rational arithmetic on squared quantities.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{pow_i, rat_int, sqrt_f64, to_f64};
use crate::poly::{multinomial, one_plus_norm_sq, AffinePoly, MultiIndex, PolyError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConditionError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("representer system is degenerate")]
    DegenerateGram,
    #[error("condition number is infinite: the polynomial is singular at the point")]
    Singular,
    #[error("bound formula requires degree > 1")]
    DegreeTooSmall,
}

/// Condition number as an exact squared rational, or infinity when the
/// polynomial has a singular zero at the point.
#[derive(Clone, Debug, PartialEq)]
pub enum Kappa {
    Finite { sq: BigRational },
    Infinite,
}

impl Kappa {
    pub fn is_finite(&self) -> bool {
        matches!(self, Kappa::Finite { .. })
    }

    pub fn sq(&self) -> Option<&BigRational> {
        match self {
            Kappa::Finite { sq } => Some(sq),
            Kappa::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Kappa::Finite { sq } => sqrt_f64(sq),
            Kappa::Infinite => f64::INFINITY,
        }
    }
}

/// Condition value with its two denominator components:
/// the squared normalized value and the squared tangential gradient term
/// (already scaled by `1/d`).
#[derive(Clone, Debug)]
pub struct ConditionValue {
    pub kappa: Kappa,
    pub value_term_sq: BigRational,
    pub grad_term_sq: BigRational,
}

/// Exact denominator pieces of the condition number at `x`:
/// `(F(y)^2, |grad F(y)|^2)` for `F = f^h` and `y` the central projection
/// of `x`, both rational thanks to homogeneity.
fn sphere_terms(
    f: &AffinePoly,
    x: &[BigRational],
) -> Result<(BigRational, BigRational), ConditionError> {
    if f.is_zero() {
        return Err(PolyError::ZeroPolynomial.into());
    }
    let d = f.degree_bound().max(1) as i64;
    let t = one_plus_norm_sq(x);
    let v = f.eval(x)?;
    let value_sq = &v * &v / pow_i(&t, d);

    // gradient of f^h at (1, x): coordinate 0 is d f(x) - <x, grad f(x)>,
    // the others are the affine partials
    let grad = f.gradient(x)?;
    let dot: BigRational = x.iter().zip(&grad).map(|(xi, gi)| xi * gi).sum();
    let g0 = rat_int(d) * &v - dot;
    let mut grad_h_sq = &g0 * &g0;
    for gi in &grad {
        grad_h_sq += gi * gi;
    }
    let grad_sphere_sq = grad_h_sq / pow_i(&t, d - 1);
    Ok((value_sq, grad_sphere_sq))
}

/// Local condition number `|f| / sqrt(f^h(y)^2 + |tangential grad|^2 / d)`
/// at `y` the central projection of `x`. The tangential component is the
/// full gradient minus its radial part `d f^h(y) y` (Euler's identity).
pub fn kappa_aff(f: &AffinePoly, x: &[BigRational]) -> Result<ConditionValue, ConditionError> {
    let d = f.degree_bound().max(1) as i64;
    let (value_sq, grad_sphere_sq) = sphere_terms(f, x)?;
    // |P grad|^2 = |grad|^2 - d^2 F(y)^2
    let tangent_sq = grad_sphere_sq - rat_int(d * d) * &value_sq;
    debug_assert!(!tangent_sq.is_negative());
    let grad_term_sq = tangent_sq / rat_int(d);
    let denom = &value_sq + &grad_term_sq;
    let kappa = if denom.is_zero() {
        Kappa::Infinite
    } else {
        Kappa::Finite { sq: f.weyl_norm_sq() / denom }
    };
    Ok(ConditionValue { kappa, value_term_sq: value_sq, grad_term_sq })
}

/// Fast floating-point path for Monte-Carlo sampling.
pub struct KappaEvaluator {
    terms: Vec<(Vec<u32>, f64)>,
    partial_terms: Vec<Vec<(Vec<u32>, f64)>>,
    weyl_sq: f64,
    d: f64,
    n: usize,
}

impl KappaEvaluator {
    pub fn new(f: &AffinePoly) -> Self {
        let to_pairs = |p: &AffinePoly| {
            p.terms()
                .map(|(a, c)| (a.exponents().to_vec(), to_f64(c)))
                .collect::<Vec<_>>()
        };
        KappaEvaluator {
            terms: to_pairs(f),
            partial_terms: f.partials().iter().map(to_pairs).collect(),
            weyl_sq: to_f64(&f.weyl_norm_sq()),
            d: f.degree_bound().max(1) as f64,
            n: f.vars(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn eval_terms(terms: &[(Vec<u32>, f64)], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (alpha, c) in terms {
            let mut t = *c;
            for (j, &e) in alpha.iter().enumerate() {
                if e > 0 {
                    t *= x[j].powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// `kappa_aff(f, x)` in floating point; `+inf` at singular points.
    pub fn kappa(&self, x: &[f64]) -> f64 {
        let t = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        let v = Self::eval_terms(&self.terms, x);
        let grad: Vec<f64> = self
            .partial_terms
            .iter()
            .map(|p| Self::eval_terms(p, x))
            .collect();
        let dot: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let g0 = self.d * v - dot;
        let grad_h_sq = g0 * g0 + grad.iter().map(|g| g * g).sum::<f64>();
        let value_sq = v * v / t.powi(self.d as i32);
        let sphere_grad_sq = grad_h_sq / t.powi(self.d as i32 - 1);
        let tangent_sq = (sphere_grad_sq - self.d * self.d * value_sq).max(0.0);
        let denom = value_sq + tangent_sq / self.d;
        if denom == 0.0 {
            f64::INFINITY
        } else {
            (self.weyl_sq / denom).sqrt()
        }
    }
}

/// Weyl inner product of two coefficient vectors over the homogeneous
/// index set of degree `d`.
fn weyl_dot(u: &[BigRational], v: &[BigRational], weights: &[BigInt]) -> BigRational {
    let mut acc = BigRational::zero();
    for ((a, b), w) in u.iter().zip(v).zip(weights) {
        if a.is_zero() || b.is_zero() {
            continue;
        }
        acc += a * b / BigRational::from_integer(w.clone());
    }
    acc
}

/// Condition number via the distance to the set of polynomials singular at
/// `x`: represent evaluation and the `n` partial-derivative functionals as
/// Weyl-metric vectors, orthogonalize them exactly, and measure the norm of
/// the projection of `f` onto their span. Serves as the independent oracle
/// for the condition number.
pub fn kappa_via_projection(f: &AffinePoly, x: &[BigRational]) -> Result<Kappa, ConditionError> {
    if f.is_zero() {
        return Err(PolyError::ZeroPolynomial.into());
    }
    if x.len() != f.vars() {
        return Err(PolyError::DimensionMismatch { expected: f.vars(), got: x.len() }.into());
    }
    let n = f.vars();
    let d = f.degree_bound().max(1);
    let indices = MultiIndex::all_exact(n + 1, d);
    let weights: Vec<BigInt> = indices.iter().map(|a| multinomial(d, a)).collect();

    // homogeneous point (1, x)
    let mut y = Vec::with_capacity(n + 1);
    y.push(BigRational::one());
    y.extend_from_slice(x);
    let pow = |base: &BigRational, e: u32| pow_i(base, e as i64);

    // representer of a functional L: coordinate at alpha is
    // multinomial(d, alpha) * L(X^alpha)
    let mut reps: Vec<Vec<BigRational>> = Vec::with_capacity(n + 1);
    // evaluation functional
    reps.push(
        indices
            .iter()
            .zip(&weights)
            .map(|(alpha, w)| {
                let mut m = BigRational::from_integer(w.clone());
                for (j, &e) in alpha.exponents().iter().enumerate() {
                    m *= pow(&y[j], e);
                }
                m
            })
            .collect(),
    );
    // partial derivatives in the affine directions
    for i in 1..=n {
        reps.push(
            indices
                .iter()
                .zip(&weights)
                .map(|(alpha, w)| {
                    let e_i = alpha.exponents()[i];
                    if e_i == 0 {
                        return BigRational::zero();
                    }
                    let mut m = BigRational::from_integer(w.clone()) * rat_int(e_i as i64);
                    for (j, &e) in alpha.exponents().iter().enumerate() {
                        let e = if j == i { e - 1 } else { e };
                        m *= pow(&y[j], e);
                    }
                    m
                })
                .collect(),
        );
    }

    // modified Gram-Schmidt without normalization: exact rationals only
    let mut basis: Vec<Vec<BigRational>> = Vec::with_capacity(n + 1);
    let mut basis_norm_sq: Vec<BigRational> = Vec::with_capacity(n + 1);
    for mut r in reps {
        for (u, usq) in basis.iter().zip(&basis_norm_sq) {
            let c = weyl_dot(&r, u, &weights) / usq;
            for (rj, uj) in r.iter_mut().zip(u) {
                *rj -= &c * uj;
            }
        }
        let nsq = weyl_dot(&r, &r, &weights);
        if nsq.is_zero() {
            return Err(ConditionError::DegenerateGram);
        }
        basis.push(r);
        basis_norm_sq.push(nsq);
    }

    // coefficient vector of f^h over the same index ordering
    let fh = f.homogenize();
    let fvec: Vec<BigRational> = indices.iter().map(|a| fh.coeff(a)).collect();
    let mut proj_sq = BigRational::zero();
    for (u, usq) in basis.iter().zip(&basis_norm_sq) {
        let c = weyl_dot(&fvec, u, &weights);
        proj_sq += &c * &c / usq;
    }
    if proj_sq.is_zero() {
        return Ok(Kappa::Infinite);
    }
    Ok(Kappa::Finite { sq: f.weyl_norm_sq() / proj_sq })
}

/// Outcome of the regularity inequality at a point: at least one of the two
/// normalized quantities must exceed `1 / (2 sqrt(2d) kappa)`.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub lhs_value: f64,
    pub lhs_gradient: f64,
    pub rhs: f64,
    /// Exact rational comparison `max(lhs)^2 > rhs^2`.
    pub holds: bool,
}

pub fn regularity_check(
    f: &AffinePoly,
    x: &[BigRational],
) -> Result<RegularityReport, ConditionError> {
    let cv = kappa_aff(f, x)?;
    let kappa_sq = cv.kappa.sq().ok_or(ConditionError::Singular)?;
    let d = f.degree_bound().max(1) as i64;
    let value_sq = f.fhat_sq(x)?;
    let grad_sq = f.dfhat_norm_sq(x)?;
    // rhs^2 = 1 / (8 d kappa^2)
    let rhs_sq = BigRational::one() / (rat_int(8 * d) * kappa_sq);
    let max_sq = if value_sq > grad_sq { &value_sq } else { &grad_sq };
    let holds = max_sq > &rhs_sq;
    Ok(RegularityReport {
        lhs_value: sqrt_f64(&value_sq),
        lhs_gradient: sqrt_f64(&grad_sq),
        rhs: sqrt_f64(&rhs_sq),
        holds,
    })
}

/// Volume threshold below which every box containing `x` passes the exact
/// certification test: `(2^{5/2} d n kappa)^{-n}`. Zero at singular points.
pub fn local_size_bound(f: &AffinePoly, x: &[BigRational]) -> Result<f64, ConditionError> {
    size_bound_with_constant(f, x, 32.0)
}

/// Same threshold for the finite-precision test, with constant `2^6`.
pub fn local_size_bound_fp(f: &AffinePoly, x: &[BigRational]) -> Result<f64, ConditionError> {
    size_bound_with_constant(f, x, 4096.0)
}

fn size_bound_with_constant(
    f: &AffinePoly,
    x: &[BigRational],
    c_sq: f64,
) -> Result<f64, ConditionError> {
    let cv = kappa_aff(f, x)?;
    let n = f.vars() as f64;
    let d = f.degree_bound().max(1) as f64;
    match cv.kappa.sq() {
        None => Ok(0.0),
        Some(sq) => {
            // (c d n)^{-n} kappa^{-n} computed from the exact square
            let base = c_sq * d * d * n * n * to_f64(sq);
            Ok(base.powf(-n / 2.0))
        }
    }
}

/// Box-count bound of the Taylor-based interval variant, reported from a
/// sampled condition moment: `d^{2n} max{1, a^n} 2^{3n^2 + 2n} * moment`.
pub fn bgt_bound_report(
    n: usize,
    d: u32,
    a: f64,
    kappa_moment: f64,
) -> Result<f64, ConditionError> {
    if d <= 1 {
        return Err(ConditionError::DegreeTooSmall);
    }
    let nf = n as f64;
    Ok((d as f64).powf(2.0 * nf)
        * a.powf(nf).max(1.0)
        * (3.0 * nf * nf + 2.0 * nf).exp2()
        * kappa_moment)
}

/// Pointwise comparison bound relating the Taylor-based size measure to the
/// condition number: `2^{3n} d^2 kappa`.
pub fn bgt_pointwise_bound(n: usize, d: u32, kappa: f64) -> f64 {
    (3.0 * n as f64).exp2() * (d as f64).powi(2) * kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn x1(n: usize) -> AffinePoly {
        let mut alpha = vec![0u32; n];
        alpha[0] = 1;
        AffinePoly::from_terms(n, 1, [(alpha, rat_int(1))]).unwrap()
    }

    #[test]
    fn linear_poly_has_unit_condition_everywhere() {
        let f = x1(2);
        for x in [[rat_int(0), rat_int(0)], [rat(3, 7), rat(-2, 5)], [rat_int(50), rat_int(1)]] {
            let cv = kappa_aff(&f, &x).unwrap();
            assert_eq!(cv.kappa.sq().unwrap(), &rat_int(1));
        }
    }

    #[test]
    fn singular_point_is_infinite() {
        let f = AffinePoly::from_terms(2, 2, [(vec![2, 0], rat_int(1))]).unwrap();
        let cv = kappa_aff(&f, &[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(cv.kappa, Kappa::Infinite);
        let proj = kappa_via_projection(&f, &[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(proj, Kappa::Infinite);
        assert_eq!(local_size_bound(&f, &[rat_int(0), rat_int(0)]).unwrap(), 0.0);
    }

    #[test]
    fn scaling_invariance_is_exact() {
        let f = crate::poly::tests::demo_quartic();
        let x = [rat(1, 3), rat(-2, 7)];
        let base = kappa_aff(&f, &x).unwrap().kappa;
        for t in [rat(5, 2), rat(-1, 9), rat_int(100)] {
            let scaled = f.scale(&t);
            assert_eq!(kappa_aff(&scaled, &x).unwrap().kappa, base);
        }
    }

    #[test]
    fn projection_route_agrees_exactly() {
        let f = crate::poly::tests::demo_quartic();
        for x in [[rat_int(0), rat_int(0)], [rat(1, 2), rat(-1, 3)], [rat_int(4), rat_int(9)]] {
            let direct = kappa_aff(&f, &x).unwrap().kappa;
            let proj = kappa_via_projection(&f, &x).unwrap();
            assert_eq!(direct, proj, "{x:?}");
        }
    }

    #[test]
    fn evaluation_representer_has_unit_condition() {
        // the representer of evaluation at x is orthogonal to the singular
        // set, so its projection is itself and kappa = 1
        let n = 2;
        let d = 3;
        let x = [rat(1, 2), rat(-1, 4)];
        let mut y = vec![BigRational::one()];
        y.extend_from_slice(&x);
        let mut rep = AffinePoly::new(n, d);
        for alpha in MultiIndex::all_exact(n + 1, d) {
            let w = multinomial(d, &alpha);
            let mut c = BigRational::from_integer(w);
            for (j, &e) in alpha.exponents().iter().enumerate() {
                c *= pow_i(&y[j], e as i64);
            }
            let aff = MultiIndex::new(alpha.exponents()[1..].to_vec());
            rep.set_coeff(aff, c).unwrap();
        }
        let proj = kappa_via_projection(&rep, &x).unwrap();
        let direct = kappa_aff(&rep, &x).unwrap().kappa;
        assert_eq!(proj, direct);
        assert_eq!(proj.sq().unwrap(), &rat_int(1));
    }

    #[test]
    fn regularity_example_at_origin() {
        let f = x1(2);
        let r = regularity_check(&f, &[rat_int(0), rat_int(0)]).unwrap();
        assert!(r.holds);
        assert_eq!(r.lhs_value, 0.0);
        assert!((r.lhs_gradient - 1.0).abs() < 1e-15);
        assert!((r.rhs - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn size_bound_values() {
        let f = x1(2);
        let x = [rat_int(0), rat_int(0)];
        // kappa = 1, d = 1, n = 2: (2^{5/2} * 2)^{-2} = 2^{-7}
        let b = local_size_bound(&f, &x).unwrap();
        assert!((b - 1.0 / 128.0).abs() < 1e-12);
        let bfp = local_size_bound_fp(&f, &x).unwrap();
        assert!((bfp - (2.0f64).powi(-14)).abs() < 1e-15);
        // constant ratio 2^{7n/2}
        assert!((b / bfp - 2f64.powi(7)).abs() < 1e-6);
    }

    #[test]
    fn bgt_report_formula() {
        // n = 2, d = 4, a = 1, moment 10
        let v = bgt_bound_report(2, 4, 1.0, 10.0).unwrap();
        assert_eq!(v, 256.0 * 65536.0 * 10.0);
        assert!(bgt_bound_report(2, 1, 1.0, 1.0).is_err());
        assert_eq!(bgt_pointwise_bound(2, 4, 2.0), 64.0 * 16.0 * 2.0);
    }

    #[test]
    fn kappa_floating_path_tracks_exact() {
        let f = crate::poly::tests::demo_quartic();
        let ev = KappaEvaluator::new(&f);
        for x in [[0.0, 0.0], [0.5, -0.25], [3.0, 8.0]] {
            let xr: Vec<BigRational> =
                x.iter().map(|v| BigRational::from_float(*v).unwrap()).collect();
            let exact = kappa_aff(&f, &xr).unwrap().kappa.to_f64();
            let fast = ev.kappa(&x);
            assert!((exact - fast).abs() / exact < 1e-9, "{x:?}");
        }
    }
}
