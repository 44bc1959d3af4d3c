//! Finite-precision evaluation kernels. Each kernel returns the computed
//! value together with the error budget its analysis guarantees; the audit
//! suites verify measured errors against those budgets on random inputs.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{FpError, RoundedFloat, ThetaBudget};
use crate::poly::{multinomial, AffinePoly, MultiIndex};

fn log2_len(m: usize) -> f64 {
    (m.max(1) as f64).log2()
}

/// Sum of a slice by recursively halving it, every addition rounded.
fn balanced_sum(v: &[RoundedFloat], prec: u32) -> RoundedFloat {
    match v.len() {
        0 => RoundedFloat::zero(prec),
        1 => v[0].clone(),
        len => {
            let (lo, hi) = v.split_at(len / 2);
            balanced_sum(lo, prec).add(&balanced_sum(hi, prec))
        }
    }
}

/// Inner product: componentwise rounded products, then a balanced summation
/// tree. The absolute error is bounded by `<|x|, |y|>` times the returned
/// budget.
pub fn balanced_inner_product(
    x: &[RoundedFloat],
    y: &[RoundedFloat],
) -> Result<(RoundedFloat, ThetaBudget), FpError> {
    if x.len() != y.len() {
        return Err(FpError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Ok((RoundedFloat::zero(2), ThetaBudget::new(0.0)));
    }
    let prec = x[0].precision();
    let products: Vec<RoundedFloat> = x.iter().zip(y).map(|(a, b)| a.mul(b)).collect();
    let sum = balanced_sum(&products, prec);
    Ok((sum, ThetaBudget::new(log2_len(x.len()) + 2.0)))
}

/// Euclidean norm: balanced sum of squares, one rounded square root.
/// The relative error is bounded by the returned budget.
pub fn rounded_norm(x: &[RoundedFloat]) -> (RoundedFloat, ThetaBudget) {
    if x.is_empty() {
        return (RoundedFloat::zero(2), ThetaBudget::new(0.0));
    }
    let prec = x[0].precision();
    let squares: Vec<RoundedFloat> = x.iter().map(|a| a.mul(a)).collect();
    let sum = balanced_sum(&squares, prec);
    let root = sum.sqrt().expect("sum of squares is non-negative");
    (root, ThetaBudget::new(log2_len(x.len()) + 3.0))
}

fn powi_unsigned(x: &RoundedFloat, mut k: u32) -> RoundedFloat {
    let prec = x.precision();
    if k == 0 {
        return RoundedFloat::from_u64(1, prec);
    }
    let mut base = x.clone();
    let mut acc: Option<RoundedFloat> = None;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.mul(&base),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = base.mul(&base);
    }
    acc.expect("k > 0 leaves a product")
}

/// Monomial `x^alpha` by square-and-multiply per coordinate. Exact for
/// `|alpha| <= 1`, relative error within `theta_{|alpha|-1}` otherwise.
pub fn rounded_power(x: &[RoundedFloat], alpha: &MultiIndex) -> (RoundedFloat, ThetaBudget) {
    assert_eq!(x.len(), alpha.len(), "dimension mismatch");
    let prec = x.first().map_or(2, |v| v.precision());
    let mut acc: Option<RoundedFloat> = None;
    for (xi, &e) in x.iter().zip(alpha.exponents()) {
        if e == 0 {
            continue;
        }
        let p = powi_unsigned(xi, e);
        acc = Some(match acc {
            None => p,
            Some(a) => a.mul(&p),
        });
    }
    let value = acc.unwrap_or_else(|| RoundedFloat::from_u64(1, prec));
    let degree = alpha.degree();
    (value, ThetaBudget::new(degree.saturating_sub(1) as f64))
}

/// Scalar integer power, negative exponents via one rounded reciprocal.
pub fn rounded_powi(x: &RoundedFloat, k: i64) -> Result<(RoundedFloat, ThetaBudget), FpError> {
    if k >= 0 {
        let v = powi_unsigned(x, k as u32);
        return Ok((v, ThetaBudget::new((k - 1).max(0) as f64)));
    }
    let p = powi_unsigned(x, (-k) as u32);
    let one = RoundedFloat::from_u64(1, x.precision());
    let v = one.div(&p)?;
    Ok((v, ThetaBudget::new((2 * (-k - 1) + 1) as f64)))
}

/// Weyl norm in floating point: scale each coefficient by the rounded
/// `binomial(d, alpha)^{-1/2}`, then take the rounded Euclidean norm.
/// The relative error is within the returned budget.
pub fn rounded_weyl_norm(f: &AffinePoly, prec: u32) -> (RoundedFloat, ThetaBudget) {
    let n = f.vars();
    let d = f.degree_bound();
    let indices = MultiIndex::all_up_to(n, d);
    let mut lossy = false;
    let mut scaled = Vec::with_capacity(indices.len());
    for alpha in &indices {
        let c = f.coeff(alpha);
        let cf = RoundedFloat::round_rational(&c, prec);
        if cf.to_rational() != c {
            lossy = true;
        }
        let mut ext = Vec::with_capacity(n + 1);
        ext.push(d - alpha.degree());
        ext.extend_from_slice(alpha.exponents());
        let w: BigInt = multinomial(d, &MultiIndex::new(ext));
        let wf = RoundedFloat::round_rational(&BigRational::from_integer(w), prec);
        let root = wf.sqrt().expect("multinomial weights are positive");
        scaled.push(cf.div(&root).expect("weights are nonzero"));
    }
    let (norm, _) = rounded_norm(&scaled);
    let slack = if lossy { 9.0 } else { 8.0 };
    (norm, ThetaBudget::new(log2_len(indices.len()) + slack))
}

/// Smallest precision whose round-off unit satisfies the normalized
/// evaluation kernels' requirement `u <= 1 / (64 d log2(n+1))`.
pub fn min_precision_for_kernels(n: usize, d: u32) -> u32 {
    let bound = 64.0 * d as f64 * ((n + 1) as f64).log2();
    let mut m = 2u32;
    while RoundedFloat::unit_roundoff(m) > 1.0 / bound {
        m += 1;
        assert!(m < 128, "kernel precision requirement out of range");
    }
    m
}

/// Error budget of the normalized value/gradient kernels; the absolute error
/// is bounded by `max_envelope(|x|) * budget.bound(u)`.
pub fn fhat_kernel_budget(n: usize, d: u32) -> ThetaBudget {
    ThetaBudget::new(32.0 * d as f64 * ((n + 1) as f64).log2())
}

/// Both displayed error envelopes; the audits use the looser one.
pub fn max_envelope(x_norm: f64) -> f64 {
    (1.0 + x_norm).sqrt().max((1.0 + x_norm * x_norm).sqrt())
}

/// Closed-form absolute error bound for points in `[-a, a]^n`, valid when
/// the kernel precision requirement holds.
pub fn fhat_error_bound(n: usize, d: u32, a: f64, u: f64) -> f64 {
    64.0 * 2f64.sqrt()
        * d as f64
        * ((n + 1) as f64).sqrt()
        * ((n + 1) as f64).log2()
        * a.max(1.0)
        * u
}

fn check_precision(n: usize, d: u32, prec: u32) -> Result<(), FpError> {
    let required = min_precision_for_kernels(n, d);
    if prec < required {
        return Err(FpError::PrecisionTooLow { required, got: prec });
    }
    Ok(())
}

fn extended_point(x: &[RoundedFloat], prec: u32) -> Vec<RoundedFloat> {
    let mut ext = Vec::with_capacity(x.len() + 1);
    ext.push(RoundedFloat::from_u64(1, prec));
    ext.extend_from_slice(x);
    ext
}

/// Normalized value `fhat(x) = f(x) / (|f| |(1,x)|^{d-1})` evaluated in
/// `prec`-bit arithmetic: rounded inputs, dense inner product for the
/// numerator, rounded Weyl norm and vector norm for the denominator, one
/// rounded division.
pub fn fl_fhat(
    f: &AffinePoly,
    x: &[BigRational],
    prec: u32,
) -> Result<(RoundedFloat, ThetaBudget), FpError> {
    let n = f.vars();
    let d = f.degree_bound();
    assert_eq!(x.len(), n, "dimension mismatch");
    check_precision(n, d, prec)?;
    let xr: Vec<RoundedFloat> = x
        .iter()
        .map(|xi| RoundedFloat::round_rational(xi, prec))
        .collect();
    let indices = MultiIndex::all_up_to(n, d);
    let coeffs: Vec<RoundedFloat> = indices
        .iter()
        .map(|a| RoundedFloat::round_rational(&f.coeff(a), prec))
        .collect();
    let monomials: Vec<RoundedFloat> = indices
        .iter()
        .map(|a| rounded_power(&xr, a).0)
        .collect();
    let (num, _) = balanced_inner_product(&coeffs, &monomials)?;
    let (weyl, _) = rounded_weyl_norm(f, prec);
    let (point_norm, _) = rounded_norm(&extended_point(&xr, prec));
    let (pw, _) = rounded_powi(&point_norm, d as i64 - 1)?;
    let value = num.div(&weyl.mul(&pw))?;
    Ok((value, fhat_kernel_budget(n, d)))
}

/// Norm of the normalized gradient
/// `|dfhat(x)| = |grad f(x)| / (d |f| |(1,x)|^{d-2})` in `prec`-bit
/// arithmetic; partial values are computed like `fl_fhat` numerators and
/// combined with the rounded norm.
pub fn fl_dfhat_norm(
    f: &AffinePoly,
    x: &[BigRational],
    prec: u32,
) -> Result<(RoundedFloat, ThetaBudget), FpError> {
    let n = f.vars();
    let d = f.degree_bound();
    assert_eq!(x.len(), n, "dimension mismatch");
    check_precision(n, d, prec)?;
    let xr: Vec<RoundedFloat> = x
        .iter()
        .map(|xi| RoundedFloat::round_rational(xi, prec))
        .collect();
    let indices = MultiIndex::all_up_to(n, d.saturating_sub(1));
    let monomials: Vec<RoundedFloat> = indices
        .iter()
        .map(|a| rounded_power(&xr, a).0)
        .collect();
    let mut partial_values = Vec::with_capacity(n);
    for partial in f.partials() {
        let coeffs: Vec<RoundedFloat> = indices
            .iter()
            .map(|a| RoundedFloat::round_rational(&partial.coeff(a), prec))
            .collect();
        let (v, _) = balanced_inner_product(&coeffs, &monomials)?;
        partial_values.push(v);
    }
    let (grad_norm, _) = rounded_norm(&partial_values);
    let (weyl, _) = rounded_weyl_norm(f, prec);
    let (point_norm, _) = rounded_norm(&extended_point(&xr, prec));
    let (pw, _) = rounded_powi(&point_norm, d as i64 - 2)?;
    let degree = RoundedFloat::from_u64(d as u64, prec);
    let value = grad_norm.div(&degree.mul(&weyl).mul(&pw))?;
    Ok((value, fhat_kernel_budget(n, d)))
}
