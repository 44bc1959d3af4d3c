//! Software floating point with `m` significant binary digits and
//! round-to-nearest-even semantics, plus the error-budget bookkeeping used
//! to audit every kernel against its analytic bound.
//!
//! Values have the form `+/- 0.b_1...b_m * 2^e` with `b_1 = 1` (or are zero);
//! the significand is an arbitrary-size integer so any precision is supported
//! uniformly, and the exponent is unbounded: there is no overflow, underflow
//! or NaN. The round-off unit is `u = 2^{-(m-1)}`.

mod kernels;

pub use kernels::{
    balanced_inner_product, fhat_error_bound, fhat_kernel_budget, fl_dfhat_norm, fl_fhat,
    max_envelope, min_precision_for_kernels, rounded_norm, rounded_power, rounded_powi,
    rounded_weyl_norm,
};

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::{self, round_mantissa, round_sqrt_mantissa};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FpError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("precision {got} below the kernel requirement {required}")]
    PrecisionTooLow { required: u32, got: u32 },
}

/// Floating value with exactly `prec` significant bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundedFloat {
    /// Signed significand; zero, or `2^{prec-1} <= |mantissa| < 2^prec`.
    mantissa: BigInt,
    /// Value is `mantissa * 2^exp`.
    exp: i64,
    prec: u32,
}

impl RoundedFloat {
    pub fn zero(prec: u32) -> Self {
        assert!(prec >= 2, "precision must be at least 2");
        RoundedFloat { mantissa: BigInt::zero(), exp: 0, prec }
    }

    /// Round-off unit `2^{-(prec-1)}`.
    pub fn unit_roundoff(prec: u32) -> f64 {
        (-(prec as f64 - 1.0)).exp2()
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    /// Round an exact rational to `prec` bits, nearest-even.
    pub fn round_rational(x: &BigRational, prec: u32) -> Self {
        assert!(prec >= 2, "precision must be at least 2");
        if x.is_zero() {
            return Self::zero(prec);
        }
        let (m, e) = round_mantissa(x.numer().magnitude(), x.denom().magnitude(), prec);
        let mantissa = BigInt::from_biguint(
            if x.is_negative() { Sign::Minus } else { Sign::Plus },
            m,
        );
        RoundedFloat { mantissa, exp: e, prec }
    }

    pub fn from_u64(v: u64, prec: u32) -> Self {
        Self::round_rational(&BigRational::from_integer(BigInt::from(v)), prec)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.mantissa.is_zero() {
            return BigRational::zero();
        }
        if self.exp >= 0 {
            BigRational::from_integer(&self.mantissa << self.exp as u64)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    pub fn to_f64(&self) -> f64 {
        arith::to_f64(&self.to_rational())
    }

    pub fn abs(&self) -> Self {
        RoundedFloat { mantissa: self.mantissa.abs(), ..self.clone() }
    }

    pub fn neg(&self) -> Self {
        RoundedFloat { mantissa: -&self.mantissa, ..self.clone() }
    }

    fn same_prec(&self, other: &Self) -> u32 {
        assert_eq!(
            self.prec, other.prec,
            "operands must share the working precision"
        );
        self.prec
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.same_prec(other);
        Self::round_rational(&(self.to_rational() + other.to_rational()), prec)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.same_prec(other);
        Self::round_rational(&(self.to_rational() - other.to_rational()), prec)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.same_prec(other);
        if self.is_zero() || other.is_zero() {
            return Self::zero(prec);
        }
        let m = &self.mantissa * &other.mantissa;
        let (rm, re) = round_mantissa(m.magnitude(), &BigUint::one(), prec);
        RoundedFloat {
            mantissa: BigInt::from_biguint(m.sign(), rm),
            exp: re + self.exp + other.exp,
            prec,
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self, FpError> {
        let prec = self.same_prec(other);
        if other.is_zero() {
            return Err(FpError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Self::zero(prec));
        }
        let (rm, re) = round_mantissa(self.mantissa.magnitude(), other.mantissa.magnitude(), prec);
        let sign = if self.mantissa.sign() == other.mantissa.sign() {
            Sign::Plus
        } else {
            Sign::Minus
        };
        Ok(RoundedFloat {
            mantissa: BigInt::from_biguint(sign, rm),
            exp: re + self.exp - other.exp,
            prec,
        })
    }

    pub fn sqrt(&self) -> Result<Self, FpError> {
        if self.mantissa.is_negative() {
            return Err(FpError::NegativeSqrt);
        }
        if self.is_zero() {
            return Ok(Self::zero(self.prec));
        }
        // absorb exponent parity into the significand
        let (m, e) = if self.exp.rem_euclid(2) == 0 {
            (self.mantissa.magnitude().clone(), self.exp)
        } else {
            (self.mantissa.magnitude() << 1u32, self.exp - 1)
        };
        let (rm, re) = round_sqrt_mantissa(&m, &BigUint::one(), self.prec);
        Ok(RoundedFloat {
            mantissa: BigInt::from(rm),
            exp: re + e / 2,
            prec: self.prec,
        })
    }
}

impl PartialOrd for RoundedFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RoundedFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.mantissa.sign(), other.mantissa.sign()) {
            (Sign::Minus, Sign::NoSign | Sign::Plus) => return Ordering::Less,
            (Sign::NoSign, Sign::Plus) => return Ordering::Less,
            (Sign::Plus, Sign::NoSign | Sign::Minus) => return Ordering::Greater,
            (Sign::NoSign, Sign::Minus) => return Ordering::Greater,
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            _ => {}
        }
        // same nonzero sign: align exponents and compare significands
        let (a, ea, b, eb) = (&self.mantissa, self.exp, &other.mantissa, other.exp);
        let ord = if ea >= eb {
            (a << (ea - eb) as u64).cmp(b)
        } else {
            a.cmp(&(b << (eb - ea) as u64))
        };
        ord
    }
}

impl std::fmt::Display for RoundedFloat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", arith::format_number(&self.to_rational()))
    }
}

/// Accumulated relative-error budget: a `theta_k` symbol whose magnitude is
/// bounded by `k u / (1 - k u)` whenever `k u < 1/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaBudget {
    k: f64,
}

impl ThetaBudget {
    pub fn new(k: f64) -> Self {
        assert!(k >= 0.0);
        ThetaBudget { k }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Budget of `(1 + theta_s)(1 + theta_s')`: subscripts add.
    pub fn compose(self, other: Self) -> Self {
        ThetaBudget { k: self.k + other.k }
    }

    /// Budget of a sum of two error terms: the larger subscript wins.
    pub fn join(self, other: Self) -> Self {
        ThetaBudget { k: self.k.max(other.k) }
    }

    /// Budget of `(1 + theta_s)^{-1}`: the subscript doubles.
    pub fn reciprocal(self) -> Self {
        ThetaBudget { k: 2.0 * self.k }
    }

    /// Budget of `sqrt(1 + theta_s)`: unchanged.
    pub fn sqrt(self) -> Self {
        self
    }

    /// Budget of `t * theta_s`.
    pub fn scaled(self, t: f64) -> Self {
        ThetaBudget { k: t.abs().max(1.0) * self.k }
    }

    /// Magnitude bound `k u / (1 - k u)`; infinite once `k u >= 1/2`.
    pub fn bound(&self, u: f64) -> f64 {
        let ku = self.k * u;
        if ku >= 0.5 {
            f64::INFINITY
        } else {
            ku / (1.0 - ku)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{from_f64, rat, rat_int};
    use proptest::prelude::*;

    fn rf(x: f64, prec: u32) -> RoundedFloat {
        RoundedFloat::round_rational(&from_f64(x).unwrap(), prec)
    }

    #[test]
    fn representable_values_round_to_themselves() {
        for x in [1.0, -0.5, 3.25, 1024.0, -0.015625] {
            let r = rf(x, 24);
            assert_eq!(r.to_f64(), x);
            let again = RoundedFloat::round_rational(&r.to_rational(), 24);
            assert_eq!(again, r);
        }
    }

    #[test]
    fn round_examples() {
        // 0.3 at three bits is 0.3125
        assert_eq!(rf(0.3, 3).to_rational(), rat(5, 16));
        // 1/3 at four bits: 1.0101... rounds up to 1.011 * 2^-2 = 11/32
        let third = RoundedFloat::round_rational(&rat(1, 3), 4);
        assert_eq!(third.to_rational(), rat(11, 32));
    }

    #[test]
    fn relative_error_within_unit_roundoff() {
        let mut rng_state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        for _ in 0..2000 {
            let bits = next();
            let x = f64::from_bits(bits % (1u64 << 62));
            if !x.is_finite() || x == 0.0 {
                continue;
            }
            let m = 2 + (next() % 70) as u32;
            let r = rat_from(x);
            let rounded = RoundedFloat::round_rational(&r, m).to_rational();
            let rel = ((&rounded - &r) / &r).abs();
            let u = from_f64(RoundedFloat::unit_roundoff(m)).unwrap();
            assert!(rel <= u, "m={m} x={x}");
        }

        fn rat_from(x: f64) -> BigRational {
            from_f64(x).unwrap()
        }
    }

    #[test]
    fn arithmetic_edge_cases() {
        let prec = 24;
        let x = rf(1.5, prec);
        let zero = RoundedFloat::zero(prec);
        assert_eq!(x.add(&zero), x);
        assert_eq!(x.sub(&x), zero);
        // exact results stay exact
        let four = rf(4.0, prec);
        assert_eq!(four.sqrt().unwrap().to_f64(), 2.0);
        assert_eq!(rf(6.0, prec).mul(&rf(12.0, prec)).to_f64(), 72.0);
        assert_eq!(
            rf(1.0, prec).div(&rf(8.0, prec)).unwrap().to_f64(),
            0.125
        );
        assert_eq!(zero.div(&x).unwrap(), zero);
        assert_eq!(x.div(&zero), Err(FpError::DivisionByZero));
        assert_eq!(rf(-2.0, prec).sqrt(), Err(FpError::NegativeSqrt));
    }

    #[test]
    fn division_rounds_to_nearest() {
        // 1/3 at m = 4
        let one = RoundedFloat::from_u64(1, 4);
        let three = RoundedFloat::from_u64(3, 4);
        assert_eq!(one.div(&three).unwrap().to_rational(), rat(11, 32));
    }

    #[test]
    fn ordering_matches_rationals() {
        let prec = 12;
        let vals = [-3.5, -0.1, 0.0, 0.1, 2.0, 1000.0];
        for a in vals {
            for b in vals {
                let fa = rf(a, prec);
                let fb = rf(b, prec);
                assert_eq!(
                    fa.cmp(&fb),
                    fa.to_rational().cmp(&fb.to_rational()),
                    "{a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn theta_budget_rules_bound_real_errors() {
        // magnitude semantics of composition, reciprocal and join
        let u = 2e-6f64;
        let s = ThetaBudget::new(9.0);
        let t = ThetaBudget::new(4.5);
        let cases = [
            (s.bound(u), t.bound(u)),
            (-s.bound(u), t.bound(u)),
            (s.bound(u), -t.bound(u)),
            (-s.bound(u), -t.bound(u)),
        ];
        for (d1, d2) in cases {
            let composed = (1.0 + d1) * (1.0 + d2) - 1.0;
            assert!(composed.abs() <= s.compose(t).bound(u) + 1e-18);
            let inv = 1.0 / (1.0 + d1) - 1.0;
            assert!(inv.abs() <= s.reciprocal().bound(u) + 1e-18);
            let sum = 0.5 * d1 + 0.5 * d2;
            assert!(sum.abs() <= s.join(t).bound(u) + 1e-18);
            let root = (1.0 + d1).sqrt() - 1.0;
            assert!(root.abs() <= s.sqrt().bound(u) + 1e-18);
        }
        assert!(ThetaBudget::new(1.0).bound(0.6).is_infinite());
    }

    proptest! {
        #[test]
        fn round_is_idempotent(num in -2_000_000i64..2_000_000, den in 1i64..1_000_000, m in 2u32..80) {
            prop_assume!(num != 0);
            let x = rat(num, den);
            let once = RoundedFloat::round_rational(&x, m);
            let twice = RoundedFloat::round_rational(&once.to_rational(), m);
            prop_assert_eq!(&once, &twice);
            // |round(x) - x| <= |x| 2^{-(m-1)}
            let err = (once.to_rational() - &x).abs();
            let budget = x.abs() * rat(1, 2).pow(m as i32 - 1);
            prop_assert!(err <= budget);
        }

        #[test]
        fn sqrt_squares_back(num in 1i64..4_000_000, den in 1i64..1000, m in 8u32..70) {
            let x = rat(num, den);
            let r = RoundedFloat::round_rational(&x, m);
            let s = r.sqrt().unwrap().to_rational();
            let rel = ((&s * &s - r.to_rational()) / r.to_rational()).abs();
            // one rounding of the root costs at most ~2u relative on the square
            prop_assert!(rel <= rat(1, 2).pow(m as i32 - 1) * rat_int(3));
        }
    }
}
