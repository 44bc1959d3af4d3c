//! Exact rational helpers: logarithm ceilings, square-root comparisons,
//! correctly rounded conversions and the decimal text encoding shared by the
//! file formats.

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumberParseError {
    #[error("empty numeric field")]
    Empty,
    #[error("malformed number `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Shorthand rational constructor.
pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Integer as a rational.
pub fn rat_int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

/// `r^e` for signed integer exponents; `r != 0` required when `e < 0`.
pub fn pow_i(r: &BigRational, e: i64) -> BigRational {
    if e == 0 {
        return BigRational::one();
    }
    let mut base = if e < 0 { r.recip() } else { r.clone() };
    let mut n = e.unsigned_abs();
    let mut acc = BigRational::one();
    while n > 0 {
        if n & 1 == 1 {
            acc *= &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    acc
}

fn cmp_pow2(r: &BigRational, k: i64) -> std::cmp::Ordering {
    // compare r with 2^k without building a rational power
    let p = r.numer();
    let q = r.denom();
    if k >= 0 {
        p.cmp(&(q << k as u64))
    } else {
        (p << (-k) as u64).cmp(q)
    }
}

/// Smallest integer `k` with `r <= 2^k`; requires `r > 0`.
pub fn ceil_log2(r: &BigRational) -> i64 {
    assert!(r.is_positive(), "ceil_log2 needs a positive argument");
    let t = r.numer().bits() as i64 - r.denom().bits() as i64;
    // r lies in [2^{t-1}, 2^{t+1})
    for k in (t - 1)..=(t + 1) {
        if cmp_pow2(r, k) != std::cmp::Ordering::Greater {
            return k;
        }
    }
    unreachable!("bit-length bracket missed");
}

/// Exact test for `lhs > (1 + sqrt(k))^2 * rhs` with `rhs >= 0`.
///
/// Expands to `lhs - (1+k) rhs > 2 rhs sqrt(k)`, which is decided on squares.
pub fn gt_one_plus_sqrt_sq(lhs: &BigRational, rhs: &BigRational, k: u64) -> bool {
    debug_assert!(!rhs.is_negative());
    if rhs.is_zero() {
        return lhs.is_positive();
    }
    let diff = lhs - rhs * rat_int(1 + k as i64);
    if !diff.is_positive() {
        return false;
    }
    &diff * &diff > rhs * rhs * rat_int(4 * k as i64)
}

/// Round the positive rational `p/q` to `prec` significant bits,
/// round-to-nearest ties-to-even. Returns `(mantissa, exp)` with
/// `mantissa in [2^{prec-1}, 2^prec)` and value `mantissa * 2^exp`.
pub(crate) fn round_mantissa(p: &BigUint, q: &BigUint, prec: u32) -> (BigUint, i64) {
    debug_assert!(!p.is_zero() && !q.is_zero());
    let want = prec as i64 + 1; // one guard bit
    let mut shift = want - (p.bits() as i64 - q.bits() as i64) - 1;
    loop {
        let (num, den) = if shift >= 0 {
            (p << shift as u64, q.clone())
        } else {
            (p.clone(), q << (-shift) as u64)
        };
        let (quot, rem) = num.div_rem(&den);
        let got = quot.bits() as i64;
        if got != want {
            shift += want - got;
            continue;
        }
        let guard = quot.bit(0);
        let mut m = quot >> 1u32;
        if guard && (!rem.is_zero() || m.bit(0)) {
            m += 1u32;
        }
        let mut exp = 1 - shift;
        if m.bits() as i64 == prec as i64 + 1 {
            m >>= 1u32;
            exp += 1;
        }
        return (m, exp);
    }
}

/// Round `sqrt(p/q)` (positive) to `prec` significant bits, nearest-even.
/// Returns `(mantissa, exp)` with value `mantissa * 2^exp`.
pub(crate) fn round_sqrt_mantissa(p: &BigUint, q: &BigUint, prec: u32) -> (BigUint, i64) {
    debug_assert!(!p.is_zero() && !q.is_zero());
    let vbits = p.bits() as i64 - q.bits() as i64;
    let mut half_shift = prec as i64 - vbits.div_euclid(2);
    loop {
        let shift = 2 * half_shift;
        let (num, den) = if shift >= 0 {
            (p << shift as u64, q.clone())
        } else {
            (p.clone(), q << (-shift) as u64)
        };
        // floor(sqrt(floor(num/den))) equals floor(sqrt(num/den))
        let s = (&num / &den).sqrt();
        let got = s.bits() as i64;
        if got != prec as i64 {
            half_shift += prec as i64 - got;
            continue;
        }
        // round up when sqrt(num/den) > s + 1/2, i.e. 4 num > den (2s+1)^2
        let twice = (&s << 1u32) + BigUint::one();
        let lhs = &num << 2u32;
        let rhs = &den * (&twice * &twice);
        let mut m = s;
        match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => m += 1u32,
            std::cmp::Ordering::Equal => {
                if m.bit(0) {
                    m += 1u32;
                }
            }
            std::cmp::Ordering::Less => {}
        }
        let mut exp = -half_shift;
        if m.bits() as i64 == prec as i64 + 1 {
            m >>= 1u32;
            exp += 1;
        }
        return (m, exp);
    }
}

/// `sqrt(v)` rounded to `bits` significant bits, as an exact rational.
/// Requires `v >= 0`.
pub fn sqrt_rational_approx(v: &BigRational, bits: u32) -> BigRational {
    assert!(!v.is_negative(), "sqrt of a negative rational");
    if v.is_zero() {
        return BigRational::zero();
    }
    let (m, e) = round_sqrt_mantissa(v.numer().magnitude(), v.denom().magnitude(), bits);
    let m = BigInt::from(m);
    if e >= 0 {
        BigRational::from_integer(m << e as u64)
    } else {
        BigRational::new(m, BigInt::one() << (-e) as u64)
    }
}

fn compose_f64(mantissa: u64, exp: i64) -> f64 {
    let m = mantissa as f64;
    if exp == 0 {
        return m;
    }
    // split the scaling to stay inside f64's exponent range
    if exp.abs() <= 900 {
        m * (exp as f64).exp2()
    } else if exp > 0 {
        m * 900f64.exp2() * ((exp - 900) as f64).exp2()
    } else {
        m * (-900f64).exp2() * ((exp + 900) as f64).exp2()
    }
}

/// Correctly rounded `f64` value of a rational.
pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (m, e) = round_mantissa(r.numer().magnitude(), r.denom().magnitude(), 53);
    let v = compose_f64(m.to_u64().expect("53-bit mantissa fits u64"), e);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// `sqrt(r)` as an `f64`; requires `r >= 0`.
pub fn sqrt_f64(r: &BigRational) -> f64 {
    assert!(!r.is_negative());
    if r.is_zero() {
        return 0.0;
    }
    to_f64(&sqrt_rational_approx(r, 64))
}

/// Parse an integer, decimal (`-3.25`) or fraction (`p/q`) literal.
pub fn parse_number(s: &str) -> Result<BigRational, NumberParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(NumberParseError::Empty);
    }
    let malformed = || NumberParseError::Malformed(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let p: BigInt = num.trim().parse().map_err(|_| malformed())?;
        let q: BigInt = den.trim().parse().map_err(|_| malformed())?;
        if q.is_zero() {
            return Err(NumberParseError::ZeroDenominator(s.to_string()));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let neg = int.starts_with('-');
        let int_part = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| malformed())?
        };
        let frac_part: BigInt = frac.parse().map_err(|_| malformed())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mag = int_part.abs() * &scale + frac_part;
        let signed = if neg || int_part.is_negative() { -mag } else { mag };
        return Ok(BigRational::new(signed, scale));
    }
    let p: BigInt = s.parse().map_err(|_| malformed())?;
    Ok(BigRational::from_integer(p))
}

/// Render a rational exactly: an integer, a terminating decimal when the
/// denominator is 10-smooth, otherwise `p/q`.
pub fn format_number(r: &BigRational) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    let mut den = r.denom().magnitude().clone();
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    // numerator scaled so the denominator becomes 10^digits
    let scale = two.pow(digits - twos) * five.pow(digits - fives);
    let mag = r.numer().magnitude() * scale;
    let mut text = mag.to_string();
    if text.len() <= digits as usize {
        text = format!("{}{}", "0".repeat(digits as usize + 1 - text.len()), text);
    }
    let point = text.len() - digits as usize;
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{}{}.{}", sign, &text[..point], &text[point..])
}
