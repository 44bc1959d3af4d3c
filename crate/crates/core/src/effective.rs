//! Finite-precision subdivision loop: the same work queue as the exact
//! level, but every box is tested in software floating point at a precision
//! scheduled from the box width, and the test's thresholds carry enough
//! slack that a positive answer implies the exact certification condition.

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::arith::{ceil_log2, rat_int, to_f64};
use crate::boxes::NBox;
use crate::fp::{fl_dfhat_norm, fl_fhat, min_precision_for_kernels, FpError, RoundedFloat};
use crate::interval::{
    drive_subdivision, BoxCertificate, CertificateKind, CertifiedBox, PvOptions, Subdivision,
    SubdivideError,
};
use crate::poly::AffinePoly;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EffectiveError {
    #[error(transparent)]
    Subdivide(#[from] SubdivideError),
    #[error("floating-point kernel failure: {0}")]
    Fp(#[from] FpError),
}

/// Base precision `m_0 = 7 + ceil(log2 sqrt(d n))`.
pub fn base_precision(d: u32, n: usize) -> u32 {
    let dn = d as u64 * n as u64;
    let mut k = 0u32;
    while 4u64.checked_pow(k).map_or(false, |p| p < dn) {
        k += 1;
    }
    7 + k
}

/// Scheduled per-box precision `m_B = m_0 + ceil(max{log2 a, log2(a/w)})`;
/// requires `a >= 1`.
pub fn precision_for_box(width: &BigRational, a: &BigRational, d: u32, n: usize) -> u32 {
    assert!(a >= &BigRational::one(), "schedule requires a >= 1");
    let la = ceil_log2(a);
    let lw = ceil_log2(&(a / width));
    let extra = la.max(lw).max(0);
    base_precision(d, n) + extra as u32
}

/// Smallest precision whose round-off unit meets the soundness requirement
/// `u <= min{1, w} / (128 sqrt(dn) max{1, a})`.
fn precision_for_soundness(width: &BigRational, a: &BigRational, d: u32, n: usize) -> u32 {
    // 4^{m-1} >= 128^2 d n (max{1,a} / min{1,w})^2
    let one = BigRational::one();
    let num = if a > &one { a.clone() } else { one.clone() };
    let den = if width < &one { width.clone() } else { one };
    let ratio = num / den;
    let rhs = rat_int(128 * 128) * rat_int(d as i64 * n as i64) * &ratio * &ratio;
    let mut m = 2u32;
    loop {
        let lhs = rat_int(4).pow(m as i32 - 1);
        if lhs >= rhs {
            return m;
        }
        m += 1;
        assert!(m < 100_000, "soundness precision out of range");
    }
}

/// Working precision actually used for a box: the schedule value, raised by
/// the minimal number of digits when the soundness requirement or the
/// evaluation kernels' own precondition demands it.
pub fn effective_precision(width: &BigRational, a: &BigRational, d: u32, n: usize) -> (u32, u32) {
    let schedule = precision_for_box(width, a, d, n);
    let eff = schedule
        .max(precision_for_soundness(width, a, d, n))
        .max(min_precision_for_kernels(n, d));
    (schedule, eff)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxOutcome {
    Function,
    Gradient,
    Split,
}

impl BoxOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            BoxOutcome::Function => "function",
            BoxOutcome::Gradient => "gradient",
            BoxOutcome::Split => "split",
        }
    }
}

/// Per-box entry of the precision log.
#[derive(Clone, Debug)]
pub struct PrecisionRecord {
    pub depth: u32,
    pub width: BigRational,
    pub m_schedule: u32,
    pub m_effective: u32,
    pub outcome: BoxOutcome,
}

/// Precision statistics of a finite-precision run.
#[derive(Clone, Debug, Default)]
pub struct PrecisionStats {
    pub records: Vec<PrecisionRecord>,
    /// `sum over tested boxes of d * N * m_B^2`, the bit-operation estimate
    /// under quadratic-cost arithmetic.
    pub bit_op_estimate: u128,
    pub max_m_schedule: u32,
    pub max_m_effective: u32,
}

/// Result of the floating-point box test at a given precision.
fn fp_test(
    f: &AffinePoly,
    b: &NBox,
    prec: u32,
) -> Result<Option<BoxCertificate>, EffectiveError> {
    let d = f.degree_bound().max(1);
    let n = f.vars();
    // round the box: rounded center coordinates and width
    let center: Vec<BigRational> = b
        .center()
        .iter()
        .map(|c| RoundedFloat::round_rational(c, prec).to_rational())
        .collect();
    let w = RoundedFloat::round_rational(b.width(), prec);

    let sqrt_d = RoundedFloat::from_u64(d as u64, prec).sqrt()?;
    let sqrt_n1 = RoundedFloat::from_u64(n as u64 + 1, prec).sqrt()?;
    let (value, _) = fl_fhat(f, &center, prec)?;
    let value = value.abs();
    let thr_f = RoundedFloat::from_u64(4, prec)
        .mul(&sqrt_d)
        .mul(&sqrt_n1)
        .mul(&w);
    if value > thr_f {
        return Ok(Some(BoxCertificate {
            kind: CertificateKind::FunctionSign,
            lhs: value.to_f64(),
            threshold: thr_f.to_f64(),
        }));
    }
    let (grad, _) = fl_dfhat_norm(f, &center, prec)?;
    let thr_g = RoundedFloat::from_u64(6, prec)
        .mul(&sqrt_d)
        .mul(&RoundedFloat::from_u64(n as u64 + 1, prec))
        .mul(&w);
    if grad > thr_g {
        return Ok(Some(BoxCertificate {
            kind: CertificateKind::GradientCone,
            lhs: grad.to_f64(),
            threshold: thr_g.to_f64(),
        }));
    }
    Ok(None)
}

/// Floating-point certification test at the precision given by the schedule
/// (raised minimally to keep the test sound). A positive answer implies the
/// exact simplified condition and hence genuine certification.
pub fn cf_fp_test(
    f: &AffinePoly,
    b: &NBox,
    a: &BigRational,
) -> Result<Option<(BoxCertificate, u32)>, EffectiveError> {
    if f.is_zero() {
        return Err(SubdivideError::ZeroPolynomial.into());
    }
    let (_, m_eff) = effective_precision(b.width(), a, f.degree_bound().max(1), f.vars());
    Ok(fp_test(f, b, m_eff)?.map(|c| (c, m_eff)))
}

/// Subdivide `[-a, a]^n` (`a >= 1`) with the finite-precision test and the
/// per-box precision schedule.
pub fn pv_effective(
    f: &AffinePoly,
    a: &BigRational,
    opts: &PvOptions,
) -> Result<(Subdivision, PrecisionStats), EffectiveError> {
    if f.is_zero() {
        return Err(SubdivideError::ZeroPolynomial.into());
    }
    if a < &BigRational::one() {
        return Err(SubdivideError::HalfWidthBelowOne.into());
    }
    let n = f.vars();
    let d = f.degree_bound().max(1);
    let space_dim = f.space_dim() as u128;

    struct TestOut {
        cert: Option<BoxCertificate>,
        m_schedule: u32,
        m_effective: u32,
    }

    let run = drive_subdivision(
        n,
        a,
        opts,
        |b: &NBox| {
            let (m_schedule, m_eff) = effective_precision(b.width(), a, d, n);
            let cert =
                fp_test(f, b, m_eff).expect("precision is raised to meet kernel preconditions");
            TestOut { cert, m_schedule, m_effective: m_eff }
        },
        |r: &TestOut| r.cert.is_some(),
    )
    .map_err(EffectiveError::Subdivide)?;

    let mut stats = PrecisionStats::default();
    let mut boxes: Vec<CertifiedBox> = Vec::new();
    for (b, out) in run.all {
        stats.bit_op_estimate +=
            d as u128 * space_dim * (out.m_effective as u128 * out.m_effective as u128);
        stats.max_m_schedule = stats.max_m_schedule.max(out.m_schedule);
        stats.max_m_effective = stats.max_m_effective.max(out.m_effective);
        let outcome = match &out.cert {
            Some(c) if c.kind == CertificateKind::FunctionSign => BoxOutcome::Function,
            Some(_) => BoxOutcome::Gradient,
            None => BoxOutcome::Split,
        };
        stats.records.push(PrecisionRecord {
            depth: b.depth(),
            width: b.width().clone(),
            m_schedule: out.m_schedule,
            m_effective: out.m_effective,
            outcome,
        });
        if let Some(certificate) = out.cert {
            boxes.push(CertifiedBox { nbox: b, certificate });
        }
    }

    Ok((
        Subdivision {
            n,
            a: a.clone(),
            boxes,
            processed: run.processed,
            max_depth_reached: run.deepest,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::interval::verify_simplified_condition;

    fn x1(n: usize) -> AffinePoly {
        let mut alpha = vec![0u32; n];
        alpha[0] = 1;
        AffinePoly::from_terms(n, 1, [(alpha, rat_int(1))]).unwrap()
    }

    #[test]
    fn schedule_formula_cases() {
        // a = 1, w = 2, d = 4, n = 2: m_0 = 7 + ceil(log2 sqrt(8)) = 9
        assert_eq!(base_precision(4, 2), 9);
        assert_eq!(precision_for_box(&rat_int(2), &BigRational::one(), 4, 2), 9);
        // halving the width below a adds exactly one digit
        let a = rat_int(1);
        let mut last = precision_for_box(&rat(1, 2), &a, 4, 2);
        for k in 2..8 {
            let m = precision_for_box(&rat(1, 1 << k), &a, 4, 2);
            assert_eq!(m, last + 1);
            last = m;
        }
        // w = a: the max picks up log2 a
        let a = rat_int(8);
        assert_eq!(precision_for_box(&rat_int(8), &a, 4, 2), 9 + 3);
    }

    #[test]
    fn schedule_rejects_small_region() {
        let r = std::panic::catch_unwind(|| {
            precision_for_box(&rat(1, 2), &rat(1, 2), 2, 2)
        });
        assert!(r.is_err());
    }

    #[test]
    fn effective_precision_meets_soundness() {
        for (w, a, d, n) in [
            (rat_int(2), rat_int(1), 4u32, 2usize),
            (rat(1, 8), rat_int(1), 6, 2),
            (rat(1, 1024), rat_int(10), 3, 3),
        ] {
            let (sched, eff) = effective_precision(&w, &a, d, n);
            assert!(eff >= sched);
            // raise is small by construction
            assert!(eff - sched <= 3, "{w} {a} {d} {n}: {sched} -> {eff}");
            let u = RoundedFloat::unit_roundoff(eff);
            let w_f = to_f64(&w);
            let a_f = to_f64(&a);
            let req = w_f.min(1.0) / (128.0 * ((d as usize * n) as f64).sqrt() * a_f.max(1.0));
            assert!(u <= req);
        }
    }

    #[test]
    fn certificates_imply_exact_condition() {
        let f = x1(2);
        let a = BigRational::one();
        // tiny box centered on the zero line: gradient certificate
        let b = NBox::new(vec![rat_int(0), rat(1, 4)], rat(1, 64), 7);
        let (cert, _) = cf_fp_test(&f, &b, &a).unwrap().expect("certificate");
        assert_eq!(cert.kind, CertificateKind::GradientCone);
        assert!(verify_simplified_condition(&f, &b, cert.kind));
        // tiny box away from the zero line: function certificate
        let b = NBox::new(vec![rat(1, 2), rat(1, 4)], rat(1, 64), 7);
        let (cert, _) = cf_fp_test(&f, &b, &a).unwrap().expect("certificate");
        assert_eq!(cert.kind, CertificateKind::FunctionSign);
        assert!(verify_simplified_condition(&f, &b, cert.kind));
    }

    #[test]
    fn linear_input_terminates_and_verifies() {
        let f = x1(2);
        let (s, stats) = pv_effective(&f, &rat_int(1), &PvOptions::default()).unwrap();
        assert!(!s.boxes.is_empty());
        assert_eq!(s.total_volume(), s.region_volume());
        for cb in &s.boxes {
            assert!(verify_simplified_condition(&f, &cb.nbox, cb.certificate.kind));
        }
        assert_eq!(stats.records.len() as u64, s.processed);
        // schedule formula audited from the log
        for r in &stats.records {
            assert_eq!(r.m_schedule, precision_for_box(&r.width, &rat_int(1), 1, 2));
        }
    }

    #[test]
    fn effective_requires_unit_half_width() {
        let f = x1(2);
        let err = pv_effective(&f, &rat(1, 2), &PvOptions::default()).unwrap_err();
        assert_eq!(
            err,
            EffectiveError::Subdivide(SubdivideError::HalfWidthBelowOne)
        );
    }
}
