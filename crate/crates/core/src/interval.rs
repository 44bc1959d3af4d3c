//! Exact-arithmetic subdivision loop. Each box is either certified (the
//! value test or the gradient-cone test passes at its midpoint) or split
//! into 2^n children; every comparison is performed on squared rational
//! quantities, so the emitted certificates are exact.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::arith::{gt_one_plus_sqrt_sq, pow_i, rat_int, sqrt_f64};
use crate::boxes::NBox;
use crate::poly::{one_plus_norm_sq, AffinePoly};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubdivideError {
    #[error("input polynomial is identically zero")]
    ZeroPolynomial,
    #[error("half-width must be positive")]
    NonPositiveHalfWidth,
    #[error("effective mode requires a >= 1")]
    HalfWidthBelowOne,
    #[error("subdivision reached depth {max_depth} without certifying a box; the zero set is singular or nearly singular in the region")]
    DepthExceeded { max_depth: u32 },
}

/// Which disjunct certified the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    /// `|fhat(m(B))|` beats the value threshold: f has no zero in B.
    FunctionSign,
    /// `|dfhat(m(B))|` beats the gradient threshold: the gradient field on B
    /// is confined to an open half space.
    GradientCone,
}

impl CertificateKind {
    pub fn label(&self) -> &'static str {
        match self {
            CertificateKind::FunctionSign => "function",
            CertificateKind::GradientCone => "gradient",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "function" => Some(CertificateKind::FunctionSign),
            "gradient" => Some(CertificateKind::GradientCone),
            _ => None,
        }
    }
}

/// Tested quantity and threshold behind an accepted certificate
/// (floating-point reporting values; soundness rests on the exact test).
#[derive(Clone, Debug, PartialEq)]
pub struct BoxCertificate {
    pub kind: CertificateKind,
    pub lhs: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedBox {
    pub nbox: NBox,
    pub certificate: BoxCertificate,
}

/// Finished subdivision: certified boxes tiling `[-a, a]^n`.
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub n: usize,
    pub a: BigRational,
    pub boxes: Vec<CertifiedBox>,
    /// Total number of boxes tested (certified plus split).
    pub processed: u64,
    pub max_depth_reached: u32,
}

impl Subdivision {
    /// Exact sum of box volumes; equals `(2a)^n` for a valid output.
    pub fn total_volume(&self) -> BigRational {
        self.boxes.iter().map(|b| b.nbox.volume()).sum()
    }

    pub fn region_volume(&self) -> BigRational {
        pow_i(&(&self.a * rat_int(2)), self.n as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueDiscipline {
    Fifo,
    Lifo,
}

#[derive(Clone, Debug)]
pub struct PvOptions {
    pub max_depth: u32,
    pub discipline: QueueDiscipline,
}

impl Default for PvOptions {
    fn default() -> Self {
        // width 2a * 2^-40 is far below any certified-box scale for
        // well-conditioned inputs, so hitting the cap flags near-singularity
        PvOptions { max_depth: 40, discipline: QueueDiscipline::Fifo }
    }
}

/// Precomputed exact state for the per-box test.
pub struct ExactTester {
    f: AffinePoly,
    partials: Vec<AffinePoly>,
    weyl_sq: BigRational,
    n: usize,
    d: u32,
}

impl ExactTester {
    pub fn new(f: &AffinePoly) -> Result<Self, SubdivideError> {
        if f.is_zero() {
            return Err(SubdivideError::ZeroPolynomial);
        }
        Ok(ExactTester {
            f: f.clone(),
            partials: f.partials(),
            weyl_sq: f.weyl_norm_sq(),
            n: f.vars(),
            d: f.degree_bound().max(1),
        })
    }

    /// Value branch: `|fhat(m)| > (1 + sqrt(d)) sqrt(n) w`, decided on
    /// squares: `f(m)^2 > (1+sqrt(d))^2 n w^2 |f|^2 (1+|m|^2)^{d-1}`.
    fn function_branch(&self, b: &NBox) -> Option<(BigRational, BigRational)> {
        let m = b.center();
        let v = self.f.eval(m).expect("dimension checked at entry");
        let lhs = &v * &v;
        let t = one_plus_norm_sq(m);
        let w2 = b.width() * b.width();
        let base = rat_int(self.n as i64) * w2 * &self.weyl_sq * pow_i(&t, self.d as i64 - 1);
        gt_one_plus_sqrt_sq(&lhs, &base, self.d as u64).then_some((lhs, base))
    }

    /// Gradient branch: `|dfhat(m)| > sqrt(2) (1 + sqrt(d-1)) n w`, decided
    /// on squares with the scale factor `2 n^2 w^2 d^2 |f|^2 (1+|m|^2)^{d-2}`.
    fn gradient_branch(&self, b: &NBox) -> Option<(BigRational, BigRational)> {
        let m = b.center();
        let gsq: BigRational = self
            .partials
            .iter()
            .map(|p| {
                let v = p.eval(m).expect("dimension checked at entry");
                &v * &v
            })
            .sum();
        let t = one_plus_norm_sq(m);
        let n2 = rat_int((self.n * self.n) as i64);
        let d2 = rat_int((self.d * self.d) as i64);
        let w2 = b.width() * b.width();
        let base = rat_int(2) * n2 * w2 * d2 * &self.weyl_sq * pow_i(&t, self.d as i64 - 2);
        gt_one_plus_sqrt_sq(&gsq, &base, self.d as u64 - 1).then_some((gsq, base))
    }

    /// Run both branches in order and build the reporting certificate.
    pub fn test(&self, b: &NBox) -> Option<BoxCertificate> {
        if let Some((lhs_sq, base_sq)) = self.function_branch(b) {
            let scale = (1.0 + (self.d as f64).sqrt()).powi(2);
            return Some(BoxCertificate {
                kind: CertificateKind::FunctionSign,
                lhs: sqrt_f64(&lhs_sq),
                threshold: (scale * crate::arith::to_f64(&base_sq)).sqrt(),
            });
        }
        if let Some((lhs_sq, base_sq)) = self.gradient_branch(b) {
            let scale = (1.0 + ((self.d - 1) as f64).sqrt()).powi(2);
            return Some(BoxCertificate {
                kind: CertificateKind::GradientCone,
                lhs: sqrt_f64(&lhs_sq),
                threshold: (scale * crate::arith::to_f64(&base_sq)).sqrt(),
            });
        }
        None
    }

    /// Re-verify an emitted certificate against the loop's own thresholds.
    pub fn verify(&self, b: &NBox, kind: CertificateKind) -> bool {
        match kind {
            CertificateKind::FunctionSign => self.function_branch(b).is_some(),
            CertificateKind::GradientCone => self.gradient_branch(b).is_some(),
        }
    }
}

/// Exact check of the simplified certification condition with thresholds
/// `2 sqrt(dn) w` (value) and `2 sqrt(2) sqrt(dn) w` (gradient). The
/// finite-precision test guarantees this condition, so emitted boxes are
/// re-verified against it.
pub fn verify_simplified_condition(f: &AffinePoly, b: &NBox, kind: CertificateKind) -> bool {
    let n = f.vars();
    let d = f.degree_bound().max(1) as i64;
    let m = b.center();
    let t = one_plus_norm_sq(m);
    let w2 = b.width() * b.width();
    let weyl_sq = f.weyl_norm_sq();
    let dn = rat_int(d * n as i64);
    match kind {
        CertificateKind::FunctionSign => {
            let v = f.eval(m).expect("dimension mismatch");
            let lhs = &v * &v;
            let rhs = rat_int(4) * dn * w2 * weyl_sq * pow_i(&t, d - 1);
            lhs > rhs
        }
        CertificateKind::GradientCone => {
            let gsq: BigRational = f
                .gradient(m)
                .expect("dimension mismatch")
                .iter()
                .map(|v| v * v)
                .sum();
            let rhs = rat_int(8) * dn * w2 * rat_int(d * d) * weyl_sq * pow_i(&t, d - 2);
            gsq > rhs
        }
    }
}

/// The per-box exact test; `Some` certificate means the box needs no
/// further subdivision.
pub fn cf_box_test(f: &AffinePoly, b: &NBox) -> Result<Option<BoxCertificate>, SubdivideError> {
    Ok(ExactTester::new(f)?.test(b))
}

/// Everything a run of the work-queue driver produces: per-box results in
/// processing order (split boxes included), plus counters.
pub(crate) struct DriveResult<R> {
    pub all: Vec<(NBox, R)>,
    pub processed: u64,
    pub deepest: u32,
}

/// Work-queue driver shared by the exact and finite-precision loops. A box
/// whose result `certified` rejects is split; reaching `max_depth` with an
/// uncertified box aborts. FIFO processes whole levels in parallel, LIFO is
/// a sequential stack; the final box set is the same for both.
pub(crate) fn drive_subdivision<R, F, C>(
    n: usize,
    a: &BigRational,
    opts: &PvOptions,
    test: F,
    certified: C,
) -> Result<DriveResult<R>, SubdivideError>
where
    R: Send,
    F: Fn(&NBox) -> R + Sync,
    C: Fn(&R) -> bool,
{
    if !a.is_positive() {
        return Err(SubdivideError::NonPositiveHalfWidth);
    }
    let root = NBox::root(n, a);
    let mut all: Vec<(NBox, R)> = Vec::new();
    let mut processed: u64 = 0;
    let mut deepest: u32 = 0;

    match opts.discipline {
        QueueDiscipline::Fifo => {
            let mut frontier = vec![root];
            while !frontier.is_empty() {
                processed += frontier.len() as u64;
                deepest = deepest.max(frontier[0].depth());
                let results: Vec<(NBox, R)> = frontier
                    .into_par_iter()
                    .map(|b| {
                        let r = test(&b);
                        (b, r)
                    })
                    .collect();
                let mut next = Vec::new();
                for (b, r) in results {
                    if !certified(&r) {
                        if b.depth() >= opts.max_depth {
                            return Err(SubdivideError::DepthExceeded {
                                max_depth: opts.max_depth,
                            });
                        }
                        next.extend(b.standard_subdivision());
                    }
                    all.push((b, r));
                }
                frontier = next;
            }
        }
        QueueDiscipline::Lifo => {
            let mut stack = vec![root];
            while let Some(b) = stack.pop() {
                processed += 1;
                deepest = deepest.max(b.depth());
                let r = test(&b);
                if !certified(&r) {
                    if b.depth() >= opts.max_depth {
                        return Err(SubdivideError::DepthExceeded {
                            max_depth: opts.max_depth,
                        });
                    }
                    stack.extend(b.standard_subdivision());
                }
                all.push((b, r));
            }
        }
    }
    Ok(DriveResult { all, processed, deepest })
}

/// Subdivide `[-a, a]^n` until every box is certified, in exact arithmetic.
pub fn pv_interval(
    f: &AffinePoly,
    a: &BigRational,
    opts: &PvOptions,
) -> Result<Subdivision, SubdivideError> {
    let tester = ExactTester::new(f)?;
    let n = f.vars();
    let run = drive_subdivision(n, a, opts, |b| tester.test(b), Option::is_some)?;
    let boxes = run
        .all
        .into_iter()
        .filter_map(|(nbox, r)| r.map(|certificate| CertifiedBox { nbox, certificate }))
        .collect();
    Ok(Subdivision {
        n,
        a: a.clone(),
        boxes,
        processed: run.processed,
        max_depth_reached: run.deepest,
    })
}

/// Canonical ordering used by the file format: depth-first coordinates.
pub fn sort_boxes(boxes: &mut [CertifiedBox]) {
    boxes.sort_by(|p, q| {
        for (a, b) in p.nbox.center().iter().zip(q.nbox.center()) {
            match a.cmp(b) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        p.nbox.depth().cmp(&q.nbox.depth())
    });
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
    fn small_box_on_zero_line_gets_gradient_cone() {
        // |dfhat(0)| = 1 beats sqrt(2) * 1 * 2 * 0.02
        let f = x1(2);
        let b = NBox::new(vec![rat_int(0), rat_int(0)], rat(1, 50), 0);
        let cert = cf_box_test(&f, &b).unwrap().expect("certificate expected");
        assert_eq!(cert.kind, CertificateKind::GradientCone);
        assert!(cert.lhs > cert.threshold);
    }

    #[test]
    fn unit_root_box_fails_both_branches() {
        // both normalized quantities are <= 1, thresholds are ~5.66
        let f = x1(2);
        let b = NBox::root(2, &rat_int(1));
        assert_eq!(cf_box_test(&f, &b).unwrap(), None);
    }

    #[test]
    fn scaling_the_polynomial_changes_nothing() {
        let f = x1(2);
        let b = NBox::new(vec![rat(1, 4), rat(-1, 3)], rat(1, 10), 2);
        let base = cf_box_test(&f, &b).unwrap().map(|c| c.kind);
        for t in [rat(7, 2), rat(-5, 9), rat_int(1000)] {
            let scaled = f.scale(&t);
            assert_eq!(cf_box_test(&scaled, &b).unwrap().map(|c| c.kind), base);
        }
    }

    #[test]
    fn single_box_when_region_is_tiny() {
        let f = x1(2);
        let s = pv_interval(&f, &rat(1, 100), &PvOptions::default()).unwrap();
        assert_eq!(s.boxes.len(), 1);
        assert_eq!(s.boxes[0].certificate.kind, CertificateKind::GradientCone);
        assert_eq!(s.processed, 1);
        assert_eq!(s.total_volume(), s.region_volume());
    }

    #[test]
    fn singular_input_exhausts_depth() {
        // x_1^2 vanishes to second order on the line x_1 = 0
        let f = AffinePoly::from_terms(2, 2, [(vec![2, 0], rat_int(1))]).unwrap();
        let err = pv_interval(
            &f,
            &rat_int(1),
            &PvOptions { max_depth: 12, ..Default::default() },
        )
        .unwrap_err();
        assert_eq!(err, SubdivideError::DepthExceeded { max_depth: 12 });
        // brute-force predicate oracle: every box straddling x_1 = 0 fails
        let tester = ExactTester::new(&f).unwrap();
        for k in 1..10 {
            let w = pow_i(&rat_int(2), -k);
            let b = NBox::new(vec![rat_int(0), rat(1, 3)], w, k as u32);
            assert!(tester.test(&b).is_none(), "depth {k}");
        }
    }

    #[test]
    fn zero_polynomial_rejected() {
        let f = AffinePoly::new(2, 3);
        assert_eq!(
            pv_interval(&f, &rat_int(1), &PvOptions::default()).unwrap_err(),
            SubdivideError::ZeroPolynomial
        );
    }

    #[test]
    fn fifo_and_lifo_agree() {
        let f = crate::poly::tests::demo_quartic();
        let a = rat_int(2);
        let fifo = pv_interval(&f, &a, &PvOptions::default()).unwrap();
        let lifo = pv_interval(
            &f,
            &a,
            &PvOptions { discipline: QueueDiscipline::Lifo, ..Default::default() },
        )
        .unwrap();
        let mut bf = fifo.boxes.clone();
        let mut bl = lifo.boxes.clone();
        sort_boxes(&mut bf);
        sort_boxes(&mut bl);
        assert_eq!(bf.len(), bl.len());
        for (x, y) in bf.iter().zip(&bl) {
            assert_eq!(x.nbox, y.nbox);
            assert_eq!(x.certificate.kind, y.certificate.kind);
        }
        assert_eq!(fifo.processed, lifo.processed);
    }
}
