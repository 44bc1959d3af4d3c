//! Monte-Carlo estimation of the continuous-amortization integral, condition
//! moments, the closed-form box-count bound formulas, and empirical tail
//! tables for the condition number of random polynomials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::condition::KappaEvaluator;
use crate::poly::AffinePoly;
use crate::random::{smoothed, DobroSpec, SampleError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmortizeError {
    #[error("tail thresholds must satisfy t >= e")]
    ThresholdBelowE,
    #[error("at least {0} trials required")]
    TooFewTrials(u64),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    /// Samples where the integrand was infinite (singular points).
    pub infinite: u64,
}

impl McEstimate {
    pub fn upper(&self, sigmas: f64) -> f64 {
        if self.infinite > 0 {
            f64::INFINITY
        } else {
            self.mean + sigmas * self.stderr
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    Uniform,
    /// Grid-jittered stratification, one point per cell.
    Stratified,
}

fn sample_rng(seed: u64, i: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&i.to_le_bytes());
    key[16..24].copy_from_slice(&0x70762d73616d706cu64.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

fn draw_point(rng: &mut ChaCha12Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-a..=a)).collect()
}

fn stratified_point(rng: &mut ChaCha12Rng, n: usize, a: f64, cell: u64, per_axis: u64) -> Vec<f64> {
    let w = 2.0 * a / per_axis as f64;
    let mut c = cell;
    (0..n)
        .map(|_| {
            let k = c % per_axis;
            c /= per_axis;
            -a + (k as f64 + rng.gen_range(0.0..1.0)) * w
        })
        .collect()
}

fn summarize(values: &[f64]) -> McEstimate {
    let samples = values.len() as u64;
    let infinite = values.iter().filter(|v| !v.is_finite()).count() as u64;
    if infinite > 0 {
        return McEstimate { mean: f64::INFINITY, stderr: f64::INFINITY, samples, infinite };
    }
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (samples as f64 - 1.0).max(1.0);
    McEstimate { mean, stderr: (var / samples as f64).sqrt(), samples, infinite }
}

/// Estimate `integral over [-a, a]^n of 2^n / b(x) dx` by Monte Carlo:
/// `(2a)^n` times the sample mean of the integrand, with standard error from
/// the sample variance. Any point with `b(x) = 0` makes the estimate
/// infinite and is counted separately.
pub fn mc_integral_bound<B>(
    n: usize,
    a: f64,
    b: B,
    samples: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<McEstimate, AmortizeError>
where
    B: Fn(&[f64]) -> f64 + Sync,
{
    if samples < 2 {
        return Err(AmortizeError::TooFewTrials(2));
    }
    let per_axis = match mode {
        SamplingMode::Uniform => 0,
        SamplingMode::Stratified => (samples as f64).powf(1.0 / n as f64).floor().max(1.0) as u64,
    };
    let cells = per_axis.pow(n as u32).max(1);
    let volume = (2.0 * a).powi(n as i32);
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let x = match mode {
                SamplingMode::Uniform => draw_point(&mut rng, n, a),
                SamplingMode::Stratified => {
                    stratified_point(&mut rng, n, a, i % cells, per_axis)
                }
            };
            let bx = b(&x);
            if bx > 0.0 {
                (n as f64).exp2() / bx
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut est = summarize(&values);
    est.mean *= volume;
    est.stderr *= volume;
    Ok(est)
}

/// Monte-Carlo mean of `kappa_aff(f, x)^power`, optionally weighted by
/// `log2(kappa)^2`, over uniform `x in [-a, a]^n`.
pub fn mc_kappa_moment(
    f: &AffinePoly,
    a: f64,
    power: f64,
    log2_weight: bool,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, AmortizeError> {
    if samples < 2 {
        return Err(AmortizeError::TooFewTrials(2));
    }
    let ev = KappaEvaluator::new(f);
    let n = ev.dim();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let x = draw_point(&mut rng, n, a);
            let k = ev.kappa(&x);
            if !k.is_finite() {
                return f64::INFINITY;
            }
            let mut v = k.powf(power);
            if log2_weight {
                let l = k.log2();
                v *= l * l;
            }
            v
        })
        .collect();
    Ok(summarize(&values))
}

/// Box-count bound from a condition moment for the exact-level loop:
/// `d^n max{1, a^n} 2^{n log2 n + 9n/2} * moment`.
pub fn interval_moment_bound(n: usize, d: u32, a: f64, moment: f64) -> f64 {
    let nf = n as f64;
    (d as f64).powf(nf)
        * a.powf(nf).max(1.0)
        * (nf * nf.log2() + 4.5 * nf).exp2()
        * moment
}

/// Box-count bound from a condition moment for the finite-precision loop:
/// `d^n a^n 2^{n log2 n + 8n} * moment`.
pub fn effective_moment_bound(n: usize, d: u32, a: f64, moment: f64) -> f64 {
    let nf = n as f64;
    (d as f64).powf(nf) * a.powf(nf).max(1.0) * (nf * nf.log2() + 8.0 * nf).exp2() * moment
}

/// Closed-form average-case box-count bound for the exact-level loop under
/// a random model with constant product `k_rho`:
/// `d^n N^{(n+1)/2} max{1, a^n} 2^{12 n log2 n + 8} (K rho)^{n+1}`.
pub fn average_case_bound(n: usize, d: u32, a: f64, k_rho: f64) -> f64 {
    let nf = n as f64;
    let space_dim = binomial(n as u64 + d as u64, n as u64);
    (d as f64).powf(nf)
        * space_dim.powf((nf + 1.0) / 2.0)
        * a.powf(nf).max(1.0)
        * (12.0 * nf * nf.log2() + 8.0).exp2()
        * k_rho.powf(nf + 1.0)
}

fn binomial(n: u64, k: u64) -> f64 {
    let mut acc = 1.0f64;
    for j in 1..=k {
        acc = acc * (n - k + j) as f64 / j as f64;
    }
    acc
}

/// Tail bound `P(kappa_aff >= t)` for a random polynomial, clipped at 1:
/// `2 (N/(n+1))^{(n+1)/2} (15 K rho)^{n+1} ln(t)^{(n+1)/2} / t^{n+1}`,
/// with an extra `(1 + 1/sigma)^{n+1}` factor in the smoothed model.
pub fn kappa_tail_bound(n: usize, d: u32, k_rho: f64, t: f64, sigma: Option<f64>) -> f64 {
    let nf = n as f64;
    let space_dim = binomial(n as u64 + d as u64, n as u64);
    let mut bound = 2.0
        * (space_dim / (nf + 1.0)).powf((nf + 1.0) / 2.0)
        * (15.0 * k_rho).powf(nf + 1.0)
        * t.ln().powf((nf + 1.0) / 2.0)
        / t.powf(nf + 1.0);
    if let Some(s) = sigma {
        bound *= (1.0 + 1.0 / s).powf(nf + 1.0);
    }
    bound.min(1.0)
}

/// One row of an empirical tail table.
#[derive(Clone, Copy, Debug)]
pub struct TailRow {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error of the empirical frequency.
    pub stderr: f64,
}

/// Sample `trials` random polynomials, compute their condition number at
/// `x`, and tabulate exceedance frequencies against the tail bound. With
/// `smoothed_center = Some((f, sigma))` the draws are smoothed perturbations
/// of `f` and the bound carries the smoothed factor.
pub fn empirical_tail(
    spec: &DobroSpec,
    x: &[f64],
    thresholds: &[f64],
    trials: u64,
    smoothed_center: Option<(&AffinePoly, f64)>,
) -> Result<Vec<TailRow>, AmortizeError> {
    if thresholds.iter().any(|t| *t < std::f64::consts::E) {
        return Err(AmortizeError::ThresholdBelowE);
    }
    if trials < 1000 {
        return Err(AmortizeError::TooFewTrials(1000));
    }
    if let Some((_, sigma)) = smoothed_center {
        if sigma <= 0.0 {
            return Err(SampleError::NonPositiveSigma.into());
        }
    }
    let kappas: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let f = match smoothed_center {
                None => spec.sample(i),
                Some((center, sigma)) => {
                    smoothed(center, sigma, spec, i).expect("validated inputs")
                }
            };
            KappaEvaluator::new(&f).kappa(x)
        })
        .collect();
    let sigma = smoothed_center.map(|(_, s)| s);
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hits = kappas.iter().filter(|k| **k >= t).count() as f64;
            let empirical = hits / trials as f64;
            let stderr = (empirical * (1.0 - empirical) / trials as f64).sqrt();
            TailRow {
                t,
                empirical,
                bound: kappa_tail_bound(spec.n, spec.d, spec.class.k_rho(), t, sigma),
                stderr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat_int;
    use crate::random::DobroClass;

    fn x1() -> AffinePoly {
        AffinePoly::from_terms(2, 1, [(vec![1, 0], rat_int(1))]).unwrap()
    }

    #[test]
    fn constant_integrand_has_zero_stderr() {
        let est = mc_integral_bound(2, 1.0, |_| 0.25, 500, 1, SamplingMode::Uniform).unwrap();
        // integrand 2^2 / 0.25 = 16, region volume 4
        assert_eq!(est.mean, 64.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.infinite, 0);
    }

    #[test]
    fn vanishing_size_bound_is_flagged() {
        let est = mc_integral_bound(1, 1.0, |_| 0.0, 10, 1, SamplingMode::Uniform).unwrap();
        assert!(est.mean.is_infinite());
        assert_eq!(est.infinite, 10);
        assert!(est.upper(3.0).is_infinite());
    }

    #[test]
    fn unit_condition_moment_is_exact() {
        let est = mc_kappa_moment(&x1(), 1.0, 2.0, false, 100, 3).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn stratified_and_uniform_agree_for_linear_input() {
        // integrand is constant 512 for f = X_1 (unit condition number):
        // 2^n (2^{5/2} d n kappa)^n = 4 * 128
        let f = x1();
        let ev = KappaEvaluator::new(&f);
        let b = move |x: &[f64]| {
            let k: f64 = ev.kappa(x);
            (32.0f64.sqrt() * 1.0 * 2.0 * k).powi(-2)
        };
        let u = mc_integral_bound(2, 1.0, &b, 2000, 5, SamplingMode::Uniform).unwrap();
        let s = mc_integral_bound(2, 1.0, &b, 2000, 5, SamplingMode::Stratified).unwrap();
        assert!((u.mean - 2048.0).abs() < 1e-9);
        assert!((s.mean - 2048.0).abs() < 1e-9);
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let f = crate::poly::tests::demo_quartic();
        let a = 1.0;
        let small = mc_kappa_moment(&f, a, 2.0, false, 4000, 9).unwrap();
        let large = mc_kappa_moment(&f, a, 2.0, false, 8000, 9).unwrap();
        let ratio = large.stderr / small.stderr;
        let target = 1.0 / 2f64.sqrt();
        assert!((ratio - target).abs() / target < 0.2, "{ratio}");
    }

    #[test]
    fn moment_bound_formulas() {
        // n = 2: 2^{2*1 + 9} = 2^11
        assert_eq!(interval_moment_bound(2, 1, 1.0, 1.0), 2f64.powi(11));
        assert_eq!(effective_moment_bound(2, 1, 1.0, 1.0), 2f64.powi(18));
        // monotone in the moment
        assert!(interval_moment_bound(2, 3, 1.0, 5.0) > interval_moment_bound(2, 3, 1.0, 1.0));
    }

    #[test]
    fn tail_bound_formula_and_clipping() {
        let k_rho = DobroClass::Kss.k_rho();
        // small t: the bound exceeds 1 and is clipped
        assert_eq!(kappa_tail_bound(2, 3, k_rho, std::f64::consts::E, None), 1.0);
        // large t: strictly below 1 and decreasing
        let b1 = kappa_tail_bound(2, 3, k_rho, 50.0, None);
        let b2 = kappa_tail_bound(2, 3, k_rho, 100.0, None);
        assert!(b1 < 1.0 && b2 < b1);
        // smoothed factor only enlarges it
        let bs = kappa_tail_bound(2, 3, k_rho, 100.0, Some(0.5));
        assert!(bs >= b2);
        // re-derive the formula independently at t = 100, n = 2, d = 3
        let n_dim = 10.0f64; // binomial(5, 2)
        let expect = 2.0 * (n_dim / 3.0).powf(1.5) * (15.0 * k_rho).powf(3.0)
            * 100f64.ln().powf(1.5)
            / 100f64.powi(3);
        assert!((b2 - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn tail_table_respects_bounds_for_kss() {
        let spec = DobroSpec::new(DobroClass::Kss, 2, 3, 77).unwrap();
        let rows = empirical_tail(
            &spec,
            &[0.0, 0.0],
            &[std::f64::consts::E, 10.0, 100.0],
            2000,
            None,
        )
        .unwrap();
        for r in rows {
            assert!(r.empirical <= r.bound + 3.0 * r.stderr, "t={} {r:?}", r.t);
        }
    }

    #[test]
    fn tail_input_validation() {
        let spec = DobroSpec::new(DobroClass::Kss, 2, 3, 0).unwrap();
        assert_eq!(
            empirical_tail(&spec, &[0.0, 0.0], &[2.0], 2000, None).unwrap_err(),
            AmortizeError::ThresholdBelowE
        );
        assert_eq!(
            empirical_tail(&spec, &[0.0, 0.0], &[3.0], 10, None).unwrap_err(),
            AmortizeError::TooFewTrials(1000)
        );
    }
}
