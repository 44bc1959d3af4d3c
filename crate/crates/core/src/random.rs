//! Random polynomial samplers: independent centered subgaussian coefficients
//! on the Weyl-weighted monomial basis, plus the smoothed perturbation model
//! `q = f + sigma |f| g`.
//!
//! Coefficient draws are keyed by `(seed, instance, coefficient index)`, so
//! sampling is reproducible and order-independent under any parallel
//! schedule.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::arith::{from_f64, sqrt_f64};
use crate::poly::{multinomial, AffinePoly, MultiIndex, PolyError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("exponential class requires ell >= 2, got {0}")]
    EllTooSmall(u32),
    #[error("smoothing requires sigma > 0")]
    NonPositiveSigma,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Coefficient distribution classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DobroClass {
    /// Standard Gaussian coefficients.
    Kss,
    /// Uniform on `[-1, 1]`.
    WeylUniform,
    /// Density proportional to `exp(-|t|^ell)`, `ell >= 2`.
    EllExponential(u32),
}

impl DobroClass {
    pub fn label(&self) -> String {
        match self {
            DobroClass::Kss => "kss".into(),
            DobroClass::WeylUniform => "weyl".into(),
            DobroClass::EllExponential(l) => format!("ell{l}"),
        }
    }

    /// Subgaussian constant carried as metadata for the bound formulas.
    pub fn k_subgaussian(&self) -> f64 {
        match self {
            DobroClass::Kss => 1.0,
            DobroClass::WeylUniform => 1.0,
            DobroClass::EllExponential(_) => 1.2,
        }
    }

    /// Anti-concentration constant carried as metadata.
    pub fn rho(&self) -> f64 {
        match self {
            DobroClass::Kss => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            DobroClass::WeylUniform => 1.0,
            DobroClass::EllExponential(_) => 1.0,
        }
    }

    /// The product that the tail and complexity formulas consume.
    pub fn k_rho(&self) -> f64 {
        self.k_subgaussian() * self.rho()
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            DobroClass::Kss => StandardNormal.sample(rng),
            DobroClass::WeylUniform => rng.gen_range(-1.0..=1.0),
            DobroClass::EllExponential(l) => {
                // magnitude G^{1/ell} with G ~ Gamma(1/ell, 1) has density
                // proportional to exp(-t^ell) on t > 0; attach a fair sign
                let shape = 1.0 / *l as f64;
                let g: f64 = Gamma::new(shape, 1.0).expect("valid shape").sample(rng);
                let mag = g.powf(shape);
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        }
    }
}

/// Descriptor of a random polynomial model.
#[derive(Clone, Debug, PartialEq)]
pub struct DobroSpec {
    pub class: DobroClass,
    pub n: usize,
    pub d: u32,
    pub seed: u64,
}

impl DobroSpec {
    pub fn new(class: DobroClass, n: usize, d: u32, seed: u64) -> Result<Self, SampleError> {
        if let DobroClass::EllExponential(l) = class {
            if l < 2 {
                return Err(SampleError::EllTooSmall(l));
            }
        }
        let spec = DobroSpec { class, n, d, seed };
        debug_assert!(spec.class.k_rho() >= 0.25);
        Ok(spec)
    }

    fn coefficient_rng(&self, instance: u64, index: u64) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&instance.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..32].copy_from_slice(&0x70762d646f62726fu64.to_le_bytes());
        ChaCha12Rng::from_seed(key)
    }

    /// Raw coefficient draw for the homogeneous index with the given
    /// position, before the Weyl weight is applied.
    pub fn raw_coefficient(&self, instance: u64, index: u64) -> f64 {
        self.class.draw(&mut self.coefficient_rng(instance, index))
    }

    /// Sample the `instance`-th polynomial: homogeneous coefficients
    /// `sqrt(multinomial(d, alpha)) * c_alpha` on degree-`d` indices,
    /// then set `X_0 = 1`.
    pub fn sample(&self, instance: u64) -> AffinePoly {
        let indices = MultiIndex::all_exact(self.n + 1, self.d);
        let mut terms = Vec::with_capacity(indices.len());
        for (j, alpha) in indices.iter().enumerate() {
            let c = self.raw_coefficient(instance, j as u64);
            let w = sqrt_f64(&BigRational::from_integer(multinomial(self.d, alpha)));
            let coeff = match from_f64(w * c) {
                Some(r) => r,
                None => continue,
            };
            let affine = alpha.exponents()[1..].to_vec();
            terms.push((affine, coeff));
        }
        AffinePoly::from_terms(self.n, self.d, terms).expect("sampled indices are in range")
    }
}

/// Convenience wrapper matching the operation name.
pub fn sample_dobro(spec: &DobroSpec, instance: u64) -> AffinePoly {
    spec.sample(instance)
}

/// Smoothed perturbation `f + sigma |f| g` with `g` drawn from `spec`.
pub fn smoothed(
    f: &AffinePoly,
    sigma: f64,
    spec: &DobroSpec,
    instance: u64,
) -> Result<AffinePoly, SampleError> {
    if f.is_zero() {
        return Err(PolyError::ZeroPolynomial.into());
    }
    if sigma <= 0.0 {
        return Err(SampleError::NonPositiveSigma);
    }
    let g = spec.sample(instance);
    let scale = from_f64(sigma * f.weyl_norm()).expect("finite scale");
    Ok(f.add(&g.scale(&scale))?)
}
