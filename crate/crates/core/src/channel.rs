//! Rician fading statistics: sampling, density, distribution function,
//! quantiles and the instantaneous capacity law.
//!
//! The channel coefficient is `h ~ CN(mu, sigma²)` and only its magnitude
//! `gamma = |h|` is ever used. Parameterization is by the K-factor
//! `K = mu²/sigma²` and total power `omega = mu² + sigma²`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{brent, quad, special};
use crate::rng;
use crate::scalar::Scalar;

/// Above this K the Poisson mixture needs thousands of terms; the CDF is then
/// taken from direct quadrature of the density around its (narrow) peak.
const MIXTURE_MAX_K: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianSpec<T> {
    /// Line-of-sight to scattered power ratio (linear).
    pub k_factor: T,
    /// Total power `E[gamma²]`.
    pub omega: T,
    /// Transmit SNR (linear).
    pub snr: T,
}

/// One magnitude draw `gamma = |h|`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct ChannelSample<T>(pub T);

impl<T: Scalar> ChannelSample<T> {
    pub fn gamma(self) -> T {
        self.0
    }
}

impl<T: Scalar> RicianSpec<T> {
    pub fn new(k_factor: T, omega: T, snr: T) -> Result<Self> {
        let spec = Self { k_factor, omega, snr };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit total power, K and SNR given in dB.
    pub fn from_db(k_db: T, snr_db: T) -> Result<Self> {
        let k = if k_db == T::neg_infinity() { T::zero() } else { crate::scalar::db_to_linear(k_db) };
        Self::new(k, T::one(), crate::scalar::db_to_linear(snr_db))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor.is_finite() && self.k_factor >= T::zero()) {
            return Err(Error::Parameter(format!("k_factor must be finite and >= 0, got {}", self.k_factor)));
        }
        if !(self.omega.is_finite() && self.omega > T::zero()) {
            return Err(Error::Parameter(format!("omega must be finite and > 0, got {}", self.omega)));
        }
        if !(self.snr.is_finite() && self.snr > T::zero()) {
            return Err(Error::Parameter(format!("snr must be finite and > 0, got {}", self.snr)));
        }
        Ok(())
    }

    pub fn with_k(&self, k_factor: T) -> Result<Self> {
        Self::new(k_factor, self.omega, self.snr)
    }

    /// Line-of-sight amplitude `mu`.
    pub fn mu(&self) -> T {
        (self.omega * self.k_factor / (self.k_factor + T::one())).sqrt()
    }

    /// Scattered power `sigma²`.
    pub fn sigma2(&self) -> T {
        self.omega / (self.k_factor + T::one())
    }

    pub fn sampler(&self) -> RicianSampler<T> {
        RicianSampler { mu: self.mu(), scale: (self.sigma2() / T::lit(2.0)).sqrt() }
    }

    /// Density of `gamma`, assembled in the log domain.
    pub fn pdf(&self, gamma: T) -> Result<T> {
        check_gamma(gamma)?;
        Ok(self.pdf_unchecked(gamma))
    }

    pub(crate) fn pdf_unchecked(&self, gamma: T) -> T {
        if gamma <= T::zero() {
            return T::zero();
        }
        if gamma == T::infinity() {
            return T::zero();
        }
        let s2 = self.sigma2();
        let mu = self.mu();
        let two = T::lit(2.0);
        let d = gamma - mu;
        let arg = two * gamma * mu / s2;
        let log_p = (two * gamma / s2).ln() - d * d / s2 + special::bessel_i0e(arg).ln();
        log_p.exp()
    }

    /// `P(gamma)`.
    pub fn cdf(&self, gamma: T) -> Result<T> {
        check_gamma(gamma)?;
        Ok(self.cdf_sf(gamma).0)
    }

    /// `1 - P(gamma)`, accurate in the upper tail.
    pub fn sf(&self, gamma: T) -> Result<T> {
        check_gamma(gamma)?;
        Ok(self.cdf_sf(gamma).1)
    }

    /// `(P(gamma), 1 - P(gamma))` via `1 - Q1(sqrt(2K), gamma·sqrt(2(K+1)/omega))`.
    pub(crate) fn cdf_sf(&self, gamma: T) -> (T, T) {
        if gamma <= T::zero() {
            return (T::zero(), T::one());
        }
        if gamma == T::infinity() {
            return (T::one(), T::zero());
        }
        let k = self.k_factor;
        if k > T::lit(MIXTURE_MAX_K) {
            return self.cdf_sf_quadrature(gamma);
        }
        let x = gamma * gamma * (k + T::one()) / self.omega;
        special::poisson_gamma_mixture(k, x)
    }

    fn cdf_sf_quadrature(&self, gamma: T) -> (T, T) {
        let width = T::lit(40.0) * (self.sigma2() / T::lit(2.0)).sqrt();
        let mu = self.mu();
        let lo = (mu - width).max(T::zero());
        let hi = mu + width;
        let tol = T::tol(1e-15);
        let rel = T::tol(1e-13);
        let f = |g: T| self.pdf_unchecked(g);
        if gamma <= mu {
            let c = if gamma <= lo { T::zero() } else { quad::integrate(f, lo, gamma, tol, rel).unwrap_or(T::zero()) };
            (c, T::one() - c)
        } else {
            let s = if gamma >= hi { T::zero() } else { quad::integrate(f, gamma, hi, tol, rel).unwrap_or(T::zero()) };
            (T::one() - s, s)
        }
    }

    /// Inverse of [`cdf`](Self::cdf) for `p` in `[0, 1)`.
    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p >= T::zero() && p < T::one()) {
            return Err(Error::Domain(format!("quantile probability must lie in [0, 1), got {p}")));
        }
        if p == T::zero() {
            return Ok(T::zero());
        }
        let upper = p > T::lit(0.5);
        let q = T::one() - p;
        let target = |g: T| {
            let (c, s) = self.cdf_sf(g);
            if upper {
                q - s
            } else {
                c - p
            }
        };
        let mut hi = self.mu() + T::lit(4.0) * self.sigma2().sqrt() + T::lit(1e-3) * self.omega.sqrt();
        let mut guard = 0;
        while target(hi) < T::zero() {
            hi = hi * T::lit(2.0);
            guard += 1;
            if guard > 200 {
                return Err(Error::Convergence("quantile bracket expansion".into()));
            }
        }
        brent(target, T::zero(), hi, T::zero(), 300)
    }

    /// `n` magnitudes at probability levels `i/(n+1)`, `i = 1..=n`.
    pub fn quantile_grid(&self, n: usize) -> Result<Vec<T>> {
        let denom = T::from_usize_lossy(n + 1);
        (1..=n).map(|i| self.quantile(T::from_usize_lossy(i) / denom)).collect()
    }

    /// Density of the power `g = gamma²`, i.e. `p(sqrt g) / (2 sqrt g)`.
    pub fn power_pdf(&self, g: T) -> T {
        if g < T::zero() || g == T::infinity() {
            return T::zero();
        }
        let gamma = g.sqrt();
        let s2 = self.sigma2();
        let mu = self.mu();
        let d = gamma - mu;
        (-(s2.ln()) - d * d / s2 + special::bessel_i0e(T::lit(2.0) * gamma * mu / s2).ln()).exp()
    }

    /// Probability mass of `[a, b)`.
    pub fn mass(&self, a: T, b: T) -> T {
        let (ca, sa) = self.cdf_sf(a.max(T::zero()));
        let (cb, sb) = self.cdf_sf(b.max(T::zero()));
        // difference of the smaller tail is better conditioned
        if ca < sa {
            (cb - ca).max(T::zero())
        } else {
            (sa - sb).max(T::zero())
        }
    }
}

fn check_gamma<T: Scalar>(gamma: T) -> Result<()> {
    if gamma.is_nan() || gamma < T::zero() {
        return Err(Error::Domain(format!("channel magnitude must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// Draws `gamma = |mu + sqrt(sigma²/2)·(g1 + i g2)|`.
#[derive(Debug, Clone, Copy)]
pub struct RicianSampler<T> {
    mu: T,
    scale: T,
}

impl<T: Scalar> RicianSampler<T> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let g1: f64 = StandardNormal.sample(rng);
        let g2: f64 = StandardNormal.sample(rng);
        let re = self.mu + self.scale * T::lit(g1);
        let im = self.scale * T::lit(g2);
        re.hypot(im)
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, out: &mut Vec<T>) {
        out.clear();
        out.extend((0..n).map(|_| self.draw(rng)));
    }
}

/// `n` i.i.d. magnitudes, reproducible from `seed`.
pub fn sample_gammas<T: Scalar>(spec: &RicianSpec<T>, n: usize, seed: u64) -> Result<Vec<ChannelSample<T>>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    let mut r = rng::stream(seed, 0);
    let sampler = spec.sampler();
    Ok((0..n).map(|_| ChannelSample(sampler.draw(&mut r))).collect())
}

/// Instantaneous capacity `log2(1 + gamma²·snr)` in bits per channel use.
#[inline]
pub fn capacity<T: Scalar>(gamma: T, snr: T) -> T {
    (gamma * gamma * snr).ln_1p() / T::LN_2()
}

/// Smallest magnitude that supports `rate`: `sqrt((2^rate - 1)/snr)`.
#[inline]
pub fn capacity_inverse<T: Scalar>(rate: T, snr: T) -> T {
    if rate <= T::zero() {
        return T::zero();
    }
    ((rate * T::LN_2()).exp_m1() / snr).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn spec(k: f64) -> RicianSpec<f64> {
        RicianSpec::new(k, 1.0, 100.0).unwrap()
    }

    #[test]
    fn derived_parameters_reproduce_k_and_omega() {
        for &k in &[0.0, 0.5, 3.0, 10.0, 1e4] {
            let s: RicianSpec<f64> = RicianSpec::new(k, 2.5, 1.0).unwrap();
            let (mu, s2) = (s.mu(), s.sigma2());
            assert!((mu * mu + s2 - 2.5).abs() < 1e-12);
            if k > 0.0 {
                assert!((mu * mu / s2 - k).abs() < 1e-9 * k);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(RicianSpec::new(-1.0, 1.0, 1.0).is_err());
        assert!(RicianSpec::new(1.0, 0.0, 1.0).is_err());
        assert!(RicianSpec::new(1.0, 1.0, -3.0).is_err());
        assert!(RicianSpec::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(sample_gammas(&spec(1.0), 0, 1).is_err());
    }

    #[test]
    fn rayleigh_reductions() {
        let s = spec(0.0);
        assert_eq!(s.pdf(0.0).unwrap(), 0.0);
        assert!((s.pdf(1.0).unwrap() - 2.0 / E).abs() < 1e-15);
        assert!((s.cdf(1.0).unwrap() - (1.0 - 1.0 / E)).abs() < 1e-15);
        assert!((s.quantile(1.0 - 1.0 / E).unwrap() - 1.0).abs() < 1e-12);
        for i in 1..50 {
            let g = i as f64 * 0.07;
            assert!((s.pdf(g).unwrap() - 2.0 * g * (-g * g).exp()).abs() < 1e-10);
            assert!((s.cdf(g).unwrap() - (1.0 - (-g * g).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn domain_errors() {
        let s = spec(1.0);
        assert!(matches!(s.pdf(-0.1), Err(Error::Domain(_))));
        assert!(matches!(s.cdf(-0.1), Err(Error::Domain(_))));
        assert!(matches!(s.quantile(1.0), Err(Error::Domain(_))));
        assert!(matches!(s.quantile(-0.2), Err(Error::Domain(_))));
        assert_eq!(s.quantile(0.0).unwrap(), 0.0);
        assert_eq!(s.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn quantile_round_trip() {
        for &k in &[0.0, 1.0, 10.0, 100.0, 5e3] {
            let s = spec(k);
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let q = s.quantile(p).unwrap();
                assert!((s.cdf(q).unwrap() - p).abs() < 1e-10, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn capacity_values() {
        assert_eq!(capacity(0.0, 7.0), 0.0);
        assert!((capacity(1.0, 100.0) - 101f64.log2()).abs() < 1e-14);
        let s = spec(3.0);
        let lo = capacity(s.quantile(0.5).unwrap(), 100.0);
        let hi = capacity(s.quantile(0.9).unwrap(), 100.0);
        assert!(lo < hi);
        let r: f64 = 4.2;
        assert!((capacity(capacity_inverse(r, 100.0), 100.0) - r).abs() < 1e-12);
    }

    #[test]
    fn power_density_rayleigh_and_change_of_variables() {
        let r = spec(0.0);
        for g in [0.0, 0.3, 1.0, 4.0] {
            assert!((r.power_pdf(g) - (-g as f64).exp()).abs() < 1e-14);
        }
        let s = spec(7.0);
        for gamma in [0.2, 0.9, 1.3] {
            let lhs = s.power_pdf(gamma * gamma) * 2.0 * gamma;
            assert!((lhs - s.pdf(gamma).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_grid_is_increasing() {
        let g = spec(3.0).quantile_grid(64).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] > 0.0);
    }

    #[test]
    fn strong_line_of_sight_concentrates() {
        let xs = sample_gammas(&spec(1e6), 100, 3).unwrap();
        assert!(xs.iter().all(|g| (g.gamma() - 1.0).abs() < 0.01));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_gammas(&spec(2.0), 50, 11).unwrap();
        let b = sample_gammas(&spec(2.0), 50, 11).unwrap();
        let c = sample_gammas(&spec(2.0), 50, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mixture_and_quadrature_cdf_agree_near_switch() {
        let s = spec(900.0);
        let mu = s.mu();
        for d in [-0.05, -0.02, 0.0, 0.01, 0.03] {
            let g = mu + d;
            let (c, _) = s.cdf_sf(g);
            let (cq, _) = s.cdf_sf_quadrature(g);
            assert!((c - cq).abs() < 1e-10, "{g}: {c} {cq}");
        }
    }

    #[test]
    fn f32_spec_evaluates() {
        let s = RicianSpec::<f32>::new(10.0, 1.0, 100.0).unwrap();
        let q = s.quantile(0.3).unwrap();
        assert!((s.cdf(q).unwrap() - 0.3).abs() < 1e-5);
    }
}
