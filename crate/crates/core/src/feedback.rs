//! Quantized feedback schemes: region lookup, rate assignment and goodput.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{capacity, capacity_inverse, RicianSpec};
use crate::error::{Error, Result};
use crate::scalar::{db_to_linear, linear_to_db, CompensatedSum, Scalar};

/// Boundaries `0 = λ_0 < λ_1 < … < λ_Λ = ∞` and one rate per region.
///
/// Region `l` owns `[λ_l, λ_{l+1})`. Rates need not be rate-matched; a rate
/// above `C(λ_l)` puts the lower part of its region in outage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackScheme<T> {
    lambdas: Vec<T>,
    rates: Vec<T>,
    snr: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodputReport<T> {
    pub goodput: T,
    pub outage_rate: T,
    pub per_region_mass: Vec<T>,
}

impl<T: Scalar> FeedbackScheme<T> {
    pub fn new(lambdas: Vec<T>, rates: Vec<T>, snr: T) -> Result<Self> {
        validate_lambdas(&lambdas)?;
        if rates.len() + 1 != lambdas.len() {
            return Err(Error::Validation(format!(
                "{} boundaries need {} rates, got {}",
                lambdas.len(),
                lambdas.len() - 1,
                rates.len()
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= T::zero())) {
            return Err(Error::Validation(format!("rates must be finite and >= 0, got {r}")));
        }
        if !(snr.is_finite() && snr > T::zero()) {
            return Err(Error::Validation(format!("snr must be finite and > 0, got {snr}")));
        }
        Ok(Self { lambdas, rates, snr })
    }

    /// Scheme with `r_l = C(λ_l)`: never in outage, `r_0 = 0`.
    pub fn rate_match(lambdas: Vec<T>, snr: T) -> Result<Self> {
        validate_lambdas(&lambdas)?;
        let rates = lambdas[..lambdas.len() - 1].iter().map(|&l| capacity(l, snr)).collect();
        Self::new(lambdas, rates, snr)
    }

    /// Rate-matched scheme from the interior boundaries `λ_1..λ_{Λ-1}` only.
    pub fn from_interior(interior: &[T], snr: T) -> Result<Self> {
        let mut lambdas = Vec::with_capacity(interior.len() + 2);
        lambdas.push(T::zero());
        lambdas.extend_from_slice(interior);
        lambdas.push(T::infinity());
        Self::rate_match(lambdas, snr)
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn interior(&self) -> &[T] {
        &self.lambdas[1..self.lambdas.len() - 1]
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn snr(&self) -> T {
        self.snr
    }

    /// Λ.
    pub fn num_regions(&self) -> usize {
        self.rates.len()
    }

    /// Magnitudes `γ_l^r = C⁻¹(r_l)` at which each rate stops being in outage.
    pub fn reconstruction_points(&self) -> Vec<T> {
        self.rates.iter().map(|&r| capacity_inverse(r, self.snr)).collect()
    }

    /// Region index `l` with `λ_l <= gamma < λ_{l+1}`.
    pub fn quantize(&self, gamma: T) -> usize {
        let above = self.lambdas.partition_point(|&l| l <= gamma);
        above.saturating_sub(1).min(self.num_regions() - 1)
    }

    pub fn is_rate_matched(&self) -> bool {
        self.lambdas.iter().zip(&self.rates).all(|(&l, &r)| r == capacity(l, self.snr))
    }
}

fn validate_lambdas<T: Scalar>(lambdas: &[T]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(Error::Validation("a scheme needs at least the boundaries 0 and infinity".into()));
    }
    if lambdas[0] != T::zero() {
        return Err(Error::Validation(format!("first boundary must be 0, got {}", lambdas[0])));
    }
    if *lambdas.last().unwrap() != T::infinity() {
        return Err(Error::Validation("last boundary must be infinite".into()));
    }
    let interior = &lambdas[1..lambdas.len() - 1];
    if interior.iter().any(|l| !l.is_finite()) {
        return Err(Error::Validation("interior boundaries must be finite".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Validation("boundaries must be strictly increasing".into()));
    }
    Ok(())
}

/// Expected goodput and outage of `scheme` under the channel law of `spec`.
///
/// Region `l` delivers `r_l` whenever `γ >= max(λ_l, γ_l^r)` and is in outage
/// on `[λ_l, γ_l^r)`.
pub fn analytic_goodput<T: Scalar>(scheme: &FeedbackScheme<T>, spec: &RicianSpec<T>) -> GoodputReport<T> {
    let lam = scheme.lambdas();
    let mut goodput = CompensatedSum::new();
    let mut outage = CompensatedSum::new();
    let mut mass = Vec::with_capacity(scheme.num_regions());
    for (l, &r) in scheme.rates().iter().enumerate() {
        let (lo, hi) = (lam[l], lam[l + 1]);
        mass.push(spec.mass(lo, hi));
        if r == T::zero() {
            continue;
        }
        // same comparison as the per-sample rule, so rate matching is exact
        let threshold = if capacity(lo, spec.snr) >= r { lo } else { capacity_inverse(r, spec.snr) };
        let start = lo.max(threshold);
        if start < hi {
            goodput.add(r * spec.mass(start, hi));
        }
        if threshold > lo {
            outage.add(spec.mass(lo, threshold.min(hi)));
        }
    }
    GoodputReport {
        goodput: goodput.value(),
        outage_rate: outage.value().min(T::one()).max(T::zero()),
        per_region_mass: mass,
    }
}

/// Sample-mean goodput over observed magnitudes: rate `r_l` is credited only
/// when `r_l <= C(γ)`.
pub fn empirical_goodput<T: Scalar>(scheme: &FeedbackScheme<T>, gammas: &[T]) -> Result<GoodputReport<T>> {
    if gammas.is_empty() {
        return Err(Error::Usage("empirical goodput needs at least one sample".into()));
    }
    let mut counts = vec![0usize; scheme.num_regions()];
    let mut outages = 0usize;
    let mut total = CompensatedSum::new();
    for &g in gammas {
        let l = scheme.quantize(g);
        counts[l] += 1;
        let r = scheme.rates[l];
        if r == T::zero() {
            continue;
        }
        if r <= capacity(g, scheme.snr) {
            total.add(r);
        } else {
            outages += 1;
        }
    }
    let n = T::from_usize_lossy(gammas.len());
    Ok(GoodputReport {
        goodput: total.value() / n,
        outage_rate: T::from_usize_lossy(outages) / n,
        per_region_mass: counts.into_iter().map(|c| T::from_usize_lossy(c) / n).collect(),
    })
}

#[derive(Serialize, Deserialize)]
struct SchemeJson {
    /// `null` stands for the infinite last boundary.
    lambdas: Vec<Option<f64>>,
    rates: Vec<f64>,
    snr_db: f64,
}

impl<T: Scalar> Serialize for FeedbackScheme<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SchemeJson {
            lambdas: self
                .lambdas
                .iter()
                .map(|l| if l.is_finite() { Some(l.to_f64_lossy()) } else { None })
                .collect(),
            rates: self.rates.iter().map(|r| r.to_f64_lossy()).collect(),
            snr_db: linear_to_db(self.snr.to_f64_lossy()),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for FeedbackScheme<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SchemeJson::deserialize(d)?;
        let lambdas = raw.lambdas.into_iter().map(|l| l.map_or(T::infinity(), T::lit)).collect();
        let rates = raw.rates.into_iter().map(T::lit).collect();
        FeedbackScheme::new(lambdas, rates, T::lit(db_to_linear(raw.snr_db))).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn three_region() -> FeedbackScheme<f64> {
        FeedbackScheme::from_interior(&[1.0, 2.0], 100.0).unwrap()
    }

    #[test]
    fn quantize_is_half_open() {
        let s = three_region();
        assert_eq!(s.quantize(0.0), 0);
        assert_eq!(s.quantize(0.5), 0);
        assert_eq!(s.quantize(1.0), 1);
        assert_eq!(s.quantize(2.0), 2);
        assert_eq!(s.quantize(1e300), 2);
        assert_eq!(s.quantize(f64::INFINITY), 2);
    }

    #[test]
    fn rate_match_examples() {
        let one = FeedbackScheme::rate_match(vec![0.0, f64::INFINITY], 100.0).unwrap();
        assert_eq!(one.rates(), &[0.0]);
        let two = FeedbackScheme::rate_match(vec![0.0, 1.0, f64::INFINITY], 100.0).unwrap();
        assert_eq!(two.rates()[0], 0.0);
        assert!((two.rates()[1] - 101f64.log2()).abs() < 1e-14);
        assert!(two.is_rate_matched());
    }

    #[test]
    fn invalid_boundaries_rejected() {
        let inf = f64::INFINITY;
        assert!(FeedbackScheme::rate_match(vec![0.0, 2.0, 1.0, inf], 1.0).is_err());
        assert!(FeedbackScheme::rate_match(vec![0.0, 1.0, 1.0, inf], 1.0).is_err());
        assert!(FeedbackScheme::rate_match(vec![0.1, inf], 1.0).is_err());
        assert!(FeedbackScheme::rate_match(vec![0.0, 1.0], 1.0).is_err());
        assert!(FeedbackScheme::new(vec![0.0, inf], vec![0.0, 1.0], 1.0).is_err());
        assert!(FeedbackScheme::new(vec![0.0, inf], vec![-1.0], 1.0).is_err());
    }

    #[test]
    fn rayleigh_two_region_goodput() {
        let spec = RicianSpec::new(0.0, 1.0, 100.0).unwrap();
        let s = FeedbackScheme::from_interior(&[1.0], 100.0).unwrap();
        let rep = analytic_goodput(&s, &spec);
        assert!((rep.goodput - 101f64.log2() / E).abs() < 1e-13);
        assert_eq!(rep.outage_rate, 0.0);
        assert!((rep.per_region_mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_region_rate_matched_has_zero_goodput() {
        let spec = RicianSpec::new(3.0, 1.0, 100.0).unwrap();
        let s = FeedbackScheme::from_interior(&[], 100.0).unwrap();
        assert_eq!(analytic_goodput(&s, &spec).goodput, 0.0);
    }

    #[test]
    fn outage_accounting_for_fixed_rate() {
        // one region at rate C(1): outage is exactly P(1)
        let spec = RicianSpec::new(0.0, 1.0, 100.0).unwrap();
        let r = capacity(1.0, 100.0);
        let s = FeedbackScheme::new(vec![0.0, f64::INFINITY], vec![r], 100.0).unwrap();
        let rep = analytic_goodput(&s, &spec);
        assert!((rep.outage_rate - (1.0 - 1.0 / E)).abs() < 1e-12);
        assert!((rep.goodput - r / E).abs() < 1e-12);
    }

    #[test]
    fn empirical_examples() {
        let s = FeedbackScheme::from_interior(&[1.0], 100.0).unwrap();
        let low = empirical_goodput(&s, &[0.1, 0.5, 0.99]).unwrap();
        assert_eq!(low.goodput, 0.0);
        let one = empirical_goodput(&s, &[1.0]).unwrap();
        assert!((one.goodput - 101f64.log2()).abs() < 1e-14);
        assert_eq!(one.outage_rate, 0.0);
        assert!(matches!(empirical_goodput(&s, &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn json_uses_null_for_infinity() {
        let s = three_region();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("null"));
        assert!(text.contains("\"snr_db\":20"));
        let back: FeedbackScheme<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.lambdas(), s.lambdas());
        assert_eq!(back.rates(), s.rates());
        assert!((back.snr() - 100.0).abs() < 1e-12);
        assert!(serde_json::from_str::<FeedbackScheme<f64>>(r#"{"lambdas":[0,2,1,null],"rates":[0,1,2],"snr_db":20}"#).is_err());
    }
}
