//! Rician K-factor estimation from magnitude samples.
//!
//! Three method-of-moments estimators invert closed-form moment ratios; the
//! learned estimator regresses K on the first ten normalized raw moments with
//! a gradient-boosted tree ensemble.

mod dataset;
mod gbdt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{brent, special};
use crate::scalar::{CompensatedSum, Scalar};

pub use dataset::{evaluate_estimators, generate_dataset, EvaluationRow, EvaluationTable, TrainingTable};
pub use gbdt::{predict_k, train_estimator, EstimatorModel, GbdtParams, Tree, TrainingMeta, MODEL_FORMAT};

pub const NUM_MOMENTS: usize = 10;
/// Search interval upper end for moment inversion.
pub const K_MAX: f64 = 1e4;

/// Canonical feature column names `m1..m10`.
pub fn feature_names() -> Vec<String> {
    (1..=NUM_MOMENTS).map(|i| format!("m{i}")).collect()
}

/// Raw moments `m_1..m_10` of a batch scaled to unit second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MomentFeatures<T> {
    pub raw_moments: [T; NUM_MOMENTS],
    pub sample_count: usize,
}

impl<T: Scalar> MomentFeatures<T> {
    /// `m_i`, one-based.
    pub fn moment(&self, i: usize) -> T {
        self.raw_moments[i - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorMethod {
    #[serde(rename = "moment-1")]
    Moment1,
    #[serde(rename = "moment-2")]
    Moment2,
    #[serde(rename = "moment-3")]
    Moment3,
    #[serde(rename = "learned")]
    Learned,
}

impl EstimatorMethod {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorMethod::Moment1 => "moment-1",
            EstimatorMethod::Moment2 => "moment-2",
            EstimatorMethod::Moment3 => "moment-3",
            EstimatorMethod::Learned => "learned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KEstimate<T> {
    pub k_hat: T,
    pub method: EstimatorMethod,
    /// The observed statistic fell outside the attainable range and `k_hat`
    /// sits at a range end.
    pub clamped: bool,
}

/// Normalize by `sqrt(m_2)` and take raw moments with compensated sums.
pub fn compute_features<T: Scalar>(gammas: &[T]) -> Result<MomentFeatures<T>> {
    if gammas.len() < 2 {
        return Err(Error::Estimation(format!("need at least 2 samples, got {}", gammas.len())));
    }
    if gammas.iter().any(|g| !(g.is_finite() && *g >= T::zero())) {
        return Err(Error::Estimation("samples must be finite magnitudes".into()));
    }
    let n = T::from_usize_lossy(gammas.len());
    let mut power = CompensatedSum::new();
    gammas.iter().for_each(|&g| power.add(g * g));
    let m2 = power.value() / n;
    if !(m2 > T::zero()) || !m2.is_finite() {
        return Err(Error::Estimation("degenerate batch: zero second moment".into()));
    }
    let scale = m2.sqrt();
    let mut sums = [CompensatedSum::<T>::new(); NUM_MOMENTS];
    for &g in gammas {
        let x = g / scale;
        let mut p = T::one();
        for s in sums.iter_mut() {
            p *= x;
            s.add(p);
        }
    }
    let mut raw_moments = [T::zero(); NUM_MOMENTS];
    for (m, s) in raw_moments.iter_mut().zip(&sums) {
        *m = s.value() / n;
    }
    raw_moments[1] = T::one();
    Ok(MomentFeatures { raw_moments, sample_count: gammas.len() })
}

/// `m_1/sqrt(m_2)` as a function of K: `½·sqrt(π/(K+1))·L_{1/2}(K)`. Increasing.
pub fn mean_ratio<T: Scalar>(k: T) -> T {
    T::lit(0.5) * (T::PI() / (k + T::one())).sqrt() * special::laguerre_half(k)
}

/// `m_4/m_2²`: `1 + (2K+1)/(K+1)²`. Decreasing from 2 to 1.
pub fn fourth_ratio<T: Scalar>(k: T) -> T {
    let u = k + T::one();
    T::one() + (T::lit(2.0) * k + T::one()) / (u * u)
}

/// `m_6/m_2³`: `(K³ + 9K² + 18K + 6)/(K+1)³`. Decreasing from 6 to 1.
pub fn sixth_ratio<T: Scalar>(k: T) -> T {
    let u = k + T::one();
    (((k + T::lit(9.0)) * k + T::lit(18.0)) * k + T::lit(6.0)) / (u * u * u)
}

fn invert_monotone<T: Scalar>(f: impl Fn(T) -> T, target: T, method: EstimatorMethod) -> KEstimate<T> {
    let (lo, hi) = (T::zero(), T::lit(K_MAX));
    let (f_lo, f_hi) = (f(lo), f(hi));
    let increasing = f_hi > f_lo;
    let below = if increasing { target <= f_lo } else { target >= f_lo };
    let above = if increasing { target >= f_hi } else { target <= f_hi };
    if below {
        return KEstimate { k_hat: lo, method, clamped: target != f_lo };
    }
    if above {
        return KEstimate { k_hat: hi, method, clamped: target != f_hi };
    }
    let k = brent(|k| f(k) - target, lo, hi, T::zero(), 400).unwrap_or(lo);
    KEstimate { k_hat: k.max(T::zero()), method, clamped: false }
}

pub fn moment_estimator_1<T: Scalar>(features: &MomentFeatures<T>) -> KEstimate<T> {
    let ratio = features.moment(1) / features.moment(2).sqrt();
    invert_monotone(mean_ratio, ratio, EstimatorMethod::Moment1)
}

/// Closed-form inverse of the fourth-moment ratio.
pub fn moment_estimator_2<T: Scalar>(features: &MomentFeatures<T>) -> KEstimate<T> {
    let m2 = features.moment(2);
    let y = features.moment(4) / (m2 * m2) - T::one();
    let method = EstimatorMethod::Moment2;
    let y_min = fourth_ratio(T::lit(K_MAX)) - T::one();
    if !(y < T::one()) {
        return KEstimate { k_hat: T::zero(), method, clamped: y != T::one() };
    }
    if y <= y_min {
        return KEstimate { k_hat: T::lit(K_MAX), method, clamped: y != y_min };
    }
    let r = (T::one() - y).sqrt();
    let k = (T::one() - y + r) / y;
    KEstimate { k_hat: k.max(T::zero()).min(T::lit(K_MAX)), method, clamped: false }
}

pub fn moment_estimator_3<T: Scalar>(features: &MomentFeatures<T>) -> KEstimate<T> {
    let m2 = features.moment(2);
    let ratio = features.moment(6) / (m2 * m2 * m2);
    invert_monotone(sixth_ratio, ratio, EstimatorMethod::Moment3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_ratios(m1: f64, m4: f64, m6: f64) -> MomentFeatures<f64> {
        let mut raw = [1.0; NUM_MOMENTS];
        raw[0] = m1;
        raw[3] = m4;
        raw[5] = m6;
        MomentFeatures { raw_moments: raw, sample_count: 100 }
    }

    #[test]
    fn constant_batch_has_unit_moments() {
        let f = compute_features(&[2.5f64; 7]).unwrap();
        for m in f.raw_moments {
            assert!((m - 1.0).abs() < 1e-15);
        }
        assert_eq!(f.sample_count, 7);
    }

    #[test]
    fn second_moment_feature_is_exactly_one() {
        let f = compute_features(&[0.1f64, 0.7, 3.0, 1.9]).unwrap();
        assert_eq!(f.moment(2), 1.0);
    }

    #[test]
    fn degenerate_batches_rejected() {
        assert!(matches!(compute_features(&[1.0f64]), Err(Error::Estimation(_))));
        assert!(matches!(compute_features(&[0.0f64, 0.0]), Err(Error::Estimation(_))));
        assert!(compute_features(&[1.0f64, -1.0]).is_err());
    }

    #[test]
    fn rayleigh_ratios_give_zero() {
        let f = from_ratios(std::f64::consts::PI.sqrt() / 2.0, 2.0, 6.0);
        assert_eq!(moment_estimator_2(&f).k_hat, 0.0);
        assert_eq!(moment_estimator_3(&f).k_hat, 0.0);
        assert!(moment_estimator_1(&f).k_hat < 1e-9);
        assert!(!moment_estimator_2(&f).clamped);
    }

    #[test]
    fn fourth_ratio_example() {
        let f = from_ratios(0.9, 1.75, 3.0);
        assert!((moment_estimator_2(&f).k_hat - 1.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_ratios_clamp_with_flag() {
        let f = from_ratios(0.5, 2.5, 9.0);
        for e in [moment_estimator_1(&f), moment_estimator_2(&f), moment_estimator_3(&f)] {
            assert_eq!(e.k_hat, 0.0);
            assert!(e.clamped);
        }
        let g = from_ratios(1.0, 1.0, 1.0);
        for e in [moment_estimator_1(&g), moment_estimator_2(&g), moment_estimator_3(&g)] {
            assert_eq!(e.k_hat, K_MAX);
            assert!(e.clamped);
        }
    }

    #[test]
    fn ratio_functions_are_strictly_monotone() {
        let ks: Vec<f64> = (0..=4000).map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 4000.0)).collect();
        let mut prev = (mean_ratio(0.0), fourth_ratio(0.0), sixth_ratio(0.0));
        for &k in &ks {
            let cur = (mean_ratio(k), fourth_ratio(k), sixth_ratio(k));
            assert!(cur.0 > prev.0 && cur.1 < prev.1 && cur.2 < prev.2, "K={k}");
            prev = cur;
        }
    }

    #[test]
    fn ratio_limits() {
        assert!((mean_ratio(0.0f64) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(fourth_ratio(0.0f64), 2.0);
        assert_eq!(sixth_ratio(0.0f64), 6.0);
        assert!((mean_ratio(1e8f64) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn scale_invariance() {
        let xs = [0.3f64, 0.9, 1.4, 0.2, 2.2, 1.1];
        let a = compute_features(&xs).unwrap();
        let b = compute_features(&xs.map(|x| x * 7.5)).unwrap();
        for (x, y) in a.raw_moments.iter().zip(&b.raw_moments) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
