//! Training tables for the learned estimator and estimator evaluation.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_features, feature_names, moment_estimator_1, predict_k, EstimatorMethod, EstimatorModel, NUM_MOMENTS};
use crate::channel::RicianSpec;
use crate::error::{Error, Result};
use crate::rng;

/// Rows of moment features with the K that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    pub feature_names: Vec<String>,
    features: Vec<f64>,
    pub k_true: Vec<f64>,
    pub sample_counts: Vec<usize>,
}

impl TrainingTable {
    pub fn new(feature_names: Vec<String>, features: Vec<f64>, k_true: Vec<f64>, sample_counts: Vec<usize>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 || features.len() != d * k_true.len() || sample_counts.len() != k_true.len() {
            return Err(Error::Validation("training table shape mismatch".into()));
        }
        Ok(Self { feature_names, features, k_true, sample_counts })
    }

    pub fn len(&self) -> usize {
        self.k_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_true.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.feature_names.len();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn k_range(&self) -> [f64; 2] {
        let lo = self.k_true.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.k_true.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        [lo, hi]
    }

    /// Largest per-row sample count.
    pub fn samples_per_record(&self) -> usize {
        self.sample_counts.iter().copied().max().unwrap_or(0)
    }

    /// Same data with columns reordered: new column `c` is old column `order[c]`.
    pub fn with_column_order(&self, order: &[usize]) -> Result<Self> {
        let d = self.feature_names.len();
        let mut seen = vec![false; d];
        if order.len() != d || order.iter().any(|&j| j >= d || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::Validation("column order must be a permutation".into()));
        }
        let names = order.iter().map(|&j| self.feature_names[j].clone()).collect();
        let features = (0..self.len()).flat_map(|i| order.iter().map(move |&j| self.row(i)[j])).collect();
        Self::new(names, features, self.k_true.clone(), self.sample_counts.clone())
    }

    /// CSV with header `k_true,n,<feature columns>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k_true".to_string(), "n".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.k_true[i].to_string(), self.sample_counts[i].to_string()];
            rec.extend(self.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv); `#` lines are comments.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header = r.headers()?.clone();
        let k_col = header.iter().position(|h| h == "k_true").ok_or_else(|| Error::Format("missing k_true column".into()))?;
        let n_col = header.iter().position(|h| h == "n").ok_or_else(|| Error::Format("missing n column".into()))?;
        let feat_cols: Vec<usize> = (0..header.len()).filter(|&c| c != k_col && c != n_col).collect();
        let names = feat_cols.iter().map(|&c| header[c].to_string()).collect();
        let (mut features, mut k_true, mut counts) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec[c].trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {:?}: {e}", &rec[c])))
            };
            k_true.push(num(k_col)?);
            counts.push(rec[n_col].trim().parse::<usize>().map_err(|e| Error::Format(format!("bad count: {e}")))?);
            for &c in &feat_cols {
                features.push(num(c)?);
            }
        }
        Self::new(names, features, k_true, counts)
    }
}

/// `dataset_size` rows, each the features of `samples_per_record` magnitudes
/// drawn at a K uniform on `k_range`.
pub fn generate_dataset(k_range: [f64; 2], dataset_size: usize, samples_per_record: usize, seed: u64) -> Result<TrainingTable> {
    let [lo, hi] = k_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(Error::Parameter(format!("invalid K range [{lo}, {hi}]")));
    }
    if dataset_size == 0 || samples_per_record < 2 {
        return Err(Error::Parameter("dataset needs >= 1 row and >= 2 samples per row".into()));
    }
    let rows: Vec<(f64, [f64; NUM_MOMENTS])> = (0..dataset_size)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let k = if hi > lo { r.random_range(lo..=hi) } else { lo };
            let sampler = RicianSpec::new(k, 1.0, 1.0)?.sampler();
            let gammas: Vec<f64> = (0..samples_per_record).map(|_| sampler.draw(&mut r)).collect();
            Ok((k, compute_features(&gammas)?.raw_moments))
        })
        .collect::<Result<_>>()?;
    let k_true = rows.iter().map(|r| r.0).collect();
    let features = rows.iter().flat_map(|r| r.1).collect();
    TrainingTable::new(feature_names(), features, k_true, vec![samples_per_record; dataset_size])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub k_true: f64,
    pub n: usize,
    pub method: EstimatorMethod,
    pub mean_khat: f64,
    pub std_khat: f64,
    /// `mean - 2·std`.
    pub lo: f64,
    /// `mean + 2·std`.
    pub hi: f64,
    pub mse: f64,
}

impl EvaluationRow {
    pub fn bias(&self) -> f64 {
        self.mean_khat - self.k_true
    }

    fn from_estimates(k_true: f64, n: usize, method: EstimatorMethod, est: &[f64]) -> Self {
        let t = est.len() as f64;
        let mean = est.iter().sum::<f64>() / t;
        let var = if est.len() > 1 { est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (t - 1.0) } else { 0.0 };
        let std = var.sqrt();
        let mse = est.iter().map(|e| (e - k_true).powi(2)).sum::<f64>() / t;
        Self { k_true, n, method, mean_khat: mean, std_khat: std, lo: mean - 2.0 * std, hi: mean + 2.0 * std, mse }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub rows: Vec<EvaluationRow>,
}

impl EvaluationTable {
    pub fn get(&self, k_true: f64, n: usize, method: EstimatorMethod) -> Option<&EvaluationRow> {
        self.rows.iter().find(|r| r.k_true == k_true && r.n == n && r.method == method)
    }

    /// CSV with header `k_true,n,method,mean_khat,lo,hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k_true", "n", "method", "mean_khat", "lo", "hi"])?;
        for r in &self.rows {
            w.write_record([
                r.k_true.to_string(),
                r.n.to_string(),
                r.method.tag().to_string(),
                r.mean_khat.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo comparison of the first moment estimator and the learned model
/// on every `(K, N)` cell; rows ordered by K, then N, then method.
pub fn evaluate_estimators(
    model: &EstimatorModel,
    true_k_grid: &[f64],
    n_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<EvaluationTable> {
    if true_k_grid.is_empty() || n_values.is_empty() || trials == 0 {
        return Err(Error::Parameter("evaluation needs a non-empty K grid, N list and trial count".into()));
    }
    if n_values.iter().any(|&n| n < 2) {
        return Err(Error::Parameter("every N must be >= 2".into()));
    }
    let cells: Vec<(usize, f64, usize)> = true_k_grid
        .iter()
        .flat_map(|&k| n_values.iter().map(move |&n| (k, n)))
        .enumerate()
        .map(|(i, (k, n))| (i, k, n))
        .collect();
    let rows: Vec<[EvaluationRow; 2]> = cells
        .par_iter()
        .map(|&(cell, k, n)| {
            let sampler = RicianSpec::new(k, 1.0, 1.0)?.sampler();
            let mut r = rng::stream(seed, cell as u64);
            let mut gammas = Vec::with_capacity(n);
            let mut moment = Vec::with_capacity(trials);
            let mut learned = Vec::with_capacity(trials);
            for _ in 0..trials {
                sampler.fill(&mut r, n, &mut gammas);
                let f = compute_features(&gammas)?;
                moment.push(moment_estimator_1(&f).k_hat);
                learned.push(predict_k(model, &f).k_hat);
            }
            Ok([
                EvaluationRow::from_estimates(k, n, EstimatorMethod::Moment1, &moment),
                EvaluationRow::from_estimates(k, n, EstimatorMethod::Learned, &learned),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(EvaluationTable { rows: rows.into_iter().flatten().collect() })
}
