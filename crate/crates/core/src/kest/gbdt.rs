//! Gradient-boosted regression trees, squared-error loss.
//!
//! Splits are exact greedy over presorted feature columns and trees grow
//! level by level. Training is single-threaded and fully determined by the
//! table and the seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{feature_names, EstimatorMethod, KEstimate, MomentFeatures, TrainingTable, NUM_MOMENTS};
use crate::error::{Error, Result};
use crate::rng;

pub const MODEL_FORMAT: &str = "qfb-gbdt-v1";
/// Predictions are clamped to the trained K range end points.
const PREDICTION_RANGE: (f64, f64) = (0.0, 100.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub l2: f64,
    /// Minimum rows on each side of a split.
    pub min_child: usize,
    pub validation_fraction: f64,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 6,
            learning_rate: 0.1,
            l2: 1.0,
            min_child: 10,
            validation_fraction: 0.1,
            patience: 20,
        }
    }
}

/// One tree in flat arrays. Node 0 is the root; `feature < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.value[node];
            }
            node = if row[f as usize] < self.threshold[node] { self.left[node] } else { self.right[node] } as usize;
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub k_range: [f64; 2],
    pub samples_per_record: usize,
    pub dataset_size: usize,
    pub seed: u64,
    pub params: GbdtParams,
    pub best_iteration: usize,
    pub validation_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    pub format: String,
    /// Column order of the tree feature indices.
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
    pub meta: TrainingMeta,
}

impl EstimatorModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Raw ensemble output for a row in this model's column order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Learned estimates for every row of a table, binding columns by name.
    pub fn predict_table(&self, table: &TrainingTable) -> Result<Vec<KEstimate<f64>>> {
        let order = column_order(&table.feature_names, &self.feature_names)?;
        let mut row = vec![0.0; order.len()];
        Ok((0..table.len())
            .map(|i| {
                let src = table.row(i);
                for (dst, &j) in row.iter_mut().zip(&order) {
                    *dst = src[j];
                }
                clamp_estimate(self.predict_row(&row))
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unsupported model format {:?}, expected {MODEL_FORMAT}", self.format)));
        }
        if self.feature_names != feature_names() {
            return Err(Error::Format("model feature columns must be m1..m10".into()));
        }
        for tree in &self.trees {
            let n = tree.feature.len();
            let consistent = [tree.threshold.len(), tree.left.len(), tree.right.len(), tree.value.len()]
                .iter()
                .all(|&l| l == n);
            let links_ok = tree.feature.iter().enumerate().all(|(i, &f)| {
                f < 0 || ((f as usize) < NUM_MOMENTS && (tree.left[i] as usize) < n && (tree.right[i] as usize) < n
                    && tree.left[i] as usize > i && tree.right[i] as usize > i)
            });
            if n == 0 || !consistent || !links_ok {
                return Err(Error::Format("malformed tree".into()));
            }
        }
        Ok(())
    }
}

fn clamp_estimate(raw: f64) -> KEstimate<f64> {
    let (lo, hi) = PREDICTION_RANGE;
    let k_hat = raw.clamp(lo, hi);
    KEstimate { k_hat, method: EstimatorMethod::Learned, clamped: k_hat != raw }
}

/// Positions of `wanted` columns within `have`.
fn column_order(have: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            have.iter()
                .position(|h| h == w)
                .ok_or_else(|| Error::Validation(format!("table has no feature column {w:?}")))
        })
        .collect()
}

/// Learned estimate, clamped to `[0, 100]`.
pub fn predict_k(model: &EstimatorModel, features: &MomentFeatures<f64>) -> KEstimate<f64> {
    clamp_estimate(model.predict_row(&features.raw_moments))
}

/// Fit the ensemble on a 90/10 split with early stopping on validation RMSE.
pub fn train_estimator(table: &TrainingTable, params: &GbdtParams, seed: u64) -> Result<EstimatorModel> {
    validate_params(params)?;
    let n = table.len();
    if n == 0 {
        return Err(Error::Training("empty training table".into()));
    }
    let names = feature_names();
    let order = column_order(&table.feature_names, &names)?;
    let x: Vec<f64> = (0..n).flat_map(|i| {
        let row = table.row(i);
        order.iter().map(move |&j| row[j])
    }).collect();
    let y = &table.k_true;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite values in training table".into()));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let n_valid = ((n as f64) * params.validation_fraction).floor() as usize;
    let n_valid = if n - n_valid == 0 { 0 } else { n_valid };
    let (valid, train) = idx.split_at(n_valid);
    let mut train = train.to_vec();
    train.sort_unstable();

    let d = NUM_MOMENTS;
    let xt: Vec<f64> = train.iter().flat_map(|&i| x[i * d..(i + 1) * d].iter().copied()).collect();
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let xv: Vec<f64> = valid.iter().flat_map(|&i| x[i * d..(i + 1) * d].iter().copied()).collect();
    let yv: Vec<f64> = valid.iter().map(|&i| y[i]).collect();

    let base = yt.iter().sum::<f64>() / yt.len() as f64;
    let mut pred_t = vec![base; yt.len()];
    let mut pred_v = vec![base; yv.len()];
    let builder = TreeBuilder::new(&xt, d, params);
    let mut trees = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    for round in 0..params.n_trees {
        let grad: Vec<f64> = pred_t.iter().zip(&yt).map(|(p, t)| p - t).collect();
        let tree = builder.build(&grad);
        for (i, p) in pred_t.iter_mut().enumerate() {
            *p += tree.predict(&xt[i * d..(i + 1) * d]);
        }
        for (i, p) in pred_v.iter_mut().enumerate() {
            *p += tree.predict(&xv[i * d..(i + 1) * d]);
        }
        trees.push(tree);
        if yv.is_empty() {
            continue;
        }
        let rmse = (pred_v.iter().zip(&yv).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yv.len() as f64).sqrt();
        if rmse < best.0 {
            best = (rmse, round + 1);
        } else if round + 1 - best.1 >= params.patience {
            break;
        }
    }
    let (validation_rmse, best_iteration) = if yv.is_empty() { (None, trees.len()) } else { (Some(best.0), best.1) };
    trees.truncate(best_iteration);

    Ok(EstimatorModel {
        format: MODEL_FORMAT.to_string(),
        feature_names: names,
        base_score: base,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        trees,
        meta: TrainingMeta {
            k_range: table.k_range(),
            samples_per_record: table.samples_per_record(),
            dataset_size: n,
            seed,
            params: params.clone(),
            best_iteration,
            validation_rmse,
        },
    })
}

fn validate_params(p: &GbdtParams) -> Result<()> {
    let ok = p.n_trees >= 1
        && p.max_depth >= 1
        && p.max_depth <= 16
        && p.learning_rate > 0.0
        && p.learning_rate <= 1.0
        && p.l2 >= 0.0
        && p.min_child >= 1
        && (0.0..1.0).contains(&p.validation_fraction)
        && p.patience >= 1;
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(format!("invalid boosting parameters {p:?}")))
    }
}

struct TreeBuilder<'a> {
    x: &'a [f64],
    d: usize,
    n: usize,
    /// Row indices sorted by each feature (ties by row index).
    sorted: Vec<Vec<u32>>,
    params: &'a GbdtParams,
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> TreeBuilder<'a> {
    fn new(x: &'a [f64], d: usize, params: &'a GbdtParams) -> Self {
        let n = x.len() / d;
        let sorted = (0..d)
            .map(|f| {
                let mut v: Vec<u32> = (0..n as u32).collect();
                v.sort_by(|&a, &b| x[a as usize * d + f].total_cmp(&x[b as usize * d + f]).then(a.cmp(&b)));
                v
            })
            .collect();
        Self { x, d, n, sorted, params }
    }

    fn leaf_weight(&self, g: f64, count: usize) -> f64 {
        -self.params.learning_rate * g / (count as f64 + self.params.l2)
    }

    fn score(&self, g: f64, count: usize) -> f64 {
        g * g / (count as f64 + self.params.l2)
    }

    fn build(&self, grad: &[f64]) -> Tree {
        let mut tree = Tree { feature: vec![], threshold: vec![], left: vec![], right: vec![], value: vec![] };
        // per row: position in the current level's frontier, or NONE once in a leaf
        const NONE: u32 = u32::MAX;
        let mut slot = vec![0u32; self.n];
        let total: f64 = grad.iter().sum();
        tree.push_leaf(self.leaf_weight(total, self.n));
        // frontier entries: (tree node, gradient sum, row count)
        let mut frontier = vec![(0usize, total, self.n)];
        for _depth in 0..self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let splits = self.best_splits(grad, &slot, &frontier);
            let mut next = Vec::new();
            // children slots in frontier order; BTreeMap keeps it deterministic
            let mut child_slots: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
            let mut child_stats: Vec<(f64, usize)> = Vec::new();
            for (s, split) in splits.iter().enumerate() {
                if let Some(sp) = split {
                    let (node, _, _) = frontier[s];
                    tree.feature[node] = sp.feature as i32;
                    tree.threshold[node] = sp.threshold;
                    let l = next.len() as u32;
                    child_slots.insert(s as u32, (l, l + 1));
                    next.push((0usize, 0.0, 0usize));
                    next.push((0usize, 0.0, 0usize));
                    child_stats.push((0.0, 0));
                    child_stats.push((0.0, 0));
                }
            }
            for r in 0..self.n {
                let s = slot[r];
                if s == NONE {
                    continue;
                }
                match (splits[s as usize], child_slots.get(&s)) {
                    (Some(sp), Some(&(l, rr))) => {
                        let c = if self.x[r * self.d + sp.feature] < sp.threshold { l } else { rr };
                        slot[r] = c;
                        let st = &mut child_stats[c as usize];
                        st.0 += grad[r];
                        st.1 += 1;
                    }
                    _ => slot[r] = NONE,
                }
            }
            for (s, split) in splits.iter().enumerate() {
                if split.is_none() {
                    continue;
                }
                let node = frontier[s].0;
                let (l, r) = child_slots[&(s as u32)];
                let (gl, nl) = child_stats[l as usize];
                let (gr, nr) = child_stats[r as usize];
                let li = tree.push_leaf(self.leaf_weight(gl, nl));
                let ri = tree.push_leaf(self.leaf_weight(gr, nr));
                tree.left[node] = li as u32;
                tree.right[node] = ri as u32;
                tree.value[node] = 0.0;
                next[l as usize] = (li, gl, nl);
                next[r as usize] = (ri, gr, nr);
            }
            frontier = next;
        }
        tree
    }

    /// Best split per frontier node by one pass over each presorted column.
    fn best_splits(&self, grad: &[f64], slot: &[u32], frontier: &[(usize, f64, usize)]) -> Vec<Option<Split>> {
        let m = frontier.len();
        let min_child = self.params.min_child;
        let mut best: Vec<Option<Split>> = vec![None; m];
        let parent: Vec<f64> = frontier.iter().map(|&(_, g, c)| self.score(g, c)).collect();
        let mut gl = vec![0.0; m];
        let mut nl = vec![0usize; m];
        let mut last = vec![f64::NAN; m];
        for f in 0..self.d {
            gl.iter_mut().for_each(|v| *v = 0.0);
            nl.iter_mut().for_each(|v| *v = 0);
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &r in &self.sorted[f] {
                let r = r as usize;
                let s = slot[r];
                if s == u32::MAX {
                    continue;
                }
                let s = s as usize;
                let v = self.x[r * self.d + f];
                let (_, g_tot, n_tot) = frontier[s];
                if nl[s] >= min_child && v > last[s] && n_tot - nl[s] >= min_child {
                    let gain = self.score(gl[s], nl[s]) + self.score(g_tot - gl[s], n_tot - nl[s]) - parent[s];
                    if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                        let mut threshold = 0.5 * (last[s] + v);
                        if threshold <= last[s] {
                            threshold = v;
                        }
                        best[s] = Some(Split { gain, feature: f, threshold });
                    }
                }
                gl[s] += grad[r];
                nl[s] += 1;
                last[s] = v;
            }
        }
        best
    }
}
