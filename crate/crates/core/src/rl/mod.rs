//! Tabular Q-learning over quantization thresholds.
//!
//! Each interior boundary `λ_1..λ_{Λ-1}` is an agent that sits on a shared
//! grid of candidate positions and moves one cell left, stays, or moves one
//! cell right. Only one agent moves per iteration; its reward is the
//! empirical goodput of the resulting rate-matched scheme.

mod env;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::RicianSpec;
use crate::error::{Error, Result};
use crate::kest::KEstimate;
use crate::scalar::linear_to_db;

pub use env::{
    IterationRecord, KSource, RewardSource, RlConfig, RlEnvironment, RlRun, Segment, TRACE_SCHEMA_VERSION,
};

/// Candidate boundary positions (magnitudes), strictly increasing and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Validation("threshold grid needs at least 2 points".into()));
        }
        if !(values[0] > 0.0) || values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("threshold grid must be positive, finite and strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `n` points at equal probability spacing under `spec`.
    pub fn quantile_spaced(spec: &RicianSpec<f64>, n: usize) -> Result<Self> {
        Self::new(spec.quantile_grid(n)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nearest(&self, x: f64) -> usize {
        let i = self.values.partition_point(|&v| v < x);
        if i == 0 {
            0
        } else if i == self.values.len() || x - self.values[i - 1] <= self.values[i] - x {
            i - 1
        } else {
            i
        }
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Self {
        g.values
    }
}

/// K bins in dB. Bin 0 holds everything below the first edge (including
/// Rayleigh, `K = 0`); bin `j` holds `[edge_{j-1}, edge_j)`; values at or
/// above the last edge fall into the top bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KBins {
    edges_db: Vec<f64>,
}

impl KBins {
    pub fn new(edges_db: Vec<f64>) -> Result<Self> {
        if edges_db.len() < 2 || edges_db.iter().any(|e| !e.is_finite()) || edges_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("K bin edges must be finite, strictly increasing, at least two".into()));
        }
        Ok(Self { edges_db })
    }

    /// Bins of width `step` dB with edges `lo, lo+step, …, hi`.
    pub fn uniform(lo_db: f64, hi_db: f64, step_db: f64) -> Result<Self> {
        if !(step_db > 0.0 && hi_db > lo_db) {
            return Err(Error::Parameter("uniform K bins need lo < hi and a positive step".into()));
        }
        let n = ((hi_db - lo_db) / step_db).round() as usize;
        Self::new((0..=n).map(|i| lo_db + i as f64 * step_db).collect())
    }

    /// One-dB bins centered on the integers `-5..=25` dB, plus the Rayleigh bin.
    pub fn centered_default() -> Self {
        Self::uniform(-5.5, 25.5, 1.0).expect("static bins")
    }

    pub fn edges_db(&self) -> &[f64] {
        &self.edges_db
    }

    /// `|𝒦|`: the Rayleigh bin plus one per edge interval.
    pub fn len(&self) -> usize {
        self.edges_db.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bin_db(&self, k_db: f64) -> usize {
        if k_db.is_nan() {
            return 0;
        }
        self.edges_db.partition_point(|&e| e <= k_db).min(self.len() - 1)
    }

    /// Bin of a linear K; zero maps to the Rayleigh bin.
    pub fn bin_linear(&self, k: f64) -> usize {
        self.bin_db(linear_to_db(k))
    }

    /// Linear K standing for a bin: 0 for the Rayleigh bin, the interval
    /// midpoint otherwise.
    pub fn representative_k(&self, bin: usize) -> f64 {
        if bin == 0 {
            0.0
        } else {
            let mid = 0.5 * (self.edges_db[bin - 1] + self.edges_db[bin]);
            10f64.powf(mid / 10.0)
        }
    }
}

impl TryFrom<Vec<f64>> for KBins {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KBins> for Vec<f64> {
    fn from(b: KBins) -> Self {
        b.edges_db
    }
}

pub fn bin_k(bins: &KBins, k_hat: &KEstimate<f64>) -> usize {
    bins.bin_linear(k_hat.k_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Action {
    Down,
    Stay,
    Up,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Down, Action::Stay, Action::Up];

    pub fn delta(self) -> i64 {
        match self {
            Action::Down => -1,
            Action::Stay => 0,
            Action::Up => 1,
        }
    }

    fn column(self) -> usize {
        (self.delta() + 1) as usize
    }
}

impl From<Action> for i8 {
    fn from(a: Action) -> i8 {
        a.delta() as i8
    }
}

impl TryFrom<i8> for Action {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Action::Down),
            0 => Ok(Action::Stay),
            1 => Ok(Action::Up),
            _ => Err(format!("action must be -1, 0 or 1, got {v}")),
        }
    }
}

/// Agent positions and schedule state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlState {
    /// Grid indices of `λ_1..λ_{Λ-1}`, strictly increasing.
    pub indices: Vec<usize>,
    pub k_bin: usize,
    /// Iterations completed.
    pub t: u64,
    pub epsilon: f64,
}

impl RlState {
    /// Actions that keep the agent on the grid and strictly between its
    /// neighbours.
    pub fn valid_actions(&self, agent: usize, grid_len: usize) -> Vec<Action> {
        Action::ALL.into_iter().filter(|&a| self.is_valid(agent, a, grid_len)).collect()
    }

    pub fn is_valid(&self, agent: usize, action: Action, grid_len: usize) -> bool {
        let j = self.indices[agent] as i64 + action.delta();
        if j < 0 || j >= grid_len as i64 {
            return false;
        }
        let lower_ok = agent == 0 || j > self.indices[agent - 1] as i64;
        let upper_ok = agent + 1 == self.indices.len() || j < self.indices[agent + 1] as i64;
        lower_ok && upper_ok
    }

    pub fn apply(&mut self, agent: usize, action: Action) {
        self.indices[agent] = (self.indices[agent] as i64 + action.delta()) as usize;
    }
}

/// Per-agent Q-values indexed by (K bin, own grid index, action).
#[derive(Debug, Clone, PartialEq)]
pub struct QTables {
    agents: usize,
    bins: usize,
    grid: usize,
    pub alpha: f64,
    pub eta: f64,
    q: Vec<f64>,
}

impl QTables {
    pub fn new(num_regions: usize, bins: usize, grid: usize, alpha: f64, eta: f64) -> Result<Self> {
        if num_regions < 2 || bins == 0 || grid < num_regions - 1 {
            return Err(Error::Parameter("Q tables need Λ >= 2, >= 1 bin and a grid with room for every agent".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) || !(0.0..=1.0).contains(&eta) {
            return Err(Error::Parameter(format!("need 0 < alpha <= 1 and 0 <= eta <= 1, got {alpha}, {eta}")));
        }
        let agents = num_regions - 1;
        Ok(Self { agents, bins, grid, alpha, eta, q: vec![0.0; agents * bins * grid * 3] })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn grid_len(&self) -> usize {
        self.grid
    }

    /// Number of (K bin, grid index) states over all agents.
    pub fn state_count(&self) -> usize {
        self.agents * self.bins * self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    fn offset(&self, agent: usize, bin: usize, index: usize) -> usize {
        debug_assert!(agent < self.agents && bin < self.bins && index < self.grid);
        ((agent * self.bins + bin) * self.grid + index) * 3
    }

    pub fn row(&self, agent: usize, bin: usize, index: usize) -> [f64; 3] {
        let o = self.offset(agent, bin, index);
        [self.q[o], self.q[o + 1], self.q[o + 2]]
    }

    pub fn get(&self, agent: usize, bin: usize, index: usize, action: Action) -> f64 {
        self.q[self.offset(agent, bin, index) + action.column()]
    }

    pub fn set(&mut self, agent: usize, bin: usize, index: usize, action: Action, value: f64) {
        let o = self.offset(agent, bin, index) + action.column();
        self.q[o] = value;
    }

    /// Greedy action among `valid`; ties go to the smallest action.
    pub fn greedy(&self, agent: usize, bin: usize, index: usize, valid: &[Action]) -> Action {
        let row = self.row(agent, bin, index);
        let mut best = valid[0];
        for &a in &valid[1..] {
            if row[a.column()] > row[best.column()] {
                best = a;
            }
        }
        best
    }
}

/// ε-greedy over the valid actions of `agent`.
pub fn select_action<R: Rng + ?Sized>(q: &QTables, state: &RlState, agent: usize, rng: &mut R) -> Action {
    let valid = state.valid_actions(agent, q.grid_len());
    let explore: f64 = rng.random();
    if explore < state.epsilon {
        valid[rng.random_range(0..valid.len())]
    } else {
        q.greedy(agent, state.k_bin, state.indices[agent], &valid)
    }
}

/// `ε_{t+1} = ε_t / sqrt(t)`, never below `floor`.
pub fn epsilon_schedule(eps_t: f64, t: u64, floor: f64) -> f64 {
    (eps_t / (t.max(1) as f64).sqrt()).max(floor)
}

/// `Q(s,a) ← (1-α)·Q(s,a) + α·(ω + η·max_{a'} Q(s',a'))`, the max running
/// over actions valid in `after`.
pub fn q_update(q: &mut QTables, agent: usize, before: &RlState, action: Action, reward: f64, after: &RlState) -> Result<()> {
    if !reward.is_finite() {
        return Err(Error::NonFiniteReward(reward));
    }
    let idx = before.indices[agent];
    let bootstrap = if q.eta == 0.0 {
        0.0
    } else {
        after
            .valid_actions(agent, q.grid_len())
            .into_iter()
            .map(|a| q.get(agent, after.k_bin, after.indices[agent], a))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let cell = q.offset(agent, before.k_bin, idx) + action.column();
    let old = q.q[cell];
    let target = reward + q.eta * bootstrap;
    if !target.is_finite() {
        return Err(Error::NonFiniteReward(reward));
    }
    q.q[cell] = (1.0 - q.alpha) * old + q.alpha * target;
    Ok(())
}

pub const CHECKPOINT_FORMAT: &str = "qfb-qtables-v1";

/// Q tables with enough context to resume: grid, bins and learning constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCheckpoint {
    pub format: String,
    pub num_regions: usize,
    pub n_bins: usize,
    pub n_grid: usize,
    pub alpha: f64,
    pub eta: f64,
    pub grid: ThresholdGrid,
    pub bins: KBins,
    pub q: Vec<f64>,
}

impl QCheckpoint {
    pub fn new(q: &QTables, grid: &ThresholdGrid, bins: &KBins) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            num_regions: q.agents + 1,
            n_bins: q.bins,
            n_grid: q.grid,
            alpha: q.alpha,
            eta: q.eta,
            grid: grid.clone(),
            bins: bins.clone(),
            q: q.q.clone(),
        }
    }

    pub fn into_tables(self) -> Result<(QTables, ThresholdGrid, KBins)> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format {:?}", self.format)));
        }
        let mut t = QTables::new(self.num_regions, self.n_bins, self.n_grid, self.alpha, self.eta)?;
        if self.q.len() != t.q.len() || self.grid.len() != self.n_grid || self.bins.len() != self.n_bins {
            return Err(Error::Format("checkpoint dimensions disagree".into()));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("checkpoint holds non-finite values".into()));
        }
        t.q = self.q;
        Ok((t, self.grid, self.bins))
    }
}
