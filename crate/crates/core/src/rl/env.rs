//! The learning loop: channel draws, K estimation, rewards and updates.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{epsilon_schedule, q_update, select_action, Action, KBins, QCheckpoint, QTables, RlState, ThresholdGrid};
use crate::channel::{RicianSampler, RicianSpec};
use crate::error::{Error, Result};
use crate::feedback::{analytic_goodput, empirical_goodput, FeedbackScheme};
use crate::kest::{compute_features, moment_estimator_1, predict_k, EstimatorModel};
use crate::oracle::ergodic_capacity;
use crate::rng::{self, SimRng};
use crate::scalar::db_to_linear;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Where the per-iteration reward comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardSource {
    /// Sample-mean goodput of the iteration's `M` transmissions.
    #[default]
    Empirical,
    /// Expected goodput of the scheme under the true channel.
    Analytic,
}

/// How K is estimated each iteration.
#[derive(Debug, Clone)]
pub enum KSource {
    Learned(Arc<EstimatorModel>),
    MomentOne,
    /// The true K, bypassing estimation.
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    /// Λ.
    pub num_regions: usize,
    pub snr_db: f64,
    /// M, transmissions observed per iteration.
    pub samples_per_iteration: usize,
    /// N, most recent samples fed to the K estimator.
    pub estimator_window: usize,
    /// Number of recent per-iteration K estimates averaged before binning.
    pub khat_smoothing: usize,
    pub alpha: f64,
    pub eta: f64,
    pub epsilon_initial: f64,
    pub epsilon_floor: f64,
    pub grid_points: usize,
    /// K (dB) of the distribution whose quantiles define the grid.
    pub grid_k_db: f64,
    pub bin_edges_db: Vec<f64>,
    /// Learn from `ω_t` minus the ergodic capacity of the current K bin.
    /// The offset is constant within a bin, so greedy choices are unchanged,
    /// but zero-initialized values become optimistic and drive exploration.
    pub reward_baseline: bool,
    pub reward: RewardSource,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            num_regions: 4,
            snr_db: 20.0,
            samples_per_iteration: 100,
            estimator_window: 100,
            khat_smoothing: 20,
            alpha: 0.5,
            eta: 0.0,
            epsilon_initial: 0.5,
            epsilon_floor: 0.01,
            grid_points: 32,
            grid_k_db: 5.0,
            bin_edges_db: KBins::centered_default().edges_db().to_vec(),
            reward_baseline: true,
            reward: RewardSource::Empirical,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.num_regions < 2 {
            return bad("Λ must be >= 2");
        }
        if self.samples_per_iteration == 0 {
            return bad("M must be >= 1");
        }
        if self.estimator_window < 2 {
            return bad("estimator window must be >= 2");
        }
        if self.khat_smoothing == 0 {
            return bad("K estimate smoothing must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_initial) || !(0.0..=self.epsilon_initial).contains(&self.epsilon_floor) {
            return bad("need 0 <= epsilon floor <= initial epsilon <= 1");
        }
        if self.grid_points < self.num_regions - 1 || self.grid_points < 2 {
            return bad("grid must hold every agent");
        }
        if !self.snr_db.is_finite() || !self.grid_k_db.is_finite() {
            return bad("SNR and grid K must be finite");
        }
        KBins::new(self.bin_edges_db.clone())?;
        QTables::new(self.num_regions, 1, self.grid_points, self.alpha, self.eta)?;
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        db_to_linear(self.snr_db)
    }
}

/// A run holding K fixed at `k_db` for `iterations` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub k_db: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub v: u32,
    pub t: u64,
    pub agent: usize,
    pub action: Action,
    /// ε used for this step's choice.
    pub epsilon: f64,
    /// Raw reward `ω_t`.
    pub reward: f64,
    /// Interior boundaries `λ_1..λ_{Λ-1}` after the move.
    pub lambdas: Vec<f64>,
    pub indices: Vec<usize>,
    pub k_true_db: f64,
    /// Smoothed estimate that selected the K bin of this step.
    pub k_hat: f64,
    pub k_bin: usize,
    pub m: usize,
}

/// Grid, bins, baselines and estimator shared by independent runs.
#[derive(Debug, Clone)]
pub struct RlEnvironment {
    pub config: RlConfig,
    pub grid: ThresholdGrid,
    pub bins: KBins,
    k_source: KSource,
    baselines: Vec<f64>,
}

impl RlEnvironment {
    pub fn new(config: RlConfig, k_source: KSource) -> Result<Self> {
        config.validate()?;
        let snr = config.snr();
        let grid_spec = RicianSpec::new(db_to_linear(config.grid_k_db), 1.0, snr)?;
        let grid = ThresholdGrid::quantile_spaced(&grid_spec, config.grid_points)?;
        let bins = KBins::new(config.bin_edges_db.clone())?;
        let baselines = if config.reward_baseline {
            (0..bins.len())
                .map(|b| ergodic_capacity(&RicianSpec::new(bins.representative_k(b), 1.0, snr)?))
                .collect::<Result<_>>()?
        } else {
            vec![0.0; bins.len()]
        };
        Ok(Self { config, grid, bins, k_source, baselines })
    }

    /// Fresh tables and agent positions, K held at `k_db` until changed.
    pub fn start(&self, k_db: f64, seed: u64) -> Result<RlRun<'_>> {
        let c = &self.config;
        let q = QTables::new(c.num_regions, self.bins.len(), self.grid.len(), c.alpha, c.eta)?;
        let mut run = RlRun {
            env: self,
            q,
            state: RlState { indices: vec![], k_bin: 0, t: 0, epsilon: c.epsilon_initial },
            spec: RicianSpec::new(1.0, 1.0, c.snr())?,
            k_db,
            sampler: RicianSpec::new(1.0, 1.0, 1.0)?.sampler(),
            actions: rng::stream(seed, 1),
            channel: rng::stream(seed, 2),
            draws: Vec::with_capacity(c.samples_per_iteration),
            k_window: VecDeque::with_capacity(c.khat_smoothing),
            k_hat: 0.0,
        };
        run.set_k_db(k_db)?;
        // pilot batch to place the agents
        run.draw();
        run.observe_k()?;
        run.state.k_bin = self.bins.bin_linear(run.k_hat);
        run.state.indices = self.initial_indices(run.state.k_bin)?;
        Ok(run)
    }

    /// Agents at the `l/Λ` quantiles of the bin's representative K, snapped to
    /// the grid and pushed apart where snapping collides.
    fn initial_indices(&self, bin: usize) -> Result<Vec<usize>> {
        let c = &self.config;
        let spec = RicianSpec::new(self.bins.representative_k(bin), 1.0, c.snr())?;
        let agents = c.num_regions - 1;
        let mut idx = Vec::with_capacity(agents);
        for l in 1..c.num_regions {
            let q = spec.quantile(l as f64 / c.num_regions as f64)?;
            idx.push(self.grid.nearest(q));
        }
        for a in 1..agents {
            if idx[a] <= idx[a - 1] {
                idx[a] = idx[a - 1] + 1;
            }
        }
        let g = self.grid.len();
        for a in (0..agents).rev() {
            let cap = g - (agents - a);
            if idx[a] > cap {
                idx[a] = cap;
            }
            if a + 1 < agents && idx[a] >= idx[a + 1] {
                idx[a] = idx[a + 1] - 1;
            }
        }
        Ok(idx)
    }

    /// One run over a drift schedule.
    pub fn run_schedule(&self, segments: &[Segment], seed: u64) -> Result<Vec<IterationRecord>> {
        let first = segments.first().ok_or_else(|| Error::Parameter("empty schedule".into()))?;
        let mut run = self.start(first.k_db, seed)?;
        let total = segments.iter().map(|s| s.iterations).sum();
        let mut out = Vec::with_capacity(total);
        for seg in segments {
            run.set_k_db(seg.k_db)?;
            for _ in 0..seg.iterations {
                out.push(run.step()?);
            }
        }
        Ok(out)
    }

    pub fn baseline(&self, bin: usize) -> f64 {
        self.baselines[bin]
    }
}

/// State of one learning run.
pub struct RlRun<'a> {
    env: &'a RlEnvironment,
    q: QTables,
    state: RlState,
    spec: RicianSpec<f64>,
    k_db: f64,
    sampler: RicianSampler<f64>,
    actions: SimRng,
    channel: SimRng,
    draws: Vec<f64>,
    k_window: VecDeque<f64>,
    k_hat: f64,
}

impl RlRun<'_> {
    pub fn set_k_db(&mut self, k_db: f64) -> Result<()> {
        let k = if k_db == f64::NEG_INFINITY { 0.0 } else { db_to_linear(k_db) };
        self.spec = RicianSpec::new(k, 1.0, self.env.config.snr())?;
        self.sampler = self.spec.sampler();
        self.k_db = k_db;
        Ok(())
    }

    pub fn state(&self) -> &RlState {
        &self.state
    }

    pub fn q_tables(&self) -> &QTables {
        &self.q
    }

    pub fn checkpoint(&self) -> QCheckpoint {
        QCheckpoint::new(&self.q, &self.env.grid, &self.env.bins)
    }

    pub fn scheme(&self) -> Result<FeedbackScheme<f64>> {
        let interior: Vec<f64> = self.state.indices.iter().map(|&i| self.env.grid.values()[i]).collect();
        FeedbackScheme::from_interior(&interior, self.env.config.snr())
    }

    fn draw(&mut self) {
        let m = self.env.config.samples_per_iteration;
        self.sampler.fill(&mut self.channel, m, &mut self.draws);
    }

    /// Estimate K from the newest draws and fold it into the smoothing window.
    fn observe_k(&mut self) -> Result<()> {
        let c = &self.env.config;
        let raw = match &self.env.k_source {
            KSource::Known => self.spec.k_factor,
            source => {
                let n = c.estimator_window.min(self.draws.len());
                let recent = &self.draws[self.draws.len() - n..];
                if n < 2 {
                    return Err(Error::Estimation("need at least 2 draws per iteration to estimate K".into()));
                }
                let f = compute_features(recent)?;
                match source {
                    KSource::Learned(model) => predict_k(model, &f).k_hat,
                    _ => moment_estimator_1(&f).k_hat,
                }
            }
        };
        if self.k_window.len() == c.khat_smoothing {
            self.k_window.pop_front();
        }
        self.k_window.push_back(raw);
        self.k_hat = self.k_window.iter().sum::<f64>() / self.k_window.len() as f64;
        Ok(())
    }

    /// Round-robin agent, ε-greedy move, `M` transmissions, Q update.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let env = self.env;
        let c = &env.config;
        let agents = c.num_regions - 1;
        let agent = (self.state.t % agents as u64) as usize;
        let before = self.state.clone();
        let action = select_action(&self.q, &before, agent, &mut self.actions);
        let epsilon = before.epsilon;

        self.state.apply(agent, action);
        self.state.t += 1;
        self.state.epsilon = epsilon_schedule(epsilon, self.state.t, c.epsilon_floor);

        let scheme = self.scheme()?;
        self.draw();
        let reward = match c.reward {
            RewardSource::Empirical => empirical_goodput(&scheme, &self.draws)?.goodput,
            RewardSource::Analytic => analytic_goodput(&scheme, &self.spec).goodput,
        };
        let k_hat_used = self.k_hat;
        self.observe_k()?;
        self.state.k_bin = env.bins.bin_linear(self.k_hat);

        let shaped = reward - env.baselines[before.k_bin];
        q_update(&mut self.q, agent, &before, action, shaped, &self.state)?;

        Ok(IterationRecord {
            v: TRACE_SCHEMA_VERSION,
            t: self.state.t,
            agent,
            action,
            epsilon,
            reward,
            lambdas: scheme.interior().to_vec(),
            indices: self.state.indices.clone(),
            k_true_db: self.k_db,
            k_hat: k_hat_used,
            k_bin: before.k_bin,
            m: c.samples_per_iteration,
        })
    }
}
