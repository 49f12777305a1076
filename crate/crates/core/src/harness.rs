//! Experiment runner: scenario files, Monte Carlo repetitions over a drift
//! schedule, reference lines and figure data on disk.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::RicianSpec;
use crate::error::{Error, Result};
use crate::kest::{evaluate_estimators, generate_dataset, train_estimator, EstimatorModel, EvaluationTable, GbdtParams};
use crate::oracle::{brute_force, threshold_recursion_with, Method, RecursionVariant, MAX_BRUTE_FORCE_REGIONS};
use crate::rl::{IterationRecord, KSource, RlConfig, RlEnvironment, Segment};
use crate::rng::derive_seed;
use crate::scalar::db_to_linear;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Grid used for the brute-force reference lines.
pub const REFERENCE_GRID: usize = 256;
/// Moving-average width used when timing convergence.
pub const SMOOTHING_WINDOW: usize = 50;

const TAG_DATASET: u64 = 0xD5;
const TAG_TRAINING: u64 = 0x7A;
const TAG_EVALUATION: u64 = 0xE7;
const TAG_REPETITION: u64 = 0x100;

/// How long K stays put. RL schedules count iterations; estimation-style
/// schedules count channel realizations and are converted with `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dwell {
    Iterations(usize),
    Realizations(usize),
}

impl Dwell {
    pub fn iterations(self, samples_per_iteration: usize) -> usize {
        match self {
            Dwell::Iterations(n) => n,
            Dwell::Realizations(n) => n.div_ceil(samples_per_iteration.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    /// K in dB; `-inf` (TOML) selects Rayleigh.
    pub k_db: f64,
    pub dwell: Dwell,
}

/// Which K estimate steers the learner's bin choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorChoice {
    /// Boosted-tree model, trained on `training_rows` records unless one is supplied.
    Learned { training_rows: usize },
    #[serde(rename = "moment-1")]
    MomentOne,
    Known,
}

impl Default for EstimatorChoice {
    fn default() -> Self {
        EstimatorChoice::Learned { training_rows: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub schedule: Vec<Stage>,
    pub repetitions: usize,
    pub seed: u64,
    pub estimator: EstimatorChoice,
    pub rl: RlConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            schedule: vec![Stage { k_db: 10.0, dwell: Dwell::Iterations(2000) }],
            repetitions: 50,
            seed: 0,
            estimator: EstimatorChoice::default(),
            rl: RlConfig::default(),
        }
    }
}

impl Scenario {
    /// One curve of the convergence figure: K = 10 dB held for 2000 iterations.
    pub fn fig3(samples_per_iteration: usize, seed: u64) -> Self {
        Self {
            name: format!("fig3-m{samples_per_iteration}"),
            seed,
            rl: RlConfig { samples_per_iteration, ..RlConfig::default() },
            ..Self::default()
        }
    }

    /// The drift figure: K steps 0 → 10 → 20 dB, 1500 iterations each.
    pub fn fig4(seed: u64) -> Self {
        let stage = |k_db| Stage { k_db, dwell: Dwell::Iterations(1500) };
        Self {
            name: "fig4".into(),
            schedule: vec![stage(0.0), stage(10.0), stage(20.0)],
            seed,
            ..Self::default()
        }
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let s: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if self.schedule.is_empty() {
            return bad("scenario schedule is empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        for (i, st) in self.schedule.iter().enumerate() {
            if st.k_db.is_nan() || st.k_db == f64::INFINITY {
                return bad(format!("stage {i}: K must be finite dB or -inf"));
            }
            let n = match st.dwell {
                Dwell::Iterations(n) | Dwell::Realizations(n) => n,
            };
            if n == 0 {
                return bad(format!("stage {i}: dwell must be >= 1"));
            }
        }
        if let EstimatorChoice::Learned { training_rows } = self.estimator {
            if training_rows == 0 {
                return bad("estimator training_rows must be >= 1".into());
            }
        }
        self.rl.validate()
    }

    pub fn segments(&self) -> Vec<Segment> {
        let m = self.rl.samples_per_iteration;
        self.schedule.iter().map(|s| Segment { k_db: s.k_db, iterations: s.dwell.iterations(m) }).collect()
    }

    /// Builds the K source, training a model when the scenario asks for one
    /// and none is given.
    pub fn k_source(&self, model: Option<Arc<EstimatorModel>>) -> Result<KSource> {
        Ok(match self.estimator {
            EstimatorChoice::Known => KSource::Known,
            EstimatorChoice::MomentOne => KSource::MomentOne,
            EstimatorChoice::Learned { training_rows } => match model {
                Some(m) => KSource::Learned(m),
                None => KSource::Learned(Arc::new(train_model(training_rows, self.rl.estimator_window, self.seed)?)),
            },
        })
    }
}

/// Trains the K regressor on `rows` records of `samples` draws each, K uniform on [0, 100].
pub fn train_model(rows: usize, samples: usize, seed: u64) -> Result<EstimatorModel> {
    let table = generate_dataset([0.0, 100.0], rows, samples, derive_seed(seed, TAG_DATASET))?;
    train_estimator(&table, &GbdtParams::default(), derive_seed(seed, TAG_TRAINING))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub k_db: f64,
    /// Offset of the segment's first iteration in the trace.
    pub start: usize,
    pub iterations: usize,
    /// Optimal goodput for this K.
    pub reference: f64,
    pub reference_method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub config_hash: String,
    pub version: String,
    pub segments: Vec<SegmentSummary>,
    /// Per-iteration mean of `ω_t` across repetitions.
    pub mean: Vec<f64>,
    /// Per-iteration sample variance across repetitions (0 for one repetition).
    pub variance: Vec<f64>,
    /// Iterations per repetition whose reward lies above the segment reference.
    pub exceedances: Vec<usize>,
    pub runtime_secs: f64,
}

impl RunSummary {
    pub fn iterations(&self) -> usize {
        self.mean.len()
    }

    pub fn reference_at(&self, i: usize) -> f64 {
        self.segments.iter().rev().find(|s| s.start <= i).map_or(f64::NAN, |s| s.reference)
    }

    /// Mean reward over the last `fraction` of a segment, divided by its reference.
    pub fn final_ratio(&self, segment: usize, fraction: f64) -> f64 {
        let s = &self.segments[segment];
        let tail = ((s.iterations as f64 * fraction).round() as usize).clamp(1, s.iterations);
        let end = s.start + s.iterations;
        let mean = self.mean[end - tail..end].iter().sum::<f64>() / tail as f64;
        mean / s.reference
    }

    /// Iterations into a segment before the first stretch of
    /// `SMOOTHING_WINDOW` iterations whose mean reward reaches
    /// `level · reference`. `None` if no stretch does.
    pub fn reach_time(&self, segment: usize, level: f64) -> Option<usize> {
        let s = &self.segments[segment];
        let seg = &self.mean[s.start..s.start + s.iterations];
        let w = SMOOTHING_WINDOW.min(seg.len());
        let target = level * s.reference;
        seg.windows(w).position(|x| x.iter().sum::<f64>() / w as f64 >= target)
    }

    pub fn mean_exceedances(&self) -> f64 {
        self.exceedances.iter().sum::<usize>() as f64 / self.exceedances.len().max(1) as f64
    }
}

pub struct ScenarioOutput {
    pub summary: RunSummary,
    /// Per-repetition record streams, empty unless requested.
    pub traces: Vec<Vec<IterationRecord>>,
}

/// Reference goodput for one K: brute force on the reference grid where the
/// region count allows, the power-domain recursion beyond that.
pub fn reference_goodput(k_db: f64, snr_db: f64, num_regions: usize) -> Result<(f64, Method)> {
    let k = if k_db == f64::NEG_INFINITY { 0.0 } else { db_to_linear(k_db) };
    let spec = RicianSpec::new(k, 1.0, db_to_linear(snr_db))?;
    let sol = if num_regions <= MAX_BRUTE_FORCE_REGIONS {
        brute_force(&spec, num_regions, REFERENCE_GRID)?
    } else {
        threshold_recursion_with(&spec, num_regions, RecursionVariant::PowerDomain)?
    };
    Ok((sol.goodput, sol.method))
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(scenario: &Scenario, k_source: &KSource) -> Result<String> {
    let s = serde_json::to_string(scenario)?;
    let model = match k_source {
        KSource::Learned(m) => m.to_json()?,
        KSource::MomentOne => "moment-1".into(),
        KSource::Known => "known".into(),
    };
    Ok(sha256_hex(&[s.as_bytes(), b"\n", model.as_bytes()]))
}

/// Runs every repetition of the scenario. Repetition `r` uses the seed
/// `derive_seed(seed, r)`, so results do not depend on thread count.
pub fn run_scenario(scenario: &Scenario, k_source: KSource, keep_traces: bool) -> Result<ScenarioOutput> {
    scenario.validate()?;
    let clock = Instant::now();
    let config_hash = config_hash(scenario, &k_source)?;
    let env = RlEnvironment::new(scenario.rl.clone(), k_source)?;
    let segments = scenario.segments();

    let mut summaries = Vec::with_capacity(segments.len());
    let mut start = 0;
    for seg in &segments {
        let (reference, reference_method) = reference_goodput(seg.k_db, scenario.rl.snr_db, scenario.rl.num_regions)?;
        summaries.push(SegmentSummary { k_db: seg.k_db, start, iterations: seg.iterations, reference, reference_method });
        start += seg.iterations;
    }
    let total = start;
    let reference: Vec<f64> = summaries.iter().flat_map(|s| std::iter::repeat_n(s.reference, s.iterations)).collect();

    let runs: Vec<Vec<IterationRecord>> = (0..scenario.repetitions as u64)
        .into_par_iter()
        .map(|r| env.run_schedule(&segments, derive_seed(scenario.seed, TAG_REPETITION + r)))
        .collect::<Result<_>>()?;

    let reps = runs.len() as f64;
    let mut mean = vec![0.0; total];
    for run in &runs {
        for (m, rec) in mean.iter_mut().zip(run) {
            *m += rec.reward;
        }
    }
    mean.iter_mut().for_each(|m| *m /= reps);
    let mut variance = vec![0.0; total];
    if runs.len() > 1 {
        for run in &runs {
            for ((v, m), rec) in variance.iter_mut().zip(&mean).zip(run) {
                *v += (rec.reward - m).powi(2);
            }
        }
        variance.iter_mut().for_each(|v| *v /= reps - 1.0);
    }
    let exceedances = runs.iter().map(|run| run.iter().zip(&reference).filter(|(rec, &r)| rec.reward > r).count()).collect();

    let summary = RunSummary {
        scenario: scenario.clone(),
        config_hash,
        version: VERSION.into(),
        segments: summaries,
        mean,
        variance,
        exceedances,
        runtime_secs: clock.elapsed().as_secs_f64(),
    };
    Ok(ScenarioOutput { summary, traces: if keep_traces { runs } else { Vec::new() } })
}

/// One JSON object per line.
pub fn write_ndjson<W: Write>(records: &[IterationRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Settings for the estimator-comparison figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorStudy {
    pub training_rows: usize,
    pub samples_per_record: usize,
    pub k_grid: Vec<f64>,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for EstimatorStudy {
    fn default() -> Self {
        Self {
            training_rows: 100_000,
            samples_per_record: 100,
            k_grid: (0..=20).map(f64::from).collect(),
            n_values: vec![25, 50, 100, 1000],
            trials: 500,
            seed: 0,
        }
    }
}

impl EstimatorStudy {
    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(&[serde_json::to_string(self)?.as_bytes()]))
    }

    /// Evaluates `model`, or a freshly trained one.
    pub fn run(&self, model: Option<&EstimatorModel>) -> Result<EvaluationTable> {
        let trained;
        let model = match model {
            Some(m) => m,
            None => {
                trained = train_model(self.training_rows, self.samples_per_record, self.seed)?;
                &trained
            }
        };
        evaluate_estimators(model, &self.k_grid, &self.n_values, self.trials, derive_seed(self.seed, TAG_EVALUATION))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        })
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            _ => Err(Error::Usage(format!("unknown figure {s:?}"))),
        }
    }
}

pub enum FigureInput<'a> {
    Estimators { table: &'a EvaluationTable, study: &'a EstimatorStudy },
    Runs(&'a [RunSummary]),
}

/// Comment lines opening every CSV. The `generated` line is the only one
/// that changes between identical runs.
fn csv_preamble(figure: Figure, curve: &str, seed: u64, hash: &str) -> String {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("# qfb {VERSION} {figure} {curve}\n# seed {seed} config-sha256 {hash}\n# generated unix {now}\n")
}

fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn band(mean: f64, variance: f64) -> (f64, f64) {
    let s = variance.max(0.0).sqrt();
    (mean - 2.0 * s, mean + 2.0 * s)
}

/// Writes the CSVs, a column schema and a plotting script for one figure.
/// Everything is checked and rendered before the first file is touched.
pub fn emit_figure_data(which: Figure, input: FigureInput<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, String)> = Vec::new();
    match (which, input) {
        (Figure::Fig2, FigureInput::Estimators { table, study }) => {
            if table.rows.is_empty() {
                return Err(Error::Usage("empty evaluation table".into()));
            }
            let hash = study.config_hash()?;
            for &n in &study.n_values {
                let rows: Vec<_> = table.rows.iter().filter(|r| r.n == n).collect();
                if rows.is_empty() {
                    return Err(Error::Usage(format!("evaluation table has no rows for N = {n}")));
                }
                let body = csv_body(
                    &["k_true", "method", "mean_khat", "std_khat", "lo", "hi", "reference"],
                    rows.iter().map(|r| {
                        vec![
                            r.k_true.to_string(),
                            r.method.tag().to_string(),
                            r.mean_khat.to_string(),
                            r.std_khat.to_string(),
                            r.lo.to_string(),
                            r.hi.to_string(),
                            r.k_true.to_string(),
                        ]
                    }),
                )?;
                let curve = format!("n{n}");
                files.push((format!("fig2_{curve}.csv"), csv_preamble(which, &curve, study.seed, &hash) + &body));
            }
            files.push(("fig2.schema.json".into(), schema(which)));
            files.push(("plot_fig2.py".into(), plot_script(which)));
        }
        (Figure::Fig3, FigureInput::Runs(runs)) => {
            if runs.is_empty() || runs.iter().any(|r| r.mean.is_empty()) {
                return Err(Error::Usage("empty run summary".into()));
            }
            let mut seen = Vec::new();
            for r in runs {
                if r.segments.len() != 1 {
                    return Err(Error::Usage("fig3 expects single-K scenarios".into()));
                }
                let m = r.scenario.rl.samples_per_iteration;
                if seen.contains(&m) {
                    return Err(Error::Usage(format!("two fig3 curves share M = {m}")));
                }
                seen.push(m);
                let reference = r.segments[0].reference;
                let body = csv_body(
                    &["t", "mean", "lo", "hi", "reference"],
                    r.mean.iter().zip(&r.variance).enumerate().map(|(i, (&mu, &var))| {
                        let (lo, hi) = band(mu, var);
                        vec![(i + 1).to_string(), mu.to_string(), lo.to_string(), hi.to_string(), reference.to_string()]
                    }),
                )?;
                let curve = format!("m{m}");
                files.push((format!("fig3_{curve}.csv"), csv_preamble(which, &curve, r.scenario.seed, &r.config_hash) + &body));
            }
            files.push(("fig3.schema.json".into(), schema(which)));
            files.push(("plot_fig3.py".into(), plot_script(which)));
            files.push(("fig3.run.json".into(), run_metadata(runs)?));
        }
        (Figure::Fig4, FigureInput::Runs(runs)) => {
            let [r] = runs else {
                return Err(Error::Usage(format!("fig4 takes one run summary, got {}", runs.len())));
            };
            if r.mean.is_empty() {
                return Err(Error::Usage("empty run summary".into()));
            }
            let k_at = |i: usize| r.segments.iter().rev().find(|s| s.start <= i).map_or(f64::NAN, |s| s.k_db);
            let body = csv_body(
                &["t", "k_db", "mean", "lo", "hi", "reference"],
                r.mean.iter().zip(&r.variance).enumerate().map(|(i, (&mu, &var))| {
                    let (lo, hi) = band(mu, var);
                    vec![
                        (i + 1).to_string(),
                        k_at(i).to_string(),
                        mu.to_string(),
                        lo.to_string(),
                        hi.to_string(),
                        r.reference_at(i).to_string(),
                    ]
                }),
            )?;
            files.push(("fig4.csv".into(), csv_preamble(which, "drift", r.scenario.seed, &r.config_hash) + &body));
            files.push(("fig4.schema.json".into(), schema(which)));
            files.push(("plot_fig4.py".into(), plot_script(which)));
            files.push(("fig4.run.json".into(), run_metadata(runs)?));
        }
        (w, _) => return Err(Error::Usage(format!("input does not match figure {w}"))),
    }

    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = out_dir.join(&name);
        let tmp = out_dir.join(format!(".{name}.partial"));
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    name: &'a str,
    version: &'a str,
    seed: u64,
    config_hash: &'a str,
    repetitions: usize,
    segments: &'a [SegmentSummary],
    mean_exceedances: f64,
    runtime_secs: f64,
    scenario: &'a Scenario,
}

fn run_metadata(runs: &[RunSummary]) -> Result<String> {
    let meta: Vec<RunMeta<'_>> = runs
        .iter()
        .map(|r| RunMeta {
            name: &r.scenario.name,
            version: &r.version,
            seed: r.scenario.seed,
            config_hash: &r.config_hash,
            repetitions: r.scenario.repetitions,
            segments: &r.segments,
            mean_exceedances: r.mean_exceedances(),
            runtime_secs: r.runtime_secs,
            scenario: &r.scenario,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&meta)? + "\n")
}

fn schema(which: Figure) -> String {
    let columns: &[(&str, &str)] = match which {
        Figure::Fig2 => &[
            ("k_true", "true Rician K (linear)"),
            ("method", "estimator tag: moment-1 or learned"),
            ("mean_khat", "mean estimate over the trials"),
            ("std_khat", "sample standard deviation of the estimates"),
            ("lo", "mean_khat - 2 std_khat"),
            ("hi", "mean_khat + 2 std_khat"),
            ("reference", "ideal estimate, equal to k_true"),
        ],
        Figure::Fig3 => &[
            ("t", "iteration, from 1"),
            ("mean", "mean reward (bits/s/Hz) across repetitions"),
            ("lo", "mean - 2 std across repetitions"),
            ("hi", "mean + 2 std across repetitions"),
            ("reference", "optimal goodput at this K"),
        ],
        Figure::Fig4 => &[
            ("t", "iteration, from 1"),
            ("k_db", "true K in dB during this iteration"),
            ("mean", "mean reward (bits/s/Hz) across repetitions"),
            ("lo", "mean - 2 std across repetitions"),
            ("hi", "mean + 2 std across repetitions"),
            ("reference", "optimal goodput at the current K"),
        ],
    };
    let cols: Vec<serde_json::Value> =
        columns.iter().map(|(n, d)| serde_json::json!({ "name": n, "description": d })).collect();
    let doc = serde_json::json!({
        "figure": which.to_string(),
        "version": VERSION,
        "comment_prefix": "#",
        "columns": cols,
    });
    serde_json::to_string_pretty(&doc).expect("static schema") + "\n"
}

fn plot_script(which: Figure) -> String {
    let body = match which {
        Figure::Fig2 => {
            r##"files = sorted(glob.glob(os.path.join(here, "fig2_n*.csv")), key=lambda f: int(f.rsplit("_n", 1)[1][:-4]))
fig, axes = plt.subplots(1, len(files), figsize=(4 * len(files), 4), sharey=True)
for ax, f in zip(np.atleast_1d(axes), files):
    d = pd.read_csv(f, comment="#")
    for method, g in d.groupby("method"):
        ax.plot(g.k_true, g.mean_khat, marker="o", ms=3, label=method)
        ax.fill_between(g.k_true, g.lo, g.hi, alpha=0.2)
    ax.plot(d.k_true, d.reference, "k-.", lw=1, label="true K")
    ax.set_title("N = " + f.rsplit("_n", 1)[1][:-4])
    ax.set_xlabel("K")
np.atleast_1d(axes)[0].set_ylabel("estimated K")
np.atleast_1d(axes)[0].legend()
"##
        }
        Figure::Fig3 => {
            r##"fig, ax = plt.subplots(figsize=(7, 4))
for f in sorted(glob.glob(os.path.join(here, "fig3_m*.csv"))):
    d = pd.read_csv(f, comment="#")
    label = "M = " + f.rsplit("_m", 1)[1][:-4]
    ax.plot(d.t, d["mean"], label=label)
    ax.fill_between(d.t, d.lo, d.hi, alpha=0.2)
ax.plot(d.t, d.reference, "k-.", lw=1, label="optimum")
ax.set_xlabel("iteration t")
ax.set_ylabel("reward (bits/s/Hz)")
ax.legend()
"##
        }
        Figure::Fig4 => {
            r##"d = pd.read_csv(os.path.join(here, "fig4.csv"), comment="#")
fig, ax = plt.subplots(figsize=(8, 4))
ax.plot(d.t, d["mean"], label="mean reward")
ax.fill_between(d.t, d.lo, d.hi, alpha=0.2)
ax.plot(d.t, d.reference, "k-.", lw=1, label="optimum")
ax.set_xlabel("iteration t")
ax.set_ylabel("reward (bits/s/Hz)")
ax.legend()
"##
        }
    };
    format!(
        "# Generated by qfb {VERSION}. Usage: python {name}\nimport glob\nimport os\n\nimport matplotlib.pyplot as plt\nimport numpy as np\nimport pandas as pd\n\nhere = os.path.dirname(os.path.abspath(__file__))\n{body}fig.tight_layout()\nfig.savefig(os.path.join(here, \"{which}.png\"), dpi=150)\n",
        name = format_args!("plot_{which}.py"),
    )
}
