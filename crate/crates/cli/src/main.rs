//! `qfb`: oracles, K estimation, Q-learning runs and figure data.

mod selftest;

use std::fs;
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qfb_core::harness::{
    emit_figure_data, run_scenario, train_model, write_ndjson, EstimatorChoice, EstimatorStudy, Figure, FigureInput, Scenario,
};
use qfb_core::kest::{
    compute_features, evaluate_estimators, generate_dataset, moment_estimator_1, moment_estimator_2, moment_estimator_3,
    predict_k, train_estimator, EstimatorModel, GbdtParams, TrainingTable,
};
use qfb_core::oracle::{brute_force, ergodic_capacity, no_csi_optimum, threshold_recursion_with, RecursionVariant};
use qfb_core::{Error, RicianSpec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qfb", version, about = "Quantized feedback over Rician fading: oracles, K estimation and Q-learning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario (or study) file, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; QFB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal goodput for one channel: no CSI, recursion, brute force, perfect CSI.
    Oracle(OracleArgs),
    /// K-factor estimator tools.
    #[command(subcommand)]
    Kest(KestCommand),
    /// Q-learning runs.
    #[command(subcommand)]
    Rl(RlCommand),
    /// Regenerate the data behind a figure.
    Reproduce(ReproduceArgs),
    /// Quick invariant and oracle checks.
    Selftest,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    k_db: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    snr_db: f64,
    /// Λ.
    #[arg(long, default_value_t = 4)]
    regions: usize,
    /// Brute-force grid size.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = Variant::Printed)]
    variant: Variant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Printed,
    PowerDomain,
}

#[derive(Subcommand)]
enum KestCommand {
    /// Train the boosted-tree K regressor.
    Train(TrainArgs),
    /// Bias and spread of the learned and first moment estimators over a K grid.
    Eval(EvalArgs),
    /// Estimate K from magnitudes read from a file or stdin (whitespace separated).
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Use this training table (CSV) instead of simulating one.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    rows: usize,
    /// N, magnitudes per training record.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 100.0])]
    k_range: Vec<f64>,
    /// Also write the simulated table here.
    #[arg(long)]
    save_dataset: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = (0..=20).map(f64::from).collect::<Vec<_>>())]
    k_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 1000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Args)]
struct EstimateArgs {
    /// Model for the learned estimate; moment estimates are always printed.
    #[arg(long)]
    model: Option<PathBuf>,
    /// File of magnitudes; `-` or absent reads stdin.
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RlCommand {
    /// Run the scenario given by --config (or the drift preset).
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Trained K model; otherwise one is trained as the scenario specifies.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write each repetition's record stream as NDJSON.
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// M values for fig3, one curve each.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000])]
    m_values: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": "usage", "message": e.kind().to_string() }));
            return ExitCode::from(code.clamp(1, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<Error>().map_or("error", Error::kind);
            eprintln!("{}", json!({ "error": kind, "message": format!("{e:#}") }));
            ExitCode::from(if kind == "usage" { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = match std::env::var("QFB_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Error::Usage(format!("QFB_THREADS={v:?} is not a count")))?),
        Err(_) => cli.global.threads,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Oracle(a) => oracle(a),
        Command::Kest(KestCommand::Train(a)) => kest_train(g, a),
        Command::Kest(KestCommand::Eval(a)) => kest_eval(g, a),
        Command::Kest(KestCommand::Estimate(a)) => kest_estimate(a),
        Command::Rl(RlCommand::Run(a)) => rl_run(g, a),
        Command::Reproduce(a) => reproduce(g, a),
        Command::Selftest => selftest::run(),
    }
}

fn out_dir(g: &Global, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn load_model(path: &Path) -> Result<EstimatorModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(EstimatorModel::from_json(&text)?)
}

fn oracle(a: OracleArgs) -> Result<()> {
    let spec = RicianSpec::from_db(a.k_db, a.snr_db)?;
    let variant = match a.variant {
        Variant::Printed => RecursionVariant::Printed,
        Variant::PowerDomain => RecursionVariant::PowerDomain,
    };
    let g1 = no_csi_optimum(&spec)?;
    let bf = brute_force(&spec, a.regions, a.grid)?;
    let ginf = ergodic_capacity(&spec)?;
    println!("G_1            {:.9}", g1.goodput);
    match threshold_recursion_with(&spec, a.regions, variant) {
        Ok(r) => println!("G_recursion    {:.9}", r.goodput),
        Err(e) => println!("G_recursion    unavailable ({e})"),
    }
    println!("G_bruteforce   {:.9}", bf.goodput);
    println!("G_inf          {:.9}", ginf);
    println!("thresholds     {:?}", bf.scheme.lambdas());
    println!("rates          {:?}", bf.scheme.rates());
    Ok(())
}

fn kest_train(g: &Global, a: TrainArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let table = match &a.dataset {
        Some(p) => TrainingTable::read_csv(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => generate_dataset([a.k_range[0], a.k_range[1]], a.rows, a.samples, seed)?,
    };
    let dir = out_dir(g, ".");
    fs::create_dir_all(&dir)?;
    if let Some(p) = &a.save_dataset {
        table.write_csv(BufWriter::new(fs::File::create(p)?))?;
    }
    let model = train_estimator(&table, &GbdtParams::default(), seed)?;
    let path = dir.join("model.json");
    fs::write(&path, model.to_json()?)?;
    println!("trained {} trees on {} rows -> {}", model.n_trees(), table.len(), path.display());
    Ok(())
}

fn kest_eval(g: &Global, a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = evaluate_estimators(&model, &a.k_grid, &a.n, a.trials, g.seed.unwrap_or(0))?;
    let dir = out_dir(g, ".");
    fs::create_dir_all(&dir)?;
    let path = dir.join("eval.csv");
    table.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    println!("{} rows -> {}", table.rows.len(), path.display());
    Ok(())
}

fn kest_estimate(a: EstimateArgs) -> Result<()> {
    let mut text = String::new();
    match a.input.as_deref() {
        Some(p) if p != Path::new("-") => text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        _ => {
            io::stdin().read_to_string(&mut text)?;
        }
    }
    let gammas: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Usage(format!("not a number: {s:?}"))))
        .collect::<Result<_, _>>()?;
    let f = compute_features(&gammas)?;
    let mut out = vec![moment_estimator_1(&f), moment_estimator_2(&f), moment_estimator_3(&f)];
    if let Some(p) = &a.model {
        out.push(predict_k(&load_model(p)?, &f));
    }
    println!("{}", serde_json::to_string(&json!({ "samples": gammas.len(), "estimates": out }))?);
    Ok(())
}

fn scenario_from(g: &Global, preset: impl FnOnce(u64) -> Scenario) -> Result<Scenario> {
    let mut s = match &g.config {
        Some(p) => Scenario::load(p)?,
        None => preset(g.seed.unwrap_or(0)),
    };
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    Ok(s)
}

/// A model shared by every scenario in one command, loaded or trained once.
fn shared_model(s: &Scenario, path: Option<&Path>) -> Result<Option<Arc<EstimatorModel>>> {
    Ok(match (&s.estimator, path) {
        (_, Some(p)) => Some(Arc::new(load_model(p)?)),
        (EstimatorChoice::Learned { training_rows }, None) => {
            eprintln!("training K model on {training_rows} rows");
            Some(Arc::new(train_model(*training_rows, s.rl.estimator_window, s.seed)?))
        }
        _ => None,
    })
}

fn rl_run(g: &Global, a: RunArgs) -> Result<()> {
    let s = scenario_from(g, Scenario::fig4)?;
    s.validate()?;
    let model = shared_model(&s, a.model.as_deref())?;
    let out = run_scenario(&s, s.k_source(model)?, a.traces)?;
    let dir = out_dir(g, "runs/rl");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    for (r, trace) in out.traces.iter().enumerate() {
        write_ndjson(trace, BufWriter::new(fs::File::create(dir.join(format!("trace_rep{r}.ndjson")))?))?;
    }
    for (i, seg) in out.summary.segments.iter().enumerate() {
        println!(
            "segment {i}: K {} dB, {} iterations, final-20% ratio {:.4}, reaches 95% at {}",
            seg.k_db,
            seg.iterations,
            out.summary.final_ratio(i, 0.2),
            out.summary.reach_time(i, 0.95).map_or("never".into(), |t| t.to_string()),
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn reproduce(g: &Global, a: ReproduceArgs) -> Result<()> {
    let files = match a.figure {
        FigureArg::Fig2 => {
            let mut study: EstimatorStudy = match &g.config {
                Some(p) => {
                    let text = fs::read_to_string(p)?;
                    if p.extension().is_some_and(|e| e == "json") {
                        serde_json::from_str(&text)?
                    } else {
                        toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))?
                    }
                }
                None => EstimatorStudy::default(),
            };
            if let Some(seed) = g.seed {
                study.seed = seed;
            }
            let model = a.model.as_deref().map(load_model).transpose()?;
            let table = study.run(model.as_ref())?;
            emit_figure_data(Figure::Fig2, FigureInput::Estimators { table: &table, study: &study }, &out_dir(g, "runs/fig2"))?
        }
        FigureArg::Fig3 => {
            let base = scenario_from(g, |seed| Scenario::fig3(100, seed))?;
            if a.m_values.is_empty() {
                return Err(Error::Usage("no M values".into()).into());
            }
            let model = shared_model(&base, a.model.as_deref())?;
            let mut runs = Vec::new();
            for &m in &a.m_values {
                let mut s = base.clone();
                s.name = format!("fig3-m{m}");
                s.rl.samples_per_iteration = m;
                if let Some(r) = a.repetitions {
                    s.repetitions = r;
                }
                let out = run_scenario(&s, s.k_source(model.clone())?, false)?;
                report(&out.summary);
                runs.push(out.summary);
            }
            emit_figure_data(Figure::Fig3, FigureInput::Runs(&runs), &out_dir(g, "runs/fig3"))?
        }
        FigureArg::Fig4 => {
            let mut s = scenario_from(g, Scenario::fig4)?;
            if let Some(r) = a.repetitions {
                s.repetitions = r;
            }
            let model = shared_model(&s, a.model.as_deref())?;
            let out = run_scenario(&s, s.k_source(model)?, false)?;
            report(&out.summary);
            emit_figure_data(Figure::Fig4, FigureInput::Runs(std::slice::from_ref(&out.summary)), &out_dir(g, "runs/fig4"))?
        }
    };
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn report(s: &qfb_core::harness::RunSummary) {
    for (i, seg) in s.segments.iter().enumerate() {
        println!(
            "{}: K {} dB, M {}, final-20% ratio {:.4}, reaches 95% at {}, {:.1} exceedances per repetition",
            s.scenario.name,
            seg.k_db,
            s.scenario.rl.samples_per_iteration,
            s.final_ratio(i, 0.2),
            s.reach_time(i, 0.95).map_or("never".into(), |t| t.to_string()),
            s.mean_exceedances(),
        );
    }
}
