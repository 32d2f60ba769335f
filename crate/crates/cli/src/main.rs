//! `pidispatch`: generate labelled dispatch datasets, solve load series with
//! the oracle, train and evaluate surrogates, and benchmark them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pidispatch::bench::{plot_series, run_bench, BenchOptions, DEFAULT_REPETITIONS, DEFAULT_WARMUP};
use pidispatch::config::MicrogridConfig;
use pidispatch::datagen::{
    generate, load_dataset, renewable_availability, save_dataset, Dataset, SplitOptions, WeatherProfile,
    DEFAULT_RESOLUTION_MIN, DEFAULT_TRAIN_FRACTION, TARGET_KINDS,
};
use pidispatch::grid::GeneratorKind;
use pidispatch::nn::Checkpoint;
use pidispatch::oracle::{
    free_start, solve_horizon, solve_with_commitment, DispatchInstance, DispatchSolution, HorizonOptions, StepInput,
};
use pidispatch::trainer::{
    ablate_train_size, evaluate, train, TrainingConfig, Variant, DEFAULT_ABLATION_FRACTIONS,
};

#[derive(Parser, Debug)]
#[command(name = "pidispatch", version, about = "Microgrid economic dispatch oracle and surrogate trainer")]
struct Cli {
    /// Microgrid TOML file (fleet, renewable physics, synthesis and training
    /// settings). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for data synthesis, splitting, initialisation and shuffling.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for outputs whose paths are not given explicitly.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesise weather and load, label every step with the oracle and
    /// write the dataset CSV plus its `.meta.json` sidecar.
    Generate(GenerateArgs),
    /// Dispatch a load series with the oracle.
    Solve(SolveArgs),
    /// Train a surrogate on a dataset's training split.
    Train(TrainArgs),
    /// Score a trained model; writes metrics as JSON and CSV.
    Eval(EvalArgs),
    /// Time model inference against single-step oracle solves.
    Bench(BenchArgs),
    /// Write truth-versus-prediction series for plotting.
    Plotdata(PlotArgs),
    /// Retrain on growing prefixes of the data and score each on the test split.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Number of simulated days.
    #[arg(long, default_value_t = 7)]
    days: u32,
    /// Minutes per timestep; must divide 1440.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION_MIN)]
    resolution_min: u32,
    /// Fraction of samples in the training split.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_frac: f64,
    /// Draw the training split at random instead of taking the leading block.
    #[arg(long)]
    shuffle: bool,
    /// Dataset CSV path [default: OUT_DIR/dataset.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// CSV with a `load` column (kW) plus either `pv_avail` and `wind_avail`
    /// (kW) or `irradiance` (W/m²), `temperature` (°C) and `wind_speed` (m/s).
    #[arg(long, value_name = "CSV")]
    load: PathBuf,
    /// Minutes per row, used only to group rows into days.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION_MIN)]
    resolution_min: u32,
    /// Choose on/off status per step by enumeration. Steps are then solved
    /// independently and ramp limits are not applied.
    #[arg(long)]
    commitment: bool,
    /// Solution CSV path [default: OUT_DIR/solution.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// pi-cnn, cnn or dnn.
    #[arg(long, default_value = "pi-cnn")]
    variant: Variant,
    #[arg(long)]
    epochs: Option<usize>,
    /// SGD step size.
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    #[command(flatten)]
    lambdas: LambdaArgs,
    /// Checkpoint path [default: OUT_DIR/<variant>.model.json]. The per-epoch
    /// loss history goes next to it as `.history.csv`.
    #[arg(long)]
    out_model: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct LambdaArgs {
    /// Power-balance penalty weight (per kW²).
    #[arg(long)]
    lambda_pbc: Option<f64>,
    /// Weight of the conventional lower/upper bound penalties.
    #[arg(long)]
    lambda_bounds: Option<f64>,
    /// Weight of the ramp-up/ramp-down penalties.
    #[arg(long)]
    lambda_ramp: Option<f64>,
    /// Weight of the PV and wind range penalties.
    #[arg(long)]
    lambda_renewable: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Which split to score: test or train.
    #[arg(long, default_value = "test")]
    split: String,
    /// Metrics JSON path [default: OUT_DIR/metrics.json]; the CSV table is
    /// written alongside with a `.csv` extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Model checkpoint(s) to time; repeat the flag for several.
    #[arg(long = "model", value_name = "JSON", required = true)]
    models: Vec<PathBuf>,
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Timed calls per method; fewer than the default marks the report
    /// low-confidence.
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    repetitions: usize,
    /// Untimed calls before timing starts.
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Report JSON path [default: OUT_DIR/bench.json]; CSV alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// First test-split position of the window.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Window length in samples.
    #[arg(long, default_value_t = 288)]
    len: usize,
    /// Series CSV path [default: OUT_DIR/plot.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Training fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ABLATION_FRACTIONS)]
    fractions: Vec<f64>,
    /// Variants to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [Variant::PiCnn, Variant::Cnn])]
    variants: Vec<Variant>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[command(flatten)]
    lambdas: LambdaArgs,
    /// Table path [default: OUT_DIR/ablation.csv]; JSON alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain with `: `, dropping causes already spelled out by
/// the message above them.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => MicrogridConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => MicrogridConfig::default(),
    };
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, &cfg, a),
        Command::Solve(a) => cmd_solve(cli, &cfg, a),
        Command::Train(a) => cmd_train(cli, &cfg, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Bench(a) => cmd_bench(cli, &cfg, a),
        Command::Plotdata(a) => cmd_plotdata(cli, a),
        Command::Ablate(a) => cmd_ablate(cli, &cfg, a),
    }
}

fn out_path(cli: &Cli, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| cli.out_dir.join(default_name))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    require_file(path, "dataset")?;
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    require_file(path, "model file")?;
    Checkpoint::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn cmd_generate(cli: &Cli, cfg: &MicrogridConfig, a: &GenerateArgs) -> Result<()> {
    let opts = SplitOptions {
        train_fraction: a.train_frac,
        seed: cli.seed,
        shuffle: a.shuffle,
    };
    let dataset = generate(cfg, cli.seed, a.days, a.resolution_min, opts)?;
    let path = out_path(cli, &a.out, "dataset.csv");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_dataset(&dataset, &path)?;
    eprintln!(
        "wrote {} samples ({} train, {} test) to {}",
        dataset.len(),
        dataset.train().len(),
        dataset.test().len(),
        path.display()
    );
    Ok(())
}

/// Load series and per-unit availability caps from a solve input file.
fn read_solve_input(cfg: &MicrogridConfig, path: &Path, resolution_min: u32) -> Result<Vec<StepInput>> {
    require_file(path, "load series")?;
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let load_col = col("load").with_context(|| format!("{} has no `load` column", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k as u64 + 2, |p| p.line());
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .with_context(|| format!("{}:{line}: non-numeric value", path.display()))?;
        if row.len() != header.len() {
            bail!("{}:{line}: expected {} columns, found {}", path.display(), header.len(), row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} has no rows", path.display());
    }
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let (pv, wind) = match (col("pv_avail"), col("wind_avail"), col("irradiance"), col("temperature"), col("wind_speed")) {
        (Some(p), Some(w), ..) => (column(p), column(w)),
        (_, _, Some(i), Some(t), Some(v)) => renewable_availability(
            cfg,
            &WeatherProfile {
                irradiance: column(i),
                temperature: column(t),
                wind_speed: column(v),
                resolution_min,
            },
        )?,
        _ => bail!(
            "{} needs `pv_avail` and `wind_avail`, or `irradiance`, `temperature` and `wind_speed`",
            path.display()
        ),
    };
    let (i_pv, i_wind) = (cfg.unit_of(GeneratorKind::Pv)?, cfg.unit_of(GeneratorKind::Wind)?);
    Ok(column(load_col)
        .into_iter()
        .enumerate()
        .map(|(t, load)| {
            let mut caps = vec![f64::INFINITY; cfg.generators.len()];
            caps[i_pv] = pv[t];
            caps[i_wind] = wind[t];
            StepInput {
                load,
                caps,
                committed: None,
            }
        })
        .collect())
}

fn cmd_solve(cli: &Cli, cfg: &MicrogridConfig, a: &SolveArgs) -> Result<()> {
    let steps = read_solve_input(cfg, &a.load, a.resolution_min)?;
    let order: Vec<usize> = TARGET_KINDS.iter().map(|&k| cfg.unit_of(k)).collect::<pidispatch::Result<_>>()?;
    let solutions: Vec<DispatchSolution> = if a.commitment {
        steps
            .iter()
            .enumerate()
            .map(|(t, s)| {
                let inst = DispatchInstance::from_fleet(&cfg.generators, s.load, &s.caps, None, None, true)?;
                solve_with_commitment(&inst).with_context(|| format!("step {t}"))
            })
            .collect::<Result<_>>()?
    } else {
        let initial = match &cfg.initial_setpoints {
            Some(init) => init.clone(),
            None => free_start(&cfg.generators, &steps[0]).context("step 0")?,
        };
        solve_horizon(&cfg.generators, &steps, &initial, HorizonOptions::default())?.steps
    };
    let mut out = String::from("t,p_chp,p_ng,p_ds,p_wind,p_pv,cost,lambda\n");
    let mut total = 0.0;
    for (t, sol) in solutions.iter().enumerate() {
        out.push_str(&t.to_string());
        for &i in &order {
            out.push_str(&format!(",{}", sol.setpoints[i]));
        }
        out.push_str(&format!(",{},{}\n", sol.total_cost, sol.lambda_star));
        total += sol.total_cost;
    }
    let path = out_path(cli, &a.out, "solution.csv");
    write(&path, &out)?;
    eprintln!("solved {} steps, total cost {total:.4}, wrote {}", solutions.len(), path.display());
    Ok(())
}

fn training_config(
    cfg: &MicrogridConfig,
    variant: Variant,
    seed: u64,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    l: &LambdaArgs,
) -> Result<TrainingConfig> {
    let mut tc = TrainingConfig::new(variant, seed);
    tc.apply(&cfg.training);
    tc.apply(&pidispatch::config::TrainingSection {
        epochs,
        batch_size: batch,
        learning_rate: lr,
        lambda_pbc: l.lambda_pbc,
        lambda_bounds: l.lambda_bounds,
        lambda_ramp: l.lambda_ramp,
        lambda_renewable: l.lambda_renewable,
    });
    tc.validate()?;
    Ok(tc)
}

fn cmd_train(cli: &Cli, cfg: &MicrogridConfig, a: &TrainArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let tc = training_config(cfg, a.variant, cli.seed, a.epochs, a.lr, a.batch, &a.lambdas)?;
    let (model, history) = train(&tc, &dataset)?;
    let path = out_path(cli, &a.out_model, &format!("{}.model.json", a.variant));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Checkpoint::new(a.variant.as_str(), model).save(&path)?;
    let mut hist = String::from("epoch,total,mse,pbc,constraint\n");
    for (e, l) in history.epochs.iter().enumerate() {
        hist.push_str(&format!("{},{},{},{},{}\n", e + 1, l.total, l.mse, l.pbc, l.constraint));
    }
    write(&path.with_extension("history.csv"), &hist)?;
    let last = history.epochs.last().expect("at least one epoch");
    eprintln!(
        "trained {} for {} epochs, final loss {:.6}; wrote {}",
        a.variant,
        history.len(),
        last.total,
        path.display()
    );
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let ck = read_checkpoint(&a.model)?;
    let dataset = read_dataset(&a.data)?;
    let indices = match a.split.as_str() {
        "test" => dataset.test(),
        "train" => dataset.train(),
        other => bail!("unknown split {other:?}, expected test or train"),
    };
    let mut report = evaluate(&ck.model, &dataset, indices)?;
    report.variant = Some(ck.variant.clone());
    let path = out_path(cli, &a.out, "metrics.json");
    write(&path, &serde_json::to_string_pretty(&report)?)?;
    write(&path.with_extension("csv"), &report.to_csv())?;
    eprintln!(
        "{}: mean R² {}, mean MSE {:.5}, mean balance residual {:.5} kW; wrote {}",
        ck.variant,
        report.mean_r2.map_or("undefined".into(), |v| format!("{v:.5}")),
        report.mean_mse,
        report.mean_balance_residual,
        path.display()
    );
    Ok(())
}

fn cmd_bench(cli: &Cli, cfg: &MicrogridConfig, a: &BenchArgs) -> Result<()> {
    let checkpoints = a.models.iter().map(|p| read_checkpoint(p)).collect::<Result<Vec<_>>>()?;
    let dataset = read_dataset(&a.data)?;
    let named: Vec<(String, &pidispatch::nn::Model)> = checkpoints
        .iter()
        .zip(&a.models)
        .map(|(ck, path)| {
            let stem = path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            (format!("{} ({stem})", ck.variant), &ck.model)
        })
        .collect();
    let opts = BenchOptions {
        repetitions: a.repetitions,
        warmup: a.warmup,
    };
    let report = run_bench(&named, &dataset, cfg, opts, cli.seed)?;
    let path = out_path(cli, &a.out, "bench.json");
    write(&path, &serde_json::to_string_pretty(&report)?)?;
    write(&path.with_extension("csv"), &report.to_csv())?;
    eprintln!("oracle median {:.5} ms", report.oracle.median_ms);
    for m in &report.models {
        eprintln!("{} median {:.5} ms, speedup {:.1}x", m.method, m.median_ms, m.speedup);
    }
    if report.low_confidence {
        eprintln!("warning: fewer than {DEFAULT_REPETITIONS} repetitions, timings are low-confidence");
    }
    Ok(())
}

fn cmd_plotdata(cli: &Cli, a: &PlotArgs) -> Result<()> {
    let ck = read_checkpoint(&a.model)?;
    let dataset = read_dataset(&a.data)?;
    let csv = plot_series(&ck.model, &dataset, a.start, a.len)?;
    let path = out_path(cli, &a.out, "plot.csv");
    write(&path, &csv)?;
    eprintln!("wrote {} rows to {}", a.len, path.display());
    Ok(())
}

fn cmd_ablate(cli: &Cli, cfg: &MicrogridConfig, a: &AblateArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let tc = training_config(cfg, Variant::PiCnn, cli.seed, a.epochs, a.lr, a.batch, &a.lambdas)?;
    let table = ablate_train_size(&tc, &dataset, &a.fractions, &a.variants)?;
    let path = out_path(cli, &a.out, "ablation.csv");
    write(&path, &table.to_csv())?;
    write(&path.with_extension("json"), &serde_json::to_string_pretty(&table)?)?;
    for r in &table.rows {
        eprintln!(
            "fraction {} {}: mean MSE {:.5}, balance residual {:.5} kW",
            r.fraction, r.variant, r.report.mean_mse, r.report.mean_balance_residual
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}
