//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pidispatch --test acceptance`. The process exits
//! zero whatever the outcome; set `ACCEPTANCE_STRICT=1` to exit non-zero when
//! any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use pidispatch::bench::{run_bench, BenchOptions};
use pidispatch::config::MicrogridConfig;
use pidispatch::datagen::{generate, load_dataset, save_dataset, Dataset, SplitOptions, TARGET_KINDS, TARGET_NAMES};
use pidispatch::grid::{CostModel, GeneratorKind, LinearCost, QuadraticCost};
use pidispatch::loss::{total_pi_loss, PenaltyWeights};
use pidispatch::nn::gradcheck::{check_model, max_relative_error, numeric_gradient, DEFAULT_STEP};
use pidispatch::nn::{
    Checkpoint, CnnArchitecture, Conv1d, Dense, DnnArchitecture, Flatten, Layer, MaxPool1d, Model, Relu,
};
use pidispatch::oracle::{brute_force_solve, solve_single, DispatchInstance, DispatchUnit, DEFAULT_BALANCE_TOL};
use pidispatch::trainer::{
    ablate_train_size, evaluate, regression_metrics, train, MetricsReport, RSquared, TrainingConfig, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const DAYS: u32 = 7;
const RESOLUTION_MIN: u32 = 5;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Models and reports shared between criteria.
struct Shared {
    cfg: MicrogridConfig,
    dataset: Dataset,
    pi_cnn: Option<(Model, MetricsReport)>,
    cnn: Option<Model>,
}

fn main() -> ExitCode {
    let cfg = MicrogridConfig::default();
    let dataset = generate(&cfg, SEED, DAYS, RESOLUTION_MIN, SplitOptions::default()).expect("reference dataset");
    let mut shared = Shared {
        cfg,
        dataset,
        pi_cnn: None,
        cnn: None,
    };

    type Criterion = fn(&mut Shared) -> Result<Verdict, String>;
    let criteria: [(&str, Criterion); 9] = [
        ("oracle correctness", oracle_correctness),
        ("gradient fidelity", gradient_fidelity),
        ("label physics", label_physics),
        ("surrogate quality", surrogate_quality),
        ("physics-penalty effect", penalty_effect),
        ("DNN baseline ordering", dnn_ordering),
        ("runtime ordering", runtime_ordering),
        ("determinism", determinism),
        ("metric identities", metric_identities),
    ];

    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run(&mut shared).unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        if !verdict.pass {
            failures += 1;
        }
        println!(
            "{} criterion {} ({name}): {} [{secs:.1} s]",
            if verdict.pass { "PASS" } else { "FAIL" },
            k + 1,
            verdict.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn random_instance(rng: &mut ChaCha8Rng) -> DispatchInstance {
    let n = rng.random_range(1..=4);
    let units: Vec<DispatchUnit> = (0..n)
        .map(|_| {
            let (kind, cost) = if rng.random_bool(0.6) {
                let gamma = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.001..0.05) };
                let q = QuadraticCost::new(rng.random_range(0.0..3.0), rng.random_range(0.05..0.5), gamma);
                (GeneratorKind::Ng, CostModel::Quadratic(q))
            } else {
                (GeneratorKind::Pv, CostModel::Linear(LinearCost::with_coeff(rng.random_range(0.01..0.3))))
            };
            let lo = rng.random_range(0.0..5.0);
            DispatchUnit {
                kind,
                cost,
                lo,
                hi: lo + rng.random_range(1.0..20.0),
                committed: true,
            }
        })
        .collect();
    let lo: f64 = units.iter().map(|u| u.lo).sum();
    let hi: f64 = units.iter().map(|u| u.hi).sum();
    DispatchInstance {
        load: rng.random_range(lo..=hi),
        units,
    }
}

fn oracle_correctness(_: &mut Shared) -> Result<Verdict, String> {
    let start = Instant::now();
    let step = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_excess, mut worst_kkt, mut worst_balance) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut violations = 0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let sol = solve_single(&inst, DEFAULT_BALANCE_TOL).map_err(err)?;
        let grid = brute_force_solve(&inst, step).map_err(err)?;
        let bound = inst.units.iter().map(|u| u.cost.marginal(u.hi)).fold(0.0, f64::max) * step;
        let excess = sol.total_cost - grid.total_cost - bound;
        let kkt = sol.kkt_residual(&inst, 1e-7);
        worst_excess = worst_excess.max(excess);
        worst_kkt = worst_kkt.max(kkt);
        worst_balance = worst_balance.max(sol.balance_residual.abs());
        if excess > 0.0 || kkt >= 1e-6 {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        violations == 0 && secs < 30.0,
        format!(
            "200 instances, {violations} violations; max(cost - grid cost - L*step) = {worst_excess:.3e}, \
             max KKT residual {worst_kkt:.3e}, max |balance| {worst_balance:.1e} kW, {secs:.1} s (limit 30 s)"
        ),
    ))
}

fn randomize_biases(model: &mut Model, rng: &mut ChaCha8Rng) {
    for (i, p) in model.params_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            p.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn gradient_fidelity(shared: &mut Shared) -> Result<Verdict, String> {
    let start = Instant::now();
    let (mut layer_worst, mut model_worst, mut loss_worst) = (0.0f64, 0.0f64, 0.0f64);
    let (mut checked, mut skipped) = (0usize, 0usize);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let single = |layer: Layer, c: usize, l: usize| Model::new(c, l, vec![layer], 0);
        let layers = [
            single(Layer::Conv1d(Conv1d::init(&mut rng, 2, 3, 3)), 2, 7),
            single(Layer::Dense(Dense::init(&mut rng, 6, 4)), 1, 6),
            single(Layer::Relu(Relu::default()), 2, 5),
            single(Layer::MaxPool(MaxPool1d::new(2, 2).map_err(err)?), 2, 6),
            single(Layer::Flatten(Flatten::default()), 3, 2),
        ];
        for m in layers {
            let m = m.map_err(err)?;
            let x = uniform(&mut rng, m.input_size());
            let up = uniform(&mut rng, m.output_size());
            let r = check_model(&m, &x, &up, DEFAULT_STEP).map_err(err)?;
            layer_worst = layer_worst.max(r.worst());
        }
        for mut m in [
            CnnArchitecture::default().build(11, 5, seed).map_err(err)?,
            CnnArchitecture::pooled(2, 2).build(11, 5, seed).map_err(err)?,
            DnnArchitecture::default().build(11, 5, seed).map_err(err)?,
        ] {
            randomize_biases(&mut m, &mut rng);
            let x = uniform(&mut rng, 11);
            let up = uniform(&mut rng, 5);
            let r = check_model(&m, &x, &up, DEFAULT_STEP).map_err(err)?;
            model_worst = model_worst.max(r.worst());
            checked += r.checked;
            skipped += r.skipped;
        }

        // total loss against physical contexts, predictions near the labels
        let d = &shared.dataset;
        let idx: Vec<usize> = (0..8).map(|_| rng.random_range(0..d.len())).collect();
        let truth: Vec<Vec<f64>> = idx.iter().map(|&i| d.samples[i].targets.clone()).collect();
        let ctx: Vec<_> = idx.iter().map(|&i| d.context(i)).collect();
        let pred: Vec<f64> = truth.iter().flatten().map(|&y| y + rng.random_range(-0.3..0.3)).collect();
        let w = PenaltyWeights::uniform(PenaltyWeights::DEFAULT_PBC, PenaltyWeights::DEFAULT_CONSTRAINT, PenaltyWeights::DEFAULT_CONSTRAINT);
        let rows = |flat: &[f64]| flat.chunks(5).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let norm = &d.meta.target_norm;
        let analytic: Vec<f64> = total_pi_loss(&rows(&pred), &truth, &ctx, &w, norm).map_err(err)?.grad.concat();
        let numeric = numeric_gradient(
            |p| total_pi_loss(&rows(p), &truth, &ctx, &w, norm).expect("shapes fixed").total,
            &pred,
            1e-6,
        );
        loss_worst = loss_worst.max(max_relative_error(&analytic, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    let skip_share = skipped as f64 / (checked + skipped) as f64;
    Ok(Verdict::new(
        layer_worst < 1e-4 && model_worst < 1e-4 && loss_worst < 1e-6 && skip_share <= 0.01 && secs < 60.0,
        format!(
            "20 seeds; worst relative error: layers {layer_worst:.2e}, CNN/pooled CNN/DNN {model_worst:.2e} \
             (limit 1e-4), total loss {loss_worst:.2e} (limit 1e-6); {skipped} of {} model coordinates \
             skipped for kink-crossing stencils; {secs:.1} s (limit 60 s)",
            checked + skipped
        ),
    ))
}

fn label_physics(shared: &mut Shared) -> Result<Verdict, String> {
    let cfg = &shared.cfg;
    let d = &shared.dataset;
    let specs: Vec<_> = TARGET_KINDS
        .iter()
        .map(|&k| cfg.unit_of(k).map(|i| cfg.generators[i].clone()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut prev = d.meta.initial_setpoints.clone();
    let (mut balance, mut bounds, mut ramps) = (0usize, 0usize, 0usize);
    let mut worst_balance = 0.0f64;
    for i in 0..d.len() {
        let y = d.raw_targets(i);
        let f = d.raw_features(i);
        let r = (y.iter().sum::<f64>() - d.samples[i].raw_load).abs();
        worst_balance = worst_balance.max(r);
        balance += usize::from(r > 1e-6);
        for (j, spec) in specs.iter().enumerate() {
            let (lo, hi) = match spec.kind {
                GeneratorKind::Wind => (0.0, f[2].min(spec.p_max)),
                GeneratorKind::Pv => (0.0, f[1].min(spec.p_max)),
                _ => (spec.p_min, spec.p_max),
            };
            bounds += usize::from(y[j] < lo - 1e-6 || y[j] > hi + 1e-6);
            if spec.kind.is_conventional() {
                let delta = y[j] - prev[j];
                ramps += usize::from(delta > spec.ramp_up + 1e-6 || -delta > spec.ramp_down + 1e-6);
            }
        }
        prev = y;
    }
    Ok(Verdict::new(
        balance + bounds + ramps == 0,
        format!(
            "{} samples; balance violations {balance} (worst {worst_balance:.1e} kW), bound violations {bounds}, \
             ramp violations {ramps}",
            d.len()
        ),
    ))
}

fn train_and_evaluate(cfg: &TrainingConfig, d: &Dataset) -> Result<(Model, MetricsReport), String> {
    let (model, _) = train(cfg, d).map_err(err)?;
    let report = evaluate(&model, d, d.test()).map_err(err)?;
    Ok((model, report))
}

fn r2_summary(report: &MetricsReport) -> String {
    report
        .targets
        .iter()
        .map(|t| format!("{} {}", t.target, t.metrics.r2.value().map_or("undefined".into(), |v| format!("{v:.4}"))))
        .collect::<Vec<_>>()
        .join(", ")
}

fn surrogate_quality(shared: &mut Shared) -> Result<Verdict, String> {
    let cfg = TrainingConfig::new(Variant::PiCnn, SEED);
    let (model, report) = train_and_evaluate(&cfg, &shared.dataset)?;
    let min_r2 = report
        .targets
        .iter()
        .map(|t| t.metrics.r2.value().unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    let mean = report.mean_r2.unwrap_or(f64::NEG_INFINITY);
    let all_defined = report.targets.iter().all(|t| t.metrics.r2 != RSquared::Undefined);
    let verdict = Verdict::new(
        all_defined && min_r2 >= 0.95 && mean >= 0.97,
        format!(
            "PI-CNN, {} epochs, {} test samples; R²: {}; mean {mean:.4} (need every target >= 0.95, mean >= 0.97)",
            cfg.epochs,
            report.samples,
            r2_summary(&report)
        ),
    );
    shared.pi_cnn = Some((model, report));
    Ok(verdict)
}

fn penalty_effect(shared: &mut Shared) -> Result<Verdict, String> {
    let base = TrainingConfig::new(Variant::PiCnn, SEED);
    let table = ablate_train_size(&base, &shared.dataset, &[0.2], &[Variant::PiCnn, Variant::Cnn]).map_err(err)?;
    let pi = &table.get(0.2, Variant::PiCnn).ok_or("missing PI-CNN row")?.report;
    let plain = &table.get(0.2, Variant::Cnn).ok_or("missing CNN row")?.report;
    let better: Vec<&str> = TARGET_NAMES
        .iter()
        .zip(pi.targets.iter().zip(&plain.targets))
        .filter(|(_, (a, b))| a.metrics.mse <= b.metrics.mse)
        .map(|(name, _)| *name)
        .collect();
    let residual_lower = pi.mean_balance_residual < plain.mean_balance_residual;
    Ok(Verdict::new(
        residual_lower && better.len() >= 3,
        format!(
            "20% fraction ({} samples); mean balance residual PI-CNN {:.4} kW vs CNN {:.4} kW (need strictly lower); \
             PI-CNN MSE <= CNN on {} of 5 targets [{}] (need 3)",
            table.rows[0].train_samples,
            pi.mean_balance_residual,
            plain.mean_balance_residual,
            better.len(),
            better.join(", ")
        ),
    ))
}

fn dnn_ordering(shared: &mut Shared) -> Result<Verdict, String> {
    let (cnn, cnn_report) = train_and_evaluate(&TrainingConfig::new(Variant::Cnn, SEED), &shared.dataset)?;
    let (_, dnn_report) = train_and_evaluate(&TrainingConfig::new(Variant::Dnn, SEED), &shared.dataset)?;
    shared.cnn = Some(cnn);
    Ok(Verdict::new(
        cnn_report.mean_mse < dnn_report.mean_mse,
        format!(
            "150 epochs; mean test MSE CNN {:.4} vs DNN {:.4} kW²",
            cnn_report.mean_mse, dnn_report.mean_mse
        ),
    ))
}

fn runtime_ordering(shared: &mut Shared) -> Result<Verdict, String> {
    let (pi, _) = shared.pi_cnn.as_ref().ok_or("PI-CNN model unavailable (criterion 4 failed to train)")?;
    let cnn = shared.cnn.as_ref().ok_or("CNN model unavailable (criterion 6 failed to train)")?;
    let models = [("pi-cnn".to_string(), pi), ("cnn".to_string(), cnn)];
    let report = run_bench(&models, &shared.dataset, &shared.cfg, BenchOptions::default(), SEED).map_err(err)?;
    let pi_t = report.model("pi-cnn").ok_or("missing timing")?;
    let cnn_t = report.model("cnn").ok_or("missing timing")?;
    let ratio = pi_t.median_ms.max(cnn_t.median_ms) / pi_t.median_ms.min(cnn_t.median_ms);
    Ok(Verdict::new(
        pi_t.speedup >= 10.0,
        format!(
            "median oracle solve {:.5} ms, PI-CNN inference {:.5} ms, speedup {:.2}x (need >= 10x); \
             CNN inference {:.5} ms, within {ratio:.2}x of PI-CNN; {} repetitions after {} warmup; {}",
            report.oracle.median_ms,
            pi_t.median_ms,
            pi_t.speedup,
            cnn_t.median_ms,
            report.repetitions,
            report.warmup,
            report.hardware
        ),
    ))
}

/// Second end-to-end run through files on disk, compared with the in-memory
/// run of criterion 4.
fn determinism(shared: &mut Shared) -> Result<Verdict, String> {
    let (_, first) = shared.pi_cnn.as_ref().ok_or("PI-CNN report unavailable (criterion 4 failed to train)")?;
    let dir = tempfile::tempdir().map_err(err)?;
    let data_path = dir.path().join("dataset.csv");
    let model_path = dir.path().join("pi-cnn.model.json");
    let fresh = generate(&MicrogridConfig::default(), SEED, DAYS, RESOLUTION_MIN, SplitOptions::default()).map_err(err)?;
    save_dataset(&fresh, &data_path).map_err(err)?;
    let loaded = load_dataset(&data_path).map_err(err)?;
    let (model, _) = train(&TrainingConfig::new(Variant::PiCnn, SEED), &loaded).map_err(err)?;
    Checkpoint::new("pi-cnn", model).save(&model_path).map_err(err)?;
    let restored = Checkpoint::load(&model_path).map_err(err)?;
    let second = evaluate(&restored.model, &loaded, loaded.test()).map_err(err)?;
    let a = serde_json::to_string_pretty(first).map_err(err)?;
    let b = serde_json::to_string_pretty(&second).map_err(err)?;
    Ok(Verdict::new(
        a == b,
        format!(
            "metrics JSON of two seed-{SEED} runs ({} bytes, second through CSV and checkpoint files) {}",
            a.len(),
            if a == b { "byte-identical" } else { "differ" }
        ),
    ))
}

fn metric_identities(_: &mut Shared) -> Result<Verdict, String> {
    let mut failed = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };
    let y = [1.0, 2.0, 3.0];
    let perfect = regression_metrics(&y, &y).map_err(err)?;
    expect("perfect", perfect.mse == 0.0 && perfect.mae == 0.0 && perfect.r2 == RSquared::Value(1.0));
    let mean = regression_metrics(&y, &[2.0, 2.0, 2.0]).map_err(err)?;
    expect("mean predictor", mean.r2 == RSquared::Value(0.0));
    let hand = regression_metrics(&y, &[1.0, 2.0, 4.0]).map_err(err)?;
    expect("hand example", hand.mse == 1.0 / 3.0 && hand.mae == 1.0 / 3.0 && hand.r2 == RSquared::Value(0.5));
    let flat = regression_metrics(&[4.0, 4.0], &[4.0, 5.0]).map_err(err)?;
    expect("zero variance", flat.r2 == RSquared::Undefined);
    Ok(Verdict::new(
        failed.is_empty(),
        if failed.is_empty() {
            "perfect fit, mean predictor, [1,2,3] vs [1,2,4] (MSE = MAE = 1/3, R² = 0.5) and zero variance all exact"
                .to_string()
        } else {
            format!("failed: {}", failed.join(", "))
        },
    ))
}
