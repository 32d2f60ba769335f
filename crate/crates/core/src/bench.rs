//! Inference-versus-solver timing and plot-ready prediction series.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::MicrogridConfig;
use crate::datagen::{Dataset, TARGET_KINDS, TARGET_NAMES};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::oracle::{solve_single, DispatchInstance, DispatchUnit, DEFAULT_BALANCE_TOL};

pub const DEFAULT_REPETITIONS: usize = 1000;
pub const DEFAULT_WARMUP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub repetitions: usize,
    pub warmup: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repetitions: DEFAULT_REPETITIONS,
            warmup: DEFAULT_WARMUP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: String,
    /// Median wall time of one call, milliseconds.
    pub median_ms: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub samples: usize,
    /// `oracle median / this median`; 1 for the oracle itself.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub oracle: MethodTiming,
    pub models: Vec<MethodTiming>,
    pub repetitions: usize,
    pub warmup: usize,
    /// Set when fewer than [`DEFAULT_REPETITIONS`] timed calls were made.
    pub low_confidence: bool,
    pub hardware: String,
    pub config_fingerprint: String,
    pub seed: u64,
}

impl BenchReport {
    pub fn model(&self, method: &str) -> Option<&MethodTiming> {
        self.models.iter().find(|m| m.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,median_ms,mean_ms,min_ms,samples,speedup\n");
        for t in std::iter::once(&self.oracle).chain(&self.models) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.method, t.median_ms, t.mean_ms, t.min_ms, t.samples, t.speedup
            ));
        }
        out
    }
}

pub fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {threads} hardware threads, single-threaded timing",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

fn summarise(method: &str, mut times_ms: Vec<f64>) -> MethodTiming {
    times_ms.sort_by(f64::total_cmp);
    let n = times_ms.len();
    let median = if n % 2 == 1 {
        times_ms[n / 2]
    } else {
        0.5 * (times_ms[n / 2 - 1] + times_ms[n / 2])
    };
    MethodTiming {
        method: method.to_string(),
        median_ms: median,
        mean_ms: times_ms.iter().sum::<f64>() / n as f64,
        min_ms: times_ms[0],
        samples: n,
        speedup: 1.0,
    }
}

/// Times `f(i)` once per repetition after `warmup` untimed calls.
fn time_calls(opts: BenchOptions, mut f: impl FnMut(usize) -> Result<()>) -> Result<Vec<f64>> {
    for i in 0..opts.warmup {
        f(i)?;
    }
    let mut times = Vec::with_capacity(opts.repetitions);
    for i in 0..opts.repetitions {
        let start = Instant::now();
        f(i)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(times)
}

/// Single-timestep oracle instance for sample `i`, all units committed, with
/// the same bounds the sample's labels were solved under.
pub fn oracle_instance(cfg: &MicrogridConfig, dataset: &Dataset, i: usize) -> Result<DispatchInstance> {
    let ctx = dataset.context(i);
    let units = TARGET_KINDS
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let spec = &cfg.generators[cfg.unit_of(kind)?];
            Ok(DispatchUnit {
                kind,
                cost: spec.cost,
                lo: ctx.lower[j],
                hi: ctx.upper[j],
                committed: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DispatchInstance { load: ctx.load, units })
}

/// Median per-sample inference time of each model against one oracle solve
/// on the same test-split inputs. Instance construction and feature lookup
/// stay outside the timed region.
pub fn run_bench(
    models: &[(String, &Model)],
    dataset: &Dataset,
    cfg: &MicrogridConfig,
    opts: BenchOptions,
    seed: u64,
) -> Result<BenchReport> {
    if opts.repetitions == 0 {
        return Err(Error::domain("repetitions must be at least 1"));
    }
    let pool = dataset.test();
    if pool.is_empty() {
        return Err(Error::domain("benchmark needs a non-empty test split"));
    }
    let instances: Vec<DispatchInstance> = pool
        .iter()
        .map(|&i| oracle_instance(cfg, dataset, i))
        .collect::<Result<_>>()?;
    let oracle_times = time_calls(opts, |k| {
        std::hint::black_box(solve_single(&instances[k % instances.len()], DEFAULT_BALANCE_TOL)?);
        Ok(())
    })?;
    let oracle = summarise("oracle", oracle_times);

    let mut timings = Vec::with_capacity(models.len());
    for (name, model) in models {
        let times = time_calls(opts, |k| {
            let x = &dataset.samples[pool[k % pool.len()]].features;
            std::hint::black_box(model.predict(std::hint::black_box(x))?);
            Ok(())
        })?;
        let mut t = summarise(name, times);
        t.speedup = oracle.median_ms / t.median_ms;
        timings.push(t);
    }
    Ok(BenchReport {
        oracle,
        models: timings,
        repetitions: opts.repetitions,
        warmup: opts.warmup,
        low_confidence: opts.repetitions < DEFAULT_REPETITIONS,
        hardware: hardware_note(),
        config_fingerprint: cfg.fingerprint(),
        seed,
    })
}

/// Truth-versus-prediction series in kW over `len` consecutive test samples
/// starting at test position `start`. Columns: `t`, then `<target>_true`,
/// `<target>_pred` for each target.
pub fn plot_series(model: &Model, dataset: &Dataset, start: usize, len: usize) -> Result<String> {
    let test = dataset.test();
    let end = start.checked_add(len).filter(|&e| e <= test.len() && len > 0).ok_or_else(|| {
        Error::domain(format!(
            "window [{start}, {start}+{len}) is outside the {} test samples",
            test.len()
        ))
    })?;
    let mut out = String::from("t");
    for name in TARGET_NAMES {
        out.push_str(&format!(",{name}_true,{name}_pred"));
    }
    out.push('\n');
    for &i in &test[start..end] {
        let truth = dataset.raw_targets(i);
        let pred = dataset.meta.target_norm.denormalize(&model.predict(&dataset.samples[i].features)?)?;
        out.push_str(&i.to_string());
        for (y, p) in truth.iter().zip(&pred) {
            out.push_str(&format!(",{y},{p}"));
        }
        out.push('\n');
    }
    Ok(out)
}
