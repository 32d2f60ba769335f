use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::MicrogridConfig;
use crate::error::{Error, Result};
use crate::grid::{pv_power, wind_power, GeneratorKind};
use crate::loss::ConstraintContext;
use crate::oracle::{free_start, solve_horizon, HorizonOptions, StepInput};

use super::normalize::Normalizer;
use super::weather::WeatherProfile;

pub const N_FEATURES: usize = 11;
pub const N_TARGETS: usize = 5;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "load", "pv_avail", "wind_avail", "pv_max", "wind_max", "chp_min", "chp_max", "ng_min", "ng_max", "ds_min",
    "ds_max",
];

pub const TARGET_NAMES: [&str; N_TARGETS] = ["p_chp", "p_ng", "p_ds", "p_wind", "p_pv"];

/// Unit kind behind each target column.
pub const TARGET_KINDS: [GeneratorKind; N_TARGETS] = [
    GeneratorKind::Chp,
    GeneratorKind::Ng,
    GeneratorKind::Ds,
    GeneratorKind::Wind,
    GeneratorKind::Pv,
];

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Normalised feature vector, see [`FEATURE_NAMES`].
    pub features: Vec<f64>,
    /// Normalised targets, see [`TARGET_NAMES`].
    pub targets: Vec<f64>,
    /// kW
    pub raw_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test partition of `n` time-ordered samples. The training part gets
/// `floor(train_fraction * n)` samples: the leading block by default, or a
/// seeded random subset when `shuffle` is set.
pub fn split(n: usize, train_fraction: f64, seed: u64, shuffle: bool) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let k = ((train_fraction * n as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut train = order[..k].to_vec();
    let mut test = order[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub train_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 42,
            shuffle: false,
        }
    }
}

/// Everything needed besides the sample rows; persisted as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub resolution_min: u32,
    pub train_fraction: f64,
    pub shuffled: bool,
    pub feature_norm: Normalizer,
    pub target_norm: Normalizer,
    pub split: Split,
    /// Per target; `None` for renewables.
    pub ramp_up: Vec<Option<f64>>,
    pub ramp_down: Vec<Option<f64>>,
    /// Setpoints before the first sample, target order.
    pub initial_setpoints: Vec<f64>,
    pub committed: Vec<bool>,
    pub config_fingerprint: String,
}

impl DatasetMeta {
    pub const FORMAT: &'static str = "pidispatch-dataset";
    pub const VERSION: u32 = 1;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train(&self) -> &[usize] {
        &self.meta.split.train
    }

    pub fn test(&self) -> &[usize] {
        &self.meta.split.test
    }

    pub fn raw_features(&self, i: usize) -> Vec<f64> {
        self.meta
            .feature_norm
            .denormalize(&self.samples[i].features)
            .expect("sample arity matches the fitted normalizer")
    }

    pub fn raw_targets(&self, i: usize) -> Vec<f64> {
        self.meta
            .target_norm
            .denormalize(&self.samples[i].targets)
            .expect("sample arity matches the fitted normalizer")
    }

    /// Physical constraint data for sample `i`, recovered from its features,
    /// the previous sample's labels and the sidecar ramp limits.
    pub fn context(&self, i: usize) -> ConstraintContext {
        let f = self.raw_features(i);
        let lower = vec![f[5], f[7], f[9], 0.0, 0.0];
        let upper = vec![f[6], f[8], f[10], f[2], f[1]];
        let prev = if i == 0 {
            self.meta.initial_setpoints.clone()
        } else {
            self.raw_targets(i - 1)
        };
        let unlimited = |r: &Vec<Option<f64>>| r.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
        ConstraintContext {
            load: self.samples[i].raw_load,
            kinds: TARGET_KINDS.to_vec(),
            lower,
            upper,
            committed: self.meta.committed.clone(),
            ramp_up: unlimited(&self.meta.ramp_up),
            ramp_down: unlimited(&self.meta.ramp_down),
            prev: Some(prev),
            prev_committed: Some(self.meta.committed.clone()),
        }
    }

    /// Same rows and normaliser with a different partition.
    pub fn with_split(&self, split: Split) -> Result<Dataset> {
        if split.train.iter().chain(&split.test).any(|&i| i >= self.len()) {
            return Err(Error::domain("split index out of range"));
        }
        let mut out = self.clone();
        out.meta.split = split;
        Ok(out)
    }
}

/// Daily maximum of `series`, broadcast back to every step of that day.
fn daily_max(series: &[f64], per_day: usize) -> Vec<f64> {
    series
        .chunks(per_day)
        .flat_map(|day| {
            let m = day.iter().cloned().fold(0.0, f64::max);
            std::iter::repeat_n(m, day.len())
        })
        .collect()
}

/// Available PV and wind power per step in kW, capped at the units' ratings.
pub fn renewable_availability(cfg: &MicrogridConfig, profile: &WeatherProfile) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = profile.len();
    if profile.temperature.len() != n || profile.wind_speed.len() != n {
        return Err(Error::shape("weather series lengths differ"));
    }
    let pv_cap = cfg.generators[cfg.unit_of(GeneratorKind::Pv)?].p_max;
    let wind_cap = cfg.generators[cfg.unit_of(GeneratorKind::Wind)?].p_max;
    let mut pv = Vec::with_capacity(n);
    let mut wind = Vec::with_capacity(n);
    for t in 0..n {
        pv.push(pv_power(&cfg.pv, profile.irradiance[t], profile.temperature[t])?.min(pv_cap));
        wind.push(wind_power(&cfg.wind, profile.wind_speed[t])?.min(wind_cap));
    }
    Ok((pv, wind))
}

/// Labels every timestep of the weather/load series with the oracle dispatch
/// and assembles normalised samples.
///
/// The fleet must contain exactly one unit of each kind. Conventional bounds in
/// the features are the ramp-tightened bounds the oracle solved against.
pub fn build_dataset(
    profile: &WeatherProfile,
    cfg: &MicrogridConfig,
    load: &[f64],
    opts: SplitOptions,
) -> Result<Dataset> {
    let n = profile.len();
    if load.len() != n || profile.temperature.len() != n || profile.wind_speed.len() != n {
        return Err(Error::shape(format!(
            "series lengths differ: load {}, irradiance {n}, temperature {}, wind {}",
            load.len(),
            profile.temperature.len(),
            profile.wind_speed.len()
        )));
    }
    if n == 0 {
        return Err(Error::domain("empty series"));
    }
    cfg.validate()?;
    let fleet = &cfg.generators;
    let pos: Vec<usize> = TARGET_KINDS.iter().map(|&k| cfg.unit_of(k)).collect::<Result<_>>()?;
    let (i_pv, i_wind) = (cfg.unit_of(GeneratorKind::Pv)?, cfg.unit_of(GeneratorKind::Wind)?);
    let (pv_avail, wind_avail) = renewable_availability(cfg, profile)?;
    let per_day = profile.steps_per_day();
    let pv_max = daily_max(&pv_avail, per_day);
    let wind_max = daily_max(&wind_avail, per_day);

    let steps: Vec<StepInput> = (0..n)
        .map(|t| {
            let mut caps = vec![f64::INFINITY; fleet.len()];
            caps[i_pv] = pv_avail[t];
            caps[i_wind] = wind_avail[t];
            StepInput {
                load: load[t],
                caps,
                committed: None,
            }
        })
        .collect();

    let initial = match &cfg.initial_setpoints {
        Some(init) => init.clone(),
        None => free_start(fleet, &steps[0]).map_err(|e| Error::Generation { step: 0, source: Box::new(e) })?,
    };
    let horizon = solve_horizon(fleet, &steps, &initial, HorizonOptions::default()).map_err(|e| match e {
        Error::Horizon { step, source } => Error::Generation { step, source },
        other => other,
    })?;

    let mut raw_features = Vec::with_capacity(n);
    let mut raw_targets = Vec::with_capacity(n);
    for t in 0..n {
        let units = &horizon.instances[t].units;
        let bounds = |k: GeneratorKind| {
            let u = &units[cfg.unit_of(k).expect("checked above")];
            (u.eff_lo(), u.eff_hi())
        };
        let (chp_lo, chp_hi) = bounds(GeneratorKind::Chp);
        let (ng_lo, ng_hi) = bounds(GeneratorKind::Ng);
        let (ds_lo, ds_hi) = bounds(GeneratorKind::Ds);
        raw_features.push(vec![
            load[t],
            pv_avail[t],
            wind_avail[t],
            pv_max[t],
            wind_max[t],
            chp_lo,
            chp_hi,
            ng_lo,
            ng_hi,
            ds_lo,
            ds_hi,
        ]);
        let sp = &horizon.steps[t].setpoints;
        raw_targets.push(pos.iter().map(|&i| sp[i]).collect::<Vec<f64>>());
    }

    let split = split(n, opts.train_fraction, opts.seed, opts.shuffle)?;
    let feature_norm = Normalizer::fit(split.train.iter().map(|&i| raw_features[i].as_slice()))?;
    let target_norm = Normalizer::fit(split.train.iter().map(|&i| raw_targets[i].as_slice()))?;
    let samples = (0..n)
        .map(|t| {
            Ok(Sample {
                features: feature_norm.normalize(&raw_features[t])?,
                targets: target_norm.normalize(&raw_targets[t])?,
                raw_load: load[t],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ramp = |f: fn(&crate::grid::GeneratorSpec) -> f64| -> Vec<Option<f64>> {
        pos.iter()
            .map(|&i| fleet[i].kind.is_conventional().then(|| f(&fleet[i])))
            .collect()
    };
    let meta = DatasetMeta {
        format: DatasetMeta::FORMAT.to_string(),
        version: DatasetMeta::VERSION,
        seed: opts.seed,
        resolution_min: profile.resolution_min,
        train_fraction: opts.train_fraction,
        shuffled: opts.shuffle,
        feature_norm,
        target_norm,
        split,
        ramp_up: ramp(|g| g.ramp_up),
        ramp_down: ramp(|g| g.ramp_down),
        initial_setpoints: pos.iter().map(|&i| initial[i]).collect(),
        committed: pos.iter().map(|&i| fleet[i].committed).collect(),
        config_fingerprint: cfg.fingerprint(),
    };
    Ok(Dataset { samples, meta })
}

/// Weather, load and labels from one seed with the config's synthesis knobs.
pub fn generate(cfg: &MicrogridConfig, seed: u64, days: u32, resolution_min: u32, opts: SplitOptions) -> Result<Dataset> {
    let weather = super::weather::synthesize_weather(seed, days, resolution_min, &cfg.weather)?;
    let load = super::weather::synthesize_load(seed, days, resolution_min, &cfg.load)?;
    build_dataset(&weather, cfg, &load, opts)
}
