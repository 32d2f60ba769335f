//! Mini-batch SGD training of the dispatch surrogates, evaluation metrics and
//! the training-size ablation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainingSection;
use crate::datagen::{Dataset, N_FEATURES, N_TARGETS, TARGET_NAMES};
use crate::error::{Error, Result};
use crate::loss::{mse_loss, total_pi_loss, ConstraintContext, PenaltyWeights};
use crate::nn::{CnnArchitecture, DnnArchitecture, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Convolutional network trained with the physics-informed loss.
    #[serde(rename = "pi-cnn")]
    PiCnn,
    /// Same network, MSE only.
    #[serde(rename = "cnn")]
    Cnn,
    /// Fully connected baseline, MSE only.
    #[serde(rename = "dnn")]
    Dnn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PiCnn, Variant::Cnn, Variant::Dnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::PiCnn => "pi-cnn",
            Variant::Cnn => "cnn",
            Variant::Dnn => "dnn",
        }
    }

    pub fn physics_informed(self) -> bool {
        self == Variant::PiCnn
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}, expected pi-cnn, cnn or dnn")))
    }
}

pub const DEFAULT_EPOCHS: usize = 150;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Ignored unless the variant is physics-informed.
    pub weights: PenaltyWeights,
    pub seed: u64,
    pub cnn: CnnArchitecture,
    pub dnn: DnnArchitecture,
}

impl TrainingConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        TrainingConfig {
            variant,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            weights: PenaltyWeights::default(),
            seed,
            cnn: CnnArchitecture::default(),
            dnn: DnnArchitecture::default(),
        }
    }

    /// Overrides from a config file's `[training]` table.
    pub fn apply(&mut self, s: &TrainingSection) {
        if let Some(v) = s.epochs {
            self.epochs = v;
        }
        if let Some(v) = s.batch_size {
            self.batch_size = v;
        }
        if let Some(v) = s.learning_rate {
            self.learning_rate = v;
        }
        if let Some(v) = s.lambda_pbc {
            self.weights.pbc = v;
        }
        if let Some(v) = s.lambda_bounds {
            self.weights.lower = v;
            self.weights.upper = v;
        }
        if let Some(v) = s.lambda_ramp {
            self.weights.ramp_up = v;
            self.weights.ramp_down = v;
        }
        if let Some(v) = s.lambda_renewable {
            self.weights.pv_min = v;
            self.weights.pv_max = v;
            self.weights.wind_min = v;
            self.weights.wind_max = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        self.weights.validate()
    }

    /// Freshly initialised network for this variant.
    pub fn build_model(&self) -> Result<Model> {
        match self.variant {
            Variant::PiCnn | Variant::Cnn => self.cnn.build(N_FEATURES, N_TARGETS, self.seed),
            Variant::Dnn => make_baseline_dnn(self),
        }
    }
}

/// 11 -> 8 -> 8 -> 8 -> 8 -> 5 fully connected baseline (357 parameters with
/// the default widths).
pub fn make_baseline_dnn(cfg: &TrainingConfig) -> Result<Model> {
    cfg.dnn.build(N_FEATURES, N_TARGETS, cfg.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub total: f64,
    pub mse: f64,
    pub pbc: f64,
    pub constraint: f64,
}

/// Sample-weighted mean losses per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLoss>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Trains on the dataset's training split.
pub fn train(cfg: &TrainingConfig, dataset: &Dataset) -> Result<(Model, TrainHistory)> {
    train_on(cfg, dataset, dataset.train())
}

/// Trains on the given sample indices. Batches are drawn from a per-epoch
/// shuffle seeded by `cfg.seed`, so a run is a pure function of its inputs.
pub fn train_on(cfg: &TrainingConfig, dataset: &Dataset, indices: &[usize]) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::domain("no training samples"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::domain(format!("sample index {bad} out of range")));
    }
    let mut model = cfg.build_model()?;
    let physics = cfg.variant.physics_informed();
    let contexts: Vec<Option<ConstraintContext>> = (0..dataset.len())
        .map(|i| physics.then(|| dataset.context(i)))
        .collect();
    let target_norm = &dataset.meta.target_norm;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order = indices.to_vec();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = EpochLoss {
            total: 0.0,
            mse: 0.0,
            pbc: 0.0,
            constraint: 0.0,
        };
        for batch in order.chunks(cfg.batch_size) {
            let inv_n = 1.0 / batch.len() as f64;
            let mut grads = model.zero_gradients();
            // every loss term is a batch mean of per-sample terms, so each
            // sample's gradient is its own gradient scaled by 1/N
            for &i in batch {
                let s = &dataset.samples[i];
                let pred = vec![model.forward(&s.features)?];
                let truth = std::slice::from_ref(&s.targets);
                let (parts, grad) = match &contexts[i] {
                    Some(ctx) => {
                        let l = total_pi_loss(&pred, truth, std::slice::from_ref(ctx), &cfg.weights, target_norm)?;
                        ((l.total, l.mse, l.pbc, l.constraint), l.grad)
                    }
                    None => {
                        let l = mse_loss(&pred, truth)?;
                        ((l.value, l.value, 0.0, 0.0), l.grad)
                    }
                };
                if !parts.0.is_finite() {
                    return Err(Error::Diverged { epoch: epoch + 1, loss: parts.0 });
                }
                sums.total += parts.0;
                sums.mse += parts.1;
                sums.pbc += parts.2;
                sums.constraint += parts.3;
                let g: Vec<f64> = grad[0].iter().map(|v| v * inv_n).collect();
                model.backward_accumulate(&g, &mut grads)?;
            }
            model.sgd_step(&grads, cfg.learning_rate)?;
        }
        if !model.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, loss: f64::NAN });
        }
        let n = order.len() as f64;
        history.epochs.push(EpochLoss {
            total: sums.total / n,
            mse: sums.mse / n,
            pbc: sums.pbc / n,
            constraint: sums.constraint / n,
        });
    }
    Ok((model, history))
}

/// R² is undefined when the truth column has zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RSquared {
    Value(f64),
    Undefined,
}

impl RSquared {
    pub fn value(self) -> Option<f64> {
        match self {
            RSquared::Value(v) => Some(v),
            RSquared::Undefined => None,
        }
    }
}

impl fmt::Display for RSquared {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RSquared::Value(v) => write!(f, "{v}"),
            RSquared::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for RSquared {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RSquared::Value(v) => s.serialize_f64(*v),
            RSquared::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for RSquared {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(RSquared::Value(v)),
            Raw::Text(t) if t == "undefined" => Ok(RSquared::Undefined),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid R² {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub mse: f64,
    pub mae: f64,
    pub r2: RSquared,
}

/// MSE, MAE and R² of one column.
pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<Regression> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::shape(format!("metric columns of length {} and {}", truth.len(), pred.len())));
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let (mut ss_res, mut abs, mut ss_tot) = (0.0, 0.0, 0.0);
    for (&y, &p) in truth.iter().zip(pred) {
        ss_res += (y - p) * (y - p);
        abs += (y - p).abs();
        ss_tot += (y - mean) * (y - mean);
    }
    let r2 = if ss_tot > 0.0 {
        RSquared::Value(1.0 - ss_res / ss_tot)
    } else {
        RSquared::Undefined
    };
    Ok(Regression {
        mse: ss_res / n,
        mae: abs / n,
        r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: String,
    #[serde(flatten)]
    pub metrics: Regression,
}

/// Test-set quality in physical units (kW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Option<String>,
    pub samples: usize,
    pub targets: Vec<TargetMetrics>,
    pub mean_mse: f64,
    pub mean_mae: f64,
    /// Mean over targets with a defined R².
    pub mean_r2: Option<f64>,
    /// Mean of |sum of predicted setpoints - load|, kW.
    pub mean_balance_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infer_time_ms: Option<f64>,
}

impl MetricsReport {
    pub fn get(&self, target: &str) -> Option<&Regression> {
        self.targets.iter().find(|t| t.target == target).map(|t| &t.metrics)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,mse,mae,r2\n");
        for t in &self.targets {
            out.push_str(&format!("{},{},{},{}\n", t.target, t.metrics.mse, t.metrics.mae, t.metrics.r2));
        }
        let r2 = self.mean_r2.map_or("undefined".to_string(), |v| v.to_string());
        out.push_str(&format!("mean,{},{},{}\n", self.mean_mse, self.mean_mae, r2));
        out
    }
}

/// Denormalised predictions for the given samples.
pub fn predict_physical(model: &Model, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    indices
        .iter()
        .map(|&i| {
            let y = model.predict(&dataset.samples[i].features)?;
            dataset.meta.target_norm.denormalize(&y)
        })
        .collect()
}

pub fn evaluate(model: &Model, dataset: &Dataset, indices: &[usize]) -> Result<MetricsReport> {
    if model.input_size() != N_FEATURES || model.output_size() != N_TARGETS {
        return Err(Error::shape(format!(
            "model maps {} -> {}, dataset needs {N_FEATURES} -> {N_TARGETS}",
            model.input_size(),
            model.output_size()
        )));
    }
    if indices.is_empty() {
        return Err(Error::domain("no evaluation samples"));
    }
    let pred = predict_physical(model, dataset, indices)?;
    let truth: Vec<Vec<f64>> = indices.iter().map(|&i| dataset.raw_targets(i)).collect();
    let mut targets = Vec::with_capacity(N_TARGETS);
    for (j, name) in TARGET_NAMES.iter().enumerate() {
        let y: Vec<f64> = truth.iter().map(|r| r[j]).collect();
        let p: Vec<f64> = pred.iter().map(|r| r[j]).collect();
        targets.push(TargetMetrics {
            target: name.to_string(),
            metrics: regression_metrics(&y, &p)?,
        });
    }
    let k = N_TARGETS as f64;
    let defined: Vec<f64> = targets.iter().filter_map(|t| t.metrics.r2.value()).collect();
    let residual = indices
        .iter()
        .zip(&pred)
        .map(|(&i, p)| (p.iter().sum::<f64>() - dataset.samples[i].raw_load).abs())
        .sum::<f64>()
        / indices.len() as f64;
    Ok(MetricsReport {
        variant: None,
        samples: indices.len(),
        mean_mse: targets.iter().map(|t| t.metrics.mse).sum::<f64>() / k,
        mean_mae: targets.iter().map(|t| t.metrics.mae).sum::<f64>() / k,
        mean_r2: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        mean_balance_residual: residual,
        targets,
        train_time_s: None,
        infer_time_ms: None,
    })
}

pub const DEFAULT_ABLATION_FRACTIONS: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub variant: Variant,
    pub train_samples: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn get(&self, fraction: f64, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.fraction == fraction && r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,variant,train_samples,mean_mse,mean_mae,mean_r2,mean_balance_residual");
        for name in TARGET_NAMES {
            out.push_str(&format!(",{name}_mse,{name}_mae,{name}_r2"));
        }
        out.push('\n');
        for r in &self.rows {
            let m = &r.report;
            let r2 = m.mean_r2.map_or("undefined".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                r.fraction, r.variant, r.train_samples, m.mean_mse, m.mean_mae, r2, m.mean_balance_residual
            ));
            for t in &m.targets {
                out.push_str(&format!(",{},{},{}", t.metrics.mse, t.metrics.mae, t.metrics.r2));
            }
            out.push('\n');
        }
        out
    }
}

/// Trains each variant on the leading `floor(f * N)` samples for every
/// fraction and evaluates all of them on the dataset's test split. The
/// normaliser fitted at generation time is reused throughout.
pub fn ablate_train_size(
    base: &TrainingConfig,
    dataset: &Dataset,
    fractions: &[f64],
    variants: &[Variant],
) -> Result<AblationTable> {
    let n = dataset.len();
    let mut rows = Vec::with_capacity(fractions.len() * variants.len());
    for &f in fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::domain(format!("fraction {f} outside (0, 1)")));
        }
        let k = ((f * n as f64) + 1e-9).floor() as usize;
        let prefix: Vec<usize> = (0..k).collect();
        if k == 0 || prefix.iter().any(|i| dataset.test().binary_search(i).is_ok()) {
            return Err(Error::domain(format!(
                "fraction {f} selects {k} samples, which must be non-empty and disjoint from the test split"
            )));
        }
        for &v in variants {
            let cfg = TrainingConfig { variant: v, ..base.clone() };
            let (model, _) = train_on(&cfg, dataset, &prefix)?;
            let mut report = evaluate(&model, dataset, dataset.test())?;
            report.variant = Some(v.to_string());
            rows.push(AblationRow {
                fraction: f,
                variant: v,
                train_samples: k,
                report,
            });
        }
    }
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MicrogridConfig;
    use crate::datagen::{generate, SplitOptions};

    #[test]
    fn metric_identities() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(m.mae, 1.0 / 3.0);
        assert_eq!(m.mse, 1.0 / 3.0);
        assert_eq!(m.r2, RSquared::Value(0.5));
        let perfect = regression_metrics(&[1.0, 5.0], &[1.0, 5.0]).unwrap();
        assert_eq!((perfect.mse, perfect.mae, perfect.r2), (0.0, 0.0, RSquared::Value(1.0)));
        let mean = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(mean.r2, RSquared::Value(0.0));
        let flat = regression_metrics(&[4.0, 4.0], &[4.0, 5.0]).unwrap();
        assert_eq!(flat.r2, RSquared::Undefined);
        assert!(regression_metrics(&[1.0], &[]).is_err());
    }

    #[test]
    fn r_squared_serialisation() {
        assert_eq!(serde_json::to_string(&RSquared::Undefined).unwrap(), "\"undefined\"");
        assert_eq!(serde_json::to_string(&RSquared::Value(0.5)).unwrap(), "0.5");
        let back: RSquared = serde_json::from_str("\"undefined\"").unwrap();
        assert_eq!(back, RSquared::Undefined);
        assert!(serde_json::from_str::<RSquared>("\"nan\"").is_err());
    }

    #[test]
    fn variant_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("rnn".parse::<Variant>().is_err());
    }

    #[test]
    fn config_overrides_and_validation() {
        let mut cfg = TrainingConfig::new(Variant::PiCnn, 1);
        cfg.apply(&TrainingSection {
            epochs: Some(3),
            lambda_ramp: Some(0.5),
            ..Default::default()
        });
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.weights.ramp_down, 0.5);
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    fn tiny() -> Dataset {
        generate(&MicrogridConfig::default(), 11, 1, 15, SplitOptions::default()).unwrap()
    }

    #[test]
    fn one_epoch_history_and_determinism() {
        let d = tiny();
        let mut cfg = TrainingConfig::new(Variant::PiCnn, 3);
        cfg.epochs = 1;
        let (a, h) = train(&cfg, &d).unwrap();
        assert_eq!(h.len(), 1);
        let (b, h2) = train(&cfg, &d).unwrap();
        assert_eq!(a, b);
        assert_eq!(h, h2);
        let e = h.epochs[0];
        assert!((e.total - (e.mse + e.pbc + e.constraint)).abs() < 1e-12);
    }

    #[test]
    fn dnn_trains_without_physics_terms() {
        let d = tiny();
        let mut cfg = TrainingConfig::new(Variant::Dnn, 3);
        cfg.epochs = 2;
        let (m, h) = train(&cfg, &d).unwrap();
        assert_eq!(m.num_params(), 357);
        assert!(h.epochs.iter().all(|e| e.pbc == 0.0 && e.constraint == 0.0 && e.total == e.mse));
    }

    #[test]
    fn divergence_is_reported() {
        let d = tiny();
        let mut cfg = TrainingConfig::new(Variant::Cnn, 3);
        cfg.epochs = 50;
        cfg.learning_rate = 1e6;
        assert!(matches!(train(&cfg, &d), Err(Error::Diverged { .. })));
    }

    #[test]
    fn evaluate_is_consistent() {
        let d = tiny();
        let mut cfg = TrainingConfig::new(Variant::Cnn, 3);
        cfg.epochs = 2;
        let (m, _) = train(&cfg, &d).unwrap();
        let r = evaluate(&m, &d, d.test()).unwrap();
        assert_eq!(r.targets.len(), 5);
        assert_eq!(r.samples, d.test().len());
        assert!(r.targets.iter().all(|t| t.metrics.mse >= 0.0 && t.metrics.mae >= 0.0));
        assert!(r.to_csv().starts_with("target,mse,mae,r2\np_chp,"));
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("train_time_s"));
        assert_eq!(serde_json::from_str::<MetricsReport>(&json).unwrap(), r);
    }

    #[test]
    fn ablation_shape_and_consistency() {
        let d = tiny();
        let mut cfg = TrainingConfig::new(Variant::Cnn, 3);
        cfg.epochs = 2;
        let t = ablate_train_size(&cfg, &d, &[0.5, 0.8], &[Variant::PiCnn, Variant::Cnn]).unwrap();
        assert_eq!(t.rows.len(), 4);
        let (m, _) = train(&cfg, &d).unwrap();
        let mut r = evaluate(&m, &d, d.test()).unwrap();
        r.variant = Some("cnn".into());
        assert_eq!(t.get(0.8, Variant::Cnn).unwrap().report, r);
        assert!(ablate_train_size(&cfg, &d, &[0.9], &[Variant::Cnn]).is_err());
        assert!(ablate_train_size(&cfg, &d, &[1.0], &[Variant::Cnn]).is_err());
    }
}
