//! Training objectives: data-fit MSE plus physics penalties for power balance,
//! generation bounds and ramp limits.
//!
//! Each inequality constraint `g(P) <= 0` is written with a slack `s >= 0` as
//! `g(P) + s = 0` and penalised by `(g(P) + s)^2`. The penalty is minimised over
//! the slack in closed form: `s = max(0, -g)`, leaving the hinge
//! `max(0, g(P))^2`. No slack is stored or trained.
//!
//! Penalties are evaluated on physical (kW) predictions. [`total_pi_loss`]
//! takes normalised network outputs and chains the penalty gradients through
//! the target scaling.

use serde::{Deserialize, Serialize};

use crate::datagen::Normalizer;
use crate::error::{Error, Result};
use crate::grid::GeneratorKind;

/// Penalty multipliers. All must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    /// Power balance.
    pub pbc: f64,
    /// Conventional lower bound.
    pub lower: f64,
    /// Conventional upper bound.
    pub upper: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub pv_min: f64,
    pub pv_max: f64,
    pub wind_min: f64,
    pub wind_max: f64,
}

impl PenaltyWeights {
    pub const DEFAULT_PBC: f64 = 1e-3;
    pub const DEFAULT_CONSTRAINT: f64 = 1e-4;

    pub fn zero() -> Self {
        Self::uniform(0.0, 0.0, 0.0)
    }

    /// `pbc` for balance, `bounds` for every bound term, `ramp` for both ramp terms.
    pub fn uniform(pbc: f64, bounds: f64, ramp: f64) -> Self {
        PenaltyWeights {
            pbc,
            lower: bounds,
            upper: bounds,
            ramp_up: ramp,
            ramp_down: ramp,
            pv_min: bounds,
            pv_max: bounds,
            wind_min: bounds,
            wind_max: bounds,
        }
    }

    fn all(&self) -> [f64; 9] {
        [
            self.pbc,
            self.lower,
            self.upper,
            self.ramp_up,
            self.ramp_down,
            self.pv_min,
            self.pv_max,
            self.wind_min,
            self.wind_max,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.all().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain(format!("penalty weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn uses_ramps(&self) -> bool {
        self.ramp_up > 0.0 || self.ramp_down > 0.0
    }
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_PBC, Self::DEFAULT_CONSTRAINT, Self::DEFAULT_CONSTRAINT)
    }
}

/// Physical quantities the penalties of one sample are measured against.
/// Per-unit vectors are in prediction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintContext {
    pub load: f64,
    pub kinds: Vec<GeneratorKind>,
    /// Effective lower/upper bounds, already multiplied by commitment.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub committed: Vec<bool>,
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
    /// Setpoints and commitment of the previous step, if known.
    pub prev: Option<Vec<f64>>,
    pub prev_committed: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Gradient with respect to each prediction, same shape as the batch.
    pub grad: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiLoss {
    pub total: f64,
    pub mse: f64,
    pub pbc: f64,
    pub constraint: f64,
    /// Gradient of `total` with respect to the normalised predictions.
    pub grad: Vec<Vec<f64>>,
}

fn check_batch(pred: &[Vec<f64>], other: usize, what: &str) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    if pred.len() != other {
        return Err(Error::shape(format!("{} predictions but {other} {what}", pred.len())));
    }
    Ok(())
}

/// `(1/N) sum_i ||y_i - y_p||^2`, summed over outputs and averaged over the batch.
pub fn mse_loss(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<LossValue> {
    check_batch(pred, truth.len(), "targets")?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, y) in pred.iter().zip(truth) {
        if p.len() != y.len() {
            return Err(Error::shape(format!("prediction arity {} vs target arity {}", p.len(), y.len())));
        }
        let mut g = Vec::with_capacity(p.len());
        for (&pj, &yj) in p.iter().zip(y) {
            let d = pj - yj;
            value += d * d;
            g.push(2.0 * d / n);
        }
        grad.push(g);
    }
    Ok(LossValue { value: value / n, grad })
}

/// `lambda1 * mean_i (sum_units P - load)^2` on physical predictions.
pub fn pbc_loss(pred: &[Vec<f64>], ctx: &[ConstraintContext], lambda1: f64) -> Result<LossValue> {
    check_batch(pred, ctx.len(), "contexts")?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, c) in pred.iter().zip(ctx) {
        let r: f64 = p.iter().sum::<f64>() - c.load;
        value += r * r;
        grad.push(vec![2.0 * lambda1 * r / n; p.len()]);
    }
    Ok(LossValue {
        value: lambda1 * value / n,
        grad,
    })
}

/// Hinge penalties for bounds and ramps on physical predictions.
///
/// Each term is `weight * mean_i sum_units max(0, excess)^2`.
pub fn constraint_loss(pred: &[Vec<f64>], ctx: &[ConstraintContext], w: &PenaltyWeights) -> Result<LossValue> {
    check_batch(pred, ctx.len(), "contexts")?;
    w.validate()?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, c) in pred.iter().zip(ctx) {
        if p.len() != c.kinds.len() {
            return Err(Error::shape(format!("prediction arity {} vs {} units in context", p.len(), c.kinds.len())));
        }
        let mut g = vec![0.0; p.len()];
        let mut hinge = |weight: f64, excess: f64, j: usize, sign: f64| {
            if weight > 0.0 && excess > 0.0 {
                value += weight * excess * excess;
                g[j] += sign * 2.0 * weight * excess / n;
            }
        };
        let ramps = if w.uses_ramps() {
            let prev = c.prev.as_ref().ok_or_else(|| {
                Error::State("ramp penalties need the previous step's setpoints".into())
            })?;
            let prev_on = c.prev_committed.clone().unwrap_or_else(|| c.committed.clone());
            Some((prev, prev_on))
        } else {
            None
        };
        for (j, &pj) in p.iter().enumerate() {
            let (w_lo, w_hi) = match c.kinds[j] {
                GeneratorKind::Pv => (w.pv_min, w.pv_max),
                GeneratorKind::Wind => (w.wind_min, w.wind_max),
                _ => (w.lower, w.upper),
            };
            hinge(w_lo, c.lower[j] - pj, j, -1.0);
            hinge(w_hi, pj - c.upper[j], j, 1.0);
            if let (Some((prev, prev_on)), true) = (&ramps, c.kinds[j].is_conventional()) {
                let u_prev = if prev_on[j] { 1.0 } else { 0.0 };
                let u_now = if c.committed[j] { 1.0 } else { 0.0 };
                hinge(w.ramp_up, pj - prev[j] - c.ramp_up[j] * u_prev, j, 1.0);
                hinge(w.ramp_down, prev[j] - pj - c.ramp_down[j] * u_now, j, -1.0);
            }
        }
        grad.push(g);
    }
    Ok(LossValue { value: value / n, grad })
}

/// MSE on normalised outputs plus balance and constraint penalties on their
/// physical values.
pub fn total_pi_loss(
    pred: &[Vec<f64>],
    truth: &[Vec<f64>],
    ctx: &[ConstraintContext],
    w: &PenaltyWeights,
    targets: &Normalizer,
) -> Result<PiLoss> {
    let mse = mse_loss(pred, truth)?;
    let mut grad = mse.grad;
    let penalised = w.all().iter().any(|&x| x > 0.0);
    if !penalised {
        return Ok(PiLoss {
            total: mse.value,
            mse: mse.value,
            pbc: 0.0,
            constraint: 0.0,
            grad,
        });
    }
    let physical: Vec<Vec<f64>> = pred.iter().map(|p| targets.denormalize(p)).collect::<Result<_>>()?;
    let pbc = pbc_loss(&physical, ctx, w.pbc)?;
    let con = constraint_loss(&physical, ctx, w)?;
    for (i, g) in grad.iter_mut().enumerate() {
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += targets.scale(j) * (pbc.grad[i][j] + con.grad[i][j]);
        }
    }
    Ok(PiLoss {
        total: mse.value + pbc.value + con.value,
        mse: mse.value,
        pbc: pbc.value,
        constraint: con.value,
        grad,
    })
}
