//! Generator fleet description plus the cost and renewable conversion physics.
//!
//! Units are kW for power and currency-units per hour for cost throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Chp,
    Ng,
    Ds,
    Pv,
    Wind,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        GeneratorKind::Chp,
        GeneratorKind::Ng,
        GeneratorKind::Ds,
        GeneratorKind::Pv,
        GeneratorKind::Wind,
    ];

    pub fn is_conventional(self) -> bool {
        matches!(self, GeneratorKind::Chp | GeneratorKind::Ng | GeneratorKind::Ds)
    }

    pub fn is_renewable(self) -> bool {
        !self.is_conventional()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Chp => "chp",
            GeneratorKind::Ng => "ng",
            GeneratorKind::Ds => "ds",
            GeneratorKind::Pv => "pv",
            GeneratorKind::Wind => "wind",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `alpha + beta * p + gamma * p^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl QuadraticCost {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        QuadraticCost { alpha, beta, gamma }
    }
}

/// Linear cost of a renewable unit. The coefficient is the annualized
/// investment plus maintenance per kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCost {
    pub r_interest: f64,
    pub lifetime_years: u32,
    pub invest_per_kw: f64,
    pub maint_per_kw: f64,
}

impl LinearCost {
    /// A cost whose coefficient is exactly `k` (no investment component).
    pub fn with_coeff(k: f64) -> Self {
        LinearCost {
            r_interest: 0.0,
            lifetime_years: 1,
            invest_per_kw: 0.0,
            maint_per_kw: k,
        }
    }

    pub fn k_coeff(&self) -> f64 {
        annuity(self.r_interest, self.lifetime_years) * self.invest_per_kw + self.maint_per_kw
    }
}

/// Annuitization constant `r / (1 - (1 + r)^-N)`; tends to `1/N` as `r -> 0`.
pub fn annuity(r: f64, years: u32) -> f64 {
    let n = f64::from(years.max(1));
    if r.abs() < 1e-12 {
        return 1.0 / n;
    }
    r / (1.0 - (1.0 + r).powf(-n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CostModel {
    Quadratic(QuadraticCost),
    Linear(LinearCost),
}

impl CostModel {
    /// Cost at `p` without domain checks.
    pub fn value(&self, p: f64) -> f64 {
        match self {
            CostModel::Quadratic(q) => q.alpha + q.beta * p + q.gamma * p * p,
            CostModel::Linear(l) => l.k_coeff() * p,
        }
    }

    /// Derivative of [`CostModel::value`] without domain checks.
    pub fn marginal(&self, p: f64) -> f64 {
        match self {
            CostModel::Quadratic(q) => q.beta + 2.0 * q.gamma * p,
            CostModel::Linear(l) => l.k_coeff(),
        }
    }

    /// Fixed cost incurred whenever the unit is committed.
    pub fn fixed(&self) -> f64 {
        match self {
            CostModel::Quadratic(q) => q.alpha,
            CostModel::Linear(_) => 0.0,
        }
    }
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default)]
    pub name: String,
    pub kind: GeneratorKind,
    pub cost: CostModel,
    pub p_min: f64,
    pub p_max: f64,
    /// kW per step. Only meaningful for conventional units.
    #[serde(default = "infinite")]
    pub ramp_up: f64,
    #[serde(default = "infinite")]
    pub ramp_down: f64,
    #[serde(default = "yes")]
    pub committed: bool,
}

impl GeneratorSpec {
    pub fn conventional(kind: GeneratorKind, cost: QuadraticCost, p_min: f64, p_max: f64) -> Self {
        GeneratorSpec {
            name: kind.as_str().to_string(),
            kind,
            cost: CostModel::Quadratic(cost),
            p_min,
            p_max,
            ramp_up: f64::INFINITY,
            ramp_down: f64::INFINITY,
            committed: true,
        }
    }

    pub fn renewable(kind: GeneratorKind, cost: LinearCost, p_max: f64) -> Self {
        GeneratorSpec {
            name: kind.as_str().to_string(),
            kind,
            cost: CostModel::Linear(cost),
            p_min: 0.0,
            p_max,
            ramp_up: f64::INFINITY,
            ramp_down: f64::INFINITY,
            committed: true,
        }
    }

    pub fn with_ramps(mut self, up: f64, down: f64) -> Self {
        self.ramp_up = up;
        self.ramp_down = down;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let label = if self.name.is_empty() { self.kind.as_str() } else { &self.name };
        if !(self.p_min.is_finite() && self.p_max.is_finite()) {
            return Err(Error::domain(format!("{label}: bounds must be finite")));
        }
        if !(0.0 <= self.p_min && self.p_min <= self.p_max) {
            return Err(Error::domain(format!(
                "{label}: need 0 <= p_min <= p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if !(self.ramp_up >= 0.0 && self.ramp_down >= 0.0) {
            return Err(Error::domain(format!("{label}: ramp limits must be non-negative")));
        }
        match (&self.cost, self.kind.is_conventional()) {
            (CostModel::Quadratic(q), true) => {
                if !(q.alpha.is_finite() && q.beta.is_finite() && q.gamma.is_finite()) {
                    return Err(Error::domain(format!("{label}: non-finite cost coefficient")));
                }
                if q.gamma < 0.0 {
                    return Err(Error::domain(format!("{label}: gamma must be >= 0")));
                }
            }
            (CostModel::Linear(l), false) => {
                let k = l.k_coeff();
                if !(k.is_finite() && k > 0.0) {
                    return Err(Error::domain(format!("{label}: k_coeff must be positive, got {k}")));
                }
            }
            (_, true) => {
                return Err(Error::domain(format!("{label}: conventional units need a quadratic cost")))
            }
            (_, false) => {
                return Err(Error::domain(format!("{label}: renewable units need a linear cost")))
            }
        }
        Ok(())
    }
}

/// Operating cost of `spec` producing `p` kW.
pub fn eval_cost(spec: &GeneratorSpec, p: f64) -> Result<f64> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::domain(format!("power must be finite and >= 0, got {p}")));
    }
    Ok(spec.cost.value(p))
}

pub fn marginal_cost(spec: &GeneratorSpec, p: f64) -> Result<f64> {
    if !(spec.p_min <= p && p <= spec.p_max) {
        return Err(Error::domain(format!(
            "power {p} outside [{}, {}]",
            spec.p_min, spec.p_max
        )));
    }
    Ok(spec.cost.marginal(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvPhysics {
    pub p_stc: f64,
    pub i_stc: f64,
    #[serde(default = "PvPhysics::default_k_t")]
    pub k_t: f64,
    pub t_ref: f64,
}

impl PvPhysics {
    pub const DEFAULT_K_T: f64 = -0.0047;

    fn default_k_t() -> f64 {
        Self::DEFAULT_K_T
    }

    pub fn new(p_stc: f64) -> Self {
        PvPhysics {
            p_stc,
            i_stc: 1000.0,
            k_t: Self::DEFAULT_K_T,
            t_ref: 25.0,
        }
    }
}

/// Available PV output for the given irradiance (W/m²) and cell temperature (°C).
/// Never negative.
pub fn pv_power(phys: &PvPhysics, irradiance: f64, temp: f64) -> Result<f64> {
    if !(irradiance >= 0.0) || !irradiance.is_finite() {
        return Err(Error::domain(format!("irradiance must be >= 0, got {irradiance}")));
    }
    if !temp.is_finite() {
        return Err(Error::domain("temperature must be finite"));
    }
    if !(phys.i_stc > 0.0) {
        return Err(Error::domain("i_stc must be positive"));
    }
    let rho = phys.p_stc * irradiance / phys.i_stc;
    Ok((rho * (1.0 + phys.k_t * (phys.t_ref - temp))).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindPhysics {
    pub p_rated: f64,
    pub v_cut_in: f64,
    pub v_rated: f64,
    pub v_cut_off: f64,
}

impl WindPhysics {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.v_cut_in && self.v_cut_in < self.v_rated && self.v_rated < self.v_cut_off) {
            return Err(Error::domain(format!(
                "wind speeds must satisfy 0 < cut-in < rated < cut-off, got {} / {} / {}",
                self.v_cut_in, self.v_rated, self.v_cut_off
            )));
        }
        Ok(())
    }
}

/// Piecewise turbine curve: linear ramp from cut-in to rated speed, flat at
/// rated power up to and including cut-off, zero outside.
pub fn wind_power(phys: &WindPhysics, v: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("wind speed must be >= 0, got {v}")));
    }
    phys.validate()?;
    let p = if v < phys.v_cut_in || v > phys.v_cut_off {
        0.0
    } else if v <= phys.v_rated {
        phys.p_rated * (v - phys.v_cut_in) / (phys.v_rated - phys.v_cut_in)
    } else {
        phys.p_rated
    };
    Ok(p)
}
