//! Ground-truth economic dispatch.
//!
//! [`solve_single`] finds the least-cost allocation for one timestep by
//! bisecting on the shared marginal price. [`solve_with_commitment`] wraps it
//! in an on/off enumeration over conventional units, [`solve_horizon`] chains
//! timesteps under ramp limits, and [`brute_force_solve`] is the exhaustive
//! grid search used to check all of the above.

mod brute;
mod commitment;
mod horizon;
mod lambda;

pub use brute::brute_force_solve;
pub use commitment::{solve_with_commitment, MAX_ENUMERATED_UNITS};
pub use horizon::{free_start, ramps_respected, solve_horizon, HorizonOptions, HorizonSolution, StepInput};
pub use lambda::{solve_single, MAX_BISECTION_ITERS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CostModel, GeneratorKind, GeneratorSpec};

/// Balance tolerance used when callers do not pick one, in kW.
pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;

/// One unit as seen by a single-timestep solve. `lo`/`hi` are the bounds that
/// apply while the unit is committed; an uncommitted unit is pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchUnit {
    pub kind: GeneratorKind,
    pub cost: CostModel,
    pub lo: f64,
    pub hi: f64,
    pub committed: bool,
}

impl DispatchUnit {
    pub fn eff_lo(&self) -> f64 {
        if self.committed {
            self.lo
        } else {
            0.0
        }
    }

    pub fn eff_hi(&self) -> f64 {
        if self.committed {
            self.hi
        } else {
            0.0
        }
    }

    /// Operating cost at `p`; zero for an uncommitted unit.
    pub fn cost_at(&self, p: f64) -> f64 {
        if self.committed {
            self.cost.value(p)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchInstance {
    pub load: f64,
    pub units: Vec<DispatchUnit>,
}

impl DispatchInstance {
    /// Builds a single-step instance from a fleet.
    ///
    /// `caps[i]` further limits unit `i`'s upper bound (the available
    /// renewable power; pass `f64::INFINITY` for no cap). When `prev` is
    /// given, conventional units that were committed on the previous step get
    /// their bounds tightened by their ramp limits. A unit starting up (prev
    /// uncommitted) may land anywhere in its static range when `startup_free`.
    pub fn from_fleet(
        fleet: &[GeneratorSpec],
        load: f64,
        caps: &[f64],
        prev: Option<(&[f64], &[bool])>,
        committed: Option<&[bool]>,
        startup_free: bool,
    ) -> Result<Self> {
        if caps.len() != fleet.len() {
            return Err(Error::shape(format!(
                "{} availability caps for {} units",
                caps.len(),
                fleet.len()
            )));
        }
        if !load.is_finite() {
            return Err(Error::domain(format!("load must be finite, got {load}")));
        }
        let mut units = Vec::with_capacity(fleet.len());
        for (i, spec) in fleet.iter().enumerate() {
            let on = committed.map_or(spec.committed, |c| c[i]);
            let cap = caps[i];
            if cap.is_nan() || cap < 0.0 {
                return Err(Error::domain(format!("unit {i}: availability cap {cap} is invalid")));
            }
            let mut hi = spec.p_max.min(cap);
            let mut lo = spec.p_min.min(hi);
            if let (Some((p_prev, on_prev)), true) = (prev, spec.kind.is_conventional()) {
                let was_on = on_prev[i];
                if was_on || !startup_free {
                    lo = lo.max(p_prev[i] - spec.ramp_down);
                    hi = hi.min(p_prev[i] + spec.ramp_up);
                }
            }
            if lo > hi {
                if on {
                    return Err(Error::domain(format!(
                        "unit {i}: ramp-tightened bounds are empty [{lo}, {hi}]"
                    )));
                }
                lo = hi;
            }
            units.push(DispatchUnit {
                kind: spec.kind,
                cost: spec.cost,
                lo,
                hi,
                committed: on,
            });
        }
        Ok(DispatchInstance { load, units })
    }

    pub fn total_lo(&self) -> f64 {
        self.units.iter().map(DispatchUnit::eff_lo).sum()
    }

    pub fn total_hi(&self) -> f64 {
        self.units.iter().map(DispatchUnit::eff_hi).sum()
    }

    pub(crate) fn check_feasible(&self, tol: f64) -> Result<()> {
        let (lower, upper) = (self.total_lo(), self.total_hi());
        let gap = if self.load > upper + tol {
            self.load - upper
        } else if self.load < lower - tol {
            self.load - lower
        } else {
            return Ok(());
        };
        Err(Error::Infeasible {
            load: self.load,
            lower,
            upper,
            gap,
        })
    }

    /// Total cost of an allocation under this instance's commitment.
    pub fn cost_of(&self, setpoints: &[f64]) -> f64 {
        self.units.iter().zip(setpoints).map(|(u, &p)| u.cost_at(p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub setpoints: Vec<f64>,
    pub committed: Vec<bool>,
    pub total_cost: f64,
    /// `sum(setpoints) - load`.
    pub balance_residual: f64,
    /// Shared marginal price. NaN for grid-search solutions, which do not
    /// compute one.
    pub lambda_star: f64,
}

impl DispatchSolution {
    pub(crate) fn assemble(inst: &DispatchInstance, setpoints: Vec<f64>, lambda_star: f64) -> Self {
        let total: f64 = setpoints.iter().sum();
        DispatchSolution {
            total_cost: inst.cost_of(&setpoints),
            balance_residual: total - inst.load,
            committed: inst.units.iter().map(|u| u.committed).collect(),
            setpoints,
            lambda_star,
        }
    }

    /// Largest `|marginal - lambda|` over units strictly inside their bounds.
    pub fn kkt_residual(&self, inst: &DispatchInstance, interior_tol: f64) -> f64 {
        inst.units
            .iter()
            .zip(&self.setpoints)
            .filter(|(u, &p)| u.committed && p > u.eff_lo() + interior_tol && p < u.eff_hi() - interior_tol)
            .map(|(u, &p)| (u.cost.marginal(p) - self.lambda_star).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::grid::{LinearCost, QuadraticCost};

    pub fn quad(beta: f64, gamma: f64, lo: f64, hi: f64) -> DispatchUnit {
        DispatchUnit {
            kind: GeneratorKind::Ng,
            cost: CostModel::Quadratic(QuadraticCost::new(0.0, beta, gamma)),
            lo,
            hi,
            committed: true,
        }
    }

    pub fn quad_alpha(alpha: f64, beta: f64, gamma: f64, lo: f64, hi: f64) -> DispatchUnit {
        DispatchUnit {
            cost: CostModel::Quadratic(QuadraticCost::new(alpha, beta, gamma)),
            ..quad(beta, gamma, lo, hi)
        }
    }

    pub fn linear(k: f64, lo: f64, hi: f64) -> DispatchUnit {
        DispatchUnit {
            kind: GeneratorKind::Pv,
            cost: CostModel::Linear(LinearCost::with_coeff(k)),
            lo,
            hi,
            committed: true,
        }
    }
}
