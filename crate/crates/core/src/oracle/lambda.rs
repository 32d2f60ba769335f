use crate::error::{Error, Result};
use crate::grid::CostModel;

use super::{DispatchInstance, DispatchSolution, DispatchUnit};

pub const MAX_BISECTION_ITERS: usize = 200;

/// How a unit's output responds to the price.
#[derive(Debug, Clone, Copy)]
enum Response {
    /// Strictly convex quadratic: output follows `(lambda - beta) / (2 gamma)`.
    Smooth { beta: f64, gamma: f64 },
    /// Constant marginal cost `k`: all-or-nothing around `lambda = k`.
    Step { k: f64 },
}

impl Response {
    fn of(unit: &DispatchUnit) -> Self {
        match unit.cost {
            CostModel::Quadratic(q) if q.gamma > 0.0 => Response::Smooth {
                beta: q.beta,
                gamma: q.gamma,
            },
            CostModel::Quadratic(q) => Response::Step { k: q.beta },
            CostModel::Linear(l) => Response::Step { k: l.k_coeff() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tie {
    Low,
    High,
}

fn unit_output(resp: Response, lo: f64, hi: f64, lambda: f64, tie: Tie) -> f64 {
    match resp {
        Response::Smooth { beta, gamma } => ((lambda - beta) / (2.0 * gamma)).clamp(lo, hi),
        Response::Step { k } => {
            if lambda < k {
                lo
            } else if lambda > k {
                hi
            } else if tie == Tie::Low {
                lo
            } else {
                hi
            }
        }
    }
}

struct Fleet {
    resp: Vec<Response>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Fleet {
    fn supply(&self, lambda: f64, tie: Tie) -> f64 {
        (0..self.resp.len())
            .map(|i| unit_output(self.resp[i], self.lo[i], self.hi[i], lambda, tie))
            .sum()
    }
}

/// Least-cost single-timestep dispatch by bisection on the shared marginal
/// price `lambda`.
///
/// Units with a constant marginal cost equal to the final price split the
/// remaining balance equally (water-filled against their bounds).
pub fn solve_single(inst: &DispatchInstance, balance_tol: f64) -> Result<DispatchSolution> {
    if !(balance_tol > 0.0) {
        return Err(Error::domain("balance tolerance must be positive"));
    }
    inst.check_feasible(balance_tol)?;

    // Uncommitted units are fixed at zero and take no part in the search.
    let active: Vec<usize> = (0..inst.units.len())
        .filter(|&i| inst.units[i].committed && inst.units[i].eff_hi() > inst.units[i].eff_lo())
        .collect();
    let mut setpoints: Vec<f64> = inst.units.iter().map(|u| u.eff_lo()).collect();
    if active.is_empty() {
        return Ok(DispatchSolution::assemble(inst, setpoints, 0.0));
    }
    let fixed: f64 = (0..inst.units.len())
        .filter(|i| !active.contains(i))
        .map(|i| setpoints[i])
        .sum();
    let target = inst.load - fixed;
    let fleet = Fleet {
        resp: active.iter().map(|&i| Response::of(&inst.units[i])).collect(),
        lo: active.iter().map(|&i| inst.units[i].eff_lo()).collect(),
        hi: active.iter().map(|&i| inst.units[i].eff_hi()).collect(),
    };

    let mut low = 0.0f64;
    let mut high = f64::NEG_INFINITY;
    for &i in &active {
        let u = &inst.units[i];
        low = low.min(u.cost.marginal(u.eff_lo()));
        high = high.max(u.cost.marginal(u.eff_hi()));
    }
    if high <= low {
        high = low + 1.0;
    }

    let mut lambda = f64::NAN;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (low + high);
        if fleet.supply(mid, Tie::High) < target - balance_tol {
            low = mid;
        } else if fleet.supply(mid, Tie::Low) > target + balance_tol {
            high = mid;
        } else {
            lambda = mid;
            break;
        }
        // The bracket has collapsed onto a jump in aggregate supply.
        if high - low <= 4.0 * f64::EPSILON * low.abs().max(high.abs()).max(1.0) {
            lambda = 0.5 * (low + high);
            break;
        }
    }
    if lambda.is_nan() {
        return Err(Error::Numerical(format!(
            "price bisection did not converge in {MAX_BISECTION_ITERS} iterations"
        )));
    }

    let (out, lambda) = settle(&fleet, target, lambda, balance_tol);
    for (slot, &i) in active.iter().enumerate() {
        setpoints[i] = out[slot];
    }
    let sol = DispatchSolution::assemble(inst, setpoints, lambda);
    if sol.balance_residual.abs() > balance_tol {
        return Err(Error::Numerical(format!(
            "balance residual {} kW exceeds tolerance {balance_tol} kW",
            sol.balance_residual
        )));
    }
    Ok(sol)
}

/// Turns a converged price into an allocation meeting `target`.
fn settle(fleet: &Fleet, target: f64, lambda: f64, tol: f64) -> (Vec<f64>, f64) {
    let n = fleet.resp.len();
    let window = 1e-9 * (1.0 + lambda.abs());
    let tied: Vec<usize> = (0..n)
        .filter(|&i| matches!(fleet.resp[i], Response::Step { k } if (k - lambda).abs() <= window))
        .collect();

    if !tied.is_empty() {
        let snapped = tied
            .iter()
            .map(|&i| match fleet.resp[i] {
                Response::Step { k } => k,
                Response::Smooth { .. } => unreachable!(),
            })
            .sum::<f64>()
            / tied.len() as f64;
        let mut out: Vec<f64> = (0..n)
            .map(|i| unit_output(fleet.resp[i], fleet.lo[i], fleet.hi[i], snapped, Tie::Low))
            .collect();
        let others: f64 = (0..n).filter(|i| !tied.contains(i)).map(|i| out[i]).sum();
        let residual = target - others;
        let tied_lo: f64 = tied.iter().map(|&i| fleet.lo[i]).sum();
        let tied_hi: f64 = tied.iter().map(|&i| fleet.hi[i]).sum();
        if residual >= tied_lo - tol && residual <= tied_hi + tol {
            water_fill(&tied, &fleet.lo, &fleet.hi, residual, &mut out);
            return (out, snapped);
        }
    }

    // No usable tie: polish the price with a Newton step over interior smooth units.
    let mut lambda = lambda;
    let mut out: Vec<f64> = (0..n)
        .map(|i| unit_output(fleet.resp[i], fleet.lo[i], fleet.hi[i], lambda, Tie::Low))
        .collect();
    for _ in 0..4 {
        let residual = target - out.iter().sum::<f64>();
        if residual.abs() <= 0.25 * tol {
            break;
        }
        let slope: f64 = (0..n)
            .filter_map(|i| match fleet.resp[i] {
                Response::Smooth { gamma, .. } if out[i] > fleet.lo[i] && out[i] < fleet.hi[i] => {
                    Some(1.0 / (2.0 * gamma))
                }
                _ => None,
            })
            .sum();
        if slope <= 0.0 {
            break;
        }
        lambda += residual / slope;
        for i in 0..n {
            if let Response::Smooth { .. } = fleet.resp[i] {
                out[i] = unit_output(fleet.resp[i], fleet.lo[i], fleet.hi[i], lambda, Tie::Low);
            }
        }
    }
    (out, lambda)
}

/// Splits `amount` over `units` starting from their lower bounds, giving each
/// an equal share of the excess and capping at upper bounds.
fn water_fill(units: &[usize], lo: &[f64], hi: &[f64], amount: f64, out: &mut [f64]) {
    let mut order: Vec<usize> = units.to_vec();
    order.sort_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(a.cmp(&b)));
    let mut excess = amount - units.iter().map(|&i| lo[i]).sum::<f64>();
    let mut left = order.len();
    for &i in &order {
        let share = (excess / left as f64).clamp(0.0, hi[i] - lo[i]);
        out[i] = lo[i] + share;
        excess -= share;
        left -= 1;
    }
}
