use crate::error::{Error, Result};

use super::{DispatchInstance, DispatchSolution};

const MAX_UNITS: usize = 4;

/// Exhaustive grid search over allocations, used to cross-check the price
/// search.
///
/// Each unit's effective interval is sampled at `lo + k * grid_step`. Every
/// combination whose total lies strictly within `grid_step` of the load is a candidate
/// and the cheapest wins. Because the objective is separable, the search is
/// tabulated over the running grid-index sum instead of listing combinations
/// one by one; the set of candidates and the minimum are the same.
pub fn brute_force_solve(inst: &DispatchInstance, grid_step: f64) -> Result<DispatchSolution> {
    if inst.units.len() > MAX_UNITS {
        return Err(Error::domain(format!(
            "grid search supports at most {MAX_UNITS} units, got {}",
            inst.units.len()
        )));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::domain("grid step must be positive"));
    }

    let points: Vec<usize> = inst
        .units
        .iter()
        .map(|u| ((u.eff_hi() - u.eff_lo()) / grid_step + 1e-9).floor() as usize + 1)
        .collect();
    let span: usize = points.iter().map(|m| m - 1).sum::<usize>() + 1;
    if span > 50_000_000 {
        return Err(Error::domain("grid too fine for exhaustive search"));
    }

    // prev[s]: cheapest cost of the units so far using grid index sum s;
    // choice[u][s]: the grid index unit u took to reach s.
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(inst.units.len());
    let mut reach = 1usize;
    let mut prev = vec![0.0f64];
    for (u, unit) in inst.units.iter().enumerate() {
        let costs: Vec<f64> = (0..points[u])
            .map(|k| unit.cost_at(unit.eff_lo() + k as f64 * grid_step))
            .collect();
        let next_reach = reach + points[u] - 1;
        let mut cur = vec![f64::INFINITY; next_reach];
        let mut pick = vec![0u32; next_reach];
        for (s, &base) in prev.iter().enumerate().take(reach) {
            if !base.is_finite() {
                continue;
            }
            for (k, &c) in costs.iter().enumerate() {
                let v = base + c;
                if v < cur[s + k] {
                    cur[s + k] = v;
                    pick[s + k] = k as u32;
                }
            }
        }
        choice.push(pick);
        prev = cur;
        reach = next_reach;
    }

    let base = inst.total_lo();
    let window = grid_step * (1.0 - 1e-9);
    let mut winner: Option<(usize, f64)> = None;
    for (s, &cost) in prev.iter().enumerate().take(reach) {
        let total = base + s as f64 * grid_step;
        if (total - inst.load).abs() < window && cost.is_finite() && winner.is_none_or(|(_, c)| cost < c) {
            winner = Some((s, cost));
        }
    }
    let (mut s, _) = winner.ok_or(Error::Infeasible {
        load: inst.load,
        lower: inst.total_lo(),
        upper: inst.total_hi(),
        gap: f64::NAN,
    })?;

    let mut setpoints = vec![0.0; inst.units.len()];
    for u in (0..inst.units.len()).rev() {
        let k = choice[u][s] as usize;
        setpoints[u] = inst.units[u].eff_lo() + k as f64 * grid_step;
        s -= k;
    }
    Ok(DispatchSolution::assemble(inst, setpoints, f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::super::test_util::{linear, quad};
    use super::super::{solve_single, DEFAULT_BALANCE_TOL};
    use super::*;

    /// Literal nested enumeration for cross-checking the tabulated search.
    fn enumerate(inst: &DispatchInstance, step: f64) -> Option<f64> {
        let grids: Vec<Vec<f64>> = inst
            .units
            .iter()
            .map(|u| {
                let m = ((u.eff_hi() - u.eff_lo()) / step + 1e-9).floor() as usize;
                (0..=m).map(|k| u.eff_lo() + k as f64 * step).collect()
            })
            .collect();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; grids.len()];
        loop {
            let alloc: Vec<f64> = idx.iter().zip(&grids).map(|(&k, g)| g[k]).collect();
            let total: f64 = alloc.iter().sum();
            if (total - inst.load).abs() < step * (1.0 - 1e-9) {
                let c = inst.cost_of(&alloc);
                if best.is_none_or(|b| c < b) {
                    best = Some(c);
                }
            }
            let mut d = 0;
            loop {
                if d == idx.len() {
                    return best;
                }
                idx[d] += 1;
                if idx[d] < grids[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    #[test]
    fn tabulated_search_equals_literal_enumeration() {
        let inst = DispatchInstance {
            load: 4.3,
            units: vec![quad(1.0, 0.5, 0.0, 3.0), quad(2.0, 0.3, 0.5, 2.5), linear(1.5, 0.0, 1.2)],
        };
        let fast = brute_force_solve(&inst, 0.1).unwrap();
        let slow = enumerate(&inst, 0.1).unwrap();
        assert!((fast.total_cost - slow).abs() < 1e-12);
    }

    #[test]
    fn single_unit_on_grid_point_matches_price_search() {
        let inst = DispatchInstance {
            load: 7.0,
            units: vec![quad(1.0, 0.5, 0.0, 20.0)],
        };
        let grid = brute_force_solve(&inst, 0.5).unwrap();
        let exact = solve_single(&inst, DEFAULT_BALANCE_TOL).unwrap();
        assert!((grid.setpoints[0] - 7.0).abs() < 1e-12);
        assert!((grid.total_cost - exact.total_cost).abs() < 1e-9);
    }

    #[test]
    fn two_unit_example_within_lipschitz_bound() {
        let inst = DispatchInstance {
            load: 10.0,
            units: vec![quad(1.0, 0.5, 0.0, 20.0), quad(2.0, 0.5, 0.0, 20.0)],
        };
        let step = 0.01;
        let grid = brute_force_solve(&inst, step).unwrap();
        let exact = solve_single(&inst, DEFAULT_BALANCE_TOL).unwrap();
        let lipschitz = 2.0 + 20.0;
        assert!((grid.total_cost - exact.total_cost).abs() <= lipschitz * step);
    }

    #[test]
    fn empty_feasible_set() {
        let inst = DispatchInstance {
            load: 50.0,
            units: vec![quad(1.0, 0.5, 0.0, 2.0), quad(1.0, 0.5, 0.0, 3.0)],
        };
        assert!(matches!(brute_force_solve(&inst, 0.1), Err(Error::Infeasible { .. })));
        let too_many = DispatchInstance {
            load: 1.0,
            units: vec![quad(1.0, 0.5, 0.0, 2.0); 5],
        };
        assert!(brute_force_solve(&too_many, 0.1).is_err());
    }
}
