use crate::error::{Error, Result};

use super::{solve_single, DispatchInstance, DispatchSolution, DEFAULT_BALANCE_TOL};

/// Enumeration cap on conventional units (2^12 single solves).
pub const MAX_ENUMERATED_UNITS: usize = 12;

/// Least-cost dispatch over every on/off combination of the conventional
/// units. Renewables stay available up to their caps.
///
/// Ties on cost go to the combination with fewer committed units, then to the
/// lexicographically smallest list of committed unit indices.
pub fn solve_with_commitment(inst: &DispatchInstance) -> Result<DispatchSolution> {
    let switchable: Vec<usize> = (0..inst.units.len())
        .filter(|&i| inst.units[i].kind.is_conventional())
        .collect();
    if switchable.len() > MAX_ENUMERATED_UNITS {
        return Err(Error::domain(format!(
            "{} conventional units exceed the enumeration limit of {MAX_ENUMERATED_UNITS}",
            switchable.len()
        )));
    }

    let mut best: Option<(DispatchSolution, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << switchable.len()) {
        let mut trial = inst.clone();
        let mut on = Vec::new();
        for (bit, &i) in switchable.iter().enumerate() {
            let committed = mask & (1 << bit) != 0;
            trial.units[i].committed = committed;
            if committed {
                on.push(i);
            }
        }
        let sol = match solve_single(&trial, DEFAULT_BALANCE_TOL) {
            Ok(sol) => sol,
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        let better = match &best {
            None => true,
            Some((incumbent, inc_on)) => {
                let tie = 1e-9 * (1.0 + incumbent.total_cost.abs());
                if sol.total_cost < incumbent.total_cost - tie {
                    true
                } else if sol.total_cost > incumbent.total_cost + tie {
                    false
                } else {
                    (on.len(), &on) < (inc_on.len(), inc_on)
                }
            }
        };
        if better {
            best = Some((sol, on));
        }
    }
    best.map(|(sol, _)| sol)
        .ok_or(Error::NoFeasibleCommitment { load: inst.load })
}
