//! Brute-force reference solver over every assignment of modes to regions.

use rayon::prelude::*;

use super::{policy_averages, Feasibility, Instance, PolicyAssignment, ProblemSpec};
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u64 = 50_000_000;

/// Assignment number `code` read as base-(N+1) digits, region 0 most
/// significant, so numeric order is lexicographic order.
fn decode(code: u64, base: u64, len: usize, out: &mut [usize]) {
    let mut c = code;
    for slot in out[..len].iter_mut().rev() {
        *slot = (c % base) as usize;
        c /= base;
    }
}

/// Maximum-`k2avg` feasible assignment; ties go to the lexicographically
/// smallest assignment. Regions with divergent power stay silent.
pub fn exhaustive_optimize(
    instance: &Instance,
    spec: &ProblemSpec,
    cap: u64,
) -> Result<Feasibility<PolicyAssignment>> {
    let base = instance.modes() as u64 + 1;
    let v0 = instance.len();
    let total = u32::try_from(v0)
        .ok()
        .and_then(|e| base.checked_pow(e))
        .filter(|&t| t <= cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "exhaustive search needs ({base})^{v0} assignments, cap is {cap}"
            ))
        })?;

    let best = (0..total)
        .into_par_iter()
        .fold(
            || (None::<(f64, u64)>, vec![0usize; v0]),
            |(best, mut modes), code| {
                decode(code, base, v0, &mut modes);
                if modes.iter().enumerate().any(|(i, &m)| m > 0 && !instance.eligible(i)) {
                    return (best, modes);
                }
                let avg = match policy_averages(instance, &modes, spec.primary_power) {
                    Ok(a) => a,
                    Err(_) => return (best, modes),
                };
                if !(spec.rate_ok(avg.k1) && spec.power_ok(avg.p2)) {
                    return (best, modes);
                }
                let better = match best {
                    None => true,
                    Some((obj, c)) => avg.k2 > obj || (avg.k2 == obj && code < c),
                };
                (if better { Some((avg.k2, code)) } else { best }, modes)
            },
        )
        .map(|(best, _)| best)
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => {
                    if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                        Some(y)
                    } else {
                        Some(x)
                    }
                }
            },
        );

    match best {
        None => Ok(Feasibility::Infeasible {
            reason: format!("none of the {total} assignments meets both constraints"),
        }),
        Some((_, code)) => {
            let mut modes = vec![0; v0];
            decode(code, base, v0, &mut modes);
            Ok(Feasibility::Feasible(PolicyAssignment::from_modes(
                instance,
                modes,
                spec.primary_power,
                total as usize,
            )?))
        }
    }
}
