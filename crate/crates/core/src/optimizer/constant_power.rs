//! Constant-power scheme: the cognitive transmitter uses one fixed power and
//! both links adapt their modes to the exact SNIR including noise.

use super::{Averages, Feasibility, ProblemSpec};
use crate::amc::Thresholds;
use crate::error::Result;
use crate::fading::{GainModel, RatioLaw};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPowerSolution {
    pub power: f64,
    pub averages: Averages,
}

/// `sum_n (R_n - R_{n-1}) P(gamma >= g_n)`.
fn average_rate(law: &RatioLaw, th: &Thresholds) -> f64 {
    let r = th.rates();
    (1..r.len()).map(|n| (r[n] - r[n - 1]) * law.ccdf(th.get(n))).sum()
}

/// Link averages at cognitive power `p2`.
pub fn constant_power_averages(
    model: &GainModel,
    primary: &Thresholds,
    cognitive: &Thresholds,
    p1: f64,
    p2: f64,
) -> Result<Averages> {
    let n0 = model.noise_power();
    let l1 = RatioLaw::link(p1, p2, n0, model.mean_s11(), model.mean_s21())?;
    let k2 = if p2 > 0.0 {
        let l2 = RatioLaw::link(p2, p1, n0, model.mean_s22(), model.mean_s12())?;
        average_rate(&l2, cognitive)
    } else {
        0.0
    };
    Ok(Averages {
        k1: average_rate(&l1, primary),
        k2,
        p2,
    })
}

/// Largest power in `[0, P2max]` keeping the primary average at `E1`.
/// The primary average falls and the cognitive average rises with power,
/// so this maximizes the cognitive rate.
pub fn constant_power_optimize(
    model: &GainModel,
    primary: &Thresholds,
    cognitive: &Thresholds,
    spec: &ProblemSpec,
) -> Result<Feasibility<ConstantPowerSolution>> {
    let p1 = spec.primary_power;
    let at = |p2: f64| constant_power_averages(model, primary, cognitive, p1, p2);
    let silent = at(0.0)?;
    if !spec.rate_ok(silent.k1) {
        return Ok(Feasibility::Infeasible {
            reason: format!(
                "primary average {:.6} with a silent cognitive link is below E1 {:.6}",
                silent.k1, spec.required_primary_rate
            ),
        });
    }
    let full = at(spec.power_budget)?;
    if spec.rate_ok(full.k1) {
        return Ok(Feasibility::Feasible(ConstantPowerSolution {
            power: spec.power_budget,
            averages: full,
        }));
    }
    let (mut lo, mut hi) = (0.0, spec.power_budget);
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if spec.rate_ok(at(mid)?.k1) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Feasibility::Feasible(ConstantPowerSolution {
        power: lo,
        averages: at(lo)?,
    }))
}
