//! Interweave baselines: the primary owns a fraction `lambda` of the time
//! at boosted power `P1 / lambda`, and the cognitive link uses the rest
//! without interference.

use crate::amc::Thresholds;
use crate::error::{Error, Result};
use crate::fading::GainModel;
use crate::optimizer::Feasibility;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterweaveScheme {
    ConstantPower,
    AdaptivePower,
}

impl InterweaveScheme {
    pub fn name(self) -> &'static str {
        match self {
            InterweaveScheme::ConstantPower => "interweave-constant",
            InterweaveScheme::AdaptivePower => "interweave-adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterweaveResult {
    pub activity_fraction: f64,
    pub primary_rate: f64,
    pub cognitive_rate: f64,
    pub scheme: InterweaveScheme,
    /// Adaptive scheme only: switching thresholds on `s22 / N0`.
    pub adaptive: Option<AdaptivePower>,
}

/// `sum_n (R_n - R_{n-1}) exp(-g_n / snr_mean)` for an exponential SNR.
fn exponential_link_rate(th: &Thresholds, snr_mean: f64) -> f64 {
    let r = th.rates();
    (1..r.len())
        .map(|n| (r[n] - r[n - 1]) * (-th.get(n) / snr_mean).exp())
        .sum()
}

/// Primary average rate when it transmits a fraction `lambda` of the time.
pub fn interweave_primary_rate(model: &GainModel, primary: &Thresholds, p1: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    lambda * exponential_link_rate(primary, p1 * model.mean_s11() / (lambda * model.noise_power()))
}

/// Smallest `lambda` in `[0, 1]` whose primary rate reaches `e1`.
pub fn solve_activity_fraction(
    model: &GainModel,
    primary: &Thresholds,
    p1: f64,
    e1: f64,
) -> Result<Feasibility<f64>> {
    if !(e1 >= 0.0) {
        return Err(Error::domain(format!("E1 must be >= 0, got {e1}")));
    }
    if e1 == 0.0 {
        return Ok(Feasibility::Feasible(0.0));
    }
    let f = |l: f64| interweave_primary_rate(model, primary, p1, l);
    const GRID: usize = 1000;
    let hit = (1..=GRID).find(|&k| f(k as f64 / GRID as f64) >= e1);
    let Some(k) = hit else {
        return Ok(Feasibility::Infeasible {
            reason: format!("primary rate {:.6} at full activity is below E1 {e1:.6}", f(1.0)),
        });
    };
    let (mut lo, mut hi) = ((k - 1) as f64 / GRID as f64, k as f64 / GRID as f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= e1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Feasibility::Feasible(hi))
}

/// Cognitive average rate at constant power `P2max / (1 - lambda)` while
/// active.
pub fn interweave_constant_power(
    model: &GainModel,
    cognitive: &Thresholds,
    lambda: f64,
    p2max: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda >= 1.0 || p2max <= 0.0 {
        return Ok(0.0);
    }
    let share = 1.0 - lambda;
    Ok(share * exponential_link_rate(cognitive, p2max * model.mean_s22() / (share * model.noise_power())))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::domain(format!("activity fraction must lie in [0, 1], got {lambda}")))
    }
}

/// Single-link rate adaptation with channel-inversion power per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptivePower {
    /// Modes used, increasing.
    pub modes: Vec<usize>,
    /// Lower switching threshold on `s22 / N0` for each used mode.
    pub thresholds: Vec<f64>,
    /// Lagrange multiplier on the power budget.
    pub multiplier: f64,
    /// Average power while active.
    pub power: f64,
    /// Average rate while active.
    pub rate: f64,
}

impl AdaptivePower {
    /// Mode for a channel `s22 / N0 = x`.
    pub fn mode_for(&self, x: f64) -> usize {
        let k = self.thresholds.partition_point(|&t| t <= x);
        if k == 0 {
            0
        } else {
            self.modes[k - 1]
        }
    }
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else {
        // Modified Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Lower convex hull of `(R_n, g_n)` from the origin: the modes worth using
/// and the slopes at which each becomes worthwhile.
fn hull(th: &Thresholds) -> Vec<(usize, f64)> {
    let r = th.rates();
    let g = th.values();
    let mut pts: Vec<usize> = vec![0];
    for n in 1..r.len() {
        while pts.len() >= 2 {
            let a = pts[pts.len() - 2];
            let b = pts[pts.len() - 1];
            let s_ab = (g[b] - g[a]) / (r[b] - r[a]);
            let s_bn = (g[n] - g[b]) / (r[n] - r[b]);
            if s_bn <= s_ab {
                pts.pop();
            } else {
                break;
            }
        }
        pts.push(n);
    }
    pts.windows(2)
        .map(|w| (w[1], (g[w[1]] - g[w[0]]) / (r[w[1]] - r[w[0]])))
        .collect()
}

fn adaptive_at(th: &Thresholds, hull: &[(usize, f64)], mu: f64, mean: f64) -> AdaptivePower {
    let r = th.rates();
    let g = th.values();
    let mut rate = 0.0;
    let mut power = 0.0;
    let mut prev = 0;
    let mut thresholds = Vec::with_capacity(hull.len());
    for &(n, slope) in hull {
        let x = mu * slope;
        rate += (r[n] - r[prev]) * (-x / mean).exp();
        power += (g[n] - g[prev]) * exp_integral_e1(x / mean) / mean;
        thresholds.push(x);
        prev = n;
    }
    AdaptivePower {
        modes: hull.iter().map(|h| h.0).collect(),
        thresholds,
        multiplier: mu,
        power,
        rate,
    }
}

/// Best average rate for one interference-free link with average power
/// `budget`, over channel `s22 / N0` exponential with mean `mean`.
pub fn single_link_adaptive(th: &Thresholds, mean: f64, budget: f64) -> Result<AdaptivePower> {
    if !(mean > 0.0) || !(budget > 0.0) {
        return Err(Error::domain("adaptive power needs positive channel mean and budget"));
    }
    let h = hull(th);
    if h.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(Error::InvalidTable("adaptive power needs positive thresholds".into()));
    }
    // Power falls monotonically with the multiplier.
    let power = |mu: f64| adaptive_at(th, &h, mu, mean).power;
    let (mut lo, mut hi) = (1e-3, 1e3);
    while power(lo) < budget {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Ok(adaptive_at(th, &h, lo, mean));
        }
    }
    while power(hi) > budget {
        hi *= 1e3;
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if power(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(adaptive_at(th, &h, hi, mean))
}

/// Cognitive average rate with per-block power adaptation while active.
pub fn interweave_adaptive_power(
    model: &GainModel,
    cognitive: &Thresholds,
    lambda: f64,
    p2max: f64,
) -> Result<(f64, Option<AdaptivePower>)> {
    check_lambda(lambda)?;
    if lambda >= 1.0 || p2max <= 0.0 {
        return Ok((0.0, None));
    }
    let share = 1.0 - lambda;
    let sol = single_link_adaptive(
        cognitive,
        model.mean_s22() / model.noise_power(),
        p2max / share,
    )?;
    Ok((share * sol.rate, Some(sol)))
}

/// Full interweave evaluation for one requirement `e1`.
pub fn interweave(
    model: &GainModel,
    primary: &Thresholds,
    cognitive: &Thresholds,
    p1: f64,
    e1: f64,
    p2max: f64,
    scheme: InterweaveScheme,
) -> Result<Feasibility<InterweaveResult>> {
    let lambda = match solve_activity_fraction(model, primary, p1, e1)? {
        Feasibility::Feasible(l) => l,
        Feasibility::Infeasible { reason } => return Ok(Feasibility::Infeasible { reason }),
    };
    let (cognitive_rate, adaptive) = match scheme {
        InterweaveScheme::ConstantPower => {
            (interweave_constant_power(model, cognitive, lambda, p2max)?, None)
        }
        InterweaveScheme::AdaptivePower => interweave_adaptive_power(model, cognitive, lambda, p2max)?,
    };
    Ok(Feasibility::Feasible(InterweaveResult {
        activity_fraction: lambda,
        primary_rate: interweave_primary_rate(model, primary, p1, lambda),
        cognitive_rate,
        scheme,
        adaptive,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amc::{AmcTable, BerTarget};

    fn setup() -> (GainModel, Thresholds) {
        let th = AmcTable::default_80211a().thresholds(BerTarget::new(1e-5).unwrap()).unwrap();
        (GainModel::new(1.0, 1.0, 0.03, 0.03, 1e-3).unwrap(), th)
    }

    #[test]
    fn e1_zero_and_full() {
        let (m, th) = setup();
        assert_eq!(solve_activity_fraction(&m, &th, 1.0, 0.0).unwrap(), Feasibility::Feasible(0.0));
        let full = interweave_primary_rate(&m, &th, 1.0, 1.0);
        assert_eq!(solve_activity_fraction(&m, &th, 1.0, full).unwrap(), Feasibility::Feasible(1.0));
        assert!(!solve_activity_fraction(&m, &th, 1.0, full + 1e-6).unwrap().is_feasible());
    }

    #[test]
    fn activity_fraction_meets_e1_with_equality() {
        let (m, th) = setup();
        for e1 in [0.3, 1.0, 2.0, 3.5] {
            let l = solve_activity_fraction(&m, &th, 1.0, e1).unwrap().into_feasible().unwrap();
            assert!((interweave_primary_rate(&m, &th, 1.0, l) - e1).abs() < 1e-8);
        }
    }

    #[test]
    fn activity_fraction_matches_grid_search() {
        let (m, th) = setup();
        let e1 = 2.2;
        let l = solve_activity_fraction(&m, &th, 1.0, e1).unwrap().into_feasible().unwrap();
        let n = 1_000_000;
        let grid = (1..=n)
            .map(|k| k as f64 / n as f64)
            .find(|&x| interweave_primary_rate(&m, &th, 1.0, x) >= e1)
            .unwrap();
        assert!((grid - l).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn constant_power_limits_and_monotonicity() {
        let (m, th) = setup();
        assert_eq!(interweave_constant_power(&m, &th, 1.0, 2.0).unwrap(), 0.0);
        let single = exponential_link_rate(&th, 2.0 / 1e-3);
        assert!((interweave_constant_power(&m, &th, 0.0, 2.0).unwrap() - single).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let v = interweave_constant_power(&m, &th, k as f64 / 20.0, 2.0).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        let mut prev = 0.0;
        for k in 1..=20 {
            let v = interweave_constant_power(&m, &th, 0.4, 0.1 * k as f64).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn exp_integral_values() {
        // Reference values of E1.
        for (x, e) in [
            (0.01, 4.037_929_576_538_114),
            (0.5, 0.559_773_594_776_161),
            (1.0, 0.219_383_934_395_520_3),
            (5.0, 0.001_148_295_591_275_325_6),
        ] {
            assert!((exp_integral_e1(x) - e).abs() < 1e-13 * e.max(1.0), "x = {x}");
        }
    }

    #[test]
    fn adaptive_power_budget_is_tight() {
        let (m, th) = setup();
        let (_, sol) = interweave_adaptive_power(&m, &th, 0.3, 2.0).unwrap();
        let sol = sol.unwrap();
        let budget = 2.0 / 0.7;
        assert!((sol.power - budget).abs() < 1e-6 * budget);
        assert!(sol.thresholds.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn adaptive_unconstrained_limit() {
        let (m, th) = setup();
        let (rate, _) = interweave_adaptive_power(&m, &th, 0.25, 1e12).unwrap();
        assert!((rate - 0.75 * 4.0).abs() < 1e-3);
    }

    #[test]
    fn adaptive_beats_constant() {
        let (m, th) = setup();
        for lambda in [0.0, 0.2, 0.5, 0.8] {
            for p in [0.01, 0.1, 1.0, 2.0, 8.0] {
                let c = interweave_constant_power(&m, &th, lambda, p).unwrap();
                let (a, _) = interweave_adaptive_power(&m, &th, lambda, p).unwrap();
                assert!(a >= c - 1e-9, "lambda {lambda} p {p}: {a} < {c}");
            }
        }
    }
}
