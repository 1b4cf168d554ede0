//! Rate and power assignment for the cognitive link.
//!
//! The variable-power problem is posed over the regions of a
//! [`RegionGrid`](crate::regions::RegionGrid): pick a cognitive mode per
//! region to maximize the cognitive average rate subject to a primary
//! average-rate floor and a cognitive average-power budget.

mod constant_power;
mod exhaustive;
mod greedy;
pub mod instances;

pub use constant_power::{constant_power_averages, constant_power_optimize, ConstantPowerSolution};
pub use exhaustive::{exhaustive_optimize, DEFAULT_ENUMERATION_CAP};
pub use greedy::{greedy_optimize, GreedyRun, Part, Trace, TraceStep};

use crate::amc::{BerTarget, Thresholds};
use crate::error::{Error, Result};
use crate::regions::{Region, RegionGrid};

/// Slack on the rate and power constraints.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Constraint set and powers of one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    /// Required primary average rate `E1`.
    pub required_primary_rate: f64,
    /// Primary transmit power `P1`.
    pub primary_power: f64,
    /// Cognitive average power budget `P2max`.
    pub power_budget: f64,
    pub primary_target: BerTarget,
    pub cognitive_target: BerTarget,
    /// Design margin: thresholds use `B / margin`.
    pub margin: f64,
}

impl ProblemSpec {
    pub fn new(
        required_primary_rate: f64,
        primary_power: f64,
        power_budget: f64,
        primary_target: BerTarget,
        cognitive_target: BerTarget,
        margin: f64,
    ) -> Result<Self> {
        if !(required_primary_rate >= 0.0) || !required_primary_rate.is_finite() {
            return Err(Error::domain(format!("E1 must be >= 0, got {required_primary_rate}")));
        }
        if !(primary_power > 0.0) || !primary_power.is_finite() {
            return Err(Error::domain(format!("P1 must be > 0, got {primary_power}")));
        }
        if !(power_budget > 0.0) {
            return Err(Error::domain(format!("P2max must be > 0, got {power_budget}")));
        }
        if !(margin >= 1.0) {
            return Err(Error::domain(format!("margin must be >= 1, got {margin}")));
        }
        Ok(ProblemSpec {
            required_primary_rate,
            primary_power,
            power_budget,
            primary_target,
            cognitive_target,
            margin,
        })
    }

    pub fn design_targets(&self) -> Result<(BerTarget, BerTarget)> {
        Ok((
            self.primary_target.tightened(self.margin)?,
            self.cognitive_target.tightened(self.margin)?,
        ))
    }

    pub fn rate_ok(&self, k1: f64) -> bool {
        k1 >= self.required_primary_rate - CONSTRAINT_TOL
    }

    pub fn power_ok(&self, p2: f64) -> bool {
        p2 <= self.power_budget + CONSTRAINT_TOL
    }
}

/// Result of a solve that may legitimately have no feasible answer.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    Feasible(T),
    Infeasible { reason: String },
}

impl<T> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn feasible(&self) -> Option<&T> {
        match self {
            Feasibility::Feasible(v) => Some(v),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn into_feasible(self) -> Option<T> {
        match self {
            Feasibility::Feasible(v) => Some(v),
            Feasibility::Infeasible { .. } => None,
        }
    }
}

/// Average primary rate, cognitive rate and cognitive power of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Averages {
    pub k1: f64,
    pub k2: f64,
    pub p2: f64,
}

/// Region data and rate/threshold tables the optimizers work on. Built from
/// a grid or assembled directly for synthetic instances.
#[derive(Debug, Clone)]
pub struct Instance {
    pub regions: Vec<Region>,
    /// `R_0 = 0 < R_1 < ... < R_N`.
    pub rates: Vec<f64>,
    /// Cognitive thresholds `g_B2(R_n)` with entry 0 equal to 0.
    pub cognitive: Vec<f64>,
}

impl Instance {
    pub fn new(regions: Vec<Region>, cognitive: &Thresholds) -> Result<Self> {
        let n = cognitive.len_positive();
        for r in &regions {
            if r.primary_modes.len() != n + 1 || r.primary_modes.iter().any(|&m| m > n) {
                return Err(Error::domain(format!(
                    "region {} has primary modes inconsistent with {n} modes",
                    r.index
                )));
            }
        }
        if regions.iter().enumerate().any(|(k, r)| r.index != k) {
            return Err(Error::domain("region indices must be 0..V0 in order"));
        }
        Ok(Instance {
            regions,
            rates: cognitive.rates().to_vec(),
            cognitive: cognitive.values().to_vec(),
        })
    }

    pub fn from_grid(grid: &RegionGrid) -> Self {
        Instance {
            regions: grid.regions.clone(),
            rates: grid.cognitive.rates().to_vec(),
            cognitive: grid.cognitive.values().to_vec(),
        }
    }

    /// Number of positive modes `N`.
    pub fn modes(&self) -> usize {
        self.rates.len() - 1
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates[self.modes()]
    }

    /// Whether the cognitive link may transmit in region `i` at all.
    pub fn eligible(&self, i: usize) -> bool {
        let r = &self.regions[i];
        r.reachable && !r.norm_power.is_divergent()
    }

    /// `k1(i, R_m)` in bits/s/Hz.
    pub fn primary_rate(&self, i: usize, m: usize) -> f64 {
        let r = &self.regions[i];
        if m == 0 {
            r.idle_primary_rate
        } else {
            self.rates[r.primary_modes[m]]
        }
    }

    fn power_weight(&self, i: usize, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(0.0);
        }
        self.regions[i].norm_power.finite().ok_or_else(|| {
            Error::ContractViolation(format!("region {i} has divergent power but mode {m}"))
        })
    }

    /// Largest achievable primary average, attained region by region.
    pub fn max_primary_average(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let best = if self.eligible(i) {
                    (0..=self.modes()).map(|m| self.primary_rate(i, m)).fold(0.0, f64::max)
                } else {
                    self.primary_rate(i, 0)
                };
                best * self.regions[i].mass
            })
            .sum()
    }
}

/// Per-region assignment and its averages.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAssignment {
    pub cognitive_modes: Vec<usize>,
    /// Implied primary mode; `None` where the cognitive link is silent and
    /// the primary rate is the idle average.
    pub primary_modes: Vec<Option<usize>>,
    pub averages: Averages,
    pub iterations: usize,
}

impl PolicyAssignment {
    pub fn from_modes(instance: &Instance, modes: Vec<usize>, p1: f64, iterations: usize) -> Result<Self> {
        let averages = policy_averages(instance, &modes, p1)?;
        let primary_modes = modes
            .iter()
            .enumerate()
            .map(|(i, &m)| (m > 0).then(|| instance.regions[i].primary_modes[m]))
            .collect();
        Ok(PolicyAssignment {
            cognitive_modes: modes,
            primary_modes,
            averages,
            iterations,
        })
    }

    /// Total mass of regions where the cognitive link pushes the primary
    /// into outage.
    pub fn primary_outage_mass(&self, instance: &Instance) -> f64 {
        self.primary_modes
            .iter()
            .zip(&instance.regions)
            .filter(|(m, _)| **m == Some(0))
            .map(|(_, r)| r.mass)
            .sum()
    }
}

/// Averages of an assignment of cognitive modes to regions.
pub fn policy_averages(instance: &Instance, modes: &[usize], p1: f64) -> Result<Averages> {
    if modes.len() != instance.len() {
        return Err(Error::domain(format!(
            "policy has {} entries but the grid has {} regions",
            modes.len(),
            instance.len()
        )));
    }
    let mut avg = Averages::default();
    for (i, &m) in modes.iter().enumerate() {
        if m > instance.modes() {
            return Err(Error::InvalidMode(m));
        }
        let pr = instance.regions[i].mass;
        avg.k2 += instance.rates[m] * pr;
        avg.k1 += instance.primary_rate(i, m) * pr;
        avg.p2 += instance.cognitive[m] * instance.power_weight(i, m)? * pr;
    }
    avg.p2 *= p1;
    Ok(avg)
}

/// Decision variables of one region at its current cognitive mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionVars {
    pub d1: f64,
    /// `d2(i, 1)`.
    pub d2: f64,
    pub d3: f64,
    /// Smallest decrement that raises the primary rate.
    pub t: Option<usize>,
}

impl DecisionVars {
    const ZERO: DecisionVars = DecisionVars {
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
        t: None,
    };
}

/// Smallest `x` in `1..=n` with `k1(i, R_{n-x}) > k1(i, R_n)`.
pub fn minimal_decrement(instance: &Instance, i: usize, n: usize) -> Option<usize> {
    let here = instance.primary_rate(i, n);
    (1..=n).find(|&x| instance.primary_rate(i, n - x) > here)
}

/// Power saved per unit of cognitive rate when dropping `x` modes from `n`.
pub fn power_slope(instance: &Instance, i: usize, n: usize, x: usize) -> Result<f64> {
    let p = instance.power_weight(i, n)?;
    let g = &instance.cognitive;
    let r = &instance.rates;
    Ok((g[n] - g[n - x]) * p / (r[n] - r[n - x]))
}

pub fn decision_variables(instance: &Instance, i: usize, n: usize) -> Result<DecisionVars> {
    if n == 0 {
        return Ok(DecisionVars::ZERO);
    }
    if n > instance.modes() {
        return Err(Error::InvalidMode(n));
    }
    let d2 = power_slope(instance, i, n, 1)?;
    let capped = instance.regions[i].primary_modes[n] == instance.modes();
    let t = minimal_decrement(instance, i, n);
    let (d1, d3) = match (capped, t) {
        (false, Some(t)) => {
            let gain = instance.primary_rate(i, n - t) - instance.primary_rate(i, n);
            let cost = instance.rates[n] - instance.rates[n - t];
            (gain / cost, power_slope(instance, i, n, t)?)
        }
        _ => (0.0, 0.0),
    };
    Ok(DecisionVars { d1, d2, d3, t })
}

/// Spread of `d1` over every region and mode where the primary is below its
/// top rate. Zero spread means the instance satisfies the constant-`d1`
/// condition under which the greedy solution is optimal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1Spread {
    pub min: f64,
    pub max: f64,
}

impl D1Spread {
    pub fn spread(&self) -> f64 {
        if self.max >= self.min {
            self.max - self.min
        } else {
            0.0
        }
    }

    pub fn holds(&self) -> bool {
        self.spread() <= 1e-12 * self.max.abs().max(1.0)
    }
}

pub fn d1_spread(instance: &Instance) -> Result<D1Spread> {
    let mut out = D1Spread {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    for i in (0..instance.len()).filter(|&i| instance.eligible(i)) {
        for n in 1..=instance.modes() {
            if instance.regions[i].primary_modes[n] < instance.modes() {
                let d1 = decision_variables(instance, i, n)?.d1;
                out.min = out.min.min(d1);
                out.max = out.max.max(d1);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::regions::NormPower;

    pub fn region(index: usize, mass: f64, p: f64, idle: f64, primary_modes: Vec<usize>) -> Region {
        Region {
            index,
            band: index,
            radial: 0,
            product_range: (0.0, 1.0),
            radial_range: (0.0, f64::INFINITY),
            mass,
            norm_power: NormPower::Finite(p),
            idle_primary_rate: idle,
            reachable: true,
            primary_modes,
        }
    }

    pub fn thresholds(rates: &[f64], g: &[f64]) -> Thresholds {
        Thresholds::from_parts(BerTarget::new(1e-5).unwrap(), rates.to_vec(), g.to_vec()).unwrap()
    }

    pub fn spec(e1: f64, p2max: f64) -> ProblemSpec {
        let b = BerTarget::new(1e-5).unwrap();
        ProblemSpec::new(e1, 1.0, p2max, b, b, 1.0).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::regions::NormPower;

    #[test]
    fn single_region_averages() {
        let th = thresholds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]);
        let inst = Instance::new(vec![region(0, 1.0, 0.5, 1.5, vec![0, 2, 1])], &th).unwrap();
        let a = policy_averages(&inst, &[2], 1.0).unwrap();
        assert_eq!(a.k2, 2.0);
        assert_eq!(a.k1, 1.0);
        assert!((a.p2 - 1.5).abs() < 1e-15);
        let a = policy_averages(&inst, &[0], 1.0).unwrap();
        assert_eq!((a.k2, a.p2, a.k1), (0.0, 0.0, 1.5));
    }

    #[test]
    fn averages_reject_divergent() {
        let th = thresholds(&[0.0, 1.0], &[0.0, 1.0]);
        let mut r = region(0, 1.0, 0.5, 1.0, vec![0, 1]);
        r.norm_power = NormPower::Divergent;
        let inst = Instance::new(vec![r], &th).unwrap();
        assert!(matches!(
            policy_averages(&inst, &[1], 1.0),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            decision_variables(&inst, 0, 1),
            Err(Error::ContractViolation(_))
        ));
        assert!(policy_averages(&inst, &[0], 1.0).is_ok());
    }

    #[test]
    fn d2_example() {
        let th = thresholds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]);
        let inst = Instance::new(vec![region(0, 0.3, 0.4, 2.0, vec![0, 1, 0])], &th).unwrap();
        let dv = decision_variables(&inst, 0, 2).unwrap();
        assert!((dv.d2 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn capped_primary_zeroes_d1_d3() {
        let th = thresholds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]);
        let inst = Instance::new(vec![region(0, 1.0, 0.4, 2.0, vec![0, 2, 2])], &th).unwrap();
        let dv = decision_variables(&inst, 0, 2).unwrap();
        assert_eq!((dv.d1, dv.d3), (0.0, 0.0));
        assert!(dv.d2 > 0.0);
    }

    #[test]
    fn minimal_decrement_skips_flat_steps() {
        let th = thresholds(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 3.0, 7.0]);
        // Dropping 3 -> 2 keeps mode 1, dropping to 1 gives mode 2.
        let inst = Instance::new(vec![region(0, 1.0, 0.4, 3.0, vec![0, 2, 1, 1])], &th).unwrap();
        assert_eq!(minimal_decrement(&inst, 0, 3), Some(2));
        let dv = decision_variables(&inst, 0, 3).unwrap();
        assert_eq!(dv.t, Some(2));
        assert!((dv.d1 - 1.0 / 2.0).abs() < 1e-15);
        assert!((dv.d3 - (7.0 - 1.0) * 0.4 / 2.0).abs() < 1e-15);
        assert_eq!(decision_variables(&inst, 0, 0).unwrap(), DecisionVars::ZERO);
    }

    #[test]
    fn undefined_t_gives_zero_d1() {
        let th = thresholds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]);
        // Idle rate below the active primary rate: no decrement helps.
        let inst = Instance::new(vec![region(0, 1.0, 0.4, 0.5, vec![0, 1, 1])], &th).unwrap();
        let dv = decision_variables(&inst, 0, 2).unwrap();
        assert_eq!(dv.t, None);
        assert_eq!((dv.d1, dv.d3), (0.0, 0.0));
        assert!(dv.d2 > 0.0);
    }

    #[test]
    fn spec_validation() {
        let b = BerTarget::new(1e-5).unwrap();
        assert!(ProblemSpec::new(-1.0, 1.0, 1.0, b, b, 2.0).is_err());
        assert!(ProblemSpec::new(0.0, 0.0, 1.0, b, b, 2.0).is_err());
        assert!(ProblemSpec::new(0.0, 1.0, 0.0, b, b, 2.0).is_err());
        assert!(ProblemSpec::new(0.0, 1.0, 1.0, b, b, 0.5).is_err());
    }
}
