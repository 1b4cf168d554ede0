//! Transmission-mode tables and the exponential BER model.
//!
//! Each mode `n >= 1` carries a spectral efficiency `R_n` and fit constants
//! `(a_n, s_n)` such that the bit error rate at linear SNIR `gamma` is
//! `a_n * exp(-s_n * gamma)`. Inverting the fit gives the minimum SNIR a mode
//! needs to meet a BER target; those thresholds drive every other module.

use crate::error::{Error, Result};

/// One row of an AMC table. Mode 0 is the outage mode: zero rate, no fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmcMode {
    pub index: usize,
    pub rate: f64,
    pub fit_a: f64,
    pub fit_slope: f64,
}

impl AmcMode {
    pub fn outage() -> Self {
        AmcMode {
            index: 0,
            rate: 0.0,
            fit_a: 0.0,
            fit_slope: 0.0,
        }
    }
}

/// Ordered set of `N + 1` modes with strictly increasing rates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcTable {
    modes: Vec<AmcMode>,
}

/// A BER requirement in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BerTarget(f64);

impl BerTarget {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(BerTarget(value))
        } else {
            Err(Error::domain(format!(
                "BER target must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Tightened design target `B / margin`.
    pub fn tightened(self, margin: f64) -> Result<Self> {
        if !(margin >= 1.0) {
            return Err(Error::domain(format!("margin must be >= 1, got {margin}")));
        }
        BerTarget::new(self.0 / margin)
    }
}

/// Rates of the shipped default table (IEEE 802.11a coded QAM family).
pub const DEFAULT_RATES: [f64; 7] = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];

impl AmcTable {
    /// Build a table from `(rate, fit_a, fit_slope)` triples for modes
    /// `1..=N`; the outage mode is prepended.
    pub fn new(positive_modes: &[(f64, f64, f64)]) -> Result<Self> {
        if positive_modes.is_empty() {
            return Err(Error::InvalidTable("need at least one positive mode".into()));
        }
        let mut modes = Vec::with_capacity(positive_modes.len() + 1);
        modes.push(AmcMode::outage());
        let mut prev = 0.0;
        for (k, &(rate, fit_a, fit_slope)) in positive_modes.iter().enumerate() {
            let index = k + 1;
            if !(rate > prev) || !rate.is_finite() {
                return Err(Error::InvalidTable(format!(
                    "rates must be finite and strictly increasing from 0; mode {index} has rate {rate}"
                )));
            }
            if !(fit_a > 0.0) || !(fit_slope > 0.0) || !fit_a.is_finite() || !fit_slope.is_finite() {
                return Err(Error::InvalidTable(format!(
                    "mode {index} needs positive finite fit constants, got a={fit_a}, slope={fit_slope}"
                )));
            }
            modes.push(AmcMode {
                index,
                rate,
                fit_a,
                fit_slope,
            });
            prev = rate;
        }
        Ok(AmcTable { modes })
    }

    /// Placeholder 802.11a-rate table. The fit constants follow the standard
    /// exponential M-QAM approximation `0.2 * exp(-1.5 * G * gamma / (2^R - 1))`
    /// with a 3 dB coding gain `G = 2`, one mode per rate in [`DEFAULT_RATES`].
    pub fn default_80211a() -> Self {
        let rows: Vec<(f64, f64, f64)> = DEFAULT_RATES
            .iter()
            .map(|&r| (r, 0.2, 3.0 / (2f64.powf(r) - 1.0)))
            .collect();
        AmcTable::new(&rows).expect("default table is valid")
    }

    pub fn modes(&self) -> &[AmcMode] {
        &self.modes
    }

    /// Number of positive modes `N`.
    pub fn len_positive(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn mode(&self, n: usize) -> Result<&AmcMode> {
        self.modes
            .get(n)
            .ok_or_else(|| Error::domain(format!("mode {n} out of range")))
    }

    /// Rates `R_0..=R_N` (with `R_0 = 0`).
    pub fn rates(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.rate).collect()
    }

    pub fn max_rate(&self) -> f64 {
        self.modes[self.modes.len() - 1].rate
    }

    /// Validated, memoized SNIR thresholds for a BER target.
    pub fn thresholds(&self, target: BerTarget) -> Result<Thresholds> {
        let mut values = Vec::with_capacity(self.modes.len());
        values.push(0.0);
        for mode in &self.modes[1..] {
            values.push(snir_threshold(mode, target)?);
        }
        Ok(Thresholds {
            target,
            values,
            rates: self.rates(),
        })
    }
}

/// SNIR thresholds `g_B(R_n)` for `n = 0..=N` under one BER target.
/// Entry 0 is zero: the outage mode needs neither SNIR nor power.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    target: BerTarget,
    values: Vec<f64>,
    rates: Vec<f64>,
}

impl Thresholds {
    /// Assemble thresholds directly, e.g. for synthetic test instances.
    /// `values[0]` must be 0 and `rates[0]` must be 0.
    pub fn from_parts(target: BerTarget, rates: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if rates.len() != values.len() || rates.len() < 2 {
            return Err(Error::InvalidTable("rates/thresholds length mismatch".into()));
        }
        if rates[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::InvalidTable("mode 0 must have zero rate and threshold".into()));
        }
        if rates.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTable("rates must be strictly increasing".into()));
        }
        if values[1..].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidTable("thresholds must be finite and nonnegative".into()));
        }
        Ok(Thresholds {
            target,
            values,
            rates,
        })
    }

    pub fn target(&self) -> BerTarget {
        self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn len_positive(&self) -> usize {
        self.values.len() - 1
    }

    /// Mode selected by a link whose SNIR is `gamma`: the largest `n` with
    /// `g(R_n) <= gamma`, or 0.
    pub fn select_mode(&self, gamma: f64) -> usize {
        // values[1..] is increasing for every valid table.
        self.values[1..].partition_point(|&g| g <= gamma)
    }
}

/// Fitted BER of `mode` at linear SNIR `gamma`.
pub fn ber_probability(gamma: f64, mode: &AmcMode) -> Result<f64> {
    if mode.index == 0 {
        return Err(Error::InvalidMode(0));
    }
    if !(gamma >= 0.0) {
        return Err(Error::domain(format!("SNIR must be nonnegative, got {gamma}")));
    }
    Ok(mode.fit_a * (-mode.fit_slope * gamma).exp())
}

/// Minimum SNIR at which `mode` meets `target`.
pub fn snir_threshold(mode: &AmcMode, target: BerTarget) -> Result<f64> {
    if mode.index == 0 {
        return Err(Error::InvalidMode(0));
    }
    if target.value() > mode.fit_a {
        return Err(Error::NegativeThreshold {
            mode: mode.index,
            target: target.value(),
            fit_a: mode.fit_a,
        });
    }
    Ok((-(target.value() / mode.fit_a).ln() / mode.fit_slope).max(0.0))
}

/// First `(n, b, c)` at which the threshold-vs-rate curve fails to be convex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvexityViolation {
    pub n: usize,
    pub b: usize,
    pub c: usize,
}

/// Checks that the secant slope of `g` over `[R_{n-b}, R_n]` is at least the
/// slope over `[R_{n-b-c}, R_{n-b}]` for every admissible `n, b, c`, with the
/// outage point `(0, 0)` included. This ordering is what lets a greedy
/// sequence of single-step rate reductions stay optimal.
pub fn threshold_convexity_check(
    thresholds: &Thresholds,
) -> std::result::Result<(), ConvexityViolation> {
    let g = thresholds.values();
    let r = thresholds.rates();
    let slope = |hi: usize, lo: usize| (g[hi] - g[lo]) / (r[hi] - r[lo]);
    for n in 2..g.len() {
        for b in 1..n {
            let upper = slope(n, n - b);
            for c in 1..=(n - b) {
                let lower = slope(n - b, n - b - c);
                if upper < lower * (1.0 - 1e-12) - 1e-300 {
                    return Err(ConvexityViolation { n, b, c });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mode(a: f64, s: f64) -> AmcMode {
        AmcMode {
            index: 1,
            rate: 1.0,
            fit_a: a,
            fit_slope: s,
        }
    }

    fn synthetic(values: &[f64]) -> Thresholds {
        let mut v = vec![0.0];
        v.extend_from_slice(values);
        let rates = (0..v.len()).map(|k| k as f64).collect();
        Thresholds::from_parts(BerTarget::new(1e-5).unwrap(), rates, v).unwrap()
    }

    #[test]
    fn ber_examples() {
        assert_eq!(ber_probability(0.0, &unit_mode(1.0, 1.0)).unwrap(), 1.0);
        let b = ber_probability(1e5f64.ln(), &unit_mode(1.0, 1.0)).unwrap();
        assert!((b - 1e-5).abs() < 1e-18);
        assert_eq!(
            ber_probability(5.0, &AmcMode::outage()),
            Err(Error::InvalidMode(0))
        );
    }

    #[test]
    fn threshold_examples() {
        let t = BerTarget::new((-2.0f64).exp()).unwrap();
        assert!((snir_threshold(&unit_mode(1.0, 1.0), t).unwrap() - 2.0).abs() < 1e-15);
        let t = BerTarget::new(0.5).unwrap();
        assert_eq!(snir_threshold(&unit_mode(0.5, 3.0), t).unwrap(), 0.0);
        // B0 = 2 is outside (0,1); use a mode with a small amplitude instead.
        let t = BerTarget::new(0.6).unwrap();
        assert!(matches!(
            snir_threshold(&unit_mode(0.5, 1.0), t),
            Err(Error::NegativeThreshold { .. })
        ));
        assert_eq!(
            snir_threshold(&AmcMode::outage(), t),
            Err(Error::InvalidMode(0))
        );
    }

    #[test]
    fn target_range() {
        assert!(BerTarget::new(0.0).is_err());
        assert!(BerTarget::new(1.0).is_err());
        assert!(BerTarget::new(2.0).is_err());
        assert!(BerTarget::new(1e-5).unwrap().tightened(0.5).is_err());
    }

    #[test]
    fn convexity_examples() {
        assert_eq!(threshold_convexity_check(&synthetic(&[1.0, 3.0, 7.0])), Ok(()));
        assert_eq!(
            threshold_convexity_check(&synthetic(&[1.0, 5.0, 6.0])),
            Err(ConvexityViolation { n: 3, b: 1, c: 1 })
        );
    }

    #[test]
    fn default_table_is_convex_at_all_targets() {
        let table = AmcTable::default_80211a();
        for b in [1e-3, 1e-5, 1e-7] {
            let th = table.thresholds(BerTarget::new(b).unwrap()).unwrap();
            // Exhaustive over every (n, b, c) triple.
            assert_eq!(threshold_convexity_check(&th), Ok(()), "B0 = {b}");
        }
    }

    #[test]
    fn thresholds_increase_and_round_trip() {
        let table = AmcTable::default_80211a();
        for b in [1e-2, 1e-3, 1e-5, 1e-7, 1e-9] {
            let target = BerTarget::new(b).unwrap();
            let th = table.thresholds(target).unwrap();
            assert!(th.values().windows(2).all(|w| w[1] > w[0]));
            for mode in &table.modes()[1..] {
                let back = ber_probability(th.get(mode.index), mode).unwrap();
                assert!(((back - b) / b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ber_decreases_in_snir() {
        let table = AmcTable::default_80211a();
        for mode in &table.modes()[1..] {
            let mut prev = f64::INFINITY;
            for k in 0..200 {
                let b = ber_probability(k as f64 * 0.5, mode).unwrap();
                assert!(b < prev);
                prev = b;
            }
        }
    }

    #[test]
    fn mode_selection() {
        let th = synthetic(&[1.0, 3.0, 7.0]);
        assert_eq!(th.select_mode(0.5), 0);
        assert_eq!(th.select_mode(1.0), 1);
        assert_eq!(th.select_mode(6.9), 2);
        assert_eq!(th.select_mode(1e9), 3);
    }

    #[test]
    fn table_validation() {
        assert!(AmcTable::new(&[]).is_err());
        assert!(AmcTable::new(&[(1.0, 1.0, 1.0), (1.0, 1.0, 1.0)]).is_err());
        assert!(AmcTable::new(&[(1.0, 0.0, 1.0)]).is_err());
        assert_eq!(AmcTable::default_80211a().len_positive(), 7);
    }
}
