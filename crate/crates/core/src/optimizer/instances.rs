//! Seeded random problem instances for comparing the greedy and exhaustive
//! solvers.

use rand::Rng;

use super::{policy_averages, Instance, ProblemSpec};
use crate::amc::{threshold_convexity_check, BerTarget, Thresholds};
use crate::error::Result;
use crate::regions::{implied_primary_mode, product_boundaries, NormPower, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFamily {
    /// Random rates, convex thresholds, masses and powers.
    General,
    /// Equally spaced rates and geometric thresholds with ratio >= 2, so
    /// that every unit drop of the cognitive mode below the cap raises the
    /// primary by exactly one mode and `d1` is the same everywhere.
    ConstantD1,
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub instance: Instance,
    pub spec: ProblemSpec,
    pub primary: Thresholds,
    pub cognitive: Thresholds,
}

fn target() -> BerTarget {
    BerTarget::new(1e-5).expect("constant target is valid")
}

/// Convex threshold curve over `rates` with the outage point included.
fn convex_thresholds<R: Rng>(rng: &mut R, rates: &[f64]) -> Result<Thresholds> {
    let mut slope = rng.random_range(0.5..4.0);
    let mut values = vec![0.0];
    for n in 1..rates.len() {
        if n > 1 {
            slope *= rng.random_range(1.1..3.0);
        }
        let prev = values[n - 1];
        values.push(prev + slope * (rates[n] - rates[n - 1]));
    }
    Thresholds::from_parts(target(), rates.to_vec(), values)
}

fn random_masses<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Draw an instance with `modes` positive modes and `regions` regions.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    modes: usize,
    regions: usize,
    family: InstanceFamily,
) -> Result<RandomInstance> {
    let (rates, primary, cognitive, bands): (Vec<f64>, Thresholds, Thresholds, Vec<f64>) =
        match family {
            InstanceFamily::General => {
                let mut rates = vec![0.0];
                let mut r: f64 = rng.random_range(0.5..1.0);
                for _ in 0..modes {
                    rates.push(r);
                    r += rng.random_range(0.25..1.5);
                }
                let primary = convex_thresholds(rng, &rates)?;
                let cognitive = convex_thresholds(rng, &rates)?;
                let mut bands = product_boundaries(&primary, &cognitive);
                bands.pop();
                (rates, primary, cognitive, bands)
            }
            InstanceFamily::ConstantD1 => {
                let rates: Vec<f64> = (0..=modes).map(|n| n as f64).collect();
                let q: f64 = rng.random_range(2.0..4.0);
                let values: Vec<f64> =
                    (0..=modes).map(|n| if n == 0 { 0.0 } else { q.powi(n as i32) }).collect();
                let th = Thresholds::from_parts(target(), rates.clone(), values)?;
                // Bands q^s with s >= N keep every mode above deep outage.
                let bands = (modes..=2 * modes).map(|s| q.powi(s as i32)).collect();
                (rates, th.clone(), th, bands)
            }
        };
    debug_assert!(threshold_convexity_check(&cognitive).is_ok());

    let masses = random_masses(rng, regions);
    let top = rates[modes];
    let mut list = Vec::with_capacity(regions);
    for (index, &mass) in masses.iter().enumerate() {
        let b = rng.random_range(0..bands.len());
        let t_low = bands[b];
        let t_high = bands.get(b + 1).copied().unwrap_or(f64::INFINITY);
        let mut primary_modes = vec![0; modes + 1];
        for (m, slot) in primary_modes.iter_mut().enumerate().skip(1) {
            *slot = implied_primary_mode(t_low, m, &primary, &cognitive);
        }
        let above = rates[primary_modes[1]];
        let idle = match family {
            InstanceFamily::General => rng.random_range(above..=top),
            InstanceFamily::ConstantD1 => rates[(primary_modes[1] + 1).min(modes)],
        };
        let p = (rng.random_range(0.1f64.ln()..10f64.ln())).exp();
        list.push(Region {
            index,
            band: b,
            radial: 0,
            product_range: (t_low, t_high),
            radial_range: (0.0, f64::INFINITY),
            mass,
            norm_power: NormPower::Finite(p),
            idle_primary_rate: idle,
            reachable: true,
            primary_modes,
        });
    }
    let instance = Instance::new(list, &cognitive)?;

    let all_top = policy_averages(&instance, &vec![modes; regions], 1.0)?;
    let e1 = rng.random_range(0.0..1.0) * instance.max_primary_average();
    let p2max = rng.random_range(0.05..1.0) * all_top.p2;
    let spec = ProblemSpec::new(e1, 1.0, p2max, target(), target(), 1.0)?;
    Ok(RandomInstance {
        instance,
        spec,
        primary,
        cognitive,
    })
}

#[cfg(test)]
mod tests {
    use super::super::d1_spread;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_d1_family_has_zero_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let ri = random_instance(&mut rng, 3, 6, InstanceFamily::ConstantD1).unwrap();
            let s = d1_spread(&ri.instance).unwrap();
            assert!(s.holds(), "{s:?}");
        }
    }

    #[test]
    fn general_family_is_valid_and_seeded() {
        let a = random_instance(&mut ChaCha8Rng::seed_from_u64(9), 3, 8, InstanceFamily::General)
            .unwrap();
        let b = random_instance(&mut ChaCha8Rng::seed_from_u64(9), 3, 8, InstanceFamily::General)
            .unwrap();
        assert_eq!(a.instance.regions, b.instance.regions);
        assert!(threshold_convexity_check(&a.cognitive).is_ok());
        assert!(threshold_convexity_check(&a.primary).is_ok());
        let total: f64 = a.instance.regions.iter().map(|r| r.mass).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
