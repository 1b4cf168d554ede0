//! Partition of the modified-SNIR plane into common rate regions.
//!
//! Bands are delimited by curves `alpha * beta = T` and cells by rays
//! `beta / alpha = W`. The product boundaries are every pairwise product of a
//! primary and a cognitive threshold, so the set of jointly supportable rate
//! pairs is constant within a band. Extra product curves and all rays sit at
//! equal-probability quantiles.
//!
//! Integrals are taken in `x = sqrt(alpha * beta)`, `y = sqrt(beta / alpha)`,
//! where a cell is an axis-aligned rectangle and the joint density of
//! `(alpha, beta)` becomes `2ABxy / ((Ay + x)^2 (B + xy)^2)`.

use rayon::prelude::*;

use crate::amc::Thresholds;
use crate::error::{Error, Result};
use crate::fading::GainModel;
use crate::quadrature::{integrate_quadrant, QuadOptions};

/// Normalized average of `1/beta` over a region, or a marker that the
/// integral diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormPower {
    Finite(f64),
    Divergent,
}

impl NormPower {
    pub fn finite(self) -> Option<f64> {
        match self {
            NormPower::Finite(p) => Some(p),
            NormPower::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, NormPower::Divergent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    /// Band of the product partition (0..C).
    pub band: usize,
    /// Radial cell (0..L).
    pub radial: usize,
    /// `[T_low, T_high)` in `alpha * beta`.
    pub product_range: (f64, f64),
    /// `[W_low, W_high)` in `beta / alpha`.
    pub radial_range: (f64, f64),
    pub mass: f64,
    pub norm_power: NormPower,
    /// Average primary rate when the cognitive link is silent here.
    pub idle_primary_rate: f64,
    /// False when the mass is below the floor; such regions never transmit.
    pub reachable: bool,
    /// Primary mode implied by each cognitive mode (`primary_modes[0]` unused).
    pub primary_modes: Vec<usize>,
}

impl Region {
    pub fn t_low(&self) -> f64 {
        self.product_range.0
    }

    pub fn contains(&self, alpha: f64, beta: f64) -> bool {
        let prod = alpha * beta;
        let ratio = beta / alpha;
        prod >= self.product_range.0
            && prod < self.product_range.1
            && ratio >= self.radial_range.0
            && ratio < self.radial_range.1
    }
}

/// A rate pair `(primary mode, cognitive mode)`.
pub type RatePair = (usize, usize);

/// Rate pairs admissible in a band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateSet {
    /// Pairs with both links active and both BER targets met.
    pub positive: Vec<RatePair>,
    /// Pairs `(0, m)`: cognitive mode `m` with the primary in outage.
    pub outage: Vec<RatePair>,
    /// The cognitive link may always stay silent.
    pub idle: bool,
}

impl RateSet {
    pub fn contains(&self, pair: RatePair) -> bool {
        if pair.1 == 0 {
            return self.idle;
        }
        self.positive.contains(&pair) || self.outage.contains(&pair)
    }
}

/// Product of two thresholds, admitted when it does not exceed `t_low`
/// (with a relative slack matching the boundary dedup tolerance).
fn product_fits(g1: f64, g2: f64, t_low: f64) -> bool {
    g1 * g2 <= t_low * (1.0 + DEDUP_REL)
}

const DEDUP_REL: f64 = 1e-12;

/// Pairs supportable on every point of a band whose lower edge is `t_low`.
pub fn permissible_rate_set(t_low: f64, primary: &Thresholds, cognitive: &Thresholds) -> RateSet {
    let n1 = primary.len_positive();
    let n2 = cognitive.len_positive();
    let mut positive = Vec::new();
    for n in 1..=n1 {
        for m in 1..=n2 {
            if product_fits(primary.get(n), cognitive.get(m), t_low) {
                positive.push((n, m));
            }
        }
    }
    RateSet {
        positive,
        outage: (1..=n2).map(|m| (0, m)).collect(),
        idle: true,
    }
}

/// Largest primary mode the primary can sustain at SNIR
/// `alpha * beta / g2(cognitive_mode)` anywhere in a band starting at `t_low`.
pub fn implied_primary_mode(
    t_low: f64,
    cognitive_mode: usize,
    primary: &Thresholds,
    cognitive: &Thresholds,
) -> usize {
    assert!(cognitive_mode >= 1, "implied primary mode needs an active cognitive mode");
    let g2 = cognitive.get(cognitive_mode);
    (1..=primary.len_positive())
        .rev()
        .find(|&n| product_fits(primary.get(n), g2, t_low))
        .unwrap_or(0)
}

/// Grid resolution and numerical settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Number of radial cells `L`.
    pub radial_cells: usize,
    /// Number of product bands `C` (at least the number of threshold bands).
    pub product_cells: usize,
    pub quadrature: QuadOptions,
    /// Hard cap on `L * C`.
    pub max_regions: usize,
    /// Regions lighter than this are unreachable.
    pub mass_floor: f64,
    /// Normalized powers above this are treated as divergent.
    pub power_guard: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            radial_cells: 10,
            product_cells: 30,
            quadrature: QuadOptions {
                abs_tol: 1e-8,
                rel_tol: 1e-8,
                max_intervals: 4000,
            },
            max_regions: 200_000,
            mass_floor: 1e-14,
            power_guard: 1e12,
        }
    }
}

/// Immutable partition with per-region statistics.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    /// `Z_0 = 0 < Z_1 < ... < Z_M = inf`.
    pub product_boundaries: Vec<f64>,
    /// Extra product curves placed inside threshold bands.
    pub auxiliary_products: Vec<f64>,
    /// All band edges `T_0 = 0 <= ... <= T_C = inf`.
    pub band_edges: Vec<f64>,
    /// `W_0 = 0 < ... < W_L = inf`.
    pub radial_boundaries: Vec<f64>,
    pub regions: Vec<Region>,
    pub primary: Thresholds,
    pub cognitive: Thresholds,
    pub model: GainModel,
    pub primary_power: f64,
}

impl RegionGrid {
    pub fn band_count(&self) -> usize {
        self.band_edges.len() - 1
    }

    pub fn radial_count(&self) -> usize {
        self.radial_boundaries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Number of threshold bands `M` before auxiliary subdivision.
    pub fn threshold_band_count(&self) -> usize {
        self.product_boundaries.len() - 1
    }

    pub fn rates(&self) -> &[f64] {
        self.cognitive.rates()
    }

    pub fn total_mass(&self) -> f64 {
        self.regions.iter().map(|r| r.mass).sum()
    }

    pub fn rate_set(&self, region: usize) -> RateSet {
        permissible_rate_set(self.regions[region].t_low(), &self.primary, &self.cognitive)
    }
}

/// Sorted distinct positive products `g1(R_n) * g2(R_m)` bracketed by 0 and inf.
pub fn product_boundaries(primary: &Thresholds, cognitive: &Thresholds) -> Vec<f64> {
    let mut products: Vec<f64> = (1..=primary.len_positive())
        .flat_map(|n| (1..=cognitive.len_positive()).map(move |m| (n, m)))
        .map(|(n, m)| primary.get(n) * cognitive.get(m))
        .filter(|p| *p > 0.0)
        .collect();
    products.sort_by(f64::total_cmp);
    let mut out = vec![0.0];
    for p in products {
        let last = *out.last().unwrap();
        if p > last * (1.0 + DEDUP_REL) {
            out.push(p);
        }
    }
    out.push(f64::INFINITY);
    out
}

/// Split `extra` additional curves among bands, each time favouring the band
/// whose sub-bands currently carry the most mass (lowest index on ties).
fn allocate_subdivisions(masses: &[f64], extra: usize) -> Vec<usize> {
    let mut counts = vec![1usize; masses.len()];
    for _ in 0..extra {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, (&m, &c)) in masses.iter().zip(&counts).enumerate() {
            let v = m / c as f64;
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        counts[best] += 1;
    }
    counts
}

/// Integrand components at `(x, y)`: density of `(alpha, beta)`, that density
/// divided by `beta`, and the density weighted by the conditional primary
/// rate when the cognitive link is silent.
#[derive(Debug, Clone)]
pub struct CellIntegrand {
    a: f64,
    b: f64,
    inv_s11: f64,
    inv_s21: f64,
    /// `(R_n - R_{n-1}, g1(R_n) * N0 / P1)` for n = 1..=N.
    steps: Vec<(f64, f64)>,
}

impl CellIntegrand {
    pub fn new(model: &GainModel, primary: &Thresholds, primary_power: f64) -> Self {
        let rates = primary.rates();
        let steps = (1..rates.len())
            .map(|n| {
                (
                    rates[n] - rates[n - 1],
                    primary.get(n) * model.noise_power() / primary_power,
                )
            })
            .collect();
        CellIntegrand {
            a: model.alpha_scale(),
            b: model.beta_scale(),
            inv_s11: 1.0 / model.mean_s11(),
            inv_s21: 1.0 / model.mean_s21(),
            steps,
        }
    }

    /// Expected primary rate given `alpha` when only noise limits it:
    /// conditioned on `alpha`, `s11` is Gamma(2) with rate
    /// `1/s11_mean + 1/(s21_mean * alpha)`.
    pub fn idle_rate_given_alpha(&self, alpha: f64) -> f64 {
        let c = self.inv_s11 + self.inv_s21 / alpha;
        self.steps
            .iter()
            .map(|&(dr, t)| {
                let ct = c * t;
                dr * (-ct).exp() * (1.0 + ct)
            })
            .sum()
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, with_power: bool) -> [f64; 3] {
        let u = self.a * y + x;
        let v = self.b + x * y;
        let base = 2.0 * self.a * self.b / (u * u * v * v);
        let mass = base * x * y;
        if !mass.is_finite() {
            return [0.0; 3];
        }
        let power = if with_power { base } else { 0.0 };
        let idle = if self.steps.is_empty() {
            0.0
        } else {
            mass * self.idle_rate_given_alpha(x / y)
        };
        [mass, power, idle]
    }
}

/// Raw integrals over one cell: `(pr, pr * p, pr * idle_rate)`; the second
/// is `None` when the cell touches the origin, where `E[1/beta]` diverges.
fn cell_integrals(
    integrand: &CellIntegrand,
    product_range: (f64, f64),
    radial_range: (f64, f64),
    opts: &QuadOptions,
) -> Result<(f64, Option<f64>, f64)> {
    let corner = product_range.0 == 0.0 && radial_range.0 == 0.0;
    let x = (product_range.0.sqrt(), product_range.1.sqrt());
    let y = (radial_range.0.sqrt(), radial_range.1.sqrt());
    let est = integrate_quadrant(|xv, yv| integrand.eval(xv, yv, !corner), x, y, opts)
        .map_err(|e| match e {
            Error::Quadrature(msg) => Error::Quadrature(format!(
                "cell T=[{}, {}) W=[{}, {}): {msg}",
                product_range.0, product_range.1, radial_range.0, radial_range.1
            )),
            other => other,
        })?;
    let [mass, power, idle] = est.value;
    Ok((mass.max(0.0), (!corner).then_some(power), idle.max(0.0)))
}

/// `(pr, p)` for a cell; `p` is flagged divergent at the origin corner or
/// above `power_guard`.
pub fn region_mass_and_power(
    product_range: (f64, f64),
    radial_range: (f64, f64),
    model: &GainModel,
    opts: &GridOptions,
) -> Result<(f64, NormPower)> {
    validate_ranges(product_range, radial_range)?;
    let integrand = CellIntegrand {
        a: model.alpha_scale(),
        b: model.beta_scale(),
        inv_s11: 1.0 / model.mean_s11(),
        inv_s21: 1.0 / model.mean_s21(),
        steps: Vec::new(),
    };
    let (mass, power, _) = cell_integrals(&integrand, product_range, radial_range, &opts.quadrature)?;
    Ok((mass, normalize_power(mass, power, opts)))
}

fn normalize_power(mass: f64, power: Option<f64>, opts: &GridOptions) -> NormPower {
    match power {
        None => NormPower::Divergent,
        Some(_) if mass < opts.mass_floor => NormPower::Finite(0.0),
        Some(pp) => {
            let p = pp / mass;
            if p > opts.power_guard || !p.is_finite() {
                NormPower::Divergent
            } else {
                NormPower::Finite(p)
            }
        }
    }
}

fn validate_ranges(product_range: (f64, f64), radial_range: (f64, f64)) -> Result<()> {
    let ok = |r: (f64, f64)| r.0 >= 0.0 && r.0.is_finite() && r.1 >= r.0;
    if ok(product_range) && ok(radial_range) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "invalid region bounds {product_range:?} x {radial_range:?}"
        )))
    }
}

/// Average primary rate with the cognitive link silent, conditioned on the
/// modified SNIRs falling in the cell.
pub fn idle_primary_rate(
    product_range: (f64, f64),
    radial_range: (f64, f64),
    primary: &Thresholds,
    model: &GainModel,
    primary_power: f64,
    opts: &GridOptions,
) -> Result<f64> {
    validate_ranges(product_range, radial_range)?;
    let integrand = CellIntegrand::new(model, primary, primary_power);
    let (mass, _, idle) = cell_integrals(&integrand, product_range, radial_range, &opts.quadrature)?;
    if mass < opts.mass_floor {
        return Err(Error::UndefinedConditional(usize::MAX));
    }
    Ok((idle / mass).clamp(0.0, primary.rates()[primary.len_positive()]))
}

/// Build the partition with `L = opts.radial_cells` rays and
/// `C = opts.product_cells` bands.
pub fn build_grid(
    primary: &Thresholds,
    cognitive: &Thresholds,
    model: &GainModel,
    primary_power: f64,
    opts: &GridOptions,
) -> Result<RegionGrid> {
    if primary.rates() != cognitive.rates() {
        return Err(Error::InvalidTable(
            "primary and cognitive thresholds must come from the same table".into(),
        ));
    }
    if !(primary_power > 0.0) {
        return Err(Error::domain(format!("primary power must be positive, got {primary_power}")));
    }
    let l = opts.radial_cells;
    let c = opts.product_cells;
    if l == 0 {
        return Err(Error::domain("need at least one radial cell"));
    }
    let total = l.saturating_mul(c);
    if total > opts.max_regions {
        return Err(Error::Resource(format!(
            "{l} x {c} = {total} regions exceeds the cap of {}",
            opts.max_regions
        )));
    }

    let z = product_boundaries(primary, cognitive);
    let m = z.len() - 1;
    if c < m {
        return Err(Error::domain(format!(
            "{c} product bands requested but the thresholds already define {m}"
        )));
    }
    let cdf: Vec<f64> = z.iter().map(|&t| model.product_cdf(t)).collect();
    let masses: Vec<f64> = cdf.windows(2).map(|w| w[1] - w[0]).collect();
    let counts = allocate_subdivisions(&masses, c - m);

    let mut band_edges = vec![0.0];
    let mut auxiliary = Vec::new();
    for a in 0..m {
        for j in 1..counts[a] {
            let q = cdf[a] + (cdf[a + 1] - cdf[a]) * j as f64 / counts[a] as f64;
            let prev = *band_edges.last().unwrap();
            let t = model.product_quantile(q).clamp(prev, z[a + 1]);
            band_edges.push(t);
            auxiliary.push(t);
        }
        band_edges.push(z[a + 1]);
    }
    debug_assert_eq!(band_edges.len(), c + 1);

    let mut radial = vec![0.0];
    for j in 1..l {
        let prev = *radial.last().unwrap();
        radial.push(model.radial_quantile(j as f64 / l as f64).max(prev));
    }
    radial.push(f64::INFINITY);

    let integrand = CellIntegrand::new(model, primary, primary_power);
    let n_modes = cognitive.len_positive();
    let regions = (0..total)
        .into_par_iter()
        .map(|index| {
            let band = index / l;
            let cell = index % l;
            let product_range = (band_edges[band], band_edges[band + 1]);
            let radial_range = (radial[cell], radial[cell + 1]);
            let (mass, power, idle) =
                cell_integrals(&integrand, product_range, radial_range, &opts.quadrature)?;
            let reachable = mass >= opts.mass_floor;
            let idle_primary_rate = if reachable {
                (idle / mass).clamp(0.0, primary.rates()[n_modes])
            } else {
                0.0
            };
            let mut primary_modes = vec![0; n_modes + 1];
            for (k2, slot) in primary_modes.iter_mut().enumerate().skip(1) {
                *slot = implied_primary_mode(product_range.0, k2, primary, cognitive);
            }
            Ok(Region {
                index,
                band,
                radial: cell,
                product_range,
                radial_range,
                mass,
                norm_power: normalize_power(mass, power, opts),
                idle_primary_rate,
                reachable,
                primary_modes,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RegionGrid {
        product_boundaries: z,
        auxiliary_products: auxiliary,
        band_edges,
        radial_boundaries: radial,
        regions,
        primary: primary.clone(),
        cognitive: cognitive.clone(),
        model: *model,
        primary_power,
    })
}

/// Index of the region holding `(alpha, beta)`; cells are half-open, so a
/// point on a boundary belongs to the upper cell.
pub fn locate_region(alpha: f64, beta: f64, grid: &RegionGrid) -> usize {
    let prod = alpha * beta;
    let ratio = beta / alpha;
    let c = grid.band_count();
    let l = grid.radial_count();
    let band = grid.band_edges[1..c].partition_point(|&t| t <= prod);
    let cell = grid.radial_boundaries[1..l].partition_point(|&w| w <= ratio);
    band * l + cell
}
