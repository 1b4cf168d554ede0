//! Monte Carlo evaluation of a scheme over sampled fading blocks.
//!
//! Blocks are split into fixed-size chunks, each with its own seeked random
//! streams, and chunk results are merged in chunk order, so a report depends
//! only on the seed and the block count.

use rayon::prelude::*;

use crate::amc::{ber_probability, AmcTable, BerTarget, Thresholds};
use crate::baselines::AdaptivePower;
use crate::error::{Error, Result};
use crate::fading::{sample_block_gains, BlockGains, GainModel, GainStreams};
use crate::optimizer::PolicyAssignment;
use crate::regions::{locate_region, RegionGrid};

const CHUNK: u64 = 1 << 15;
const Z95: f64 = 1.959_963_984_540_054;

/// Mergeable running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStat {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStat) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// Half-width of the normal 95% interval.
    pub fn half_width(&self) -> f64 {
        Z95 * self.std_error()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    VariablePower,
    ConstantPower,
    InterweaveConstant,
    InterweaveAdaptive,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::VariablePower => "variable-power",
            SchemeKind::ConstantPower => "constant-power",
            SchemeKind::InterweaveConstant => "interweave-constant",
            SchemeKind::InterweaveAdaptive => "interweave-adaptive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SchemeKind::VariablePower,
            SchemeKind::ConstantPower,
            SchemeKind::InterweaveConstant,
            SchemeKind::InterweaveAdaptive,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// What to run in each block.
#[derive(Debug, Clone, Copy)]
pub enum SchemePlan<'a> {
    /// Region policy with power `P1 g_B2(k2) / beta`.
    VariablePower {
        grid: &'a RegionGrid,
        policy: &'a PolicyAssignment,
    },
    /// Fixed cognitive power; both links pick modes from their exact SNIR.
    ConstantPower {
        power: f64,
        primary: &'a Thresholds,
        cognitive: &'a Thresholds,
    },
    /// Time sharing with constant cognitive power while active.
    InterweaveConstant {
        lambda: f64,
        power_budget: f64,
        primary: &'a Thresholds,
        cognitive: &'a Thresholds,
    },
    /// Time sharing with per-block power adaptation while active.
    InterweaveAdaptive {
        lambda: f64,
        primary: &'a Thresholds,
        cognitive: &'a Thresholds,
        adaptive: Option<&'a AdaptivePower>,
    },
}

impl SchemePlan<'_> {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemePlan::VariablePower { .. } => SchemeKind::VariablePower,
            SchemePlan::ConstantPower { .. } => SchemeKind::ConstantPower,
            SchemePlan::InterweaveConstant { .. } => SchemeKind::InterweaveConstant,
            SchemePlan::InterweaveAdaptive { .. } => SchemeKind::InterweaveAdaptive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub blocks: u64,
    /// Design margin, echoed in the report.
    pub margin: f64,
    /// Per-block cognitive power cap as a multiple of the budget.
    pub power_cap_factor: f64,
    /// Replace `N0` in the exact SNIR (the plan and model stay unchanged).
    pub noise_override: Option<f64>,
}

impl SimConfig {
    pub fn new(seed: u64, blocks: u64) -> Self {
        SimConfig {
            seed,
            blocks,
            margin: 2.0,
            power_cap_factor: 1e6,
            noise_override: None,
        }
    }
}

/// Link-level inputs shared by every scheme.
#[derive(Debug, Clone, Copy)]
pub struct LinkSetup<'a> {
    pub model: &'a GainModel,
    pub table: &'a AmcTable,
    pub primary_power: f64,
    pub power_budget: f64,
    /// Required (not design) BER targets.
    pub primary_target: BerTarget,
    pub cognitive_target: BerTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub seeds: Vec<u64>,
    pub scheme: SchemeKind,
    pub margin: f64,
    pub blocks: u64,
    pub k1: RunningStat,
    pub k2: RunningStat,
    pub p2: RunningStat,
    /// Blocks per region; empty unless a grid was used.
    pub region_hits: Vec<u64>,
    /// Blocks in which the primary transmitted.
    pub primary_active: u64,
    pub cognitive_active: u64,
    /// Blocks where the fitted BER at the exact SNIR exceeds the target.
    pub primary_violations: u64,
    pub cognitive_violations: u64,
    /// Blocks where an active cognitive link forces the primary to mode 0.
    pub primary_outages: u64,
    pub cap_events: u64,
}

impl SimReport {
    fn empty(seed: u64, scheme: SchemeKind, margin: f64, regions: usize) -> Self {
        SimReport {
            seeds: vec![seed],
            scheme,
            margin,
            blocks: 0,
            k1: RunningStat::default(),
            k2: RunningStat::default(),
            p2: RunningStat::default(),
            region_hits: vec![0; regions],
            primary_active: 0,
            cognitive_active: 0,
            primary_violations: 0,
            cognitive_violations: 0,
            primary_outages: 0,
            cap_events: 0,
        }
    }

    fn fraction(&self, x: u64) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            x as f64 / self.blocks as f64
        }
    }

    pub fn region_frequencies(&self) -> Vec<f64> {
        self.region_hits.iter().map(|&h| self.fraction(h)).collect()
    }

    pub fn primary_violation_rate(&self) -> f64 {
        self.fraction(self.primary_violations)
    }

    pub fn cognitive_violation_rate(&self) -> f64 {
        self.fraction(self.cognitive_violations)
    }

    pub fn primary_outage_rate(&self) -> f64 {
        self.fraction(self.primary_outages)
    }

    pub fn cap_rate(&self) -> f64 {
        self.fraction(self.cap_events)
    }

    fn absorb(&mut self, other: &SimReport) {
        self.blocks += other.blocks;
        self.k1.merge(&other.k1);
        self.k2.merge(&other.k2);
        self.p2.merge(&other.p2);
        for (a, b) in self.region_hits.iter_mut().zip(&other.region_hits) {
            *a += b;
        }
        self.primary_active += other.primary_active;
        self.cognitive_active += other.cognitive_active;
        self.primary_violations += other.primary_violations;
        self.cognitive_violations += other.cognitive_violations;
        self.primary_outages += other.primary_outages;
        self.cap_events += other.cap_events;
    }
}

/// Outcome of one block.
struct BlockOutcome {
    region: Option<usize>,
    k1: f64,
    k2: f64,
    p2: f64,
    primary_mode: usize,
    cognitive_mode: usize,
    primary_violation: bool,
    cognitive_violation: bool,
    outage: bool,
    capped: bool,
}

struct Runner<'a> {
    plan: SchemePlan<'a>,
    link: LinkSetup<'a>,
    noise: f64,
    cap: f64,
    rates: Vec<f64>,
}

impl Runner<'_> {
    fn violates(&self, mode: usize, gamma: f64, target: BerTarget) -> bool {
        if mode == 0 {
            return false;
        }
        let m = &self.link.table.modes()[mode];
        ber_probability(gamma, m).map(|b| b > target.value()).unwrap_or(true)
    }

    fn block(&self, g: &BlockGains) -> BlockOutcome {
        let p1 = self.link.primary_power;
        let n0 = self.noise;
        let mut out = BlockOutcome {
            region: None,
            k1: 0.0,
            k2: 0.0,
            p2: 0.0,
            primary_mode: 0,
            cognitive_mode: 0,
            primary_violation: false,
            cognitive_violation: false,
            outage: false,
            capped: false,
        };
        match self.plan {
            SchemePlan::VariablePower { grid, policy } => {
                let (alpha, beta) = (g.alpha(), g.beta());
                let i = locate_region(alpha, beta, grid);
                out.region = Some(i);
                let k2 = policy.cognitive_modes[i];
                let mut p2 = 0.0;
                if k2 > 0 {
                    p2 = p1 * grid.cognitive.get(k2) / beta;
                    if p2 > self.cap {
                        p2 = self.cap;
                        out.capped = true;
                    }
                }
                let gamma1 = p1 * g.s11 / (p2 * g.s21 + n0);
                let gamma2 = p2 * g.s22 / (p1 * g.s12 + n0);
                let k1 = if k2 > 0 {
                    grid.regions[i].primary_modes[k2]
                } else {
                    grid.primary.select_mode(p1 * g.s11 / self.link.model.noise_power())
                };
                out.primary_mode = k1;
                out.cognitive_mode = k2;
                out.p2 = p2;
                out.outage = k2 > 0 && k1 == 0;
                out.primary_violation = self.violates(k1, gamma1, self.link.primary_target);
                out.cognitive_violation = self.violates(k2, gamma2, self.link.cognitive_target);
                out.k1 = self.rates[k1];
                out.k2 = self.rates[k2];
            }
            SchemePlan::ConstantPower {
                power,
                primary,
                cognitive,
            } => {
                let model = self.link.model;
                let design_n0 = model.noise_power();
                let k1 = primary.select_mode(p1 * g.s11 / (power * g.s21 + design_n0));
                let k2 = if power > 0.0 {
                    cognitive.select_mode(power * g.s22 / (p1 * g.s12 + design_n0))
                } else {
                    0
                };
                let gamma1 = p1 * g.s11 / (power * g.s21 + n0);
                let gamma2 = power * g.s22 / (p1 * g.s12 + n0);
                out.primary_mode = k1;
                out.cognitive_mode = k2;
                out.p2 = power;
                out.outage = k2 > 0 && k1 == 0;
                out.primary_violation = self.violates(k1, gamma1, self.link.primary_target);
                out.cognitive_violation = self.violates(k2, gamma2, self.link.cognitive_target);
                out.k1 = self.rates[k1];
                out.k2 = self.rates[k2];
            }
            SchemePlan::InterweaveConstant {
                lambda,
                power_budget,
                primary,
                cognitive,
            } => {
                let design_n0 = self.link.model.noise_power();
                if lambda > 0.0 {
                    let k1 = primary.select_mode(p1 * g.s11 / (lambda * design_n0));
                    out.primary_mode = k1;
                    out.primary_violation =
                        self.violates(k1, p1 * g.s11 / (lambda * n0), self.link.primary_target);
                    out.k1 = lambda * self.rates[k1];
                }
                if lambda < 1.0 {
                    let share = 1.0 - lambda;
                    let k2 = cognitive.select_mode(power_budget * g.s22 / (share * design_n0));
                    out.cognitive_mode = k2;
                    out.cognitive_violation = self.violates(
                        k2,
                        power_budget * g.s22 / (share * n0),
                        self.link.cognitive_target,
                    );
                    out.k2 = share * self.rates[k2];
                    out.p2 = power_budget;
                }
            }
            SchemePlan::InterweaveAdaptive {
                lambda,
                primary,
                cognitive,
                adaptive,
            } => {
                let design_n0 = self.link.model.noise_power();
                if lambda > 0.0 {
                    let k1 = primary.select_mode(p1 * g.s11 / (lambda * design_n0));
                    out.primary_mode = k1;
                    out.primary_violation =
                        self.violates(k1, p1 * g.s11 / (lambda * n0), self.link.primary_target);
                    out.k1 = lambda * self.rates[k1];
                }
                if let (Some(sol), true) = (adaptive, lambda < 1.0) {
                    let share = 1.0 - lambda;
                    let x = g.s22 / design_n0;
                    let k2 = sol.mode_for(x);
                    if k2 > 0 {
                        let mut p = cognitive.get(k2) / x;
                        if p > self.cap {
                            p = self.cap;
                            out.capped = true;
                        }
                        out.cognitive_mode = k2;
                        out.cognitive_violation =
                            self.violates(k2, p * g.s22 / n0, self.link.cognitive_target);
                        out.k2 = share * self.rates[k2];
                        out.p2 = share * p;
                    }
                }
            }
        }
        out
    }

    fn chunk(&self, seed: u64, start: u64, len: u64, margin: f64, regions: usize) -> SimReport {
        let mut rep = SimReport::empty(seed, self.plan.kind(), margin, regions);
        let mut streams = GainStreams::at_block(seed, start);
        for _ in 0..len {
            let g = sample_block_gains(self.link.model, &mut streams);
            let b = self.block(&g);
            rep.blocks += 1;
            rep.k1.push(b.k1);
            rep.k2.push(b.k2);
            rep.p2.push(b.p2);
            if let Some(i) = b.region {
                rep.region_hits[i] += 1;
            }
            rep.primary_active += u64::from(b.primary_mode > 0);
            rep.cognitive_active += u64::from(b.cognitive_mode > 0);
            rep.primary_violations += u64::from(b.primary_violation);
            rep.cognitive_violations += u64::from(b.cognitive_violation);
            rep.primary_outages += u64::from(b.outage);
            rep.cap_events += u64::from(b.capped);
        }
        rep
    }
}

fn check_consistency(plan: &SchemePlan, link: &LinkSetup) -> Result<()> {
    let table_rates = link.table.rates();
    let check = |th: &Thresholds, what: &str| {
        if th.rates() != table_rates.as_slice() {
            Err(Error::Config {
                key: what.into(),
                line: 0,
                message: "thresholds do not come from the configured AMC table".into(),
            })
        } else {
            Ok(())
        }
    };
    match plan {
        SchemePlan::VariablePower { grid, policy } => {
            check(&grid.primary, "grid.primary")?;
            check(&grid.cognitive, "grid.cognitive")?;
            if policy.cognitive_modes.len() != grid.len() {
                return Err(Error::Config {
                    key: "policy".into(),
                    line: 0,
                    message: format!(
                        "policy covers {} regions, grid has {}",
                        policy.cognitive_modes.len(),
                        grid.len()
                    ),
                });
            }
            if grid.model != *link.model {
                return Err(Error::Config {
                    key: "grid.model".into(),
                    line: 0,
                    message: "grid was built for a different gain model".into(),
                });
            }
        }
        SchemePlan::ConstantPower {
            primary, cognitive, ..
        }
        | SchemePlan::InterweaveConstant {
            primary, cognitive, ..
        }
        | SchemePlan::InterweaveAdaptive {
            primary, cognitive, ..
        } => {
            check(primary, "primary")?;
            check(cognitive, "cognitive")?;
        }
    }
    Ok(())
}

/// Simulate `config.blocks` blocks of a scheme.
pub fn simulate_scheme(config: &SimConfig, plan: SchemePlan, link: LinkSetup) -> Result<SimReport> {
    if config.blocks == 0 {
        return Err(Error::domain("need at least one block"));
    }
    check_consistency(&plan, &link)?;
    let regions = match plan {
        SchemePlan::VariablePower { grid, .. } => grid.len(),
        _ => 0,
    };
    let runner = Runner {
        plan,
        link,
        noise: config.noise_override.unwrap_or(link.model.noise_power()),
        cap: config.power_cap_factor * link.power_budget,
        rates: link.table.rates(),
    };
    let chunks = config.blocks.div_ceil(CHUNK);
    let parts: Vec<SimReport> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(config.blocks - start);
            runner.chunk(config.seed, start, len, config.margin, regions)
        })
        .collect();
    let mut iter = parts.into_iter();
    let mut report = iter.next().expect("at least one chunk");
    for p in iter {
        report.absorb(&p);
    }
    Ok(report)
}

/// Pool reports that differ only in seed.
pub fn summarize(reports: &[SimReport]) -> Result<SimReport> {
    let first = reports.first().ok_or_else(|| Error::Merge("no reports".into()))?;
    let mut out = first.clone();
    for r in &reports[1..] {
        if r.scheme != first.scheme || r.margin != first.margin || r.region_hits.len() != first.region_hits.len() {
            return Err(Error::Merge(format!(
                "cannot pool {} (margin {}) with {} (margin {})",
                first.scheme.name(),
                first.margin,
                r.scheme.name(),
                r.margin
            )));
        }
        out.seeds.extend_from_slice(&r.seeds);
        out.absorb(r);
    }
    Ok(out)
}
