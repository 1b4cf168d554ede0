//! Command implementations. Each writes CSV files into the output
//! directory and reports whether the requested problem was feasible.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, OracleFamily};
use crate::amc::Thresholds;
use crate::baselines::{interweave, AdaptivePower, InterweaveScheme};
use crate::error::{Error, Result};
use crate::fading::GainModel;
use crate::optimizer::instances::{random_instance, InstanceFamily};
use crate::optimizer::{
    constant_power_optimize, d1_spread, exhaustive_optimize, greedy_optimize, Feasibility, Instance,
    PolicyAssignment, ProblemSpec,
};
use crate::regions::{build_grid, RegionGrid};
use crate::simulate::{simulate_scheme, LinkSetup, SchemeKind, SchemePlan, SimConfig};

/// Schemes evaluated by `sweep`, in output order.
pub const SWEEP_SCHEMES: [SchemeKind; 4] = [
    SchemeKind::VariablePower,
    SchemeKind::ConstantPower,
    SchemeKind::InterweaveConstant,
    SchemeKind::InterweaveAdaptive,
];

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Set when the requested problem has no feasible policy.
    pub infeasible: Option<String>,
}

/// Fixed-width scientific notation with 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.11e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Design (margin-tightened) and exact threshold sets.
#[derive(Debug, Clone)]
pub struct ThresholdSets {
    pub primary_design: Thresholds,
    pub cognitive_design: Thresholds,
    pub primary_exact: Thresholds,
    pub cognitive_exact: Thresholds,
}

pub fn threshold_sets(cfg: &ExperimentConfig) -> Result<ThresholdSets> {
    Ok(ThresholdSets {
        primary_design: cfg.table.thresholds(cfg.primary_target.tightened(cfg.margin)?)?,
        cognitive_design: cfg.table.thresholds(cfg.cognitive_target.tightened(cfg.margin)?)?,
        primary_exact: cfg.table.thresholds(cfg.primary_target)?,
        cognitive_exact: cfg.table.thresholds(cfg.cognitive_target)?,
    })
}

pub fn grid_for(cfg: &ExperimentConfig, th: &ThresholdSets, model: &GainModel) -> Result<RegionGrid> {
    build_grid(
        &th.primary_design,
        &th.cognitive_design,
        model,
        cfg.primary_power,
        &cfg.grid,
    )
}

pub fn problem_spec(cfg: &ExperimentConfig, e1: f64, p2max: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(
        e1,
        cfg.primary_power,
        p2max,
        cfg.primary_target,
        cfg.cognitive_target,
        cfg.margin,
    )
}

/// Analytic averages of one scheme at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemePoint {
    pub scheme: SchemeKind,
    pub k1: f64,
    pub k2: f64,
    pub p2: f64,
    /// Constant-power schemes: the transmit power used.
    pub power: Option<f64>,
    /// Interweave schemes: the primary activity fraction.
    pub lambda: Option<f64>,
    pub policy: Option<PolicyAssignment>,
    pub adaptive: Option<AdaptivePower>,
}

/// Solve one scheme at `(e1, p2max)`.
pub fn evaluate_scheme(
    cfg: &ExperimentConfig,
    th: &ThresholdSets,
    model: &GainModel,
    instance: &Instance,
    scheme: SchemeKind,
    e1: f64,
    p2max: f64,
) -> Result<Feasibility<SchemePoint>> {
    let spec = problem_spec(cfg, e1, p2max)?;
    let point = match scheme {
        SchemeKind::VariablePower => match greedy_optimize(instance, &spec)?.outcome {
            Feasibility::Feasible(p) => SchemePoint {
                scheme,
                k1: p.averages.k1,
                k2: p.averages.k2,
                p2: p.averages.p2,
                power: None,
                lambda: None,
                policy: Some(p),
                adaptive: None,
            },
            Feasibility::Infeasible { reason } => return Ok(Feasibility::Infeasible { reason }),
        },
        SchemeKind::ConstantPower => {
            match constant_power_optimize(model, &th.primary_exact, &th.cognitive_exact, &spec)? {
                Feasibility::Feasible(s) => SchemePoint {
                    scheme,
                    k1: s.averages.k1,
                    k2: s.averages.k2,
                    p2: s.averages.p2,
                    power: Some(s.power),
                    lambda: None,
                    policy: None,
                    adaptive: None,
                },
                Feasibility::Infeasible { reason } => return Ok(Feasibility::Infeasible { reason }),
            }
        }
        SchemeKind::InterweaveConstant | SchemeKind::InterweaveAdaptive => {
            let which = if scheme == SchemeKind::InterweaveConstant {
                InterweaveScheme::ConstantPower
            } else {
                InterweaveScheme::AdaptivePower
            };
            let r = match interweave(
                model,
                &th.primary_exact,
                &th.cognitive_exact,
                cfg.primary_power,
                e1,
                p2max,
                which,
            )? {
                Feasibility::Feasible(r) => r,
                Feasibility::Infeasible { reason } => return Ok(Feasibility::Infeasible { reason }),
            };
            let share = 1.0 - r.activity_fraction;
            let p2 = match (&r.adaptive, which) {
                (_, InterweaveScheme::ConstantPower) if share > 0.0 => p2max,
                (Some(a), InterweaveScheme::AdaptivePower) => share * a.power,
                _ => 0.0,
            };
            SchemePoint {
                scheme,
                k1: r.primary_rate,
                k2: r.cognitive_rate,
                p2,
                power: None,
                lambda: Some(r.activity_fraction),
                policy: None,
                adaptive: r.adaptive,
            }
        }
    };
    Ok(Feasibility::Feasible(point))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn first_model(cfg: &ExperimentConfig) -> Result<(Option<f64>, GainModel)> {
    Ok(cfg.channel.models()?.remove(0))
}

/// Optimize the variable-power policy at the first configured point.
pub fn optimize(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    prepare(dir)?;
    let th = threshold_sets(cfg)?;
    let (_, model) = first_model(cfg)?;
    let grid = grid_for(cfg, &th, &model)?;
    let instance = Instance::from_grid(&grid);
    let (e1, p2max) = (cfg.e1[0], cfg.power_budgets[0]);
    let spec = problem_spec(cfg, e1, p2max)?;
    let run = greedy_optimize(&instance, &spec)?;

    let policy_path = dir.join("policy.csv");
    let summary_path = dir.join("summary.csv");
    let rates = grid.rates();
    let mut policy_rows = Vec::new();
    let (summary, infeasible) = match &run.outcome {
        Feasibility::Feasible(p) => {
            for (i, r) in grid.regions.iter().enumerate() {
                let k2 = p.cognitive_modes[i];
                let k1 = p.primary_modes[i];
                let k1_rate = k1.map(|m| rates[m]).unwrap_or(r.idle_primary_rate);
                let p2 = if k2 > 0 {
                    r.norm_power.finite().map(|x| cfg.primary_power * grid.cognitive.get(k2) * x)
                } else {
                    Some(0.0)
                };
                policy_rows.push(vec![
                    i.to_string(),
                    k2.to_string(),
                    k1.map(|m| m.to_string()).unwrap_or_else(|| "idle".into()),
                    fmt_float(r.mass),
                    fmt_opt(r.norm_power.finite()),
                    fmt_float(rates[k2]),
                    fmt_float(k1_rate),
                    fmt_opt(p2),
                ]);
            }
            (
                vec![
                    fmt_float(e1),
                    fmt_float(p2max),
                    grid.len().to_string(),
                    fmt_float(p.averages.k2),
                    fmt_float(p.averages.k1),
                    fmt_float(p.averages.p2),
                    p.iterations.to_string(),
                    fmt_float(p.primary_outage_mass(&instance)),
                    "true".into(),
                ],
                None,
            )
        }
        Feasibility::Infeasible { reason } => (
            vec![
                fmt_float(e1),
                fmt_float(p2max),
                grid.len().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
            ],
            Some(reason.clone()),
        ),
    };
    write_rows(
        &policy_path,
        &["region", "cognitive_mode", "primary_mode", "pr", "p", "cognitive_rate", "primary_rate", "power"],
        &policy_rows,
    )?;
    write_rows(
        &summary_path,
        &["e1", "p2max", "regions", "k2avg", "k1avg", "p2avg", "iterations", "outage_mass", "feasible"],
        &[summary],
    )?;
    Ok(Outcome {
        files: vec![policy_path, summary_path],
        infeasible,
    })
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub e1: f64,
    pub p2max: f64,
    pub separation: Option<f64>,
    pub regions: usize,
    pub scheme: SchemeKind,
    pub point: Option<SchemePoint>,
}

/// Evaluate every scheme over the configured grids. Regions are rebuilt per
/// separation and shared across `E1` and `P2max`.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let th = threshold_sets(cfg)?;
    let mut rows = Vec::new();
    for (separation, model) in cfg.channel.models()? {
        let grid = grid_for(cfg, &th, &model)?;
        let instance = Instance::from_grid(&grid);
        let jobs: Vec<(f64, f64, SchemeKind)> = cfg
            .power_budgets
            .iter()
            .flat_map(|&p| cfg.e1.iter().flat_map(move |&e| SWEEP_SCHEMES.map(|s| (e, p, s))))
            .collect();
        let part: Vec<SweepRow> = jobs
            .par_iter()
            .map(|&(e1, p2max, scheme)| {
                let point = evaluate_scheme(cfg, &th, &model, &instance, scheme, e1, p2max)?;
                Ok(SweepRow {
                    e1,
                    p2max,
                    separation,
                    regions: grid.len(),
                    scheme,
                    point: point.into_feasible(),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(part);
    }
    Ok(rows)
}

pub fn sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    prepare(dir)?;
    let rows: Vec<Vec<String>> = sweep_rows(cfg)?
        .into_iter()
        .map(|r| {
            let p = r.point.as_ref();
            vec![
                fmt_float(r.e1),
                fmt_float(r.p2max),
                fmt_opt(r.separation),
                r.regions.to_string(),
                r.scheme.name().to_string(),
                fmt_opt(p.map(|p| p.k2)),
                fmt_opt(p.map(|p| p.k1)),
                fmt_opt(p.map(|p| p.p2)),
                fmt_opt(p.and_then(|p| p.lambda)),
                p.is_some().to_string(),
            ]
        })
        .collect();
    let path = dir.join("sweep.csv");
    write_rows(
        &path,
        &["e1", "p2max", "separation", "regions", "scheme", "k2avg", "k1avg", "p2avg", "lambda", "feasible"],
        &rows,
    )?;
    Ok(Outcome {
        files: vec![path],
        infeasible: None,
    })
}

/// Solve the configured scheme at the first point and simulate it.
pub fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    prepare(dir)?;
    let th = threshold_sets(cfg)?;
    let (_, model) = first_model(cfg)?;
    let scheme = cfg.simulation.scheme;
    let grid = if scheme == SchemeKind::VariablePower {
        Some(grid_for(cfg, &th, &model)?)
    } else {
        None
    };
    let instance = grid
        .as_ref()
        .map(Instance::from_grid)
        .unwrap_or_else(|| Instance::new(Vec::new(), &th.cognitive_design).expect("empty instance"));
    let (e1, p2max) = (cfg.e1[0], cfg.power_budgets[0]);
    let point = match evaluate_scheme(cfg, &th, &model, &instance, scheme, e1, p2max)? {
        Feasibility::Feasible(p) => p,
        Feasibility::Infeasible { reason } => {
            return Ok(Outcome {
                files: Vec::new(),
                infeasible: Some(reason),
            })
        }
    };
    let plan = match scheme {
        SchemeKind::VariablePower => SchemePlan::VariablePower {
            grid: grid.as_ref().expect("grid built"),
            policy: point.policy.as_ref().expect("policy present"),
        },
        SchemeKind::ConstantPower => SchemePlan::ConstantPower {
            power: point.power.expect("power present"),
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
        },
        SchemeKind::InterweaveConstant => SchemePlan::InterweaveConstant {
            lambda: point.lambda.expect("lambda present"),
            power_budget: p2max,
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
        },
        SchemeKind::InterweaveAdaptive => SchemePlan::InterweaveAdaptive {
            lambda: point.lambda.expect("lambda present"),
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
            adaptive: point.adaptive.as_ref(),
        },
    };
    let link = LinkSetup {
        model: &model,
        table: &cfg.table,
        primary_power: cfg.primary_power,
        power_budget: p2max,
        primary_target: cfg.primary_target,
        cognitive_target: cfg.cognitive_target,
    };
    let sim = SimConfig {
        margin: cfg.margin,
        power_cap_factor: cfg.simulation.power_cap_factor,
        ..SimConfig::new(cfg.simulation.seed, cfg.simulation.blocks)
    };
    let rep = simulate_scheme(&sim, plan, link)?;

    let path = dir.join("simulation.csv");
    write_rows(
        &path,
        &[
            "scheme",
            "seed",
            "blocks",
            "margin",
            "k1avg",
            "k1_half_width",
            "k2avg",
            "k2_half_width",
            "p2avg",
            "p2_half_width",
            "analytic_k1avg",
            "analytic_k2avg",
            "analytic_p2avg",
            "primary_violation_rate",
            "cognitive_violation_rate",
            "primary_outage_rate",
            "cap_rate",
        ],
        &[vec![
            scheme.name().to_string(),
            cfg.simulation.seed.to_string(),
            rep.blocks.to_string(),
            fmt_float(cfg.margin),
            fmt_float(rep.k1.mean),
            fmt_float(rep.k1.half_width()),
            fmt_float(rep.k2.mean),
            fmt_float(rep.k2.half_width()),
            fmt_float(rep.p2.mean),
            fmt_float(rep.p2.half_width()),
            fmt_float(point.k1),
            fmt_float(point.k2),
            fmt_float(point.p2),
            fmt_float(rep.primary_violation_rate()),
            fmt_float(rep.cognitive_violation_rate()),
            fmt_float(rep.primary_outage_rate()),
            fmt_float(rep.cap_rate()),
        ]],
    )?;
    let mut files = vec![path];
    if let Some(grid) = &grid {
        let path = dir.join("region_frequencies.csv");
        let rows: Vec<Vec<String>> = rep
            .region_frequencies()
            .iter()
            .zip(&grid.regions)
            .map(|(f, r)| vec![r.index.to_string(), fmt_float(r.mass), fmt_float(*f)])
            .collect();
        write_rows(&path, &["region", "pr", "frequency"], &rows)?;
        files.push(path);
    }
    Ok(Outcome {
        files,
        infeasible: None,
    })
}

/// One row of `oracle.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub instance: usize,
    pub seed: u64,
    pub regions: usize,
    pub family: InstanceFamily,
    pub greedy: Option<f64>,
    pub exhaustive: Option<f64>,
    pub d1_spread: f64,
}

impl OracleRow {
    /// `exhaustive - greedy`, when both are feasible.
    pub fn gap(&self) -> Option<f64> {
        Some(self.exhaustive? - self.greedy?)
    }

    pub fn relative_gap(&self) -> Option<f64> {
        let e = self.exhaustive?;
        self.gap().map(|g| if e > 0.0 { g / e } else { 0.0 })
    }
}

fn family_name(f: InstanceFamily) -> &'static str {
    match f {
        InstanceFamily::General => "general",
        InstanceFamily::ConstantD1 => "constant-d1",
    }
}

/// Greedy against exhaustive search on seeded random instances.
pub fn oracle_rows(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    let o = &cfg.oracle;
    (0..o.instances)
        .into_par_iter()
        .map(|k| {
            let seed = o.seed.wrapping_add(k as u64);
            let regions = o.regions[k % o.regions.len()];
            let family = match o.family {
                OracleFamily::General => InstanceFamily::General,
                OracleFamily::ConstantD1 => InstanceFamily::ConstantD1,
                OracleFamily::Mixed if k % 2 == 1 => InstanceFamily::ConstantD1,
                OracleFamily::Mixed => InstanceFamily::General,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ri = random_instance(&mut rng, o.modes, regions, family)?;
            let greedy = greedy_optimize(&ri.instance, &ri.spec)?.outcome;
            let exhaustive = exhaustive_optimize(&ri.instance, &ri.spec, o.cap)?;
            Ok(OracleRow {
                instance: k,
                seed,
                regions,
                family,
                greedy: greedy.feasible().map(|p| p.averages.k2),
                exhaustive: exhaustive.feasible().map(|p| p.averages.k2),
                d1_spread: d1_spread(&ri.instance)?.spread(),
            })
        })
        .collect()
}

pub fn compare_oracle(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    prepare(dir)?;
    let rows: Vec<Vec<String>> = oracle_rows(cfg)?
        .iter()
        .map(|r| {
            let holds = r.gap().map(|g| g.abs() <= 1e-9).unwrap_or(r.greedy.is_none() && r.exhaustive.is_none());
            vec![
                r.instance.to_string(),
                r.seed.to_string(),
                r.regions.to_string(),
                family_name(r.family).to_string(),
                fmt_opt(r.greedy),
                fmt_opt(r.exhaustive),
                fmt_opt(r.gap()),
                fmt_opt(r.relative_gap()),
                fmt_float(r.d1_spread),
                (r.d1_spread <= 1e-12).to_string(),
                holds.to_string(),
            ]
        })
        .collect();
    let path = dir.join("oracle.csv");
    write_rows(
        &path,
        &[
            "instance",
            "seed",
            "regions",
            "family",
            "greedy_k2avg",
            "exhaustive_k2avg",
            "gap",
            "relative_gap",
            "d1_spread",
            "constant_d1",
            "equal",
        ],
        &rows,
    )?;
    Ok(Outcome {
        files: vec![path],
        infeasible: None,
    })
}

/// Write the region partition for the first configured gain model.
pub fn regions_export(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    prepare(dir)?;
    let th = threshold_sets(cfg)?;
    let (_, model) = first_model(cfg)?;
    let grid = grid_for(cfg, &th, &model)?;
    let rows: Vec<Vec<String>> = grid
        .regions
        .iter()
        .map(|r| {
            let set = grid.rate_set(r.index);
            let mut pairs: Vec<String> = Vec::new();
            if set.idle {
                pairs.push("idle".into());
            }
            pairs.extend(set.outage.iter().chain(&set.positive).map(|(k1, k2)| format!("{k1}:{k2}")));
            vec![
                r.index.to_string(),
                fmt_float(r.product_range.0),
                fmt_float(r.product_range.1),
                fmt_float(r.radial_range.0),
                fmt_float(r.radial_range.1),
                fmt_float(r.mass),
                fmt_opt(r.norm_power.finite()),
                r.norm_power.is_divergent().to_string(),
                fmt_float(r.idle_primary_rate),
                pairs.join(";"),
            ]
        })
        .collect();
    let path = dir.join("regions.csv");
    write_rows(
        &path,
        &[
            "index",
            "t_low",
            "t_high",
            "w_low",
            "w_high",
            "pr",
            "p",
            "divergent",
            "idle_primary_rate",
            "rate_set",
        ],
        &rows,
    )?;
    Ok(Outcome {
        files: vec![path],
        infeasible: None,
    })
}
