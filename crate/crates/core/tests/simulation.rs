use crlink::cli::commands::{evaluate_scheme, grid_for, threshold_sets};
use crlink::cli::{apply_override, parse_config, ExperimentConfig};
use crlink::optimizer::Instance;
use crlink::simulate::{simulate_scheme, LinkSetup, SchemeKind, SchemePlan, SimConfig, SimReport};
use crlink::Feasibility;

const DOC: &str = "\
[gains]
s11 = 1.0
s22 = 1.0
s12 = 0.03
s21 = 0.03
noise_power = 1e-3

[problem]
e1 = 2.0
p2max = 2.0
";

fn config(overrides: &[&str]) -> ExperimentConfig {
    let mut text = DOC.to_string();
    for o in overrides {
        text = apply_override(&text, o).unwrap();
    }
    parse_config(&text).unwrap()
}

struct Run {
    report: SimReport,
    k1: f64,
    k2: f64,
    p2: f64,
    outage_mass: Option<f64>,
}

fn run(cfg: &ExperimentConfig, scheme: SchemeKind, sim: SimConfig) -> Run {
    let th = threshold_sets(cfg).unwrap();
    let (_, model) = cfg.channel.models().unwrap()[0];
    let grid = grid_for(cfg, &th, &model).unwrap();
    let instance = Instance::from_grid(&grid);
    let point = match evaluate_scheme(cfg, &th, &model, &instance, scheme, cfg.e1[0], cfg.power_budgets[0]).unwrap() {
        Feasibility::Feasible(p) => p,
        Feasibility::Infeasible { reason } => panic!("{reason}"),
    };
    let plan = match scheme {
        SchemeKind::VariablePower => SchemePlan::VariablePower {
            grid: &grid,
            policy: point.policy.as_ref().unwrap(),
        },
        SchemeKind::ConstantPower => SchemePlan::ConstantPower {
            power: point.power.unwrap(),
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
        },
        SchemeKind::InterweaveConstant => SchemePlan::InterweaveConstant {
            lambda: point.lambda.unwrap(),
            power_budget: cfg.power_budgets[0],
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
        },
        SchemeKind::InterweaveAdaptive => SchemePlan::InterweaveAdaptive {
            lambda: point.lambda.unwrap(),
            primary: &th.primary_exact,
            cognitive: &th.cognitive_exact,
            adaptive: point.adaptive.as_ref(),
        },
    };
    let link = LinkSetup {
        model: &model,
        table: &cfg.table,
        primary_power: cfg.primary_power,
        power_budget: cfg.power_budgets[0],
        primary_target: cfg.primary_target,
        cognitive_target: cfg.cognitive_target,
    };
    let report = simulate_scheme(&SimConfig { margin: cfg.margin, ..sim }, plan, link).unwrap();
    Run {
        report,
        k1: point.k1,
        k2: point.k2,
        p2: point.p2,
        outage_mass: point.policy.as_ref().map(|p| p.primary_outage_mass(&instance)),
    }
}

fn assert_close(r: &Run, check_power: bool) {
    let rep = &r.report;
    let mut checks = vec![("k1", &rep.k1, r.k1), ("k2", &rep.k2, r.k2)];
    if check_power {
        checks.push(("p2", &rep.p2, r.p2));
    }
    for (name, stat, exact) in checks {
        let se = stat.std_error().max(1e-12);
        assert!((stat.mean - exact).abs() < 4.0 * se, "{:?} {name}: {} vs {exact}", rep.scheme, stat.mean);
    }
}

#[test]
fn every_scheme_matches_its_analytic_averages() {
    let cfg = config(&[]);
    for scheme in [
        SchemeKind::VariablePower,
        SchemeKind::ConstantPower,
        SchemeKind::InterweaveConstant,
        SchemeKind::InterweaveAdaptive,
    ] {
        // With a generous budget the adaptive baseline inverts fades down to
        // vanishing cutoffs; its mean power then hinges on events far rarer
        // than the sample can show, so power is checked separately below.
        let check_power = scheme != SchemeKind::InterweaveAdaptive;
        assert_close(&run(&cfg, scheme, SimConfig::new(17, 300_000)), check_power);
    }
}

#[test]
fn adaptive_interweave_power_matches_at_small_budget() {
    let cfg = config(&["problem.p2max=0.01"]);
    let r = run(&cfg, SchemeKind::InterweaveAdaptive, SimConfig::new(23, 400_000));
    assert_close(&r, true);
    assert_eq!(r.report.cap_events, 0);
}

#[test]
fn noise_free_injection_has_no_violations() {
    let cfg = config(&[]);
    let sim = SimConfig {
        noise_override: Some(0.0),
        ..SimConfig::new(3, 200_000)
    };
    let r = run(&cfg, SchemeKind::VariablePower, sim);
    assert_eq!(r.report.primary_violations, 0);
    assert_eq!(r.report.cognitive_violations, 0);
}

#[test]
fn violations_fall_as_the_margin_grows() {
    let rates: Vec<(f64, f64)> = ["1.0", "2.0", "4.0"]
        .iter()
        .map(|k| {
            let cfg = config(&[&format!("problem.margin={k}")]);
            let r = run(&cfg, SchemeKind::VariablePower, SimConfig::new(9, 200_000));
            (r.report.primary_violation_rate(), r.report.cognitive_violation_rate())
        })
        .collect();
    for w in rates.windows(2) {
        assert!(w[1].0 <= w[0].0 && w[1].1 <= w[0].1, "{rates:?}");
    }
    assert!(rates[0].1 > rates[2].1, "{rates:?}");
}

#[test]
fn outage_frequency_matches_outage_mass() {
    let cfg = config(&[]);
    let r = run(&cfg, SchemeKind::VariablePower, SimConfig::new(5, 400_000));
    let mass = r.outage_mass.unwrap();
    let n = r.report.blocks as f64;
    let sd = (mass * (1.0 - mass) / n).sqrt();
    assert!((r.report.primary_outage_rate() - mass).abs() < 4.0 * sd);
}

#[test]
fn power_cap_is_enforced() {
    let cfg = config(&[]);
    let sim = SimConfig {
        power_cap_factor: 0.5,
        ..SimConfig::new(1, 100_000)
    };
    let r = run(&cfg, SchemeKind::VariablePower, sim);
    assert!(r.report.cap_rate() > 0.0);
    assert!(r.report.p2.mean <= 1.0 + 1e-12);
    let free = run(&cfg, SchemeKind::VariablePower, SimConfig::new(1, 100_000));
    assert_eq!(free.report.cap_events, 0);
}
