//! Experiment configuration: a sectioned `key = value` document (TOML).
//!
//! ```toml
//! [amc]                  # optional; defaults to the built-in table
//! modes = [[0.5, 0.2, 3.0], [1.0, 0.2, 1.5]]   # (rate, fit_a, fit_slope)
//!
//! [gains]                # or [pathloss], never both
//! s11 = 1.0
//! s22 = 1.0
//! s12 = 0.03
//! s21 = 0.03
//! noise_power = 1e-3
//!
//! [pathloss]
//! s0 = 1.0
//! exponent = 3.0
//! separation = [0.5, 1.0, 2.0]   # number or sorted list
//! noise_power = 1e-3
//!
//! [problem]
//! e1 = [0.0, 1.0, 2.0]   # number or sorted list
//! p1 = 1.0
//! p2max = 2.0            # number or sorted list
//! b1 = 1e-5
//! b2 = 1e-5
//! margin = 2.0
//!
//! [grid]
//! radial = 10
//! bands = 30
//! tolerance = 1e-8
//! max_regions = 200000
//!
//! [simulation]
//! seed = 1
//! blocks = 1000000
//! scheme = "variable-power"  # constant-power, interweave-constant, interweave-adaptive
//! power_cap_factor = 1e6
//!
//! [oracle]
//! instances = 100
//! regions = [4, 6, 8]
//! modes = 3
//! seed = 1
//! family = "mixed"           # general, constant-d1
//! cap = 50000000
//!
//! [output]
//! dir = "out"
//! ```

use std::path::PathBuf;

use serde::Deserialize;

use crate::amc::{AmcTable, BerTarget};
use crate::error::{Error, Result};
use crate::fading::{GainModel, PathLossGeometry};
use crate::optimizer::DEFAULT_ENUMERATION_CAP;
use crate::quadrature::QuadOptions;
use crate::regions::GridOptions;
use crate::simulate::SchemeKind;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalars {
    One(f64),
    Many(Vec<f64>),
}

impl Scalars {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Scalars::One(x) => vec![x],
            Scalars::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    amc: Option<RawAmc>,
    gains: Option<RawGains>,
    pathloss: Option<RawPathLoss>,
    problem: RawProblem,
    grid: Option<RawGrid>,
    simulation: Option<RawSimulation>,
    oracle: Option<RawOracle>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmc {
    modes: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    s11: f64,
    s22: f64,
    s12: f64,
    s21: f64,
    noise_power: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPathLoss {
    s0: f64,
    #[serde(default = "default_exponent")]
    exponent: f64,
    separation: Scalars,
    noise_power: f64,
}

fn default_exponent() -> f64 {
    3.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    e1: Scalars,
    #[serde(default = "one")]
    p1: f64,
    p2max: Scalars,
    #[serde(default = "default_ber")]
    b1: f64,
    #[serde(default = "default_ber")]
    b2: f64,
    #[serde(default = "default_margin")]
    margin: f64,
}

fn one() -> f64 {
    1.0
}
fn default_ber() -> f64 {
    1e-5
}
fn default_margin() -> f64 {
    2.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    radial: Option<usize>,
    bands: Option<usize>,
    tolerance: Option<f64>,
    max_regions: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    seed: Option<u64>,
    blocks: Option<u64>,
    scheme: Option<String>,
    power_cap_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    instances: Option<usize>,
    regions: Option<Vec<usize>>,
    modes: Option<usize>,
    seed: Option<u64>,
    family: Option<String>,
    cap: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Gains(GainModel),
    PathLoss {
        s0: f64,
        exponent: f64,
        separations: Vec<f64>,
        noise_power: f64,
    },
}

impl Channel {
    /// Gain models to evaluate, each with its transmitter separation if any.
    pub fn models(&self) -> Result<Vec<(Option<f64>, GainModel)>> {
        match self {
            Channel::Gains(m) => Ok(vec![(None, *m)]),
            Channel::PathLoss {
                s0,
                exponent,
                separations,
                noise_power,
            } => separations
                .iter()
                .map(|&d| {
                    let g = PathLossGeometry::new(*s0, *exponent, d)?;
                    Ok((Some(d), GainModel::from_geometry(&g, *noise_power)?))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleFamily {
    Mixed,
    General,
    ConstantD1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub instances: usize,
    pub regions: Vec<usize>,
    pub modes: usize,
    pub seed: u64,
    pub family: OracleFamily,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub seed: u64,
    pub blocks: u64,
    pub scheme: SchemeKind,
    pub power_cap_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub table: AmcTable,
    pub channel: Channel,
    pub e1: Vec<f64>,
    pub primary_power: f64,
    pub power_budgets: Vec<f64>,
    pub primary_target: BerTarget,
    pub cognitive_target: BerTarget,
    pub margin: f64,
    pub grid: GridOptions,
    pub simulation: SimulationSettings,
    pub oracle: OracleSettings,
    pub output_dir: PathBuf,
}

/// 1-based line of `key` inside `[section]`, or of the section header when
/// the key is absent; 0 when neither appears.
pub fn locate_key(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header_line = 0;
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header_line = k + 1;
            }
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = t.split_once('=') {
                if lhs.trim() == key {
                    return k + 1;
                }
            }
        }
    }
    header_line
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Replace or insert `key = value` inside `[section]`, adding the section
/// when missing.
pub fn apply_override(text: &str, assignment: &str) -> Result<String> {
    let bad = |msg: &str| Error::Config {
        key: assignment.to_string(),
        line: 0,
        message: msg.to_string(),
    };
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| bad("override must look like section.key=value"))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| bad("override key must be section.key"))?;
    let (section, key, value) = (section.trim(), key.trim(), value.trim());
    if section.is_empty() || key.is_empty() || value.is_empty() {
        return Err(bad("override must look like section.key=value"));
    }
    let new_line = format!("{key} = {value}");
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let line = locate_key(text, section, key);
    let header = lines
        .iter()
        .position(|l| l.trim() == format!("[{section}]"));
    match header {
        None => {
            lines.push(format!("[{section}]"));
            lines.push(new_line);
        }
        Some(h) => {
            let is_key = line > 0 && line - 1 != h;
            if is_key {
                lines[line - 1] = new_line;
            } else {
                lines.insert(h + 1, new_line);
            }
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    Ok(out)
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: format!("{section}.{key}"),
            line: locate_key(self.text, section, key),
            message: message.into(),
        }
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(section, key, format!("must be positive and finite, got {v}")))
        }
    }

    fn sorted(&self, section: &str, key: &str, v: Vec<f64>) -> Result<Vec<f64>> {
        if v.is_empty() {
            return Err(self.err(section, key, "list must not be empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.err(section, key, "values must be finite"));
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return Err(self.err(section, key, "list must be sorted ascending"));
        }
        Ok(v)
    }

    fn ber(&self, key: &str, v: f64) -> Result<BerTarget> {
        BerTarget::new(v).map_err(|_| self.err("problem", key, format!("must lie in (0, 1), got {v}")))
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
        Error::Config {
            key: "document".into(),
            line,
            message: e.message().replace('\n', " "),
        }
    })?;
    let ck = Checker { text };

    let table = match raw.amc {
        None => AmcTable::default_80211a(),
        Some(a) => AmcTable::new(&a.modes).map_err(|e| ck.err("amc", "modes", e.to_string()))?,
    };

    let channel = match (raw.gains, raw.pathloss) {
        (Some(_), Some(_)) => {
            return Err(Error::Config {
                key: "pathloss".into(),
                line: locate_key(text, "pathloss", ""),
                message: "[gains] and [pathloss] are mutually exclusive".into(),
            })
        }
        (None, None) => {
            return Err(Error::Config {
                key: "gains".into(),
                line: 0,
                message: "one of [gains] or [pathloss] is required".into(),
            })
        }
        (Some(g), None) => {
            for (k, v) in [
                ("s11", g.s11),
                ("s22", g.s22),
                ("s12", g.s12),
                ("s21", g.s21),
                ("noise_power", g.noise_power),
            ] {
                ck.positive("gains", k, v)?;
            }
            Channel::Gains(GainModel::new(g.s11, g.s22, g.s12, g.s21, g.noise_power)?)
        }
        (None, Some(p)) => {
            ck.positive("pathloss", "s0", p.s0)?;
            ck.positive("pathloss", "exponent", p.exponent)?;
            ck.positive("pathloss", "noise_power", p.noise_power)?;
            let separations = ck.sorted("pathloss", "separation", p.separation.into_vec())?;
            if separations.iter().any(|&d| d < 0.0) {
                return Err(ck.err("pathloss", "separation", "must be >= 0"));
            }
            Channel::PathLoss {
                s0: p.s0,
                exponent: p.exponent,
                separations,
                noise_power: p.noise_power,
            }
        }
    };

    let pr = raw.problem;
    let e1 = ck.sorted("problem", "e1", pr.e1.into_vec())?;
    if e1.iter().any(|&x| x < 0.0) {
        return Err(ck.err("problem", "e1", "must be >= 0"));
    }
    let power_budgets = ck.sorted("problem", "p2max", pr.p2max.into_vec())?;
    for &p in &power_budgets {
        ck.positive("problem", "p2max", p)?;
    }
    let primary_power = ck.positive("problem", "p1", pr.p1)?;
    let primary_target = ck.ber("b1", pr.b1)?;
    let cognitive_target = ck.ber("b2", pr.b2)?;
    if !(pr.margin >= 1.0) || !pr.margin.is_finite() {
        return Err(ck.err("problem", "margin", format!("must be >= 1, got {}", pr.margin)));
    }
    for (key, b) in [("b1", primary_target), ("b2", cognitive_target)] {
        let design = b.tightened(pr.margin).map_err(|e| ck.err("problem", key, e.to_string()))?;
        table
            .thresholds(design)
            .map_err(|e| ck.err("problem", key, e.to_string()))?;
        table.thresholds(b).map_err(|e| ck.err("problem", key, e.to_string()))?;
    }

    let g = raw.grid.unwrap_or_default();
    let mut grid = GridOptions::default();
    if let Some(l) = g.radial {
        if l == 0 {
            return Err(ck.err("grid", "radial", "must be >= 1"));
        }
        grid.radial_cells = l;
    }
    if let Some(c) = g.bands {
        grid.product_cells = c;
    }
    if let Some(t) = g.tolerance {
        let t = ck.positive("grid", "tolerance", t)?;
        grid.quadrature = QuadOptions {
            abs_tol: t,
            rel_tol: t,
            ..grid.quadrature
        };
    }
    if let Some(m) = g.max_regions {
        grid.max_regions = m;
    }

    let s = raw.simulation.unwrap_or_default();
    let scheme = match s.scheme {
        None => SchemeKind::VariablePower,
        Some(name) => SchemeKind::parse(&name)
            .ok_or_else(|| ck.err("simulation", "scheme", format!("unknown scheme `{name}`")))?,
    };
    let blocks = s.blocks.unwrap_or(1_000_000);
    if blocks == 0 {
        return Err(ck.err("simulation", "blocks", "must be >= 1"));
    }
    let power_cap_factor = match s.power_cap_factor {
        Some(f) => ck.positive("simulation", "power_cap_factor", f)?,
        None => 1e6,
    };
    let simulation = SimulationSettings {
        seed: s.seed.unwrap_or(1),
        blocks,
        scheme,
        power_cap_factor,
    };

    let o = raw.oracle.unwrap_or_default();
    let family = match o.family.as_deref() {
        None | Some("mixed") => OracleFamily::Mixed,
        Some("general") => OracleFamily::General,
        Some("constant-d1") => OracleFamily::ConstantD1,
        Some(other) => {
            return Err(ck.err("oracle", "family", format!("unknown family `{other}`")));
        }
    };
    let regions = o.regions.unwrap_or_else(|| vec![4, 6, 8]);
    if regions.is_empty() || regions.contains(&0) {
        return Err(ck.err("oracle", "regions", "must be a nonempty list of positive counts"));
    }
    let modes = o.modes.unwrap_or(3);
    if modes == 0 {
        return Err(ck.err("oracle", "modes", "must be >= 1"));
    }
    let oracle = OracleSettings {
        instances: o.instances.unwrap_or(100),
        regions,
        modes,
        seed: o.seed.unwrap_or(1),
        family,
        cap: o.cap.unwrap_or(DEFAULT_ENUMERATION_CAP),
    };

    Ok(ExperimentConfig {
        table,
        channel,
        e1,
        primary_power,
        power_budgets,
        primary_target,
        cognitive_target,
        margin: pr.margin,
        grid,
        simulation,
        oracle,
        output_dir: raw.output.and_then(|o| o.dir).unwrap_or_else(|| PathBuf::from(".")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SECTION_V: &str = "\
[gains]
s11 = 1.0
s22 = 1.0
s12 = 0.03
s21 = 0.03
noise_power = 1e-3

[problem]
e1 = [0.0, 1.0, 2.0]
p1 = 1.0
p2max = 2.0
b1 = 1e-5
b2 = 1e-5
";

    #[test]
    fn section_v_document() {
        let c = parse_config(SECTION_V).unwrap();
        match c.channel {
            Channel::Gains(m) => assert_eq!(m.mean_s12(), 0.03),
            _ => panic!("expected explicit gains"),
        }
        assert_eq!(c.e1, vec![0.0, 1.0, 2.0]);
        assert_eq!(c.power_budgets, vec![2.0]);
        assert_eq!(c.margin, 2.0);
        assert_eq!(c.grid.radial_cells * c.grid.product_cells, 300);
    }

    #[test]
    fn exclusive_channel_sections() {
        let doc = format!("{SECTION_V}\n[pathloss]\ns0 = 1.0\nseparation = 1.0\nnoise_power = 1e-3\n");
        let e = parse_config(&doc).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "pathloss"), "{e}");
    }

    #[test]
    fn zero_ber_is_rejected_with_line() {
        let doc = SECTION_V.replace("b1 = 1e-5", "b1 = 0");
        match parse_config(&doc).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key, "problem.b1");
                assert_eq!(line, 12);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let doc = SECTION_V.replace("p1 = 1.0", "p1 = 1.0\nbogus = 3");
        match parse_config(&doc).unwrap_err() {
            Error::Config { line, message, .. } => {
                assert!(message.contains("bogus"), "{message}");
                assert!(line > 0);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let doc = SECTION_V.replace("e1 = [0.0, 1.0, 2.0]", "e1 = [1.0, 0.5]");
        assert!(matches!(parse_config(&doc), Err(Error::Config { ref key, .. }) if key == "problem.e1"));
    }

    #[test]
    fn overrides_replace_and_insert() {
        let doc = apply_override(SECTION_V, "problem.p2max=[2.0, 4.0]").unwrap();
        assert_eq!(parse_config(&doc).unwrap().power_budgets, vec![2.0, 4.0]);
        let doc = apply_override(&doc, "grid.radial=20").unwrap();
        assert_eq!(parse_config(&doc).unwrap().grid.radial_cells, 20);
        let doc = apply_override(&doc, "simulation.scheme=\"constant-power\"").unwrap();
        assert_eq!(parse_config(&doc).unwrap().simulation.scheme, SchemeKind::ConstantPower);
        assert!(apply_override(SECTION_V, "nodot=1").is_err());
    }
}
