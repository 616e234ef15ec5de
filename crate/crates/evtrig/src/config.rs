//! Flat `key = value` scenario files with `[section]` headers or dotted keys.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{self, Scenario};
use crate::design::DesignOptions;
use crate::error::{Error, Result};
use crate::sim::{DisturbanceMode, DisturbanceSpec, SimConfig};
use crate::trigger::TriggerRule;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

/// Keys are fully qualified (`sim.t_end`). Later duplicates are an error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

fn perr(line: usize, field: &str, msg: impl Into<String>) -> Error {
    Error::Parse { line, field: field.to_string(), msg: msg.into() }
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = RawConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| perr(line, body, "unterminated section header"))?
                    .trim();
                if !valid_ident(name) {
                    return Err(perr(line, name, "bad section name"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| perr(line, body, "expected `key = value`"))?;
            let k = k.trim();
            let v = v.trim();
            if !valid_ident(k) {
                return Err(perr(line, k, "bad key"));
            }
            if v.is_empty() {
                return Err(perr(line, k, "missing value"));
            }
            let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if let Some(prev) = out.entries.get(&full) {
                return Err(perr(line, &full, format!("duplicate key (first set on line {})", prev.line)));
            }
            out.entries.insert(full, Entry { line, value: v.to_string() });
        }
        Ok(out)
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|_| perr(e.line, key, format!("'{}' is not a number", e.value))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| perr(e.line, key, format!("'{}' is not a nonnegative integer", e.value))),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<u64>()
                .map(Some)
                .map_err(|_| perr(e.line, key, format!("'{}' is not a nonnegative integer", e.value))),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "on" => Ok(Some(true)),
                "false" | "no" | "off" => Ok(Some(false)),
                other => Err(perr(e.line, key, format!("'{other}' is not a boolean"))),
            },
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => parse_list(&e.value).map(Some).map_err(|m| perr(e.line, key, m)),
        }
    }
}

/// `1, 2, 3`, `[1 2; 3 4]` or a single number.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    let out: std::result::Result<Vec<f64>, _> = inner
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect();
    let out = out?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checks {
    pub gain: bool,
    pub dissipation: bool,
    pub invariance: bool,
    pub convergence: bool,
    pub tol: f64,
    /// Lower limit on the convergence ball radius.
    pub convergence_floor: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { gain: true, dissipation: true, invariance: true, convergence: false, tol: 1e-3, convergence_floor: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarlo {
    pub n_ic: usize,
    pub seed: u64,
    pub horizons: Vec<f64>,
    /// Relative tolerance for table comparisons.
    pub rel_tol: f64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { n_ic: 100, seed: 0, horizons: vec![10.0, 30.0, 100.0], rel_tol: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
    pub rules: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: String,
    pub overrides: Vec<(String, Vec<f64>)>,
    pub rule_name: String,
    pub rule: TriggerRule,
    pub sim: SimConfig,
    pub checks: Checks,
    pub output_dir: Option<String>,
    pub monte_carlo: MonteCarlo,
    pub design: DesignOptions,
    pub sweep: Option<Sweep>,
    built: Scenario,
}

const TOP: [&str; 8] = ["scenario", "rule", "sim", "checks", "output", "monte_carlo", "design", "sweep"];

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.built
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        for (k, e) in &raw.entries {
            let head = k.split('.').next().unwrap_or("");
            if !TOP.contains(&head) {
                return Err(perr(e.line, k, "unknown section"));
            }
        }
        let (scen_key, scenario) = match (raw.get("scenario"), raw.get("scenario.name")) {
            (Some(e), None) => ("scenario", e.value.clone()),
            (None, Some(e)) => ("scenario.name", e.value.clone()),
            (Some(e), Some(_)) => return Err(perr(e.line, "scenario", "given both as `scenario` and `scenario.name`")),
            (None, None) => return Err(perr(0, "scenario", "missing")),
        };
        let mut overrides = Vec::new();
        for (k, e) in raw.entries.range("scenario.".to_string()..) {
            let Some(p) = k.strip_prefix("scenario.") else { break };
            if p == "name" {
                continue;
            }
            let v = parse_list(&e.value).map_err(|m| perr(e.line, k, m))?;
            overrides.push((p.to_string(), v));
        }
        let built = corpus::by_name(&scenario, &overrides).map_err(|err| {
            let line = overrides
                .first()
                .and_then(|(k, _)| raw.get(&format!("scenario.{k}")))
                .or_else(|| raw.get(scen_key))
                .map_or(0, |e| e.line);
            perr(line, scen_key, err.to_string())
        })?;

        let (rule_name, rule) = parse_rule(raw, &built)?;

        let mut sim = built.sim_defaults.clone();
        if let Some(v) = raw.f64("sim.t_end")? {
            sim.t_end = v;
        }
        if let Some(v) = raw.f64("sim.dt")? {
            sim.dt = v;
        }
        if let Some(v) = raw.f64("sim.event_tol")? {
            sim.event_tol = v;
        }
        if let Some(v) = raw.list("sim.x0")? {
            if v.len() != built.plant.n {
                let e = raw.get("sim.x0").unwrap();
                return Err(perr(e.line, "sim.x0", format!("expected {} entries", built.plant.n)));
            }
            sim.x0 = v;
        }
        if let Some(v) = raw.u64("sim.seed")? {
            sim.seed = v;
        }
        if let Some(v) = raw.f64("sim.max_events_per_unit_time")? {
            sim.max_events_per_unit_time = v;
        }
        if let Some(v) = raw.usize("sim.log_stride")? {
            sim.log_stride = v;
        }
        if let Some(e) = raw.get("sim.disturbance") {
            let hold = raw.f64("sim.hold_dt")?;
            sim.disturbance.mode = match e.value.as_str() {
                "zero" => DisturbanceMode::Zero,
                "constant" => DisturbanceMode::EnvelopeConstant,
                "random_hold" => DisturbanceMode::EnvelopeRandomHold { hold_dt: hold },
                "sinusoid" => DisturbanceMode::Sinusoid { freq: raw.f64("sim.freq")?.unwrap_or(1.0) },
                "default" => built.sim_defaults.disturbance.mode.clone(),
                other => {
                    return Err(perr(
                        e.line,
                        "sim.disturbance",
                        format!("unknown mode '{other}' (zero, constant, random_hold, sinusoid, default)"),
                    ))
                }
            };
        } else if let Some(h) = raw.f64("sim.hold_dt")? {
            sim.disturbance = DisturbanceSpec { mode: DisturbanceMode::EnvelopeRandomHold { hold_dt: Some(h) }, ..sim.disturbance };
        }
        if let Some(v) = raw.f64("sim.disturbance_scale")? {
            sim.disturbance.scale = v;
        }
        sim.validate().map_err(|err| perr(raw.get("sim.dt").map_or(0, |e| e.line), "sim", err.to_string()))?;

        let mut checks = Checks::default();
        for (key, slot) in [
            ("checks.gain", &mut checks.gain),
            ("checks.dissipation", &mut checks.dissipation),
            ("checks.invariance", &mut checks.invariance),
            ("checks.convergence", &mut checks.convergence),
        ] {
            if let Some(b) = raw.bool(key)? {
                *slot = b;
            }
        }
        if let Some(v) = raw.f64("checks.tol")? {
            checks.tol = v;
        }
        if let Some(v) = raw.f64("checks.convergence_floor")? {
            checks.convergence_floor = v;
        }

        let mut mc = MonteCarlo::default();
        if let Some(v) = raw.usize("monte_carlo.n_ic")? {
            mc.n_ic = v;
        }
        if let Some(v) = raw.u64("monte_carlo.seed")? {
            mc.seed = v;
        }
        if let Some(v) = raw.list("monte_carlo.horizons")? {
            mc.horizons = v;
        }
        if let Some(v) = raw.f64("monte_carlo.rel_tol")? {
            mc.rel_tol = v;
        }

        let mut design = built.design.clone();
        if let Some(v) = raw.f64("design.t_bar")? {
            design.t_bar = v;
        }
        if let Some(v) = raw.f64("design.tau_star")? {
            design.tau_star = v;
        }
        if let Some(v) = raw.f64("design.f_cr")? {
            design.f_cr = v;
        }
        if let Some(v) = raw.usize("design.n")? {
            design.n = v;
        }
        if let Some(v) = raw.f64("design.zeta")? {
            design.zeta = v;
        }
        if let Some(v) = raw.f64("design.theta")? {
            design.theta = v;
        }
        if let Some(v) = raw.f64("design.delta")? {
            design.delta = Some(v);
        }

        let sweep = match raw.get("sweep.param") {
            None => None,
            Some(e) => {
                let values = raw
                    .list("sweep.values")?
                    .ok_or_else(|| perr(e.line, "sweep.values", "missing"))?;
                let rules = match raw.get("sweep.rules") {
                    None => built.rules.iter().map(|(n, _)| n.clone()).collect(),
                    Some(r) => r.value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                };
                Some(Sweep { param: e.value.clone(), values, rules })
            }
        };

        Ok(RunConfig {
            scenario,
            overrides,
            rule_name,
            rule,
            sim,
            checks,
            output_dir: raw.str("output.dir").map(String::from),
            monte_carlo: mc,
            design,
            sweep,
            built,
        })
    }
}

fn parse_rule(raw: &RawConfig, scen: &Scenario) -> Result<(String, TriggerRule)> {
    let (key, kind) = match (raw.get("rule"), raw.get("rule.kind")) {
        (Some(e), None) => ("rule", e),
        (None, Some(e)) => ("rule.kind", e),
        (Some(e), Some(_)) => return Err(perr(e.line, "rule", "given both as `rule` and `rule.kind`")),
        (None, None) => return Ok(("static".into(), TriggerRule::Static)),
    };
    let name = kind.value.clone();
    let base = scen.rule(&name);
    let mut rule = match (name.as_str(), base) {
        (_, Some(r)) => r,
        ("static", None) => TriggerRule::Static,
        ("tabuada", None) => TriggerRule::TabuadaBaseline { c: scen.certs.c },
        ("continuous", None) => TriggerRule::ContinuousDecay { kappa: f64::NAN, zeta: f64::NAN },
        ("discrete", None) => TriggerRule::DiscreteDecay { kappa_hat: f64::NAN, theta: f64::NAN, delta: f64::NAN },
        (other, None) => {
            return Err(perr(kind.line, key, format!("unknown rule '{other}' (static, continuous, discrete, tabuada)")))
        }
    };
    let allowed: &[&str] = match rule {
        TriggerRule::Static => &[],
        TriggerRule::ContinuousDecay { .. } => &["kappa", "zeta"],
        TriggerRule::DiscreteDecay { .. } => &["kappa_hat", "theta", "delta"],
        TriggerRule::TabuadaBaseline { .. } => &["c"],
    };
    for (k, e) in raw.entries.range("rule.".to_string()..) {
        let Some(p) = k.strip_prefix("rule.") else { break };
        if p == "kind" {
            continue;
        }
        if !allowed.contains(&p) {
            return Err(perr(e.line, k, format!("not a parameter of the '{name}' rule")));
        }
        let v = raw.f64(k)?.unwrap();
        match (&mut rule, p) {
            (TriggerRule::ContinuousDecay { kappa, .. }, "kappa") => *kappa = v,
            (TriggerRule::ContinuousDecay { zeta, .. }, "zeta") => *zeta = v,
            (TriggerRule::DiscreteDecay { kappa_hat, .. }, "kappa_hat") => *kappa_hat = v,
            (TriggerRule::DiscreteDecay { theta, .. }, "theta") => *theta = v,
            (TriggerRule::DiscreteDecay { delta, .. }, "delta") => *delta = v,
            (TriggerRule::TabuadaBaseline { c }, "c") => *c = v,
            _ => unreachable!(),
        }
    }
    rule.validate().map_err(|m| perr(kind.line, key, m))?;
    Ok((name, rule))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = RawConfig::parse("[sim]\nt_end = 5 # five\n").unwrap();
        let b = RawConfig::parse("sim.t_end = 5\n").unwrap();
        assert_eq!(a.entries["sim.t_end"].value, b.entries["sim.t_end"].value);
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        match RawConfig::parse("scenario = example1\n\nsim.t_end 5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_str("scenario = example1\nsim.dt = fast\n") {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "sim.dt");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::from_str("scenario = example1\nrule = static\nrule.kappa = 3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn rule_overrides() {
        let c = RunConfig::from_str("scenario = example1\n[rule]\nkind = continuous\nkappa = 2\n").unwrap();
        assert_eq!(c.rule, TriggerRule::ContinuousDecay { kappa: 2.0, zeta: 1.6 });
        let z = RunConfig::from_str("scenario = linear\nscenario.A = 0.5\n").unwrap();
        assert_eq!(z.scenario().plant.n, 1);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("[1 2; 3 4]").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_list("0.87, 0.5").unwrap(), vec![0.87, 0.5]);
        assert!(parse_list("[]").is_err());
    }
}
