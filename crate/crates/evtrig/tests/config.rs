use std::path::Path;

use evtrig::config::{parse_list, RawConfig, RunConfig};
use evtrig::sim::DisturbanceMode;
use evtrig::trigger::TriggerRule;
use evtrig::Error;
use proptest::prelude::*;

fn parse_err(text: &str) -> (usize, String) {
    match RunConfig::from_str(text) {
        Err(Error::Parse { line, field, .. }) => (line, field),
        other => panic!("expected a parse error, got {:?}", other.map(|c| c.scenario)),
    }
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "cfg") {
            RunConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn full_config() {
    let c = RunConfig::from_str(
        "scenario = example2
scenario.h_gain = 1.2
[rule]
kind = discrete
delta = 3
[sim]
t_end = 4
x0 = [0.5 0.1]
disturbance = sinusoid
freq = 2
disturbance_scale = 0.5
[checks]
convergence = yes
tol = 1e-4
[monte_carlo]
n_ic = 12
horizons = 1, 2
[design]
tau_star = 0.1
f_cr = 20
",
    )
    .unwrap();
    assert_eq!(c.scenario, "example2");
    assert_eq!(c.overrides, vec![("h_gain".to_string(), vec![1.2])]);
    assert_eq!(c.rule, TriggerRule::DiscreteDecay { kappa_hat: 50.0, theta: 1.0, delta: 3.0 });
    assert_eq!(c.sim.x0, vec![0.5, 0.1]);
    assert_eq!(c.sim.disturbance.mode, DisturbanceMode::Sinusoid { freq: 2.0 });
    assert_eq!(c.sim.disturbance.scale, 0.5);
    assert!(c.checks.convergence && c.checks.gain);
    assert_eq!(c.checks.tol, 1e-4);
    assert_eq!((c.monte_carlo.n_ic, c.monte_carlo.horizons.clone()), (12, vec![1.0, 2.0]));
    assert_eq!((c.design.tau_star, c.design.f_cr), (0.1, 20.0));
}

#[test]
fn defaults_follow_the_scenario() {
    let c = RunConfig::from_str("scenario = example3\n").unwrap();
    assert_eq!(c.rule, TriggerRule::Static);
    assert_eq!(c.sim, c.scenario().sim_defaults);
    assert!(!c.checks.convergence);
    assert_eq!(c.monte_carlo.horizons, vec![10.0, 30.0, 100.0]);
}

#[test]
fn errors_name_line_and_field() {
    assert_eq!(parse_err("scenario = example1\n\n[sim]\nt_end = soon\n"), (4, "sim.t_end".into()));
    assert_eq!(parse_err("scenario = example1\nsim.t_end = 1\nsim.t_end = 2\n").0, 3);
    assert_eq!(parse_err("scenario = example1\nbogus.key = 1\n"), (2, "bogus.key".into()));
    assert_eq!(parse_err("scenario = example1\nrule = sometimes\n"), (2, "rule".into()));
    assert_eq!(parse_err("scenario = example1\n[rule]\nkind = continuous\nkappa = -1\n").1, "rule.kind");
    assert_eq!(parse_err("scenario = example1\nsim.x0 = 1, 2\n"), (2, "sim.x0".into()));
    assert_eq!(parse_err("scenario = example1\nsim.disturbance = loud\n"), (2, "sim.disturbance".into()));
    assert_eq!(parse_err("scenario = example4\n"), (1, "scenario".into()));
    assert_eq!(parse_err("scenario = example1\nscenario.k = x\n"), (2, "scenario.k".into()));
    assert_eq!(parse_err("sim.t_end = 1\n").1, "scenario");
    assert_eq!(parse_err("scenario = example1\n[sim\n").0, 2);
}

#[test]
fn tabuada_and_inline_linear() {
    let c = RunConfig::from_str("scenario = example1\n[rule]\nkind = tabuada\nc = 0.2\n").unwrap();
    assert_eq!(c.rule, TriggerRule::TabuadaBaseline { c: 0.2 });
    let c = RunConfig::from_str("scenario = linear\nscenario.n = 2\nscenario.m = 1\nscenario.A = [0 1; -1 0]\nscenario.B = 0, 1\nscenario.K = -1, -1\nscenario.x0 = 1, 0\n").unwrap();
    assert_eq!(c.scenario().plant.n, 2);
    assert_eq!(c.sim.x0, vec![1.0, 0.0]);
}

#[test]
fn raw_getters() {
    let r = RawConfig::parse("a.b = 3\na.c = true\na.d = 1 2 3\n").unwrap();
    assert_eq!(r.f64("a.b").unwrap(), Some(3.0));
    assert_eq!(r.usize("a.b").unwrap(), Some(3));
    assert_eq!(r.bool("a.c").unwrap(), Some(true));
    assert_eq!(r.list("a.d").unwrap(), Some(vec![1.0, 2.0, 3.0]));
    assert!(r.bool("a.b").is_err());
    assert_eq!(r.f64("a.zz").unwrap(), None);
}

proptest! {
    #[test]
    fn list_round_trip(v in proptest::collection::vec(-1e6f64..1e6, 1..8)) {
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        prop_assert_eq!(parse_list(&text).unwrap(), v.clone());
        let text = format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
        prop_assert_eq!(parse_list(&text).unwrap(), v);
    }
}
