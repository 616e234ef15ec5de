use evtrig::analysis::{
    bias, convergence_check, dissipation_residual, inter_event_stats, invariant_set_radius, l2_report,
    practical_stability_radius,
};
use evtrig::corpus;
use evtrig::model::{euclid, ClassKFn};
use evtrig::sim::{simulate, DisturbanceSpec};
use evtrig::trigger::TriggerRule;
use proptest::prelude::*;

#[test]
fn example_runs_satisfy_the_gain_bound() {
    for s in [corpus::example1(), corpus::example3()] {
        let rec = simulate(&s.plant, &s.certs, &TriggerRule::Static, &s.sim_defaults).unwrap();
        let g = l2_report(&rec, &s.certs, &TriggerRule::Static).unwrap();
        assert!(g.pass && !g.degenerate, "{}", s.name);
        assert_eq!(g.eta, 0.0);
        assert_eq!(g.gamma, s.expected("gamma").unwrap().value);
    }
}

#[test]
fn example1_storage_normalization() {
    let s = corpus::example1();
    // mu = 2 U, U = 3x^2/4
    assert!((s.certs.mu(&[0.6]) - 2.0 * 0.75 * 0.36).abs() < 1e-15);
}

#[test]
fn running_integrals_match_a_trapezoid_over_the_log() {
    let s = corpus::example2();
    let rec = simulate(&s.plant, &s.certs, &TriggerRule::Static, &s.sim_defaults).unwrap();
    let (mut iz, mut iw) = (0.0, 0.0);
    for p in rec.samples.windows(2) {
        let h = p[1].t - p[0].t;
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        iz += 0.5 * h * (sq(&p[0].z) + sq(&p[1].z));
        iw += 0.5 * h * (sq(&p[0].w) + sq(&p[1].w));
    }
    assert!((iz - rec.int_z2).abs() <= 1e-3 * rec.int_z2);
    assert!((iw - rec.int_w2).abs() <= 1e-3 * rec.int_w2);
}

#[test]
fn degenerate_gain_report_at_rest() {
    let s = corpus::example1();
    let mut cfg = s.sim_defaults.clone();
    cfg.x0 = vec![0.0];
    cfg.disturbance = DisturbanceSpec::zero();
    let rec = simulate(&s.plant, &s.certs, &TriggerRule::Static, &cfg).unwrap();
    let g = l2_report(&rec, &s.certs, &TriggerRule::Static).unwrap();
    assert!(g.degenerate && g.pass);
    let d = dissipation_residual(&rec, &s.plant, &s.certs, &TriggerRule::Static);
    assert_eq!(d.max_residual, 0.0);
}

#[test]
fn bias_by_rule() {
    let s = corpus::example1();
    let c = &s.certs;
    assert_eq!(bias(c, &TriggerRule::Static).unwrap(), 0.0);
    // factored: mu_scale * eps_bar * base, eps_bar = 1, mu_scale = 2
    let b = bias(c, &TriggerRule::ContinuousDecay { kappa: 15.0, zeta: 1.6 }).unwrap();
    assert!((b - 2.0 * 15.0 / 1.6).abs() < 1e-12);
    let b = bias(c, &TriggerRule::DiscreteDecay { kappa_hat: 1.5, theta: 1.0, delta: 1.1 }).unwrap();
    assert!((b - 2.0 * 1.5 * 1.1 * 1f64.exp()).abs() < 1e-12);
}

#[test]
fn dissipation_holds_for_static_runs() {
    for s in [corpus::example1(), corpus::example2(), corpus::example3()] {
        let rec = simulate(&s.plant, &s.certs, &TriggerRule::Static, &s.sim_defaults).unwrap();
        let d = dissipation_residual(&rec, &s.plant, &s.certs, &TriggerRule::Static);
        assert!(d.max_excess <= 1e-3, "{}: {}", s.name, d.max_excess);
    }
}

#[test]
fn invariant_radii() {
    let s = corpus::example1();
    let (eb, q) = invariant_set_radius(&s.certs, &s.plant, 1.0).unwrap();
    assert!((eb - 1.0).abs() < 1e-12);
    assert!((q - 2.0 * 0.45f64.sqrt()).abs() < 1e-12);
    let s = corpus::example3();
    let (_, q) = invariant_set_radius(&s.certs, &s.plant, s.certs.eps).unwrap();
    assert!((q - 0.45 * 1.5f64.sqrt() / 4.0).abs() < 1e-9);

    let mut c = corpus::example1().certs;
    c.sigma1 = ClassKFn::new(|r| r).with_domain(0.2);
    assert!(invariant_set_radius(&c, &s.plant, 1.0).is_err());
}

#[test]
fn practical_radii() {
    let s = corpus::example1();
    let c = &s.certs;
    assert_eq!(practical_stability_radius(&TriggerRule::Static, c).unwrap(), 0.0);
    assert_eq!(practical_stability_radius(&TriggerRule::TabuadaBaseline { c: 0.3 }, c).unwrap(), 0.0);
    // sigma_bar = identity, c = 1/2
    let r = practical_stability_radius(&TriggerRule::ContinuousDecay { kappa: 15.0, zeta: 1.6 }, c).unwrap();
    assert!((r - 30.0).abs() < 1e-9);
    let r = practical_stability_radius(&TriggerRule::DiscreteDecay { kappa_hat: 1.5, theta: 1.0, delta: 1.1 }, c).unwrap();
    assert!((r - 3.0).abs() < 1e-9);
    // theta = 2.5: kappa_theta = kappa_hat 2.5^2 / 2
    let r = practical_stability_radius(&TriggerRule::DiscreteDecay { kappa_hat: 1.0, theta: 2.5, delta: 1.0 }, c).unwrap();
    assert!((r - 2.0 * 3.125).abs() < 1e-9);
}

#[test]
fn practical_radius_beyond_the_certified_range_is_unbounded() {
    let s = corpus::example3();
    let top = s.certs.sigma_bar.eval(s.certs.sigma_bar.domain_hint().unwrap());
    let k = 2.0 * top * (1.0 - s.certs.c);
    let r = practical_stability_radius(&TriggerRule::ContinuousDecay { kappa: k, zeta: 1.0 }, &s.certs).unwrap();
    assert_eq!(r, f64::INFINITY);
}

#[test]
fn convergence_of_a_static_run() {
    let s = corpus::example1();
    let mut cfg = s.sim_defaults.clone();
    cfg.disturbance = DisturbanceSpec::zero();
    let rec = simulate(&s.plant, &s.certs, &TriggerRule::Static, &cfg).unwrap();
    let r = convergence_check(&rec, &s.certs, 0.0, 0.05);
    assert!(r.pass && r.final_norm < 0.05);
    let entry = r.entry_time.unwrap();
    assert!(rec.samples.iter().filter(|p| p.t >= entry).all(|p| euclid(&p.x) <= 0.05));
    assert!(!convergence_check(&rec, &s.certs, 0.0, 1e-30).pass);
}

#[test]
fn window_counts_include_the_initial_event() {
    let st = inter_event_stats(&[0.0, 1.0, 1.5, 4.0], &[1.0, 2.0, 10.0]);
    let c: Vec<usize> = st.windows.iter().map(|w| w.count).collect();
    assert_eq!(c, vec![1, 3, 4]);
    assert_eq!(st.windows[0].min_gap, None);
    assert_eq!(st.windows[1].min_gap, Some(0.5));
}

proptest! {
    #[test]
    fn radius_grows_with_kappa(k1 in 0.01f64..100.0, dk in 0.01f64..100.0) {
        let c = corpus::example1().certs;
        let a = practical_stability_radius(&TriggerRule::ContinuousDecay { kappa: k1, zeta: 1.0 }, &c).unwrap();
        let b = practical_stability_radius(&TriggerRule::ContinuousDecay { kappa: k1 + dk, zeta: 1.0 }, &c).unwrap();
        prop_assert!(b > a && a > 0.0);
    }
}
