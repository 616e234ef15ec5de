use evtrig::corpus::{self, Example3Params};
use evtrig::design::{
    design_continuous, design_discrete, design_report, l_psi_inv, l_psi_inv_formula, n_theta, tau_static,
    y_closed_form, y_hitting_time, DesignInputs, DesignOptions,
};
use evtrig::trigger::theta_pow_over_fact;
use evtrig::Error;
use proptest::prelude::*;

fn inputs() -> DesignInputs {
    DesignInputs {
        l_f: 1.2,
        l_k: 0.8,
        l_gamma3: 0.5,
        l_sigma3: 0.1,
        l_sigma_bar_inv: 1.0,
        l_sigma0: 0.0,
        l_beta1: 1.5,
        sigma0_eps_bar: 0.0,
        sigma_bar_eps_bar: 1.0,
        eps_bar: 1.0,
        c: 0.5,
        l_bar: None,
        t_bar: 10.0,
        tau_star: 0.05,
        f_cr: 25.0,
        n: 5,
        zeta: 1.0,
        theta: 1.0,
        delta: Some(2.0),
    }
}

fn rk4(t_end: f64, l_f: f64, l_k: f64, l: f64) -> f64 {
    let f = |y: f64| l_f * (1.0 + y) * (l + l_k * y);
    let n = ((t_end / 1e-4).ceil() as usize).max(1);
    let h = t_end / n as f64;
    let mut y = 0.0;
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

#[test]
fn comparison_ode_closed_form() {
    assert_eq!(y_closed_form(0.0, 1.0, 0.5, 2.0).unwrap(), 0.0);
    // L_k = 0, L = 1: y = e^t - 1
    assert!((y_closed_form(2f64.ln(), 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(y_closed_form(-1.0, 1.0, 0.0, 1.0).is_err());
    assert!(y_closed_form(1.0, 1.0, 2.0, 2.0).is_err());
    // past escape
    assert_eq!(y_closed_form(100.0, 1.0, 1.0, 2.0).unwrap(), f64::INFINITY);
}

#[test]
fn static_bound_cases() {
    assert!(tau_static(1.0, 1.0, 0.0, 1e15) < 1e-14);
    // linear plant with ||A|| = ||BK|| = 1, c_hat = 0, substituting L_bar = p = 0.5
    assert!((tau_static(1.0, 1.0, 0.0, 0.5) - 1.5f64.ln()).abs() < 1e-15);
    // with the surface constant 1/p instead
    assert!((tau_static(1.0, 1.0, 0.0, 2.0) - 1.2f64.ln()).abs() < 1e-15);
}

#[test]
fn l_psi_inv_cases() {
    assert_eq!(l_psi_inv_formula(2.0, 0.0, 0.0, 5.0).unwrap(), 2.0);
    assert!(matches!(l_psi_inv_formula(1.0, 2.0, 0.1, 1.0), Err(Error::LipschitzCondition(_))));

    let s = corpus::example1();
    let lp = l_psi_inv(&s.certs, 1.0);
    assert!(lp.valid && lp.value.is_finite() && lp.value > 0.0);
    // sigma0 = 0, sigma_bar = r: L_psi_inv = L_sigma_bar_inv = 1
    assert!((lp.value - 1.0).abs() < 1e-9);
}

#[test]
fn small_lambda_keeps_the_lipschitz_condition_and_large_sigma3_breaks_it() {
    let p = Example3Params { lambda: 1e-3, ..Example3Params::default() };
    let s = corpus::example3_with(&p).unwrap();
    let lp = l_psi_inv(&s.certs, s.certs.eps_bar().unwrap());
    assert!(lp.valid, "{:?}", lp.diagnostic);

    let mut s = corpus::example1();
    s.certs.sigma0 = evtrig::model::ClassKFn::linear(50.0);
    let lp = l_psi_inv(&s.certs, 1.0);
    assert!(!lp.valid && lp.diagnostic.unwrap().contains("must be < 1"));
}

#[test]
fn n_theta_values() {
    assert_eq!(n_theta(1.0), 1);
    assert_eq!(n_theta(5.0), 9);
    assert_eq!(n_theta(0.5), 1);
}

#[test]
fn continuous_design_postconditions() {
    let d = inputs();
    let (kappa, tau1) = design_continuous(&d).unwrap();
    assert!(kappa > 0.0);
    let l_star = d.l_star().unwrap();
    let y = y_closed_form(tau1, d.l_f, d.l_k, d.big_l()).unwrap();
    assert!((y - 1.0 / l_star).abs() < 1e-9 * (1.0 + y));
    assert!(tau1 - (d.tau().unwrap() + d.tau_star) >= -1e-9);

    // doubling T_bar multiplies kappa by e^{zeta T_bar}
    let mut d2 = d.clone();
    d2.t_bar = 2.0 * d.t_bar;
    let (k2, _) = design_continuous(&d2).unwrap();
    assert!((k2 / kappa - (d.zeta * d.t_bar).exp()).abs() < 1e-9 * k2 / kappa);
}

#[test]
fn continuous_design_as_tau_star_shrinks() {
    let mut d = inputs();
    d.f_cr = 1e10;
    d.tau_star = 1e-9;
    let l_hat = d.l_hat().unwrap();
    d.l_bar = Some(0.5 * l_hat);
    let (kappa, _) = design_continuous(&d).unwrap();
    // L* -> L_bar, so kappa -> c eps_bar / L_psi_inv (L_hat / L_bar - 1)(1 + sigma0) e^{zeta T_bar}
    let limit = d.c * d.eps_bar / d.l_psi_inv().unwrap() * (2.0 - 1.0) * (d.zeta * d.t_bar).exp();
    assert!((kappa - limit).abs() < 1e-6 * limit, "{kappa} vs {limit}");
}

#[test]
fn design_rejects_bad_inputs() {
    let mut d = inputs();
    d.tau_star = 0.01;
    assert!(matches!(design_continuous(&d), Err(Error::Design(_))));
    let mut d = inputs();
    d.delta = Some(d.tau().unwrap() + d.tau_star);
    assert!(matches!(design_discrete(&d, 3), Err(Error::Design(_))));
    let mut d = inputs();
    d.delta = None;
    assert!(design_discrete(&d, 3).is_err());
    assert!(design_discrete(&inputs(), 0).is_err());
}

#[test]
fn discrete_design_cases() {
    let d = inputs();
    let (k1, tau2) = design_discrete(&d, 1).unwrap();
    let (kc, tau1) = design_continuous(&DesignInputs { t_bar: 1e-300, ..d.clone() }).unwrap();
    // case 1, theta = 1: amplitude / theta; case 2 at N = 1 coincides
    assert!((k1 - kc).abs() < 1e-12 * kc);
    assert_eq!(tau1, tau2);
    let (k5, _) = design_discrete(&d, 5).unwrap();
    assert!((k5 / k1 - 1.0 / theta_pow_over_fact(1.0, 5)).abs() < 1e-9 * k5 / k1);
    let (k30, _) = design_discrete(&d, 30).unwrap();
    assert!(k30 > k5 * 1e20);
}

#[test]
fn corpus_design_reports() {
    for s in [corpus::example1(), corpus::example2(), corpus::example3()] {
        let d = DesignInputs::from_certs(&s.plant, &s.certs, &s.design).unwrap();
        let r = design_report(&d);
        assert!(r.tau > 0.0, "{}", s.name);
        let mut out = Vec::new();
        r.write_kv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("tau = ") && text.contains("N_theta = "));
        assert!(text.contains("theta^i / i!"));
    }
    let s = corpus::example1();
    let d = DesignInputs::from_certs(&s.plant, &s.certs, &DesignOptions { tau_star: 1.0, f_cr: 25.0, ..DesignOptions::default() }).unwrap();
    assert!(d.tau().unwrap() + 1.0 > d.escape_time());
    assert!(matches!(d.l_star(), Err(Error::Design(_))));
}

proptest! {
    #[test]
    fn closed_form_matches_rk4(l_f in 0.1f64..3.0, l_k in 0.0f64..2.0, lg in 0.0f64..2.0, frac in 0.01f64..0.7) {
        let l = l_k + lg + 1.0;
        let esc = if l_k > 0.0 { (l / l_k).ln() / (l_f * (l - l_k)) } else { 3.0 };
        let t = frac * esc.min(3.0);
        let y = y_closed_form(t, l_f, l_k, l).unwrap();
        prop_assert!((y - rk4(t, l_f, l_k, l)).abs() <= 1e-9 * (1.0 + y));
    }

    #[test]
    fn tau_is_the_hitting_time(l_f in 0.1f64..3.0, l_k in 0.0f64..2.0, lg in 0.0f64..2.0, l_bar in 0.05f64..20.0) {
        let tau = tau_static(l_f, l_k, lg, l_bar);
        let y = y_closed_form(tau, l_f, l_k, l_k + lg + 1.0).unwrap();
        prop_assert!((y - 1.0 / l_bar).abs() <= 1e-9 * (1.0 + 1.0 / l_bar));
        prop_assert!((y_hitting_time(1.0 / l_bar, l_f, l_k, l_k + lg + 1.0) - tau).abs() <= 1e-12);
    }

    #[test]
    fn n_theta_is_the_last_term_above_theta(theta in 0.01f64..30.0) {
        let n = n_theta(theta);
        prop_assert!(n >= 1);
        if theta_pow_over_fact(theta, 1) >= theta {
            prop_assert!(theta_pow_over_fact(theta, n) >= theta);
        }
        prop_assert!(theta_pow_over_fact(theta, n + 1) < theta);
    }

    #[test]
    fn kappa_increases_with_horizon_and_gap(t_bar in 0.1f64..20.0, dt in 0.01f64..5.0, ts in 0.045f64..0.1, dts in 0.001f64..0.02) {
        let base = DesignInputs { t_bar, tau_star: ts, ..inputs() };
        let (k0, _) = design_continuous(&base).unwrap();
        let (k1, _) = design_continuous(&DesignInputs { t_bar: t_bar + dt, ..base.clone() }).unwrap();
        let (k2, _) = design_continuous(&DesignInputs { tau_star: ts + dts, ..base.clone() }).unwrap();
        prop_assert!(k1 > k0 && k2 > k0);
    }
}
