use evtrig::corpus;
use evtrig::model::{check_gamma_chain, estimate_lipschitz, make_psi, ClassKFn, Norm};
use evtrig::Error;
use proptest::prelude::*;

#[test]
fn numeric_inverse_matches_closed_form() {
    let f = ClassKFn::power(0.7, 2.5);
    for y in [1e-6, 0.1, 1.0, 42.0] {
        let a = f.inverse(y).unwrap();
        let b = f.numeric_inverse(y).unwrap();
        assert!((a - b).abs() < 1e-9 * (1.0 + a), "{y}: {a} vs {b}");
    }
}

#[test]
fn inverse_outside_domain_errors() {
    let f = ClassKFn::new(|r| r * r).with_domain(2.0);
    assert!(matches!(f.numeric_inverse(5.0), Err(Error::Inverse(_))));
    assert!(f.numeric_inverse(-1.0).is_err());
    assert_eq!(f.numeric_inverse(0.0).unwrap(), 0.0);
}

#[test]
fn validate_rejects_non_monotone() {
    let f = ClassKFn::new(|r: f64| (3.0 * r).sin());
    assert!(f.validate(2.0, 100).is_err());
    let g = ClassKFn::new(|r| r + 1.0);
    assert!(g.validate(1.0, 10).is_err());
}

#[test]
fn norms() {
    let v = [3.0, -4.0];
    assert_eq!(Norm::Euclidean.of(&v), 5.0);
    assert_eq!(Norm::Infinity.of(&v), 4.0);
}

#[test]
fn corpus_certificates_validate() {
    for s in [corpus::example1(), corpus::example2(), corpus::example3()] {
        s.certs.validate(s.plant.n, 500, 1).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        s.plant.check_equilibrium().unwrap();
    }
}

#[test]
fn psi_identity_on_corpus() {
    for s in [corpus::example1(), corpus::example3()] {
        let eb = s.certs.eps_bar().unwrap();
        for j in 0..=100 {
            let r = eb * j as f64 / 100.0;
            let lhs = s.certs.psi.eval(r) * (1.0 + s.certs.sigma0.eval(r));
            assert!((lhs - s.certs.sigma_bar.eval(r)).abs() < 1e-10, "{} r = {r}", s.name);
        }
    }
}

#[test]
fn example1_storage_is_three_quarters_x_squared() {
    let s = corpus::example1();
    for x in [-1.0, -0.3, 0.0, 0.5, 1.0] {
        assert!((s.certs.u_value(&[x]) - 0.75 * x * x).abs() < 1e-15);
    }
}

#[test]
fn lipschitz_probe_stays_below_declared_constant() {
    let s = corpus::example1();
    let b = vec![(-1.0, 1.0); s.plant.n + s.plant.m + s.plant.q];
    let est = s.plant.lipschitz_probe(&b, 2000, 3).unwrap();
    assert!(est <= s.plant.l_f * 1.05);
    // a linear map's sampled constant approaches its norm from below
    let est = estimate_lipschitz(|v| vec![2.0 * v[0] - v[1]], &[(-1.0, 1.0), (-1.0, 1.0)], 5000, 9).unwrap();
    assert!(est <= 5f64.sqrt() + 1e-12 && est > 0.9 * 5f64.sqrt());
}

#[test]
fn gamma_chain_cases() {
    let zero = ClassKFn::zero();
    let id = ClassKFn::identity();
    let grid: Vec<f64> = (1..=50).map(|j| j as f64 * 0.02).collect();
    let r = check_gamma_chain(&zero, &zero, &id, &grid).unwrap();
    assert!(r.pass && r.margin.abs() < 1e-15);

    let half = ClassKFn::linear(0.5);
    let r = check_gamma_chain(&half, &half, &ClassKFn::linear(2.0), &grid).unwrap();
    // 2 (r - r/4) - r = r/2
    assert!(r.pass && (r.margin - 0.01).abs() < 1e-12);

    let sqrt = ClassKFn::power(1.0, 0.5);
    let big = ClassKFn::linear(50.0);
    // r - sqrt(50 r) < 0 for r < 50
    assert!(check_gamma_chain(&sqrt, &big, &id, &grid).is_err());
}

#[test]
fn make_psi_rejects_fast_sigma0() {
    let sb = ClassKFn::linear(1.0).with_domain(5.0);
    let s0 = ClassKFn::power(1.0, 3.0);
    assert!(make_psi(&sb, &s0).is_err());
}

proptest! {
    #[test]
    fn power_round_trip(k in 0.01f64..100.0, p in 0.2f64..4.0, r in 1e-3f64..10.0) {
        let f = ClassKFn::power(k, p);
        let back = f.numeric_inverse(f.eval(r)).unwrap();
        prop_assert!((back - r).abs() <= 1e-9 * (1.0 + r));
    }

    #[test]
    fn psi_below_sigma_bar(a in 0.1f64..5.0, b in 0.0f64..2.0, r in 0.0f64..1.0) {
        let sb = ClassKFn::linear(a).with_domain(1.0);
        let s0 = ClassKFn::linear(b);
        let psi = make_psi(&sb, &s0).unwrap();
        prop_assert!(psi.eval(r) <= sb.eval(r) + 1e-15);
    }
}
