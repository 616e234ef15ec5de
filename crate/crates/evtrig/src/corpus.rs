//! Built-in scenarios: three nonlinear examples and a linear Zeno adversary.

use std::f64::consts::SQRT_2;

use rand::Rng;

use crate::design::DesignOptions;
use crate::error::{Error, Result};
use crate::model::{
    make_beta1_bar, make_psi, op_norm, sym2_eig, CertificateSet, ClassKFn, Lyapunov, Norm, PlantBundle,
    ThresholdForm,
};
use crate::sim::{CustomSignal, DisturbanceMode, DisturbanceSpec, SimConfig};
use crate::trigger::TriggerRule;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Printed in the reference write-up.
    Reference,
    /// Recomputed here by an independent formula.
    Derived,
    /// Holds exactly by construction.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expected {
    pub metric: String,
    pub value: f64,
    pub tol: f64,
    pub provenance: Provenance,
    /// Known disagreement with the implemented formula.
    pub note: Option<String>,
}

fn exp(metric: &str, value: f64, tol: f64, provenance: Provenance) -> Expected {
    Expected { metric: metric.into(), value, tol, provenance, note: None }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IcDistribution {
    UniformInterval { lo: f64, hi: f64 },
    /// Uniform in the Euclidean ball of the given radius.
    UniformBall { radius: f64 },
}

impl IcDistribution {
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            IcDistribution::UniformInterval { lo, hi } => (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
            IcDistribution::UniformBall { radius } => loop {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r2: f64 = v.iter().map(|a| a * a).sum();
                if r2 <= 1.0 {
                    return v.into_iter().map(|a| a * radius).collect();
                }
            },
        }
    }
}

/// Printed table: rows per rule, columns per horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRef {
    pub horizons: Vec<f64>,
    pub rules: Vec<String>,
    pub counts: Vec<Vec<f64>>,
    pub min_gaps: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantBundle,
    pub certs: CertificateSet,
    pub rules: Vec<(String, TriggerRule)>,
    pub sim_defaults: SimConfig,
    pub expected: Vec<Expected>,
    pub ic: IcDistribution,
    pub table: Option<TableRef>,
    pub design: DesignOptions,
}

impl Scenario {
    pub fn rule(&self, name: &str) -> Option<TriggerRule> {
        self.rules.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }

    pub fn expected(&self, metric: &str) -> Option<&Expected> {
        self.expected.iter().find(|e| e.metric == metric)
    }

    /// L_gamma3 * eps_bar.
    pub fn q(&self) -> Result<f64> {
        Ok(self.plant.l_gamma3 * self.certs.eps_bar()?)
    }
}

fn bad(key: &str) -> Error {
    Error::Invalid(format!("unknown scenario parameter '{key}'"))
}

fn scalar(key: &str, v: &[f64]) -> Result<f64> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::Invalid(format!("parameter '{key}' expects one number, got {}", v.len()))),
    }
}

fn zero_lyapunov() -> Lyapunov {
    Lyapunov::new(|_| 0.0, |_, g| g.iter_mut().for_each(|o| *o = 0.0))
}

fn rules3(kappa: f64, zeta: f64, kappa_hat: f64, theta: f64, delta: f64) -> Vec<(String, TriggerRule)> {
    vec![
        ("static".into(), TriggerRule::Static),
        ("continuous".into(), TriggerRule::ContinuousDecay { kappa, zeta }),
        ("discrete".into(), TriggerRule::DiscreteDecay { kappa_hat, theta, delta }),
    ]
}

fn table3(counts: [[f64; 3]; 3], gaps: [[f64; 3]; 3]) -> TableRef {
    TableRef {
        horizons: vec![10.0, 30.0, 100.0],
        rules: vec!["static".into(), "continuous".into(), "discrete".into()],
        counts: counts.iter().map(|r| r.to_vec()).collect(),
        min_gaps: gaps.iter().map(|r| r.to_vec()).collect(),
    }
}

// ---------------------------------------------------------------- example 1

/// x' = -x^3 + x w + u, z = x, u = -k (x + e).
#[derive(Clone, Debug, PartialEq)]
pub struct Example1Params {
    pub k: f64,
    pub eps: f64,
    pub c: f64,
    pub c_bar: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub kappa_hat: f64,
    pub theta: f64,
    pub delta: f64,
}

impl Default for Example1Params {
    fn default() -> Self {
        Example1Params {
            k: 1.0,
            eps: 1.0,
            c: 0.5,
            c_bar: 0.45,
            lambda: 0.5,
            kappa: 15.0,
            zeta: 1.6,
            kappa_hat: 1.5,
            theta: 1.0,
            delta: 1.1,
        }
    }
}

impl Example1Params {
    pub fn set(&mut self, key: &str, v: &[f64]) -> Result<()> {
        let x = scalar(key, v)?;
        match key {
            "k" => self.k = x,
            "eps" => self.eps = x,
            "c" => self.c = x,
            "c_bar" => self.c_bar = x,
            "lambda" => self.lambda = x,
            "kappa" => self.kappa = x,
            "zeta" => self.zeta = x,
            "kappa_hat" => self.kappa_hat = x,
            "theta" => self.theta = x,
            "delta" => self.delta = x,
            _ => return Err(bad(key)),
        }
        Ok(())
    }
}

pub fn example1() -> Scenario {
    example1_with(&Example1Params::default()).expect("default parameters are valid")
}

pub fn example1_with(p: &Example1Params) -> Result<Scenario> {
    if !(p.k > 0.0 && p.lambda > 0.0 && p.eps > 0.0) {
        return Err(Error::Invalid("example1 needs k, lambda, eps > 0".into()));
    }
    if !(p.c > 0.0 && p.c_bar > 0.0 && p.c + p.c_bar < 1.0) {
        return Err(Error::Invalid(format!("example1 needs c, c_bar > 0 and c + c_bar < 1 (got {}, {})", p.c, p.c_bar)));
    }
    let (k, lambda) = (p.k, p.lambda);
    let lg3 = 2.0 * (p.c_bar * k).sqrt();
    // V = x^2/2 so sigma1 = sigma2 and eps_bar = eps
    let eb = p.eps;
    let q = lg3 * eb;
    let plant = PlantBundle {
        n: 1,
        m: 1,
        q: 1,
        p: 1,
        f: std::sync::Arc::new(|x, u, w, dx| dx[0] = -x[0].powi(3) + x[0] * w[0] + u[0]),
        h: std::sync::Arc::new(|x, _w, z| z[0] = x[0]),
        k: std::sync::Arc::new(move |x, u| u[0] = -k * x[0]),
        gamma3: ClassKFn::linear(lg3),
        w_cap: None,
        measured: vec![0],
        // gradient (-3x^2 + w, 1, x) on |x| <= eps_bar, |w| <= Q
        l_f: ((3.0 * eb * eb + q).powi(2) + 1.0 + eb * eb).sqrt(),
        l_fu: 1.0,
        l_k: k,
        l_gamma3: lg3,
    };
    let v = Lyapunov::new(|x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0]);
    let w = v.scaled(lambda);
    let sigma_bar = ClassKFn::linear(k);
    let sigma0 = ClassKFn::zero();
    let beta1 = ClassKFn::linear((1.0 + lambda) * k);
    let certs = CertificateSet {
        psi: make_psi(&sigma_bar, &sigma0)?,
        beta1_bar: make_beta1_bar(&beta1),
        v,
        w,
        sigma_bar,
        sigma0,
        sigma1: ClassKFn::power(0.5, 2.0),
        sigma2: ClassKFn::power(0.5, 2.0),
        sigma3: ClassKFn::linear(lambda),
        beta1,
        gamma: 1.0 / (2.0 * k.sqrt()),
        c: p.c,
        c_bar: p.c_bar,
        state_norm: Norm::Euclidean,
        form: ThresholdForm::Quotient,
        factored: true,
        beta1_bar_redefined: false,
        mu_scale: 1.0 / (lambda * k),
        eps: p.eps,
    };
    let mut sim = SimConfig::new(vec![1.0], 10.0);
    sim.disturbance = DisturbanceSpec::default();
    Ok(Scenario {
        name: "example1".into(),
        plant,
        certs,
        rules: rules3(p.kappa, p.zeta, p.kappa_hat, p.theta, p.delta),
        sim_defaults: sim,
        expected: vec![
            exp("static_threshold_at_0.6", 0.2, 1e-12, Provenance::Reference),
            exp("Q", 1.34, 5e-3, Provenance::Reference),
            exp("gamma", 0.5, 0.0, Provenance::Reference),
            exp("mu_over_U", 2.0, 1e-12, Provenance::Reference),
            exp("eps_bar", 1.0, 1e-12, Provenance::Derived),
        ],
        ic: IcDistribution::UniformInterval { lo: -1.0, hi: 1.0 },
        table: Some(table3(
            [[40.0, 120.0, 400.0], [11.0, 48.0, 286.0], [10.0, 38.0, 318.0]],
            [[0.24, 0.24, 0.24], [0.66, 0.46, 0.25], [1.1, 0.27, 0.25]],
        )),
        design: DesignOptions {
            t_bar: 10.0,
            tau_star: 0.05,
            f_cr: 25.0,
            n: 5,
            zeta: p.zeta,
            theta: p.theta,
            delta: Some(p.delta),
        },
    })
}

// ---------------------------------------------------------------- example 2

/// x1' = x2, x2' = -h(x1) + u + w, z = x2, u = -(x2 + e2), h(r) = h_gain * r.
#[derive(Clone, Debug, PartialEq)]
pub struct Example2Params {
    /// Slope of the sector nonlinearity, must lie in [1, 2].
    pub h_gain: f64,
    pub eps: f64,
    pub lambda: f64,
    pub c: f64,
    pub c_bar: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub kappa_hat: f64,
    pub theta: f64,
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Example2Params {
            h_gain: 1.5,
            eps: 1.0,
            lambda: 1e-3,
            c: 0.7,
            c_bar: 0.05,
            kappa: 50.0,
            zeta: 1.0,
            kappa_hat: 50.0,
            theta: 1.0,
            delta: 4.0,
            eps1: 1.0,
            eps2: 0.4721,
        }
    }
}

impl Example2Params {
    pub fn set(&mut self, key: &str, v: &[f64]) -> Result<()> {
        let x = scalar(key, v)?;
        match key {
            "h_gain" => self.h_gain = x,
            "eps" => self.eps = x,
            "lambda" => self.lambda = x,
            "c" => self.c = x,
            "c_bar" => self.c_bar = x,
            "kappa" => self.kappa = x,
            "zeta" => self.zeta = x,
            "kappa_hat" => self.kappa_hat = x,
            "theta" => self.theta = x,
            "delta" => self.delta = x,
            "eps1" => self.eps1 = x,
            "eps2" => self.eps2 = x,
            _ => return Err(bad(key)),
        }
        Ok(())
    }

    /// (4 eps1 + eps2) / (4 eps1 eps2 (1 - eps2)), used directly as the gain.
    pub fn gamma(&self) -> f64 {
        (4.0 * self.eps1 + self.eps2) / (4.0 * self.eps1 * self.eps2 * (1.0 - self.eps2))
    }
}

pub const EX2_SECTOR_HI: f64 = 2.0;

pub fn example2() -> Scenario {
    example2_with(&Example2Params::default()).expect("default parameters are valid")
}

pub fn example2_with(p: &Example2Params) -> Result<Scenario> {
    let g = p.h_gain;
    if !(1.0..=EX2_SECTOR_HI).contains(&g) {
        return Err(Error::Invalid(format!("h_gain = {g} outside the sector [1, 2]")));
    }
    if !(p.lambda > 0.0 && p.eps > 0.0 && p.eps1 > 0.0 && p.eps2 > 0.0 && p.eps2 < 1.0) {
        return Err(Error::Invalid("example2 needs lambda, eps, eps1 > 0 and eps2 in (0,1)".into()));
    }
    // beta2(|w|) = 5|w|^2 <= c0 sigma_bar with c0 = 5 c_bar; need c < 1 - c0
    let c0 = 5.0 * p.c_bar;
    if !(p.c > 0.0 && p.c_bar > 0.0 && p.c < 1.0 - c0) {
        return Err(Error::Invalid(format!("example2 needs 0 < c < 1 - 5 c_bar (got c = {}, c_bar = {})", p.c, p.c_bar)));
    }
    let lambda = p.lambda;
    let lg3 = (p.c_bar / 2.0).sqrt();
    let plant = PlantBundle {
        n: 2,
        m: 1,
        q: 1,
        p: 1,
        f: std::sync::Arc::new(move |x, u, w, dx| {
            dx[0] = x[1];
            dx[1] = -g * x[0] + u[0] + w[0];
        }),
        h: std::sync::Arc::new(|x, _w, z| z[0] = x[1]),
        k: std::sync::Arc::new(|x, u| u[0] = -x[1]),
        gamma3: ClassKFn::linear(lg3),
        w_cap: Some(1.0),
        measured: vec![1],
        // rows (0, 1, 0, 0) and (-g, 0, 1, 1)
        l_f: (g * g + 2.0).sqrt(),
        l_fu: 1.0,
        l_k: 1.0,
        l_gamma3: lg3,
    };
    let v = Lyapunov::new(
        move |x| 0.5 * (x[0] * x[0] + 2.0 * x[0] * x[1] + 2.0 * x[1] * x[1]) + g * x[0] * x[0],
        move |x, d| {
            d[0] = x[0] + x[1] + 2.0 * g * x[0];
            d[1] = x[0] + 2.0 * x[1];
        },
    );
    let w = v.scaled(lambda);
    let p_norm = (3.0 + 5f64.sqrt()) / 2.0;
    let s3 = lambda * (p_norm + 2.0 * EX2_SECTOR_HI);
    let l = plant.l_fu * plant.l_k;
    let a = 5.0;
    let sigma_bar = ClassKFn::power(0.5, 2.0);
    let sigma3 = ClassKFn::linear(s3);
    // psi(r) = sqrt(sigma_bar + l^2 sigma3^2 / 4a) - l sigma3 / (2 sqrt a), linear here
    let psi_slope = (0.5 + l * l * s3 * s3 / (4.0 * a)).sqrt() - l * s3 / (2.0 * a.sqrt());
    let (p1_min, _) = sym2_eig(3.0, 1.0, 2.0);
    let (_, p2_max) = sym2_eig(5.0, 1.0, 2.0);
    let certs = CertificateSet {
        v,
        w,
        sigma_bar,
        sigma0: ClassKFn::linear(l * s3),
        sigma1: ClassKFn::power(p1_min / 2.0, 2.0),
        sigma2: ClassKFn::power(p2_max / 2.0, 2.0),
        sigma3,
        beta1: ClassKFn::power(a, 2.0),
        psi: ClassKFn::linear(psi_slope),
        beta1_bar: ClassKFn::linear(a.sqrt()),
        gamma: p.gamma(),
        c: p.c,
        c_bar: p.c_bar,
        state_norm: Norm::Euclidean,
        form: ThresholdForm::CompletedSquare { a, l },
        factored: false,
        beta1_bar_redefined: true,
        mu_scale: 1.0 / (lambda * (1.0 - p.eps2)),
        eps: p.eps,
    };
    let q_formula = lg3 * (p2_max / p1_min).sqrt() * p.eps;
    let mut q_printed = exp("Q_printed", 0.62, 5e-3, Provenance::Reference);
    q_printed.note = Some(format!(
        "formula gives {q_formula:.4}; the printed value corresponds to c_bar = 0.2"
    ));
    Ok(Scenario {
        name: "example2".into(),
        plant,
        certs,
        rules: rules3(p.kappa, p.zeta, p.kappa_hat, p.theta, p.delta),
        sim_defaults: SimConfig::new(vec![0.87, 0.5], 10.0),
        expected: vec![
            exp("gamma", 4.4861, 1e-4, Provenance::Reference),
            exp("sigma_min_P1", (5.0 - 5f64.sqrt()) / 2.0, 1e-12, Provenance::Derived),
            exp("sigma_max_P2", (7.0 + 13f64.sqrt()) / 2.0, 1e-12, Provenance::Derived),
            exp("Q", q_formula, 1e-12, Provenance::Derived),
            q_printed,
        ],
        ic: IcDistribution::UniformBall { radius: 1.0 },
        table: Some(table3(
            [[47.0, 139.0, 466.0], [6.0, 89.0, 415.0], [3.0, 8.0, 70.0]],
            [[0.09, 0.09, 0.09], [1.21, 0.1, 0.09], [4.0, 4.0, 0.49]],
        )),
        design: DesignOptions {
            t_bar: 10.0,
            tau_star: 0.05,
            f_cr: 25.0,
            n: 5,
            zeta: p.zeta,
            theta: p.theta,
            delta: Some(p.delta),
        },
    })
}

// ---------------------------------------------------------------- example 3

/// x1' = x2 - b x1, x2' = -a x1^3 + u + w, z = x2, u = -(x1 + e1) - (x2 + e2).
#[derive(Clone, Debug, PartialEq)]
pub struct Example3Params {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub c: f64,
    pub c_bar: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub kappa_hat: f64,
    pub theta: f64,
    pub delta: f64,
}

impl Default for Example3Params {
    fn default() -> Self {
        Example3Params {
            a: 1.0,
            b: 10.0,
            eps: 1.0,
            c: 0.5,
            c_bar: 0.45,
            lambda: 1.0,
            kappa: 10.0,
            zeta: 1.0,
            kappa_hat: 10.0,
            theta: 5.0,
            delta: 1.0,
        }
    }
}

impl Example3Params {
    pub fn set(&mut self, key: &str, v: &[f64]) -> Result<()> {
        let x = scalar(key, v)?;
        match key {
            "a" => self.a = x,
            "b" => self.b = x,
            "eps" => self.eps = x,
            "c" => self.c = x,
            "c_bar" => self.c_bar = x,
            "lambda" => self.lambda = x,
            "kappa" => self.kappa = x,
            "zeta" => self.zeta = x,
            "kappa_hat" => self.kappa_hat = x,
            "theta" => self.theta = x,
            "delta" => self.delta = x,
            _ => return Err(bad(key)),
        }
        Ok(())
    }
}

/// lambda values of the sweep and the printed static counts and min gaps.
pub fn table_iv() -> (Vec<f64>, TableRef) {
    (
        vec![1e-3, 1e-2, 1e-1, 1.0],
        TableRef {
            horizons: vec![1e-3, 1e-2, 1e-1, 1.0],
            rules: vec!["static".into(), "continuous".into(), "discrete".into()],
            counts: vec![
                vec![149.0, 152.0, 176.0, 420.0],
                vec![8.0, 8.0, 8.0, 8.0],
                vec![10.0, 10.0, 10.0, 10.0],
            ],
            min_gaps: vec![
                vec![0.023, 0.022, 0.019, 0.007],
                vec![0.670, 0.669, 0.680, 0.610],
                vec![0.999, 0.999, 0.999, 0.999],
            ],
        },
    )
}

pub fn example3() -> Scenario {
    example3_with(&Example3Params::default()).expect("default parameters are valid")
}

pub fn example3_with(p: &Example3Params) -> Result<Scenario> {
    let (a, b, lambda) = (p.a, p.b, p.lambda);
    if !(a > 0.0 && b > 0.0 && lambda > 0.0 && p.eps > 0.0) {
        return Err(Error::Invalid("example3 needs a, b, lambda, eps > 0".into()));
    }
    if !(p.c > 0.0 && p.c_bar > 0.0 && p.c < 1.0 - p.c_bar) {
        return Err(Error::Invalid(format!("example3 needs 0 < c < 1 - c_bar (got {}, {})", p.c, p.c_bar)));
    }
    if p.eps > 1.0 {
        // sigma2 = (2 + a) r^2 / 4 only bounds V on the unit ball
        return Err(Error::Invalid(format!("example3 certificates need eps <= 1 (got {})", p.eps)));
    }
    let sbf = move |r: f64| (b * r + a * b * r.powi(3)).min(r / 4.0);
    let c_bar = p.c_bar;
    // slope of min{b r + a b r^3, r/4} is at most 1/4 once b >= 1/4
    let lg3 = c_bar * b.min(0.25);
    let eb = ((2.0 + a) / 2.0).sqrt() * p.eps;
    let jac = [-b, 1.0, 0.0, 0.0, -3.0 * a * eb * eb, 0.0, 1.0, 1.0];
    let plant = PlantBundle {
        n: 2,
        m: 1,
        q: 1,
        p: 1,
        f: std::sync::Arc::new(move |x, u, w, dx| {
            dx[0] = x[1] - b * x[0];
            dx[1] = -a * x[0].powi(3) + u[0] + w[0];
        }),
        h: std::sync::Arc::new(|x, _w, z| z[0] = x[1]),
        k: std::sync::Arc::new(|x, u| u[0] = -(x[0] + x[1])),
        gamma3: ClassKFn::new(move |r| c_bar * sbf(r)).with_lipschitz(lg3),
        w_cap: Some(1.0),
        measured: vec![0, 1],
        l_f: op_norm(&jac, 2, 4),
        l_fu: 1.0,
        l_k: SQRT_2,
        l_gamma3: lg3,
    };
    let v = Lyapunov::new(
        move |x| a * x[0].powi(4) / 4.0 + 0.5 * (x[0] * x[0] + x[1] * x[1]),
        move |x, d| {
            d[0] = a * x[0].powi(3) + x[0];
            d[1] = x[1];
        },
    );
    let w = v.scaled(lambda);
    let l_fu = plant.l_fu;
    // psi = sigma_bar / (1 + sigma0) stops increasing at r^2 = (1 + 2 lambda L) / (2 lambda L a)
    let peak = ((1.0 + 2.0 * lambda * l_fu) / (2.0 * lambda * l_fu * a)).sqrt();
    let sigma_bar = ClassKFn::new(sbf).with_domain(peak);
    let sigma0 = ClassKFn::new(move |r| 2.0 * lambda * l_fu * (1.0 + a * r * r)).with_domain(peak);
    let beta1 = ClassKFn::linear(SQRT_2);
    let certs = CertificateSet {
        psi: make_psi(&sigma_bar, &sigma0)?,
        beta1_bar: make_beta1_bar(&beta1),
        v,
        w,
        sigma_bar,
        sigma0,
        sigma1: ClassKFn::power(0.5, 2.0),
        sigma2: ClassKFn::power((2.0 + a) / 4.0, 2.0),
        sigma3: ClassKFn::new(move |r| lambda * r + a * lambda * r.powi(3)),
        beta1,
        gamma: 1.0,
        c: p.c,
        c_bar: p.c_bar,
        state_norm: Norm::Infinity,
        form: ThresholdForm::Quotient,
        factored: true,
        beta1_bar_redefined: false,
        mu_scale: 2.0 / lambda,
        eps: p.eps,
    };
    Ok(Scenario {
        name: "example3".into(),
        plant,
        certs,
        rules: rules3(p.kappa, p.zeta, p.kappa_hat, p.theta, p.delta),
        sim_defaults: SimConfig::new(vec![0.87, 0.5], 10.0),
        expected: vec![
            exp("Q", 0.138, 5e-4, Provenance::Reference),
            exp("gamma", 1.0, 0.0, Provenance::Reference),
            exp("L_k", SQRT_2, 1e-15, Provenance::Exact),
        ],
        ic: IcDistribution::UniformBall { radius: 1.0 },
        table: Some(table3(
            [[420.0, 1190.0, 3882.0], [8.0, 23.0, 75.0], [10.0, 30.0, 100.0]],
            [[0.007, 0.007, 0.007], [0.61, 0.57, 0.53], [1.0, 1.0, 1.0]],
        )),
        design: DesignOptions {
            t_bar: 10.0,
            tau_star: 0.05,
            f_cr: 25.0,
            n: 5,
            zeta: p.zeta,
            theta: p.theta,
            delta: Some(p.delta),
        },
    })
}

// ---------------------------------------------------------------- zeno

/// x' = A x + B u + w, u = K x, z = x, trigger |e| >= p |x|. Matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ZenoParams {
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub k: Vec<f64>,
    pub x0: Vec<f64>,
    /// Envelope slope for the restricted variant.
    pub c_hat: f64,
}

impl Default for ZenoParams {
    fn default() -> Self {
        ZenoParams {
            p: 0.5,
            n: 1,
            m: 1,
            a: vec![-1.0],
            b: vec![1.0],
            k: vec![-1.0],
            x0: vec![1.0],
            c_hat: 0.0,
        }
    }
}

impl ZenoParams {
    pub fn set(&mut self, key: &str, v: &[f64]) -> Result<()> {
        let as_dim = |x: f64| -> Result<usize> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::Invalid(format!("dimension '{key}' must be a positive integer")))
            }
        };
        match key {
            "p" => self.p = scalar(key, v)?,
            "c_hat" => self.c_hat = scalar(key, v)?,
            "n" => self.n = as_dim(scalar(key, v)?)?,
            "m" => self.m = as_dim(scalar(key, v)?)?,
            "A" | "a" => self.a = v.to_vec(),
            "B" | "b" => self.b = v.to_vec(),
            "K" | "k" => self.k = v.to_vec(),
            "x0" => self.x0 = v.to_vec(),
            _ => return Err(bad(key)),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if !(self.p > 0.0) {
            return Err(Error::Invalid(format!("p = {} must be positive", self.p)));
        }
        if self.c_hat < 0.0 {
            return Err(Error::Invalid(format!("c_hat = {} must be nonnegative", self.c_hat)));
        }
        for (name, v, want) in [("A", &self.a, n * n), ("B", &self.b, n * m), ("K", &self.k, m * n), ("x0", &self.x0, n)] {
            if v.len() != want {
                return Err(Error::Invalid(format!("{name} has {} entries, expected {want}", v.len())));
            }
        }
        if self.x0.iter().all(|v| *v == 0.0) {
            return Err(Error::Invalid("x0 must be nonzero".into()));
        }
        Ok(())
    }

    /// B K, row-major n x n.
    pub fn bk(&self) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = (0..m).map(|j| self.b[r * m + j] * self.k[j * n + c]).sum();
            }
        }
        out
    }
}

/// Closed forms for the adversarial run: x(t) = (1 - t) x0, t_i = 1 - (1 + p)^{-i}.
#[derive(Clone, Debug, PartialEq)]
pub struct ZenoOracle {
    pub p: f64,
    pub x0: Vec<f64>,
}

impl ZenoOracle {
    pub fn event_time(&self, i: u32) -> f64 {
        1.0 - (1.0 + self.p).powi(-(i as i32))
    }

    pub fn state(&self, t: f64) -> Vec<f64> {
        self.x0.iter().map(|v| (1.0 - t) * v).collect()
    }
}

fn zeno_base(zp: &ZenoParams, gamma3: ClassKFn, l_f: f64, l_k: f64, l_gamma3: f64) -> Result<(PlantBundle, CertificateSet)> {
    zp.check()?;
    let (n, m) = (zp.n, zp.m);
    let (a, b, k) = (zp.a.clone(), zp.b.clone(), zp.k.clone());
    let plant = PlantBundle {
        n,
        m,
        q: n,
        p: n,
        f: std::sync::Arc::new(move |x, u, w, dx| {
            for r in 0..n {
                let mut acc = w[r];
                for c in 0..n {
                    acc += a[r * n + c] * x[c];
                }
                for j in 0..m {
                    acc += b[r * m + j] * u[j];
                }
                dx[r] = acc;
            }
        }),
        h: std::sync::Arc::new(|x, _w, z| z.copy_from_slice(x)),
        k: std::sync::Arc::new(move |x, u| {
            for j in 0..m {
                u[j] = (0..n).map(|c| k[j * n + c] * x[c]).sum();
            }
        }),
        gamma3,
        w_cap: None,
        measured: (0..n).collect(),
        l_f,
        l_fu: op_norm(&zp.b, n, m),
        l_k,
        l_gamma3,
    };
    // only the trigger shape matters here: c sigma_bar / (1 + sigma0) = p r against |e|
    let c = 0.5;
    let sigma_bar = ClassKFn::linear(zp.p / c);
    let sigma0 = ClassKFn::zero();
    let beta1 = ClassKFn::identity();
    let r0 = crate::model::euclid(&zp.x0);
    let certs = CertificateSet {
        psi: make_psi(&sigma_bar, &sigma0)?,
        beta1_bar: make_beta1_bar(&beta1),
        v: Lyapunov::new(
            |x| 0.5 * x.iter().map(|a| a * a).sum::<f64>(),
            |x, g| g.copy_from_slice(x),
        ),
        w: zero_lyapunov(),
        sigma_bar,
        sigma0,
        sigma1: ClassKFn::power(0.5, 2.0),
        sigma2: ClassKFn::power(0.5, 2.0),
        sigma3: ClassKFn::linear(1.0),
        beta1,
        gamma: 1.0,
        c,
        c_bar: 0.0,
        state_norm: Norm::Euclidean,
        form: ThresholdForm::Quotient,
        factored: false,
        beta1_bar_redefined: false,
        mu_scale: 1.0,
        eps: r0,
    };
    Ok((plant, certs))
}

/// Adversarial scenario and its analytic oracle.
pub fn zeno_linear(zp: &ZenoParams) -> Result<(Scenario, ZenoOracle)> {
    zp.check()?;
    let n = zp.n;
    let na = op_norm(&zp.a, n, n);
    let nbk = op_norm(&zp.bk(), n, n);
    let (plant, certs) = zeno_base(zp, ClassKFn::zero(), na + 1.0, nbk, 0.0)?;
    let mut sim = SimConfig::new(zp.x0.clone(), 2.0);
    sim.disturbance = DisturbanceSpec {
        mode: DisturbanceMode::Custom(CustomSignal::ZenoAdversary { a: zp.a.clone(), bk: zp.bk(), x0: zp.x0.clone() }),
        scale: 1.0,
    };
    let oracle = ZenoOracle { p: zp.p, x0: zp.x0.clone() };
    let scen = Scenario {
        name: "zeno".into(),
        plant,
        certs,
        rules: vec![("static".into(), TriggerRule::Static)],
        sim_defaults: sim,
        expected: (1..=8)
            .map(|i| exp(&format!("t_{i}"), oracle.event_time(i), 0.0, Provenance::Derived))
            .collect(),
        ic: IcDistribution::UniformBall { radius: 1.0 },
        table: None,
        design: DesignOptions::default(),
    };
    Ok((scen, oracle))
}

/// |w| <= c_hat |x|. Constants mapped so that the general inter-event bound
/// reduces to the one for linear plants: L_f = |A| + c_hat, L_k = |BK| / L_f, L_gamma3 = 0.
pub fn zeno_envelope(zp: &ZenoParams) -> Result<Scenario> {
    zp.check()?;
    let n = zp.n;
    let na = op_norm(&zp.a, n, n);
    let nbk = op_norm(&zp.bk(), n, n);
    let l_f = na + zp.c_hat;
    if !(l_f > 0.0) {
        return Err(Error::Invalid("|A| + c_hat must be positive".into()));
    }
    let (plant, certs) = zeno_base(zp, ClassKFn::linear(zp.c_hat), l_f, nbk / l_f, 0.0)?;
    let mut sim = SimConfig::new(zp.x0.clone(), 10.0);
    sim.disturbance = DisturbanceSpec { mode: DisturbanceMode::EnvelopeRandomHold { hold_dt: None }, scale: 1.0 };
    let printed = (1.0 + l_f / (zp.p * (na + nbk + zp.c_hat) + nbk)).ln() / l_f;
    let mut tau_printed = exp("tau_printed", printed, 1e-3, Provenance::Reference);
    tau_printed.note = Some("closing formula for linear plants; uses p where 1/p belongs".into());
    Ok(Scenario {
        name: "zeno_envelope".into(),
        plant,
        certs,
        rules: vec![("static".into(), TriggerRule::Static)],
        sim_defaults: sim,
        expected: vec![tau_printed],
        ic: IcDistribution::UniformBall { radius: 1.0 },
        table: None,
        design: DesignOptions::default(),
    })
}

/// `linear` is the envelope-restricted linear plant under its own name, for inline configs.
pub const NAMES: [&str; 6] = ["example1", "example2", "example3", "zeno", "zeno_envelope", "linear"];

/// Builds a named scenario after applying `key = values` overrides.
pub fn by_name(name: &str, overrides: &[(String, Vec<f64>)]) -> Result<Scenario> {
    match name {
        "example1" => {
            let mut p = Example1Params::default();
            for (k, v) in overrides {
                p.set(k, v)?;
            }
            example1_with(&p)
        }
        "example2" => {
            let mut p = Example2Params::default();
            for (k, v) in overrides {
                p.set(k, v)?;
            }
            example2_with(&p)
        }
        "example3" => {
            let mut p = Example3Params::default();
            for (k, v) in overrides {
                p.set(k, v)?;
            }
            example3_with(&p)
        }
        "zeno" | "zeno_envelope" | "linear" => {
            let mut p = ZenoParams::default();
            for (k, v) in overrides {
                p.set(k, v)?;
            }
            if name == "zeno" {
                Ok(zeno_linear(&p)?.0)
            } else {
                let mut s = zeno_envelope(&p)?;
                s.name = name.to_string();
                Ok(s)
            }
        }
        _ => Err(Error::Invalid(format!("unknown scenario '{name}' (known: {})", NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_build_and_validate() {
        for name in NAMES {
            let s = by_name(name, &[]).unwrap();
            s.plant.check_equilibrium().unwrap();
            s.certs.validate(s.plant.n, 500, 3).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn overrides_are_checked() {
        assert!(by_name("example2", &[("h_gain".into(), vec![2.5])]).is_err());
        assert!(by_name("example1", &[("nope".into(), vec![1.0])]).is_err());
        assert!(by_name("example9", &[]).is_err());
        let s = by_name("example3", &[("lambda".into(), vec![1e-3])]).unwrap();
        assert!((s.certs.mu_scale - 2000.0).abs() < 1e-9);
    }
}
