//! Plant bundles, certificate data and the class-K function algebra.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// (x, u, w, dx)
pub type DynFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// (x, w, z)
pub type OutFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// (x, u)
pub type CtrlFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

const INV_TOL: f64 = 1e-12;
const INV_ITERS: usize = 200;

/// Strictly increasing scalar map with f(0) = 0.
#[derive(Clone)]
pub struct ClassKFn {
    eval: ScalarMap,
    inverse: Option<ScalarMap>,
    domain_hint: Option<f64>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for ClassKFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassKFn")
            .field("closed_inverse", &self.inverse.is_some())
            .field("domain_hint", &self.domain_hint)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ClassKFn {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ClassKFn {
            eval: Arc::new(eval),
            inverse: None,
            domain_hint: None,
            lipschitz: None,
        }
    }

    pub fn with_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    pub fn with_domain(mut self, hi: f64) -> Self {
        self.domain_hint = Some(hi);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn identity() -> Self {
        ClassKFn::linear(1.0)
    }

    /// The zero map. Not class-K; used as a placeholder for absent terms.
    pub fn zero() -> Self {
        ClassKFn::new(|_| 0.0).with_lipschitz(0.0)
    }

    pub fn linear(k: f64) -> Self {
        ClassKFn::new(move |r| k * r)
            .with_inverse(move |y| y / k)
            .with_lipschitz(k)
    }

    /// k * r^p
    pub fn power(k: f64, p: f64) -> Self {
        ClassKFn::new(move |r| k * r.powf(p)).with_inverse(move |y| (y / k).powf(1.0 / p))
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn domain_hint(&self) -> Option<f64> {
        self.domain_hint
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn has_closed_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        match &self.inverse {
            Some(g) => Ok(g(y)),
            None => self.numeric_inverse(y),
        }
    }

    /// Bracketed bisection; ignores any closed form.
    pub fn numeric_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::Inverse(format!("argument {y} outside [0, inf)")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let mut hi = match self.domain_hint {
            Some(d) => {
                let top = self.eval(d);
                if top < y {
                    if y - top <= 1e-12 * (1.0 + y) {
                        return Ok(d);
                    }
                    return Err(Error::Inverse(format!(
                        "value {y} above range {top} on [0, {d}]"
                    )));
                }
                d
            }
            None => {
                let mut h = 1.0;
                let mut n = 0;
                while self.eval(h) < y {
                    h *= 2.0;
                    n += 1;
                    if n > 1000 || !h.is_finite() {
                        return Err(Error::Inverse(format!("no bracket found for {y}")));
                    }
                }
                h
            }
        };
        let mut lo = 0.0;
        for _ in 0..INV_ITERS {
            if hi - lo <= INV_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Zero at zero, strictly increasing on a uniform grid over [0, hi] and, when a closed
    /// form inverse is attached, round-trip consistent.
    pub fn validate(&self, hi: f64, n: usize) -> Result<()> {
        let f0 = self.eval(0.0);
        if f0.abs() > 1e-12 {
            return Err(Error::ClassK(format!("f(0) = {f0:e}")));
        }
        let n = n.max(2);
        let mut prev = f0;
        for j in 1..=n {
            let r = hi * j as f64 / n as f64;
            let v = self.eval(r);
            if !(v > prev) {
                return Err(Error::ClassK(format!(
                    "not strictly increasing near r = {r} ({prev} -> {v})"
                )));
            }
            prev = v;
            if let Some(g) = &self.inverse {
                let back = g(v);
                if (back - r).abs() > 1e-9 * (1.0 + r) {
                    return Err(Error::ClassK(format!(
                        "inverse round trip at r = {r}: got {back}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Finite-difference Lipschitz constant on [lo, hi]; uses the recorded value when present.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        if let Some(l) = self.lipschitz {
            return l;
        }
        grid_lipschitz(|r| self.eval(r), lo, hi, 4000)
    }
}

/// Max slope between neighbours of a dense grid (uniform plus geometric refinement near lo).
pub fn grid_lipschitz(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let mut pts: Vec<f64> = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    let span = hi - lo;
    let mut s = span / n as f64;
    for _ in 0..30 {
        s *= 0.5;
        pts.push(lo + s);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut best: f64 = 0.0;
    let mut prev = (pts[0], f(pts[0]));
    for &r in &pts[1..] {
        let v = f(r);
        let slope = ((v - prev.1) / (r - prev.0)).abs();
        if slope.is_finite() {
            best = best.max(slope);
        } else {
            return f64::INFINITY;
        }
        prev = (r, v);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Euclidean,
    Infinity,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Norm::Infinity => v.iter().fold(0.0, |m: f64, a| m.max(a.abs())),
        }
    }
}

pub fn euclid(v: &[f64]) -> f64 {
    Norm::Euclidean.of(v)
}

/// Spectral norm of a row-major rows x cols matrix by power iteration on M^T M.
pub fn op_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    assert_eq!(m.len(), rows * cols);
    if m.iter().all(|a| *a == 0.0) {
        return 0.0;
    }
    let mut v = vec![1.0; cols];
    for (j, vj) in v.iter_mut().enumerate() {
        *vj += 0.1 * j as f64;
    }
    let mut lam = 0.0;
    for _ in 0..500 {
        let mut mv = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..cols {
                mv[i] += m[i * cols + j] * v[j];
            }
        }
        let mut mtmv = vec![0.0; cols];
        for j in 0..cols {
            for i in 0..rows {
                mtmv[j] += m[i * cols + j] * mv[i];
            }
        }
        let nrm = euclid(&mtmv);
        if nrm == 0.0 {
            return 0.0;
        }
        for j in 0..cols {
            v[j] = mtmv[j] / nrm;
        }
        if (nrm - lam).abs() <= 1e-15 * nrm {
            lam = nrm;
            break;
        }
        lam = nrm;
    }
    lam.sqrt()
}

/// Eigenvalues (min, max) of a symmetric 2x2 matrix [a b; b d].
pub fn sym2_eig(a: f64, b: f64, d: f64) -> (f64, f64) {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (m - r, m + r)
}

/// Closed-loop plant data.
#[derive(Clone)]
pub struct PlantBundle {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub p: usize,
    pub f: DynFn,
    pub h: OutFn,
    pub k: CtrlFn,
    pub gamma3: ClassKFn,
    /// Absolute bound on |w| on top of the state envelope.
    pub w_cap: Option<f64>,
    /// State components the controller actually samples; the error norm only counts these.
    pub measured: Vec<usize>,
    /// Lipschitz constant of f in the stacked argument (x, u, w).
    pub l_f: f64,
    /// Lipschitz constant of f in u alone. Enters the trigger through sigma0.
    pub l_fu: f64,
    pub l_k: f64,
    pub l_gamma3: f64,
}

impl fmt::Debug for PlantBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantBundle")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("q", &self.q)
            .field("p", &self.p)
            .field("l_f", &self.l_f)
            .field("l_fu", &self.l_fu)
            .field("l_k", &self.l_k)
            .field("l_gamma3", &self.l_gamma3)
            .finish()
    }
}

impl PlantBundle {
    pub fn eval_f(&self, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n];
        (self.f)(x, u, w, &mut dx);
        dx
    }

    pub fn eval_h(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.p];
        (self.h)(x, w, &mut z);
        z
    }

    pub fn eval_k(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        (self.k)(x, &mut u);
        u
    }

    /// f(0,0,0) = 0, h(0,0) = 0 and k(0) = 0.
    pub fn check_equilibrium(&self) -> Result<()> {
        let zx = vec![0.0; self.n];
        let zu = vec![0.0; self.m];
        let zw = vec![0.0; self.q];
        let f0 = euclid(&self.eval_f(&zx, &zu, &zw));
        let h0 = euclid(&self.eval_h(&zx, &zw));
        let k0 = euclid(&self.eval_k(&zx));
        if f0 > 1e-12 || h0 > 1e-12 || k0 > 1e-12 {
            return Err(Error::Invalid(format!(
                "origin is not an equilibrium: |f|={f0:e} |h|={h0:e} |k|={k0:e}"
            )));
        }
        Ok(())
    }

    /// Sampled check of l_f over a box in the stacked (x, u, w) space.
    /// Returns the observed ratio; fails if it exceeds l_f by more than 5%.
    pub fn lipschitz_probe(&self, bounds: &[(f64, f64)], samples: usize, seed: u64) -> Result<f64> {
        let (n, m, q) = (self.n, self.m, self.q);
        if bounds.len() != n + m + q {
            return Err(Error::Invalid(format!(
                "probe box has {} dims, expected {}",
                bounds.len(),
                n + m + q
            )));
        }
        let f = |s: &[f64]| self.eval_f(&s[..n], &s[n..n + m], &s[n + m..]);
        let est = estimate_lipschitz(f, bounds, samples, seed)?;
        if est > self.l_f * 1.05 {
            return Err(Error::Invalid(format!(
                "sampled Lipschitz ratio {est} exceeds l_f = {} by more than 5%",
                self.l_f
            )));
        }
        Ok(est)
    }
}

/// A storage-type function and its gradient.
#[derive(Clone)]
pub struct Lyapunov {
    pub value: ScalarField,
    pub grad: GradField,
}

impl Lyapunov {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Lyapunov {
            value: Arc::new(value),
            grad: Arc::new(grad),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let v = self.value.clone();
        let g = self.grad.clone();
        Lyapunov::new(
            move |x| s * v(x),
            move |x, out| {
                g(x, out);
                for o in out.iter_mut() {
                    *o *= s;
                }
            },
        )
    }
}

/// How the state-dependent part of the trigger is assembled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdForm {
    /// c * (sigma_bar + d/c) / (1 + sigma0), compared against beta1_bar(|e|).
    Quotient,
    /// sqrt(c sigma_bar + d + l^2 sigma3^2 / (4a)) - l sigma3 / (2 sqrt a),
    /// compared against sqrt(a) |e|. Used when beta1(r) = a r^2 is not Lipschitz-compatible.
    CompletedSquare { a: f64, l: f64 },
}

#[derive(Clone)]
pub struct CertificateSet {
    pub v: Lyapunov,
    pub w: Lyapunov,
    pub sigma_bar: ClassKFn,
    pub sigma0: ClassKFn,
    pub sigma1: ClassKFn,
    pub sigma2: ClassKFn,
    pub sigma3: ClassKFn,
    pub beta1: ClassKFn,
    pub psi: ClassKFn,
    pub beta1_bar: ClassKFn,
    pub gamma: f64,
    pub c: f64,
    pub c_bar: f64,
    /// Norm for |x| inside the trigger and the disturbance envelope.
    /// The sandwich bounds sigma1/sigma2 are always Euclidean.
    pub state_norm: Norm,
    pub form: ThresholdForm,
    /// Dissipation is of the form |x| * (-sigma_bar(|x|) + beta1(|e|)): decay terms enter scaled by |x|.
    pub factored: bool,
    /// beta1_bar was replaced instead of built as max(beta1, id).
    pub beta1_bar_redefined: bool,
    /// mu = mu_scale * U. The dissipation check uses the storage mu_scale * (V + W).
    pub mu_scale: f64,
    /// Radius of admissible initial conditions.
    pub eps: f64,
}

impl fmt::Debug for CertificateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertificateSet")
            .field("gamma", &self.gamma)
            .field("c", &self.c)
            .field("c_bar", &self.c_bar)
            .field("state_norm", &self.state_norm)
            .field("form", &self.form)
            .field("factored", &self.factored)
            .field("mu_scale", &self.mu_scale)
            .field("eps", &self.eps)
            .finish()
    }
}

impl CertificateSet {
    pub fn u_value(&self, x: &[f64]) -> f64 {
        (self.v.value)(x) + (self.w.value)(x)
    }

    pub fn u_grad(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        (self.v.grad)(x, out);
        (self.w.grad)(x, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }

    /// mu(x0) = mu_scale * U(x0).
    pub fn mu(&self, x: &[f64]) -> f64 {
        self.mu_scale * self.u_value(x)
    }

    /// sigma1^{-1}(sigma2(eps)).
    pub fn eps_bar_for(&self, eps: f64) -> Result<f64> {
        self.sigma1.inverse(self.sigma2.eval(eps))
    }

    pub fn eps_bar(&self) -> Result<f64> {
        self.eps_bar_for(self.eps)
    }

    /// Multiplier applied to a decay amount in the dissipation inequality at state norm r.
    pub fn decay_weight(&self, r: f64) -> f64 {
        if self.factored {
            self.mu_scale * r
        } else {
            self.mu_scale
        }
    }

    /// Check the certificate family on sampled states of dimension n.
    pub fn validate(&self, n: usize, samples: usize, seed: u64) -> Result<()> {
        let eb = self.eps_bar()?;
        let hi = match self.psi.domain_hint() {
            Some(d) => d.min(eb),
            None => eb,
        };
        for (name, f) in [
            ("sigma_bar", &self.sigma_bar),
            ("sigma1", &self.sigma1),
            ("sigma2", &self.sigma2),
            ("sigma3", &self.sigma3),
            ("beta1", &self.beta1),
            ("psi", &self.psi),
            ("beta1_bar", &self.beta1_bar),
        ] {
            f.validate(hi, 100)
                .map_err(|e| Error::Certificate(format!("{name}: {e}")))?;
        }
        if !self.factored && self.sigma0.eval(0.0).abs() > 1e-12 {
            return Err(Error::Certificate("sigma0(0) != 0".into()));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Certificate(format!("c = {} outside (0,1)", self.c)));
        }
        if self.form == ThresholdForm::Quotient {
            for j in 0..=100 {
                let r = hi * j as f64 / 100.0;
                let lhs = self.psi.eval(r) * (1.0 + self.sigma0.eval(r));
                let rhs = self.sigma_bar.eval(r);
                if (lhs - rhs).abs() > 1e-10 * (1.0 + rhs.abs()) {
                    return Err(Error::Certificate(format!(
                        "psi (1 + sigma0) != sigma_bar at r = {r}"
                    )));
                }
            }
        }
        if !self.beta1_bar_redefined {
            for j in 0..=100 {
                let r = hi * j as f64 / 100.0;
                let want = self.beta1.eval(r).max(r);
                if (self.beta1_bar.eval(r) - want).abs() > 1e-12 * (1.0 + want) {
                    return Err(Error::Certificate(format!("beta1_bar != max(beta1, r) at r = {r}")));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; n];
        for _ in 0..samples {
            for xi in x.iter_mut() {
                *xi = rng.gen_range(-1.0..1.0);
            }
            let nx = euclid(&x);
            if nx == 0.0 {
                continue;
            }
            let rad = self.eps * rng.gen::<f64>();
            for xi in x.iter_mut() {
                *xi *= rad / nx;
            }
            let r = euclid(&x);
            let v = (self.v.value)(&x);
            let lo = self.sigma1.eval(r);
            let up = self.sigma2.eval(r);
            let slack = 1e-12 * (1.0 + v.abs());
            if v < lo - slack || v > up + slack {
                return Err(Error::Certificate(format!(
                    "sandwich violated at |x| = {r}: {lo} <= {v} <= {up} fails"
                )));
            }
        }
        Ok(())
    }
}

/// Gains used only in the ISS bookkeeping.
#[derive(Clone, Debug)]
pub struct ISSData {
    pub gamma1: ClassKFn,
    pub gamma2: ClassKFn,
    pub gamma4: ClassKFn,
    pub beta2: ClassKFn,
}

impl ISSData {
    pub fn validate(&self, hi: f64) -> Result<()> {
        for (name, f) in [
            ("gamma1", &self.gamma1),
            ("gamma2", &self.gamma2),
            ("gamma4", &self.gamma4),
            ("beta2", &self.beta2),
        ] {
            f.validate(hi, 100)
                .map_err(|e| Error::ClassK(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

/// psi(r) = sigma_bar(r) / (1 + sigma0(r)) with a bisection inverse on its domain.
pub fn make_psi(sigma_bar: &ClassKFn, sigma0: &ClassKFn) -> Result<ClassKFn> {
    let domain = match (sigma_bar.domain_hint(), sigma0.domain_hint()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let sb = sigma_bar.clone();
    let s0 = sigma0.clone();
    let mut psi = ClassKFn::new(move |r| sb.eval(r) / (1.0 + s0.eval(r)));
    if let Some(d) = domain {
        psi = psi.with_domain(d);
    }
    let hi = domain.unwrap_or(10.0);
    let mut prev = psi.eval(0.0);
    for j in 1..=400 {
        let r = hi * j as f64 / 400.0;
        let v = psi.eval(r);
        if !(v > prev) {
            return Err(Error::Certificate(format!(
                "psi not increasing near r = {r}: sigma0 grows too fast relative to sigma_bar"
            )));
        }
        prev = v;
    }
    Ok(psi)
}

/// max(beta1(r), r), with Lipschitz constant max(L_beta1, 1) recorded when L_beta1 is known.
pub fn make_beta1_bar(beta1: &ClassKFn) -> ClassKFn {
    let b = beta1.clone();
    let mut out = ClassKFn::new(move |r| b.eval(r).max(r));
    if let Some(l) = beta1.lipschitz() {
        out = out.with_lipschitz(l.max(1.0));
    }
    if let Some(d) = beta1.domain_hint() {
        out = out.with_domain(d);
    }
    out
}

/// Sampled lower estimate of the Lipschitz constant of `f` over an axis-aligned box.
/// Half of the pairs are drawn independently, the other half as close neighbours.
pub fn estimate_lipschitz<F>(f: F, bounds: &[(f64, f64)], samples: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(Error::Invalid("zero-volume box".into()));
    }
    let d = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut best: f64 = 0.0;
    for s in 0..samples {
        for j in 0..d {
            let (lo, hi) = bounds[j];
            a[j] = rng.gen_range(lo..hi);
            b[j] = if s % 2 == 0 {
                rng.gen_range(lo..hi)
            } else {
                let h = (hi - lo) * 1e-3;
                (a[j] + rng.gen_range(-h..h)).clamp(lo, hi)
            };
            diff[j] = a[j] - b[j];
        }
        let den = euclid(&diff);
        if den == 0.0 {
            continue;
        }
        let fa = f(&a);
        let fb = f(&b);
        let num: f64 = fa.iter().zip(&fb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        best = best.max(num / den);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub pass: bool,
    pub margin: f64,
    pub worst_r: f64,
}

/// gamma4(r - gamma2(gamma3(r))) >= r on the grid.
pub fn check_gamma_chain(
    gamma2: &ClassKFn,
    gamma3: &ClassKFn,
    gamma4: &ClassKFn,
    grid: &[f64],
) -> Result<ChainReport> {
    let mut margin = f64::INFINITY;
    let mut worst_r = f64::NAN;
    for &r in grid {
        let inner = r - gamma2.eval(gamma3.eval(r));
        if inner < 0.0 {
            return Err(Error::ChainInner { r, value: inner });
        }
        let m = gamma4.eval(inner) - r;
        if m < margin {
            margin = m;
            worst_r = r;
        }
    }
    Ok(ChainReport {
        pass: margin >= 0.0,
        margin,
        worst_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_with_identity_denominator() {
        let psi = make_psi(&ClassKFn::power(1.0, 2.0), &ClassKFn::zero()).unwrap();
        for r in [0.0, 0.3, 1.0, 2.5] {
            assert!((psi.eval(r) - r * r).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_quotient_value() {
        let psi = make_psi(&ClassKFn::power(1.0, 2.0), &ClassKFn::identity()).unwrap();
        assert!((psi.eval(2.0) - 4.0 / 3.0).abs() < 1e-15);
        let r = psi.inverse(4.0 / 3.0).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn psi_rejects_fast_denominator() {
        // r / (1 + r^2) peaks at r = 1
        let err = make_psi(&ClassKFn::identity(), &ClassKFn::power(1.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::Certificate(_)));
    }

    #[test]
    fn beta1_bar_cases() {
        let b = make_beta1_bar(&ClassKFn::power(5.0, 2.0));
        assert_eq!(b.eval(0.05), 0.05);
        assert_eq!(b.eval(1.0), 5.0);
        let id = make_beta1_bar(&ClassKFn::identity());
        assert_eq!(id.eval(0.7), 0.7);
        assert_eq!(id.lipschitz(), Some(1.0));
        let steep = make_beta1_bar(&ClassKFn::linear(3.0));
        assert_eq!(steep.lipschitz(), Some(3.0));
        let flat = make_beta1_bar(&ClassKFn::linear(0.2));
        assert_eq!(flat.lipschitz(), Some(1.0));
    }

    #[test]
    fn lipschitz_estimates() {
        let lin = estimate_lipschitz(|s| vec![3.0 * s[0]], &[(0.0, 1.0)], 100, 9).unwrap();
        assert!((lin - 3.0).abs() < 1e-9);
        let cst = estimate_lipschitz(|_| vec![2.0], &[(0.0, 1.0)], 100, 9).unwrap();
        assert_eq!(cst, 0.0);
        let few = estimate_lipschitz(|s| vec![s[0] * s[0]], &[(0.0, 2.0)], 20, 1).unwrap();
        let many = estimate_lipschitz(|s| vec![s[0] * s[0]], &[(0.0, 2.0)], 20000, 1).unwrap();
        assert!(many <= 4.0 + 1e-12);
        assert!(many > 3.99);
        assert!(many >= few);
        assert!(estimate_lipschitz(|s| vec![s[0]], &[(1.0, 1.0)], 10, 0).is_err());
        assert!(estimate_lipschitz(|s| vec![s[0]], &[(0.0, 1.0)], 1, 0).is_err());
    }

    #[test]
    fn lipschitz_is_seed_deterministic() {
        let f = |s: &[f64]| vec![s[0].sin() * s[1]];
        let a = estimate_lipschitz(f, &[(0.0, 1.0), (-1.0, 1.0)], 500, 42).unwrap();
        let b = estimate_lipschitz(f, &[(0.0, 1.0), (-1.0, 1.0)], 500, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gamma_chain_cases() {
        let grid: Vec<f64> = (0..=50).map(|j| j as f64 * 0.1).collect();
        let rep = check_gamma_chain(
            &ClassKFn::zero(),
            &ClassKFn::zero(),
            &ClassKFn::identity(),
            &grid,
        )
        .unwrap();
        assert!(rep.pass);
        assert_eq!(rep.margin, 0.0);

        let rep = check_gamma_chain(
            &ClassKFn::linear(0.5),
            &ClassKFn::linear(0.5),
            &ClassKFn::linear(2.0),
            &grid,
        )
        .unwrap();
        assert!(rep.pass);
        // 2 (r - r/4) - r = r/2, smallest at r = 0
        assert!(rep.margin.abs() < 1e-15);

        let sqrt = ClassKFn::power(1.0, 0.5);
        let err = check_gamma_chain(&sqrt, &ClassKFn::linear(100.0), &ClassKFn::identity(), &grid)
            .unwrap_err();
        match err {
            Error::ChainInner { r, .. } => assert!((r - 0.1).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn numeric_inverse_bounded_domain() {
        let f = ClassKFn::new(|r| r * r * r + r).with_domain(2.0);
        let r = f.inverse(f.eval(1.3)).unwrap();
        assert!((r - 1.3).abs() < 1e-9);
        assert!(f.inverse(100.0).is_err());
        assert!(f.inverse(-1.0).is_err());
    }

    #[test]
    fn op_norm_matches_eig() {
        let m = [3.0, 1.0, 1.0, 2.0];
        let (_, hi) = sym2_eig(3.0, 1.0, 2.0);
        assert!((op_norm(&m, 2, 2) - hi).abs() < 1e-10);
        let r = [0.0, 1.0, 0.0, 0.0, -1.5, 0.0, 1.0, 1.0];
        assert!((op_norm(&r, 2, 4) - 4.25f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn validate_flags_bad_functions() {
        assert!(ClassKFn::power(2.0, 3.0).validate(5.0, 100).is_ok());
        assert!(ClassKFn::new(|r| r + 1.0).validate(1.0, 10).is_err());
        assert!(ClassKFn::new(|r| (r - 1.0).powi(2) - 1.0).validate(3.0, 10).is_err());
        let wrong = ClassKFn::linear(2.0).with_inverse(|y| y);
        assert!(wrong.validate(1.0, 10).is_err());
    }
}
