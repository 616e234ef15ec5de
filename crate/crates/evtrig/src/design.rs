//! Inter-event lower bounds and synthesis of the decay parameters.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{grid_lipschitz, CertificateSet, PlantBundle};
use crate::trigger::{theta_pow_over_fact, threshold_at, TriggerRule};

/// Solution of y' = L_f (1 + y)(L + L_k y), y(0) = 0. Infinite past the escape time.
pub fn y_closed_form(t: f64, l_f: f64, l_k: f64, l: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Invalid(format!("t = {t} < 0")));
    }
    if !(l > l_k) {
        return Err(Error::Invalid(format!("need L > L_k (L = {l}, L_k = {l_k})")));
    }
    let g = l_f * (l - l_k);
    // (1 + y) L / (L + L_k y) = exp(g t)
    let big_e = (g * t).exp();
    let den = l - l_k * big_e;
    if den <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(l * (big_e - 1.0) / den)
}

/// Time at which y reaches `level`.
pub fn y_hitting_time(level: f64, l_f: f64, l_k: f64, l: f64) -> f64 {
    let g = l_f * (l - l_k);
    ((1.0 + level) * l / (l + l_k * level)).ln() / g
}

/// tau = ln(1 + (L - L_k)/(L Lbar + L_k)) / (L_f (L - L_k)), L = L_k + L_gamma3 + 1.
pub fn tau_static(l_f: f64, l_k: f64, l_gamma3: f64, l_bar: f64) -> f64 {
    let l = l_k + l_gamma3 + 1.0;
    (1.0 + (l - l_k) / (l * l_bar + l_k)).ln() / (l_f * (l - l_k))
}

/// (1 + sigma0(eps_m))^2 / (1/L_{sigma_bar^{-1}} - L_{sigma0} sigma_bar(eps_m)).
pub fn l_psi_inv_formula(l_sigma_bar_inv: f64, l_sigma0: f64, sigma0_em: f64, sigma_bar_em: f64) -> Result<f64> {
    let den = 1.0 / l_sigma_bar_inv - l_sigma0 * sigma_bar_em;
    if !(den > 0.0) {
        return Err(Error::LipschitzCondition(format!(
            "L_sigma0 * L_sigma_bar_inv * sigma_bar(eps_m) = {:.6e} must be < 1 (L_sigma0 = {l_sigma0:.6e}, L_sigma_bar_inv = {l_sigma_bar_inv:.6e}, sigma_bar(eps_m) = {sigma_bar_em:.6e}); shrink sigma3",
            l_sigma0 * l_sigma_bar_inv * sigma_bar_em
        )));
    }
    Ok((1.0 + sigma0_em).powi(2) / den)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LPsiInv {
    pub value: f64,
    pub valid: bool,
    pub diagnostic: Option<String>,
    pub l_sigma_bar_inv: f64,
    pub l_sigma0: f64,
}

/// Constituent constants measured on [0, eps_m] and [0, sigma_bar(eps_m)].
pub fn l_psi_inv(certs: &CertificateSet, eps_m: f64) -> LPsiInv {
    let sb_em = certs.sigma_bar.eval(eps_m);
    let l_sbi = grid_lipschitz(|s| certs.sigma_bar.inverse(s).unwrap_or(f64::NAN), 0.0, sb_em, 4000);
    let l_s0 = certs.sigma0.lipschitz_on(0.0, eps_m);
    let s0_em = certs.sigma0.eval(eps_m);
    match l_psi_inv_formula(l_sbi, l_s0, s0_em, sb_em) {
        Ok(v) => LPsiInv { value: v, valid: true, diagnostic: None, l_sigma_bar_inv: l_sbi, l_sigma0: l_s0 },
        Err(e) => LPsiInv {
            value: f64::INFINITY,
            valid: false,
            diagnostic: Some(e.to_string()),
            l_sigma_bar_inv: l_sbi,
            l_sigma0: l_s0,
        },
    }
}

/// Lipschitz constant of |e| -> |x| along the static firing surface over |x| in (0, eps_bar].
pub fn l_bar_numeric(certs: &CertificateSet, eps_bar: f64) -> Result<f64> {
    let n = 2000;
    let mut pts = vec![(0.0, 0.0)];
    for j in 1..=n {
        let r = eps_bar * j as f64 / n as f64;
        let thr = threshold_at(&TriggerRule::Static, certs, r, 0.0);
        let e = certs.beta1_bar.inverse(thr)?;
        pts.push((e, r));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best: f64 = 0.0;
    for w in pts.windows(2) {
        let de = w[1].0 - w[0].0;
        if de > 0.0 {
            best = best.max((w[1].1 - w[0].1).abs() / de);
        }
    }
    Ok(best)
}

pub fn n_theta(theta: f64) -> usize {
    assert!(theta > 0.0, "theta must be positive");
    // the terms rise while i < theta and fall afterwards
    let mut best = 1;
    let mut i = 1;
    loop {
        if theta_pow_over_fact(theta, i) >= theta {
            best = i;
        } else if i as f64 > theta {
            return best;
        }
        i += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignInputs {
    pub l_f: f64,
    pub l_k: f64,
    pub l_gamma3: f64,
    pub l_sigma3: f64,
    pub l_sigma_bar_inv: f64,
    pub l_sigma0: f64,
    pub l_beta1: f64,
    pub sigma0_eps_bar: f64,
    pub sigma_bar_eps_bar: f64,
    pub eps_bar: f64,
    pub c: f64,
    /// Lipschitz constant of the static firing surface; falls back to L_hat.
    pub l_bar: Option<f64>,
    pub t_bar: f64,
    pub tau_star: f64,
    pub f_cr: f64,
    pub n: usize,
    pub zeta: f64,
    pub theta: f64,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignOptions {
    pub t_bar: f64,
    pub tau_star: f64,
    pub f_cr: f64,
    pub n: usize,
    pub zeta: f64,
    pub theta: f64,
    pub delta: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { t_bar: 10.0, tau_star: 0.05, f_cr: 25.0, n: 5, zeta: 1.0, theta: 1.0, delta: None }
    }
}

impl DesignInputs {
    pub fn from_certs(plant: &PlantBundle, certs: &CertificateSet, opts: &DesignOptions) -> Result<Self> {
        let eps_bar = certs.eps_bar()?;
        let lp = l_psi_inv(certs, eps_bar);
        let d_e = certs.beta1_bar.inverse(threshold_at(&TriggerRule::Static, certs, eps_bar, 0.0))?;
        Ok(DesignInputs {
            l_f: plant.l_f,
            l_k: plant.l_k,
            l_gamma3: plant.l_gamma3,
            l_sigma3: certs.sigma3.lipschitz_on(0.0, eps_bar),
            l_sigma_bar_inv: lp.l_sigma_bar_inv,
            l_sigma0: lp.l_sigma0,
            l_beta1: certs.beta1_bar.lipschitz_on(0.0, d_e.max(1e-9)),
            sigma0_eps_bar: certs.sigma0.eval(eps_bar),
            sigma_bar_eps_bar: certs.sigma_bar.eval(eps_bar),
            eps_bar,
            c: certs.c,
            l_bar: Some(l_bar_numeric(certs, eps_bar)?),
            t_bar: opts.t_bar,
            tau_star: opts.tau_star,
            f_cr: opts.f_cr,
            n: opts.n,
            zeta: opts.zeta,
            theta: opts.theta,
            delta: opts.delta,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_f", self.l_f),
            ("l_k", self.l_k),
            ("eps_bar", self.eps_bar),
            ("t_bar", self.t_bar),
            ("tau_star", self.tau_star),
            ("f_cr", self.f_cr),
            ("zeta", self.zeta),
            ("theta", self.theta),
        ] {
            if !(v > 0.0) {
                return Err(Error::Design(format!("{name} = {v} must be positive")));
            }
        }
        if self.l_gamma3 < 0.0 {
            return Err(Error::Design(format!("l_gamma3 = {} must be nonnegative", self.l_gamma3)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Design(format!("c = {} outside (0,1)", self.c)));
        }
        if !(self.tau_star > 1.0 / self.f_cr) {
            return Err(Error::Design(format!(
                "tau_star = {} must exceed 1/f_cr = {}",
                self.tau_star,
                1.0 / self.f_cr
            )));
        }
        Ok(())
    }

    pub fn big_l(&self) -> f64 {
        self.l_k + self.l_gamma3 + 1.0
    }

    pub fn l_psi_inv(&self) -> Result<f64> {
        l_psi_inv_formula(self.l_sigma_bar_inv, self.l_sigma0, self.sigma0_eps_bar, self.sigma_bar_eps_bar)
    }

    /// c^{-1} L_{psi^{-1}} L_{beta1_bar}
    pub fn l_hat(&self) -> Result<f64> {
        Ok(self.l_psi_inv()? * self.l_beta1 / self.c)
    }

    pub fn l_bar_or_hat(&self) -> Result<f64> {
        match self.l_bar {
            Some(v) => Ok(v),
            None => self.l_hat(),
        }
    }

    pub fn tau(&self) -> Result<f64> {
        Ok(tau_static(self.l_f, self.l_k, self.l_gamma3, self.l_bar_or_hat()?))
    }

    /// L* = 1 / y(tau + tau*)
    pub fn l_star(&self) -> Result<f64> {
        let t = self.tau()? + self.tau_star;
        let y = y_closed_form(t, self.l_f, self.l_k, self.big_l())?;
        if !y.is_finite() {
            return Err(Error::Design(format!(
                "tau + tau* = {t} is past the escape time {} of the comparison system; shrink tau*",
                self.escape_time()
            )));
        }
        Ok(1.0 / y)
    }

    /// Time at which y blows up; infinite when L_k = 0.
    pub fn escape_time(&self) -> f64 {
        let l = self.big_l();
        if self.l_k == 0.0 {
            return f64::INFINITY;
        }
        (l / self.l_k).ln() / (self.l_f * (l - self.l_k))
    }

    /// c eps_bar L_{psi^{-1}}^{-1} (L_hat/L* - 1)(1 + sigma0(eps_bar))
    fn amplitude(&self) -> Result<f64> {
        let l_hat = self.l_hat()?;
        let l_star = self.l_star()?;
        let ratio = l_hat / l_star;
        if !(ratio > 1.0) {
            return Err(Error::Design(format!(
                "L_hat / L* = {ratio} <= 1: requested increase is not expressible, enlarge tau_star"
            )));
        }
        Ok(self.c * self.eps_bar / self.l_psi_inv()? * (ratio - 1.0) * (1.0 + self.sigma0_eps_bar))
    }
}

/// (kappa, tau1).
pub fn design_continuous(inputs: &DesignInputs) -> Result<(f64, f64)> {
    inputs.validate()?;
    let kappa = inputs.amplitude()? * (inputs.zeta * inputs.t_bar).exp();
    let tau1 = y_hitting_time(1.0 / inputs.l_star()?, inputs.l_f, inputs.l_k, inputs.big_l());
    Ok((kappa, tau1))
}

/// (kappa_hat, tau2) for the first `n` events.
pub fn design_discrete(inputs: &DesignInputs, n: usize) -> Result<(f64, f64)> {
    inputs.validate()?;
    if n == 0 {
        return Err(Error::Design("N must be at least 1".into()));
    }
    let gap = inputs.tau()? + inputs.tau_star;
    match inputs.delta {
        Some(d) if d > gap => {}
        Some(d) => {
            return Err(Error::Design(format!(
                "Delta = {d} must exceed tau + tau* = {gap}"
            )))
        }
        None => return Err(Error::Design("Delta is required for the discrete design".into())),
    }
    let base = inputs.amplitude()?;
    let nt = n_theta(inputs.theta);
    let kappa_hat = if n <= nt {
        base / inputs.theta
    } else {
        base / theta_pow_over_fact(inputs.theta, n)
    };
    let tau2 = y_hitting_time(1.0 / inputs.l_star()?, inputs.l_f, inputs.l_k, inputs.big_l());
    Ok((kappa_hat, tau2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub l: f64,
    pub l_bar: f64,
    pub l_hat: Option<f64>,
    pub l_star: Option<f64>,
    pub l_psi_inv: Option<f64>,
    pub l_psi_inv_diagnostic: Option<String>,
    pub tau: f64,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub n_theta: usize,
    pub discrete_case: u8,
    pub errors: Vec<String>,
}

impl DesignResult {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn write_kv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        writeln!(out, "L = {}", self.l)?;
        writeln!(out, "L_bar = {}", self.l_bar)?;
        writeln!(out, "L_hat = {}", opt(self.l_hat))?;
        writeln!(out, "L_star = {}", opt(self.l_star))?;
        writeln!(out, "L_psi_inv = {}", opt(self.l_psi_inv))?;
        writeln!(out, "L_psi_inv.valid = {}", self.l_psi_inv.is_some())?;
        if let Some(d) = &self.l_psi_inv_diagnostic {
            writeln!(out, "L_psi_inv.diagnostic = {d}")?;
        }
        writeln!(out, "tau = {}", self.tau)?;
        writeln!(out, "tau1 = {}", opt(self.tau1))?;
        writeln!(out, "tau2 = {}", opt(self.tau2))?;
        writeln!(out, "kappa = {}", opt(self.kappa))?;
        writeln!(out, "kappa_hat = {}", opt(self.kappa_hat))?;
        writeln!(out, "N_theta = {}", self.n_theta)?;
        writeln!(out, "discrete.case = {}", self.discrete_case)?;
        // some printings put e^(theta^i) here; the bounds only close with theta^i
        writeln!(out, "discrete.decay_term = kappa_hat * theta^i / i!")?;
        for (j, e) in self.errors.iter().enumerate() {
            writeln!(out, "error.{j} = {e}")?;
        }
        writeln!(out, "ok = {}", self.ok())
    }
}

/// Runs every design step that the inputs allow, collecting failures instead of stopping.
pub fn design_report(inputs: &DesignInputs) -> DesignResult {
    let mut errors = Vec::new();
    if let Err(e) = inputs.validate() {
        errors.push(e.to_string());
    }
    let (l_psi_inv, diag) = match inputs.l_psi_inv() {
        Ok(v) => (Some(v), None),
        Err(e) => {
            errors.push(e.to_string());
            (None, Some(e.to_string()))
        }
    };
    let l_bar = inputs.l_bar.unwrap_or(f64::NAN);
    let tau = match inputs.l_bar {
        Some(lb) => tau_static(inputs.l_f, inputs.l_k, inputs.l_gamma3, lb),
        None => inputs.tau().unwrap_or(f64::NAN),
    };
    let l_hat = inputs.l_hat().ok();
    let l_star = inputs.l_star().ok();
    let nt = n_theta(inputs.theta);
    let mut res = DesignResult {
        l: inputs.big_l(),
        l_bar,
        l_hat,
        l_star,
        l_psi_inv,
        l_psi_inv_diagnostic: diag,
        tau,
        tau1: None,
        tau2: None,
        kappa: None,
        kappa_hat: None,
        n_theta: nt,
        discrete_case: if inputs.n <= nt { 1 } else { 2 },
        errors: Vec::new(),
    };
    if l_psi_inv.is_some() {
        match design_continuous(inputs) {
            Ok((k, t1)) => {
                res.kappa = Some(k);
                res.tau1 = Some(t1);
            }
            Err(e) => errors.push(e.to_string()),
        }
        if inputs.delta.is_some() {
            match design_discrete(inputs, inputs.n) {
                Ok((k, t2)) => {
                    res.kappa_hat = Some(k);
                    res.tau2 = Some(t2);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    errors.dedup();
    res.errors = errors;
    res
}
