//! Triggering rules and the forced re-sampling deadline.

use statrs::function::gamma::ln_gamma;

use crate::model::{CertificateSet, ThresholdForm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TriggerRule {
    Static,
    ContinuousDecay { kappa: f64, zeta: f64 },
    DiscreteDecay { kappa_hat: f64, theta: f64, delta: f64 },
    /// Compares beta1(|e|) against c * sigma_bar(|x|) with its own c.
    TabuadaBaseline { c: f64 },
}

impl TriggerRule {
    pub fn name(&self) -> &'static str {
        match self {
            TriggerRule::Static => "static",
            TriggerRule::ContinuousDecay { .. } => "continuous",
            TriggerRule::DiscreteDecay { .. } => "discrete",
            TriggerRule::TabuadaBaseline { .. } => "tabuada",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            TriggerRule::Static => Ok(()),
            TriggerRule::ContinuousDecay { kappa, zeta } => {
                if kappa > 0.0 && zeta > 0.0 && kappa.is_finite() && zeta.is_finite() {
                    Ok(())
                } else {
                    Err(format!("continuous decay needs kappa, zeta > 0 (got {kappa}, {zeta})"))
                }
            }
            TriggerRule::DiscreteDecay { kappa_hat, theta, delta } => {
                if !(kappa_hat > 0.0 && theta > 0.0) {
                    return Err(format!("discrete decay needs kappa_hat, theta > 0 (got {kappa_hat}, {theta})"));
                }
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(format!("discrete decay needs a finite delta > 0 (got {delta})"));
                }
                Ok(())
            }
            TriggerRule::TabuadaBaseline { c } => {
                if c > 0.0 && c < 1.0 {
                    Ok(())
                } else {
                    Err(format!("tabuada c = {c} outside (0,1)"))
                }
            }
        }
    }

    pub fn is_decaying(&self) -> bool {
        matches!(
            self,
            TriggerRule::ContinuousDecay { .. } | TriggerRule::DiscreteDecay { .. }
        )
    }
}

/// State seen by the trigger at a monitoring instant.
#[derive(Clone, Copy, Debug)]
pub struct TriggerContext<'a> {
    pub t: f64,
    /// Events completed so far, the one at t0 included.
    pub i: usize,
    pub t_last: f64,
    pub x: &'a [f64],
    /// x(t_last) - x(t), restricted to the sampled components.
    pub e: &'a [f64],
}

/// theta^i / i!, via log-gamma above i = 20.
pub fn theta_pow_over_fact(theta: f64, i: usize) -> f64 {
    if i <= 20 {
        let mut v = 1.0;
        for j in 1..=i {
            v *= theta / j as f64;
        }
        v
    } else {
        (i as f64 * theta.ln() - ln_gamma(i as f64 + 1.0)).exp()
    }
}

/// Additive decay amount d: kappa e^{-zeta t} or kappa_hat theta^i / i!.
pub fn decay_term(rule: &TriggerRule, t: f64, i: usize) -> f64 {
    match *rule {
        TriggerRule::ContinuousDecay { kappa, zeta } => kappa * (-zeta * t).exp(),
        TriggerRule::DiscreteDecay { kappa_hat, theta, .. } => kappa_hat * theta_pow_over_fact(theta, i),
        _ => 0.0,
    }
}

/// Threshold at state norm r with decay amount d.
pub fn threshold_at(rule: &TriggerRule, certs: &CertificateSet, r: f64, d: f64) -> f64 {
    if let TriggerRule::TabuadaBaseline { c } = *rule {
        return c * certs.sigma_bar.eval(r);
    }
    let c = certs.c;
    match certs.form {
        ThresholdForm::Quotient => (c * certs.sigma_bar.eval(r) + d) / (1.0 + certs.sigma0.eval(r)),
        ThresholdForm::CompletedSquare { a, l } => {
            let s3 = certs.sigma3.eval(r);
            let inner = c * certs.sigma_bar.eval(r) + d + l * l * s3 * s3 / (4.0 * a);
            inner.sqrt() - l * s3 / (2.0 * a.sqrt())
        }
    }
}

/// Left-hand side of the firing comparison.
pub fn lhs_at(rule: &TriggerRule, certs: &CertificateSet, e_norm: f64) -> f64 {
    match rule {
        TriggerRule::TabuadaBaseline { .. } => certs.beta1.eval(e_norm),
        _ => certs.beta1_bar.eval(e_norm),
    }
}

pub fn norms(certs: &CertificateSet, ctx: &TriggerContext) -> (f64, f64) {
    let r = certs.state_norm.of(ctx.x);
    let e = crate::model::euclid(ctx.e);
    (r, e)
}

pub fn threshold(rule: &TriggerRule, certs: &CertificateSet, ctx: &TriggerContext) -> f64 {
    let r = certs.state_norm.of(ctx.x);
    threshold_at(rule, certs, r, decay_term(rule, ctx.t, ctx.i))
}

/// lhs - threshold; negative infinity while e = 0 so the sampling instant itself never fires.
pub fn margin(rule: &TriggerRule, certs: &CertificateSet, ctx: &TriggerContext) -> f64 {
    let (r, e) = norms(certs, ctx);
    if e == 0.0 {
        return f64::NEG_INFINITY;
    }
    lhs_at(rule, certs, e) - threshold_at(rule, certs, r, decay_term(rule, ctx.t, ctx.i))
}

pub fn should_fire(rule: &TriggerRule, certs: &CertificateSet, ctx: &TriggerContext) -> bool {
    margin(rule, certs, ctx) >= 0.0
}

pub fn next_forced_deadline(rule: &TriggerRule, ctx: &TriggerContext) -> Option<f64> {
    match *rule {
        TriggerRule::DiscreteDecay { delta, .. } => Some(ctx.t_last + delta),
        _ => None,
    }
}
