//! Checks of gain, dissipation, invariance and convergence on logged runs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{CertificateSet, PlantBundle};
use crate::sim::RunRecord;
use crate::trigger::{decay_term, TriggerRule};

#[derive(Clone, Debug, PartialEq)]
pub struct GainReport {
    pub gamma: f64,
    pub eta: f64,
    pub mu0: f64,
    pub ratio_curve: Vec<(f64, f64)>,
    pub bound_curve: Vec<(f64, f64)>,
    /// Largest ratio - bound over the curve (negative when the inequality holds with room).
    pub max_excess: f64,
    /// No disturbance energy: only int |z|^2 <= mu0 + eta was checked.
    pub degenerate: bool,
    pub pass: bool,
}

impl GainReport {
    pub fn write_kv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "gamma = {}", self.gamma)?;
        writeln!(out, "eta = {}", self.eta)?;
        writeln!(out, "mu0 = {}", self.mu0)?;
        writeln!(out, "points = {}", self.ratio_curve.len())?;
        writeln!(out, "max_excess = {}", self.max_excess)?;
        writeln!(out, "degenerate = {}", self.degenerate)?;
        writeln!(out, "pass = {}", self.pass)
    }

    pub fn write_curves_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,ratio,bound")?;
        for ((t, r), (_, b)) in self.ratio_curve.iter().zip(&self.bound_curve) {
            writeln!(out, "{t},{r},{b}")?;
        }
        Ok(())
    }
}

/// Bias of the gain inequality for a rule: 0, kappa/zeta or kappa_hat Delta e^theta,
/// scaled into the storage normalization (and by eps_bar for factored certificates).
pub fn bias(certs: &CertificateSet, rule: &TriggerRule) -> Result<f64> {
    let base = match *rule {
        TriggerRule::ContinuousDecay { kappa, zeta } => kappa / zeta,
        TriggerRule::DiscreteDecay { kappa_hat, theta, delta } => kappa_hat * delta * theta.exp(),
        _ => 0.0,
    };
    if base == 0.0 {
        return Ok(0.0);
    }
    let r = if certs.factored { certs.eps_bar()? } else { 0.0 };
    Ok(base * certs.decay_weight(r))
}

pub fn l2_report(record: &RunRecord, certs: &CertificateSet, rule: &TriggerRule) -> Result<GainReport> {
    let eta = bias(certs, rule)?;
    let mu0 = certs.mu(&record.x0);
    let g2 = certs.gamma * certs.gamma;
    let mut ratio_curve = Vec::new();
    let mut bound_curve = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for s in &record.samples {
        if s.int_w2 > 0.0 {
            let ratio = s.int_z2 / s.int_w2;
            let bound = g2 + (mu0 + eta) / s.int_w2;
            ratio_curve.push((s.t, ratio));
            bound_curve.push((s.t, bound));
            max_excess = max_excess.max(ratio - bound);
        }
    }
    let degenerate = ratio_curve.is_empty();
    let pass = if degenerate {
        let worst = record
            .samples
            .iter()
            .map(|s| s.int_z2)
            .fold(record.int_z2, f64::max);
        max_excess = worst - (mu0 + eta);
        worst <= mu0 + eta
    } else {
        max_excess <= 0.0
    };
    Ok(GainReport {
        gamma: certs.gamma,
        eta,
        mu0,
        ratio_curve,
        bound_curve,
        max_excess,
        degenerate,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationReport {
    /// max of mu_scale grad U . f - Gamma^2 |w|^2 + |z|^2
    pub max_residual: f64,
    /// max of residual minus the decay allowance at the same sample
    pub max_excess: f64,
    pub t_at_max_excess: f64,
}

pub fn dissipation_residual(
    record: &RunRecord,
    plant: &PlantBundle,
    certs: &CertificateSet,
    rule: &TriggerRule,
) -> DissipationReport {
    let g2 = certs.gamma * certs.gamma;
    let mut grad = vec![0.0; plant.n];
    let mut dx = vec![0.0; plant.n];
    let mut max_residual = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    let mut t_at = 0.0;
    for s in &record.samples {
        certs.u_grad(&s.x, &mut grad);
        (plant.f)(&s.x, &s.u, &s.w, &mut dx);
        let du: f64 = grad.iter().zip(&dx).map(|(a, b)| a * b).sum();
        let w2: f64 = s.w.iter().map(|a| a * a).sum();
        let z2: f64 = s.z.iter().map(|a| a * a).sum();
        let res = certs.mu_scale * du - g2 * w2 + z2;
        let allow = certs.decay_weight(certs.state_norm.of(&s.x)) * decay_term(rule, s.t, s.i.max(1));
        max_residual = max_residual.max(res);
        if res - allow > max_excess {
            max_excess = res - allow;
            t_at = s.t;
        }
    }
    DissipationReport {
        max_residual,
        max_excess,
        t_at_max_excess: t_at,
    }
}

/// (eps_bar, Q) = (sigma1^{-1}(sigma2(eps)), L_gamma3 eps_bar).
pub fn invariant_set_radius(certs: &CertificateSet, plant: &PlantBundle, eps: f64) -> Result<(f64, f64)> {
    let s2 = certs.sigma2.eval(eps);
    let eb = certs
        .sigma1
        .inverse(s2)
        .map_err(|e| Error::Invalid(format!("sigma2(eps) outside sigma1 range: {e}")))?;
    Ok((eb, plant.l_gamma3 * eb))
}

/// sigma_bar^{-1}(kappa/(1-c)) or sigma_bar^{-1}(kappa_theta/(1-c)); zero for non-decaying rules.
/// Infinite when the level lies above the range of sigma_bar on its domain: no confinement is certified.
pub fn practical_stability_radius(rule: &TriggerRule, certs: &CertificateSet) -> Result<f64> {
    let c = certs.c;
    let level = match *rule {
        TriggerRule::ContinuousDecay { kappa, .. } => kappa / (1.0 - c),
        TriggerRule::DiscreteDecay { kappa_hat, theta, .. } => {
            let fl = theta.floor() as usize;
            kappa_hat * crate::trigger::theta_pow_over_fact(theta, fl) / (1.0 - c)
        }
        _ => return Ok(0.0),
    };
    if let Some(d) = certs.sigma_bar.domain_hint() {
        if level > certs.sigma_bar.eval(d) * (1.0 + 1e-12) {
            return Ok(f64::INFINITY);
        }
    }
    certs.sigma_bar.inverse(level)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub pass: bool,
    /// First logged time after which |x| stays within the ball.
    pub entry_time: Option<f64>,
    pub final_norm: f64,
}

/// |x(t_end)| <= max(rho, floor) and the trajectory enters and stays in that ball.
pub fn convergence_check(record: &RunRecord, certs: &CertificateSet, rho: f64, floor: f64) -> ConvergenceReport {
    let ball = rho.max(floor);
    let final_norm = certs.state_norm.of(&record.x_final);
    let mut entry = None;
    for s in &record.samples {
        let r = certs.state_norm.of(&s.x);
        if r > ball {
            entry = None;
        } else if entry.is_none() {
            entry = Some(s.t);
        }
    }
    if final_norm > ball {
        entry = None;
    }
    ConvergenceReport {
        pass: entry.is_some(),
        entry_time: entry,
        final_norm,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowStats {
    pub horizon: f64,
    pub count: usize,
    pub min_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventStats {
    pub count: usize,
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
    pub windows: Vec<WindowStats>,
}

fn gaps_before(events: &[f64], horizon: f64) -> (usize, Option<f64>, Option<f64>) {
    let inside: Vec<f64> = events.iter().copied().filter(|t| *t < horizon).collect();
    let gaps: Vec<f64> = inside.windows(2).map(|w| w[1] - w[0]).collect();
    let min = gaps.iter().copied().fold(None, |m: Option<f64>, g| Some(m.map_or(g, |v| v.min(g))));
    let mean = if gaps.is_empty() {
        None
    } else {
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    };
    (inside.len(), min, mean)
}

/// Counts include the event at t0; a window of horizon H counts events with t < H.
pub fn inter_event_stats(events: &[f64], horizons: &[f64]) -> EventStats {
    let (count, min_gap, mean_gap) = gaps_before(events, f64::INFINITY);
    let windows = horizons
        .iter()
        .map(|&h| {
            let (c, m, _) = gaps_before(events, h);
            WindowStats { horizon: h, count: c, min_gap: m }
        })
        .collect();
    EventStats { count, min_gap, mean_gap, windows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_arithmetic() {
        let s = inter_event_stats(&[0.0, 0.3, 0.9], &[0.5, 10.0]);
        assert_eq!(s.count, 3);
        assert!((s.min_gap.unwrap() - 0.3).abs() < 1e-15);
        assert!((s.mean_gap.unwrap() - 0.45).abs() < 1e-15);
        assert_eq!(s.windows[0].count, 2);
        assert_eq!(s.windows[1].count, 3);
        let single = inter_event_stats(&[0.0], &[1.0]);
        assert_eq!(single.min_gap, None);
    }
}
