//! Fixed-step closed-loop integration with zero-order hold and bisection event localization.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{euclid, CertificateSet, ClassKFn, Norm, PlantBundle};
use crate::trigger::{self, TriggerContext, TriggerRule};

#[derive(Clone, Debug, PartialEq)]
pub enum CustomSignal {
    /// w(t) = ((t - 1) A + (t_i - 1) BK) x0 - x0 on [0, 1], zero afterwards.
    /// Deliberately ignores the state envelope.
    ZenoAdversary { a: Vec<f64>, bk: Vec<f64>, x0: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisturbanceMode {
    Zero,
    EnvelopeConstant,
    /// hold_dt = None means "use the integration step".
    EnvelopeRandomHold { hold_dt: Option<f64> },
    Sinusoid { freq: f64 },
    Custom(CustomSignal),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceSpec {
    pub mode: DisturbanceMode,
    pub scale: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec {
            mode: DisturbanceMode::EnvelopeRandomHold { hold_dt: None },
            scale: 1.0,
        }
    }
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        DisturbanceSpec { mode: DisturbanceMode::Zero, scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub event_tol: f64,
    pub x0: Vec<f64>,
    pub disturbance: DisturbanceSpec,
    pub seed: u64,
    pub max_events_per_unit_time: f64,
    /// Log every k-th grid point; 0 keeps only event rows.
    pub log_stride: usize,
}

impl SimConfig {
    pub fn new(x0: Vec<f64>, t_end: f64) -> Self {
        SimConfig {
            t_end,
            dt: 1e-3,
            event_tol: 1e-6,
            x0,
            disturbance: DisturbanceSpec::default(),
            seed: 0,
            max_events_per_unit_time: 1e4,
            log_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Invalid(format!("t_end = {}", self.t_end)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Invalid(format!("dt = {}", self.dt)));
        }
        if !(self.event_tol > 0.0 && self.event_tol <= self.dt) {
            return Err(Error::Invalid(format!(
                "event_tol = {} must lie in (0, dt]",
                self.event_tol
            )));
        }
        if !(self.disturbance.scale >= 0.0 && self.disturbance.scale <= 1.0) {
            return Err(Error::Invalid(format!(
                "disturbance scale {} outside [0,1]",
                self.disturbance.scale
            )));
        }
        if !(self.max_events_per_unit_time > 0.0) {
            return Err(Error::Invalid("max_events_per_unit_time must be positive".into()));
        }
        Ok(())
    }
}

/// Seeded disturbance source. Random-hold draws are tied to hold-segment indices,
/// so the realization does not depend on where events happen to fall.
pub struct DisturbanceGen {
    spec: DisturbanceSpec,
    gamma3: ClassKFn,
    cap: Option<f64>,
    norm: Norm,
    q: usize,
    dt: f64,
    rng: ChaCha8Rng,
    seg: Option<u64>,
    dir: Vec<f64>,
    mag: f64,
}

impl DisturbanceGen {
    pub fn new(spec: &DisturbanceSpec, plant: &PlantBundle, norm: Norm, dt: f64, seed: u64) -> Self {
        let q = plant.q;
        let mut dir = vec![0.0; q];
        if q > 0 {
            dir[0] = 1.0;
        }
        DisturbanceGen {
            spec: spec.clone(),
            gamma3: plant.gamma3.clone(),
            cap: plant.w_cap,
            norm,
            q,
            dt,
            // separate stream from the initial-condition draws that share the seed
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B),
            seg: None,
            dir,
            mag: 1.0,
        }
    }

    fn envelope(&self, x: &[f64]) -> f64 {
        let g = self.gamma3.eval(self.norm.of(x));
        let g = match self.cap {
            Some(c) => g.min(c),
            None => g,
        };
        g * self.spec.scale
    }

    fn draw(&mut self) {
        self.mag = self.rng.gen::<f64>();
        if self.q == 1 {
            self.dir[0] = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
            return;
        }
        loop {
            for d in self.dir.iter_mut() {
                *d = self.rng.gen_range(-1.0..1.0);
            }
            let n = euclid(&self.dir);
            if n > 1e-3 && n <= 1.0 {
                for d in self.dir.iter_mut() {
                    *d /= n;
                }
                return;
            }
        }
    }

    fn advance_to(&mut self, seg: u64) {
        match self.seg {
            Some(s) if s >= seg => {}
            Some(s) => {
                for _ in s..seg {
                    self.draw();
                }
                self.seg = Some(seg);
            }
            None => {
                for _ in 0..=seg {
                    self.draw();
                }
                self.seg = Some(seg);
            }
        }
    }

    /// w at time t (stage time) for a step that started at seg_t, state x, last event t_last.
    pub fn eval(&mut self, t: f64, seg_t: f64, x: &[f64], t_last: f64, out: &mut [f64]) {
        match &self.spec.mode {
            DisturbanceMode::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            DisturbanceMode::EnvelopeConstant => {
                let g = self.envelope(x);
                for (o, d) in out.iter_mut().zip(&self.dir) {
                    *o = g * d;
                }
            }
            DisturbanceMode::EnvelopeRandomHold { hold_dt } => {
                let h = hold_dt.unwrap_or(self.dt);
                let seg = (seg_t / h + 1e-9).floor().max(0.0) as u64;
                self.advance_to(seg);
                let g = self.envelope(x) * self.mag;
                for (o, d) in out.iter_mut().zip(&self.dir) {
                    *o = g * d;
                }
            }
            DisturbanceMode::Sinusoid { freq } => {
                let g = self.envelope(x) * (2.0 * std::f64::consts::PI * freq * t).sin();
                for (o, d) in out.iter_mut().zip(&self.dir) {
                    *o = g * d;
                }
            }
            DisturbanceMode::Custom(CustomSignal::ZenoAdversary { a, bk, x0 }) => {
                let n = x0.len();
                if !(0.0..=1.0).contains(&t) {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                for r in 0..n {
                    let mut acc = -x0[r];
                    for c in 0..n {
                        acc += ((t - 1.0) * a[r * n + c] + (t_last - 1.0) * bk[r * n + c]) * x0[c];
                    }
                    out[r] = acc;
                }
            }
        }
    }
}

/// One-shot disturbance evaluation at time t with the last event at t_last.
pub fn gen_disturbance(gen: &mut DisturbanceGen, t: f64, x: &[f64], t_last: f64) -> Vec<f64> {
    let mut w = vec![0.0; gen.q];
    gen.eval(t, t, x, t_last, &mut w);
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub e_norm: f64,
    pub threshold: f64,
    pub fired: bool,
    /// Events completed when this row was taken.
    pub i: usize,
    pub int_z2: f64,
    pub int_w2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub x0: Vec<f64>,
    pub samples: Vec<Sample>,
    pub events: Vec<f64>,
    pub forced_events: usize,
    pub int_z2: f64,
    pub int_w2: f64,
    pub trigger_checks: u64,
    /// Max Euclidean |x| over every integration node.
    pub max_x: f64,
    pub max_w: f64,
    pub t_final: f64,
    pub x_final: Vec<f64>,
}

impl RunRecord {
    fn new(x0: &[f64]) -> Self {
        RunRecord {
            x0: x0.to_vec(),
            samples: Vec::new(),
            events: Vec::new(),
            forced_events: 0,
            int_z2: 0.0,
            int_w2: 0.0,
            trigger_checks: 0,
            max_x: euclid(x0),
            max_w: 0.0,
            t_final: 0.0,
            x_final: x0.to_vec(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(first) = self.samples.first() else {
            return writeln!(out, "t,e_norm,threshold,fired");
        };
        let mut head = vec!["t".to_string()];
        for (p, len) in [("x", first.x.len()), ("u", first.u.len()), ("w", first.w.len()), ("z", first.z.len())] {
            for j in 1..=len {
                head.push(format!("{p}_{j}"));
            }
        }
        head.extend(["e_norm", "threshold", "fired"].map(String::from));
        writeln!(out, "{}", head.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            for v in s.x.iter().chain(&s.u).chain(&s.w).chain(&s.z) {
                row.push(v.to_string());
            }
            row.push(s.e_norm.to_string());
            row.push(s.threshold.to_string());
            row.push(if s.fired { "1" } else { "0" }.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t")?;
        for t in &self.events {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

struct Stepper<'a> {
    plant: &'a PlantBundle,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(plant: &'a PlantBundle) -> Self {
        let n = plant.n;
        Stepper {
            plant,
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
            w: vec![0.0; plant.q],
        }
    }

    fn step<W>(&mut self, x: &[f64], u: &[f64], wf: &mut W, t: f64, h: f64, out: &mut [f64])
    where
        W: FnMut(f64, &[f64], &mut [f64]),
    {
        let f = &self.plant.f;
        let n = x.len();
        wf(t, x, &mut self.w);
        f(x, u, &self.w, &mut self.k1);
        for j in 0..n {
            self.tmp[j] = x[j] + 0.5 * h * self.k1[j];
        }
        wf(t + 0.5 * h, &self.tmp, &mut self.w);
        f(&self.tmp, u, &self.w, &mut self.k2);
        for j in 0..n {
            self.tmp[j] = x[j] + 0.5 * h * self.k2[j];
        }
        wf(t + 0.5 * h, &self.tmp, &mut self.w);
        f(&self.tmp, u, &self.w, &mut self.k3);
        for j in 0..n {
            self.tmp[j] = x[j] + h * self.k3[j];
        }
        wf(t + h, &self.tmp, &mut self.w);
        f(&self.tmp, u, &self.w, &mut self.k4);
        for j in 0..n {
            out[j] = x[j] + h / 6.0 * (self.k1[j] + 2.0 * self.k2[j] + 2.0 * self.k3[j] + self.k4[j]);
        }
    }
}

/// Classical RK4 step with u frozen and w sampled at the stage times.
pub fn rk4_step<W>(plant: &PlantBundle, x: &[f64], u_held: &[f64], mut w_fn: W, t: f64, dt: f64) -> Result<Vec<f64>>
where
    W: FnMut(f64, &[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt = {dt}")));
    }
    let mut st = Stepper::new(plant);
    let mut out = vec![0.0; x.len()];
    let mut wf = |s: f64, xs: &[f64], o: &mut [f64]| o.copy_from_slice(&w_fn(s, xs));
    st.step(x, u_held, &mut wf, t, dt, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: t + dt, record: Box::new(RunRecord::new(x)) });
    }
    Ok(out)
}

/// Bisection on a margin with margin(t_lo) < 0 <= margin(t_hi); returns the right endpoint.
pub fn locate_crossing<M>(mut margin: M, t_lo: f64, t_hi: f64, event_tol: f64) -> Result<f64>
where
    M: FnMut(f64) -> f64,
{
    let m_lo = margin(t_lo);
    let m_hi = margin(t_hi);
    if !(m_lo < 0.0 && m_hi >= 0.0) || !(t_hi >= t_lo) {
        return Err(Error::Bracket { t_lo, t_hi, m_lo, m_hi });
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    for _ in 0..200 {
        if hi - lo <= event_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if margin(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

const ZENO_WINDOW: usize = 10;
const DIVERGENCE_NORM: f64 = 1e12;

/// Full closed-loop run. Event rows log the pre-reset error and the held input.
pub fn simulate(plant: &PlantBundle, certs: &CertificateSet, rule: &TriggerRule, cfg: &SimConfig) -> Result<RunRecord> {
    cfg.validate()?;
    rule.validate().map_err(Error::Invalid)?;
    if cfg.x0.len() != plant.n {
        return Err(Error::Invalid(format!("x0 has {} entries, plant has n = {}", cfg.x0.len(), plant.n)));
    }
    let (n, q, p) = (plant.n, plant.q, plant.p);
    let mut gen = DisturbanceGen::new(&cfg.disturbance, plant, certs.state_norm, cfg.dt, cfg.seed);
    let mut rec = RunRecord::new(&cfg.x0);
    let mut st = Stepper::new(plant);

    let mut x = cfg.x0.clone();
    let mut xs = x.clone();
    let mut u = plant.eval_k(&xs);
    let mut t = 0.0;
    let mut t_last = 0.0;
    rec.events.push(0.0);

    let mut mask = vec![false; n];
    for &j in &plant.measured {
        mask[j] = true;
    }
    let err = |xs: &[f64], x: &[f64], e: &mut [f64]| {
        for j in 0..n {
            e[j] = if mask[j] { xs[j] - x[j] } else { 0.0 };
        }
    };

    let mut w = vec![0.0; q];
    let mut z = vec![0.0; p];
    let mut e = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut x_try = vec![0.0; n];

    gen.eval(0.0, 0.0, &x, t_last, &mut w);
    (plant.h)(&x, &w, &mut z);
    rec.max_w = euclid(&w);
    {
        let ctx = TriggerContext { t: 0.0, i: 1, t_last, x: &x, e: &e };
        let thr = trigger::threshold(rule, certs, &ctx);
        rec.samples.push(Sample {
            t: 0.0,
            x: x.clone(),
            u: u.clone(),
            w: w.clone(),
            z: z.clone(),
            e_norm: 0.0,
            threshold: thr,
            fired: true,
            i: 0,
            int_z2: 0.0,
            int_w2: 0.0,
        });
    }

    let t_end = cfg.t_end;
    let eps_t = 1e-12 * t_end.max(1.0);
    let mut k_grid: u64 = 0;

    macro_rules! log_row {
        ($fired:expr, $e_norm:expr, $thr:expr) => {{
            gen.eval(t, t, &x, t_last, &mut w);
            (plant.h)(&x, &w, &mut z);
            rec.max_w = rec.max_w.max(euclid(&w));
            rec.samples.push(Sample {
                t,
                x: x.clone(),
                u: u.clone(),
                w: w.clone(),
                z: z.clone(),
                e_norm: $e_norm,
                threshold: $thr,
                fired: $fired,
                i: rec.events.len(),
                int_z2: rec.int_z2,
                int_w2: rec.int_w2,
            });
        }};
    }

    while t < t_end - eps_t {
        let next_grid = (((k_grid + 1) as f64) * cfg.dt).min(t_end);
        let mut target = next_grid;
        let mut forced = false;
        let ctx_now = TriggerContext { t, i: rec.events.len(), t_last, x: &x, e: &e };
        if let Some(dl) = trigger::next_forced_deadline(rule, &ctx_now) {
            if dl < target - eps_t {
                target = dl;
                forced = true;
            } else if (dl - target).abs() <= eps_t {
                forced = true;
            }
        }
        let seg = t;
        let t0 = t;
        let i_now = rec.events.len();
        {
            let mut wf = |s: f64, xx: &[f64], o: &mut [f64]| gen.eval(s, seg, xx, t_last, o);
            st.step(&x, &u, &mut wf, t0, target - t0, &mut x_new);
        }
        if x_new.iter().any(|v| !v.is_finite()) || euclid(&x_new) > DIVERGENCE_NORM {
            rec.t_final = t;
            rec.x_final = x.clone();
            return Err(Error::Divergence { t: target, record: Box::new(rec) });
        }
        err(&xs, &x_new, &mut e);
        rec.trigger_checks += 1;
        let m_end = {
            let ctx = TriggerContext { t: target, i: i_now, t_last, x: &x_new, e: &e };
            trigger::margin(rule, certs, &ctx)
        };

        let (t_to, fired_here) = if m_end >= 0.0 {
            let x_start = x.clone();
            let tc = {
                let st_ref = &mut st;
                let gen_ref = &mut gen;
                let u_ref = &u;
                let xs_ref = &xs;
                let x_try_ref = &mut x_try;
                let mut e_try = vec![0.0; n];
                let margin_at = |s: f64| -> f64 {
                    if s <= t0 {
                        err(xs_ref, &x_start, &mut e_try);
                    } else {
                        let mut wf = |ss: f64, xx: &[f64], o: &mut [f64]| gen_ref.eval(ss, seg, xx, t_last, o);
                        st_ref.step(&x_start, u_ref, &mut wf, t0, s - t0, x_try_ref);
                        err(xs_ref, x_try_ref, &mut e_try);
                    }
                    let xx: &[f64] = if s <= t0 { &x_start } else { x_try_ref };
                    let ctx = TriggerContext { t: s, i: i_now, t_last, x: xx, e: &e_try };
                    trigger::margin(rule, certs, &ctx)
                };
                locate_crossing(margin_at, t0, target, cfg.event_tol)?
            };
            if tc < target {
                let mut wf = |s: f64, xx: &[f64], o: &mut [f64]| gen.eval(s, seg, xx, t_last, o);
                st.step(&x, &u, &mut wf, t0, tc - t0, &mut x_new);
            }
            (tc, true)
        } else {
            (target, false)
        };

        // trapezoid over [t0, t_to] with left-limit disturbance values
        {
            let mut wa = vec![0.0; q];
            let mut wb = vec![0.0; q];
            let mut za = vec![0.0; p];
            let mut zb = vec![0.0; p];
            gen.eval(t0, seg, &x, t_last, &mut wa);
            gen.eval(t_to, seg, &x_new, t_last, &mut wb);
            (plant.h)(&x, &wa, &mut za);
            (plant.h)(&x_new, &wb, &mut zb);
            let hstep = t_to - t0;
            let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
            rec.int_z2 += 0.5 * hstep * (sq(&za) + sq(&zb));
            rec.int_w2 += 0.5 * hstep * (sq(&wa) + sq(&wb));
            rec.max_w = rec.max_w.max(euclid(&wa)).max(euclid(&wb));
        }

        x.copy_from_slice(&x_new);
        t = t_to;
        rec.max_x = rec.max_x.max(euclid(&x));
        let on_grid = (t - next_grid).abs() <= eps_t;
        if on_grid {
            t = next_grid;
            k_grid += 1;
        }

        let fire = fired_here || (forced && (t - target).abs() <= eps_t);
        if fire {
            err(&xs, &x, &mut e);
            let ctx = TriggerContext { t, i: rec.events.len(), t_last, x: &x, e: &e };
            let thr = trigger::threshold(rule, certs, &ctx);
            let en = euclid(&e);
            log_row!(true, en, thr);
            if !fired_here {
                rec.forced_events += 1;
            }
            rec.events.push(t);
            t_last = t;
            xs.copy_from_slice(&x);
            (plant.k)(&xs, &mut u);
            e.iter_mut().for_each(|v| *v = 0.0);

            let ne = rec.events.len();
            if ne > ZENO_WINDOW {
                let span = t - rec.events[ne - 1 - ZENO_WINDOW];
                let rate = ZENO_WINDOW as f64 / span.max(f64::MIN_POSITIVE);
                if rate > cfg.max_events_per_unit_time {
                    rec.t_final = t;
                    rec.x_final = x.clone();
                    return Err(Error::Zeno { t, events: ne, rate, record: Box::new(rec) });
                }
            }
        } else if on_grid && cfg.log_stride > 0 && k_grid % cfg.log_stride as u64 == 0 {
            let ctx = TriggerContext { t, i: rec.events.len(), t_last, x: &x, e: &e };
            let thr = trigger::threshold(rule, certs, &ctx);
            let en = euclid(&e);
            log_row!(false, en, thr);
        }
    }
    rec.t_final = t;
    rec.x_final = x;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_linear_root() {
        let t = locate_crossing(|s| s - 0.5, 0.0, 1.0, 1e-6).unwrap();
        assert!((t - 0.5).abs() <= 1e-6);
        assert!(t >= 0.5);
        let t = locate_crossing(|s| s - 1.0, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(t, 1.0);
        assert!(locate_crossing(|s| s + 1.0, 0.0, 1.0, 1e-6).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(vec![1.0], 1.0);
        assert!(c.validate().is_ok());
        c.event_tol = 2.0 * c.dt;
        assert!(c.validate().is_err());
        c.event_tol = 1e-6;
        c.disturbance.scale = 1.5;
        assert!(c.validate().is_err());
    }
}
