//! Monte Carlo event statistics over seeded initial conditions.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::inter_event_stats;
use crate::corpus::{self, Scenario, TableRef};
use crate::error::{Error, Result};
use crate::sim::{simulate, DisturbanceSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct TableConfig {
    pub n_ic: usize,
    pub seed: u64,
    pub horizons: Vec<f64>,
    pub dt: Option<f64>,
    pub disturbance: Option<DisturbanceSpec>,
    pub rel_tol: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { n_ic: 100, seed: 0, horizons: vec![10.0, 30.0, 100.0], dt: None, disturbance: None, rel_tol: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub horizon: f64,
    pub mean_count: f64,
    /// Averaged over the runs that had at least two events in the window.
    pub mean_min_gap: Option<f64>,
    pub runs_with_gap: usize,
    pub ref_count: Option<f64>,
    pub ref_min_gap: Option<f64>,
}

fn within(v: f64, r: f64, rel: f64) -> bool {
    (v - r).abs() <= rel * r.abs()
}

impl Cell {
    pub fn count_ok(&self, rel: f64) -> Option<bool> {
        self.ref_count.map(|r| within(self.mean_count, r, rel))
    }

    pub fn gap_ok(&self, rel: f64) -> Option<bool> {
        match (self.mean_min_gap, self.ref_min_gap) {
            (Some(v), Some(r)) => Some(within(v, r, rel)),
            (None, Some(_)) => Some(false),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub rule: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub scenario: String,
    pub n_ic: usize,
    pub rel_tol: f64,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn row(&self, rule: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.rule == rule)
    }

    pub fn cell(&self, rule: &str, horizon: f64) -> Option<&Cell> {
        self.row(rule)?.cells.iter().find(|c| c.horizon == horizon)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "scenario,rule,horizon,mean_count,ref_count,count_ok,mean_min_gap,ref_min_gap,gap_ok,runs_with_gap")?;
        let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let b = |v: Option<bool>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            for c in &r.cells {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    self.scenario,
                    r.rule,
                    c.horizon,
                    c.mean_count,
                    o(c.ref_count),
                    b(c.count_ok(self.rel_tol)),
                    o(c.mean_min_gap),
                    o(c.ref_min_gap),
                    b(c.gap_ok(self.rel_tol)),
                    c.runs_with_gap
                )?;
            }
        }
        Ok(())
    }
}

fn lookup(table: &Option<TableRef>, rule: &str, h: f64) -> (Option<f64>, Option<f64>) {
    let Some(t) = table else { return (None, None) };
    let Some(ri) = t.rules.iter().position(|r| r == rule) else { return (None, None) };
    let Some(hi) = t.horizons.iter().position(|x| *x == h) else { return (None, None) };
    (Some(t.counts[ri][hi]), Some(t.min_gaps[ri][hi]))
}

/// Initial conditions for run `index`: its own stream seeded with seed ^ index.
pub fn initial_condition(scen: &Scenario, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    scen.ic.sample(&mut rng, scen.plant.n)
}

/// Event times of one run over the longest horizon.
fn one_run(scen: &Scenario, rule_name: &str, cfg: &TableConfig, index: usize) -> Result<Vec<f64>> {
    let rule = scen
        .rule(rule_name)
        .ok_or_else(|| Error::Invalid(format!("scenario {} has no rule '{rule_name}'", scen.name)))?;
    let t_end = cfg.horizons.iter().copied().fold(0.0, f64::max);
    let mut sim = scen.sim_defaults.clone();
    sim.x0 = initial_condition(scen, cfg.seed, index);
    sim.t_end = t_end;
    sim.seed = cfg.seed ^ index as u64;
    sim.log_stride = 0;
    if let Some(dt) = cfg.dt {
        sim.dt = dt;
        sim.event_tol = sim.event_tol.min(dt);
    }
    if let Some(d) = &cfg.disturbance {
        sim.disturbance = d.clone();
    }
    Ok(simulate(&scen.plant, &scen.certs, &rule, &sim)?.events)
}

pub fn run_table(scen: &Scenario, rules: &[String], cfg: &TableConfig) -> Result<Table> {
    if cfg.n_ic == 0 || cfg.horizons.is_empty() {
        return Err(Error::Invalid("need n_ic >= 1 and at least one horizon".into()));
    }
    let mut rows = Vec::new();
    for rule in rules {
        // indexed collect keeps run order regardless of scheduling
        let runs: Vec<Vec<f64>> = (0..cfg.n_ic)
            .into_par_iter()
            .map(|i| one_run(scen, rule, cfg, i))
            .collect::<Result<_>>()?;
        let cells = cfg
            .horizons
            .iter()
            .map(|&h| {
                let mut count = 0usize;
                let mut gap_sum = 0.0;
                let mut with_gap = 0usize;
                for ev in &runs {
                    let w = &inter_event_stats(ev, &[h]).windows[0];
                    count += w.count;
                    if let Some(g) = w.min_gap {
                        gap_sum += g;
                        with_gap += 1;
                    }
                }
                let (ref_count, ref_min_gap) = lookup(&scen.table, rule, h);
                Cell {
                    horizon: h,
                    mean_count: count as f64 / runs.len() as f64,
                    mean_min_gap: (with_gap > 0).then(|| gap_sum / with_gap as f64),
                    runs_with_gap: with_gap,
                    ref_count,
                    ref_min_gap,
                }
            })
            .collect();
        rows.push(Row { rule: rule.clone(), cells });
    }
    Ok(Table { scenario: scen.name.clone(), n_ic: cfg.n_ic, rel_tol: cfg.rel_tol, rows })
}

pub fn reproduce_table(name: &str, cfg: &TableConfig) -> Result<Table> {
    let scen = corpus::by_name(name, &[])?;
    let rules: Vec<String> = scen.rules.iter().map(|(n, _)| n.clone()).collect();
    run_table(&scen, &rules, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub table: Table,
}

/// One table per parameter value; the scenario is rebuilt with `param = value` on top of `base`.
pub fn sweep(
    name: &str,
    base: &[(String, Vec<f64>)],
    param: &str,
    values: &[f64],
    rules: &[String],
    cfg: &TableConfig,
) -> Result<Vec<SweepPoint>> {
    let lam4 = name == "example3" && param == "lambda";
    let (ref_lams, ref_table) = corpus::table_iv();
    values
        .iter()
        .map(|&v| {
            let mut ov = base.to_vec();
            ov.retain(|(k, _)| k != param);
            ov.push((param.to_string(), vec![v]));
            let mut scen = corpus::by_name(name, &ov)?;
            scen.table = None;
            let mut table = run_table(&scen, rules, cfg)?;
            if lam4 {
                if let Some(j) = ref_lams.iter().position(|l| (l - v).abs() <= 1e-12 * l) {
                    for row in &mut table.rows {
                        if let Some(ri) = ref_table.rules.iter().position(|r| *r == row.rule) {
                            for c in &mut row.cells {
                                c.ref_count = Some(ref_table.counts[ri][j]);
                                c.ref_min_gap = Some(ref_table.min_gaps[ri][j]);
                            }
                        }
                    }
                }
            }
            Ok(SweepPoint { value: v, table })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(param: &str, points: &[SweepPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{param},rule,horizon,mean_count,ref_count,mean_min_gap,ref_min_gap,runs_with_gap")?;
    let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for p in points {
        for r in &p.table.rows {
            for c in &r.cells {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    p.value,
                    r.rule,
                    c.horizon,
                    c.mean_count,
                    o(c.ref_count),
                    o(c.mean_min_gap),
                    o(c.ref_min_gap),
                    c.runs_with_gap
                )?;
            }
        }
    }
    Ok(())
}
