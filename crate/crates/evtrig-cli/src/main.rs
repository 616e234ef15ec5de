use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evtrig::analysis::{
    convergence_check, dissipation_residual, invariant_set_radius, l2_report, practical_stability_radius,
};
use evtrig::config::{parse_list, RunConfig};
use evtrig::design::{design_report, DesignInputs};
use evtrig::model::euclid;
use evtrig::sim::{simulate, RunRecord};
use evtrig::tables::{reproduce_table, run_table, sweep, write_sweep_csv, TableConfig};
use evtrig::Error;

const EXIT_CHECK: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser)]
#[command(name = "evtrig", about = "Event-triggered control: simulate, check, design, tabulate")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-ic")]
    n_ic: Option<usize>,
    /// Simulation horizon; repeat for several table horizons
    #[arg(long)]
    horizon: Vec<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and run the enabled checks
    Run(Common),
    /// Compute inter-event bounds and decay parameters
    Design(Common),
    /// Monte Carlo event counts and minimum gaps
    Tables {
        #[command(flatten)]
        common: Common,
        /// Built-in scenario, when no config is given
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Repeat the tables over values of one scenario parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        param: Option<String>,
        /// Comma separated values
        #[arg(long)]
        values: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(c) => cmd_run(&c),
        Cmd::Design(c) => cmd_design(&c),
        Cmd::Tables { common, scenario } => cmd_tables(&common, scenario),
        Cmd::Sweep { common, scenario, param, values } => cmd_sweep(&common, scenario, param, values),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Zeno { .. } | Error::Divergence { .. } => EXIT_GUARD,
        Error::Design(_) | Error::LipschitzCondition(_) => EXIT_CHECK,
        _ => EXIT_PARSE,
    }
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Parse { line: 0, field: "--config".into(), msg: "required".into() })?;
    RunConfig::from_path(path)
}

fn out_dir(c: &Common, cfg: Option<&RunConfig>) -> Result<PathBuf, Error> {
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.and_then(|r| r.output_dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_record(dir: &Path, rec: &RunRecord) -> Result<(), Error> {
    rec.write_csv(create(dir, "trajectory.csv")?)?;
    rec.write_events_csv(create(dir, "events.csv")?)?;
    Ok(())
}

fn cmd_run(c: &Common) -> Result<u8, Error> {
    let mut cfg = load(c)?;
    if let Some(s) = c.seed {
        cfg.sim.seed = s;
    }
    if let Some(&h) = c.horizon.last() {
        cfg.sim.t_end = h;
    }
    let dir = out_dir(c, Some(&cfg))?;
    let scen = cfg.scenario();

    let rec = match simulate(&scen.plant, &scen.certs, &cfg.rule, &cfg.sim) {
        Ok(r) => r,
        Err(Error::Zeno { t, events, rate, record }) => {
            write_record(&dir, &record)?;
            eprintln!(
                "event accumulation: {events} events by t = {t:.6}, recent rate {rate:.3e}/s; last event at {:.9}",
                record.events.last().copied().unwrap_or(0.0)
            );
            return Ok(EXIT_GUARD);
        }
        Err(Error::Divergence { t, record }) => {
            write_record(&dir, &record)?;
            eprintln!("state diverged at t = {t:.6}");
            return Ok(EXIT_GUARD);
        }
        Err(e) => return Err(e),
    };
    write_record(&dir, &rec)?;

    let mut ok = true;
    let mut lines = Vec::new();
    let tol = cfg.checks.tol;

    let gain = l2_report(&rec, &scen.certs, &cfg.rule)?;
    gain.write_curves_csv(create(&dir, "gain_curve.csv")?)?;
    let mut gw = create(&dir, "gain_report.txt")?;
    gain.write_kv(&mut gw)?;
    drop(gw);
    if cfg.checks.gain {
        let pass = gain.max_excess <= tol;
        ok &= pass;
        lines.push(format!("gain: max excess {:.3e} -> {}", gain.max_excess, verdict(pass)));
    }
    if cfg.checks.dissipation {
        let d = dissipation_residual(&rec, &scen.plant, &scen.certs, &cfg.rule);
        let pass = d.max_excess <= tol;
        ok &= pass;
        lines.push(format!(
            "dissipation: max residual {:.3e}, max excess over allowance {:.3e} at t = {} -> {}",
            d.max_residual,
            d.max_excess,
            d.t_at_max_excess,
            verdict(pass)
        ));
    }
    if cfg.checks.invariance {
        let eps_run = scen.certs.eps.max(euclid(&cfg.sim.x0));
        let (eb, q) = invariant_set_radius(&scen.certs, &scen.plant, eps_run)?;
        let pass = rec.max_x <= eb + 1e-6 && rec.max_w < q;
        ok &= pass;
        lines.push(format!(
            "invariance: max|x| {:.6} (eps_bar {eb:.6}), max|w| {:.6} (Q {q:.6}) -> {}",
            rec.max_x,
            rec.max_w,
            verdict(pass)
        ));
    }
    if cfg.checks.convergence {
        let rho = practical_stability_radius(&cfg.rule, &scen.certs)?;
        let floor = cfg.checks.convergence_floor * euclid(&cfg.sim.x0);
        let r = convergence_check(&rec, &scen.certs, rho, floor);
        ok &= r.pass;
        lines.push(format!(
            "convergence: rho {rho:.3e}, final |x| {:.3e}, entry {:?} -> {}",
            r.final_norm,
            r.entry_time,
            verdict(r.pass)
        ));
    }

    let inputs = DesignInputs::from_certs(&scen.plant, &scen.certs, &cfg.design)?;
    design_report(&inputs).write_kv(create(&dir, "design_report.txt")?)?;

    println!(
        "{} / {}: {} events, {} forced, t_final {}",
        scen.name,
        cfg.rule_name,
        rec.events.len(),
        rec.forced_events,
        rec.t_final
    );
    for l in &lines {
        println!("{l}");
    }
    println!("artifacts in {}", dir.display());
    Ok(if ok { 0 } else { EXIT_CHECK })
}

fn verdict(p: bool) -> &'static str {
    if p {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_design(c: &Common) -> Result<u8, Error> {
    let cfg = load(c)?;
    let dir = out_dir(c, Some(&cfg))?;
    let scen = cfg.scenario();
    let inputs = DesignInputs::from_certs(&scen.plant, &scen.certs, &cfg.design)?;
    let res = design_report(&inputs);
    res.write_kv(create(&dir, "design_report.txt")?)?;
    res.write_kv(std::io::stdout().lock())?;
    if res.ok() {
        Ok(0)
    } else {
        for e in &res.errors {
            eprintln!("design: {e}");
        }
        Ok(EXIT_CHECK)
    }
}

fn table_config(c: &Common, cfg: Option<&RunConfig>) -> TableConfig {
    let mut t = TableConfig::default();
    if let Some(r) = cfg {
        t.n_ic = r.monte_carlo.n_ic;
        t.seed = r.monte_carlo.seed;
        t.horizons = r.monte_carlo.horizons.clone();
        t.rel_tol = r.monte_carlo.rel_tol;
    }
    if let Some(n) = c.n_ic {
        t.n_ic = n;
    }
    if let Some(s) = c.seed {
        t.seed = s;
    }
    if !c.horizon.is_empty() {
        t.horizons = c.horizon.clone();
    }
    t
}

fn cmd_tables(c: &Common, scenario: Option<String>) -> Result<u8, Error> {
    let cfg = match &c.config {
        Some(_) => Some(load(c)?),
        None => None,
    };
    let tc = table_config(c, cfg.as_ref());
    let dir = out_dir(c, cfg.as_ref())?;
    let table = match (&cfg, scenario) {
        (Some(r), _) => {
            let s = r.scenario();
            let rules: Vec<String> = s.rules.iter().map(|(n, _)| n.clone()).collect();
            run_table(s, &rules, &tc)?
        }
        (None, Some(name)) => reproduce_table(&name, &tc)?,
        (None, None) => {
            return Err(Error::Parse { line: 0, field: "--scenario".into(), msg: "give --config or --scenario".into() })
        }
    };
    let name = format!("table_{}.csv", table.scenario);
    table.write_csv(create(&dir, &name)?)?;
    table.write_csv(std::io::stdout().lock())?;
    Ok(0)
}

fn cmd_sweep(c: &Common, scenario: Option<String>, param: Option<String>, values: Option<String>) -> Result<u8, Error> {
    let cfg = match &c.config {
        Some(_) => Some(load(c)?),
        None => None,
    };
    let mut tc = table_config(c, cfg.as_ref());
    if cfg.is_none() && c.horizon.is_empty() {
        tc.horizons = vec![10.0];
    }
    let dir = out_dir(c, cfg.as_ref())?;
    let sw = cfg.as_ref().and_then(|r| r.sweep.clone());
    let name = scenario
        .or_else(|| cfg.as_ref().map(|r| r.scenario.clone()))
        .ok_or_else(|| Error::Parse { line: 0, field: "--scenario".into(), msg: "give --config or --scenario".into() })?;
    let param = param
        .or_else(|| sw.as_ref().map(|s| s.param.clone()))
        .ok_or_else(|| Error::Parse { line: 0, field: "sweep.param".into(), msg: "missing".into() })?;
    let values = match values {
        Some(v) => parse_list(&v).map_err(|m| Error::Parse { line: 0, field: "--values".into(), msg: m })?,
        None => sw
            .as_ref()
            .map(|s| s.values.clone())
            .ok_or_else(|| Error::Parse { line: 0, field: "sweep.values".into(), msg: "missing".into() })?,
    };
    let base = cfg.as_ref().map(|r| r.overrides.clone()).unwrap_or_default();
    let rules = match &sw {
        Some(s) => s.rules.clone(),
        None => evtrig::corpus::by_name(&name, &base)?.rules.iter().map(|(n, _)| n.clone()).collect(),
    };
    let pts = sweep(&name, &base, &param, &values, &rules, &tc)?;
    write_sweep_csv(&param, &pts, create(&dir, "sweep.csv")?)?;
    write_sweep_csv(&param, &pts, std::io::stdout().lock())?;
    Ok(0)
}
