//! `qenergy` command-line interface.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{P1Spec, RunConfig};
use crate::error::{Error, Result};
use crate::gramian::{
    continuous_gramians, discrete_gramians, max_recommended_dt, zoh_discretize, DiscreteModel,
    GramianPair,
};
use crate::linalg::{Matrix, Vector};
use crate::mc::{run_validation_suite, RowStatus, ValidationConfig, ValidationReport, DEFAULT_PATHS};
use crate::report::matrix_rows;
use crate::translator::{
    baseline_probability, synthesize_continuous, synthesize_discrete, translate, ControlLaw,
    TranslationResult,
};

const DEFAULT_VALIDATE_DT: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "qenergy", version, about = "Minimal control energy for terminal halfspace probabilities")]
pub struct Cli {
    /// Worker threads for Monte Carlo (default: one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Continuous Gramians V, W and R² (discrete too with --dt or --n).
    Gramians(Opts),
    /// Minimal energy and matched-filter gain for p0 -> p1.
    Translate(Opts),
    /// Write the matched-filter control as CSV.
    Synthesize(Opts),
    /// Exact zero-order-hold discretization.
    Discretize(Opts),
    /// Run the Monte Carlo validation suite (drone fixture by default).
    Validate(Opts),
    /// Minimal energy over a grid of target probabilities.
    Sweep(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Baseline probability (default: from the config, else computed from the event).
    #[arg(long)]
    pub p0: Option<f64>,
    /// Target probability, or a grid `lo:hi:step` for sweep.
    #[arg(long)]
    pub p1: Option<String>,
    /// Discretization step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of discrete steps (alternative to --dt).
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Monte Carlo seed (default: drawn from OS entropy and printed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample points for a continuous control.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Opts {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::from_path(p),
            None => Err(Error::Config("--config is required".into())),
        }
    }

    fn step(&self, cfg: &RunConfig) -> Result<Option<f64>> {
        match (self.dt, self.n) {
            (Some(_), Some(_)) => Err(Error::Config("give either --dt or --n, not both".into())),
            (Some(dt), None) => Ok(Some(dt)),
            (None, Some(0)) => Err(Error::Config("--n must be >= 1".into())),
            (None, Some(n)) => Ok(Some(cfg.model.horizon() / n as f64)),
            (None, None) => Ok(cfg.dt),
        }
    }

    fn p1(&self, cfg: &RunConfig) -> Result<P1Spec> {
        match (&self.p1, &cfg.p1) {
            (Some(s), _) => P1Spec::parse(s),
            (None, Some(p)) => Ok(p.clone()),
            (None, None) => Err(Error::Config("no p1 given (flag or config)".into())),
        }
    }

    fn p0(&self, cfg: &RunConfig, gram: &GramianPair) -> Result<f64> {
        match self.p0.or(cfg.p0) {
            Some(p) => Ok(p),
            None => Ok(baseline_probability(&cfg.model, gram, cfg.event()?)?.1),
        }
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    /// Side information: stdout when the payload goes to a file, else stderr.
    fn note(&self, text: &str) {
        if self.out.is_some() {
            println!("{text}");
        } else {
            eprintln!("{text}");
        }
    }
}

/// Compact fixed or scientific notation for tables.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let ax = x.abs();
    if (1e-4..1e7).contains(&ax) {
        let s = format!("{x:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{x:.6e}")
    }
}

fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(headers.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn render_matrix(name: &str, m: &Matrix) -> String {
    let mut s = format!("{name} =\n");
    for r in m.row_iter() {
        let cells: Vec<String> = r.iter().map(|&v| format!("{:>16}", fmt_num(v))).collect();
        let _ = writeln!(s, "  [{} ]", cells.join(""));
    }
    s
}

fn csv_line(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn pretty_json(v: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn gramians_text(label: &str, g: &GramianPair, w: Option<&Vector>) -> String {
    let mut s = format!("{label}\n");
    s.push_str(&render_matrix("V", g.v.as_matrix()));
    s.push_str(&render_matrix("W", &g.w));
    if let Some(w) = w {
        let (v, ww) = (g.noise_variance(w), g.reach(w));
        let _ = writeln!(s, "w'Vw = {}\nw'Ww = {}\nR^2  = {}", fmt_num(v), fmt_num(ww), fmt_num(ww / v));
    }
    s
}

fn direction_json(g: &GramianPair, w: Option<&Vector>) -> serde_json::Value {
    match w {
        Some(w) => {
            let (v, ww) = (g.noise_variance(w), g.reach(w));
            json!({"v": v, "wWw": ww, "r_squared": ww / v})
        }
        None => serde_json::Value::Null,
    }
}

fn cmd_gramians(o: &Opts) -> Result<()> {
    let cfg = o.load()?;
    let w = cfg.event.as_ref().map(|e| e.w());
    let cont = continuous_gramians(&cfg.model)?;
    let disc = match o.step(&cfg)? {
        Some(dt) => Some(discrete_gramians(&zoh_discretize(&cfg.model, dt)?)?),
        None => None,
    };
    let text = match o.format(Format::Table) {
        Format::Table => {
            let mut s = gramians_text(&format!("continuous (T = {})", cfg.model.horizon()), &cont, w);
            if let Some(d) = &disc {
                let crate::gramian::Horizon::Discrete { steps, dt } = d.horizon else { unreachable!() };
                s.push('\n');
                s.push_str(&gramians_text(&format!("discrete (N = {steps}, dt = {dt})"), d, w));
            }
            s
        }
        Format::Json => pretty_json(&json!({
            "continuous": cont,
            "continuous_direction": direction_json(&cont, w),
            "discrete": disc,
            "discrete_direction": disc.as_ref().map(|d| direction_json(d, w)),
        }))?,
        Format::Csv => {
            let mut s = csv_line(&["gramian".into(), "row".into(), "col".into(), "V".into(), "W".into()]);
            for (tag, g) in std::iter::once(("continuous", &cont)).chain(disc.iter().map(|d| ("discrete", d))) {
                let n = g.w.nrows();
                for i in 0..n {
                    for j in 0..n {
                        s.push_str(&csv_line(&[
                            tag.into(),
                            i.to_string(),
                            j.to_string(),
                            g.v.as_matrix()[(i, j)].to_string(),
                            g.w[(i, j)].to_string(),
                        ]));
                    }
                }
            }
            s
        }
    };
    o.emit(&text)
}

const RESULT_FIELDS: [&str; 12] =
    ["r_squared", "v", "wWw", "m0", "p0", "p1", "z0", "z1", "gap", "e_min", "beta", "feasible"];

fn result_cells(r: &TranslationResult, fmt: fn(f64) -> String) -> Vec<String> {
    let mut v: Vec<String> =
        [r.r_squared, r.v, r.w_w, r.m0, r.p0, r.p1, r.z0, r.z1, r.gap, r.e_min, r.beta]
            .iter()
            .map(|&x| fmt(x))
            .collect();
    v.push(r.feasible.to_string());
    v
}

fn require_feasible(r: &TranslationResult) -> Result<()> {
    if r.feasible {
        Ok(())
    } else {
        Err(Error::Infeasible { r_squared: r.r_squared })
    }
}

fn cmd_translate(o: &Opts) -> Result<()> {
    let cfg = o.load()?;
    let gram = continuous_gramians(&cfg.model)?;
    let p0 = o.p0(&cfg, &gram)?;
    let p1 = o.p1(&cfg)?.single()?;
    let r = translate(&cfg.model, &gram, cfg.event()?, p0, p1)?;
    require_feasible(&r)?;
    let text = match o.format(Format::Table) {
        Format::Table => {
            let rows: Vec<Vec<String>> = RESULT_FIELDS
                .iter()
                .zip(result_cells(&r, fmt_num))
                .map(|(k, v)| vec![k.to_string(), v])
                .collect();
            render_table(&["quantity", "value"], &rows)
        }
        Format::Csv => {
            let h: Vec<String> = RESULT_FIELDS.iter().map(|s| s.to_string()).collect();
            csv_line(&h) + &csv_line(&result_cells(&r, |x| x.to_string()))
        }
        Format::Json => pretty_json(&r)?,
    };
    o.emit(&text)
}

fn control_rows(
    law: &ControlLaw,
    dm: Option<&DiscreteModel>,
    effort: &Matrix,
    horizon: f64,
    samples: usize,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let m = effort.nrows();
    let inputs: Vec<String> = (0..m).map(|i| format!("u{i}")).collect();
    match (law, dm) {
        (ControlLaw::DiscreteMatched { inputs: us, .. }, Some(dm)) => {
            let mut header = vec!["k".to_string(), "t".to_string()];
            header.extend(inputs);
            header.push("energy".into());
            let rows = us
                .iter()
                .enumerate()
                .map(|(k, u)| {
                    let mut row = vec![k as f64, k as f64 * dm.dt];
                    row.extend(u.iter());
                    row.push(0.5 * u.dot(&(effort * u)));
                    row
                })
                .collect();
            Ok((header, rows))
        }
        _ => {
            if samples < 2 {
                return Err(Error::Config("--samples must be >= 2".into()));
            }
            let mut header = vec!["t".to_string()];
            header.extend(inputs);
            header.push("power".into());
            let mut rows = Vec::with_capacity(samples);
            for i in 0..samples {
                let t = horizon * i as f64 / (samples - 1) as f64;
                let u = law.eval(t)?.ok_or_else(|| Error::UnsupportedLaw(law.kind().into()))?;
                let mut row = vec![t];
                row.extend(u.iter());
                row.push(0.5 * u.dot(&(effort * &u)));
                rows.push(row);
            }
            Ok((header, rows))
        }
    }
}

fn cmd_synthesize(o: &Opts) -> Result<()> {
    let cfg = o.load()?;
    let event = cfg.event()?;
    let gram = continuous_gramians(&cfg.model)?;
    let p0 = o.p0(&cfg, &gram)?;
    let p1 = o.p1(&cfg)?.single()?;
    let (result, law, dm) = match o.step(&cfg)? {
        Some(dt) => {
            let dm = zoh_discretize(&cfg.model, dt)?;
            let (r, law) = synthesize_discrete(&discrete_gramians(&dm)?, &dm, event, p0, p1)?;
            (r, law, Some(dm))
        }
        None => {
            let r = translate(&cfg.model, &gram, event, p0, p1)?;
            require_feasible(&r)?;
            let law = synthesize_continuous(&cfg.model, event, &r)?;
            (r, law, None)
        }
    };
    let effort = match &dm {
        Some(d) => d.effort.m.clone(),
        None => cfg.model.effort_metric()?.m,
    };
    let (header, rows) = control_rows(&law, dm.as_ref(), &effort, cfg.model.horizon(), o.samples)?;
    let text = match o.format(Format::Csv) {
        Format::Csv => {
            let mut s = csv_line(&header);
            for r in &rows {
                s.push_str(&csv_line(&r.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
            }
            s
        }
        Format::Table => {
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            let cells: Vec<Vec<String>> =
                rows.iter().map(|r| r.iter().map(|&x| fmt_num(x)).collect()).collect();
            render_table(&h, &cells)
        }
        Format::Json => pretty_json(&json!({
            "result": result,
            "kind": law.kind(),
            "columns": header,
            "rows": rows,
        }))?,
    };
    o.emit(&text)?;
    if o.format(Format::Csv) != Format::Json {
        o.note(&format!("E_min = {}", result.e_min));
    }
    Ok(())
}

fn cmd_discretize(o: &Opts) -> Result<()> {
    let cfg = o.load()?;
    let dt = o.step(&cfg)?.ok_or_else(|| Error::Config("discretize needs --dt or --n".into()))?;
    let dm = zoh_discretize(&cfg.model, dt)?;
    if dm.dt_warning {
        let limit = max_recommended_dt(cfg.model.a()).unwrap_or(f64::INFINITY);
        eprintln!("warning: dt = {dt} exceeds the 0.2/||A||_2 rule of thumb ({})", fmt_num(limit));
    }
    let text = match o.format(Format::Table) {
        Format::Table => {
            let mut s = format!("N = {}, dt = {}\n", dm.steps, dm.dt);
            s.push_str(&render_matrix("A_d", &dm.a_d));
            s.push_str(&render_matrix("B_d", &dm.b_d));
            s.push_str(&render_matrix("Sigma_d", dm.sigma_d.as_matrix()));
            s.push_str(&render_matrix("M", &dm.effort.m));
            s
        }
        Format::Json => pretty_json(&dm)?,
        Format::Csv => {
            let mut s = csv_line(&["matrix".into(), "row".into(), "col".into(), "value".into()]);
            for (name, m) in [
                ("A_d", &dm.a_d),
                ("B_d", &dm.b_d),
                ("Sigma_d", dm.sigma_d.as_matrix()),
                ("M", &dm.effort.m),
            ] {
                for (i, row) in matrix_rows(m).iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        s.push_str(&csv_line(&[name.into(), i.to_string(), j.to_string(), v.to_string()]));
                    }
                }
            }
            s
        }
    };
    o.emit(&text)
}

fn validation_config(o: &Opts, seed: u64) -> Result<ValidationConfig> {
    let mut vc = ValidationConfig::drone(seed);
    if o.config.is_some() {
        let cfg = o.load()?;
        let gram = continuous_gramians(&cfg.model)?;
        vc.p0 = o.p0(&cfg, &gram)?;
        vc.w = cfg.event()?.w().clone();
        if let Some(p) = o.p1.as_deref().map(P1Spec::parse).transpose()?.or(cfg.p1.clone()) {
            vc.p1 = p.single()?;
        }
        vc.dt = o.step(&cfg)?.unwrap_or(DEFAULT_VALIDATE_DT);
        vc.n_paths = o.paths.or(cfg.mc.n_paths).unwrap_or(DEFAULT_PATHS);
        vc.model = cfg.model;
    } else {
        if let Some(p) = o.p0 {
            vc.p0 = p;
        }
        if let Some(p) = &o.p1 {
            vc.p1 = P1Spec::parse(p)?.single()?;
        }
        match (o.dt, o.n) {
            (Some(_), Some(_)) => return Err(Error::Config("give either --dt or --n, not both".into())),
            (Some(dt), None) => vc.dt = dt,
            (None, Some(n)) if n > 0 => vc.dt = vc.model.horizon() / n as f64,
            (None, Some(_)) => return Err(Error::Config("--n must be >= 1".into())),
            (None, None) => {}
        }
        vc.n_paths = o.paths.unwrap_or(DEFAULT_PATHS);
    }
    Ok(vc)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "-".into())
}

pub fn report_table(rep: &ValidationReport) -> String {
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.test.to_string(),
                r.metric.to_string(),
                opt_num(r.value),
                opt_num(r.se),
                opt_num(r.reference),
                match r.kind {
                    crate::mc::RowKind::MonteCarlo => "mc".into(),
                    crate::mc::RowKind::Analytic => "analytic".into(),
                },
                match r.status {
                    RowStatus::Pass => "pass".into(),
                    RowStatus::Fail => "FAIL".into(),
                    RowStatus::Error => "ERROR".into(),
                },
            ]
        })
        .collect();
    let mut s = format!(
        "paths = {}, seed = {}, dt = {}, p0 = {}, p1 = {}\n\n",
        rep.n_paths, rep.seed, rep.dt, rep.p0, rep.p1
    );
    s.push_str(&render_table(&["test", "metric", "value", "SE", "reference", "kind", "status"], &rows));
    for r in rep.rows.iter().filter(|r| r.detail.is_some()) {
        let _ = writeln!(s, "  {}: {}", r.test, r.detail.as_deref().unwrap_or_default());
    }
    s
}

fn cmd_validate(o: &Opts) -> Result<()> {
    let cfg_seed = match &o.config {
        Some(_) => o.load()?.mc.seed,
        None => None,
    };
    let seed = match o.seed.or(cfg_seed) {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    };
    let vc = validation_config(o, seed)?;
    let start = Instant::now();
    let rep = run_validation_suite(&vc)?;
    let text = match o.format(Format::Table) {
        Format::Table => {
            let mut s = report_table(&rep);
            let _ = writeln!(s, "runtime: {:.2} s", start.elapsed().as_secs_f64());
            s
        }
        Format::Json => pretty_json(&rep)?,
        Format::Csv => {
            let mut s = csv_line(
                &["test", "metric", "value", "se", "reference", "seed", "status"].map(String::from),
            );
            let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &rep.rows {
                s.push_str(&csv_line(&[
                    r.test.into(),
                    r.metric.into(),
                    f(r.value),
                    f(r.se),
                    f(r.reference),
                    r.seed.map(|v| v.to_string()).unwrap_or_default(),
                    serde_json::to_value(r.status)?.as_str().unwrap_or_default().into(),
                ]));
            }
            s
        }
    };
    o.emit(&text)
}

fn cmd_sweep(o: &Opts) -> Result<()> {
    let cfg = o.load()?;
    let event = cfg.event()?;
    let gram = continuous_gramians(&cfg.model)?;
    let p0 = o.p0(&cfg, &gram)?;
    let results: Vec<TranslationResult> = o
        .p1(&cfg)?
        .values()
        .into_iter()
        .map(|p1| translate(&cfg.model, &gram, event, p0, p1))
        .collect::<Result<_>>()?;
    if let Some(bad) = results.iter().find(|r| !r.feasible) {
        return Err(Error::Infeasible { r_squared: bad.r_squared });
    }
    let cols = |r: &TranslationResult| [r.p1, r.gap, r.e_min, r.beta];
    let text = match o.format(Format::Csv) {
        Format::Csv => {
            let mut s = csv_line(&["p1", "gap", "e_min", "beta"].map(String::from));
            for r in &results {
                s.push_str(&csv_line(&cols(r).map(|x| x.to_string())));
            }
            s
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = results.iter().map(|r| cols(r).map(fmt_num).to_vec()).collect();
            render_table(&["p1", "gap", "e_min", "beta"], &rows)
        }
        Format::Json => pretty_json(&results)?,
    };
    o.emit(&text)
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Gramians(o) => cmd_gramians(o),
        Command::Translate(o) => cmd_translate(o),
        Command::Synthesize(o) => cmd_synthesize(o),
        Command::Discretize(o) => cmd_discretize(o),
        Command::Validate(o) => cmd_validate(o),
        Command::Sweep(o) => cmd_sweep(o),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
