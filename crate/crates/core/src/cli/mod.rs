//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 experiment verdict fail, 2 spec/config error,
//! 3 constant selection failure.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::kernel::{select_constants, KernelError, KernelParams, SelectionOptions, SelectionTrace};
use crate::quadrature::{graph_point, Evaluator};
use crate::verify::{self, Verdict};
use config::{Resolved, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_SELECT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cr-approx", version, about = "Entire approximants of CR functions on model graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the config, check decoupling and the growth certificate.
    Check,
    /// Choose and audit the kernel constants.
    Select,
    /// Evaluate F_ε at the points of a CSV file.
    Approx {
        /// CSV of packed (x, u, v) rows (overrides approx.points).
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Convergence and slice-fixing experiments.
    Experiment,
    /// Structural suite.
    Suite,
}

/// Runs the CLI on `args` and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SPEC } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn spec_err(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_SPEC,
        message: message.into(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    spec_err(format!("{}: {e}", path.display()))
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| spec_err("--config is required"))?;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut cfg = RunConfig::from_toml(&text).map_err(spec_err)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    let res = cfg.resolve().map_err(spec_err)?;

    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| spec_err(format!("--threads: {e}")))?;
    let out_dir = PathBuf::from(&cfg.output.dir);
    pool.install(|| match &cli.command {
        Command::Check => cmd_check(&cfg, &res, &out_dir),
        Command::Select => cmd_select(&cfg, &res, &out_dir),
        Command::Approx { points } => cmd_approx(&cfg, &res, &out_dir, points.as_deref()),
        Command::Experiment => cmd_experiment(&cfg, &res, &out_dir),
        Command::Suite => cmd_suite(&cfg, &res, &out_dir),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a KernelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a SelectionTrace>,
    verdicts: Vec<Verdict>,
}

fn finish(cfg: &RunConfig, out: &Path, name: &str, params: Option<&KernelParams>, trace: Option<&SelectionTrace>, verdicts: Vec<Verdict>) -> Result<i32, Failure> {
    for v in &verdicts {
        println!("{} {}: worst {:e} ({})", if v.pass { "PASS" } else { "FAIL" }, v.item, v.worst, v.witness);
    }
    let pass = verdicts.iter().all(|v| v.pass);
    let report = Report {
        config: cfg,
        params,
        trace,
        verdicts,
    };
    write(out, name, &to_json(&report))?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Parsing and decoupling already happened in `resolve`; a failed growth
/// certificate means the theorem's hypothesis is not met, so it is a spec
/// error.
fn cmd_check(cfg: &RunConfig, res: &Resolved, out: &Path) -> Result<i32, Failure> {
    let rep = res
        .graph
        .growth_certificate(&res.k.bx, res.growth, cfg.manifold.growth_samples, res.seed);
    let v = Verdict {
        item: "growth_certificate".into(),
        pass: rep.pass,
        worst: rep.worst_ratio,
        witness: format!("(x,u,v) = {:?}", rep.witness),
    };
    let code = finish(cfg, out, "check.json", None, None, vec![v])?;
    if code == EXIT_PASS {
        Ok(EXIT_PASS)
    } else {
        Err(spec_err(format!(
            "growth certificate failed: |Dh| / (C(1+|x|^N+|w|^N)) = {} at {:?}",
            rep.worst_ratio, rep.witness
        )))
    }
}

fn select(cfg: &RunConfig, res: &Resolved) -> Result<(KernelParams, SelectionTrace), Failure> {
    let opts = SelectionOptions {
        seed: res.seed,
        budget: cfg.selection.budget,
        audit_samples: cfg.selection.audit_samples,
        law: None,
    };
    select_constants(&res.graph, &res.k, res.growth, &opts).map_err(|e| match e {
        KernelError::BudgetExhausted { .. } => Failure {
            code: EXIT_SELECT,
            message: e.to_string(),
        },
        other => Failure {
            code: EXIT_SELECT,
            message: format!("constant selection failed: {other}"),
        },
    })
}

fn cmd_select(cfg: &RunConfig, res: &Resolved, out: &Path) -> Result<i32, Failure> {
    let (params, trace) = select(cfg, res)?;
    let v = Verdict {
        item: "lemma1_margin".into(),
        pass: trace.worst_margin <= 0.0,
        worst: trace.worst_margin,
        witness: format!("{} escalation rounds", trace.rounds),
    };
    finish(cfg, out, "params.json", Some(&params), Some(&trace), vec![v])
}

/// Rows of a points file; blank lines, `#` comments and a non-numeric
/// header are skipped.
fn read_points(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match fields {
            Ok(p) if p.len() == dim => pts.push(p),
            Ok(p) => {
                return Err(spec_err(format!(
                    "{}:{}: expected {dim} coordinates, got {}",
                    path.display(),
                    lineno + 1,
                    p.len()
                )))
            }
            Err(_) if pts.is_empty() && lineno == 0 => continue,
            Err(e) => return Err(spec_err(format!("{}:{}: {e}", path.display(), lineno + 1))),
        }
    }
    Ok(pts)
}

fn cmd_approx(cfg: &RunConfig, res: &Resolved, out: &Path, points: Option<&Path>) -> Result<i32, Failure> {
    let path = match points {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            cfg.approx
                .points
                .as_ref()
                .ok_or_else(|| spec_err("approx needs --points or approx.points"))?,
        ),
    };
    let eps = cfg.approx.eps.unwrap_or(*cfg.experiment.schedule.last().expect("validated schedule"));
    if !(eps > 0.0) {
        return Err(spec_err(format!("approx.eps must be positive, got {eps}")));
    }
    let g = &res.graph;
    let pts = read_points(&path, g.d() + 2 * g.m())?;
    let (params, _) = select(cfg, res)?;
    let ev = Evaluator::new(g, &params, &cfg.quadrature, &res.k, &res.fns).map_err(|e| spec_err(e.to_string()))?;
    use rayon::prelude::*;
    let rows: Vec<_> = pts
        .par_iter()
        .map(|p| {
            let (z, w) = graph_point(g, p);
            ev.f(eps, &z, &w)
        })
        .collect();
    let mut csv = String::new();
    let coords: Vec<String> = (1..=g.d())
        .map(|i| format!("x{i}"))
        .chain((1..=g.m()).map(|i| format!("u{i}")))
        .chain((1..=g.m()).map(|i| format!("v{i}")))
        .collect();
    csv.push_str(&coords.join(","));
    csv.push_str(",function,eps,re,im,err_est,flagged\n");
    for (p, r) in pts.iter().zip(rows) {
        let r = r.map_err(|e| spec_err(e.to_string()))?;
        for q in 0..res.fns.len() {
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            let v = r.f[q];
            csv.push_str(&format!(
                "{},{},{},{:e},{:e},{:e},{}\n",
                coords.join(","),
                q + 1,
                eps,
                v.value.re,
                v.value.im,
                v.err_est,
                v.flagged
            ));
        }
    }
    write(out, "approx.csv", &csv)?;
    Ok(EXIT_PASS)
}

/// Tables, gap verdicts and (optionally) the small-`R` control for every
/// test function. Gap items are skipped when `K` has no `v`-extent.
fn cmd_experiment(cfg: &RunConfig, res: &Resolved, out: &Path) -> Result<i32, Failure> {
    let (params, trace) = select(cfg, res)?;
    let ex = &cfg.experiment;
    let tables = verify::convergence_experiment(&res.graph, &params, &res.k, &res.fns, &ex.schedule, &cfg.quadrature, ex.grid_points)
        .map_err(|e| spec_err(e.to_string()))?;
    let mut verdicts = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        write(out, &format!("error_table_f{}.csv", i + 1), &t.to_csv())?;
        verdicts.push(t.convergence_verdict(ex.final_rel));
    }
    let has_v_extent = res.k.bx.lo[res.graph.n()..]
        .iter()
        .zip(&res.k.bx.hi[res.graph.n()..])
        .any(|(a, b)| b > a);
    if has_v_extent {
        verdicts.extend(tables.iter().map(|t| t.gap_verdict(ex.ratio_slack)));
        if ex.control {
            let small = verify::small_radius(&res.k);
            let ctrl = verify::stokes_gap_experiment(&res.graph, &params, &small, &res.fns, &ex.schedule, &cfg.quadrature, ex.grid_points)
                .map_err(|e| spec_err(e.to_string()))?;
            for (i, (t, c)) in tables.iter().zip(&ctrl).enumerate() {
                write(out, &format!("control_table_f{}.csv", i + 1), &c.to_csv())?;
                verdicts.push(verify::control_verdict(t, c));
            }
        }
    }
    finish(cfg, out, "verdict.json", Some(&params), Some(&trace), verdicts)
}

fn cmd_suite(cfg: &RunConfig, res: &Resolved, out: &Path) -> Result<i32, Failure> {
    let (params, trace) = select(cfg, res)?;
    let verdicts = verify::structural_suite(&res.graph, &res.k, &params, res.seed, &cfg.suite);
    finish(cfg, out, "suite.json", Some(&params), Some(&trace), verdicts)
}
