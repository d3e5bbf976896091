//! The `polymerlab` command.
//!
//! ```text
//! polymerlab <gen|fpp|polymer|ensemble|report> [--config <path>] [--key=value ...]
//! ```
//!
//! Every artifact lands in `out_dir` and carries the configuration hash.
//! CSV files lead with a `config_hash` column; JSON files wrap their
//! payload as `{code_version, config_hash, config, result}`. Wall-clock
//! times go only to `<subcommand>.meta.json`, so two runs of one
//! configuration give byte-identical CSV and JSON.
//!
//! | subcommand | artifacts |
//! |---|---|
//! | `gen` | `slab.bin`, `slab.bin.json`, `gen.json` |
//! | `fpp` | `fpp_result.json`, `fpp_path.csv` |
//! | `polymer` | `polymer_result.json`, `polymer_result.csv` (one row per beta) |
//! | `ensemble` | `ensemble_raw.csv`, `ensemble_raw.json` |
//! | `report` | `report_concentration.csv`, `report_estimates.csv`, `report_max_jump.csv`, `report_rows.csv`, `report.json` |
//!
//! On failure a JSON object `{code, message, context}` goes to stderr and
//! the exit status is 2 (configuration), 3 (capacity), 4 (infeasible
//! instance) or 5 (anything else).

mod config;
mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use config::{parse_config, Emit, RunConfig};
pub use report::{build_report, Report};

use crate::env::{self, EnvSlab};
use crate::error::{Error, Result};
use crate::fpp::{self, PassageResult};
use crate::polymer::{self, PartitionResult};
use crate::stats::{self, ViewMode};
use crate::CODE_VERSION;

#[derive(Debug, Parser)]
#[command(name = "polymerlab", version, about = "Directed polymers and passage times in a Bernoulli environment")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded environment slab.
    Gen(Common),
    /// One passage-time instance.
    Fpp(Common),
    /// One partition function, or a sweep over `beta_grid`.
    Polymer(Common),
    /// A full replica ensemble.
    Ensemble(Common),
    /// Aggregate raw ensemble tables.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key=value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Fpp(_) => "fpp",
            Command::Polymer(_) => "polymer",
            Command::Ensemble(_) => "ensemble",
            Command::Report(_) => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Gen(c) | Command::Fpp(c) | Command::Polymer(c) | Command::Ensemble(c) | Command::Report(c) => c,
        }
    }
}

/// Splits `--config` out of the overrides, wherever it appears.
fn split_config(common: &Common) -> Result<(Option<PathBuf>, Vec<String>)> {
    let mut path = common.config.clone();
    let mut rest = Vec::new();
    let mut it = common.overrides.iter();
    while let Some(a) = it.next() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if a == "--config" {
            let p = it.next().ok_or_else(|| Error::Config("--config needs a path".into()))?;
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a.clone());
        }
    }
    Ok((path, rest))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes artifacts into the output directory only.
struct Out<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    hash: String,
    written: Vec<String>,
}

impl<'a> Out<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out_dir)?;
        Ok(Out { dir: &cfg.out_dir, cfg, hash: cfg.hash(), written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        debug_assert!(!name.contains(['/', '\\']));
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        self.json_with_hash(name, result, &self.hash.clone())
    }

    fn json_with_hash<T: Serialize>(&mut self, name: &str, result: &T, hash: &str) -> Result<()> {
        let doc = json!({
            "code_version": CODE_VERSION,
            "config_hash": hash,
            "config": self.cfg,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn meta(&mut self, sub: &str, started: f64) -> Result<()> {
        let doc = json!({
            "subcommand": sub,
            "config_hash": self.hash,
            "code_version": CODE_VERSION,
            "started_unix": started,
            "finished_unix": unix_now(),
            "artifacts": self.written,
        });
        let name = format!("{sub}.meta.json");
        fs::write(self.dir.join(name), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }
}

/// Shortest round-trip form, with exponents for very small or large values.
pub(crate) fn num(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// The stored slab named by `slab`, if any, and the layer count to use.
fn load_slab(cfg: &RunConfig) -> Result<(Option<EnvSlab>, usize)> {
    let Some(path) = &cfg.slab else { return Ok((None, cfg.single_n())) };
    let slab = env::read_slab_file(path)?;
    if slab.d() != cfg.d {
        return Err(Error::Config(format!("slab has d = {}, config has d = {}", slab.d(), cfg.d)));
    }
    if !slab.is_synthetic() && slab.p() != cfg.p {
        return Err(Error::Config(format!("slab was generated at p = {}, config has p = {}", slab.p(), cfg.p)));
    }
    let n = cfg.n.unwrap_or(slab.n());
    if n == 0 || n > slab.n() {
        return Err(Error::Config(format!("n = {n} outside the slab's {} layers", slab.n())));
    }
    Ok((Some(slab), n))
}

fn cmd_gen(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let n = cfg.single_n();
    let h = cfg.half_width.unwrap_or_else(|| stats::default_fpp_half_width(n));
    let slab = EnvSlab::generate_with_budget(&cfg.params(), n, h, cfg.seed, cfg.max_cells)?;
    let path = out.path("slab.bin");
    out.written.push("slab.bin.json".into());
    env::write_slab_file(&slab, &path, Some(cfg.params()))?;
    let ones = slab.count_ones();
    let cells = (slab.n() * slab.window.cells()) as u64;
    out.json(
        "gen.json",
        &json!({
            "n": n,
            "half_width": h,
            "master_seed": cfg.seed,
            "obstacles": ones,
            "cells": cells,
            "density": ones as f64 / cells as f64,
        }),
    )
}

fn passage(cfg: &RunConfig, slab: &EnvSlab, n: usize) -> Result<PassageResult> {
    let params = cfg.params();
    match cfg.view {
        ViewMode::Raw => fpp::passage_time(slab, n, &params),
        ViewMode::Regularized => fpp::passage_time(&env::regularize(slab, params.theta)?, n, &params),
    }
}

fn cmd_fpp(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let params = cfg.params();
    let (stored, n) = load_slab(cfg)?;
    let res = match (stored, cfg.half_width) {
        (Some(slab), _) => passage(cfg, &slab, n)?,
        (None, Some(h)) => passage(cfg, &EnvSlab::generate_with_budget(&params, n, h, cfg.seed, cfg.max_cells)?, n)?,
        (None, None) => stats::fpp_instance(&params, n, cfg.seed, &cfg.knobs())?.1,
    };
    if cfg.emit.json() {
        out.json("fpp_result.json", &res)?;
    }
    if cfg.emit.csv() {
        let mut header = vec!["config_hash", "layer", "x0"];
        if cfg.d == 2 {
            header.push("x1");
        }
        header.extend(["jump", "cumulative_energy"]);
        let cost = fpp::JumpCost::new(cfg.alpha);
        let mut acc = 0.0;
        let rows: Vec<Vec<String>> = res
            .path
            .positions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let jump = if i == 0 { 0 } else { res.path.jumps[i - 1] };
                acc += cost.cost(jump);
                let mut r = vec![out.hash.clone(), (res.path.start_layer + i).to_string(), s[0].to_string()];
                if cfg.d == 2 {
                    r.push(s[1].to_string());
                }
                r.extend([jump.to_string(), num(acc)]);
                r
            })
            .collect();
        out.csv("fpp_path.csv", &header, &rows)?;
    }
    Ok(())
}

fn cmd_polymer(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let params = cfg.params();
    let kernel = polymer::kernel_normalizer(&params, cfg.epsilon)?;
    let betas = cfg.beta_grid.clone().unwrap_or_else(|| vec![cfg.beta]);
    let (stored, n) = load_slab(cfg)?;
    let mut results: Vec<PartitionResult> = Vec::with_capacity(betas.len());
    for &b in &betas {
        let q = params.with_beta(b);
        let r = match (&stored, cfg.half_width) {
            (Some(slab), _) => polymer::log_partition(slab, n, &q, &kernel)?,
            (None, Some(h)) => {
                let slab = EnvSlab::generate_with_budget(&q, n, h, cfg.seed, cfg.max_cells)?;
                polymer::log_partition(&slab, n, &q, &kernel)?
            }
            (None, None) => stats::polymer_instance(&q, &kernel, n, cfg.seed, &cfg.knobs())?.1,
        };
        results.push(r);
    }
    if cfg.emit.json() {
        out.json("polymer_result.json", &json!({ "kernel": kernel, "results": results }))?;
    }
    if cfg.emit.csv() {
        let header = [
            "config_hash",
            "n",
            "beta",
            "log_z",
            "certificate",
            "edge_certificate",
            "cap_used",
            "half_width",
            "mode",
            "underflow",
        ];
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| {
                vec![
                    out.hash.clone(),
                    r.n.to_string(),
                    r.beta.to_string(),
                    num(r.log_z),
                    num(r.error_certificate),
                    num(r.edge_certificate),
                    r.cap_used.to_string(),
                    r.half_width.to_string(),
                    match r.mode {
                        polymer::PartitionMode::FiniteBeta => "FINITE_BETA".into(),
                        polymer::PartitionMode::HardObstacle => "HARD_OBSTACLE".into(),
                    },
                    r.underflow.to_string(),
                ]
            })
            .collect();
        out.csv("polymer_result.csv", &header, &rows)?;
    }
    Ok(())
}

fn cmd_ensemble(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let spec = cfg.ensemble_spec();
    let mut rows = stats::run_ensemble(&spec)?;
    stats::stamp(&mut rows, &out.hash);
    if cfg.emit.csv() {
        let path = out.path("ensemble_raw.csv");
        stats::write_raw_csv(fs::File::create(path)?, &rows)?;
    }
    if cfg.emit.json() {
        out.json("ensemble_raw.json", &json!({ "spec": spec, "rows": rows }))?;
    }
    Ok(())
}

fn cmd_report(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let inputs = cfg.inputs.clone().unwrap_or_else(|| vec![cfg.out_dir.join("ensemble_raw.csv")]);
    let mut rows = Vec::new();
    for p in &inputs {
        let f = fs::File::open(p).map_err(|e| Error::Config(format!("cannot open raw table {}: {e}", p.display())))?;
        rows.extend(stats::read_raw_csv(f)?);
    }
    let rep = build_report(&rows, cfg.delta, cfg.zeta, cfg.chi)?;
    rep.write(out)
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    let started = unix_now();
    let mut out = Out::new(cfg)?;
    match cmd {
        Command::Gen(_) => cmd_gen(cfg, &mut out)?,
        Command::Fpp(_) => cmd_fpp(cfg, &mut out)?,
        Command::Polymer(_) => cmd_polymer(cfg, &mut out)?,
        Command::Ensemble(_) => cmd_ensemble(cfg, &mut out)?,
        Command::Report(_) => cmd_report(cfg, &mut out)?,
    }
    out.meta(cmd.name(), started)
}

fn error_json(e: &Error, sub: &str) -> String {
    let mut ctx = BTreeMap::new();
    ctx.insert("subcommand", json!(sub));
    ctx.insert("exit_code", json!(e.exit_code()));
    match e {
        Error::Infeasible { layer } => {
            ctx.insert("layer", json!(layer));
        }
        Error::Capacity { requested, budget } => {
            ctx.insert("requested", json!(requested));
            ctx.insert("budget", json!(budget));
        }
        Error::AllReplicasFailed { n } => {
            ctx.insert("n", json!(n));
        }
        _ => {}
    }
    json!({ "code": e.code(), "message": e.to_string(), "context": ctx }).to_string()
}

fn run_command(cmd: &Command) -> Result<()> {
    let (path, overrides) = split_config(cmd.common())?;
    let cfg = parse_config(path.as_deref(), &overrides)?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(cmd, &cfg))
    } else {
        dispatch(cmd, &cfg)
    }
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the exit status. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let msg = json!({ "code": "usage", "message": e.to_string(), "context": {} });
                let _ = writeln!(std::io::stderr(), "{msg}");
                return 2;
            }
            let _ = e.print();
            return 0;
        }
    };
    match run_command(&cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", error_json(&e, cli.cmd.name()));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Beta;

    #[test]
    fn config_flag_anywhere() {
        let c = Common { config: None, overrides: vec!["--p=0.3".into(), "--config".into(), "a.json".into()] };
        let (p, rest) = split_config(&c).unwrap();
        assert_eq!(p, Some(PathBuf::from("a.json")));
        assert_eq!(rest, vec!["--p=0.3".to_string()]);
        let c = Common { config: None, overrides: vec!["--config=b.json".into()] };
        assert_eq!(split_config(&c).unwrap().0, Some(PathBuf::from("b.json")));
    }

    #[test]
    fn error_shape() {
        let e = Error::Infeasible { layer: 3 };
        let v: serde_json::Value = serde_json::from_str(&error_json(&e, "fpp")).unwrap();
        assert_eq!(v["code"], "infeasible");
        assert_eq!(v["context"]["layer"], 3);
        assert_eq!(v["context"]["exit_code"], 4);
    }

    #[test]
    fn beta_labels() {
        assert_eq!(Beta::NegInfinity.to_string(), "-inf");
    }
}
