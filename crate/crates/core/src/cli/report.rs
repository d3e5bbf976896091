use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{num, opt, Out};
use crate::error::{Error, Result};
use crate::stats::{
    concentration_scan, estimate_free_energy, estimate_time_constant, max_jump_scan, ConcentrationReport,
    ConstantEstimate, MaxJumpRow, ReplicaRow, Target, STATUS_SKIPPED,
};

/// Aggregates of one raw table.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Hash shared by every raw row.
    pub config_hash: String,
    pub rows: usize,
    pub concentration: Vec<ConcentrationReport>,
    pub estimates: Vec<(Target, ConstantEstimate)>,
    pub max_jump: Vec<MaxJumpRow>,
    /// Per `(n, replica)`, whether each target's value was used.
    pub accounting: Vec<(usize, usize, u64, String, String)>,
    pub notes: Vec<String>,
}

fn targets_present(rows: &[ReplicaRow]) -> Vec<Target> {
    let mut t = Vec::new();
    if rows.iter().any(|r| r.fpp_status != STATUS_SKIPPED) {
        t.push(Target::Fpp);
    }
    if rows.iter().any(|r| r.polymer_status != STATUS_SKIPPED) {
        t.push(Target::Polymer);
    }
    t
}

/// Checks provenance and computes every aggregate.
pub fn build_report(rows: &[ReplicaRow], delta: f64, zeta: f64, chi: f64) -> Result<Report> {
    let hashes: BTreeSet<&str> = rows.iter().map(|r| r.config_hash.as_str()).collect();
    match hashes.len() {
        0 => return Err(Error::Insufficient("raw tables hold no rows".into())),
        1 => {}
        k => return Err(Error::Config(format!("raw tables mix {k} config hashes; refusing to aggregate"))),
    }
    let mut seen = BTreeMap::new();
    for r in rows {
        if seen.insert((r.n, r.replica), ()).is_some() {
            return Err(Error::Format(format!("duplicate row for n = {}, replica = {}", r.n, r.replica)));
        }
    }
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    let mut notes = Vec::new();
    let mut concentration = Vec::new();
    let mut estimates = Vec::new();
    for t in targets_present(rows) {
        match concentration_scan(rows, t, delta, zeta) {
            Ok(c) => concentration.push(c),
            Err(e) => notes.push(format!("{t:?}: concentration skipped: {e}")),
        }
        for &n in &ns {
            let est = match t {
                Target::Fpp => estimate_time_constant(rows, n, chi),
                Target::Polymer => estimate_free_energy(rows, n, chi),
            };
            match est {
                Ok(e) => estimates.push((t, e)),
                Err(e) => notes.push(format!("{t:?}: n = {n}: {e}")),
            }
        }
    }
    let mut accounting: Vec<_> =
        rows.iter().map(|r| (r.n, r.replica, r.seed, r.fpp_status.clone(), r.polymer_status.clone())).collect();
    accounting.sort_by_key(|a| (a.0, a.1));
    Ok(Report {
        config_hash: hashes.into_iter().next().unwrap_or_default().to_string(),
        rows: rows.len(),
        concentration,
        estimates,
        max_jump: max_jump_scan(rows, zeta),
        accounting,
        notes,
    })
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Fpp => "FPP",
        Target::Polymer => "POLYMER",
    }
}

impl Report {
    pub(super) fn write(&self, out: &mut Out) -> Result<()> {
        let h = &self.config_hash;
        if out.cfg.emit.csv() {
            let mut rows = Vec::new();
            for c in &self.concentration {
                for s in &c.per_n {
                    let f = c.slope;
                    rows.push(vec![
                        h.clone(),
                        target_name(c.target).into(),
                        s.n.to_string(),
                        s.count.to_string(),
                        s.excluded.to_string(),
                        num(s.mean),
                        num(s.sd),
                        num(s.median),
                        num(s.tail_threshold),
                        num(s.tail_frequency),
                        opt(s.max_jump_q50),
                        opt(s.max_jump_q90),
                        opt(s.max_jump_max),
                        opt(s.max_jump_fraction),
                        opt(f.map(|f| f.slope)),
                        opt(f.map(|f| f.stderr)),
                        opt(f.map(|f| f.ci_low)),
                        opt(f.map(|f| f.ci_high)),
                    ]);
                }
            }
            out.csv(
                "report_concentration.csv",
                &[
                    "config_hash",
                    "target",
                    "n",
                    "count",
                    "excluded",
                    "mean",
                    "sd",
                    "median",
                    "tail_threshold",
                    "tail_frequency",
                    "max_jump_q50",
                    "max_jump_q90",
                    "max_jump_max",
                    "max_jump_fraction",
                    "slope",
                    "slope_stderr",
                    "slope_ci_low",
                    "slope_ci_high",
                ],
                &rows,
            )?;
            let rows: Vec<Vec<String>> = self
                .estimates
                .iter()
                .map(|(t, e)| {
                    vec![
                        h.clone(),
                        target_name(*t).into(),
                        e.n_used.to_string(),
                        num(e.value),
                        num(e.stderr),
                        e.replicas_used.to_string(),
                        e.excluded.to_string(),
                        num(e.rate_margin),
                    ]
                })
                .collect();
            out.csv(
                "report_estimates.csv",
                &["config_hash", "target", "n", "value", "stderr", "replicas_used", "excluded", "rate_margin"],
                &rows,
            )?;
            let rows: Vec<Vec<String>> = self
                .max_jump
                .iter()
                .map(|m| vec![h.clone(), m.n.to_string(), m.count.to_string(), num(m.fraction), num(m.stderr)])
                .collect();
            out.csv("report_max_jump.csv", &["config_hash", "n", "count", "fraction", "stderr"], &rows)?;
            let rows: Vec<Vec<String>> = self
                .accounting
                .iter()
                .map(|(n, r, s, f, p)| vec![h.clone(), n.to_string(), r.to_string(), s.to_string(), f.clone(), p.clone()])
                .collect();
            out.csv("report_rows.csv", &["config_hash", "n", "replica", "seed", "fpp_status", "polymer_status"], &rows)?;
        }
        if out.cfg.emit.json() {
            out.json_with_hash("report.json", self, h)?;
        }
        Ok(())
    }
}
