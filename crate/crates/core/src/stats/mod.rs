//! Replica ensembles and the estimators built on them.
//!
//! Replica `r` of size `n` draws its environment from
//! `replica_seed(master_seed, n, r)`. Because every bit is a function of
//! its coordinates and the layer seed, the same replica seen through
//! different windows, and at different `p`, shares one coupled field.

mod diagnostics;
mod estimate;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    continuity_scan, hd_rescale, hd_trend_check, regularization_agreement, sensitivity_summary,
    superadditivity_check, superadditivity_on_slab, AgreementReport, ContinuityReport, CurvePoint, Grid,
    GridJump, HdRow, HdTrend, SensitivitySummary, SuperaddReport, SuperaddSample,
};
pub use estimate::{
    concentration_scan, estimate_free_energy, estimate_time_constant, fit_log_slope, max_jump_scan, quantile,
    ConcentrationReport, ConstantEstimate, MaxJumpRow, NStats, SlopeFit,
};

use crate::env::{self, EnvSlab};
use crate::error::{Error, Result};
use crate::fpp::{self, PassageResult};
use crate::params::ModelParams;
use crate::polymer::{self, KernelSpec, PartitionResult};
use crate::seed::replica_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Target {
    Fpp,
    Polymer,
}

/// Which point configuration the passage time is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    #[default]
    Raw,
    Regularized,
}

/// Per-instance numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    pub view: ViewMode,
    /// Starting FPP half-width; grown until the result is certified.
    pub fpp_half_width: Option<i64>,
    /// Fixed polymer half-width. When absent the window starts small and
    /// doubles until the edge certificate reaches `certificate_target`.
    pub polymer_half_width: Option<i64>,
    pub max_cells: u64,
    /// Kernel tail tolerance.
    pub epsilon: f64,
    pub certificate_target: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            view: ViewMode::Raw,
            fpp_half_width: None,
            polymer_half_width: None,
            max_cells: env::DEFAULT_MAX_CELLS,
            epsilon: 1e-30,
            certificate_target: 1e-10,
        }
    }
}

impl Knobs {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.certificate_target > 0.0) {
            return Err(Error::InvalidParams("epsilon and certificate_target must be > 0".into()));
        }
        for h in [self.fpp_half_width, self.polymer_half_width].into_iter().flatten() {
            if h < 1 {
                return Err(Error::InvalidParams(format!("half-width must be >= 1, got {h}")));
            }
        }
        Ok(())
    }
}

/// Starting FPP half-width `max(8, 2 ceil(sqrt n))`.
pub fn default_fpp_half_width(n: usize) -> i64 {
    (2 * (n as f64).sqrt().ceil() as i64).max(8)
}

/// Starting polymer half-width `8 ceil(sqrt n) + 2 cap`.
pub fn default_polymer_half_width(n: usize, kernel: &KernelSpec) -> i64 {
    8 * (n as f64).sqrt().ceil() as i64 + 2 * kernel.cap.max(1)
}

/// One certified passage time on replica `seed`.
pub fn fpp_instance(params: &ModelParams, n: usize, seed: u64, knobs: &Knobs) -> Result<(EnvSlab, PassageResult)> {
    let h = knobs.fpp_half_width.unwrap_or_else(|| default_fpp_half_width(n));
    let slab = EnvSlab::generate_with_budget(params, n, h, seed, knobs.max_cells)?;
    fpp::passage_time_auto(slab, n, params, knobs.view == ViewMode::Regularized, knobs.max_cells)
}

/// One partition function on replica `seed`, at `params.beta`.
pub fn polymer_instance(
    params: &ModelParams,
    kernel: &KernelSpec,
    n: usize,
    seed: u64,
    knobs: &Knobs,
) -> Result<(EnvSlab, PartitionResult)> {
    match knobs.polymer_half_width {
        Some(h) => {
            let slab = EnvSlab::generate_with_budget(params, n, h, seed, knobs.max_cells)?;
            let r = polymer::log_partition(&slab, n, params, kernel)?;
            Ok((slab, r))
        }
        None => {
            let h = default_polymer_half_width(n, kernel);
            let slab = EnvSlab::generate_with_budget(params, n, h, seed, knobs.max_cells)?;
            polymer::log_partition_auto(slab, n, params, kernel, knobs.certificate_target, knobs.max_cells)
        }
    }
}

/// Everything that determines a raw ensemble table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub targets: Vec<Target>,
    pub knobs: Knobs,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.knobs.validate()?;
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("n_list must be non-empty, positive and strictly increasing".into()));
        }
        if self.replicas < 2 {
            return Err(Error::InvalidParams(format!("replicas must be >= 2, got {}", self.replicas)));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidParams("targets must name FPP and/or POLYMER".into()));
        }
        Ok(())
    }

    fn wants(&self, t: Target) -> bool {
        self.targets.contains(&t)
    }
}

/// One line of the raw table. Missing values serialize as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub config_hash: String,
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    /// `ok`, `skipped`, or the error code of the failure.
    pub fpp_status: String,
    pub t_hat: Option<f64>,
    /// `s_p^alpha T` for `0 < p < 1`; equal to `t_hat` at `p = 0`, where
    /// the passage time is zero.
    pub t_scaled: Option<f64>,
    pub exact: Option<bool>,
    pub max_jump: Option<i64>,
    pub hamiltonian: Option<u32>,
    pub end_x0: Option<i64>,
    pub end_x1: Option<i64>,
    pub fpp_half_width: Option<i64>,
    pub polymer_status: String,
    pub log_z: Option<f64>,
    pub certificate: Option<f64>,
    pub polymer_half_width: Option<i64>,
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_SKIPPED: &str = "skipped";

impl ReplicaRow {
    fn new(n: usize, replica: usize, seed: u64) -> Self {
        ReplicaRow {
            config_hash: String::new(),
            n,
            replica,
            seed,
            fpp_status: STATUS_SKIPPED.into(),
            t_hat: None,
            t_scaled: None,
            exact: None,
            max_jump: None,
            hamiltonian: None,
            end_x0: None,
            end_x1: None,
            fpp_half_width: None,
            polymer_status: STATUS_SKIPPED.into(),
            log_z: None,
            certificate: None,
            polymer_half_width: None,
        }
    }

    pub fn fpp_ok(&self) -> bool {
        self.fpp_status == STATUS_OK
    }

    pub fn polymer_ok(&self) -> bool {
        self.polymer_status == STATUS_OK
    }

    /// The observable of `target`, if this replica produced it.
    pub fn value(&self, target: Target) -> Option<f64> {
        match target {
            Target::Fpp => self.t_scaled.filter(|_| self.fpp_ok()),
            Target::Polymer => self.log_z.filter(|_| self.polymer_ok()),
        }
    }
}

fn run_replica(spec: &EnsembleSpec, kernel: Option<&KernelSpec>, n: usize, r: usize) -> ReplicaRow {
    let seed = replica_seed(spec.master_seed, n, r);
    let mut row = ReplicaRow::new(n, r, seed);
    let params = &spec.params;
    if spec.wants(Target::Fpp) {
        match fpp_instance(params, n, seed, &spec.knobs) {
            Ok((slab, res)) => {
                row.fpp_status = STATUS_OK.into();
                row.t_hat = Some(res.value);
                row.t_scaled = Some(res.scaled_value.unwrap_or(res.value));
                row.exact = Some(res.exact);
                row.max_jump = Some(res.path.max_jump);
                row.hamiltonian = Some(res.path.hamiltonian);
                let end = res.path.end();
                row.end_x0 = Some(end[0]);
                row.end_x1 = (params.d == 2).then_some(end[1]);
                row.fpp_half_width = Some(slab.half_width());
            }
            Err(e) => row.fpp_status = e.code().into(),
        }
    }
    if let Some(kernel) = kernel {
        match polymer_instance(params, kernel, n, seed, &spec.knobs) {
            Ok((slab, res)) => {
                row.polymer_status = STATUS_OK.into();
                row.log_z = Some(res.log_z);
                row.certificate = Some(res.error_certificate);
                row.polymer_half_width = Some(slab.half_width());
            }
            Err(e) => row.polymer_status = e.code().into(),
        }
    }
    row
}

/// Runs every `(n, replica)` pair. Rows come back ordered by `n` then
/// replica whatever the thread schedule.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<Vec<ReplicaRow>> {
    spec.validate()?;
    let kernel = if spec.wants(Target::Polymer) {
        Some(polymer::kernel_normalizer(&spec.params, spec.knobs.epsilon)?)
    } else {
        None
    };
    let jobs: Vec<(usize, usize)> =
        spec.n_list.iter().flat_map(|&n| (0..spec.replicas).map(move |r| (n, r))).collect();
    let rows: Vec<ReplicaRow> = jobs.par_iter().map(|&(n, r)| run_replica(spec, kernel.as_ref(), n, r)).collect();
    for &n in &spec.n_list {
        let at_n = || rows.iter().filter(|row| row.n == n);
        let fpp_dead = spec.wants(Target::Fpp) && at_n().all(|r| !r.fpp_ok());
        let poly_dead = spec.wants(Target::Polymer) && at_n().all(|r| !r.polymer_ok());
        if fpp_dead || poly_dead {
            return Err(Error::AllReplicasFailed { n });
        }
    }
    Ok(rows)
}

/// Sets the config hash on every row.
pub fn stamp(rows: &mut [ReplicaRow], config_hash: &str) {
    rows.iter_mut().for_each(|r| r.config_hash = config_hash.to_string());
}

/// Writes the raw table as CSV with a header row.
pub fn write_raw_csv<W: Write>(out: W, rows: &[ReplicaRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(RAW_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub const RAW_COLUMNS: [&str; 17] = [
    "config_hash",
    "n",
    "replica",
    "seed",
    "fpp_status",
    "t_hat",
    "t_scaled",
    "exact",
    "max_jump",
    "hamiltonian",
    "end_x0",
    "end_x1",
    "fpp_half_width",
    "polymer_status",
    "log_z",
    "certificate",
    "polymer_half_width",
];

pub fn read_raw_csv<R: Read>(input: R) -> Result<Vec<ReplicaRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RAW_COLUMNS) {
        return Err(Error::Format(format!("raw table columns differ from {RAW_COLUMNS:?}")));
    }
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

/// Exclusion accounting for one target at one `n`.
pub fn failure_counts(rows: &[ReplicaRow], n: usize, target: Target) -> (usize, usize) {
    let at: Vec<&ReplicaRow> = rows.iter().filter(|r| r.n == n).collect();
    let ok = at.iter().filter(|r| r.value(target).is_some()).count();
    (ok, at.len() - ok)
}
