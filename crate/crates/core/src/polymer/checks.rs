use std::io::Write;

use serde::Serialize;

use super::kernel::KernelSpec;
use super::transfer::{hard_obstacle_partition, partition_function, transfer, PartitionResult};
use crate::env::EnvSlab;
use crate::error::{Error, Result};
use crate::fpp::PathRecord;
use crate::params::{Beta, ModelParams};

/// `F_n(gamma) = c2 T_n(gamma) - beta H_n(gamma)`.
pub fn path_free_energy(path: &PathRecord, params: &ModelParams) -> Result<f64> {
    match params.beta {
        Beta::Finite(b) => Ok(params.c2 * path.energy - b * path.hamiltonian as f64),
        Beta::NegInfinity => Err(Error::Domain("the path free energy is undefined at beta = -inf".into())),
    }
}

/// Energy cap `n^{1 + 2 alpha theta}` defining the restricted partition function.
pub fn restricted_energy_cap(params: &ModelParams, n: usize) -> f64 {
    (n as f64).powf(1.0 + 2.0 * params.alpha * params.theta)
}

/// Jump cap `n^{(1 + 2 alpha theta) / alpha}` of the sandwich surrogate.
pub fn restricted_jump_cap(params: &ModelParams, n: usize) -> f64 {
    restricted_energy_cap(params, n).powf(1.0 / params.alpha)
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaLimitReport {
    pub log_z_hard: f64,
    pub betas: Vec<f64>,
    pub log_z: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `log(1 + e^beta (1/Z_hard - 1))`, the largest possible residual on
    /// the swept path set.
    pub bounds: Vec<f64>,
    pub monotone: bool,
    pub within_bounds: bool,
}

/// Distance of `log Z^{beta}` from `log Z^{-inf}` along a decreasing grid of
/// negative betas, on one window and cap.
pub fn beta_limit_check(
    slab: &EnvSlab,
    n: usize,
    params: &ModelParams,
    kernel: &KernelSpec,
    betas: &[f64],
) -> Result<BetaLimitReport> {
    if betas.is_empty() || betas.iter().any(|b| !(b.is_finite() && *b < 0.0)) {
        return Err(Error::InvalidParams("beta_list must hold finite negative values".into()));
    }
    if betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("beta_list must be strictly decreasing".into()));
    }
    let hard = hard_obstacle_partition(slab, n, &params.with_beta(Beta::NegInfinity), kernel)?;
    let mut log_z = Vec::with_capacity(betas.len());
    let mut residuals = Vec::with_capacity(betas.len());
    let mut bounds = Vec::with_capacity(betas.len());
    for &b in betas {
        let r = partition_function(slab, n, &params.with_beta(Beta::Finite(b)), kernel)?;
        let res = if hard.log_z == f64::NEG_INFINITY { f64::INFINITY } else { (r.log_z - hard.log_z).abs() };
        let excess = (-hard.log_z).exp_m1().max(0.0);
        log_z.push(r.log_z);
        residuals.push(res);
        bounds.push((b.exp() * excess).ln_1p() + 1e-12 * hard.log_z.abs().max(1.0));
    }
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0] + 1e-13 * w[0].abs().max(1.0));
    let within_bounds = residuals.iter().zip(&bounds).all(|(r, b)| r <= b);
    Ok(BetaLimitReport {
        log_z_hard: hard.log_z,
        betas: betas.to_vec(),
        log_z,
        residuals,
        bounds,
        monotone,
        within_bounds,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlipReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of `log Z^{eta, beta} = beta n + log Z^{1 - eta, -beta}` on the
/// same window and cap.
pub fn flip_identity_check(slab: &EnvSlab, n: usize, params: &ModelParams, kernel: &KernelSpec) -> Result<FlipReport> {
    params.validate()?;
    kernel.check_matches(params)?;
    let Beta::Finite(b) = params.beta else {
        return Err(Error::Domain("the flip identity needs a finite beta".into()));
    };
    let lhs = transfer(slab, n, kernel, Beta::Finite(b))?.log_z;
    let flipped = slab.flipped();
    let rhs = b * n as f64 + transfer(&flipped, n, kernel, Beta::Finite(-b))?.log_z;
    Ok(FlipReport { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// `n log c1 - c2 T`: the weight of a single optimal open path.
pub fn ground_state_bound(kernel: &KernelSpec, n: usize, passage_time: f64) -> f64 {
    n as f64 * kernel.log_c1 - kernel.c2 * passage_time
}

/// CSV rows `beta,log_z,certificate` for a grid of betas.
pub fn beta_sweep<W: Write>(
    out: W,
    slab: &EnvSlab,
    n: usize,
    params: &ModelParams,
    kernel: &KernelSpec,
    betas: &[Beta],
) -> Result<Vec<PartitionResult>> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["beta", "log_z", "certificate"])?;
    let mut rows = Vec::with_capacity(betas.len());
    for &b in betas {
        let r = super::log_partition(slab, n, &params.with_beta(b), kernel)?;
        wtr.write_record([b.to_string(), format!("{:.17e}", r.log_z), format!("{:.17e}", r.error_certificate)])?;
        rows.push(r);
    }
    wtr.flush()?;
    Ok(rows)
}
