//! Log-domain transfer sweeps.
//!
//! `w_k(y) = beta eta(k, y) + log sum_x exp(w_{k-1}(x) + log f(|x - y|_1))`
//! over `|x - y|_1 <= cap` inside the window, reduced per target with a
//! max pass followed by a sum pass.
//!
//! The error certificate bounds `log Z - log Z_swept` where `Z` is the
//! unconfined partition function. Every path dropped by the sweep leaves
//! the swept set at a first step, from a state `x` carrying prefix weight
//! `e^{w(x)}`, through a jump that is either longer than the cap (mass at
//! most `tail_bound`) or lands outside the window (mass computed exactly).
//! Its continuation weighs at most `max(1, e^{beta * remaining})`.
//! Summing gives `Leak >= Z - Z_swept`, and `log(1 + Leak / Z_swept)`
//! bounds the gap.

use serde::Serialize;

use super::kernel::KernelSpec;
use crate::env::{EnvSlab, Window};
use crate::error::{Error, Result};
use crate::params::{Beta, ModelParams};

/// Exponent below which a term is dropped as an underflow.
pub const UNDERFLOW_FLOOR: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PartitionMode {
    FiniteBeta,
    HardObstacle,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionResult {
    /// `log Z`; `-inf` when no open path exists in hard-obstacle mode.
    pub log_z: f64,
    pub cap_used: i64,
    /// Additive bound on `|log Z(swept) - log Z|`.
    pub error_certificate: f64,
    /// The part of the certificate due to mass leaving the window.
    pub edge_certificate: f64,
    pub mode: PartitionMode,
    pub beta: Beta,
    pub n: usize,
    pub half_width: i64,
    /// Some term fell below the underflow floor and was dropped.
    pub underflow: bool,
}

/// Streaming log-sum-exp accumulator (single stream only).
#[derive(Debug, Clone, Copy)]
struct LogAcc {
    max: f64,
    sum: f64,
}

impl LogAcc {
    fn new() -> Self {
        LogAcc { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Mass of the capped kernel ball around `x` that falls outside the window.
fn outside_mass(w: Window, x: [i64; 2], f_lin: &[f64]) -> f64 {
    let l = w.half_width;
    let out = |v: i64| v < -l || v > l;
    let cap = f_lin.len() as i64 - 1;
    let mut m = 0.0;
    for j in 1..=cap {
        let count = match w.d {
            1 => out(x[0] - j) as u32 + out(x[0] + j) as u32,
            _ => {
                let mut c = 0;
                for d0 in -j..=j {
                    let rem = j - d0.abs();
                    let a = x[0] + d0;
                    c += (out(a) || out(x[1] - rem)) as u32;
                    if rem > 0 {
                        c += (out(a) || out(x[1] + rem)) as u32;
                    }
                }
                c
            }
        };
        m += count as f64 * f_lin[j as usize];
    }
    m
}

fn shell_count(d: usize, j: i64) -> f64 {
    if d == 1 {
        2.0
    } else {
        4.0 * j as f64
    }
}

/// Bounding box (per axis, inclusive) of the finite entries.
fn active_box(w: Window, v: &[f64]) -> Option<[(i64, i64); 2]> {
    let mut bx = [(i64::MAX, i64::MIN); 2];
    let mut any = false;
    for (c, &x) in v.iter().enumerate() {
        if x > f64::NEG_INFINITY {
            any = true;
            let s = w.site(c);
            for i in 0..2 {
                bx[i].0 = bx[i].0.min(s[i]);
                bx[i].1 = bx[i].1.max(s[i]);
            }
        }
    }
    any.then_some(bx)
}

/// Sweep over the first `n` layers of `slab`.
pub(crate) fn transfer(slab: &EnvSlab, n: usize, kernel: &KernelSpec, beta: Beta) -> Result<PartitionResult> {
    if n == 0 || n > slab.n() {
        return Err(Error::LayerOutOfRange { layer: n, layers: slab.n() });
    }
    let w = slab.window;
    let cells = w.cells();
    let cap = kernel.cap.min(w.diameter());
    let all_logf = kernel.log_weights();
    let logf = &all_logf[..=cap as usize];
    let f_lin: Vec<f64> = logf.iter().map(|v| v.exp()).collect();
    // jumps longer than the window diameter always leave it
    let far: f64 = (cap + 1..=kernel.cap).map(|j| shell_count(w.d, j) * all_logf[j as usize].exp()).sum();
    let lost_always = kernel.tail_bound + far;
    let hard = beta.is_neg_infinity();
    let b = beta.finite().unwrap_or(0.0);

    let mut prev = vec![f64::NEG_INFINITY; cells];
    prev[w.index([0, 0]).unwrap()] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; cells];
    let mut leak = LogAcc::new();
    let mut edge_leak = LogAcc::new();
    let log_lost = lost_always.ln();
    let mut underflow = false;
    let l = w.half_width;

    for k in 1..=n {
        let Some(bx) = active_box(w, &prev) else {
            break;
        };
        let future = if b > 0.0 { b * (n - k + 1) as f64 } else { 0.0 };
        for (c, &v) in prev.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            let x = w.site(c);
            leak.add(v + log_lost + future);
            if !w.ball_inside(x, cap, 0) {
                let out = outside_mass(w, x, &f_lin);
                if out > 0.0 {
                    leak.add(v + out.ln() + future);
                    edge_leak.add(v + out.ln() + future);
                }
            }
        }

        let span = |i: usize| ((bx[i].0 - cap).max(-l), (bx[i].1 + cap).min(l));
        let (a0, b0) = span(0);
        let (a1, b1) = if w.d == 2 { span(1) } else { (0, 0) };
        next.fill(f64::NEG_INFINITY);
        for y0 in a0..=b0 {
            for y1 in a1..=b1 {
                let y = [y0, y1];
                let yc = w.index(y).unwrap();
                let eta = slab.bit(k, yc);
                if hard && eta {
                    continue;
                }
                // clip the source ball to the active box
                let mut m = f64::NEG_INFINITY;
                for_each_source(w, y, cap, &bx, |xc, dist| {
                    let t = prev[xc] + logf[dist];
                    if t > m {
                        m = t;
                    }
                });
                if m == f64::NEG_INFINITY {
                    continue;
                }
                let mut s = 0.0;
                for_each_source(w, y, cap, &bx, |xc, dist| {
                    let e = prev[xc] + logf[dist] - m;
                    if e >= UNDERFLOW_FLOOR {
                        s += e.exp();
                    } else if e > f64::NEG_INFINITY {
                        underflow = true;
                    }
                });
                next[yc] = m + s.ln() + if eta { b } else { 0.0 };
            }
        }
        std::mem::swap(&mut prev, &mut next);
    }

    // final reduction: max pass then sum pass
    let m = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let s: f64 = prev.iter().filter(|v| v.is_finite()).map(|&v| (v - m).exp()).sum();
        m + s.ln()
    };
    let rounding = n as f64 * 1e-14;
    let certify = |log_leak: f64| {
        if log_leak == f64::NEG_INFINITY {
            rounding
        } else if log_z == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (log_leak - log_z).exp().ln_1p() + rounding
        }
    };
    let error_certificate = certify(leak.value());
    let edge_certificate = certify(edge_leak.value());
    Ok(PartitionResult {
        log_z,
        cap_used: cap,
        error_certificate,
        edge_certificate,
        mode: if hard { PartitionMode::HardObstacle } else { PartitionMode::FiniteBeta },
        beta,
        n,
        half_width: l,
        underflow,
    })
}

/// Sources `x` within `cap` of `y`, inside the window and the active box.
#[inline]
fn for_each_source(w: Window, y: [i64; 2], cap: i64, bx: &[(i64, i64); 2], mut f: impl FnMut(usize, usize)) {
    match w.d {
        1 => {
            let lo = (y[0] - cap).max(bx[0].0);
            let hi = (y[0] + cap).min(bx[0].1);
            let base = w.half_width;
            for x in lo..=hi {
                f((x + base) as usize, (x - y[0]).unsigned_abs() as usize);
            }
        }
        _ => {
            let lo0 = (y[0] - cap).max(bx[0].0);
            let hi0 = (y[0] + cap).min(bx[0].1);
            for x0 in lo0..=hi0 {
                let d0 = (x0 - y[0]).abs();
                let rem = cap - d0;
                let lo1 = (y[1] - rem).max(bx[1].0);
                let hi1 = (y[1] + rem).min(bx[1].1);
                for x1 in lo1..=hi1 {
                    let xc = w.index([x0, x1]).unwrap();
                    f(xc, (d0 + (x1 - y[1]).abs()) as usize);
                }
            }
        }
    }
}

/// `log Z^{eta, beta}` at finite beta.
pub fn partition_function(slab: &EnvSlab, n: usize, params: &ModelParams, kernel: &KernelSpec) -> Result<PartitionResult> {
    params.validate()?;
    kernel.check_matches(params)?;
    let Beta::Finite(beta) = params.beta else {
        return Err(Error::Domain("partition_function needs a finite beta; use hard_obstacle_partition".into()));
    };
    let r = transfer(slab, n, kernel, params.beta)?;
    if beta > 0.0 && !(r.error_certificate <= 1.0) {
        return Err(Error::CertificateBlowup { certificate: r.error_certificate });
    }
    Ok(r)
}

/// `log Z^{eta, -inf}`: the walk restricted to open sites.
pub fn hard_obstacle_partition(slab: &EnvSlab, n: usize, params: &ModelParams, kernel: &KernelSpec) -> Result<PartitionResult> {
    params.validate()?;
    kernel.check_matches(params)?;
    transfer(slab, n, kernel, Beta::NegInfinity)
}

/// Either of the two sweeps according to `params.beta`.
pub fn log_partition(slab: &EnvSlab, n: usize, params: &ModelParams, kernel: &KernelSpec) -> Result<PartitionResult> {
    match params.beta {
        Beta::Finite(_) => partition_function(slab, n, params, kernel),
        Beta::NegInfinity => hard_obstacle_partition(slab, n, params, kernel),
    }
}

/// Default polymer half-width `ceil(n^{M + 2 theta})`, `M = 1 + 1/alpha`,
/// reduced to fit `max_cells`.
pub fn default_half_width(params: &ModelParams, n: usize, max_cells: u64) -> i64 {
    let ideal = crate::params::robust_ceil((n as f64).powf(params.confinement_exponent() + 2.0 * params.theta));
    let per_layer = (max_cells / n.max(1) as u64) as f64;
    let width = per_layer.powf(1.0 / params.d as f64).floor() as i64;
    let budget = ((width - 1) / 2).max(1);
    ideal.clamp(1, budget)
}

/// Sweeps on doubling windows until the window-edge part of the
/// certificate drops to `target`. The jump-cap part does not shrink with
/// the window and is left to the kernel's `epsilon`.
pub fn log_partition_auto(
    slab: EnvSlab,
    n: usize,
    params: &ModelParams,
    kernel: &KernelSpec,
    target: f64,
    max_cells: u64,
) -> Result<(EnvSlab, PartitionResult)> {
    crate::env::grow_until(slab, max_cells, |s| {
        let r = log_partition(s, n, params, kernel)?;
        let ok = r.edge_certificate <= target || s.is_synthetic();
        Ok((r, ok))
    })
}
