use rayon::prelude::*;
use serde::Serialize;

use super::{fpp_instance, polymer_instance, Knobs, ViewMode};
use crate::env::{regularize, EnvSlab, PointView};
use crate::error::{Error, Result};
use crate::fpp::{self, continuation_cost, face_to_face, passage_time};
use crate::params::{box_side, Beta, ModelParams};
use crate::polymer::kernel_normalizer;
use crate::seed::{hash64, replica_seed};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (v / k).sqrt())
}

/// One size-`2n` replica of the almost super-additivity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperaddSample {
    pub t_2n: f64,
    pub t_n: f64,
    /// `Phi_n(n, 2n)`: free start in `|x|_inf < min(n^M, L)` at layer `n`.
    pub phi: f64,
    /// Cheapest continuation from the endpoint of the optimal `n`-path.
    pub continuation: f64,
    /// `T_2n - T_n - Phi`.
    pub gap: f64,
    /// `T_2n <= T_n + continuation`.
    pub glued: bool,
    pub exact: bool,
}

fn superadd_view<V: PointView + ?Sized>(view: &V, n: usize, params: &ModelParams) -> Result<SuperaddSample> {
    let t2 = passage_time(view, 2 * n, params)?;
    let t1 = passage_time(view, n, params)?;
    let l = view.window().half_width as f64;
    let m = params.confinement_exponent();
    let phi = face_to_face(view, n, 2 * n, (n as f64).powf(m).min(l), params)?;
    let cont = continuation_cost(view, n, 2 * n, t1.path.end(), params)?;
    let glue = t1.value + cont.value;
    Ok(SuperaddSample {
        t_2n: t2.value,
        t_n: t1.value,
        phi: phi.value,
        continuation: cont.value,
        gap: t2.value - t1.value - phi.value,
        glued: t2.value <= glue + 1e-12 * glue.max(1.0),
        exact: t2.exact && t1.exact && phi.exact && cont.exact,
    })
}

/// The comparison on one slab of at least `2n` layers.
pub fn superadditivity_on_slab(slab: &EnvSlab, n: usize, params: &ModelParams, view: ViewMode) -> Result<SuperaddSample> {
    match view {
        ViewMode::Raw => superadd_view(slab, n, params),
        ViewMode::Regularized => superadd_view(&regularize(slab, params.theta)?, n, params),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperaddReport {
    pub n: usize,
    pub samples: Vec<SuperaddSample>,
    pub failures: usize,
    pub gap_min: f64,
    pub gap_mean: f64,
    pub negative_gap_fraction: f64,
    /// Replicas where the glued path beat the optimum, which cannot happen.
    pub glue_violations: usize,
    pub mean_t_n: f64,
    pub mean_t_2n: f64,
    /// `2 mean(T_n) - mean(T_2n)` and its ratio to `n^chi`.
    pub mean_defect: f64,
    pub defect_over_n_chi: f64,
    pub all_exact: bool,
}

/// `T_2n`, `T_n` and `Phi_n(n, 2n)` per replica on a shared slab.
pub fn superadditivity_check(
    params: &ModelParams,
    n: usize,
    replicas: usize,
    seed: u64,
    chi: f64,
    knobs: &Knobs,
) -> Result<SuperaddReport> {
    params.validate()?;
    if n == 0 || replicas == 0 {
        return Err(Error::InvalidParams("n and replicas must be >= 1".into()));
    }
    let out: Vec<Result<SuperaddSample>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (slab, _) = fpp_instance(params, 2 * n, replica_seed(seed, 2 * n, r), knobs)?;
            superadditivity_on_slab(&slab, n, params, knobs.view)
        })
        .collect();
    let failures = out.iter().filter(|r| r.is_err()).count();
    let samples: Vec<SuperaddSample> = out.into_iter().filter_map(|r| r.ok()).collect();
    if samples.is_empty() {
        return Err(Error::AllReplicasFailed { n: 2 * n });
    }
    let k = samples.len() as f64;
    let gaps: Vec<f64> = samples.iter().map(|s| s.gap).collect();
    let mean_t_n = samples.iter().map(|s| s.t_n).sum::<f64>() / k;
    let mean_t_2n = samples.iter().map(|s| s.t_2n).sum::<f64>() / k;
    let mean_defect = 2.0 * mean_t_n - mean_t_2n;
    Ok(SuperaddReport {
        n,
        failures,
        gap_min: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        gap_mean: gaps.iter().sum::<f64>() / k,
        negative_gap_fraction: gaps.iter().filter(|&&g| g < 0.0).count() as f64 / k,
        glue_violations: samples.iter().filter(|s| !s.glued).count(),
        mean_t_n,
        mean_t_2n,
        mean_defect,
        defect_over_n_chi: mean_defect / (n as f64).powf(chi),
        all_exact: samples.iter().all(|s| s.exact),
        samples,
    })
}

/// Continuity grid: obstacle densities for `mu_p`, or inverse
/// temperatures for `phi(p, beta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Grid {
    P(Vec<f64>),
    Beta(Vec<Beta>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub label: String,
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridJump {
    pub from: usize,
    pub diff: f64,
    pub combined_stderr: f64,
    /// `|diff| <= 3 * combined_stderr`.
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub axis: String,
    pub n: usize,
    pub replicas: usize,
    pub points: Vec<CurvePoint>,
    pub jumps: Vec<GridJump>,
    pub all_within: bool,
}

/// Coupled-seed curve: replica `r` uses the same master seed at every
/// grid point, so neighbouring points see nested obstacle fields.
pub fn continuity_scan(
    params: &ModelParams,
    grid: &Grid,
    n: usize,
    replicas: usize,
    seed: u64,
    knobs: &Knobs,
) -> Result<ContinuityReport> {
    params.validate()?;
    if replicas < 2 {
        return Err(Error::InvalidParams("replicas must be >= 2".into()));
    }
    let xs: Vec<f64> = match grid {
        Grid::P(ps) => ps.clone(),
        Grid::Beta(bs) => bs.iter().map(|b| b.as_f64()).collect(),
    };
    if xs.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    let up = xs.windows(2).all(|w| w[0] <= w[1]);
    let down = xs.windows(2).all(|w| w[0] >= w[1]);
    if !(up || down) {
        return Err(Error::InvalidParams("grid must be sorted".into()));
    }
    let seeds: Vec<u64> = (0..replicas).map(|r| replica_seed(seed, n, r)).collect();
    let mut points = Vec::with_capacity(xs.len());
    match grid {
        Grid::P(ps) => {
            for &p in ps {
                let q = params.with_p(p);
                q.validate()?;
                let vals: Vec<Result<f64>> = seeds
                    .par_iter()
                    .map(|&s| {
                        let (_, r) = fpp_instance(&q, n, s, knobs)?;
                        Ok(r.scaled_value.unwrap_or(r.value))
                    })
                    .collect();
                points.push(curve_point(p.to_string(), p, n, vals));
            }
        }
        Grid::Beta(bs) => {
            let kernel = kernel_normalizer(params, knobs.epsilon)?;
            for &b in bs {
                let q = params.with_beta(b);
                let vals: Vec<Result<f64>> = seeds
                    .par_iter()
                    .map(|&s| {
                        let (_, r) = polymer_instance(&q, &kernel, n, s, knobs)?;
                        if r.log_z.is_finite() {
                            Ok(r.log_z)
                        } else {
                            Err(Error::Infeasible { layer: 0 })
                        }
                    })
                    .collect();
                points.push(curve_point(b.to_string(), b.as_f64(), n, vals));
            }
        }
    }
    let jumps: Vec<GridJump> = points
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let diff = w[1].value - w[0].value;
            let se = w[0].stderr.hypot(w[1].stderr);
            GridJump { from: i, diff, combined_stderr: se, within: diff.abs() <= 3.0 * se }
        })
        .collect();
    Ok(ContinuityReport {
        axis: match grid {
            Grid::P(_) => "p".into(),
            Grid::Beta(_) => "beta".into(),
        },
        n,
        replicas,
        all_within: jumps.iter().all(|j| j.within),
        points,
        jumps,
    })
}

fn curve_point(label: String, x: f64, n: usize, vals: Vec<Result<f64>>) -> CurvePoint {
    let ok: Vec<f64> = vals.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
    let failures = vals.len() - ok.len();
    let (m, se) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { mean_se(&ok) };
    CurvePoint { label, x, value: m / n as f64, stderr: se / n as f64, count: ok.len(), failures }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HdRow {
    pub p: f64,
    pub phi: f64,
    pub stderr: f64,
    /// `phi * (1 - p)^{alpha/d}`.
    pub rescaled: f64,
    pub rescaled_stderr: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdTrend {
    pub rows: Vec<HdRow>,
    /// Successive differences of the rescaled values.
    pub diffs: Vec<f64>,
    /// The absolute differences never grow.
    pub flattening: bool,
}

/// Rescales `(p, phi, stderr)` triples by `(1 - p)^{alpha/d}`.
pub fn hd_rescale(points: &[(f64, f64, f64)], alpha: f64, d: usize) -> Result<HdTrend> {
    if !(alpha > 0.0 && alpha.is_finite()) || d == 0 {
        return Err(Error::InvalidParams(format!("exponent alpha/d must be positive, got alpha = {alpha}, d = {d}")));
    }
    if points.iter().any(|&(p, _, _)| !(0.0..1.0).contains(&p)) || points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParams("p_list must increase inside [0, 1)".into()));
    }
    let e = alpha / d as f64;
    let rows: Vec<HdRow> = points
        .iter()
        .map(|&(p, phi, se)| {
            let f = (1.0 - p).powf(e);
            HdRow { p, phi, stderr: se, rescaled: phi * f, rescaled_stderr: se * f, failures: 0 }
        })
        .collect();
    let diffs: Vec<f64> = rows.windows(2).map(|w| w[1].rescaled - w[0].rescaled).collect();
    let flattening = diffs.windows(2).all(|w| w[1].abs() <= w[0].abs());
    Ok(HdTrend { rows, diffs, flattening })
}

/// `phi_hat(p, -inf) (1 - p)^{alpha/d}` along `p_list`. A trend
/// diagnostic only.
pub fn hd_trend_check(
    params: &ModelParams,
    p_list: &[f64],
    n: usize,
    replicas: usize,
    seed: u64,
    knobs: &Knobs,
) -> Result<HdTrend> {
    let q = params.with_beta(Beta::NegInfinity);
    q.validate()?;
    let grid = Grid::P(p_list.to_vec());
    // validates sortedness and the exponent up front
    hd_rescale(&p_list.iter().map(|&p| (p, 0.0, 0.0)).collect::<Vec<_>>(), q.alpha, q.d)?;
    let kernel = kernel_normalizer(&q, knobs.epsilon)?;
    let seeds: Vec<u64> = (0..replicas).map(|r| replica_seed(seed, n, r)).collect();
    let mut pts = Vec::new();
    let mut fails = Vec::new();
    let Grid::P(ps) = grid else { unreachable!() };
    for p in ps {
        let qp = q.with_p(p);
        let vals: Vec<Result<f64>> = seeds
            .par_iter()
            .map(|&s| {
                let (_, r) = polymer_instance(&qp, &kernel, n, s, knobs)?;
                if r.log_z.is_finite() {
                    Ok(r.log_z)
                } else {
                    Err(Error::Infeasible { layer: 0 })
                }
            })
            .collect();
        let c = curve_point(String::new(), p, n, vals);
        pts.push((p, c.value, c.stderr));
        fails.push(c.failures);
    }
    let mut trend = hd_rescale(&pts, q.alpha, q.d)?;
    for (row, f) in trend.rows.iter_mut().zip(fails) {
        row.failures = f;
    }
    Ok(trend)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementReport {
    pub n: usize,
    pub theta: f64,
    pub box_side: i64,
    pub replicas: usize,
    pub compared: usize,
    pub failures: usize,
    /// Replicas with `T_n(omega) != T_n(omega_bar)`.
    pub mismatches: usize,
    pub frequency: f64,
    pub stderr: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
}

/// How often the theta-regularization changes the passage time.
pub fn regularization_agreement(
    params: &ModelParams,
    n: usize,
    replicas: usize,
    seed: u64,
    knobs: &Knobs,
) -> Result<AgreementReport> {
    params.validate()?;
    let raw_knobs = Knobs { view: ViewMode::Raw, ..*knobs };
    let gaps: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (slab, raw) = fpp_instance(params, n, replica_seed(seed, n, r), &raw_knobs)?;
            let (_, reg) = fpp::passage_time_auto(slab, n, params, true, knobs.max_cells)?;
            Ok(raw.value - reg.value)
        })
        .collect();
    let failures = gaps.iter().filter(|g| g.is_err()).count();
    let gaps: Vec<f64> = gaps.into_iter().filter_map(|g| g.ok()).collect();
    if gaps.is_empty() {
        return Err(Error::AllReplicasFailed { n });
    }
    let k = gaps.len() as f64;
    let mismatches = gaps.iter().filter(|&&g| g != 0.0).count();
    let f = mismatches as f64 / k;
    Ok(AgreementReport {
        n,
        theta: params.theta,
        box_side: box_side(n, params.theta),
        replicas,
        compared: gaps.len(),
        failures,
        mismatches,
        frequency: f,
        stderr: (f * (1.0 - f) / k).sqrt(),
        mean_gap: gaps.iter().sum::<f64>() / k,
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivitySummary {
    pub n: usize,
    pub layers: Vec<usize>,
    pub trials: usize,
    pub per_layer_max: Vec<f64>,
    pub max_diff: f64,
    /// `4 n^{zeta alpha}`.
    pub bound: f64,
    pub violations: usize,
    pub all_exact: bool,
}

/// Resample-one-layer sensitivity of `T_n(omega_bar)` on one replica.
pub fn sensitivity_summary(
    params: &ModelParams,
    n: usize,
    layers: &[usize],
    trials: usize,
    seed: u64,
    knobs: &Knobs,
) -> Result<SensitivitySummary> {
    let reg_knobs = Knobs { view: ViewMode::Regularized, ..*knobs };
    let (slab, _) = fpp_instance(params, n, replica_seed(seed, n, 0), &reg_knobs)?;
    // room for the resampled optimum to move
    let slab = slab.regrow(slab.half_width() * 2, knobs.max_cells).unwrap_or(slab);
    let per: Vec<Result<fpp::Sensitivity>> = layers
        .par_iter()
        .map(|&m| fpp::resample_sensitivity(&slab, m, trials, params, hash64(&[seed, n as u64, m as u64])))
        .collect();
    let per: Vec<fpp::Sensitivity> = per.into_iter().collect::<Result<_>>()?;
    Ok(SensitivitySummary {
        n,
        layers: layers.to_vec(),
        trials,
        per_layer_max: per.iter().map(|s| s.max_diff).collect(),
        max_diff: per.iter().map(|s| s.max_diff).fold(0.0, f64::max),
        bound: per.first().map_or(f64::NAN, |s| s.bound),
        violations: per.iter().map(|s| s.violations).sum(),
        all_exact: per.iter().all(|s| s.all_exact),
    })
}
