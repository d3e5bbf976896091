use std::collections::BTreeSet;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ReplicaRow, Target};
use crate::error::{Error, Result};

/// A per-step constant with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub value: f64,
    /// Standard error of `value`. Zero for a degenerate ensemble.
    pub stderr: f64,
    pub n_used: usize,
    pub replicas_used: usize,
    pub excluded: usize,
    /// `n^{chi - 1}`, the per-step allowance of the non-random fluctuation
    /// bounds up to their constant.
    pub rate_margin: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

fn per_step(rows: &[ReplicaRow], n_star: usize, chi: f64, target: Target) -> Result<ConstantEstimate> {
    let at: Vec<&ReplicaRow> = rows.iter().filter(|r| r.n == n_star).collect();
    if at.is_empty() {
        return Err(Error::Insufficient(format!("no rows at n = {n_star}")));
    }
    let xs: Vec<f64> = at.iter().filter_map(|r| r.value(target)).collect();
    if xs.len() < 2 {
        return Err(Error::Insufficient(format!("{} usable replicas at n = {n_star}, need 2", xs.len())));
    }
    let (m, sd) = mean_sd(&xs);
    let n = n_star as f64;
    Ok(ConstantEstimate {
        value: m / n,
        stderr: sd / ((xs.len() as f64).sqrt() * n),
        n_used: n_star,
        replicas_used: xs.len(),
        excluded: at.len() - xs.len(),
        rate_margin: n.powf(chi - 1.0),
    })
}

/// `mu_hat = mean(s_p^alpha T_n) / n` at `n = n_star`.
pub fn estimate_time_constant(rows: &[ReplicaRow], n_star: usize, chi: f64) -> Result<ConstantEstimate> {
    per_step(rows, n_star, chi, Target::Fpp)
}

/// `phi_hat = mean(log Z_n) / n` at `n = n_star`.
pub fn estimate_free_energy(rows: &[ReplicaRow], n_star: usize, chi: f64) -> Result<ConstantEstimate> {
    per_step(rows, n_star, chi, Target::Polymer)
}

/// Least-squares line through `(ln n, ln sd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Two-sided 95% t interval with `points - 2` degrees of freedom.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Fits `ln y = a + b ln x`. Needs three points with positive `y`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!("{} points, need 3 for a slope with an error", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain("log fit needs positive coordinates".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log fit needs distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = k - 2.0;
    let stderr = (rss / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?.inverse_cdf(0.975);
    Ok(SlopeFit { slope, intercept, stderr, ci_low: slope - t * stderr, ci_high: slope + t * stderr, points: xs.len() })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NStats {
    pub n: usize,
    pub count: usize,
    pub excluded: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    /// `n^{1/2 + delta}`.
    pub tail_threshold: f64,
    /// Fraction of replicas with `|X - mean| > tail_threshold`.
    pub tail_frequency: f64,
    pub max_jump_q50: Option<f64>,
    pub max_jump_q90: Option<f64>,
    pub max_jump_max: Option<f64>,
    /// Fraction of replicas with max jump at most `n^zeta`.
    pub max_jump_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub target: Target,
    pub delta: f64,
    pub zeta: f64,
    pub per_n: Vec<NStats>,
    /// Fit of `ln sd` on `ln n` over the non-degenerate sizes.
    pub slope: Option<SlopeFit>,
    /// Sizes with zero spread, left out of the fit.
    pub degenerate: Vec<usize>,
    /// Every size had zero spread.
    pub deterministic: bool,
    pub rows_used: usize,
}

/// Per-`n` spread, tail frequencies and the fluctuation-exponent fit.
pub fn concentration_scan(rows: &[ReplicaRow], target: Target, delta: f64, zeta: f64) -> Result<ConcentrationReport> {
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    if ns.len() < 3 {
        return Err(Error::Insufficient(format!("{} distinct n, need 3", ns.len())));
    }
    let mut per_n = Vec::new();
    let mut degenerate = Vec::new();
    let mut points = Vec::new();
    let mut rows_used = 0;
    for &n in &ns {
        let at: Vec<&ReplicaRow> = rows.iter().filter(|r| r.n == n).collect();
        let mut xs: Vec<f64> = at.iter().filter_map(|r| r.value(target)).collect();
        if xs.len() < 2 {
            return Err(Error::Insufficient(format!("{} usable replicas at n = {n}", xs.len())));
        }
        rows_used += xs.len();
        let (mean, sd) = mean_sd(&xs);
        let thr = (n as f64).powf(0.5 + delta);
        let tail = xs.iter().filter(|x| (*x - mean).abs() > thr).count() as f64 / xs.len() as f64;
        xs.sort_by(f64::total_cmp);
        let mut jumps: Vec<f64> = if target == Target::Fpp {
            at.iter().filter(|r| r.fpp_ok()).filter_map(|r| r.max_jump).map(|j| j as f64).collect()
        } else {
            Vec::new()
        };
        jumps.sort_by(f64::total_cmp);
        let has_jumps = !jumps.is_empty();
        let cut = (n as f64).powf(zeta);
        per_n.push(NStats {
            n,
            count: xs.len(),
            excluded: at.len() - xs.len(),
            mean,
            sd,
            median: quantile(&xs, 0.5),
            tail_threshold: thr,
            tail_frequency: tail,
            max_jump_q50: has_jumps.then(|| quantile(&jumps, 0.5)),
            max_jump_q90: has_jumps.then(|| quantile(&jumps, 0.9)),
            max_jump_max: jumps.last().copied(),
            max_jump_fraction: has_jumps
                .then(|| jumps.iter().filter(|&&j| j <= cut).count() as f64 / jumps.len() as f64),
        });
        if sd > 0.0 {
            points.push((n as f64, sd));
        } else {
            degenerate.push(n);
        }
    }
    let slope = if points.len() >= 3 { Some(fit_log_slope(&points)?) } else { None };
    Ok(ConcentrationReport {
        target,
        delta,
        zeta,
        deterministic: degenerate.len() == per_n.len(),
        per_n,
        slope,
        degenerate,
        rows_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxJumpRow {
    pub n: usize,
    pub count: usize,
    pub fraction: f64,
    pub stderr: f64,
}

/// Per `n`, the fraction of replicas whose optimal path never jumps
/// farther than `n^zeta`.
pub fn max_jump_scan(rows: &[ReplicaRow], zeta: f64) -> Vec<MaxJumpRow> {
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    ns.into_iter()
        .filter_map(|n| {
            let js: Vec<i64> = rows.iter().filter(|r| r.n == n && r.fpp_ok()).filter_map(|r| r.max_jump).collect();
            if js.is_empty() {
                return None;
            }
            let cut = (n as f64).powf(zeta);
            let f = js.iter().filter(|&&j| j as f64 <= cut).count() as f64 / js.len() as f64;
            Some(MaxJumpRow { n, count: js.len(), fraction: f, stderr: (f * (1.0 - f) / js.len() as f64).sqrt() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{STATUS_OK, STATUS_SKIPPED};

    fn row(n: usize, r: usize, t: f64, lz: f64, jump: i64) -> ReplicaRow {
        ReplicaRow {
            config_hash: String::new(),
            n,
            replica: r,
            seed: 0,
            fpp_status: STATUS_OK.into(),
            t_hat: Some(t),
            t_scaled: Some(t),
            exact: Some(true),
            max_jump: Some(jump),
            hamiltonian: Some(0),
            end_x0: Some(0),
            end_x1: None,
            fpp_half_width: Some(8),
            polymer_status: STATUS_OK.into(),
            log_z: Some(lz),
            certificate: Some(0.0),
            polymer_half_width: Some(8),
        }
    }

    /// Two replicas per n at `mean +- sd / sqrt 2` have sample sd exactly `sd`.
    fn planted(exponent: f64) -> Vec<ReplicaRow> {
        let mut rows = Vec::new();
        for n in [64usize, 128, 256, 512] {
            let sd = (n as f64).powf(exponent);
            let h = sd / 2f64.sqrt();
            rows.push(row(n, 0, n as f64 - h, 0.0, 1));
            rows.push(row(n, 1, n as f64 + h, 0.0, 1));
        }
        rows
    }

    #[test]
    fn planted_slope_recovered() {
        let rep = concentration_scan(&planted(0.5), Target::Fpp, 0.1, 0.5).unwrap();
        let fit = rep.slope.unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-6, "{fit:?}");
        assert!(fit.ci_high - fit.ci_low < 1e-6);
        let rep = concentration_scan(&planted(0.3), Target::Fpp, 0.1, 0.5).unwrap();
        assert!((rep.slope.unwrap().slope - 0.3).abs() < 1e-6);
    }

    #[test]
    fn deterministic_ensemble() {
        let rows: Vec<_> = [4usize, 8, 16].iter().flat_map(|&n| (0..3).map(move |r| row(n, r, 0.0, 0.0, 0))).collect();
        let rep = concentration_scan(&rows, Target::Fpp, 0.1, 0.5).unwrap();
        assert!(rep.deterministic);
        assert!(rep.slope.is_none());
        assert_eq!(rep.degenerate, vec![4, 8, 16]);
        assert!(rep.per_n.iter().all(|s| s.tail_frequency == 0.0 && s.max_jump_fraction == Some(1.0)));
        let est = estimate_time_constant(&rows, 8, 0.6).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn estimates_and_exclusions() {
        let mut rows = vec![row(10, 0, 4.0, -2.0, 1), row(10, 1, 6.0, -4.0, 3), row(10, 2, 0.0, 0.0, 0)];
        rows[2].fpp_status = "infeasible".into();
        rows[2].polymer_status = STATUS_SKIPPED.into();
        let e = estimate_time_constant(&rows, 10, 0.6).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.excluded, 1);
        assert!((e.stderr - 2f64.sqrt() / (2f64.sqrt() * 10.0)).abs() < 1e-15);
        assert!((e.rate_margin - 10f64.powf(-0.4)).abs() < 1e-15);
        let f = estimate_free_energy(&rows, 10, 0.6).unwrap();
        assert_eq!(f.value, -0.3);
        assert!(estimate_time_constant(&rows, 11, 0.6).is_err());
        assert!(estimate_time_constant(&rows[..1], 10, 0.6).is_err());
    }

    #[test]
    fn tails_and_jumps() {
        let mut rows = Vec::new();
        for r in 0..10 {
            rows.push(row(4, r, if r == 0 { 20.0 } else { 10.0 }, 0.0, r as i64));
        }
        for n in [8, 16] {
            rows.push(row(n, 0, 1.0, 0.0, 1));
            rows.push(row(n, 1, 2.0, 0.0, 100));
        }
        let rep = concentration_scan(&rows, Target::Fpp, 0.0, 0.5).unwrap();
        assert_eq!(rep.per_n[0].tail_frequency, 0.1);
        assert_eq!(rep.per_n[0].max_jump_max, Some(9.0));
        let scan = max_jump_scan(&rows, 0.5);
        assert_eq!(scan[0].fraction, 0.3);
        assert_eq!(scan[1].fraction, 0.5);
        assert!(max_jump_scan(&rows, 1.0).iter().all(|r| r.n < 16 || r.fraction == 0.5));
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(fit_log_slope(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_log_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }
}
