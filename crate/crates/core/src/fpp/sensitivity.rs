use serde::Serialize;

use super::passage_time;
use crate::env::{regularize, EnvSlab};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::seed::hash64;

/// Effect of redrawing one layer on the regularized passage time.
#[derive(Debug, Clone, Serialize)]
pub struct Sensitivity {
    pub layer: usize,
    pub diffs: Vec<f64>,
    pub max_diff: f64,
    pub mean_diff: f64,
    /// `4 n^{zeta alpha}`.
    pub bound: f64,
    pub violations: usize,
    /// Both passage times were certified in every trial.
    pub all_exact: bool,
}

/// `trials` redraws of layer `m`, with fresh seeds derived from `seed`.
pub fn resample_sensitivity(
    slab: &EnvSlab,
    m: usize,
    trials: usize,
    params: &ModelParams,
    seed: u64,
) -> Result<Sensitivity> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..trials).map(|t| hash64(&[seed, m as u64, t as u64])).collect();
    resample_sensitivity_with_seeds(slab, m, &seeds, params)
}

pub fn resample_sensitivity_with_seeds(
    slab: &EnvSlab,
    m: usize,
    fresh_seeds: &[u64],
    params: &ModelParams,
) -> Result<Sensitivity> {
    params.validate()?;
    let n = slab.n();
    let base_reg = regularize(slab, params.theta)?;
    let base = passage_time(&base_reg, n, params)?;
    let mut diffs = Vec::with_capacity(fresh_seeds.len());
    let mut all_exact = base.exact;
    for &s in fresh_seeds {
        let other = slab.resample_layer(m, s)?;
        let reg = regularize(&other, params.theta)?;
        let r = passage_time(&reg, n, params)?;
        all_exact &= r.exact;
        diffs.push((r.value - base.value).abs());
    }
    let bound = 4.0 * (n as f64).powf(params.zeta * params.alpha);
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let violations = diffs.iter().filter(|&&d| d > bound).count();
    Ok(Sensitivity { layer: m, diffs, max_diff, mean_diff, bound, violations, all_exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_slab;

    #[test]
    fn p_zero_has_no_sensitivity() {
        let p = ModelParams { p: 0.0, ..Default::default() };
        let s = generate_slab(&p, 16, 10, 1).unwrap();
        let r = resample_sensitivity(&s, 5, 4, &p, 9).unwrap();
        assert_eq!(r.max_diff, 0.0);
        assert!(r.all_exact);
    }

    #[test]
    fn same_seed_gives_zero() {
        let p = ModelParams { p: 0.5, ..Default::default() };
        let s = generate_slab(&p, 16, 30, 3).unwrap();
        let r = resample_sensitivity_with_seeds(&s, 4, &[s.layer_seeds()[3]], &p).unwrap();
        assert_eq!(r.diffs, vec![0.0]);
        assert!(resample_sensitivity(&s, 4, 0, &p, 1).is_err());
    }
}
