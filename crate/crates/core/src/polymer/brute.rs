use serde::Serialize;

use super::kernel::KernelSpec;
use crate::env::{EnvSlab, Site};
use crate::error::{Error, Result};
use crate::fpp::JumpCost;
use crate::params::{Beta, ModelParams};

const MAX_PATHS: f64 = 5e6;

/// Exact sums over an enumerated path set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BrutePartition {
    /// All window-confined paths with jumps at most `cap`.
    pub log_z: f64,
    /// Paths with `T_n(gamma) <= energy_cap`.
    pub log_z_restricted: f64,
    /// Paths with every jump at most `jump_cap`.
    pub log_z_jump_capped: f64,
    pub paths: usize,
}

struct Term {
    logw: f64,
    energy: f64,
    max_jump: i64,
}

/// Enumeration oracle for the transfer sweep. Uses the same window, cap and
/// kernel weights as [`super::transfer`], so both sides sum the same set.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_partition(
    slab: &EnvSlab,
    n: usize,
    cap: i64,
    params: &ModelParams,
    kernel: &KernelSpec,
    beta: Beta,
    energy_cap: Option<f64>,
    jump_cap: Option<f64>,
) -> Result<BrutePartition> {
    params.validate()?;
    kernel.check_matches(params)?;
    if n == 0 || n > slab.n() {
        return Err(Error::LayerOutOfRange { layer: n, layers: slab.n() });
    }
    let w = slab.window;
    let cap = cap.min(w.diameter()).min(kernel.cap).max(0);
    let branch = (2 * cap + 1).min(w.width()) as f64;
    if n > 5 || branch.powi((w.d * n) as i32) > MAX_PATHS {
        return Err(Error::TooLarge(format!("n = {n}, cap = {cap}, d = {}", w.d)));
    }
    let jc = JumpCost::new(params.alpha);
    let logf = kernel.log_weights();
    let mut terms = Vec::new();
    let mut st = Walk { slab, beta, jc: &jc, logf: &logf, cap, n, terms: &mut terms };
    st.go(1, [0, 0], 0.0, 0.0, 0);

    let m = terms.iter().map(|t| t.logw).fold(f64::NEG_INFINITY, f64::max);
    let ecap = energy_cap.unwrap_or(f64::INFINITY);
    let jcap = jump_cap.unwrap_or(f64::INFINITY);
    let (mut all, mut restricted, mut capped) = (0.0, 0.0, 0.0);
    for t in &terms {
        let e = (t.logw - m).exp();
        all += e;
        if t.energy <= ecap {
            restricted += e;
        }
        if t.max_jump as f64 <= jcap {
            capped += e;
        }
    }
    let log = |s: f64| if m == f64::NEG_INFINITY { m } else { m + s.ln() };
    Ok(BrutePartition {
        log_z: log(all),
        log_z_restricted: log(restricted),
        log_z_jump_capped: log(capped),
        paths: terms.len(),
    })
}

struct Walk<'a> {
    slab: &'a EnvSlab,
    beta: Beta,
    jc: &'a JumpCost,
    logf: &'a [f64],
    cap: i64,
    n: usize,
    terms: &'a mut Vec<Term>,
}

impl Walk<'_> {
    fn go(&mut self, k: usize, at: Site, logw: f64, energy: f64, max_jump: i64) {
        if k > self.n {
            self.terms.push(Term { logw, energy, max_jump });
            return;
        }
        let w = self.slab.window;
        let mut next = Vec::new();
        w.for_each_in_ball(at, self.cap, |y, dist| next.push((y, dist)));
        for (y, dist) in next {
            let eta = self.slab.eta(k, y);
            let bonus = match self.beta {
                Beta::NegInfinity if eta => continue,
                Beta::Finite(b) if eta => b,
                _ => 0.0,
            };
            self.go(
                k + 1,
                y,
                logw + self.logf[dist as usize] + bonus,
                energy + self.jc.cost(dist),
                max_jump.max(dist),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::kernel_normalizer;

    #[test]
    fn single_path_is_its_own_term() {
        let p = ModelParams { beta: Beta::NegInfinity, ..Default::default() };
        let k = KernelSpec::with_cap(&p, 3).unwrap();
        let s = EnvSlab::from_fn(1, 3, 3, |kk, x| x[0] != kk as i64 - 1);
        let r = brute_force_partition(&s, 3, 3, &p, &k, Beta::NegInfinity, None, None).unwrap();
        assert_eq!(r.paths, 1);
        // jumps 0, 1, 1
        let expect = 3.0 * k.log_c1 - 2.0 * p.c2;
        assert!((r.log_z - expect).abs() < 1e-14);
    }

    #[test]
    fn sandwich_ordering() {
        let p = ModelParams { alpha: 1.0, ..Default::default() };
        let k = KernelSpec::with_cap(&p, 4).unwrap();
        for seed in 0..20 {
            let s = crate::env::generate_slab(&p, 4, 4, seed).unwrap();
            let r = brute_force_partition(&s, 4, 4, &p, &k, p.beta, Some(3.0), Some(3.0)).unwrap();
            assert!(r.log_z_restricted <= r.log_z_jump_capped);
            assert!(r.log_z_jump_capped <= r.log_z);
        }
    }

    #[test]
    fn refuses_large() {
        let p = ModelParams::default();
        let k = kernel_normalizer(&p, 1e-12).unwrap();
        let s = EnvSlab::from_fn(1, 50, 6, |_, _| false);
        assert!(matches!(
            brute_force_partition(&s, 6, 3, &p, &k, p.beta, None, None),
            Err(Error::TooLarge(_))
        ));
    }
}
