//! Normalization of `f(k) = c1 exp(-c2 k^alpha)` over `Z^d` with a
//! certified bound on the mass beyond the jump cap.
//!
//! Tail majorant: for `K >= 1`,
//! `sum_{k>K} N_d(k) e^{-c2 k^a} <= c_d * int_K^inf (x+1)^{d-1} e^{-c2 x^a} dx`
//! where `N_1(k) = 2`, `N_2(k) = 4k` count the l1 shell. The integrals are
//! upper incomplete gamma functions, bounded by
//! `Gamma(s, z) <= z^{s-1} e^{-z} / (1 - (s-1)/z)` (for `s > 1`, `z > s-1`)
//! and `Gamma(s, z) <= z^{s-1} e^{-z}` (for `s <= 1`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpp::JumpCost;
use crate::params::ModelParams;

const MAX_TERMS: i64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub d: usize,
    pub alpha: f64,
    pub c2: f64,
    pub c1: f64,
    pub log_c1: f64,
    /// Per-step jump radius used by the transfer sweep.
    pub cap: i64,
    /// Certified upper bound on `sum_{|y|_1 > cap} f(|y|_1)`.
    pub tail_bound: f64,
    pub epsilon: f64,
}

fn shell_count(d: usize, k: i64) -> f64 {
    match (d, k) {
        (_, 0) => 1.0,
        (1, _) => 2.0,
        _ => 4.0 * k as f64,
    }
}

fn log_gamma_upper_bound(s: f64, z: f64) -> Option<f64> {
    if z <= 0.0 {
        return None;
    }
    let base = (s - 1.0) * z.ln() - z;
    if s <= 1.0 {
        Some(base)
    } else if z > s - 1.0 {
        Some(base - (1.0 - (s - 1.0) / z).ln())
    } else {
        None
    }
}

/// Bound on `sum_{k>K} N_d(k) e^{-c2 k^alpha}`, if the gamma bound applies.
fn analytic_tail(d: usize, alpha: f64, c2: f64, k: i64) -> Option<f64> {
    if k < 1 {
        return None;
    }
    let z = c2 * JumpCost::new(alpha).cost(k);
    // (1/alpha) c2^{-s} Gamma(s, z) with s = (j+1)/alpha
    let piece = |j: f64| -> Option<f64> {
        let s = (j + 1.0) / alpha;
        let lg = log_gamma_upper_bound(s, z)?;
        Some((lg - s * c2.ln() - alpha.ln()).exp())
    };
    match d {
        1 => Some(2.0 * piece(0.0)?),
        _ => Some(4.0 * (piece(1.0)? + piece(0.0)?)),
    }
}

struct Series {
    terms: Vec<f64>,
    /// Analytic bound beyond the last exact term.
    beyond: f64,
}

fn series(d: usize, alpha: f64, c2: f64, min_terms: i64, rel_tol: f64) -> Result<Series> {
    let jc = JumpCost::new(alpha);
    let mut terms = vec![1.0];
    let mut sum = 1.0;
    let mut k = 0i64;
    loop {
        if k >= min_terms {
            if let Some(t) = analytic_tail(d, alpha, c2, k) {
                if t <= rel_tol * sum {
                    return Ok(Series { terms, beyond: t });
                }
            }
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Domain(format!(
                "kernel normalization did not converge within {MAX_TERMS} shells"
            )));
        }
        let g = shell_count(d, k) * (-c2 * jc.cost(k)).exp();
        terms.push(g);
        sum += g;
    }
}

impl KernelSpec {
    fn build(params: &ModelParams, epsilon: f64, fixed_cap: Option<i64>) -> Result<KernelSpec> {
        params.validate()?;
        let min_terms = fixed_cap.unwrap_or(0);
        let s = series(params.d, params.alpha, params.c2, min_terms, (0.5 * epsilon).min(1e-18))?;
        // smallest terms first
        let total: f64 = s.terms.iter().rev().sum();
        let c1 = 1.0 / total;
        // tails[r] = sum_{k > r} terms + beyond
        let mut tails = vec![0.0; s.terms.len()];
        let mut acc = s.beyond;
        for r in (0..s.terms.len()).rev() {
            tails[r] = acc;
            acc += s.terms[r];
        }
        let (cap, tail) = match fixed_cap {
            Some(r) => (r, c1 * tails[r as usize]),
            None => {
                let r = tails
                    .iter()
                    .position(|&t| c1 * t < epsilon)
                    .ok_or_else(|| Error::Domain(format!("epsilon {epsilon} not reachable")))?;
                (r as i64, c1 * tails[r])
            }
        };
        Ok(KernelSpec {
            d: params.d,
            alpha: params.alpha,
            c2: params.c2,
            c1,
            log_c1: c1.ln(),
            cap,
            tail_bound: tail,
            epsilon,
        })
    }

    /// Kernel with an explicitly chosen cap; `tail_bound` is certified for
    /// that cap.
    pub fn with_cap(params: &ModelParams, cap: i64) -> Result<KernelSpec> {
        if cap < 0 {
            return Err(Error::InvalidParams(format!("cap must be >= 0, got {cap}")));
        }
        let mut k = Self::build(params, f64::INFINITY, Some(cap))?;
        k.epsilon = k.tail_bound;
        Ok(k)
    }

    /// `log f(Delta)` for `Delta = 0..=cap`.
    pub fn log_weights(&self) -> Vec<f64> {
        let jc = JumpCost::new(self.alpha);
        (0..=self.cap).map(|k| self.log_c1 - self.c2 * jc.cost(k)).collect()
    }

    pub(crate) fn check_matches(&self, params: &ModelParams) -> Result<()> {
        if self.d != params.d || self.alpha != params.alpha || self.c2 != params.c2 {
            return Err(Error::InvalidParams("kernel was built for different (d, alpha, c2)".into()));
        }
        Ok(())
    }
}

/// Normalizer `c1` and the smallest cap whose truncated mass is below
/// `epsilon`.
pub fn kernel_normalizer(params: &ModelParams, epsilon: f64) -> Result<KernelSpec> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be > 0, got {epsilon}")));
    }
    KernelSpec::build(params, epsilon, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, alpha: f64, c2: f64) -> ModelParams {
        ModelParams { d, alpha, c2, ..Default::default() }
    }

    #[test]
    fn geometric_closed_form() {
        // sum_{y in Z} 2^{-|y|} = 3
        let k = kernel_normalizer(&params(1, 1.0, std::f64::consts::LN_2), 1e-12).unwrap();
        assert!((k.c1 - 1.0 / 3.0).abs() < 1e-15, "c1 = {}", k.c1);
        // tail beyond R is (2/3) 2^{-R}; the certificate must dominate it
        let exact_tail = 2.0 / 3.0 * 0.5f64.powi(k.cap as i32);
        assert!(k.tail_bound >= exact_tail * (1.0 - 1e-12));
        assert!(k.tail_bound < 1e-12);
    }

    #[test]
    fn two_dimensional_closed_form() {
        // sum_{y in Z^2} x^{|y|_1} = ((1+x)/(1-x))^2 at x = 1/2 is 9
        let k = kernel_normalizer(&params(2, 1.0, std::f64::consts::LN_2), 1e-12).unwrap();
        assert!((k.c1 - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn stiff_kernel_tends_to_one() {
        let k = kernel_normalizer(&params(1, 2.0, 60.0), 1e-12).unwrap();
        assert!((k.c1 - 1.0).abs() < 1e-25 + 1e-15);
        assert_eq!(k.cap, 0);
    }

    #[test]
    fn partial_sum_certificate() {
        for (d, alpha, c2) in [(1, 0.5, 1.0), (1, 2.0, 1.0), (2, 1.0, 0.7), (2, 0.7, 2.0), (1, 1.3, 0.2)] {
            let eps = 1e-10;
            let k = kernel_normalizer(&params(d, alpha, c2), eps).unwrap();
            let jc = JumpCost::new(alpha);
            let partial: f64 = (0..=k.cap).rev().map(|r| shell_count(d, r) * (-c2 * jc.cost(r)).exp()).sum();
            let mass = k.c1 * partial;
            assert!(mass <= 1.0 + 1e-15 && mass >= 1.0 - eps, "{d} {alpha} {c2}: {mass}");
            assert!(k.tail_bound < eps);
            // brute-force tail over a long range must sit under the bound
            let far: f64 = (k.cap + 1..k.cap + 200_000)
                .map(|r| shell_count(d, r) * (-c2 * jc.cost(r)).exp())
                .sum();
            assert!(k.c1 * far <= k.tail_bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn fixed_cap_matches_search() {
        let p = params(1, 2.0, 1.0);
        let k = kernel_normalizer(&p, 1e-12).unwrap();
        let f = KernelSpec::with_cap(&p, k.cap).unwrap();
        assert_eq!(f.c1, k.c1);
        assert_eq!(f.tail_bound, k.tail_bound);
        let small = KernelSpec::with_cap(&p, 1).unwrap();
        assert!(small.tail_bound > k.tail_bound);
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(kernel_normalizer(&ModelParams::default(), 0.0).is_err());
    }
}
