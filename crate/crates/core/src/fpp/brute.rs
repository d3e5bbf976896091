use super::JumpCost;
use crate::env::{PointView, Site};
use crate::error::{Error, Result};
use crate::params::ModelParams;

const MAX_PATHS: f64 = 5e7;

/// Exhaustive minimum over window-confined paths with every jump at most
/// `jump_cap`. Testing oracle; refuses large instances. Returns
/// infinity when no admissible path exists.
pub fn brute_force_passage<V: PointView + ?Sized>(
    view: &V,
    n: usize,
    jump_cap: i64,
    params: &ModelParams,
) -> Result<f64> {
    params.validate()?;
    if n == 0 || n > view.layers() {
        return Err(Error::LayerOutOfRange { layer: n, layers: view.layers() });
    }
    let w = view.window();
    let branch = (2 * jump_cap.min(w.diameter()) + 1) as f64;
    if n > 6 || branch.powi((w.d * n) as i32) > MAX_PATHS {
        return Err(Error::TooLarge(format!("n = {n}, cap = {jump_cap}, d = {}", w.d)));
    }
    let jc = JumpCost::new(params.alpha);
    let mut best = f64::INFINITY;
    dfs(view, &jc, jump_cap, n, 1, [0, 0], 0.0, &mut best);
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn dfs<V: PointView + ?Sized>(
    view: &V,
    jc: &JumpCost,
    cap: i64,
    n: usize,
    k: usize,
    at: Site,
    acc: f64,
    best: &mut f64,
) {
    if k > n {
        *best = best.min(acc);
        return;
    }
    let w = view.window();
    // plain ranges, not the solver's ball iterator
    let l = w.half_width;
    let span1 = if w.d == 2 { -l..=l } else { 0..=0 };
    for x0 in -l..=l {
        for x1 in span1.clone() {
            let y = [x0, x1];
            let dist = crate::env::l1(at, y);
            if dist > cap || !view.is_point_at(k, y) {
                continue;
            }
            dfs(view, jc, cap, n, k + 1, y, acc + jc.cost(dist), best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvSlab;

    #[test]
    fn trivial_cases() {
        let p = ModelParams::default();
        let z = EnvSlab::from_fn(1, 3, 3, |_, _| false);
        assert_eq!(brute_force_passage(&z, 3, 6, &p).unwrap(), 0.0);
        let col = EnvSlab::from_fn(1, 6, 2, |_, x| x[0] != 2);
        assert_eq!(brute_force_passage(&col, 2, 12, &p).unwrap(), 4.0);
        assert_eq!(brute_force_passage(&col, 2, 1, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn refuses_large() {
        let p = ModelParams::default();
        let z = EnvSlab::from_fn(1, 30, 7, |_, _| false);
        assert!(matches!(brute_force_passage(&z, 7, 3, &p), Err(Error::TooLarge(_))));
        let z = EnvSlab::from_fn(2, 30, 6, |_, _| false);
        assert!(matches!(brute_force_passage(&z, 6, 30, &p), Err(Error::TooLarge(_))));
    }

    #[test]
    fn monotone_in_cap() {
        let p = ModelParams { p: 0.6, ..Default::default() };
        for seed in 0..20 {
            let s = crate::env::generate_slab(&p, 4, 5, seed).unwrap();
            let mut prev = f64::INFINITY;
            for cap in 0..=10 {
                let v = brute_force_passage(&s, 4, cap, &p).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }
}
