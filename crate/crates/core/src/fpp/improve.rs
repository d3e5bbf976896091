//! Single-site midpoint rewiring and jump statistics.

use std::collections::BTreeMap;

use super::{JumpCost, PathRecord};
use crate::env::{PointView, RegularizedSlab, Site};
use crate::params::ModelParams;

/// Point of `layer` nearest (l1) to the midpoint of `a` and `b`; ties go
/// to the lexicographically smallest site. Works in doubled coordinates
/// so half-integer midpoints are exact.
fn nearest_to_midpoint<V: PointView + ?Sized>(view: &V, layer: usize, a: Site, b: Site) -> Option<Site> {
    let w = view.window();
    let sum = [a[0] + b[0], a[1] + b[1]];
    let doubled = |y: Site| (0..w.d).map(|i| (2 * y[i] - sum[i]).abs()).sum::<i64>();
    let centre = [sum[0].div_euclid(2), sum[1].div_euclid(2)];
    let reach = (0..w.d).map(|i| centre[i].abs() + w.half_width).sum::<i64>();
    let mut best: Option<(i64, Site)> = None;
    let mut ring = Vec::new();
    for r in 0..=reach {
        // doubled distance of a site at l1 radius r from the centre is at
        // least 2r - d
        if let Some((bd, _)) = best {
            if 2 * r - w.d as i64 > bd {
                break;
            }
        }
        w.ring(centre, r, &mut ring);
        for &y in &ring {
            if !view.is_point(layer, w.index(y).unwrap()) {
                continue;
            }
            let dd = doubled(y);
            let better = match best {
                None => true,
                Some((bd, bs)) => dd < bd || (dd == bd && y < bs),
            };
            if better {
                best = Some((dd, y));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Replace `path.positions[s]` by the regularized point nearest the
/// midpoint of its neighbours. Returns the rewired path only if it saves
/// at least `2 n^theta`.
pub fn improve_jump(path: &PathRecord, reg: &RegularizedSlab<'_>, s: usize, params: &ModelParams) -> Option<PathRecord> {
    let n = path.steps();
    if s == 0 || s >= n {
        return None;
    }
    let layer = path.start_layer + s;
    let (a, b) = (path.positions[s - 1], path.positions[s + 1]);
    let candidate = nearest_to_midpoint(reg, layer, a, b)?;
    if candidate == path.positions[s] {
        return None;
    }
    let mut positions = path.positions.clone();
    positions[s] = candidate;
    let jc = JumpCost::new(params.alpha);
    let new = PathRecord::new(path.d, path.start_layer, positions, jc, |k, x| reg.obstacle(k, x));
    let margin = 2.0 * (n as f64).powf(params.theta);
    (path.energy - new.energy >= margin).then_some(new)
}

pub fn max_jump(path: &PathRecord) -> i64 {
    path.jumps.iter().copied().max().unwrap_or(0)
}

/// Count of jumps per l1 size.
pub fn jump_histogram(path: &PathRecord) -> BTreeMap<i64, usize> {
    let mut h = BTreeMap::new();
    for &j in &path.jumps {
        *h.entry(j).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_slab, regularize, EnvSlab};
    use crate::fpp::passage_time;

    fn rec(xs: &[i64], alpha: f64) -> PathRecord {
        PathRecord::new(1, 0, xs.iter().map(|&x| [x, 0]).collect(), JumpCost::new(alpha), |_, _| false)
    }

    #[test]
    fn hand_computed_improvement() {
        // layer 2 holds points at 0 and 10 only
        let slab = EnvSlab::from_fn(1, 12, 3, |k, x| k == 2 && x[0] != 0 && x[0] != 10);
        let reg = regularize(&slab, 0.1).unwrap();
        let p = ModelParams { theta: 0.1, ..ModelParams::default() };
        let path = rec(&[0, 0, 10, 0], 2.0);
        assert_eq!(path.energy, 200.0);
        let better = improve_jump(&path, &reg, 2, &p).unwrap();
        assert_eq!(better.energy, 0.0);
        assert_eq!(better.positions[2], [0, 0]);
    }

    #[test]
    fn no_gain_means_unchanged() {
        let slab = EnvSlab::from_fn(1, 12, 3, |_, _| false);
        let reg = regularize(&slab, 0.5).unwrap();
        let p = ModelParams::default();
        let path = rec(&[0, 1, 1, 2], 2.0);
        assert!(improve_jump(&path, &reg, 1, &p).is_none());
        assert!(improve_jump(&path, &reg, 2, &p).is_none());
        assert!(improve_jump(&path, &reg, 0, &p).is_none());
        assert!(improve_jump(&path, &reg, 3, &p).is_none());
    }

    #[test]
    fn half_integer_midpoint_ties_to_lex_min() {
        let slab = EnvSlab::from_fn(1, 12, 3, |k, x| k == 2 && x[0] != 2 && x[0] != 3);
        let reg = regularize(&slab, 0.1).unwrap();
        assert_eq!(nearest_to_midpoint(&reg, 2, [0, 0], [5, 0]), Some([2, 0]));
    }

    #[test]
    fn dp_optimal_paths_are_locally_optimal() {
        let p = ModelParams { p: 0.7, alpha: 2.0, ..Default::default() };
        for seed in 0..30 {
            let s = generate_slab(&p, 40, 40, seed).unwrap();
            let reg = regularize(&s, p.theta).unwrap();
            let r = passage_time(&reg, 40, &p).unwrap();
            for step in 1..40 {
                assert!(improve_jump(&r.path, &reg, step, &p).is_none());
            }
        }
    }

    #[test]
    fn jump_accessors() {
        let z = rec(&[0, 0, 0], 2.0);
        assert_eq!(max_jump(&z), 0);
        let p = rec(&[0, 3, 1], 2.0);
        assert_eq!(max_jump(&p), 3);
        let h = jump_histogram(&p);
        assert_eq!(h.values().sum::<usize>(), 2);
        assert_eq!(h[&3], 1);
        assert_eq!(h[&2], 1);
    }
}
