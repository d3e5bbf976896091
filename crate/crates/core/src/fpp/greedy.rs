use super::{JumpCost, PathRecord};
use crate::env::{PointView, Site};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// The view's point of `layer` nearest to `from` in l1; ties go to the
/// lexicographically smallest site.
pub fn nearest_point<V: PointView + ?Sized>(view: &V, layer: usize, from: Site) -> Option<Site> {
    let w = view.window();
    let reach = (0..w.d).map(|i| from[i].abs() + w.half_width).sum::<i64>();
    let mut ring = Vec::new();
    for r in 0..=reach {
        w.ring(from, r, &mut ring);
        if let Some(&s) = ring.iter().find(|&&s| view.is_point(layer, w.index(s).unwrap())) {
            return Some(s);
        }
    }
    None
}

pub(crate) fn greedy_from<V: PointView + ?Sized>(
    view: &V,
    k0: usize,
    k1: usize,
    start: Site,
    jc: JumpCost,
) -> Result<(f64, Vec<Site>)> {
    let mut positions = Vec::with_capacity(k1 - k0 + 1);
    positions.push(start);
    let mut cur = start;
    let mut total = 0.0;
    for k in k0 + 1..=k1 {
        let next = nearest_point(view, k, cur).ok_or(Error::Infeasible { layer: k })?;
        total += jc.cost(crate::env::l1(cur, next));
        positions.push(next);
        cur = next;
    }
    Ok((total, positions))
}

/// Nearest-point path from the origin; its energy bounds the passage
/// time from above.
pub fn greedy_upper_bound<V: PointView + ?Sized>(
    view: &V,
    n: usize,
    params: &ModelParams,
) -> Result<(f64, PathRecord)> {
    params.validate()?;
    if n == 0 || n > view.layers() {
        return Err(Error::LayerOutOfRange { layer: n, layers: view.layers() });
    }
    let jc = JumpCost::new(params.alpha);
    let (value, positions) = greedy_from(view, 0, n, [0, 0], jc)?;
    let path = PathRecord::new(view.window().d, 0, positions, jc, |k, s| view.obstacle(k, s));
    Ok((value, path))
}
