//! The theta-regularized view: every vacant box of side `b = ceil(n^theta)`
//! receives one artificial point at its lexicographically smallest site.
//!
//! Boxes are anchored on the absolute lattice `b Z^d` and intersected with
//! the window, so interior boxes do not depend on the window size.

use super::{EnvSlab, PointView, Site, Window};
use crate::error::{Error, Result};
use crate::params::box_side;

#[derive(Debug, Clone)]
pub struct RegularizedSlab<'a> {
    pub base: &'a EnvSlab,
    pub theta: f64,
    pub box_side: i64,
    /// Added corners per layer (index `k - 1`), lexicographic order.
    pub added_points: Vec<Vec<Site>>,
    added_bits: Vec<Vec<u64>>,
}

/// Per-axis box ranges `[lo, hi]` covering `[-L, L]`.
fn axis_boxes(half_width: i64, b: i64) -> Vec<(i64, i64)> {
    let l = half_width;
    let mut out = vec![];
    let mut a = (-l).div_euclid(b) * b;
    while a <= l {
        out.push((a.max(-l), (a + b - 1).min(l)));
        a += b;
    }
    out
}

/// Calls `f(box_cells)` with the window cells of every theta-box.
fn for_each_box(window: Window, b: i64, mut f: impl FnMut(&[usize])) {
    let axis = axis_boxes(window.half_width, b);
    let mut cells = Vec::with_capacity((b * b) as usize);
    match window.d {
        1 => {
            for &(lo, hi) in &axis {
                cells.clear();
                cells.extend((lo..=hi).map(|x| window.index([x, 0]).unwrap()));
                f(&cells);
            }
        }
        _ => {
            for &(lo0, hi0) in &axis {
                for &(lo1, hi1) in &axis {
                    cells.clear();
                    for x0 in lo0..=hi0 {
                        for x1 in lo1..=hi1 {
                            cells.push(window.index([x0, x1]).unwrap());
                        }
                    }
                    f(&cells);
                }
            }
        }
    }
}

pub fn regularize(slab: &EnvSlab, theta: f64) -> Result<RegularizedSlab<'_>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParams(format!("theta must lie in (0, 1), got {theta}")));
    }
    let b = box_side(slab.n, theta);
    let window = slab.window;
    let words = window.cells().div_ceil(64);
    let mut added_points = Vec::with_capacity(slab.n);
    let mut added_bits = Vec::with_capacity(slab.n);
    for k in 1..=slab.n {
        let mut pts = vec![];
        let mut bits = vec![0u64; words];
        for_each_box(window, b, |cells| {
            if cells.iter().all(|&c| slab.bit(k, c)) {
                // cells are listed in lexicographic order
                let corner = cells[0];
                bits[corner / 64] |= 1 << (corner % 64);
                pts.push(window.site(corner));
            }
        });
        pts.sort_unstable();
        added_points.push(pts);
        added_bits.push(bits);
    }
    Ok(RegularizedSlab { base: slab, theta, box_side: b, added_points, added_bits })
}

impl RegularizedSlab<'_> {
    #[inline]
    pub fn is_added(&self, layer: usize, cell: usize) -> bool {
        (self.added_bits[layer - 1][cell / 64] >> (cell % 64)) & 1 == 1
    }

    pub fn added_count(&self) -> usize {
        self.added_points.iter().map(Vec::len).sum()
    }

    /// Points of layer `k` (open sites and added corners), lexicographic.
    pub fn points(&self, k: usize) -> Result<Vec<Site>> {
        if k == 0 || k > self.base.n {
            return Err(Error::LayerOutOfRange { layer: k, layers: self.base.n });
        }
        let w = self.base.window;
        Ok((0..w.cells()).filter(|&c| self.is_point(k, c)).map(|c| w.site(c)).collect())
    }
}

impl PointView for RegularizedSlab<'_> {
    fn layers(&self) -> usize {
        self.base.n
    }

    fn window(&self) -> Window {
        self.base.window
    }

    #[inline]
    fn is_point(&self, layer: usize, cell: usize) -> bool {
        !self.base.bit(layer, cell) || self.is_added(layer, cell)
    }

    fn boundary_margin(&self) -> i64 {
        self.box_side
    }

    fn obstacle(&self, layer: usize, s: Site) -> bool {
        self.base.eta(layer, s)
    }
}

/// True iff every theta-box of the window meets the view at every layer.
pub fn theta_property_check<V: PointView + ?Sized>(view: &V, theta: f64) -> bool {
    let b = box_side(view.layers(), theta);
    let window = view.window();
    (1..=view.layers()).all(|k| {
        let mut ok = true;
        for_each_box(window, b, |cells| {
            ok &= cells.iter().any(|&c| view.is_point(k, c));
        });
        ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_slab;
    use crate::params::ModelParams;

    /// Direct enumeration of boxes as coordinate ranges, independent of
    /// `for_each_box`.
    fn brute_theta_check<V: PointView>(view: &V, theta: f64) -> bool {
        let b = box_side(view.layers(), theta);
        let w = view.window();
        let l = w.half_width;
        for k in 1..=view.layers() {
            let mut anchor = -l - (-l).rem_euclid(b);
            while anchor <= l {
                let hit = (anchor..anchor + b)
                    .filter(|x| (-l..=l).contains(x))
                    .any(|x| view.is_point_at(k, [x, 0]));
                if !hit {
                    return false;
                }
                anchor += b;
            }
        }
        true
    }

    #[test]
    fn p_zero_adds_nothing() {
        let s = generate_slab(&ModelParams { p: 0.0, ..Default::default() }, 8, 6, 1).unwrap();
        let r = regularize(&s, 0.5).unwrap();
        assert_eq!(r.added_count(), 0);
        assert!(theta_property_check(&r, 0.5));
    }

    #[test]
    fn all_ones_corners() {
        let s = EnvSlab::from_fn(1, 8, 16, |_, _| true);
        let r = regularize(&s, 0.5).unwrap();
        assert_eq!(r.box_side, 4);
        for k in 1..=16 {
            let xs: Vec<i64> = r.added_points[k - 1].iter().map(|s| s[0]).collect();
            assert_eq!(xs, vec![-8, -4, 0, 4, 8]);
        }
        assert!(!theta_property_check(&s, 0.5));
        assert!(theta_property_check(&r, 0.5));
    }

    #[test]
    fn two_dimensional_corners_are_lex_min() {
        let s = EnvSlab::from_fn(2, 3, 4, |_, _| true);
        let r = regularize(&s, 0.5).unwrap();
        // b = 2, axis boxes [-3,-3],[-2,-1],[0,1],[2,3]
        assert_eq!(r.box_side, 2);
        assert_eq!(r.added_points[0].len(), 16);
        assert!(r.added_points[0].contains(&[-3, -3]));
        assert!(r.added_points[0].contains(&[-2, 0]));
        assert!(r.added_points[0].contains(&[2, 2]));
        assert!(!r.added_points[0].contains(&[3, 3]));
        assert!(theta_property_check(&r, 0.5));
    }

    #[test]
    fn check_matches_brute_force_box_scan() {
        let params = ModelParams { p: 0.9, theta: 0.6, ..Default::default() };
        for seed in 0..20 {
            let s = generate_slab(&params, 256, 30, seed).unwrap();
            assert_eq!(theta_property_check(&s, 0.6), brute_theta_check(&s, 0.6));
            let r = regularize(&s, 0.6).unwrap();
            assert!(brute_theta_check(&r, 0.6));
        }
    }

    #[test]
    fn regularization_is_superset_and_minimal() {
        let params = ModelParams { p: 0.85, ..Default::default() };
        let s = generate_slab(&params, 16, 20, 77).unwrap();
        let r = regularize(&s, 0.5).unwrap();
        for k in 1..=16 {
            for site in s.open_sites(k).unwrap() {
                assert!(r.is_point_at(k, site));
            }
            // an added corner sits in an otherwise vacant box: removing
            // it must break the property for that box
            for &c in &r.added_points[k - 1] {
                assert!(s.eta(k, c));
                let b = r.box_side;
                let lo = c[0].div_euclid(b) * b;
                let box_open = (lo..lo + b)
                    .filter(|x| (-20..=20).contains(x))
                    .any(|x| !s.eta(k, [x, 0]));
                assert!(!box_open);
            }
        }
    }

    #[test]
    fn rejects_bad_theta() {
        let s = EnvSlab::from_fn(1, 2, 2, |_, _| false);
        assert!(regularize(&s, 0.0).is_err());
        assert!(regularize(&s, 1.0).is_err());
    }
}
