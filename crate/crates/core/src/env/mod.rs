//! Seeded Bernoulli environments on a finite lattice window.
//!
//! Layer `k` of a slab owns a 64-bit stream seed `layer_seeds[k]`. The
//! obstacle bit at site `x` is `site_uniform(layer_seeds[k], x) < p`,
//! a counter-based draw keyed on absolute lattice coordinates. Bits
//! therefore do not depend on the window: regenerating with a larger
//! half-width reproduces every bit of the smaller one, and a common seed
//! couples environments at different `p` monotonically.

mod io;
mod regular;

pub use io::{read_slab, read_slab_file, write_slab, write_slab_file, SlabSidecar, SLAB_MAGIC};
pub use regular::{regularize, theta_property_check, RegularizedSlab};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::seed;

/// Lattice site. For `d = 1` the second coordinate is always 0.
pub type Site = [i64; 2];

/// Default ceiling on `n * window cells` for a single slab.
pub const DEFAULT_MAX_CELLS: u64 = 1 << 28;

/// The box `[-L, L]^d` of lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub d: usize,
    pub half_width: i64,
}

impl Window {
    pub fn new(d: usize, half_width: i64) -> Self {
        Window { d, half_width }
    }

    #[inline]
    pub fn width(&self) -> i64 {
        2 * self.half_width + 1
    }

    pub fn cells(&self) -> usize {
        (self.width() as usize).pow(self.d as u32)
    }

    #[inline]
    pub fn contains(&self, s: Site) -> bool {
        let l = self.half_width;
        (-l..=l).contains(&s[0]) && (self.d == 1 && s[1] == 0 || self.d == 2 && (-l..=l).contains(&s[1]))
    }

    /// Row-major index; preserves lexicographic order of sites.
    #[inline]
    pub fn index(&self, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let l = self.half_width;
        Some(match self.d {
            1 => (s[0] + l) as usize,
            _ => ((s[0] + l) * self.width() + (s[1] + l)) as usize,
        })
    }

    #[inline]
    pub fn site(&self, idx: usize) -> Site {
        let l = self.half_width;
        match self.d {
            1 => [idx as i64 - l, 0],
            _ => {
                let w = self.width() as usize;
                [(idx / w) as i64 - l, (idx % w) as i64 - l]
            }
        }
    }

    /// Does the l1 ball of radius `r` around `s` lie inside the window
    /// shrunk by `margin` on every side?
    #[inline]
    pub fn ball_inside(&self, s: Site, r: i64, margin: i64) -> bool {
        let lim = self.half_width - margin;
        (0..self.d).all(|i| s[i].abs() + r <= lim)
    }

    /// Calls `f(site, l1_distance)` for every window site within l1
    /// distance `r` of `c`, in lexicographic order.
    #[inline]
    pub fn for_each_in_ball(&self, c: Site, r: i64, mut f: impl FnMut(Site, i64)) {
        let l = self.half_width;
        match self.d {
            1 => {
                for x in (c[0] - r).max(-l)..=(c[0] + r).min(l) {
                    f([x, 0], (x - c[0]).abs());
                }
            }
            _ => {
                for x0 in (c[0] - r).max(-l)..=(c[0] + r).min(l) {
                    let d0 = (x0 - c[0]).abs();
                    let rem = r - d0;
                    for x1 in (c[1] - rem).max(-l)..=(c[1] + rem).min(l) {
                        f([x0, x1], d0 + (x1 - c[1]).abs());
                    }
                }
            }
        }
    }

    /// Window sites at l1 distance exactly `r` from `c`, lexicographic.
    pub fn ring(&self, c: Site, r: i64, out: &mut Vec<Site>) {
        out.clear();
        let mut push = |s: Site| {
            if self.contains(s) {
                out.push(s);
            }
        };
        match self.d {
            1 => {
                push([c[0] - r, 0]);
                if r > 0 {
                    push([c[0] + r, 0]);
                }
            }
            _ => {
                for d0 in -r..=r {
                    let rem = r - d0.abs();
                    push([c[0] + d0, c[1] - rem]);
                    if rem > 0 {
                        push([c[0] + d0, c[1] + rem]);
                    }
                }
            }
        }
    }

    /// Largest l1 distance between two window sites.
    pub fn diameter(&self) -> i64 {
        2 * self.half_width * self.d as i64
    }
}

#[inline]
pub fn l1(a: Site, b: Site) -> i64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

/// Read access to a layered point configuration on a window.
pub trait PointView {
    /// Number of layers `n`; layers are numbered `1..=n`.
    fn layers(&self) -> usize;
    fn window(&self) -> Window;
    /// Is `(layer, cell)` a point of the configuration?
    fn is_point(&self, layer: usize, cell: usize) -> bool;
    /// Width of the boundary strip whose contents depend on the window.
    /// Exactness certificates keep optimal candidates out of it.
    fn boundary_margin(&self) -> i64 {
        0
    }

    fn is_point_at(&self, layer: usize, s: Site) -> bool {
        self.window().index(s).is_some_and(|c| self.is_point(layer, c))
    }

    fn layer_is_empty(&self, layer: usize) -> bool {
        !(0..self.window().cells()).any(|c| self.is_point(layer, c))
    }

    /// Obstacle bit `eta(layer, s)` of the underlying environment.
    fn obstacle(&self, layer: usize, s: Site) -> bool;
}

/// Regenerates `slab` on doubling half-widths until `attempt` reports
/// success (second tuple field), or the budget is exhausted.
pub fn grow_until<T>(
    slab: EnvSlab,
    max_cells: u64,
    mut attempt: impl FnMut(&EnvSlab) -> Result<(T, bool)>,
) -> Result<(EnvSlab, T)> {
    let mut slab = slab;
    loop {
        let (out, done) = attempt(&slab)?;
        if done {
            return Ok((slab, out));
        }
        let next = slab.half_width() * 2;
        slab = match slab.regrow(next, max_cells) {
            Ok(s) => s,
            Err(Error::Capacity { .. }) => {
                return Err(Error::WindowExhausted { half_width: slab.half_width() })
            }
            Err(e) => return Err(e),
        };
    }
}

/// A realization of the Bernoulli field `eta` on `n` layers of a window.
/// Bit 1 marks an obstacle, bit 0 an open site.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSlab {
    pub(crate) window: Window,
    pub(crate) n: usize,
    pub(crate) p: f64,
    pub(crate) master_seed: u64,
    pub(crate) layer_seeds: Vec<u64>,
    pub(crate) bits: Vec<Vec<u64>>,
    /// Built from explicit bits; cannot be regenerated from seeds.
    pub(crate) synthetic: bool,
}

fn words_for(cells: usize) -> usize {
    cells.div_ceil(64)
}

fn check_budget(window: Window, n: usize, max_cells: u64) -> Result<()> {
    let requested = (window.cells() as u64).saturating_mul(n as u64);
    if requested > max_cells {
        return Err(Error::Capacity { requested, budget: max_cells });
    }
    Ok(())
}

fn fill_layer(window: Window, layer_seed: u64, p: f64) -> Vec<u64> {
    let cells = window.cells();
    let mut words = vec![0u64; words_for(cells)];
    if p > 0.0 {
        for c in 0..cells {
            if seed::site_uniform(layer_seed, window.site(c)) < p {
                words[c / 64] |= 1 << (c % 64);
            }
        }
    }
    words
}

/// Generates a slab under the default capacity budget.
pub fn generate_slab(params: &ModelParams, n: usize, half_width: i64, master_seed: u64) -> Result<EnvSlab> {
    EnvSlab::generate_with_budget(params, n, half_width, master_seed, DEFAULT_MAX_CELLS)
}

/// `s_p = (log 1/p)^{1/d}`.
pub fn scale_factor(p: f64, d: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("scale factor needs p in (0, 1), got {p}")));
    }
    if d == 0 {
        return Err(Error::Domain("scale factor needs d >= 1".into()));
    }
    Ok((1.0 / p).ln().powf(1.0 / d as f64))
}

impl EnvSlab {
    pub fn generate(params: &ModelParams, n: usize, half_width: i64, master_seed: u64) -> Result<EnvSlab> {
        generate_slab(params, n, half_width, master_seed)
    }

    pub fn generate_with_budget(
        params: &ModelParams,
        n: usize,
        half_width: i64,
        master_seed: u64,
        max_cells: u64,
    ) -> Result<EnvSlab> {
        params.validate()?;
        if n == 0 {
            return Err(Error::InvalidParams("n must be >= 1".into()));
        }
        if half_width < 1 {
            return Err(Error::InvalidParams(format!("half-width must be >= 1, got {half_width}")));
        }
        let layer_seeds = (1..=n).map(|k| seed::layer_seed(master_seed, k)).collect();
        Self::from_seeds(params.d, half_width, params.p, master_seed, layer_seeds, max_cells)
    }

    fn from_seeds(
        d: usize,
        half_width: i64,
        p: f64,
        master_seed: u64,
        layer_seeds: Vec<u64>,
        max_cells: u64,
    ) -> Result<EnvSlab> {
        let window = Window::new(d, half_width);
        check_budget(window, layer_seeds.len(), max_cells)?;
        let bits = layer_seeds.iter().map(|&s| fill_layer(window, s, p)).collect();
        Ok(EnvSlab {
            window,
            n: layer_seeds.len(),
            p,
            master_seed,
            layer_seeds,
            bits,
            synthetic: false,
        })
    }

    /// Slab with explicitly given obstacles: `obstacle(k, site)` for
    /// `k in 1..=n`. Used for hand-built instances.
    pub fn from_fn(d: usize, half_width: i64, n: usize, mut obstacle: impl FnMut(usize, Site) -> bool) -> EnvSlab {
        let window = Window::new(d, half_width);
        let cells = window.cells();
        let bits = (1..=n)
            .map(|k| {
                let mut w = vec![0u64; words_for(cells)];
                for c in 0..cells {
                    if obstacle(k, window.site(c)) {
                        w[c / 64] |= 1 << (c % 64);
                    }
                }
                w
            })
            .collect();
        EnvSlab {
            window,
            n,
            p: f64::NAN,
            master_seed: 0,
            layer_seeds: vec![0; n],
            bits,
            synthetic: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.window.d
    }

    pub fn half_width(&self) -> i64 {
        self.window.half_width
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn layer_seeds(&self) -> &[u64] {
        &self.layer_seeds
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }

    pub fn layer_words(&self, k: usize) -> Result<&[u64]> {
        self.check_layer(k)?;
        Ok(&self.bits[k - 1])
    }

    fn check_layer(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            return Err(Error::LayerOutOfRange { layer: k, layers: self.n });
        }
        Ok(())
    }

    /// Obstacle bit at a window cell. `k` must be in range.
    #[inline]
    pub fn bit(&self, k: usize, cell: usize) -> bool {
        (self.bits[k - 1][cell / 64] >> (cell % 64)) & 1 == 1
    }

    /// `eta(k, s)` at any site. Outside the window a generated slab is
    /// evaluated from its seeds; a synthetic slab reports an obstacle.
    pub fn eta(&self, k: usize, s: Site) -> bool {
        match self.window.index(s) {
            Some(c) => self.bit(k, c),
            None if self.synthetic => true,
            None => self.p > 0.0 && seed::site_uniform(self.layer_seeds[k - 1], s) < self.p,
        }
    }

    /// Zero-bit sites of layer `k`, in lexicographic order.
    pub fn open_sites(&self, k: usize) -> Result<Vec<Site>> {
        self.check_layer(k)?;
        Ok((0..self.window.cells())
            .filter(|&c| !self.bit(k, c))
            .map(|c| self.window.site(c))
            .collect())
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().flatten().map(|w| w.count_ones() as u64).sum()
    }

    /// Copy with layer `m` redrawn from `fresh_seed`.
    pub fn resample_layer(&self, m: usize, fresh_seed: u64) -> Result<EnvSlab> {
        self.check_layer(m)?;
        if self.synthetic {
            return Err(Error::Domain("cannot resample a layer of a synthetic slab".into()));
        }
        let mut out = self.clone();
        out.layer_seeds[m - 1] = fresh_seed;
        out.bits[m - 1] = fill_layer(self.window, fresh_seed, self.p);
        Ok(out)
    }

    /// Regenerate the same environment on a different half-width.
    pub fn regrow(&self, half_width: i64, max_cells: u64) -> Result<EnvSlab> {
        if self.synthetic {
            return Err(Error::Domain("a synthetic slab cannot be regrown".into()));
        }
        if half_width < 1 {
            return Err(Error::InvalidParams(format!("half-width must be >= 1, got {half_width}")));
        }
        Self::from_seeds(self.d(), half_width, self.p, self.master_seed, self.layer_seeds.clone(), max_cells)
    }

    /// The complementary field `1 - eta` on the same window.
    pub fn flipped(&self) -> EnvSlab {
        let cells = self.window.cells();
        let mut out = self.clone();
        for layer in &mut out.bits {
            for (i, w) in layer.iter_mut().enumerate() {
                *w = !*w;
                let hi = cells.saturating_sub(i * 64);
                if hi < 64 {
                    *w &= (1u64 << hi) - 1;
                }
            }
        }
        out.synthetic = true;
        out
    }

    /// First `n` layers only.
    pub fn truncated(&self, n: usize) -> Result<EnvSlab> {
        if n == 0 || n > self.n {
            return Err(Error::LayerOutOfRange { layer: n, layers: self.n });
        }
        let mut out = self.clone();
        out.n = n;
        out.layer_seeds.truncate(n);
        out.bits.truncate(n);
        Ok(out)
    }
}

impl PointView for EnvSlab {
    fn layers(&self) -> usize {
        self.n
    }

    fn window(&self) -> Window {
        self.window
    }

    #[inline]
    fn is_point(&self, layer: usize, cell: usize) -> bool {
        !self.bit(layer, cell)
    }

    fn obstacle(&self, layer: usize, s: Site) -> bool {
        self.eta(layer, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64) -> ModelParams {
        ModelParams { p, ..ModelParams::default() }
    }

    #[test]
    fn window_index_roundtrip_and_order() {
        for d in 1..=2 {
            let w = Window::new(d, 3);
            let mut prev: Option<Site> = None;
            for c in 0..w.cells() {
                let s = w.site(c);
                assert_eq!(w.index(s), Some(c));
                if let Some(p) = prev {
                    assert!(p < s);
                }
                prev = Some(s);
            }
            assert_eq!(w.index([4, 0]), None);
        }
    }

    #[test]
    fn ball_and_ring_agree() {
        let w = Window::new(2, 4);
        let c = [3, -1];
        let mut via_ball = vec![];
        w.for_each_in_ball(c, 3, |s, dist| {
            assert_eq!(dist, l1(s, c));
            if dist == 3 {
                via_ball.push(s);
            }
        });
        let mut ring = vec![];
        w.ring(c, 3, &mut ring);
        assert_eq!(ring, via_ball);
    }

    #[test]
    fn p_zero_is_all_open() {
        let s = generate_slab(&params(0.0), 5, 4, 11).unwrap();
        assert_eq!(s.count_ones(), 0);
        for k in 1..=5 {
            assert_eq!(s.open_sites(k).unwrap().len(), 9);
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = generate_slab(&params(0.5), 2, 2, 42).unwrap();
        let b = generate_slab(&params(0.5), 2, 2, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_slab(&params(0.5), 2, 2, 43).unwrap();
        assert_eq!(a.layer_seeds.len(), 2);
        assert_ne!(a.layer_seeds, c.layer_seeds);
    }

    #[test]
    fn bits_do_not_depend_on_window() {
        let small = generate_slab(&params(0.4), 6, 5, 7).unwrap();
        let big = small.regrow(40, DEFAULT_MAX_CELLS).unwrap();
        for k in 1..=6 {
            for c in 0..small.window.cells() {
                let s = small.window.site(c);
                assert_eq!(small.eta(k, s), big.eta(k, s));
            }
            // outside the small window `eta` agrees with the big slab too
            assert_eq!(small.eta(k, [30, 0]), big.eta(k, [30, 0]));
        }
    }

    #[test]
    fn open_sites_match_bit_scan() {
        let s = generate_slab(&ModelParams { d: 2, ..params(0.6) }, 3, 4, 5).unwrap();
        for k in 1..=3 {
            let open = s.open_sites(k).unwrap();
            let scan: Vec<Site> = (0..s.window.cells())
                .filter(|&c| (s.bits[k - 1][c / 64] >> (c % 64)) & 1 == 0)
                .map(|c| s.window.site(c))
                .collect();
            assert_eq!(open, scan);
        }
        assert!(matches!(s.open_sites(0), Err(Error::LayerOutOfRange { .. })));
        assert!(matches!(s.open_sites(4), Err(Error::LayerOutOfRange { .. })));
    }

    #[test]
    fn all_ones_layer_has_no_open_site() {
        let s = EnvSlab::from_fn(1, 3, 2, |k, _| k == 2);
        assert_eq!(s.open_sites(1).unwrap().len(), 7);
        assert!(s.open_sites(2).unwrap().is_empty());
        assert!(s.layer_is_empty(2));
    }

    #[test]
    fn empirical_density_within_binomial_band() {
        // 10^6 cells: 100 layers of width 10^4 (L = 4999 gives 9999).
        let p = 0.3;
        let s = generate_slab(&params(p), 100, 5000, 2024).unwrap();
        let cells = 100.0 * s.window.cells() as f64;
        let mean = s.count_ones() as f64 / cells;
        let se = (p * (1.0 - p) / cells).sqrt();
        assert!((mean - p).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn capacity_is_enforced() {
        let e = EnvSlab::generate_with_budget(&params(0.5), 10, 100, 1, 1000).unwrap_err();
        assert!(matches!(e, Error::Capacity { requested: 2010, budget: 1000 }));
    }

    #[test]
    fn resample_touches_only_one_layer() {
        let s = generate_slab(&params(0.5), 4, 5000, 3).unwrap();
        let same = s.resample_layer(2, s.layer_seeds[1]).unwrap();
        assert_eq!(same, s);
        let r = s.resample_layer(2, 999).unwrap();
        for k in [1, 3, 4] {
            assert_eq!(r.bits[k - 1], s.bits[k - 1]);
        }
        let hamming: u32 = r.bits[1].iter().zip(&s.bits[1]).map(|(a, b)| (a ^ b).count_ones()).sum();
        assert!(hamming > 0);
        assert!(s.resample_layer(5, 1).is_err());
    }

    #[test]
    fn flip_complements_inside_window() {
        let s = generate_slab(&params(0.3), 3, 10, 8).unwrap();
        let f = s.flipped();
        let cells = s.window.cells() as u64;
        assert_eq!(f.count_ones() + s.count_ones(), 3 * cells);
        for k in 1..=3 {
            for c in 0..s.window.cells() {
                assert_ne!(s.bit(k, c), f.bit(k, c));
            }
        }
    }

    #[test]
    fn scale_factor_values() {
        assert!((scale_factor((-1.0f64).exp(), 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((scale_factor((-8.0f64).exp(), 3).unwrap() - 2.0).abs() < 1e-14);
        // independent evaluation: ln 2
        assert!((scale_factor(0.5, 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(scale_factor(0.0, 1).is_err());
        assert!(scale_factor(1.0, 1).is_err());
    }
}
