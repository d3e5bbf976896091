//! Pruned layered dynamic program.
//!
//! States `(k, x)` whose best prefix cost exceeds the greedy bound `UB` are
//! dropped, and jumps out of a state are limited to the remaining budget.
//! The result is certified exact when every retained state keeps its
//! whole reachable ball inside the window (minus the view's boundary
//! margin): an unconfined path that beats the confined optimum would
//! have to leave the window from a retained state, which is impossible.

use super::greedy::greedy_from;
use super::{JumpCost, PassageResult, PathRecord};
use crate::env::{self, EnvSlab, PointView, Site, Window};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Retained states of one layer, sorted by cell.
struct Layer {
    cells: Vec<u32>,
    cost: Vec<f64>,
}

impl Layer {
    fn lookup(&self, cell: u32) -> Option<f64> {
        self.cells.binary_search(&cell).ok().map(|i| self.cost[i])
    }
}

fn tie_tol(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

struct Solver<'a, V: PointView + ?Sized> {
    view: &'a V,
    window: Window,
    jc: JumpCost,
    table: Vec<f64>,
    ub: f64,
}

impl<V: PointView + ?Sized> Solver<'_, V> {
    fn budget_radius(&self, cost: f64) -> i64 {
        // table is increasing; find the largest Delta with prefix + c <= ub
        let budget = self.ub - cost;
        if budget < 0.0 {
            return -1;
        }
        let t = &self.table;
        t.partition_point(|&c| c <= budget) as i64 - 1
    }

    fn sweep(&self, k0: usize, k1: usize, starts: &[usize]) -> Vec<Layer> {
        let w = self.window;
        let mut layers = Vec::with_capacity(k1 - k0 + 1);
        layers.push(Layer {
            cells: starts.iter().map(|&c| c as u32).collect(),
            cost: vec![0.0; starts.len()],
        });
        let mut scratch = vec![f64::INFINITY; w.cells()];
        let mut touched: Vec<u32> = Vec::new();
        for k in k0 + 1..=k1 {
            let prev = layers.last().unwrap();
            for (&c, &base) in prev.cells.iter().zip(&prev.cost) {
                let r = self.budget_radius(base);
                if r < 0 {
                    continue;
                }
                w.for_each_in_ball(w.site(c as usize), r, |y, dist| {
                    let yc = w.index(y).unwrap();
                    if !self.view.is_point(k, yc) {
                        return;
                    }
                    let cand = base + self.table[dist as usize];
                    if cand > self.ub {
                        return;
                    }
                    let slot = &mut scratch[yc];
                    if slot.is_infinite() {
                        touched.push(yc as u32);
                    }
                    if cand < *slot {
                        *slot = cand;
                    }
                });
            }
            touched.sort_unstable();
            let cost = touched.iter().map(|&c| scratch[c as usize]).collect();
            for &c in &touched {
                scratch[c as usize] = f64::INFINITY;
            }
            layers.push(Layer { cells: std::mem::take(&mut touched), cost });
        }
        layers
    }

    /// Lexicographically smallest minimizing position sequence.
    fn reconstruct(&self, layers: &[Layer]) -> Option<(f64, Vec<Site>)> {
        let w = self.window;
        let last = layers.last()?;
        let opt = last.cost.iter().copied().fold(f64::INFINITY, f64::min);
        if !opt.is_finite() {
            return None;
        }
        let tol = tie_tol(opt);
        // on_opt[i]: states of layer i lying on some minimizing path
        let mut on_opt: Vec<Vec<u32>> = vec![Vec::new(); layers.len()];
        on_opt[layers.len() - 1] = last
            .cells
            .iter()
            .zip(&last.cost)
            .filter(|&(_, &c)| c <= opt + tol)
            .map(|(&c, _)| c)
            .collect();
        for i in (1..layers.len()).rev() {
            let (prev, cur) = (&layers[i - 1], &layers[i]);
            let mut found = Vec::new();
            for &y in &on_opt[i] {
                let cy = cur.lookup(y).unwrap();
                let r = self.jc.max_jump_within(cy + tol).min(self.table.len() as i64 - 1);
                w.for_each_in_ball(w.site(y as usize), r, |x, dist| {
                    let xc = w.index(x).unwrap() as u32;
                    if let Some(cx) = prev.lookup(xc) {
                        if cx + self.table[dist as usize] <= cy + tol {
                            found.push(xc);
                        }
                    }
                });
            }
            found.sort_unstable();
            found.dedup();
            on_opt[i - 1] = found;
        }
        let mut cur = *on_opt[0].first()?;
        let mut cur_cost = layers[0].lookup(cur).unwrap();
        let mut positions = vec![w.site(cur as usize)];
        for i in 1..layers.len() {
            let from = w.site(cur as usize);
            let next = on_opt[i].iter().copied().find(|&y| {
                let dist = env::l1(from, w.site(y as usize));
                (dist as usize) < self.table.len()
                    && cur_cost + self.table[dist as usize] <= layers[i].lookup(y).unwrap() + tol
            })?;
            cur = next;
            cur_cost = layers[i].lookup(cur).unwrap();
            positions.push(w.site(cur as usize));
        }
        Some((opt, positions))
    }

    fn certified(&self, layers: &[Layer]) -> bool {
        let w = self.window;
        let margin = self.view.boundary_margin();
        let last = layers.len() - 1;
        layers.iter().enumerate().all(|(i, layer)| {
            layer.cells.iter().zip(&layer.cost).all(|(&c, &cost)| {
                let r = if i == last { 1 } else { self.budget_radius(cost).max(1) };
                w.ball_inside(w.site(c as usize), r, margin)
            })
        })
    }
}

fn check_layers<V: PointView + ?Sized>(view: &V, k0: usize, k1: usize) -> Result<()> {
    if k1 > view.layers() || k0 >= k1 {
        return Err(Error::LayerOutOfRange { layer: k1, layers: view.layers() });
    }
    for k in k0 + 1..=k1 {
        if view.layer_is_empty(k) {
            return Err(Error::Infeasible { layer: k });
        }
    }
    Ok(())
}

fn solve<V: PointView + ?Sized>(
    view: &V,
    k0: usize,
    k1: usize,
    starts: &[usize],
    greedy_start: Site,
    params: &ModelParams,
) -> Result<PassageResult> {
    params.validate()?;
    check_layers(view, k0, k1)?;
    let jc = JumpCost::new(params.alpha);
    let window = view.window();
    let (ub, _) = greedy_from(view, k0, k1, greedy_start, jc)?;
    // slack keeps the greedy path itself inside the pruning bound
    let ub = ub + tie_tol(ub);
    let table = jc.table(jc.max_jump_within(ub).min(window.diameter()));
    let solver = Solver { view, window, jc, table, ub };
    let layers = solver.sweep(k0, k1, starts);
    let (value, positions) = solver
        .reconstruct(&layers)
        .ok_or(Error::Infeasible { layer: k1 })?;
    let exact = solver.certified(&layers);
    let path = PathRecord::new(window.d, k0, positions, jc, |k, s| view.obstacle(k, s));
    let scaled_value = if params.p > 0.0 && params.p < 1.0 {
        Some(env::scale_factor(params.p, params.d as u32)?.powf(params.alpha) * value)
    } else {
        None
    };
    Ok(PassageResult {
        value,
        scaled_value,
        path,
        exact,
        frontier_stats: layers.iter().map(|l| l.cells.len()).collect(),
        upper_bound_used: ub,
        half_width: window.half_width,
    })
}

/// Minimum passage time from the origin through layers `1..=n`.
pub fn passage_time<V: PointView + ?Sized>(view: &V, n: usize, params: &ModelParams) -> Result<PassageResult> {
    let w = view.window();
    let origin = w.index([0, 0]).expect("origin is in every window");
    solve(view, 0, n, &[origin], [0, 0], params)
}

/// Face-to-face time from layer `k` to layer `l`: free start at layer `k`
/// anywhere with `|x|_inf < box_half_width`.
pub fn face_to_face<V: PointView + ?Sized>(
    view: &V,
    k: usize,
    l: usize,
    box_half_width: f64,
    params: &ModelParams,
) -> Result<PassageResult> {
    let w = view.window();
    if !(box_half_width > 0.0) {
        return Err(Error::InvalidParams(format!("box bound must be positive, got {box_half_width}")));
    }
    if box_half_width > w.half_width as f64 {
        return Err(Error::InvalidParams(format!(
            "box bound {box_half_width} exceeds window half-width {}",
            w.half_width
        )));
    }
    if k >= l {
        return Err(Error::InvalidParams(format!("face-to-face needs k < l, got {k} >= {l}")));
    }
    let starts: Vec<usize> = (0..w.cells())
        .filter(|&c| {
            let s = w.site(c);
            (0..w.d).all(|i| (s[i].abs() as f64) < box_half_width)
        })
        .collect();
    solve(view, k, l, &starts, [0, 0], params)
}

/// Cheapest continuation from `(k, start)` to layer `l`.
pub fn continuation_cost<V: PointView + ?Sized>(
    view: &V,
    k: usize,
    l: usize,
    start: Site,
    params: &ModelParams,
) -> Result<PassageResult> {
    let w = view.window();
    let c = w
        .index(start)
        .ok_or_else(|| Error::InvalidParams(format!("start {start:?} outside the window")))?;
    solve(view, k, l, &[c], start, params)
}

/// Passage time on a generated slab, doubling the window until the
/// result is certified exact. Returns the slab actually used.
pub fn passage_time_auto(
    slab: EnvSlab,
    n: usize,
    params: &ModelParams,
    regularized: bool,
    max_cells: u64,
) -> Result<(EnvSlab, PassageResult)> {
    env::grow_until(slab, max_cells, |s| {
        let res = if regularized {
            passage_time(&env::regularize(s, params.theta)?, n, params)
        } else {
            passage_time(s, n, params)
        };
        match res {
            Ok(r) => {
                let exact = r.exact;
                Ok((Some(r), exact))
            }
            // an empty layer of a generated slab is an artifact of the window
            Err(Error::Infeasible { .. }) if !s.is_synthetic() && s.p() < 1.0 => Ok((None, false)),
            Err(e) => Err(e),
        }
    })
    .map(|(s, r)| (s, r.expect("grow_until stops only on a result")))
}
