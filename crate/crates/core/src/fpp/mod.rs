//! Minimum passage times over the point configuration.
//!
//! `T_n = min sum_k |x_{k-1} - x_k|_1^alpha` over paths from the origin
//! with `(k, x_k)` a point of the view for `k = 1..n`, confined to the
//! window. The solver prunes with the greedy upper bound and certifies
//! when the window could not have cut off a better path.

mod brute;
mod dp;
mod greedy;
mod improve;
mod sensitivity;

use std::io::Write;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub use brute::brute_force_passage;
pub use dp::{continuation_cost, face_to_face, passage_time, passage_time_auto};
pub use greedy::{greedy_upper_bound, nearest_point};
pub use improve::{improve_jump, jump_histogram, max_jump};
pub use sensitivity::{resample_sensitivity, resample_sensitivity_with_seeds, Sensitivity};

use crate::env::Site;
use crate::error::Result;

/// `Delta -> Delta^alpha` with exact integer paths for alpha in {1, 2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCost {
    alpha: f64,
}

impl JumpCost {
    pub fn new(alpha: f64) -> Self {
        JumpCost { alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn cost(&self, delta: i64) -> f64 {
        if delta == 0 {
            0.0
        } else if self.alpha == 1.0 {
            delta as f64
        } else if self.alpha == 2.0 {
            (delta * delta) as f64
        } else {
            (self.alpha * (delta as f64).ln()).exp()
        }
    }

    /// Largest `Delta` with `cost(Delta) <= budget`; -1 if the budget is
    /// negative.
    pub fn max_jump_within(&self, budget: f64) -> i64 {
        if budget < 0.0 || budget.is_nan() {
            return -1;
        }
        if budget.is_infinite() {
            return i64::MAX / 4;
        }
        let mut r = budget.powf(1.0 / self.alpha).floor() as i64;
        while self.cost(r + 1) <= budget {
            r += 1;
        }
        while r > 0 && self.cost(r) > budget {
            r -= 1;
        }
        r
    }

    /// Costs for `0..=max` in one table.
    pub fn table(&self, max: i64) -> Vec<f64> {
        (0..=max.max(0)).map(|k| self.cost(k)).collect()
    }
}

/// A directed path through consecutive layers.
///
/// `positions[0]` sits at `start_layer` (0 for paths from the origin);
/// `positions[i]` at layer `start_layer + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub d: usize,
    pub start_layer: usize,
    pub positions: Vec<Site>,
    /// l1 jump sizes, `jumps[i - 1] = |x_i - x_{i-1}|_1`.
    pub jumps: Vec<i64>,
    /// `sum jumps^alpha`.
    pub energy: f64,
    /// Number of obstacles visited after the start.
    pub hamiltonian: u32,
    pub max_jump: i64,
}

impl PathRecord {
    pub fn new(
        d: usize,
        start_layer: usize,
        positions: Vec<Site>,
        cost: JumpCost,
        obstacle: impl Fn(usize, Site) -> bool,
    ) -> Self {
        let jumps: Vec<i64> = positions.windows(2).map(|w| crate::env::l1(w[0], w[1])).collect();
        let energy = jumps.iter().fold(0.0, |acc, &j| acc + cost.cost(j));
        let hamiltonian = positions
            .iter()
            .enumerate()
            .skip(1)
            .filter(|&(i, &s)| obstacle(start_layer + i, s))
            .count() as u32;
        let max_jump = jumps.iter().copied().max().unwrap_or(0);
        PathRecord { d, start_layer, positions, jumps, energy, hamiltonian, max_jump }
    }

    pub fn steps(&self) -> usize {
        self.jumps.len()
    }

    pub fn end(&self) -> Site {
        *self.positions.last().expect("path has a start")
    }

    /// Recompute jumps and energy from the positions.
    pub fn recomputed_energy(&self, cost: JumpCost) -> f64 {
        self.positions
            .windows(2)
            .fold(0.0, |acc, w| acc + cost.cost(crate::env::l1(w[0], w[1])))
    }

    /// CSV with columns `layer,x0[,x1],jump,cumulative_energy`.
    pub fn write_csv<W: Write>(&self, w: W, cost: JumpCost) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["layer".to_string(), "x0".to_string()];
        if self.d == 2 {
            header.push("x1".into());
        }
        header.extend(["jump".to_string(), "cumulative_energy".to_string()]);
        out.write_record(&header)?;
        let mut cum = 0.0;
        for (i, s) in self.positions.iter().enumerate() {
            let jump = if i == 0 { 0 } else { self.jumps[i - 1] };
            cum += cost.cost(jump);
            let mut row = vec![(self.start_layer + i).to_string(), s[0].to_string()];
            if self.d == 2 {
                row.push(s[1].to_string());
            }
            row.push(jump.to_string());
            row.push(format!("{cum}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl Serialize for PathRecord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let positions: Vec<&[i64]> = self.positions.iter().map(|p| &p[..self.d]).collect();
        let mut st = s.serialize_struct("PathRecord", 6)?;
        st.serialize_field("start_layer", &self.start_layer)?;
        st.serialize_field("positions", &positions)?;
        st.serialize_field("jumps", &self.jumps)?;
        st.serialize_field("energy", &self.energy)?;
        st.serialize_field("hamiltonian", &self.hamiltonian)?;
        st.serialize_field("max_jump", &self.max_jump)?;
        st.end()
    }
}

/// Output of the passage-time solver.
#[derive(Debug, Clone, Serialize)]
pub struct PassageResult {
    /// Unscaled minimum.
    pub value: f64,
    /// `s_p^alpha * value`, present when `p` is in (0, 1).
    pub scaled_value: Option<f64>,
    pub path: PathRecord,
    /// The window did not bind: `value` is the unconfined minimum.
    pub exact: bool,
    /// Retained states per layer, starting with the start layer.
    pub frontier_stats: Vec<usize>,
    pub upper_bound_used: f64,
    pub half_width: i64,
}
