//! Partition functions `Z_n^{eta, beta}` of the polymer with kernel
//! `f(k) = c1 exp(-c2 k^alpha)`, computed by log-domain transfer sweeps,
//! together with the enumeration oracle and identity checks.

mod brute;
mod checks;
mod kernel;
mod transfer;

pub use brute::{brute_force_partition, BrutePartition};
pub use checks::{
    beta_limit_check, beta_sweep, flip_identity_check, ground_state_bound, path_free_energy, restricted_energy_cap,
    restricted_jump_cap, BetaLimitReport, FlipReport,
};
pub use kernel::{kernel_normalizer, KernelSpec};
pub use transfer::{
    default_half_width, hard_obstacle_partition, log_partition, log_partition_auto, partition_function,
    PartitionMode, PartitionResult, UNDERFLOW_FLOOR,
};
