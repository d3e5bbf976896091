use polymerlab::env::{regularize, EnvSlab, PointView};
use polymerlab::fpp::{brute_force_passage, greedy_upper_bound, improve_jump, passage_time, JumpCost};
use polymerlab::polymer::{
    brute_force_partition, flip_identity_check, hard_obstacle_partition, partition_function, path_free_energy,
    restricted_energy_cap, restricted_jump_cap, KernelSpec,
};
use polymerlab::{generate_slab, Beta, Error, ModelParams};
use proptest::prelude::*;

fn model(d: usize, alpha: f64, p: f64, beta: f64) -> ModelParams {
    ModelParams { d, alpha, p, beta: Beta::Finite(beta), ..Default::default() }
}

/// Copy of `s` with `(k, x)` forced to `value`.
fn with_bit(s: &EnvSlab, k: usize, x: [i64; 2], value: bool) -> EnvSlab {
    EnvSlab::from_fn(s.d(), s.half_width(), s.n(), |kk, y| if kk == k && y == x { value } else { s.eta(kk, y) })
}

fn small_slab(d: usize, p: f64, n: usize, seed: u64) -> EnvSlab {
    let h = if d == 1 { 5 } else { 2 };
    generate_slab(&model(d, 1.0, p, -1.0), n, h, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn passage_time_matches_enumeration(
        seed: u64,
        d in 1usize..=2,
        alpha in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]),
        p in 0.0f64..0.9,
        n in 1usize..=4,
    ) {
        let n = if d == 2 { n.min(3) } else { n };
        let s = small_slab(d, p, n, seed);
        let params = model(d, alpha, p, -1.0);
        let brute = brute_force_passage(&s, n, 2 * s.half_width() * d as i64, &params).unwrap();
        match passage_time(&s, n, &params) {
            Ok(r) => {
                prop_assert!((r.value - brute).abs() <= 1e-12 * brute.max(1.0));
                prop_assert!((r.path.recomputed_energy(JumpCost::new(alpha)) - r.value).abs() <= 1e-12 * r.value.max(1.0));
                prop_assert_eq!(r.path.hamiltonian, 0);
                let (g, _) = greedy_upper_bound(&s, n, &params).unwrap();
                prop_assert!(g >= r.value - 1e-12 * g.max(1.0));
            }
            Err(Error::Infeasible { .. }) => prop_assert!(brute.is_infinite()),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn opening_a_site_never_raises_the_passage_time(
        seed: u64,
        d in 1usize..=2,
        p in 0.2f64..0.8,
        k in 1usize..=5,
        x0 in -2i64..=2,
        x1 in -2i64..=2,
    ) {
        let s = small_slab(d, p, 5, seed);
        let x = [x0, if d == 2 { x1 } else { 0 }];
        let params = model(d, 2.0, p, -1.0);
        let opened = with_bit(&s, k, x, false);
        let after = passage_time(&opened, 5, &params).map(|r| r.value).unwrap_or(f64::INFINITY);
        let before = passage_time(&s, 5, &params).map(|r| r.value).unwrap_or(f64::INFINITY);
        prop_assert!(after <= before);
    }

    #[test]
    fn transfer_matches_enumeration(
        seed: u64,
        d in 1usize..=2,
        alpha in prop::sample::select(vec![0.5, 1.0, 2.0]),
        p in 0.0f64..0.9,
        beta in prop::sample::select(vec![-5.0, -1.0, -0.1, 0.0, 0.3, 2.0]),
        n in 1usize..=3,
        cap in 1i64..=4,
    ) {
        let s = small_slab(d, p, n, seed);
        let params = model(d, alpha, p, beta);
        let kernel = KernelSpec::with_cap(&params, cap).unwrap();
        let brute = brute_force_partition(&s, n, cap, &params, &kernel, params.beta, None, None).unwrap();
        if let Ok(r) = partition_function(&s, n, &params, &kernel) {
            prop_assert!((r.log_z - brute.log_z).abs() <= 1e-10 * brute.log_z.abs().max(1.0));
            prop_assert!(r.error_certificate >= 0.0);
        } else {
            prop_assert!(beta > 0.0);
        }
        let hard = params.with_beta(Beta::NegInfinity);
        let r = hard_obstacle_partition(&s, n, &hard, &kernel).unwrap();
        let b = brute_force_partition(&s, n, cap, &hard, &kernel, Beta::NegInfinity, None, None).unwrap();
        if b.log_z.is_finite() {
            prop_assert!((r.log_z - b.log_z).abs() <= 1e-10 * b.log_z.abs().max(1.0));
        } else {
            prop_assert_eq!(r.log_z, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn flip_identity_holds(
        seed: u64,
        d in 1usize..=2,
        p in 0.0f64..0.95,
        beta in -6.0f64..6.0,
        n in 1usize..=6,
    ) {
        let s = small_slab(d, p, n, seed);
        let params = model(d, 1.5, p, beta);
        let kernel = KernelSpec::with_cap(&params, 3).unwrap();
        let f = flip_identity_check(&s, n, &params, &kernel).unwrap();
        prop_assert!(f.residual <= 1e-10 * f.lhs.abs().max(1.0), "{f:?}");
    }

    #[test]
    fn log_z_is_monotone(
        seed: u64,
        d in 1usize..=2,
        p in 0.1f64..0.9,
        b1 in -4.0f64..0.0,
        gap in 0.01f64..2.0,
        k in 1usize..=4,
        x0 in -2i64..=2,
    ) {
        let s = small_slab(d, p, 4, seed);
        let params = model(d, 2.0, p, b1);
        let kernel = KernelSpec::with_cap(&params, 3).unwrap();
        let lo = partition_function(&s, 4, &params, &kernel).unwrap().log_z;
        let hi_beta = params.with_beta(Beta::Finite((b1 + gap).min(0.0)));
        let hi = partition_function(&s, 4, &hi_beta, &kernel).unwrap().log_z;
        prop_assert!(lo <= hi + 1e-12);
        let blocked = with_bit(&s, k, [x0, 0], true);
        let after = partition_function(&blocked, 4, &params, &kernel).unwrap().log_z;
        prop_assert!(after <= lo + 1e-12);
    }

    #[test]
    fn sandwich_orders_the_restricted_sums(
        seed: u64,
        d in 1usize..=2,
        p in 0.0f64..0.9,
        beta in -3.0f64..1.0,
        theta in 0.05f64..0.5,
        n in 1usize..=3,
    ) {
        let s = small_slab(d, p, n, seed);
        let params = ModelParams { theta, ..model(d, 1.0, p, beta) };
        let cap = 2 * s.half_width() * d as i64;
        let kernel = KernelSpec::with_cap(&params, cap).unwrap();
        let e = restricted_energy_cap(&params, n);
        let j = restricted_jump_cap(&params, n);
        let r = brute_force_partition(&s, n, cap, &params, &kernel, params.beta, Some(e), Some(j)).unwrap();
        prop_assert!(r.log_z_restricted <= r.log_z_jump_capped);
        prop_assert!(r.log_z_jump_capped <= r.log_z);
    }

    #[test]
    fn optimal_regularized_paths_are_locally_optimal(
        seed: u64,
        alpha in prop::sample::select(vec![0.5, 1.0, 2.0]),
        p in 0.0f64..0.95,
        n in 4usize..40,
    ) {
        let params = model(1, alpha, p, -1.0);
        let s = generate_slab(&params, n, 3 * n as i64, seed).unwrap();
        let reg = regularize(&s, params.theta).unwrap();
        let r = passage_time(&reg, n, &params).unwrap();
        for step in 1..n {
            prop_assert!(improve_jump(&r.path, &reg, step, &params).is_none());
        }
    }
}

#[test]
fn p_zero_passage_time_is_zero() {
    for d in [1, 2] {
        let params = model(d, 2.0, 0.0, -1.0);
        let s = generate_slab(&params, 12, 3, 17).unwrap();
        let r = passage_time(&s, 12, &params).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.exact);
        assert_eq!(r.scaled_value, None);
    }
}

#[test]
fn scaled_value_uses_s_p_to_the_alpha() {
    let params = model(2, 1.5, 0.4, -1.0);
    let s = generate_slab(&params, 6, 6, 3).unwrap();
    let r = passage_time(&s, 6, &params).unwrap();
    let sp = (1.0f64 / 0.4).ln().sqrt();
    assert!((r.scaled_value.unwrap() - sp.powf(1.5) * r.value).abs() <= 1e-12 * r.value.max(1.0));
}

#[test]
fn free_energy_of_the_optimal_path_bounds_log_z() {
    // the single optimal open path is one of the summed terms
    let params = model(1, 2.0, 0.5, -2.0);
    let s = generate_slab(&params, 5, 5, 8).unwrap();
    let kernel = KernelSpec::with_cap(&params, 10).unwrap();
    let r = passage_time(&s, 5, &params).unwrap();
    let lz = partition_function(&s, 5, &params, &kernel).unwrap().log_z;
    let term = 5.0 * kernel.log_c1 - kernel.c2 * r.value;
    assert!(lz >= term);
    let fe = path_free_energy(&r.path, &params).unwrap();
    assert_eq!(fe, r.value);
    assert!(s.window().contains(r.path.end()));
}
