use polymerlab::env::{read_slab, regularize, theta_property_check, write_slab, EnvSlab, PointView};
use polymerlab::params::box_side;
use polymerlab::{generate_slab, ModelParams};
use proptest::prelude::*;

/// Reference implementation of the generator, written from the published
/// scheme rather than shared with the library.
mod reference {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    const INIT: u64 = 0x243F_6A88_85A3_08D3;

    fn splitmix_finalize(mut z: u64) -> u64 {
        z ^= z >> 30;
        z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z ^= z >> 27;
        z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn hash(words: &[u64]) -> u64 {
        let mut h = INIT;
        for &w in words {
            h = splitmix_finalize(h ^ splitmix_finalize(w.wrapping_add(GAMMA)));
        }
        h
    }

    pub fn obstacle(master: u64, k: usize, x: [i64; 2], p: f64) -> bool {
        let zz = |v: i64| if v >= 0 { 2 * v as u64 } else { 2 * (-v) as u64 - 1 };
        let key = zz(x[0]) | (zz(x[1]) << 32);
        let u = splitmix_finalize(hash(&[master, k as u64]) ^ splitmix_finalize(key.wrapping_add(GAMMA)));
        ((u >> 11) as f64 / (1u64 << 53) as f64) < p
    }
}

fn params(d: usize, p: f64) -> ModelParams {
    ModelParams { d, p, ..Default::default() }
}

#[test]
fn frozen_bit_table() {
    let s = generate_slab(&params(1, 0.5), 2, 2, 42).unwrap();
    let table: Vec<Vec<u8>> = (1..=2).map(|k| (-2..=2).map(|x| s.eta(k, [x, 0]) as u8).collect()).collect();
    assert_eq!(table, vec![vec![0, 0, 1, 1, 0], vec![1, 1, 0, 1, 0]]);
    assert_eq!(s.layer_seeds(), &[0x99d4_08dc_dcab_cbaf, 0x0740_14b8_8bf4_f6e4]);
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_slab(&s, &mut a).unwrap();
    write_slab(&generate_slab(&params(1, 0.5), 2, 2, 42).unwrap(), &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generator_matches_reference() {
    for (d, p, seed) in [(1, 0.5, 42u64), (1, 0.3, 7), (2, 0.8, 99), (2, 0.5, u64::MAX)] {
        let s = generate_slab(&params(d, p), 3, 5, seed).unwrap();
        for k in 1..=3 {
            assert_eq!(s.layer_seeds()[k - 1], reference::hash(&[seed, k as u64]));
            for c in 0..s.window().cells() {
                let x = s.window().site(c);
                assert_eq!(s.eta(k, x), reference::obstacle(seed, k, x, p), "{d} {p} {seed} {k} {x:?}");
            }
        }
    }
}

#[test]
fn empirical_density() {
    // just over 10^6 cells at p = 0.3
    let s = generate_slab(&params(1, 0.3), 2005, 249, 5).unwrap();
    let cells = (s.window().cells() * s.n()) as f64;
    assert!(cells >= 1e6);
    let mean = s.count_ones() as f64 / cells;
    let sd = (0.3 * 0.7 / cells).sqrt();
    assert!((mean - 0.3).abs() <= 3.0 * sd, "mean {mean}");
}

#[test]
fn distinct_fresh_seeds_differ() {
    let s = generate_slab(&params(1, 0.5), 2, 5000, 3).unwrap();
    let a = s.resample_layer(1, 10).unwrap();
    let b = s.resample_layer(1, 11).unwrap();
    let ham: u32 = a
        .layer_words(1)
        .unwrap()
        .iter()
        .zip(b.layer_words(1).unwrap())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum();
    assert!(ham > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resampling_touches_one_layer(seed: u64, fresh: u64, m in 1usize..=6, p in 0.0f64..0.95, d in 1usize..=2) {
        let s = generate_slab(&params(d, p), 6, 4, seed).unwrap();
        let t = s.resample_layer(m, fresh).unwrap();
        for k in 1..=6 {
            if k != m {
                prop_assert_eq!(s.layer_words(k).unwrap(), t.layer_words(k).unwrap());
            }
        }
        let same = s.resample_layer(m, s.layer_seeds()[m - 1]).unwrap();
        prop_assert_eq!(&same, &s);
    }

    #[test]
    fn open_sites_are_the_zero_bits(seed: u64, p in 0.0f64..0.95, d in 1usize..=2) {
        let s = generate_slab(&params(d, p), 3, 3, seed).unwrap();
        for k in 1..=3 {
            let scan: Vec<_> = (0..s.window().cells()).map(|c| s.window().site(c)).filter(|&x| !s.eta(k, x)).collect();
            let mut open = s.open_sites(k).unwrap();
            open.sort();
            let mut scan = scan;
            scan.sort();
            prop_assert_eq!(open, scan);
        }
    }

    #[test]
    fn bits_survive_window_growth(seed: u64, p in 0.0f64..0.95, d in 1usize..=2, h in 1i64..6) {
        let s = generate_slab(&params(d, p), 4, h, seed).unwrap();
        let big = s.regrow(h + 7, 1 << 24).unwrap();
        for k in 1..=4 {
            for c in 0..s.window().cells() {
                let x = s.window().site(c);
                prop_assert_eq!(s.eta(k, x), big.eta(k, x));
            }
        }
    }

    #[test]
    fn binary_round_trip(seed: u64, p in 0.0f64..0.95, d in 1usize..=2, n in 1usize..5, h in 1i64..7) {
        let s = generate_slab(&params(d, p), n, h, seed).unwrap();
        let mut buf = Vec::new();
        write_slab(&s, &mut buf).unwrap();
        let back = read_slab(buf.as_slice()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn flipping_twice_is_identity(seed: u64, p in 0.0f64..0.95, d in 1usize..=2) {
        let s = generate_slab(&params(d, p), 3, 4, seed).unwrap();
        let f = s.flipped();
        for k in 1..=3 {
            for c in 0..s.window().cells() {
                let x = s.window().site(c);
                prop_assert_ne!(s.eta(k, x), f.eta(k, x));
            }
        }
        prop_assert_eq!(f.flipped().count_ones(), s.count_ones());
    }

    #[test]
    fn regularized_view_has_the_theta_property(
        seed: u64,
        p in 0.0f64..0.99,
        d in 1usize..=2,
        n in 2usize..40,
        theta in 0.1f64..0.9,
    ) {
        let h = if d == 1 { 30 } else { 9 };
        let s = generate_slab(&params(d, p), n, h, seed).unwrap();
        let reg = regularize(&s, theta).unwrap();
        prop_assert!(theta_property_check(&reg, theta));
        prop_assert_eq!(reg.box_side, box_side(n, theta));
        // the regularized view only adds points
        for k in 1..=n {
            for c in 0..s.window().cells() {
                if s.is_point(k, c) {
                    prop_assert!(reg.is_point(k, c));
                }
            }
        }
    }
}

#[test]
fn all_obstacle_layer_gets_one_point_per_box() {
    let s = EnvSlab::from_fn(1, 9, 1, |_, _| true);
    let reg = regularize(&s, 0.5).unwrap();
    let b = reg.box_side;
    assert_eq!(b, 1);
    assert_eq!(reg.added_count(), 19);
    let s = EnvSlab::from_fn(1, 9, 16, |_, _| true);
    let reg = regularize(&s, 0.5).unwrap();
    assert_eq!(reg.box_side, 4);
    // boxes anchored on 4Z covering [-9, 9]: [-12,-9] .. [8,11], six per layer
    assert_eq!(reg.added_points[0], vec![[-9, 0], [-8, 0], [-4, 0], [0, 0], [4, 0], [8, 0]]);
}
