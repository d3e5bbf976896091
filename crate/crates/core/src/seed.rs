//! Stable 64-bit mixing used for every derived seed and for the
//! counter-based environment generator.
//!
//! The scheme is frozen: changing any constant here changes every
//! environment ever generated.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const HASH_INIT: u64 = 0x243F_6A88_85A3_08D3;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
///
/// `h_0 = HASH_INIT`, `h_{i+1} = mix64(h_i ^ mix64(w_i + GOLDEN_GAMMA))`.
pub fn hash64(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(HASH_INIT, |h, &w| mix64(h ^ mix64(w.wrapping_add(GOLDEN_GAMMA))))
}

/// Seed of layer `k` (1-based) for a given master seed.
#[inline]
pub fn layer_seed(master_seed: u64, k: usize) -> u64 {
    hash64(&[master_seed, k as u64])
}

/// Seed of replica `r` at size `n`.
#[inline]
pub fn replica_seed(master_seed: u64, n: usize, r: usize) -> u64 {
    hash64(&[master_seed, n as u64, r as u64])
}

#[inline]
fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Uniform draw in [0, 1) attached to the lattice site `site` of a layer
/// whose stream seed is `layer_seed`. Independent of any window.
#[inline]
pub fn site_uniform(layer_seed: u64, site: [i64; 2]) -> f64 {
    let key = zigzag(site[0]) | (zigzag(site[1]) << 32);
    let u = mix64(layer_seed ^ mix64(key.wrapping_add(GOLDEN_GAMMA)));
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        // Pinned so accidental edits to the mixing scheme are caught.
        assert_eq!(mix64(0), 0);
        assert_eq!(hash64(&[]), HASH_INIT);
        assert_ne!(layer_seed(1, 1), layer_seed(1, 2));
        assert_ne!(replica_seed(1, 64, 0), replica_seed(1, 128, 0));
        assert_eq!(hash64(&[42, 7]), hash64(&[42, 7]));
        assert_ne!(hash64(&[42, 7]), hash64(&[7, 42]));
    }

    #[test]
    fn uniform_is_in_unit_interval_and_roughly_flat() {
        let s = layer_seed(9, 3);
        let mut below = 0usize;
        let total = 200_000;
        for x in 0..total as i64 {
            let u = site_uniform(s, [x - 100_000, 0]);
            assert!((0.0..1.0).contains(&u));
            if u < 0.25 {
                below += 1;
            }
        }
        let frac = below as f64 / total as f64;
        let sd = (0.25 * 0.75 / total as f64).sqrt();
        assert!((frac - 0.25).abs() < 5.0 * sd, "frac {frac}");
    }
}
