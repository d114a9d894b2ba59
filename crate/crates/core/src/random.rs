//! Reproducible random fields and keyed Gaussian streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral::{c64, leray_project, Mode, SpectralField};

/// Counter-based RNG keyed by `(seed, stream)`.
pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix two words into one key (splitmix64 finalizer).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(a << 6).wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mode_stream(k: Mode) -> u64 {
    let enc = |c: i32| (c + (1 << 20)) as u64;
    (enc(k.0[0]) << 42) | (enc(k.0[1]) << 21) | enc(k.0[2])
}

/// Gaussian coefficients with amplitude `(1+|k|)^{-decay}`, Hermitian
/// symmetric, optionally Leray-projected. Depends on `n` through the
/// traversal order.
pub fn random_field(n: usize, seed: u64, decay: f64, solenoidal: bool) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(n);
    for &(_, k) in f.ball_modes().iter() {
        if !(k.is_positive_half() || k == Mode::ZERO) {
            continue;
        }
        let amp = (1.0 + k.norm()).powf(-decay);
        let v = std::array::from_fn(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c64(re * amp, im * amp)
        });
        f.set_real_mode(k, v);
    }
    if solenoidal {
        leray_project(&f)
    } else {
        f
    }
}

/// Mean-free divergence-free field whose coefficient at each mode depends
/// only on `(seed, k)`, so the same underlying function is obtained at every
/// truncation radius.
pub fn keyed_spectrum(n: usize, seed: u64, decay: f64) -> SpectralField {
    let mut f = SpectralField::zeros(n);
    for &(_, k) in f.ball_modes().iter() {
        if !k.is_positive_half() {
            continue;
        }
        let mut rng = keyed_rng(seed, mode_stream(k));
        let amp = (1.0 + k.norm()).powf(-decay);
        let v = std::array::from_fn(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c64(re * amp, im * amp)
        });
        f.set_real_mode(k, v);
    }
    leray_project(&f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_spectrum_is_resolution_independent() {
        let a = keyed_spectrum(4, 3, 2.0);
        let b = keyed_spectrum(7, 3, 2.0);
        assert_eq!(b.resized(4), a);
        assert_eq!(a.hermitian_residual(), 0.0);
        assert!(a.is_mean_free());
    }

    #[test]
    fn random_field_is_hermitian() {
        let f = random_field(5, 1, 1.0, true);
        assert_eq!(f.hermitian_residual(), 0.0);
    }
}
