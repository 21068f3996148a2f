//! Seeded randomness helpers. All model randomness flows through one
//! `ChaCha12Rng` per training/sampling run.

use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha12Rng;

pub fn seeded(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    ChaCha12Rng::seed_from_u64(seed)
}

/// Deterministically derives a sub-stream seed (splitmix64 step).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal<T: Scalar, R: Rng>(rng: &mut R) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::of(v)
}

pub fn normal_vector<T: Scalar, R: Rng>(rng: &mut R, len: usize) -> Array1<T> {
    Array1::from_iter((0..len).map(|_| standard_normal::<T, R>(rng)))
}

pub fn normal_matrix<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<T> {
    let data: Vec<T> = (0..rows * cols)
        .map(|_| standard_normal::<T, R>(rng))
        .collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

pub fn uniform_01<T: Scalar, R: Rng>(rng: &mut R) -> T {
    T::of(rng.random::<f64>())
}
