//! Reproducible random streams and Haar sampling.
//!
//! Every sample of an ensemble draws from its own [`RngStream`], derived from a
//! master seed and the sample index without touching any shared state. Streams
//! are ChaCha20 keystreams: the key comes from a SplitMix64 expansion of the
//! master seed and the 64-bit stream selector is the sample index, so two
//! indices never share a keystream and a stream can be recreated in any order
//! on any thread.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a master seed with an auxiliary index (a sweep grid point, say)
/// into a new master seed.
pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(master_seed) ^ mix64(index.wrapping_add(0x6a09_e667_f3bc_c909)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

/// Deterministic stream for sample `sample_index` of a run seeded with
/// `master_seed`.
pub fn derive_stream(master_seed: u64, sample_index: u64) -> RngStream {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(sample_index);
    RngStream {
        master_seed,
        stream_id: sample_index,
        rng,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal(&mut self, mean: f64, variance: f64) -> f64 {
        mean + variance.sqrt() * self.standard_normal()
    }

    /// Complex Gaussian with `E|z|^2 = 1` (real and imaginary parts have
    /// variance 1/2 each).
    pub fn complex_normal(&mut self) -> Complex64 {
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn ginibre(&mut self, rows: usize, cols: usize) -> Mat<Complex64> {
        // Column-major fill keeps the draw order independent of the backend.
        let mut m = Mat::<Complex64>::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = self.complex_normal();
            }
        }
        m
    }
}

/// Haar-distributed `dim x dim` unitary.
///
/// QR of a Ginibre matrix, with the phases of `diag(R)` moved back into `Q` so
/// the factorization is unique and the result is exactly Haar.
pub fn haar_unitary(stream: &mut RngStream, dim: usize) -> Result<Mat<Complex64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension(
            "Haar unitary of dimension 0".into(),
        ));
    }
    let z = stream.ginibre(dim, dim);
    let qr = z.qr();
    let mut q = qr.compute_thin_Q();
    let r = qr.thin_R();
    for j in 0..dim {
        let d = r[(j, j)];
        let modulus = d.norm();
        let phase = if modulus > 0.0 {
            d / modulus
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Haar-distributed unit vector in `C^dim`.
pub fn haar_unit_vector(stream: &mut RngStream, dim: usize) -> Result<Vec<Complex64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("Haar vector of dimension 0".into()));
    }
    let mut v: Vec<Complex64> = (0..dim).map(|_| stream.complex_normal()).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    Ok(v)
}
