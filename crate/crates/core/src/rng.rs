//! Seedable random streams and the non-uniform draws the samplers need.
//!
//! Every chain owns one [`RngStream`]. Streams are ChaCha8 keystreams keyed by
//! the 64-bit seed and separated by the ChaCha stream word, so any number of
//! chains can be created in O(1) from a single experiment seed without
//! overlapping.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RngError {
    #[error("requested an empty normal vector (n must be at least 1)")]
    EmptyRequest,
    #[error("invalid distribution parameter {name} = {value} (must be positive and finite)")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// A deterministic random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = StandardNormal.sample(&mut self.inner);
        }
    }

    pub fn sample_standard_normal_vec(&mut self, n: usize) -> Result<Vec<f64>, RngError> {
        if n == 0 {
            return Err(RngError::EmptyRequest);
        }
        let mut out = vec![0.0; n];
        self.fill_standard_normal(&mut out);
        Ok(out)
    }

    /// Inverse-Gaussian draw with the given mean and shape, using the
    /// Michael–Schucany–Haas transformation (one normal, one uniform).
    pub fn sample_inverse_gaussian(&mut self, mean: f64, shape: f64) -> Result<f64, RngError> {
        check_positive("mean", mean)?;
        check_positive("shape", shape)?;
        let nu = self.standard_normal();
        let y = nu * nu;
        let my = mean * y;
        // Smaller root of the MSH quadratic, rationalized so that it stays
        // positive when mean * y / shape is large.
        let x = mean - 2.0 * mean * my / (my + (4.0 * mean * shape * y + my * my).sqrt());
        let z = self.uniform();
        let draw = if z <= mean / (mean + x) {
            x
        } else {
            mean * mean / x
        };
        Ok(draw.max(f64::MIN_POSITIVE))
    }

    /// Gamma draw with shape `k` and rate `rate` (mean `k / rate`).
    pub fn sample_gamma(&mut self, shape_k: f64, rate: f64) -> Result<f64, RngError> {
        check_positive("shape_k", shape_k)?;
        check_positive("rate", rate)?;
        let dist = Gamma::new(shape_k, 1.0 / rate).map_err(|_| RngError::InvalidParameter {
            name: "rate",
            value: rate,
        })?;
        Ok(dist.sample(&mut self.inner).max(f64::MIN_POSITIVE))
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), RngError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RngError::InvalidParameter { name, value })
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
