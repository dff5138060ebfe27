//! Seedable random streams and the six unit-variance parent distributions
//! used by the simulation study.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_mt::Mt64;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a parent key with a child index into a new 64-bit key.
pub fn mix_seed(key: u64, index: u64) -> u64 {
    splitmix64(splitmix64(key) ^ splitmix64(index.wrapping_add(GOLDEN_GAMMA)).rotate_left(17))
}

/// A reproducible MT19937-64 stream identified by a mixed 64-bit key.
///
/// Streams are single-owner. Child streams are obtained with [`RngStream::derive`],
/// which hash-mixes the parent's key with a child index; no jump-ahead is used.
#[derive(Clone)]
pub struct RngStream {
    key: u64,
    inner: Mt64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self::from_key(mix_seed(master_seed, stream_index))
    }

    /// Stream seeded directly with `key`, bypassing mixing.
    pub fn from_key(key: u64) -> Self {
        Self {
            key,
            inner: Mt64::new(key),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream `index` of this stream. Depends only on the key, never on
    /// how many values have already been drawn.
    pub fn derive(&self, index: u64) -> Self {
        Self::new(self.key, index)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        self.sample(Open01)
    }

    /// Uniform index in `0..len`.
    pub fn index(&mut self, len: usize) -> usize {
        self.random_range(0..len)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

/// Equivalent to [`RngStream::new`].
pub fn new_stream(master_seed: u64, stream_index: u64) -> RngStream {
    RngStream::new(master_seed, stream_index)
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream").field("key", &self.key).finish()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

impl SeedableRng for RngStream {
    type Seed = [u8; 8];

    fn from_seed(seed: Self::Seed) -> Self {
        Self::from_key(u64::from_le_bytes(seed))
    }
}

/// Gamma(shape, 1) variate by Marsaglia and Tsang's squeeze method.
///
/// Shapes below one use the boost `Gamma(a) = Gamma(a + 1) * U^(1/a)`.
pub fn sample_gamma(shape: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boost = rng.uniform_open().powf(1.0 / shape);
        return sample_gamma(shape + 1.0, rng) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Natural log of a Gamma(shape, 1) variate. Stays finite for tiny shapes
/// where the variate itself can underflow.
pub fn sample_ln_gamma(shape: f64, rng: &mut RngStream) -> f64 {
    if shape < 1.0 {
        let ln_boost = rng.uniform_open().ln() / shape;
        return sample_gamma(shape + 1.0, rng).ln() + ln_boost;
    }
    sample_gamma(shape, rng).ln()
}

/// Parent distributions of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistributionKind {
    Uniform,
    Normal,
    ExtremeValue,
    Laplace,
    StudentT5,
    Exponential,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 6] = [
        DistributionKind::Uniform,
        DistributionKind::Normal,
        DistributionKind::ExtremeValue,
        DistributionKind::Laplace,
        DistributionKind::StudentT5,
        DistributionKind::Exponential,
    ];

    /// Population kurtosis (fourth standardized moment, not excess).
    pub fn kurtosis(self) -> f64 {
        match self {
            DistributionKind::Uniform => 1.8,
            DistributionKind::Normal => 3.0,
            DistributionKind::ExtremeValue => 5.4,
            DistributionKind::Laplace => 6.0,
            DistributionKind::StudentT5 => 9.0,
            DistributionKind::Exponential => 9.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Uniform => "uniform",
            DistributionKind::Normal => "normal",
            DistributionKind::ExtremeValue => "extreme",
            DistributionKind::Laplace => "laplace",
            DistributionKind::StudentT5 => "t5",
            DistributionKind::Exponential => "exponential",
        }
    }

    /// Column heading used in the rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            DistributionKind::Uniform => "Uniform",
            DistributionKind::Normal => "Normal",
            DistributionKind::ExtremeValue => "Extreme",
            DistributionKind::Laplace => "Laplace",
            DistributionKind::StudentT5 => "Student's t5",
            DistributionKind::Exponential => "Exponential",
        }
    }

    /// One draw with zero mean and unit variance.
    pub fn draw(self, rng: &mut RngStream) -> f64 {
        match self {
            DistributionKind::Uniform => (rng.uniform_open() - 0.5) * 12f64.sqrt(),
            DistributionKind::Normal => rng.standard_normal(),
            DistributionKind::ExtremeValue => {
                // Gumbel: mean is the Euler-Mascheroni constant, sd pi/sqrt(6).
                let g = -(-rng.uniform_open().ln()).ln();
                (g - EULER_GAMMA) * 6f64.sqrt() / PI
            }
            DistributionKind::Laplace => {
                let u = rng.uniform_open() - 0.5;
                let x = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
                x / 2f64.sqrt()
            }
            DistributionKind::StudentT5 => {
                let z = rng.standard_normal();
                let chi2 = 2.0 * sample_gamma(2.5, rng);
                let t = z / (chi2 / 5.0).sqrt();
                t / (5.0f64 / 3.0).sqrt()
            }
            DistributionKind::Exponential => -rng.uniform_open().ln() - 1.0,
        }
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(DistributionKind::Uniform),
            "normal" | "gaussian" => Ok(DistributionKind::Normal),
            "extreme" | "extreme_value" | "gumbel" => Ok(DistributionKind::ExtremeValue),
            "laplace" => Ok(DistributionKind::Laplace),
            "t5" | "student_t5" => Ok(DistributionKind::StudentT5),
            "exponential" => Ok(DistributionKind::Exponential),
            other => Err(Error::InvalidInput(format!(
                "unknown distribution `{other}`"
            ))),
        }
    }
}

/// `n` i.i.d. draws from `kind`, centered and scaled to unit population variance.
pub fn sample_standardized(
    kind: DistributionKind,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok((0..n).map(|_| kind.draw(rng)).collect())
}
