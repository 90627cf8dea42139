//! Seeded piecewise-linear test signals.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum SynthError {
    #[error("signal needs at least 3 days, got {0}")]
    TooShort(usize),
    #[error("knot {knot} must lie strictly inside (0, {last})")]
    KnotOutOfRange { knot: usize, last: usize },
    #[error("knots must be strictly increasing")]
    KnotsNotIncreasing,
    #[error("{slopes} slopes given for {knots} knots, expected {}", knots + 1)]
    SlopeCount { knots: usize, slopes: usize },
    #[error("noise sd must be finite and nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("slopes and intercept must be finite")]
    NonFinite,
}

/// A continuous piecewise-linear signal plus i.i.d. Gaussian noise.
///
/// Slope `slopes[k]` applies from knot `k − 1` (or day 0) up to knot `k`, so a single
/// knot at 30 with slopes `[1, −1]` peaks exactly on day 30.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_days: usize,
    pub knots: Vec<usize>,
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_days < 3 {
            return Err(SynthError::TooShort(self.n_days));
        }
        let last = self.n_days - 1;
        if let Some(&knot) = self.knots.iter().find(|&&k| k == 0 || k >= last) {
            return Err(SynthError::KnotOutOfRange { knot, last });
        }
        if self.knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SynthError::KnotsNotIncreasing);
        }
        if self.slopes.len() != self.knots.len() + 1 {
            return Err(SynthError::SlopeCount {
                knots: self.knots.len(),
                slopes: self.slopes.len(),
            });
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SynthError::InvalidNoise(self.noise_sd));
        }
        if !self.intercept.is_finite() || self.slopes.iter().any(|s| !s.is_finite()) {
            return Err(SynthError::NonFinite);
        }
        Ok(())
    }

    /// The noiseless signal.
    pub fn clean(&self) -> Result<Vec<f64>, SynthError> {
        self.validate()?;
        let mut values = Vec::with_capacity(self.n_days);
        let mut v = self.intercept;
        let mut segment = 0;
        for day in 0..self.n_days {
            values.push(v);
            if segment < self.knots.len() && day == self.knots[segment] {
                segment += 1;
            }
            v += self.slopes[segment];
        }
        Ok(values)
    }

    /// The signal with noise drawn from a ChaCha8 stream seeded by `seed`.
    pub fn generate(&self) -> Result<Vec<f64>, SynthError> {
        let mut values = self.clean()?;
        if self.noise_sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let normal = Normal::new(0.0, self.noise_sd)
                .map_err(|_| SynthError::InvalidNoise(self.noise_sd))?;
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        Ok(values)
    }
}

/// Writes `day,value` rows for a generated signal.
pub fn write_csv<W: Write>(values: &[f64], mut out: W) -> io::Result<()> {
    writeln!(out, "day,value")?;
    for (day, v) in values.iter().enumerate() {
        writeln!(out, "{day},{v}")?;
    }
    out.flush()
}
