//! Diagonal Gaussian observation noise.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ChaCha stream used for the one-off covariance draw.
pub const COVARIANCE_STREAM: u64 = 0;

/// Named `(N_a, N_b)` pairs from the temperature experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    Ii,
    #[serde(rename = "iii")]
    Iii,
}

impl Scenario {
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Scenario::I => (0.012, 0.0),
            Scenario::Ii => (0.05, 0.0),
            Scenario::Iii => (0.05, 0.05),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::I => "i",
            Scenario::Ii => "ii",
            Scenario::Iii => "iii",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i" => Some(Scenario::I),
            "ii" => Some(Scenario::Ii),
            "iii" => Some(Scenario::Iii),
            _ => None,
        }
    }

    pub const ALL: [Scenario; 3] = [Scenario::I, Scenario::Ii, Scenario::Iii];
}

/// Fixed diagonal covariance `C_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    c_w: Vec<f64>,
    n_a: f64,
    n_b: f64,
    seed: u64,
}

impl NoiseModel {
    /// Arbitrary nonnegative variances, e.g. all zeros for noiseless LMS runs.
    pub fn from_variances(c_w: Vec<f64>) -> Result<Self> {
        if let Some(v) = c_w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidNoise(format!("variance {v} is not a nonnegative number")));
        }
        Ok(Self {
            c_w,
            n_a: f64::NAN,
            n_b: f64::NAN,
            seed: 0,
        })
    }

    pub fn noiseless(n: usize) -> Self {
        Self {
            c_w: vec![0.0; n],
            n_a: 0.0,
            n_b: 0.0,
            seed: 0,
        }
    }

    pub fn c_w(&self) -> &[f64] {
        &self.c_w
    }

    pub fn n(&self) -> usize {
        self.c_w.len()
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.n_a, self.n_b)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.c_w.iter().all(|&v| v > 0.0)
    }
}

/// `c_w = N_a·|a| + N_b·1` with `a` standard normal, drawn once from `seed`.
pub fn build_cw(n_a: f64, n_b: f64, n: usize, seed: u64) -> Result<NoiseModel> {
    if !(n_a >= 0.0 && n_b >= 0.0) || !n_a.is_finite() || !n_b.is_finite() {
        return Err(Error::InvalidNoise(format!(
            "coefficients must be finite and nonnegative (N_a = {n_a}, N_b = {n_b})"
        )));
    }
    if n_a == 0.0 && n_b == 0.0 {
        return Err(Error::InvalidNoise(
            "N_a and N_b are both zero; covariance would be degenerate".into(),
        ));
    }
    let c_w = if n_a == 0.0 {
        vec![n_b; n]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(COVARIANCE_STREAM);
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                n_a * a.abs() + n_b
            })
            .collect()
    };
    Ok(NoiseModel {
        c_w,
        n_a,
        n_b,
        seed,
    })
}

/// One fresh draw `w_i = sqrt(c_w_i)·z_i`.
pub fn draw_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(
        model.n(),
        model.c_w.iter().map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v.sqrt() * z
        }),
    )
}
