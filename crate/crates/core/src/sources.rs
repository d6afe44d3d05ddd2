//! Source and sensing models shared by the simulation chains.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Joint law of two binary sources `(S1, S2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedBinaryPair {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

impl CorrelatedBinaryPair {
    /// Validates and builds the table. Probabilities are never renormalized.
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let cells = [p00, p01, p10, p11];
        if cells.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "probabilities",
                format!("all cells must be finite and >= 0, got {cells:?}"),
            ));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(
                "probabilities",
                format!("cells sum to {total}, expected 1"),
            ));
        }
        Ok(Self { p00, p01, p10, p11 })
    }

    /// Two independent fair bits.
    pub fn independent_uniform() -> Self {
        Self {
            p00: 0.25,
            p01: 0.25,
            p10: 0.25,
            p11: 0.25,
        }
    }

    pub fn p00(&self) -> f64 {
        self.p00
    }
    pub fn p01(&self) -> f64 {
        self.p01
    }
    pub fn p10(&self) -> f64 {
        self.p10
    }
    pub fn p11(&self) -> f64 {
        self.p11
    }

    /// Cells in the order `(0,0), (0,1), (1,0), (1,1)`.
    pub fn cells(&self) -> [((bool, bool), f64); 4] {
        [
            ((false, false), self.p00),
            ((false, true), self.p01),
            ((true, false), self.p10),
            ((true, true), self.p11),
        ]
    }

    pub fn prob(&self, s1: bool, s2: bool) -> f64 {
        match (s1, s2) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }

    /// `P(S1 = 1)`.
    pub fn marginal_s1(&self) -> f64 {
        self.p10 + self.p11
    }

    /// `P(S2 = 1)`.
    pub fn marginal_s2(&self) -> f64 {
        self.p01 + self.p11
    }
}

/// The adder-MAC example law: `(0,0)`, `(0,1)`, `(1,1)` equiprobable and `(1,0)` impossible.
pub fn adder_mac_preset() -> CorrelatedBinaryPair {
    let third = 1.0 / 3.0;
    CorrelatedBinaryPair {
        p00: third,
        p01: third,
        p10: 0.0,
        p11: third,
    }
}

/// Draws one pair. Zero-probability cells are never returned.
pub fn sample_pair<R: Rng + ?Sized>(dist: &CorrelatedBinaryPair, rng: &mut R) -> (bool, bool) {
    let u: f64 = rng.random();
    let cells = dist.cells();
    let mut cumulative = 0.0;
    let mut last_supported = cells[0].0;
    for (pair, p) in cells {
        if p <= 0.0 {
            continue;
        }
        last_supported = pair;
        cumulative += p;
        if u < cumulative {
            return pair;
        }
    }
    // u landed in the rounding slack above the final cumulative sum
    last_supported
}

/// Gaussian CEO sensing model: a zero-mean source seen by `n_sensors` through
/// independent additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCeoModel {
    sigma_s2: f64,
    sigma_z2: f64,
    n_sensors: usize,
}

impl GaussianCeoModel {
    pub fn new(sigma_s2: f64, sigma_z2: f64, n_sensors: usize) -> Result<Self> {
        if !(sigma_s2.is_finite() && sigma_s2 > 0.0) {
            return Err(Error::invalid("sigma_s2", format!("must be > 0, got {sigma_s2}")));
        }
        if !(sigma_z2.is_finite() && sigma_z2 >= 0.0) {
            return Err(Error::invalid("sigma_z2", format!("must be >= 0, got {sigma_z2}")));
        }
        if n_sensors == 0 {
            return Err(Error::invalid("n_sensors", "must be >= 1"));
        }
        Ok(Self {
            sigma_s2,
            sigma_z2,
            n_sensors,
        })
    }

    pub fn sigma_s2(&self) -> f64 {
        self.sigma_s2
    }
    pub fn sigma_z2(&self) -> f64 {
        self.sigma_z2
    }
    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    /// Same noise statistics with a different sensor count.
    pub fn with_sensors(&self, n_sensors: usize) -> Result<Self> {
        Self::new(self.sigma_s2, self.sigma_z2, n_sensors)
    }

    /// Variance of each observation, `sigma_s2 + sigma_z2`.
    pub fn observation_var(&self) -> f64 {
        self.sigma_s2 + self.sigma_z2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorReadings {
    pub source_value: f64,
    pub observations: Vec<f64>,
}

/// Draws `S ~ N(0, sigma_s2)` and `X_n = S + Z_n`. The source is drawn first,
/// then the noise terms in sensor order.
pub fn sample_ceo<R: Rng + ?Sized>(model: &GaussianCeoModel, rng: &mut R) -> SensorReadings {
    let s_std = model.sigma_s2.sqrt();
    let z_std = model.sigma_z2.sqrt();
    let source_value = s_std * rng.sample::<f64, _>(StandardNormal);
    let observations = (0..model.n_sensors)
        .map(|_| source_value + z_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SensorReadings {
        source_value,
        observations,
    }
}
