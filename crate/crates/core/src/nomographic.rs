//! Nomographic functions `f(s_1..s_N) = g(Σ_n h_n(s_n))`.
//!
//! Each sensor applies its pre-processing `h_n` locally, the channel adds the
//! results, and the receiver applies the post-processing `g` to the single
//! superposed observation. The catalog only admits specs whose decomposition
//! reproduces the target function on sampled domain points.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::channels::{transmit_coherent, CoherentMacChannel, Precompensation};
use crate::error::{Error, Result};
use crate::mc::SeedStream;

/// Smallest reading accepted by the product spec (keeps `ln` bounded).
pub const PRODUCT_MIN_READING: f64 = 1e-6;

/// Relative tolerance of the decomposition identity; absolute below magnitude 1.
pub const IDENTITY_TOL: f64 = 1e-9;

pub fn identity_tolerance(reference: f64) -> f64 {
    IDENTITY_TOL * reference.abs().max(1.0)
}

/// Per-sensor weights for the weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// `w_n = n + 1` (1-based sensor index).
    IndexRamp,
    Explicit(Vec<f64>),
}

impl Weights {
    fn get(&self, n: usize, n_sensors: usize) -> Result<f64> {
        match self {
            Weights::IndexRamp => Ok((n + 1) as f64),
            Weights::Explicit(w) => w.get(n).copied().ok_or(Error::LengthMismatch {
                expected: w.len(),
                actual: n_sensors,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreProcessing {
    Identity,
    Weighted(Weights),
    Ln,
    Square,
    Indicator { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostProcessing {
    Identity,
    /// `x / N`.
    DivideByCount,
    Exp,
    /// `sqrt(max(x, 0))`; noise can push the superposition below zero.
    Sqrt,
}

/// The multivariate function being computed, evaluated centrally.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Mean,
    Sum,
    WeightedSum(Weights),
    Product,
    EuclideanNorm,
    ActiveCount { threshold: f64 },
}

/// Closed interval of admissible readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub const REAL_LINE: Domain = Domain {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x >= self.lower && x <= self.upper
    }

    /// Finite sub-interval used to draw test points.
    pub fn sampling_range(&self) -> (f64, f64) {
        (self.lower.max(-10.0), self.upper.min(10.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.sampling_range();
        lo + (hi - lo) * rng.random::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NomographicSpec {
    pub name: String,
    pub pre: PreProcessing,
    pub post: PostProcessing,
    pub target: Target,
    pub domain: Domain,
}

impl fmt::Display for NomographicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match &self.pre {
            PreProcessing::Identity => "s".to_string(),
            PreProcessing::Weighted(Weights::IndexRamp) => "(n+1)*s".to_string(),
            PreProcessing::Weighted(Weights::Explicit(w)) => format!("w_n*s, w={w:?}"),
            PreProcessing::Ln => "ln(s)".to_string(),
            PreProcessing::Square => "s^2".to_string(),
            PreProcessing::Indicator { threshold } => format!("1[s >= {threshold}]"),
        };
        let g = match self.post {
            PostProcessing::Identity => "x",
            PostProcessing::DivideByCount => "x/N",
            PostProcessing::Exp => "exp(x)",
            PostProcessing::Sqrt => "sqrt(x)",
        };
        write!(
            f,
            "{}: h_n = {}, g = {}, domain [{}, {}]",
            self.name, h, g, self.domain.lower, self.domain.upper
        )
    }
}

impl NomographicSpec {
    pub fn mean() -> Self {
        Self {
            name: "mean".into(),
            pre: PreProcessing::Identity,
            post: PostProcessing::DivideByCount,
            target: Target::Mean,
            domain: Domain::REAL_LINE,
        }
    }

    pub fn sum() -> Self {
        Self {
            name: "sum".into(),
            pre: PreProcessing::Identity,
            post: PostProcessing::Identity,
            target: Target::Sum,
            domain: Domain::REAL_LINE,
        }
    }

    pub fn weighted_sum(weights: Weights) -> Self {
        Self {
            name: "weighted_sum".into(),
            pre: PreProcessing::Weighted(weights.clone()),
            post: PostProcessing::Identity,
            target: Target::WeightedSum(weights),
            domain: Domain::REAL_LINE,
        }
    }

    pub fn product() -> Self {
        Self {
            name: "product".into(),
            pre: PreProcessing::Ln,
            post: PostProcessing::Exp,
            target: Target::Product,
            domain: Domain {
                lower: PRODUCT_MIN_READING,
                upper: f64::INFINITY,
            },
        }
    }

    pub fn euclidean_norm() -> Self {
        Self {
            name: "euclidean_norm".into(),
            pre: PreProcessing::Square,
            post: PostProcessing::Sqrt,
            target: Target::EuclideanNorm,
            domain: Domain::REAL_LINE,
        }
    }

    pub fn active_count(threshold: f64) -> Self {
        Self {
            name: "active_count".into(),
            pre: PreProcessing::Indicator { threshold },
            post: PostProcessing::Identity,
            target: Target::ActiveCount { threshold },
            domain: Domain::REAL_LINE,
        }
    }

    /// `true` when `g` is affine, so additive channel noise leaves the
    /// estimate of `f` unbiased.
    pub fn is_linear(&self) -> bool {
        matches!(self.post, PostProcessing::Identity | PostProcessing::DivideByCount)
            && !matches!(self.pre, PreProcessing::Ln | PreProcessing::Square | PreProcessing::Indicator { .. })
    }

    fn check_domain(&self, readings: &[f64]) -> Result<()> {
        if readings.is_empty() {
            return Err(Error::invalid("readings", "at least one reading is required"));
        }
        match readings.iter().position(|&s| !self.domain.contains(s)) {
            Some(index) => Err(Error::DomainViolation {
                spec: self.name.clone(),
                index,
                value: readings[index],
            }),
            None => Ok(()),
        }
    }

    /// `h_n(s)` for sensor `n` of `n_sensors`.
    pub fn pre_process(&self, n: usize, s: f64, n_sensors: usize) -> Result<f64> {
        Ok(match &self.pre {
            PreProcessing::Identity => s,
            PreProcessing::Weighted(w) => w.get(n, n_sensors)? * s,
            PreProcessing::Ln => s.ln(),
            PreProcessing::Square => s * s,
            PreProcessing::Indicator { threshold } => {
                if s >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// `g(x)` for a superposition of `n_sensors` contributions.
    pub fn post_process(&self, x: f64, n_sensors: usize) -> f64 {
        match self.post {
            PostProcessing::Identity => x,
            PostProcessing::DivideByCount => x / n_sensors as f64,
            PostProcessing::Exp => x.exp(),
            PostProcessing::Sqrt => x.max(0.0).sqrt(),
        }
    }

    /// Per-sensor transmit values `h_n(s_n)`.
    pub fn pre_process_all(&self, readings: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(readings)?;
        let n_sensors = readings.len();
        readings
            .iter()
            .enumerate()
            .map(|(n, &s)| self.pre_process(n, s, n_sensors))
            .collect()
    }

    /// `g(Σ h_n(s_n))` over an ideal adder.
    pub fn compose(&self, readings: &[f64]) -> Result<f64> {
        let sum: f64 = self.pre_process_all(readings)?.iter().sum();
        Ok(self.post_process(sum, readings.len()))
    }

    /// Central evaluation of the target function; reference for the OTA path.
    pub fn evaluate_direct(&self, readings: &[f64]) -> Result<f64> {
        self.check_domain(readings)?;
        let n = readings.len();
        Ok(match &self.target {
            Target::Mean => readings.iter().sum::<f64>() / n as f64,
            Target::Sum => readings.iter().sum(),
            Target::WeightedSum(w) => {
                let mut acc = 0.0;
                for (i, s) in readings.iter().enumerate() {
                    acc += w.get(i, n)? * s;
                }
                acc
            }
            Target::Product => readings.iter().product(),
            Target::EuclideanNorm => readings.iter().map(|s| s * s).sum::<f64>().sqrt(),
            Target::ActiveCount { threshold } => {
                readings.iter().filter(|&&s| s >= *threshold).count() as f64
            }
        })
    }
}

/// Computes `f` through the channel: sensors send `h_n(s_n)` as real
/// amplitudes with their pre-compensation, the receiver applies `g` to the
/// in-phase part of the superposition.
pub fn evaluate_ota<R: Rng + ?Sized>(
    spec: &NomographicSpec,
    readings: &[f64],
    channel: &CoherentMacChannel,
    pre: &Precompensation,
    rng: &mut R,
) -> Result<f64> {
    if channel.n_sensors() != readings.len() {
        return Err(Error::LengthMismatch {
            expected: channel.n_sensors(),
            actual: readings.len(),
        });
    }
    let symbols: Vec<Complex64> = spec
        .pre_process_all(readings)?
        .into_iter()
        .map(|h| Complex64::new(h, 0.0))
        .collect();
    let y = transmit_coherent(&symbols, pre, channel, rng)?;
    Ok(spec.post_process(y.re, readings.len()))
}

/// One row of an evaluation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OtaTrace {
    pub readings: Vec<f64>,
    pub direct: f64,
    pub ota: f64,
}

impl OtaTrace {
    pub fn error(&self) -> f64 {
        self.ota - self.direct
    }
}

pub fn trace<R: Rng + ?Sized>(
    spec: &NomographicSpec,
    readings: &[f64],
    channel: &CoherentMacChannel,
    pre: &Precompensation,
    rng: &mut R,
) -> Result<OtaTrace> {
    let direct = spec.evaluate_direct(readings)?;
    let ota = evaluate_ota(spec, readings, channel, pre, rng)?;
    Ok(OtaTrace {
        readings: readings.to_vec(),
        direct,
        ota,
    })
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

pub const BUILTIN_NAMES: [&str; 6] = [
    "mean",
    "sum",
    "weighted_sum",
    "product",
    "euclidean_norm",
    "active_count",
];

/// Default indicator threshold of the `active_count` builtin.
pub const DEFAULT_ACTIVE_THRESHOLD: f64 = 0.5;

pub fn builtin(name: &str) -> Result<NomographicSpec> {
    match name {
        "mean" => Ok(NomographicSpec::mean()),
        "sum" => Ok(NomographicSpec::sum()),
        "weighted_sum" => Ok(NomographicSpec::weighted_sum(Weights::IndexRamp)),
        "product" => Ok(NomographicSpec::product()),
        "euclidean_norm" => Ok(NomographicSpec::euclidean_norm()),
        "active_count" => Ok(NomographicSpec::active_count(DEFAULT_ACTIVE_THRESHOLD)),
        other => Err(Error::Unknown {
            kind: "nomographic function",
            name: other.to_string(),
        }),
    }
}

/// Registry of specs that passed the admission test.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    specs: Vec<NomographicSpec>,
}

const ADMISSION_POINTS: u64 = 256;
const ADMISSION_MAX_SENSORS: u64 = 8;

impl Catalog {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut c = Self::empty();
        for name in BUILTIN_NAMES {
            c.register(builtin(name).expect("builtin name"))
                .expect("builtin specs satisfy the identity");
        }
        c
    }

    /// Checks `g(Σ h_n) == f` on random domain points, then stores the spec.
    /// A spec with the same name is replaced.
    pub fn register(&mut self, spec: NomographicSpec) -> Result<()> {
        admission_test(&spec)?;
        self.specs.retain(|s| s.name != spec.name);
        self.specs.push(spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NomographicSpec> {
        self.specs.iter().find(|s| s.name == name).ok_or(Error::Unknown {
            kind: "nomographic function",
            name: name.to_string(),
        })
    }

    pub fn list(&self) -> impl Iterator<Item = &NomographicSpec> {
        self.specs.iter()
    }
}

fn admission_test(spec: &NomographicSpec) -> Result<()> {
    let stream = SeedStream::new(0x6e6f6d6f).named(&spec.name);
    for i in 0..ADMISSION_POINTS {
        let mut rng = stream.trial(i);
        let n = 1 + (i % ADMISSION_MAX_SENSORS) as usize;
        let readings: Vec<f64> = (0..n).map(|_| spec.domain.sample(&mut rng)).collect();
        let composed = spec.compose(&readings)?;
        let direct = spec.evaluate_direct(&readings)?;
        if !((composed - direct).abs() <= identity_tolerance(direct)) {
            return Err(Error::IdentityViolation {
                spec: spec.name.clone(),
                composed,
                direct,
            });
        }
    }
    Ok(())
}
