//! Channel models: the coherent AWGN MAC with per-sensor gains and residual
//! synchronization errors, the noiseless binary adder MAC, and the orthogonal
//! parallel-access (PAC) baseline. Also the transmit-side pre-compensation
//! policies that make superposition coherent.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default bound on the inversion amplitude (20 dB).
pub const DEFAULT_CLIP: f64 = 10.0;

/// Noiseless two-user adder MAC, `Y = X1 + X2` over the integers.
pub fn adder_mac(x1: bool, x2: bool) -> u8 {
    u8::from(x1) + u8::from(x2)
}

// ---------------------------------------------------------------------------
// Coherent MAC
// ---------------------------------------------------------------------------

/// Flat multiple-access channel seen by a single-antenna receiver.
///
/// `noise_var` is the total variance `E|W|^2` of the circular complex
/// receiver noise. Real-amplitude analog schemes only use the in-phase
/// dimension, whose noise variance is `noise_var / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentMacChannel {
    gains: Vec<Complex64>,
    noise_var: f64,
    phase_err_std: f64,
    amp_err_std: f64,
}

impl CoherentMacChannel {
    pub fn new(
        gains: Vec<Complex64>,
        noise_var: f64,
        phase_err_std: f64,
        amp_err_std: f64,
    ) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("gains", "at least one sensor gain is required"));
        }
        if gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::invalid("gains", "gains must be finite"));
        }
        for (name, v) in [
            ("noise_var", noise_var),
            ("phase_err_std", phase_err_std),
            ("amp_err_std", amp_err_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            gains,
            noise_var,
            phase_err_std,
            amp_err_std,
        })
    }

    /// `n` unit gains, no impairments.
    pub fn unit(n: usize, noise_var: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(1.0, 0.0); n], noise_var, 0.0, 0.0)
    }

    /// Channel whose in-phase noise variance is `real_noise_var`.
    pub fn unit_real(n: usize, real_noise_var: f64) -> Result<Self> {
        Self::unit(n, 2.0 * real_noise_var)
    }

    /// `n` i.i.d. `CN(0,1)` gains: unit-power Rayleigh magnitude, uniform phase.
    pub fn rayleigh<R: Rng + ?Sized>(n: usize, noise_var: f64, rng: &mut R) -> Result<Self> {
        let gains = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * FRAC_1_SQRT_2
            })
            .collect();
        Self::new(gains, noise_var, 0.0, 0.0)
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid("noise_var", format!("must be finite and >= 0, got {noise_var}")));
        }
        self.noise_var = noise_var;
        Ok(self)
    }

    pub fn with_impairments(mut self, phase_err_std: f64, amp_err_std: f64) -> Result<Self> {
        for (name, v) in [("phase_err_std", phase_err_std), ("amp_err_std", amp_err_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        self.phase_err_std = phase_err_std;
        self.amp_err_std = amp_err_std;
        Ok(self)
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }
    pub fn n_sensors(&self) -> usize {
        self.gains.len()
    }
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
    pub fn phase_err_std(&self) -> f64 {
        self.phase_err_std
    }
    pub fn amp_err_std(&self) -> f64 {
        self.amp_err_std
    }
}

// ---------------------------------------------------------------------------
// Pre-compensation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecompPolicy {
    /// `a_n = min(clip, 1/|g_n|)`, `v_n = -arg g_n`.
    FullInversion,
    /// `a_n = 1`, `v_n = -arg g_n`.
    PhaseOnly,
    /// `a_n = 1`, `v_n = 0`.
    None,
}

impl PrecompPolicy {
    pub const ALL: [PrecompPolicy; 3] = [
        PrecompPolicy::FullInversion,
        PrecompPolicy::PhaseOnly,
        PrecompPolicy::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PrecompPolicy::FullInversion => "full-inversion",
            PrecompPolicy::PhaseOnly => "phase-only",
            PrecompPolicy::None => "none",
        }
    }
}

impl fmt::Display for PrecompPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecompPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-inversion" | "full" | "perfect-csi" => Ok(PrecompPolicy::FullInversion),
            "phase-only" => Ok(PrecompPolicy::PhaseOnly),
            "none" => Ok(PrecompPolicy::None),
            other => Err(Error::Unknown {
                kind: "pre-compensation policy",
                name: other.to_string(),
            }),
        }
    }
}

/// Per-sensor amplitude `a_n` and phase shift `v_n` applied before transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Precompensation {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub policy: PrecompPolicy,
    pub clip: f64,
}

impl Precompensation {
    /// Pass-through for `n` sensors.
    pub fn identity(n: usize) -> Self {
        Self {
            amplitudes: vec![1.0; n],
            phases: vec![0.0; n],
            policy: PrecompPolicy::None,
            clip: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Complex transmit weight `a_n e^{j v_n}`.
    pub fn weight(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[n], self.phases[n])
    }

    /// End-to-end gains `g_n a_n e^{j v_n}` in the absence of impairments.
    pub fn effective_gains(&self, gains: &[Complex64]) -> Vec<Complex64> {
        gains
            .iter()
            .enumerate()
            .map(|(n, g)| g * self.weight(n))
            .collect()
    }
}

pub fn precompensate(gains: &[Complex64], policy: PrecompPolicy, clip: f64) -> Result<Precompensation> {
    if !(clip > 0.0) {
        return Err(Error::invalid("clip", format!("must be > 0, got {clip}")));
    }
    let n = gains.len();
    let (amplitudes, phases) = match policy {
        PrecompPolicy::None => (vec![1.0; n], vec![0.0; n]),
        PrecompPolicy::PhaseOnly | PrecompPolicy::FullInversion => {
            if let Some(index) = gains.iter().position(|g| g.norm() == 0.0) {
                return Err(Error::ZeroGain { index });
            }
            let phases = gains.iter().map(|g| -g.arg()).collect();
            let amplitudes = if policy == PrecompPolicy::FullInversion {
                gains.iter().map(|g| (1.0 / g.norm()).min(clip)).collect()
            } else {
                vec![1.0; n]
            };
            (amplitudes, phases)
        }
    };
    Ok(Precompensation {
        amplitudes,
        phases,
        policy,
        clip,
    })
}

// ---------------------------------------------------------------------------
// Transmission
// ---------------------------------------------------------------------------

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn complex_noise<R: Rng + ?Sized>(rng: &mut R, noise_var: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (noise_var / 2.0).sqrt()
}

/// One channel use of the coherent MAC:
/// `y = Σ_n g_n (1 + ε_n) a_n e^{j(v_n + φ_n)} x_n + w`.
///
/// Per sensor, in index order, one phase error `φ_n ~ N(0, phase_err_std²)`
/// and one amplitude error `ε_n ~ N(0, amp_err_std²)` are drawn (even when
/// the stds are zero, so streams stay aligned across impairment sweeps),
/// then the two noise components. Contributions are summed in sensor order.
pub fn transmit_coherent<R: Rng + ?Sized>(
    symbols: &[Complex64],
    pre: &Precompensation,
    ch: &CoherentMacChannel,
    rng: &mut R,
) -> Result<Complex64> {
    check_len(ch.n_sensors(), symbols.len())?;
    check_len(ch.n_sensors(), pre.len())?;
    let mut y = Complex64::new(0.0, 0.0);
    for (n, (x, g)) in symbols.iter().zip(&ch.gains).enumerate() {
        let phase_noise: f64 = rng.sample(StandardNormal);
        let amp_noise: f64 = rng.sample(StandardNormal);
        let phi = ch.phase_err_std * phase_noise;
        let eps = ch.amp_err_std * amp_noise;
        let weight = Complex64::from_polar(pre.amplitudes[n] * (1.0 + eps), pre.phases[n] + phi);
        y += g * weight * x;
    }
    Ok(y + complex_noise(rng, ch.noise_var))
}

/// Orthogonal baseline: one resource per sensor, `y_n = g_n x_n + w_n`.
pub fn transmit_pac<R: Rng + ?Sized>(
    symbols: &[Complex64],
    ch: &CoherentMacChannel,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_len(ch.n_sensors(), symbols.len())?;
    Ok(symbols
        .iter()
        .zip(&ch.gains)
        .map(|(x, g)| g * x + complex_noise(rng, ch.noise_var))
        .collect())
}

/// Channel uses needed to deliver one sample from every sensor.
pub fn resource_cost_ota(_n_sensors: usize) -> usize {
    1
}

pub fn resource_cost_pac(n_sensors: usize) -> usize {
    n_sensors
}

/// Computation rate `κ = k / n` of a code mapping `k` input bits to `n` channel bits.
pub fn computation_rate(input_bits: u64, channel_uses_bits: u64) -> Result<f64> {
    if channel_uses_bits == 0 {
        return Err(Error::invalid("channel_uses_bits", "must be >= 1"));
    }
    Ok(input_bits as f64 / channel_uses_bits as f64)
}
