//! Distributed estimation of a Gaussian source over the MAC.
//!
//! Analog scheme: every sensor scales its observation by a common power
//! factor and all sensors transmit at once; the fusion center applies the
//! linear MMSE coefficient `E{SY}/E{Y²}` to the superposition.
//!
//! Digital baseline: the coherent-MAC sum rate is split equally among the
//! sensors, each observation is quantized through the Gaussian forward test
//! channel at that rate, and the fusion center forms the LMMSE estimate from
//! the reconstructions.
//!
//! Throughout, `noise_var` is the variance of the real receiver noise on the
//! in-phase observation `Y`.

use num_complex::Complex64;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::channels::{transmit_coherent, CoherentMacChannel, Precompensation};
use crate::error::{Error, Result};
use crate::mc::{accumulate, Moments, SeedStream};
use crate::sources::{sample_ceo, GaussianCeoModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig {
    pub model: GaussianCeoModel,
    /// Total transmit power, split equally among the sensors.
    pub p_tot: f64,
    /// Receiver noise variance σ²_W.
    pub noise_var: f64,
    pub trials: u64,
}

impl EstimationConfig {
    pub fn new(model: GaussianCeoModel, p_tot: f64, noise_var: f64, trials: u64) -> Result<Self> {
        if !(p_tot.is_finite() && p_tot > 0.0) {
            return Err(Error::invalid("p_tot", format!("must be > 0, got {p_tot}")));
        }
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid("noise_var", format!("must be >= 0, got {noise_var}")));
        }
        if trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        Ok(Self {
            model,
            p_tot,
            noise_var,
            trials,
        })
    }

    pub fn n(&self) -> f64 {
        self.model.n_sensors() as f64
    }

    pub fn with_sensors(&self, n: usize) -> Result<Self> {
        Self::new(self.model.with_sensors(n)?, self.p_tot, self.noise_var, self.trials)
    }

    pub fn with_p_tot(&self, p_tot: f64) -> Result<Self> {
        Self::new(self.model, p_tot, self.noise_var, self.trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionResult {
    pub d_empirical: f64,
    pub d_analytic: f64,
    pub std_err: f64,
}

impl DistortionResult {
    fn from_moments(m: &Moments, d_analytic: f64) -> Self {
        Self {
            d_empirical: m.mean(),
            d_analytic,
            std_err: m.std_err(),
        }
    }

    /// `|empirical - analytic|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        let diff = (self.d_empirical - self.d_analytic).abs();
        if self.std_err == 0.0 {
            return if diff == 0.0 { 0.0 } else { f64::INFINITY };
        }
        diff / self.std_err
    }
}

// ---------------------------------------------------------------------------
// Analog scheme
// ---------------------------------------------------------------------------

/// Amplitude α with `E[(α X_n)²] = p_tot / N`.
pub fn analog_power_scale(cfg: &EstimationConfig) -> f64 {
    ((cfg.p_tot / cfg.n()) / cfg.model.observation_var()).sqrt()
}

/// Second-order statistics `(E{SY}, E{Y²})` of `Y = α Σ X_n + W`.
fn flat_statistics(cfg: &EstimationConfig) -> (f64, f64) {
    let a = analog_power_scale(cfg);
    let n = cfg.n();
    let s2 = cfg.model.sigma_s2();
    let z2 = cfg.model.sigma_z2();
    let sy = a * n * s2;
    let yy = a * a * n * n * s2 + a * a * n * z2 + cfg.noise_var;
    (sy, yy)
}

pub fn mmse_coefficient(cfg: &EstimationConfig) -> f64 {
    let (sy, yy) = flat_statistics(cfg);
    sy / yy
}

/// `σ²_S − E{SY}² / E{Y²}`, written in the cancellation-free form.
pub fn analytic_analog_distortion(cfg: &EstimationConfig) -> f64 {
    let a2 = analog_power_scale(cfg).powi(2);
    let n = cfg.n();
    let s2 = cfg.model.sigma_s2();
    let z2 = cfg.model.sigma_z2();
    let num = a2 * n * z2 + cfg.noise_var;
    let den = a2 * n * n * s2 + a2 * n * z2 + cfg.noise_var;
    s2 * num / den
}

/// Squared-error moments of `Ŝ = coefficient · Y` for the analog scheme over
/// a unit-gain, perfectly synchronized MAC.
pub fn analog_squared_error(cfg: &EstimationConfig, stream: SeedStream, coefficient: f64) -> Moments {
    let n = cfg.model.n_sensors();
    let alpha = analog_power_scale(cfg);
    let channel = CoherentMacChannel::unit_real(n, cfg.noise_var).expect("validated config");
    let pre = Precompensation::identity(n);
    accumulate(stream, cfg.trials, |m: &mut Moments, rng, _| {
        let readings = sample_ceo(&cfg.model, rng);
        let symbols: Vec<Complex64> = readings
            .observations
            .iter()
            .map(|x| Complex64::new(alpha * x, 0.0))
            .collect();
        let y = transmit_coherent(&symbols, &pre, &channel, rng).expect("lengths match");
        let err = coefficient * y.re - readings.source_value;
        m.push(err * err);
    })
}

pub fn run_analog_ceo(cfg: &EstimationConfig, stream: SeedStream) -> DistortionResult {
    let m = analog_squared_error(cfg, stream, mmse_coefficient(cfg));
    DistortionResult::from_moments(&m, analytic_analog_distortion(cfg))
}

/// Linear estimator of `S` and its mean squared error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEstimator {
    pub coefficient: f64,
    pub distortion: f64,
}

/// LMMSE coefficient when sensor `n` reaches the receiver through the
/// effective complex gain `ρ_n`, perturbed by i.i.d. phase errors
/// `N(0, phase_err_std²)` and relative amplitude errors `N(0, amp_err_std²)`.
///
/// The receiver keeps the in-phase part, so each sensor contributes
/// `b_n α X_n` with `b_n = (1+ε_n)|ρ_n| cos(arg ρ_n + φ_n)`. Only the first two
/// moments of `b_n` enter the coefficient.
pub fn lmmse_with_gains(
    model: &GaussianCeoModel,
    alpha: f64,
    noise_var: f64,
    effective_gains: &[Complex64],
    phase_err_std: f64,
    amp_err_std: f64,
) -> LinearEstimator {
    let s2 = model.sigma_s2();
    let z2 = model.sigma_z2();
    let shrink = (-phase_err_std * phase_err_std / 2.0).exp();
    let shrink2 = (-2.0 * phase_err_std * phase_err_std).exp();
    let amp2 = 1.0 + amp_err_std * amp_err_std;

    let mut sum_mean = 0.0;
    let mut sum_var = 0.0;
    let mut sum_second = 0.0;
    for rho in effective_gains {
        let (mag, theta) = rho.to_polar();
        let mean = mag * theta.cos() * shrink;
        let second = amp2 * mag * mag * (1.0 + (2.0 * theta).cos() * shrink2) / 2.0;
        sum_mean += mean;
        sum_second += second;
        sum_var += second - mean * mean;
    }
    let sy = alpha * s2 * sum_mean;
    let yy = alpha * alpha * (s2 * (sum_mean * sum_mean + sum_var) + z2 * sum_second) + noise_var;
    if yy == 0.0 {
        return LinearEstimator {
            coefficient: 0.0,
            distortion: s2,
        };
    }
    LinearEstimator {
        coefficient: sy / yy,
        distortion: (s2 - sy * sy / yy).clamp(0.0, s2),
    }
}

// ---------------------------------------------------------------------------
// Digital baseline
// ---------------------------------------------------------------------------

/// Coherent-MAC sum rate `½ log2(1 + N p_tot / σ²_W)` in bits per use.
pub fn digital_sum_rate(cfg: &EstimationConfig) -> f64 {
    if cfg.noise_var == 0.0 {
        return f64::INFINITY;
    }
    0.5 * (1.0 + cfg.n() * cfg.p_tot / cfg.noise_var).log2()
}

/// Equal share `C_sum / N` of the sum rate.
pub fn digital_rate_per_sensor(cfg: &EstimationConfig) -> f64 {
    digital_sum_rate(cfg) / cfg.n()
}

/// Forward test channel noise `Var Q = σ²_X 2^{-2R} / (1 − 2^{-2R})`, or
/// `None` when the rate is zero.
pub fn quantization_noise_var(cfg: &EstimationConfig) -> Option<f64> {
    let r = digital_rate_per_sensor(cfg);
    if r <= 0.0 {
        return None;
    }
    if r.is_infinite() {
        return Some(0.0);
    }
    let x = -2.0 * r * std::f64::consts::LN_2;
    // 2^{-2R} / (1 - 2^{-2R}) with expm1 for small rates
    Some(cfg.model.observation_var() * x.exp() / -x.exp_m1())
}

pub fn analytic_digital_distortion(cfg: &EstimationConfig) -> f64 {
    let s2 = cfg.model.sigma_s2();
    match quantization_noise_var(cfg) {
        None => s2,
        Some(q) => {
            let e = cfg.model.sigma_z2() + q;
            s2 * e / (e + cfg.n() * s2)
        }
    }
}

/// Centralized floor: LMMSE from the N unquantized observations.
pub fn centralized_distortion(model: &GaussianCeoModel) -> f64 {
    let s2 = model.sigma_s2();
    let z2 = model.sigma_z2();
    s2 * z2 / (z2 + model.n_sensors() as f64 * s2)
}

pub fn run_digital_baseline(cfg: &EstimationConfig, stream: SeedStream) -> DistortionResult {
    let s2 = cfg.model.sigma_s2();
    let Some(q_var) = quantization_noise_var(cfg) else {
        return DistortionResult {
            d_empirical: s2,
            d_analytic: s2,
            std_err: 0.0,
        };
    };
    let q_std = q_var.sqrt();
    let weight = s2 / (cfg.n() * s2 + cfg.model.sigma_z2() + q_var);
    let m: Moments = accumulate(stream, cfg.trials, |m: &mut Moments, rng, _| {
        let readings = sample_ceo(&cfg.model, rng);
        let mut total = 0.0;
        for x in &readings.observations {
            total += x + q_std * rng.sample::<f64, _>(StandardNormal);
        }
        let err = weight * total - readings.source_value;
        m.push(err * err);
    });
    DistortionResult::from_moments(&m, analytic_digital_distortion(cfg))
}

// ---------------------------------------------------------------------------
// Sweeps and scaling
// ---------------------------------------------------------------------------

/// How the total power follows the sensor count in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PtotMode {
    /// Same `p_tot` at every `N`.
    Fixed(f64),
    /// `p_tot = per_sensor · N`.
    Linear { per_sensor: f64 },
}

impl PtotMode {
    pub fn p_tot(&self, n: usize) -> f64 {
        match *self {
            PtotMode::Fixed(p) => p,
            PtotMode::Linear { per_sensor } => per_sensor * n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub p_tot: f64,
    pub analog: DistortionResult,
    pub digital: DistortionResult,
}

/// Runs both schemes at every `N`. Each grid point draws from its own
/// substream keyed by `N`, shared by the two schemes.
pub fn sweep(
    base: &EstimationConfig,
    n_list: &[usize],
    mode: PtotMode,
    stream: SeedStream,
) -> Result<Vec<SweepRow>> {
    n_list
        .iter()
        .map(|&n| {
            let p_tot = mode.p_tot(n);
            let cfg = base.with_sensors(n)?.with_p_tot(p_tot)?;
            let point = stream.derive(n as u64);
            Ok(SweepRow {
                n,
                p_tot,
                analog: run_analog_ceo(&cfg, point.named("analog")),
                digital: run_digital_baseline(&cfg, point.named("digital")),
            })
        })
        .collect()
}

/// Least-squares slope of `log D` against `log x`.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::invalid("points", format!("need >= 4 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points[0].0 <= 0.0 {
        return Err(Error::invalid("points", "x must be positive and strictly increasing"));
    }
    if let Some(&(_, d)) = points.iter().find(|(_, d)| !(*d > 0.0)) {
        return Err(Error::invalid("points", format!("distortion must be > 0, got {d}")));
    }
    let n = points.len() as f64;
    let (lx, ld): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, d)| (x.ln(), d.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let md = ld.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ld).map(|(x, d)| (x - mx) * (d - md)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, p_tot: f64, s2: f64, z2: f64, w2: f64, trials: u64) -> EstimationConfig {
        EstimationConfig::new(GaussianCeoModel::new(s2, z2, n).unwrap(), p_tot, w2, trials).unwrap()
    }

    #[test]
    fn power_scale_examples() {
        assert!((analog_power_scale(&cfg(1, 1.0, 1.0, 0.0, 1.0, 1)) - 1.0).abs() < 1e-15);
        assert!((analog_power_scale(&cfg(4, 4.0, 1.0, 1.0, 1.0, 1)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn per_sensor_transmit_power() {
        let c = cfg(4, 8.0, 1.0, 0.5, 1.0, 100_000);
        let alpha = analog_power_scale(&c);
        let m: Moments = accumulate(SeedStream::new(4), c.trials, |m: &mut Moments, rng, _| {
            let r = sample_ceo(&c.model, rng);
            m.push((alpha * r.observations[2]).powi(2));
        });
        assert!((m.mean() - 2.0).abs() < 3.0 * m.std_err(), "{}", m.mean());
    }

    #[test]
    fn closed_form_single_sensor() {
        for p in [0.5, 1.0, 10.0, 100.0] {
            let c = cfg(1, p, 1.0, 0.0, 1.0, 1);
            assert!((mmse_coefficient(&c) - p.sqrt() / (p + 1.0)).abs() < 1e-12);
            assert!((analytic_analog_distortion(&c) - 1.0 / (p + 1.0)).abs() < 1e-12);
        }
        let c = cfg(3, 2.0, 1.5, 0.0, 0.0, 1);
        let a = analog_power_scale(&c);
        assert!((mmse_coefficient(&c) - 1.0 / (3.0 * a)).abs() < 1e-12);
        assert_eq!(analytic_analog_distortion(&c), 0.0);
    }

    #[test]
    fn noiseless_run_is_exact() {
        let r = run_analog_ceo(&cfg(5, 3.0, 1.0, 0.0, 0.0, 1000), SeedStream::new(1));
        assert!(r.d_empirical <= 1e-18, "{}", r.d_empirical);
    }

    #[test]
    fn empirical_matches_closed_form() {
        let c = cfg(10, 10.0, 1.0, 1.0, 1.0, 100_000);
        let r = run_analog_ceo(&c, SeedStream::new(77));
        assert!(r.z_score() < 3.0, "{r:?}");
    }

    #[test]
    fn more_power_lowers_distortion_with_common_numbers() {
        let c = cfg(6, 2.0, 1.0, 0.5, 1.0, 20_000);
        let a = run_analog_ceo(&c, SeedStream::new(5));
        let b = run_analog_ceo(&c.with_p_tot(4.0).unwrap(), SeedStream::new(5));
        assert!(b.d_empirical < a.d_empirical);
    }

    #[test]
    fn mmse_coefficient_is_empirically_optimal() {
        let c = cfg(4, 2.0, 1.0, 1.0, 1.0, 1_000_000);
        let coeff = mmse_coefficient(&c);
        let base = analog_squared_error(&c, SeedStream::new(6), coeff).mean();
        for f in [0.99, 1.01] {
            let other = analog_squared_error(&c, SeedStream::new(6), coeff * f).mean();
            assert!(other >= base, "{f}: {other} < {base}");
        }
    }

    #[test]
    fn flat_gains_reduce_to_closed_form() {
        let c = cfg(7, 3.0, 1.0, 0.4, 0.8, 1);
        let alpha = analog_power_scale(&c);
        let gains = vec![Complex64::new(1.0, 0.0); 7];
        let e = lmmse_with_gains(&c.model, alpha, c.noise_var, &gains, 0.0, 0.0);
        assert!((e.coefficient - mmse_coefficient(&c)).abs() < 1e-12);
        assert!((e.distortion - analytic_analog_distortion(&c)).abs() < 1e-12);
        let jittered = lmmse_with_gains(&c.model, alpha, c.noise_var, &gains, 0.5, 0.1);
        assert!(jittered.distortion > e.distortion);
    }

    #[test]
    fn distortion_monotone_on_grid() {
        let grid = [0.1, 0.5, 1.0, 2.0, 8.0];
        for &s2 in &[0.5, 1.0, 3.0] {
            for &z2 in &grid {
                for &w2 in &grid {
                    for &p in &[0.5, 2.0, 10.0, 100.0] {
                        let mut prev = f64::INFINITY;
                        for n in [1, 2, 4, 8, 16, 64] {
                            let d = analytic_analog_distortion(&cfg(n, p, s2, z2, w2, 1));
                            assert!((0.0..=s2).contains(&d));
                            assert!(d <= prev + 1e-15, "N: s2={s2} z2={z2} w2={w2} p={p}");
                            prev = d;
                        }
                        let d = analytic_analog_distortion(&cfg(4, p, s2, z2, w2, 1));
                        assert!(analytic_analog_distortion(&cfg(4, 2.0 * p, s2, z2, w2, 1)) <= d + 1e-15);
                        assert!(analytic_analog_distortion(&cfg(4, p, s2, 2.0 * z2, w2, 1)) >= d - 1e-15);
                        assert!(analytic_analog_distortion(&cfg(4, p, s2, z2, 2.0 * w2, 1)) >= d - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn digital_limits() {
        // rate -> infinity: centralized floor
        let c = cfg(8, 5.0, 1.0, 0.7, 0.0, 1);
        assert!((analytic_digital_distortion(&c) - centralized_distortion(&c.model)).abs() < 1e-15);
        let c = cfg(8, 5.0, 1.0, 0.7, 1e-40, 1);
        assert!((analytic_digital_distortion(&c) - centralized_distortion(&c.model)).abs() < 1e-4);
        // single sensor: separation is optimal for one Gaussian link
        for z2 in [0.0, 1.0] {
            let c = cfg(1, 10.0, 1.0, z2, 1.0, 1);
            let a = analytic_analog_distortion(&c);
            let d = analytic_digital_distortion(&c);
            assert!((a - d).abs() / a < 0.1, "{a} vs {d}");
        }
    }

    #[test]
    fn digital_monte_carlo_matches_closed_form() {
        let c = cfg(16, 16.0, 1.0, 1.0, 1.0, 100_000);
        let r = run_digital_baseline(&c, SeedStream::new(8));
        assert!(r.z_score() < 3.0, "{r:?}");
    }

    #[test]
    fn slope_of_exact_laws() {
        let inv: Vec<_> = (1..=6).map(|k| (k as f64, 1.0 / k as f64)).collect();
        assert!((scaling_exponent(&inv).unwrap() + 1.0).abs() < 1e-12);
        let flat: Vec<_> = (1..=6).map(|k| (k as f64, 0.3)).collect();
        assert!(scaling_exponent(&flat).unwrap().abs() < 1e-12);
        assert!(scaling_exponent(&inv[..3]).is_err());
        let mut bad = inv.clone();
        bad[2].1 = 0.0;
        assert!(scaling_exponent(&bad).is_err());
        let mut unordered = inv;
        unordered.swap(0, 1);
        assert!(scaling_exponent(&unordered).is_err());
    }
}
