//! Over-the-air distributed detection.
//!
//! Chain per trial: draw the global hypothesis, let every sensor observe
//! `h_n = μ_H + noise`, take a local decision `z_n`, map it to a PSK symbol,
//! pre-compensate, superpose on the MAC, and fuse at the receiver by
//! recovering the vote count from the superposition.
//!
//! Binary votes use BPSK (`0 -> +1`, `1 -> -1`), so `N` votes with `m` for
//! `H1` superpose to `N - 2m`. Four hypotheses use QPSK
//! `z -> e^{j(π/4 + zπ/2)}`, and the count is recovered separately on each
//! quadrature axis.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::channels::{precompensate, transmit_coherent, CoherentMacChannel, PrecompPolicy, Precompensation, DEFAULT_CLIP};
use crate::error::{Error, Result};
use crate::mc::{accumulate, Accumulator, SeedStream};

/// Number of hypotheses, which also fixes the PSK order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypotheses {
    Binary,
    Quaternary,
}

impl Hypotheses {
    pub fn count(&self) -> usize {
        match self {
            Hypotheses::Binary => 2,
            Hypotheses::Quaternary => 4,
        }
    }

    pub fn from_count(k: usize) -> Result<Self> {
        match k {
            2 => Ok(Hypotheses::Binary),
            4 => Ok(Hypotheses::Quaternary),
            _ => Err(Error::invalid("k", format!("must be 2 or 4, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub n_sensors: usize,
    pub hypotheses: Hypotheses,
    /// `P(H1)` in the binary case. Four hypotheses are equiprobable.
    pub prior: f64,
    pub obs_noise_var: f64,
    /// Ascending decision thresholds: one for K = 2, three for K = 4.
    pub thresholds: Vec<f64>,
    /// Source value under each hypothesis.
    pub levels: Vec<f64>,
    /// Gains and impairments; the noise variance is set from `snr`.
    pub channel: CoherentMacChannel,
    pub policy: PrecompPolicy,
    pub clip: f64,
    /// Per-sensor symbol energy over receiver noise variance (linear). May be infinite.
    pub snr: f64,
}

impl DetectionConfig {
    /// Binary test with `μ0 = 0`, `μ1 = 1`, threshold 0.5, unit gains.
    pub fn binary(n_sensors: usize) -> Result<Self> {
        Ok(Self {
            n_sensors,
            hypotheses: Hypotheses::Binary,
            prior: 0.5,
            obs_noise_var: 0.25,
            thresholds: vec![0.5],
            levels: vec![0.0, 1.0],
            channel: CoherentMacChannel::unit(n_sensors.max(1), 0.0)?,
            policy: PrecompPolicy::FullInversion,
            clip: DEFAULT_CLIP,
            snr: 10.0,
        })
    }

    /// Four-level test with `μ_k = k` and thresholds at the midpoints.
    pub fn quaternary(n_sensors: usize) -> Result<Self> {
        Ok(Self {
            hypotheses: Hypotheses::Quaternary,
            thresholds: vec![0.5, 1.5, 2.5],
            levels: vec![0.0, 1.0, 2.0, 3.0],
            ..Self::binary(n_sensors)?
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.hypotheses.count();
        if self.n_sensors == 0 {
            return Err(Error::invalid("n_sensors", "must be >= 1"));
        }
        if self.channel.n_sensors() != self.n_sensors {
            return Err(Error::LengthMismatch {
                expected: self.n_sensors,
                actual: self.channel.n_sensors(),
            });
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(Error::invalid("prior", format!("must lie in (0, 1), got {}", self.prior)));
        }
        if !(self.obs_noise_var >= 0.0) {
            return Err(Error::invalid("obs_noise_var", "must be >= 0"));
        }
        if self.thresholds.len() != k - 1 || self.thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("thresholds", format!("need {} ascending thresholds", k - 1)));
        }
        if self.levels.len() != k {
            return Err(Error::invalid("levels", format!("need {k} levels")));
        }
        if !(self.snr >= 0.0) {
            return Err(Error::invalid("snr", format!("must be >= 0, got {}", self.snr)));
        }
        Ok(())
    }

    /// Receiver noise variance implied by the SNR with unit symbol energy.
    pub fn noise_var(&self) -> f64 {
        if self.snr.is_infinite() {
            0.0
        } else {
            1.0 / self.snr
        }
    }

    fn hypothesis_prob(&self, h: usize) -> f64 {
        match self.hypotheses {
            Hypotheses::Binary if h == 1 => self.prior,
            Hypotheses::Binary => 1.0 - self.prior,
            Hypotheses::Quaternary => 0.25,
        }
    }
}

/// Converts dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Index of the cell containing `h`; boundary values go to the upper cell.
pub fn local_decision(h: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().filter(|&&t| h >= t).count()
}

pub fn psk_map(z: usize, hypotheses: Hypotheses) -> Result<Complex64> {
    let k = hypotheses.count();
    if z >= k {
        return Err(Error::invalid("z", format!("index {z} out of range for K = {k}")));
    }
    Ok(match hypotheses {
        Hypotheses::Binary => Complex64::new(if z == 0 { 1.0 } else { -1.0 }, 0.0),
        Hypotheses::Quaternary => Complex64::from_polar(1.0, FRAC_PI_4 + z as f64 * FRAC_PI_2),
    })
}

/// Votes on the negative side of one axis recovered from `N - 2m`.
fn recover_count(axis: f64, n: usize) -> usize {
    ((n as f64 - axis) / 2.0).round().clamp(0.0, n as f64) as usize
}

/// Global decision from the superposition, assuming unit effective gains.
///
/// Binary: majority of the recovered `H1` votes, ties to `H0`. Four
/// hypotheses: majority sign on each quadrature axis, ties to the positive
/// side, and the cell with that sign pair.
pub fn fuse_global(received: Complex64, n: usize, hypotheses: Hypotheses) -> usize {
    let majority_negative = |axis: f64| 2 * recover_count(axis, n) > n;
    match hypotheses {
        Hypotheses::Binary => usize::from(majority_negative(received.re)),
        Hypotheses::Quaternary => {
            let neg_re = majority_negative(received.re * SQRT_2);
            let neg_im = majority_negative(received.im * SQRT_2);
            match (neg_re, neg_im) {
                (false, false) => 0,
                (true, false) => 1,
                (true, true) => 2,
                (false, true) => 3,
            }
        }
    }
}

/// Everything that happened in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub hypothesis: usize,
    pub votes: Vec<usize>,
    pub received: Complex64,
    pub decision: usize,
}

fn draw_hypothesis<R: Rng + ?Sized>(cfg: &DetectionConfig, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    match cfg.hypotheses {
        Hypotheses::Binary => usize::from(u < cfg.prior),
        Hypotheses::Quaternary => ((u * 4.0) as usize).min(3),
    }
}

/// Channel with the SNR-implied noise and the precompensation for it.
pub fn prepare_link(cfg: &DetectionConfig) -> Result<(CoherentMacChannel, Precompensation)> {
    cfg.validate()?;
    let channel = cfg.channel.clone().with_noise_var(cfg.noise_var())?;
    let pre = precompensate(channel.gains(), cfg.policy, cfg.clip)?;
    Ok((channel, pre))
}

/// Draw order: hypothesis, one observation noise per sensor, then the channel.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &DetectionConfig,
    channel: &CoherentMacChannel,
    pre: &Precompensation,
    rng: &mut R,
) -> Result<TrialRecord> {
    let hypothesis = draw_hypothesis(cfg, rng);
    let level = cfg.levels[hypothesis];
    let obs_std = cfg.obs_noise_var.sqrt();
    let votes: Vec<usize> = (0..cfg.n_sensors)
        .map(|_| {
            let h = level + obs_std * rng.sample::<f64, _>(StandardNormal);
            local_decision(h, &cfg.thresholds)
        })
        .collect();
    let symbols = votes
        .iter()
        .map(|&z| psk_map(z, cfg.hypotheses))
        .collect::<Result<Vec<_>>>()?;
    let received = transmit_coherent(&symbols, pre, channel, rng)?;
    Ok(TrialRecord {
        hypothesis,
        decision: fuse_global(received, cfg.n_sensors, cfg.hypotheses),
        votes,
        received,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    /// `P(decide not H0 | H0)`.
    pub p_false_alarm: f64,
    /// `P(decide H0 | not H0)`.
    pub p_miss: f64,
    /// Prior-weighted error probability.
    pub p_error: f64,
    pub std_err_false_alarm: f64,
    pub std_err_miss: f64,
    pub std_err_error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    trials: [u64; 4],
    errors: [u64; 4],
    decided_null: [u64; 4],
}

impl Accumulator for Tally {
    fn merge(&mut self, later: Self) {
        for i in 0..4 {
            self.trials[i] += later.trials[i];
            self.errors[i] += later.errors[i];
            self.decided_null[i] += later.decided_null[i];
        }
    }
}

fn rate(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

impl Tally {
    fn outcome(&self, cfg: &DetectionConfig) -> DetectionOutcome {
        let k = cfg.hypotheses.count();
        let (p_fa, se_fa) = rate(self.errors[0], self.trials[0]);
        let alt_trials: u64 = self.trials[1..k].iter().sum();
        let alt_null: u64 = self.decided_null[1..k].iter().sum();
        let (p_miss, se_miss) = rate(alt_null, alt_trials);

        let (p_error, var_error) = match cfg.hypotheses {
            Hypotheses::Binary => (
                cfg.prior * p_miss + (1.0 - cfg.prior) * p_fa,
                (cfg.prior * se_miss).powi(2) + ((1.0 - cfg.prior) * se_fa).powi(2),
            ),
            Hypotheses::Quaternary => (0..k).fold((0.0, 0.0), |(p, v), h| {
                let (ph, se) = rate(self.errors[h], self.trials[h]);
                let w = cfg.hypothesis_prob(h);
                (p + w * ph, v + (w * se).powi(2))
            }),
        };
        DetectionOutcome {
            p_false_alarm: p_fa,
            p_miss,
            p_error,
            std_err_false_alarm: se_fa,
            std_err_miss: se_miss,
            std_err_error: var_error.sqrt(),
        }
    }
}

/// Monte Carlo error probabilities of the full chain.
pub fn run_detection(cfg: &DetectionConfig, trials: u64, stream: SeedStream) -> Result<DetectionOutcome> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let (channel, pre) = prepare_link(cfg)?;
    let tally: Tally = accumulate(stream, trials, |t: &mut Tally, rng, _| {
        let r = run_trial(cfg, &channel, &pre, rng).expect("validated link");
        let h = r.hypothesis;
        t.trials[h] += 1;
        if r.decision != h {
            t.errors[h] += 1;
        }
        if r.decision == 0 {
            t.decided_null[h] += 1;
        }
    });
    Ok(tally.outcome(cfg))
}

/// `Q(sqrt(2 snr))`, the BPSK symbol error probability on AWGN.
pub fn analytic_bpsk_error(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::invalid("snr", format!("must be >= 0, got {snr}")));
    }
    Ok(0.5 * erfc(snr.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRow {
    pub n: usize,
    pub k: usize,
    pub snr_db: f64,
    pub outcome: DetectionOutcome,
}

/// Error rates over `n_list × snr_db_list`. Every SNR at a given `N` reuses
/// the same substream, so the SNR axis uses common random numbers. Channel
/// gains are unit unless `base` carries `N`-matched gains.
pub fn sweep(
    base: &DetectionConfig,
    n_list: &[usize],
    snr_db_list: &[f64],
    trials: u64,
    stream: SeedStream,
) -> Result<Vec<DetectionRow>> {
    let mut rows = Vec::with_capacity(n_list.len() * snr_db_list.len());
    for &n in n_list {
        let channel = if base.channel.n_sensors() == n {
            base.channel.clone()
        } else {
            CoherentMacChannel::unit(n, 0.0)?
                .with_impairments(base.channel.phase_err_std(), base.channel.amp_err_std())?
        };
        for &snr_db in snr_db_list {
            let cfg = DetectionConfig {
                n_sensors: n,
                channel: channel.clone(),
                snr: db_to_linear(snr_db),
                ..base.clone()
            };
            let outcome = run_detection(&cfg, trials, stream.derive(n as u64))?;
            rows.push(DetectionRow {
                n,
                k: cfg.hypotheses.count(),
                snr_db,
                outcome,
            });
        }
    }
    Ok(rows)
}
