//! LEO Walker-shell geometry and the satellite OTA impairment study.
//!
//! Orbits are circular two-body orbits around a spherical Earth rotating at
//! the sidereal rate. Positions are returned Earth-fixed unless noted.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::channels::{precompensate, transmit_coherent, CoherentMacChannel, PrecompPolicy, DEFAULT_CLIP};
use crate::error::{Error, Result};
use crate::estimation::{analog_power_scale, lmmse_with_gains, EstimationConfig};
use crate::mc::{accumulate, Moments, SeedStream};
use crate::sources::sample_ceo;

pub const EARTH_RADIUS_KM: f64 = 6378.137;
pub const MU_KM3_S2: f64 = 398_600.441_8;
/// Sidereal rotation rate of the Earth.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

pub const DEFAULT_MASK_DEG: f64 = 40.0;
pub const DEFAULT_CARRIER_HZ: f64 = 2.0e9;
/// Averaging window for LoS statistics.
pub const DEFAULT_PROFILE_DURATION_S: f64 = 86_400.0;

const PRESET_CATALOG: &str = include_str!("../../../presets/constellations.toml");

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

/// Cartesian position in km.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ecef {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Ecef {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, o: &Ecef) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, o: &Ecef) -> Ecef {
        Ecef::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(&self, k: f64) -> Ecef {
        Ecef::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn distance(&self, o: &Ecef) -> f64 {
        self.sub(o).norm()
    }
}

// ---------------------------------------------------------------------------
// Constellation and station
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct WalkerConstellation {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub n_planes: usize,
    pub sats_per_plane: usize,
    /// Walker phasing parameter `F`.
    pub phasing_f: usize,
    #[serde(default)]
    pub raan_offset_deg: f64,
}

impl WalkerConstellation {
    pub fn new(
        altitude_km: f64,
        inclination_deg: f64,
        n_planes: usize,
        sats_per_plane: usize,
        phasing_f: usize,
        raan_offset_deg: f64,
    ) -> Result<Self> {
        let c = Self {
            altitude_km,
            inclination_deg,
            n_planes,
            sats_per_plane,
            phasing_f,
            raan_offset_deg,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::invalid("altitude_km", format!("must be > 0, got {}", self.altitude_km)));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::invalid(
                "inclination_deg",
                format!("must lie in [0, 180], got {}", self.inclination_deg),
            ));
        }
        if self.n_planes == 0 || self.sats_per_plane == 0 {
            return Err(Error::invalid("n_planes", "planes and satellites per plane must be >= 1"));
        }
        if self.phasing_f >= self.n_planes {
            return Err(Error::invalid(
                "phasing_f",
                format!("must be < n_planes ({}), got {}", self.n_planes, self.phasing_f),
            ));
        }
        if !self.raan_offset_deg.is_finite() {
            return Err(Error::invalid("raan_offset_deg", "must be finite"));
        }
        Ok(())
    }

    /// Looks up a shell in the shipped preset catalog.
    pub fn preset(name: &str) -> Result<Self> {
        let mut presets = preset_catalog()?;
        presets.remove(name).ok_or(Error::Unknown {
            kind: "constellation preset",
            name: name.to_string(),
        })
    }

    pub fn total_satellites(&self) -> usize {
        self.n_planes * self.sats_per_plane
    }

    pub fn radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion `sqrt(μ / r³)` in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (MU_KM3_S2 / self.radius_km().powi(3)).sqrt()
    }

    pub fn orbital_period_s(&self) -> f64 {
        TAU / self.mean_motion()
    }

    pub fn with_raan_offset(&self, raan_offset_deg: f64) -> Self {
        Self {
            raan_offset_deg,
            ..self.clone()
        }
    }
}

/// All presets in the shipped catalog, by name.
pub fn preset_catalog() -> Result<BTreeMap<String, WalkerConstellation>> {
    let presets: BTreeMap<String, WalkerConstellation> =
        toml::from_str(PRESET_CATALOG).map_err(|e| Error::Config(format!("preset catalog: {e}")))?;
    for c in presets.values() {
        c.validate()?;
    }
    Ok(presets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStation {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub min_elevation_deg: f64,
}

impl GroundStation {
    pub fn new(lat_deg: f64, lon_deg: f64, min_elevation_deg: f64) -> Result<Self> {
        if !(lat_deg.abs() <= 90.0) {
            return Err(Error::invalid("lat_deg", format!("must satisfy |lat| <= 90, got {lat_deg}")));
        }
        if !lon_deg.is_finite() {
            return Err(Error::invalid("lon_deg", "must be finite"));
        }
        if !(0.0..90.0).contains(&min_elevation_deg) {
            return Err(Error::invalid(
                "min_elevation_deg",
                format!("must lie in [0, 90), got {min_elevation_deg}"),
            ));
        }
        Ok(Self {
            lat_deg,
            lon_deg,
            min_elevation_deg,
        })
    }

    /// Local vertical (unit vector).
    pub fn up(&self) -> Ecef {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        Ecef::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    pub fn position(&self) -> Ecef {
        self.up().scale(EARTH_RADIUS_KM)
    }
}

// ---------------------------------------------------------------------------
// Propagation and visibility
// ---------------------------------------------------------------------------

/// Earth-centered inertial positions at `t` seconds, plane-major order.
pub fn propagate_eci(c: &WalkerConstellation, t: f64) -> Vec<Ecef> {
    let r = c.radius_km();
    let inc = c.inclination_deg.to_radians();
    let (sin_i, cos_i) = inc.sin_cos();
    let n = c.mean_motion();
    let planes = c.n_planes as f64;
    let per_plane = c.sats_per_plane as f64;
    let mut out = Vec::with_capacity(c.total_satellites());
    for p in 0..c.n_planes {
        let raan = (360.0 * p as f64 / planes + c.raan_offset_deg).to_radians();
        let (sin_o, cos_o) = raan.sin_cos();
        let plane_phase = 360.0 * (c.phasing_f * p) as f64 / (planes * per_plane);
        for s in 0..c.sats_per_plane {
            let u = (360.0 * s as f64 / per_plane + plane_phase).to_radians() + n * t;
            let (sin_u, cos_u) = u.sin_cos();
            out.push(Ecef::new(
                r * (cos_o * cos_u - sin_o * sin_u * cos_i),
                r * (sin_o * cos_u + cos_o * sin_u * cos_i),
                r * sin_u * sin_i,
            ));
        }
    }
    out
}

/// Earth-fixed positions at `t` seconds (ECI frame aligned with ECEF at t = 0).
pub fn propagate(c: &WalkerConstellation, t: f64) -> Vec<Ecef> {
    let theta = EARTH_ROTATION_RAD_S * t;
    let (s, co) = theta.sin_cos();
    propagate_eci(c, t)
        .into_iter()
        .map(|p| Ecef::new(p.x * co + p.y * s, -p.x * s + p.y * co, p.z))
        .collect()
}

pub fn elevation_deg(sat: &Ecef, gs: &GroundStation) -> f64 {
    let los = sat.sub(&gs.position());
    let range = los.norm();
    if range == 0.0 {
        return 90.0;
    }
    (los.dot(&gs.up()) / range).clamp(-1.0, 1.0).asin().to_degrees()
}

fn is_visible(sat: &Ecef, gs: &GroundStation) -> bool {
    elevation_deg(sat, gs) > gs.min_elevation_deg
}

/// Satellites strictly above the station's elevation mask.
pub fn count_los(positions: &[Ecef], gs: &GroundStation) -> usize {
    positions.iter().filter(|p| is_visible(p, gs)).count()
}

/// Range from a station to a satellite at `elevation_deg` on a shell of
/// altitude `altitude_km`.
pub fn slant_range_at_elevation(altitude_km: f64, elevation_deg: f64) -> f64 {
    let r = EARTH_RADIUS_KM + altitude_km;
    let e = elevation_deg.to_radians();
    let re_cos = EARTH_RADIUS_KM * e.cos();
    (r * r - re_cos * re_cos).sqrt() - EARTH_RADIUS_KM * e.sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosProfile {
    pub latitudes: Vec<f64>,
    pub mean_count: Vec<f64>,
    pub min_count: Vec<usize>,
    pub max_count: Vec<usize>,
    /// Sample standard deviation of the count over time.
    pub std_count: Vec<f64>,
    pub time_samples: usize,
}

impl LosProfile {
    pub fn index_of(&self, lat_deg: f64) -> Option<usize> {
        self.latitudes.iter().position(|l| (l - lat_deg).abs() < 1e-9)
    }

    pub fn mean_at(&self, lat_deg: f64) -> Option<f64> {
        self.index_of(lat_deg).map(|i| self.mean_count[i])
    }

    /// Standard error of the time-averaged count at grid index `i`.
    pub fn std_err(&self, i: usize) -> f64 {
        self.std_count[i] / (self.time_samples as f64).sqrt()
    }
}

/// Evenly spaced latitudes from -90 to 90 with the given step.
pub fn latitude_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 90.0) {
        return Err(Error::invalid("lat_step", format!("must lie in (0, 90], got {step_deg}")));
    }
    let k = (180.0 / step_deg).floor() as usize;
    let mut grid: Vec<f64> = (0..=k).map(|i| -90.0 + i as f64 * step_deg).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - 90.0).abs() < 1e-9 {
            *last = 90.0;
        }
    }
    Ok(grid)
}

/// Time statistics of the LoS count at longitude 0 for each latitude.
///
/// Samples `t_i = i · duration / time_samples`; the Earth's rotation under
/// the shell supplies the longitude averaging.
pub fn los_profile(
    c: &WalkerConstellation,
    mask_deg: f64,
    lat_grid: &[f64],
    time_samples: usize,
    duration_s: f64,
) -> Result<LosProfile> {
    c.validate()?;
    if time_samples == 0 {
        return Err(Error::invalid("time_samples", "must be >= 1"));
    }
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid("duration", "must be finite and >= 0"));
    }
    let stations = lat_grid
        .iter()
        .map(|&lat| GroundStation::new(lat, 0.0, mask_deg))
        .collect::<Result<Vec<_>>>()?;

    let counts: Vec<Vec<usize>> = (0..time_samples)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * duration_s / time_samples as f64;
            let positions = propagate(c, t);
            stations.iter().map(|gs| count_los(&positions, gs)).collect()
        })
        .collect();

    let n = time_samples as f64;
    let mut profile = LosProfile {
        latitudes: lat_grid.to_vec(),
        mean_count: Vec::with_capacity(lat_grid.len()),
        min_count: Vec::with_capacity(lat_grid.len()),
        max_count: Vec::with_capacity(lat_grid.len()),
        std_count: Vec::with_capacity(lat_grid.len()),
        time_samples,
    };
    for j in 0..lat_grid.len() {
        let column = counts.iter().map(|row| row[j]);
        let sum: f64 = column.clone().map(|k| k as f64).sum();
        let mean = sum / n;
        let ss: f64 = column.clone().map(|k| (k as f64 - mean).powi(2)).sum();
        profile.mean_count.push(mean);
        profile.min_count.push(column.clone().min().unwrap_or(0));
        profile.max_count.push(column.max().unwrap_or(0));
        profile.std_count.push(if time_samples > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 });
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantMetrics {
    pub sat_index: usize,
    pub elevation_deg: f64,
    pub range_km: f64,
    pub delay_ms: f64,
    /// Range rate from a forward difference over [`RANGE_RATE_STEP_S`].
    pub range_rate_km_s: f64,
}

pub const RANGE_RATE_STEP_S: f64 = 0.01;

/// Range, one-way delay and range rate for every satellite in LoS at `t`.
pub fn slant_metrics(c: &WalkerConstellation, t: f64, gs: &GroundStation) -> Vec<SlantMetrics> {
    let now = propagate(c, t);
    let later = propagate(c, t + RANGE_RATE_STEP_S);
    let station = gs.position();
    now.iter()
        .zip(&later)
        .enumerate()
        .filter(|(_, (p, _))| is_visible(p, gs))
        .map(|(i, (p, q))| {
            let range_km = p.distance(&station);
            SlantMetrics {
                sat_index: i,
                elevation_deg: elevation_deg(p, gs),
                range_km,
                delay_ms: range_km / SPEED_OF_LIGHT_KM_S * 1e3,
                range_rate_km_s: (q.distance(&station) - range_km) / RANGE_RATE_STEP_S,
            }
        })
        .collect()
}

/// Spread between the farthest and nearest satellite delays.
pub fn delay_spread_ms(metrics: &[SlantMetrics]) -> f64 {
    let (lo, hi) = metrics
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m.delay_ms), hi.max(m.delay_ms))
        });
    if metrics.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

// ---------------------------------------------------------------------------
// OTA over the satellite downlink
// ---------------------------------------------------------------------------

/// Phase error std produced by a timing error std at a carrier frequency.
pub fn timing_to_phase_std(timing_err_std_s: f64, carrier_hz: f64) -> f64 {
    TAU * carrier_hz * timing_err_std_s
}

/// Residual synchronization model and sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncModel {
    pub phase_err_grid: Vec<f64>,
    /// When set, the implied phase std is added to the grid.
    pub timing_err_std_s: Option<f64>,
    pub carrier_hz: f64,
    pub amp_err_std: f64,
    pub policies: Vec<PrecompPolicy>,
    pub clip: f64,
    pub epochs: usize,
    pub duration_s: f64,
}

impl Default for SyncModel {
    fn default() -> Self {
        Self {
            phase_err_grid: vec![0.0, 0.1, 0.2, 0.4, 0.8],
            timing_err_std_s: Some(1e-11),
            carrier_hz: DEFAULT_CARRIER_HZ,
            amp_err_std: 0.0,
            policies: PrecompPolicy::ALL.to_vec(),
            clip: DEFAULT_CLIP,
            epochs: 12,
            duration_s: 5_760.0,
        }
    }
}

impl SyncModel {
    /// Sorted, de-duplicated phase grid including the timing-implied value.
    pub fn effective_grid(&self) -> Vec<f64> {
        let mut grid = self.phase_err_grid.clone();
        if let Some(tau) = self.timing_err_std_s {
            grid.push(timing_to_phase_std(tau, self.carrier_hz));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        grid
    }

    fn validate(&self) -> Result<()> {
        if self.phase_err_grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("phase_err_grid", "entries must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::invalid("policies", "at least one policy is required"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::invalid("carrier_hz", "must be > 0"));
        }
        Ok(())
    }
}

/// Downlink gain of a satellite at `range_km`: free-space amplitude relative
/// to the zenith range, with the carrier phase accumulated over the path.
pub fn downlink_gain(range_km: f64, altitude_km: f64, carrier_hz: f64) -> Complex64 {
    let cycles = carrier_hz * range_km / SPEED_OF_LIGHT_KM_S;
    Complex64::from_polar(altitude_km / range_km, -TAU * cycles.fract())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtaMseRow {
    pub phase_err_std: f64,
    pub policy: PrecompPolicy,
    /// Mean LoS count over the used epochs.
    pub n_mean: f64,
    pub mse: f64,
    pub std_err: f64,
    /// Mean over epochs of the statistics-aware LMMSE distortion.
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtaMseCurve {
    pub rows: Vec<OtaMseRow>,
    /// `(epoch index, LoS count)` for every epoch that was simulated.
    pub epochs: Vec<(usize, usize)>,
    pub skipped_epochs: Vec<usize>,
    pub timing_phase_std: Option<f64>,
}

impl OtaMseCurve {
    pub fn row(&self, phase_err_std: f64, policy: PrecompPolicy) -> Option<&OtaMseRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && (r.phase_err_std - phase_err_std).abs() < 1e-15)
    }
}

/// Epoch geometry: visible satellites and their downlink gains.
fn epoch_gains(c: &WalkerConstellation, gs: &GroundStation, t: f64, carrier_hz: f64) -> Vec<Complex64> {
    let station = gs.position();
    propagate(c, t)
        .iter()
        .filter(|p| is_visible(p, gs))
        .map(|p| downlink_gain(p.distance(&station), c.altitude_km, carrier_hz))
        .collect()
}

/// Analog CEO estimation with every LoS satellite acting as a sensor.
///
/// For each epoch, phase std and policy, the satellites transmit their
/// power-scaled observations through their downlink gains with residual
/// phase jitter, and the station applies the LMMSE coefficient matched to the
/// effective gains and impairment statistics. All grid points and policies
/// of an epoch share the same random numbers. `est_cfg.model.n_sensors` is
/// ignored; the LoS count takes its place.
pub fn ota_downlink_mse(
    c: &WalkerConstellation,
    gs: &GroundStation,
    est_cfg: &EstimationConfig,
    sync: &SyncModel,
    stream: SeedStream,
) -> Result<OtaMseCurve> {
    c.validate()?;
    sync.validate()?;
    let grid = sync.effective_grid();

    let mut epochs = Vec::new();
    let mut skipped = Vec::new();
    let mut geometry = Vec::new();
    for e in 0..sync.epochs {
        let t = e as f64 * sync.duration_s / sync.epochs as f64;
        let gains = epoch_gains(c, gs, t, sync.carrier_hz);
        if gains.is_empty() {
            skipped.push(e);
        } else {
            epochs.push((e, gains.len()));
            geometry.push(gains);
        }
    }
    if geometry.is_empty() {
        return Err(Error::NoVisibility);
    }
    let n_mean = epochs.iter().map(|(_, n)| *n as f64).sum::<f64>() / epochs.len() as f64;

    let mut rows = Vec::with_capacity(grid.len() * sync.policies.len());
    for &phase_std in &grid {
        for &policy in &sync.policies {
            let mut pooled = Moments::default();
            let mut analytic = 0.0;
            for ((e, n), gains) in epochs.iter().zip(&geometry) {
                let cfg = est_cfg.with_sensors(*n)?;
                let alpha = analog_power_scale(&cfg);
                let channel = CoherentMacChannel::new(gains.clone(), 2.0 * cfg.noise_var, phase_std, sync.amp_err_std)?;
                let pre = precompensate(gains, policy, sync.clip)?;
                let estimator = lmmse_with_gains(
                    &cfg.model,
                    alpha,
                    cfg.noise_var,
                    &pre.effective_gains(gains),
                    phase_std,
                    sync.amp_err_std,
                );
                let m: Moments = accumulate(stream.derive(*e as u64), cfg.trials, |m: &mut Moments, rng, _| {
                    let readings = sample_ceo(&cfg.model, rng);
                    let symbols: Vec<Complex64> = readings
                        .observations
                        .iter()
                        .map(|x| Complex64::new(alpha * x, 0.0))
                        .collect();
                    let y = transmit_coherent(&symbols, &pre, &channel, rng).expect("lengths match");
                    let err = estimator.coefficient * y.re - readings.source_value;
                    m.push(err * err);
                });
                pooled = merge(pooled, m);
                analytic += estimator.distortion;
            }
            rows.push(OtaMseRow {
                phase_err_std: phase_std,
                policy,
                n_mean,
                mse: pooled.mean(),
                std_err: pooled.std_err(),
                analytic: analytic / epochs.len() as f64,
            });
        }
    }
    Ok(OtaMseCurve {
        rows,
        epochs,
        skipped_epochs: skipped,
        timing_phase_std: sync.timing_err_std_s.map(|t| timing_to_phase_std(t, sync.carrier_hz)),
    })
}

fn merge(mut a: Moments, b: Moments) -> Moments {
    use crate::mc::Accumulator;
    a.merge(b);
    a
}

/// Great-circle half-angle of the region that sees a shell above `mask_deg`.
pub fn coverage_half_angle_deg(altitude_km: f64, mask_deg: f64) -> f64 {
    let e = mask_deg.to_radians();
    let ratio = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + altitude_km);
    ((ratio * e.cos()).acos() - e).to_degrees()
}

/// Highest ground latitude that can see a shell of the given inclination.
pub fn coverage_cap_latitude_deg(c: &WalkerConstellation, mask_deg: f64) -> f64 {
    let max_sub_lat = if c.inclination_deg <= 90.0 {
        c.inclination_deg
    } else {
        180.0 - c.inclination_deg
    };
    (max_sub_lat + coverage_half_angle_deg(c.altitude_km, mask_deg)).min(90.0)
}
