//! Independent oracles for closed forms and geometry, computed here without
//! going through the library's own formulas.

use proptest::prelude::*;
use rand::Rng;

use ota_core::constellation::{
    count_los, elevation_deg, propagate, slant_range_at_elevation, Ecef, GroundStation, WalkerConstellation,
    EARTH_RADIUS_KM,
};
use ota_core::detection::analytic_bpsk_error;
use ota_core::estimation::{
    analog_power_scale, analytic_analog_distortion, analytic_digital_distortion, lmmse_with_gains, EstimationConfig,
};
use ota_core::separation::{adder_mac_sum_capacity, adder_output_entropy};
use ota_core::sources::GaussianCeoModel;
use ota_core::{Complex64, SeedStream};

fn q_simpson(x: f64) -> f64 {
    let (a, b, m) = (x, x + 12.0, 100_000usize);
    let h = (b - a) / m as f64;
    let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn bpsk_error_matches_quadrature() {
    for snr in [0.0, 0.5, 1.0, 4.0, 9.0, 16.0] {
        let q = q_simpson((2.0f64 * snr).sqrt());
        let a = analytic_bpsk_error(snr).unwrap();
        assert!((a - q).abs() <= 1e-10 + 1e-7 * q, "snr {snr}: {a} vs {q}");
    }
    assert!((analytic_bpsk_error(4.0).unwrap() - 0.0023388675).abs() < 1e-9);
}

#[test]
fn sum_capacity_matches_brute_force_grid() {
    // output pmf of X1 + X2 with independent Bernoulli inputs
    let h = |ps: [f64; 3]| -> f64 { ps.iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum() };
    let mut best = 0.0f64;
    let steps = 2000;
    for i in 0..=steps {
        for j in 0..=steps {
            let (p, q) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let v = h([(1.0 - p) * (1.0 - q), p * (1.0 - q) + q * (1.0 - p), p * q]);
            best = best.max(v);
        }
    }
    assert!((best - 1.5).abs() < 1e-12);
    let c = adder_mac_sum_capacity(1e-3).unwrap();
    assert!((c.bits - best).abs() < 1e-9);
    assert!((adder_output_entropy(0.5, 0.5) - 1.5).abs() < 1e-15);
}

/// `D = σ²_S − E{SY}²/E{Y²}` from the explicit coefficient vector of
/// `Y = c_S S + Σ c_n Z_n + W`.
fn gram_distortion(s2: f64, z2: f64, w2: f64, coeffs_z: &[f64], c_s: f64) -> f64 {
    let sy = c_s * s2;
    let yy = c_s * c_s * s2 + coeffs_z.iter().map(|c| c * c * z2).sum::<f64>() + w2;
    s2 - sy * sy / yy
}

#[test]
fn analog_distortion_matches_gram_oracle() {
    for n in [1usize, 3, 10, 100] {
        for p in [0.1, 1.0, 30.0] {
            for (s2, z2, w2) in [(1.0, 1.0, 1.0), (2.0, 0.5, 0.1), (0.3, 0.0, 2.0)] {
                let cfg = EstimationConfig::new(GaussianCeoModel::new(s2, z2, n).unwrap(), p, w2, 1).unwrap();
                let alpha = (p / n as f64 / (s2 + z2)).sqrt();
                assert!((analog_power_scale(&cfg) - alpha).abs() < 1e-14);
                let oracle = gram_distortion(s2, z2, w2, &vec![alpha; n], alpha * n as f64);
                let d = analytic_analog_distortion(&cfg);
                assert!((d - oracle).abs() <= 1e-12 * s2, "{n} {p}: {d} vs {oracle}");
            }
        }
    }
}

#[test]
fn lmmse_with_real_gains_matches_gram_oracle() {
    let model = GaussianCeoModel::new(1.5, 0.7, 4).unwrap();
    let gains = [0.3, 1.0, 2.0, 0.8];
    let alpha = 0.9;
    let eff: Vec<Complex64> = gains.iter().map(|g| Complex64::new(*g, 0.0)).collect();
    let est = lmmse_with_gains(&model, alpha, 0.4, &eff, 0.0, 0.0);
    let cz: Vec<f64> = gains.iter().map(|g| alpha * g).collect();
    let oracle = gram_distortion(1.5, 0.7, 0.4, &cz, cz.iter().sum());
    assert!((est.distortion - oracle).abs() < 1e-12);
}

#[test]
fn single_sensor_analog_equals_digital() {
    // one Gaussian link: uncoded transmission is already optimal
    for (z2, expected) in [(0.0, 1.0 / 11.0), (1.0, 6.0 / 11.0)] {
        let cfg = EstimationConfig::new(GaussianCeoModel::new(1.0, z2, 1).unwrap(), 10.0, 1.0, 1).unwrap();
        assert!((analytic_analog_distortion(&cfg) - expected).abs() < 1e-12);
        assert!((analytic_digital_distortion(&cfg) - expected).abs() < 1e-12);
    }
}

/// Elevation of a satellite at `central_deg` from the station on a shell of
/// altitude `h`, by bisection on the planar geometry.
fn range_by_bisection(h: f64, elevation: f64) -> f64 {
    let r = EARTH_RADIUS_KM + h;
    let elev_of = |lambda: f64| {
        let sat = (r * lambda.cos(), r * lambda.sin());
        let d = (sat.0 - EARTH_RADIUS_KM, sat.1);
        d.0.atan2(d.1).to_degrees()
    };
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if elev_of(mid) > elevation {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    ((r * lambda.cos() - EARTH_RADIUS_KM).powi(2) + (r * lambda.sin()).powi(2)).sqrt()
}

#[test]
fn slant_range_matches_bisection() {
    for h in [300.0, 550.0, 1200.0] {
        for e in [0.0, 10.0, 25.0, 40.0, 70.0] {
            let a = slant_range_at_elevation(h, e);
            let b = range_by_bisection(h, e);
            assert!((a - b).abs() < 1e-6, "h {h} e {e}: {a} vs {b}");
        }
    }
    assert!((slant_range_at_elevation(550.0, 25.0) - 1123.418).abs() < 1e-3);
}

#[test]
fn los_count_matches_central_angle_oracle() {
    let c = WalkerConstellation::preset("oneweb-like").unwrap();
    let mut rng = SeedStream::new(9).trial(0);
    for _ in 0..20 {
        let t = rng.random_range(0.0..86_400.0);
        let gs = GroundStation::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..180.0), 30.0).unwrap();
        let pos = propagate(&c, t);
        // visible iff the central angle is below the coverage half-angle
        let e = 30f64.to_radians();
        let half = ((EARTH_RADIUS_KM / c.radius_km()) * e.cos()).acos() - e;
        let up = gs.up();
        let oracle = pos.iter().filter(|p| (p.dot(&up) / p.norm()).acos() < half).count();
        assert_eq!(count_los(&pos, &gs), oracle);
    }
}

proptest! {
    #[test]
    fn elevation_is_bounded(
        lat in -90.0f64..=90.0,
        lon in -180.0f64..180.0,
        x in -8000.0f64..8000.0,
        y in -8000.0f64..8000.0,
        z in -8000.0f64..8000.0,
    ) {
        let gs = GroundStation::new(lat, lon, 0.0).unwrap();
        let e = elevation_deg(&Ecef::new(x, y, z), &gs);
        prop_assert!((-90.0..=90.0).contains(&e));
    }

    #[test]
    fn walker_radius_invariant(
        alt in 200.0f64..2000.0,
        inc in 0.0f64..=180.0,
        planes in 1usize..8,
        per in 1usize..8,
        t in 0.0f64..1e5,
    ) {
        let c = WalkerConstellation::new(alt, inc, planes, per, planes - 1, 0.0).unwrap();
        for p in propagate(&c, t) {
            prop_assert!((p.norm() / c.radius_km() - 1.0).abs() < 1e-9);
        }
    }
}
