//! Source–channel separation on the two-user adder MAC.
//!
//! A separated (digital) design must compress the correlated pair at a sum
//! rate of at least `H(S1,S2)` and then push those bits through the noiseless
//! adder channel `Y = X1 + X2`, whose sum capacity with independent encoders
//! is 1.5 bits/use. For the preset law `H(S1,S2) = log2 3 > 1.5`, so the two
//! regions do not meet, while sending the bits uncoded lets the receiver
//! decode both sources without error.

use crate::channels::adder_mac;
use crate::error::{Error, Result};
use crate::sources::CorrelatedBinaryPair;

/// Which side of the source/channel comparison a region describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    SourceCoding,
    ChannelCapacity,
}

/// Corner description of a two-user rate region, in bits per channel use.
///
/// For a source region the achievable set is `R1 >= r1_min`, `R2 >= r2_min`,
/// `R1 + R2 >= sum_min`. For a channel region only `sum_max` is meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRegion {
    pub r1_min: f64,
    pub r2_min: f64,
    pub sum_min: f64,
    pub sum_max: f64,
    pub kind: RegionKind,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector in bits (`0 log 0 = 0`).
pub fn entropy_bits(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum()
}

fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

pub fn joint_entropy(dist: &CorrelatedBinaryPair) -> f64 {
    entropy_bits(&[dist.p00(), dist.p01(), dist.p10(), dist.p11()])
}

/// `H(S1 | S2) = H(S1,S2) - H(S2)`.
pub fn conditional_entropy_s1_given_s2(dist: &CorrelatedBinaryPair) -> f64 {
    (joint_entropy(dist) - binary_entropy(dist.marginal_s2())).max(0.0)
}

/// `H(S2 | S1) = H(S1,S2) - H(S1)`.
pub fn conditional_entropy_s2_given_s1(dist: &CorrelatedBinaryPair) -> f64 {
    (joint_entropy(dist) - binary_entropy(dist.marginal_s1())).max(0.0)
}

pub fn mutual_information(dist: &CorrelatedBinaryPair) -> f64 {
    binary_entropy(dist.marginal_s1()) + binary_entropy(dist.marginal_s2()) - joint_entropy(dist)
}

/// Lossless distributed compression region (Slepian–Wolf corners).
pub fn slepian_wolf_region(dist: &CorrelatedBinaryPair) -> RateRegion {
    RateRegion {
        r1_min: conditional_entropy_s1_given_s2(dist),
        r2_min: conditional_entropy_s2_given_s1(dist),
        sum_min: joint_entropy(dist),
        sum_max: f64::INFINITY,
        kind: RegionKind::SourceCoding,
    }
}

/// `H(Y)` for `Y = X1 + X2` with `X1 ~ Bern(p)`, `X2 ~ Bern(q)` independent.
pub fn adder_output_entropy(p: f64, q: f64) -> f64 {
    let (pb, qb) = (1.0 - p, 1.0 - q);
    entropy_bits(&[pb * qb, pb * q + p * qb, p * q])
}

/// Result of the sum-capacity search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumCapacity {
    pub bits: f64,
    pub p: f64,
    pub q: f64,
}

impl SumCapacity {
    pub fn region(&self) -> RateRegion {
        RateRegion {
            r1_min: 0.0,
            r2_min: 0.0,
            sum_min: 0.0,
            sum_max: self.bits,
            kind: RegionKind::ChannelCapacity,
        }
    }
}

/// Sum capacity of the noiseless adder MAC with independent binary inputs.
///
/// Exhaustive grid at `grid_step`, followed by a shrinking pattern search
/// around the best grid point.
pub fn adder_mac_sum_capacity(grid_step: f64) -> Result<SumCapacity> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(Error::invalid(
            "grid_step",
            format!("must satisfy 0 < grid_step <= 0.01, got {grid_step}"),
        ));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let at = |k: usize| (k as f64 / steps as f64).min(1.0);

    let mut best = SumCapacity {
        bits: f64::NEG_INFINITY,
        p: 0.0,
        q: 0.0,
    };
    for i in 0..=steps {
        for j in 0..=steps {
            let (p, q) = (at(i), at(j));
            let h = adder_output_entropy(p, q);
            if h > best.bits {
                best = SumCapacity { bits: h, p, q };
            }
        }
    }

    let mut step = grid_step;
    while step > 1e-12 {
        let mut moved = false;
        for (dp, dq) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let p = (best.p + dp * step).clamp(0.0, 1.0);
            let q = (best.q + dq * step).clamp(0.0, 1.0);
            let h = adder_output_entropy(p, q);
            if h > best.bits {
                best = SumCapacity { bits: h, p, q };
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// Outcome of comparing the source sum rate against the channel sum capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationVerdict {
    /// `true` iff no separated scheme can carry the sources losslessly.
    pub fails: bool,
    /// `H(S1,S2) - C_sum` in bits.
    pub margin_bits: f64,
    pub source: RateRegion,
    pub capacity: SumCapacity,
}

/// Note that independent fair bits also fail (2 bits > 1.5 bits): the adder
/// channel cannot carry two unstructured bits losslessly even without
/// separation. The preset is interesting because uncoded transmission does
/// succeed for it.
pub fn separation_fails(dist: &CorrelatedBinaryPair, grid_step: f64) -> Result<SeparationVerdict> {
    let source = slepian_wolf_region(dist);
    let capacity = adder_mac_sum_capacity(grid_step)?;
    let margin_bits = source.sum_min - capacity.bits;
    Ok(SeparationVerdict {
        fails: margin_bits > 0.0,
        margin_bits,
        source,
        capacity,
    })
}

/// Uncoded transmission over the adder MAC and the structural decoder
/// `0 -> (0,0)`, `1 -> (0,1)`, `2 -> (1,1)`.
pub fn uncoded_transceive(pair: (bool, bool)) -> Result<(bool, bool)> {
    if pair == (true, false) {
        return Err(Error::AmbiguousPair {
            s1: true,
            s2: false,
        });
    }
    let y = adder_mac(pair.0, pair.1);
    Ok(match y {
        0 => (false, false),
        1 => (false, true),
        _ => (true, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::SeedStream;
    use crate::sources::{adder_mac_preset, sample_pair};
    use proptest::prelude::*;

    #[test]
    fn preset_entropies() {
        let d = adder_mac_preset();
        assert!((joint_entropy(&d) - 3f64.log2()).abs() < 1e-12);
        let r = slepian_wolf_region(&d);
        assert!((r.r1_min - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.r2_min - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.sum_min - 1.584_962_500_721_156).abs() < 1e-12);
    }

    #[test]
    fn trivial_tables() {
        let det = CorrelatedBinaryPair::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(joint_entropy(&det), 0.0);
        let r = slepian_wolf_region(&det);
        assert_eq!((r.r1_min, r.r2_min, r.sum_min), (0.0, 0.0, 0.0));

        let ind = CorrelatedBinaryPair::independent_uniform();
        assert!((joint_entropy(&ind) - 2.0).abs() < 1e-12);
        let r = slepian_wolf_region(&ind);
        assert!((r.r1_min - 1.0).abs() < 1e-12 && (r.r2_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_capacity_is_one_and_a_half_bits() {
        let c = adder_mac_sum_capacity(0.001).unwrap();
        assert!((c.bits - 1.5).abs() < 1e-4, "{c:?}");
        assert!((c.p - 0.5).abs() < 1e-3 && (c.q - 0.5).abs() < 1e-3);
        assert!(adder_mac_sum_capacity(0.0).is_err());
        assert!(adder_mac_sum_capacity(0.02).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(adder_output_entropy(0.0, 0.0), 0.0);
        // with X1 fixed, Y = X2 and H(Y) = h(q) <= 1
        for q in [0.1, 0.3, 0.5, 0.9] {
            let h = adder_output_entropy(0.0, q);
            assert!((h - binary_entropy(q)).abs() < 1e-12);
            assert!(h <= 1.0);
        }
    }

    #[test]
    fn verdicts() {
        let v = separation_fails(&adder_mac_preset(), 0.001).unwrap();
        assert!(v.fails);
        assert!((v.margin_bits - (3f64.log2() - 1.5)).abs() < 1e-4);

        let v = separation_fails(&CorrelatedBinaryPair::independent_uniform(), 0.001).unwrap();
        assert!(v.fails);
        assert!((v.margin_bits - 0.5).abs() < 1e-4);

        let det = CorrelatedBinaryPair::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let v = separation_fails(&det, 0.001).unwrap();
        assert!(!v.fails);
        assert!((v.margin_bits + 1.5).abs() < 1e-4);
    }

    #[test]
    fn uncoded_scheme_is_exact_on_support() {
        for pair in [(false, false), (false, true), (true, true)] {
            assert_eq!(uncoded_transceive(pair).unwrap(), pair);
        }
        assert!(matches!(
            uncoded_transceive((true, false)),
            Err(Error::AmbiguousPair { .. })
        ));
        let d = adder_mac_preset();
        let mut rng = SeedStream::new(9).trial(0);
        for _ in 0..100_000 {
            let p = sample_pair(&d, &mut rng);
            assert_eq!(uncoded_transceive(p).unwrap(), p);
        }
    }

    fn table() -> impl Strategy<Value = CorrelatedBinaryPair> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_filter("non-degenerate", |(a, b, c, d)| a + b + c + d > 1e-6)
            .prop_map(|(a, b, c, d)| {
                let t = a + b + c + d;
                let (a, b, c) = (a / t, b / t, c / t);
                CorrelatedBinaryPair::new(a, b, c, 1.0 - a - b - c).unwrap()
            })
    }

    proptest! {
        #[test]
        fn chain_rule_and_bounds(d in table()) {
            let h = joint_entropy(&d);
            let r = slepian_wolf_region(&d);
            prop_assert!(h <= 2.0 + 1e-12);
            prop_assert!(h + 1e-12 >= r.r1_min.max(r.r2_min));
            prop_assert!((h - (r.r1_min + binary_entropy(d.marginal_s2()))).abs() < 1e-12);
            prop_assert!((h - (r.r1_min + mutual_information(&d) + r.r2_min)).abs() < 1e-12);
        }

        #[test]
        fn adder_entropy_symmetric(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            prop_assert!((adder_output_entropy(p, q) - adder_output_entropy(q, p)).abs() < 1e-12);
        }
    }
}
