//! Deterministic Monte Carlo plumbing.
//!
//! Every trial owns a ChaCha8 stream selected by `(key, trial index)`, where
//! the key is derived from the master seed and a domain label. Trials are
//! processed in fixed-size chunks whose partial results are merged in chunk
//! order, so the reduction is the same for any rayon thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type TrialRng = ChaCha8Rng;

/// Trials per reduction chunk. Fixed so that summation order never depends on
/// the scheduler.
const CHUNK: u64 = 2048;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed family of per-trial random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            key: splitmix64(master_seed),
        }
    }

    /// Child stream for an independent sub-experiment (grid point, epoch...).
    pub fn derive(&self, label: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    /// Child stream keyed by a name, for readability at call sites.
    pub fn named(&self, name: &str) -> Self {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.derive(h)
    }

    pub fn trial(&self, index: u64) -> TrialRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Partial result that can absorb another partial computed on later trials.
pub trait Accumulator: Default + Send {
    fn merge(&mut self, later: Self);
}

/// Runs `trials` trials and reduces them deterministically.
pub fn accumulate<A, F>(stream: SeedStream, trials: u64, f: F) -> A
where
    A: Accumulator,
    F: Fn(&mut A, &mut TrialRng, u64) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = A::default();
            let end = ((c + 1) * CHUNK).min(trials);
            for i in c * CHUNK..end {
                let mut rng = stream.trial(i);
                f(&mut acc, &mut rng, i);
            }
            acc
        })
        .collect();
    let mut total = A::default();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Running first and second moments of a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl Accumulator for Moments {
    fn merge(&mut self, later: Self) {
        self.count += later.count;
        self.sum += later.sum;
        self.sum_sq += later.sum_sq;
    }
}

impl<A: Accumulator, const K: usize> Accumulator for [A; K]
where
    [A; K]: Default,
{
    fn merge(&mut self, later: Self) {
        for (a, b) in self.iter_mut().zip(later) {
            a.merge(b);
        }
    }
}

impl<A: Accumulator> Accumulator for Vec<A> {
    fn merge(&mut self, later: Self) {
        if self.is_empty() {
            *self = later;
            return;
        }
        for (a, b) in self.iter_mut().zip(later) {
            a.merge(b);
        }
    }
}

/// Runs `f` inside a dedicated pool when `threads` is given.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("rayon thread pool")
            .install(f),
        _ => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_keys_give_identical_draws() {
        let a: Vec<u64> = (0..5).map(|i| SeedStream::new(7).trial(i).random()).collect();
        let b: Vec<u64> = (0..5).map(|i| SeedStream::new(7).trial(i).random()).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let c: u64 = SeedStream::new(7).derive(1).trial(0).random();
        assert_ne!(a[0], c);
    }

    #[test]
    fn reduction_is_thread_count_invariant() {
        let run = |t| {
            with_threads(Some(t), || {
                accumulate(SeedStream::new(3), 10_007, |m: &mut Moments, rng, _| {
                    m.push(rng.random::<f64>())
                })
            })
        };
        let one = run(1);
        let many = run(8);
        assert_eq!(one.count, 10_007);
        assert_eq!(one.sum.to_bits(), many.sum.to_bits());
        assert_eq!(one.sum_sq.to_bits(), many.sum_sq.to_bits());
    }

    #[test]
    fn moments_of_known_sample() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }
}
