//! Deterministic seeded Monte Carlo plumbing.
//!
//! Samples are split into fixed-size chunks; chunks are mapped in parallel
//! and their partial sums merged in chunk order, so every estimate is
//! bit-identical regardless of the number of worker threads. Per-sample
//! seeds come from a SplitMix64 mix of the master seed and the sample index.

use rayon::prelude::*;

/// Fixed chunk length for parallel accumulation. Chunk boundaries never
/// depend on the thread count.
const CHUNK: usize = 256;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sample `index` of the stream rooted at `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix(master ^ splitmix(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Independent sub-stream of a master seed. Operations that need auxiliary
/// estimates (reference means, proxies) draw them from tagged sub-streams so
/// the primary sample stream is never reused.
pub fn substream(master: u64, tag: u64) -> u64 {
    splitmix(master.wrapping_add(splitmix(tag ^ 0xA24B_AED4_963E_E407)))
}

#[derive(Clone, Copy, Debug, Default)]
struct MeanAcc {
    sum: f64,
    sum_sq: f64,
    finite: usize,
    neg_inf: usize,
    pos_inf: usize,
    nan: usize,
}

impl MeanAcc {
    fn push(&mut self, v: f64) {
        if v.is_nan() {
            self.nan += 1;
        } else if v == f64::NEG_INFINITY {
            self.neg_inf += 1;
        } else if v == f64::INFINITY {
            self.pos_inf += 1;
        } else {
            self.sum += v;
            self.sum_sq += v * v;
            self.finite += 1;
        }
    }

    fn merge(&mut self, o: &MeanAcc) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.finite += o.finite;
        self.neg_inf += o.neg_inf;
        self.pos_inf += o.pos_inf;
        self.nan += o.nan;
    }

    fn stats(&self) -> McStats {
        let samples = self.finite + self.neg_inf + self.pos_inf + self.nan;
        let (mean, std_error) = if self.nan > 0 || (self.neg_inf > 0 && self.pos_inf > 0) {
            (f64::NAN, f64::INFINITY)
        } else if self.neg_inf > 0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else if self.pos_inf > 0 {
            (f64::INFINITY, f64::INFINITY)
        } else if self.finite == 0 {
            (f64::NAN, f64::INFINITY)
        } else {
            let n = self.finite as f64;
            let mean = self.sum / n;
            let var = if self.finite > 1 {
                ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        };
        McStats {
            mean,
            std_error,
            samples,
            neg_inf_samples: self.neg_inf,
            pos_inf_samples: self.pos_inf,
        }
    }
}

/// Mean and standard error of a seeded Monte Carlo run. Non-finite sample
/// values are counted, never silently dropped: any `-inf` sample makes the
/// mean `-inf`.
#[derive(Clone, Copy, Debug)]
pub struct McStats {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub neg_inf_samples: usize,
    pub pos_inf_samples: usize,
}

/// Fraction estimate with a binomial standard error.
#[derive(Clone, Copy, Debug)]
pub struct FractionStats {
    pub fraction: f64,
    pub std_error: f64,
    pub hits: usize,
    pub flagged: usize,
    pub samples: usize,
}

impl FractionStats {
    /// Three-standard-error confidence radius.
    pub fn ci_radius(&self) -> f64 {
        3.0 * self.std_error
    }
}

fn chunk_bounds(samples: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(move |c| (c * CHUNK, ((c + 1) * CHUNK).min(samples)))
}

pub(crate) fn mc_mean<F>(samples: usize, seed: u64, f: F) -> McStats
where
    F: Fn(u64) -> f64 + Sync,
{
    let accs: Vec<MeanAcc> = chunk_bounds(samples)
        .map(|(lo, hi)| {
            let mut acc = MeanAcc::default();
            for i in lo..hi {
                acc.push(f(derive_seed(seed, i as u64)));
            }
            acc
        })
        .collect();
    let mut total = MeanAcc::default();
    for a in &accs {
        total.merge(a);
    }
    total.stats()
}

/// Vector-valued variant: `f` fills one value per component, all from the
/// same sample seed (hence the same orbit).
pub(crate) fn mc_mean_vec<F>(samples: usize, seed: u64, dims: usize, f: F) -> Vec<McStats>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let accs: Vec<Vec<MeanAcc>> = chunk_bounds(samples)
        .map(|(lo, hi)| {
            let mut acc = vec![MeanAcc::default(); dims];
            let mut buf = vec![0.0; dims];
            for i in lo..hi {
                f(derive_seed(seed, i as u64), &mut buf);
                for (a, &v) in acc.iter_mut().zip(buf.iter()) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![MeanAcc::default(); dims];
    for chunk in &accs {
        for (t, a) in total.iter_mut().zip(chunk.iter()) {
            t.merge(a);
        }
    }
    total.iter().map(MeanAcc::stats).collect()
}

/// Fraction of samples for which `f` reports a hit; the second component of
/// `f`'s output marks samples that are flagged (e.g. degenerate products).
pub(crate) fn mc_fraction<F>(samples: usize, seed: u64, f: F) -> FractionStats
where
    F: Fn(u64) -> (bool, bool) + Sync,
{
    let counts: Vec<(usize, usize)> = chunk_bounds(samples)
        .map(|(lo, hi)| {
            let mut hits = 0;
            let mut flagged = 0;
            for i in lo..hi {
                let (hit, flag) = f(derive_seed(seed, i as u64));
                hits += hit as usize;
                flagged += flag as usize;
            }
            (hits, flagged)
        })
        .collect();
    let hits: usize = counts.iter().map(|c| c.0).sum();
    let flagged: usize = counts.iter().map(|c| c.1).sum();
    let n = samples as f64;
    let p = hits as f64 / n;
    FractionStats {
        fraction: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        hits,
        flagged,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_deterministic_and_spread() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_ne!(substream(7, 1), substream(7, 2));
    }

    #[test]
    fn mean_matches_sequential_sum() {
        let stats = mc_mean(1000, 3, |s| (s % 17) as f64);
        let mut exp = 0.0;
        for i in 0..1000u64 {
            exp += (derive_seed(3, i) % 17) as f64;
        }
        assert_eq!(stats.mean, exp / 1000.0);
        assert_eq!(stats.samples, 1000);
        assert_eq!(stats.neg_inf_samples, 0);
    }

    #[test]
    fn mean_independent_of_worker_count() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| mc_mean(5000, 11, |s| ((s % 1000) as f64).sin()))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn neg_inf_samples_poison_the_mean_but_are_counted() {
        let stats = mc_mean(100, 5, |s| {
            if s % 3 == 0 {
                f64::NEG_INFINITY
            } else {
                1.0
            }
        });
        assert_eq!(stats.mean, f64::NEG_INFINITY);
        assert!(stats.neg_inf_samples > 0);
    }

    #[test]
    fn fraction_counts_hits_and_flags() {
        let stats = mc_fraction(1000, 9, |s| (s % 2 == 0, s % 64 == 0));
        assert_eq!(stats.fraction, stats.hits as f64 / 1000.0);
        assert!(stats.std_error > 0.0);
        assert!(stats.flagged > 0);
    }
}
