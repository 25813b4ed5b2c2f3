//! Estimation utilities: deterministic reductions, standard errors, Wilson
//! intervals, effective sample size, Richardson extrapolation.

use serde::Serialize;

/// Pairwise (tree) summation with a fixed fan-in, deterministic for a fixed
/// input order regardless of thread count upstream.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// |a - b| in units of the combined standard error.
    pub fn sigma_distance(&self, other: &Estimate) -> f64 {
        let se = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        if se == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value).abs() / se
        }
    }
}

pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    assert!(n > 1.0);
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Estimate::new(mean, (var / n).sqrt())
}

/// Self-normalized weighted mean with linearization standard error.
pub fn weighted_mean_stderr(vals: &[f64], ws: &[f64]) -> Estimate {
    assert_eq!(vals.len(), ws.len());
    let wsum = pairwise_sum(ws);
    assert!(wsum > 0.0, "all weights vanish");
    let prods: Vec<f64> = vals.iter().zip(ws).map(|(v, w)| v * w).collect();
    let mean = pairwise_sum(&prods) / wsum;
    let dev: Vec<f64> = vals
        .iter()
        .zip(ws)
        .map(|(v, w)| {
            let d = w * (v - mean);
            d * d
        })
        .collect();
    Estimate::new(mean, pairwise_sum(&dev).sqrt() / wsum)
}

/// Ratio estimator sum(h)/sum(g) with linearization stderr; h and g from the
/// same draws.
pub fn ratio_estimate(h: &[f64], g: &[f64]) -> Estimate {
    assert_eq!(h.len(), g.len());
    let gs = pairwise_sum(g);
    assert!(gs != 0.0, "ratio denominator vanishes");
    let r = pairwise_sum(h) / gs;
    let dev: Vec<f64> = h
        .iter()
        .zip(g)
        .map(|(hi, gi)| {
            let d = hi - r * gi;
            d * d
        })
        .collect();
    Estimate::new(r, pairwise_sum(&dev).sqrt() / gs.abs())
}

/// (sum w)^2 / sum w^2 — weight-degeneracy diagnostic.
pub fn effective_sample_size(ws: &[f64]) -> f64 {
    let s = pairwise_sum(ws);
    let sq: Vec<f64> = ws.iter().map(|w| w * w).collect();
    let s2 = pairwise_sum(&sq);
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Streaming accumulator for the ratio estimator sum(h)/sum(g); avoids
/// holding per-sample arrays when many ratios are tracked at once.
#[derive(Debug, Clone, Copy, Default)]
pub struct RatioAccumulator {
    sh: f64,
    sg: f64,
    shh: f64,
    sgg: f64,
    shg: f64,
    n: u64,
}

impl RatioAccumulator {
    pub fn push(&mut self, h: f64, g: f64) {
        self.sh += h;
        self.sg += g;
        self.shh += h * h;
        self.sgg += g * g;
        self.shg += h * g;
        self.n += 1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Mean and stderr of the denominator alone.
    pub fn denominator(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sg / n;
        let var = (self.sgg / n - mean * mean).max(0.0) / (n - 1.0);
        Estimate::new(mean, var.sqrt())
    }

    pub fn finish(&self) -> Estimate {
        assert!(self.sg != 0.0, "ratio denominator vanishes");
        let r = self.sh / self.sg;
        // sum (h - r g)^2 from the aggregates
        let ss = (self.shh - 2.0 * r * self.shg + r * r * self.sgg).max(0.0);
        Estimate::new(r, ss.sqrt() / self.sg.abs())
    }
}

/// Splits 0..total into fixed-size chunks, evaluates each chunk serially,
/// and merges the chunk results in chunk order. The outcome is identical
/// for every thread count because chunk boundaries and the merge order are
/// fixed; threads only decide who computes which chunk.
pub fn chunked_accumulate<T, F, M>(
    total: u64,
    chunk: u64,
    threads: usize,
    eval: F,
    merge: M,
    init: T,
) -> T
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync,
    M: Fn(T, T) -> T,
{
    assert!(chunk > 0 && threads > 0);
    let n_chunks = total.div_ceil(chunk) as usize;
    let range_of = |i: usize| -> std::ops::Range<u64> {
        let lo = i as u64 * chunk;
        lo..(lo + chunk).min(total)
    };
    let results: Vec<T> = if threads == 1 || n_chunks <= 1 {
        (0..n_chunks).map(|i| eval(range_of(i))).collect()
    } else {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Mutex;
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<T>>> = (0..n_chunks).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads.min(n_chunks) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n_chunks {
                        break;
                    }
                    *slots[i].lock().unwrap() = Some(eval(range_of(i)));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().unwrap().unwrap())
            .collect()
    };
    results.into_iter().fold(init, merge)
}

/// Streaming (sum, sum of squares, count) triple for chunked mean/stderr.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentAccumulator {
    pub sum: f64,
    pub sum_sq: f64,
    pub n: u64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    pub fn merge(mut self, other: MomentAccumulator) -> MomentAccumulator {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
        self
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        assert!(self.n > 1);
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        Estimate::new(mean, (var / n).sqrt())
    }
}

/// Wilson score interval for a binomial proportion. z = 2.576 is the 99%
/// two-sided normal quantile.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Two-point Richardson extrapolation to h = 0 assuming a leading error
/// linear in h: f(h) = L + c h. h2 < h1.
pub fn richardson(f_h1: f64, f_h2: f64, h1: f64, h2: f64) -> f64 {
    assert!(h2 < h1 && h2 > 0.0);
    f_h2 + (f_h2 - f_h1) * h2 / (h1 - h2)
}

/// Richardson extrapolation of estimates with error propagation.
pub fn richardson_estimate(e1: Estimate, e2: Estimate, h1: f64, h2: f64) -> Estimate {
    let a = h2 / (h1 - h2);
    let value = e2.value + (e2.value - e1.value) * a;
    let se = (((1.0 + a) * e2.stderr).powi(2) + (a * e1.stderr).powi(2)).sqrt();
    Estimate::new(value, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn wilson_basic() {
        let (lo, hi) = wilson_interval(50, 100, 2.576);
        assert!(lo < 0.5 && 0.5 < hi);
        let (lo0, _) = wilson_interval(0, 1000, 2.576);
        assert!(lo0.abs() < 1e-12);
    }

    #[test]
    fn richardson_linear_exact() {
        // f(h) = 3 + 2h
        let f = |h: f64| 3.0 + 2.0 * h;
        let r = richardson(f(0.1), f(0.05), 0.1, 0.05);
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ess_uniform_weights() {
        let ws = vec![2.0; 50];
        assert!((effective_sample_size(&ws) - 50.0).abs() < 1e-9);
    }
}
