//! Truncated random Fourier series on the torus [0, 2pi).
//!
//! A field stores the raw Gaussian coefficients g_n for |n| <= n_max; the
//! Fourier coefficient of the function itself is g_n / <n> with
//! <n> = sqrt(1 + n^2). Under the base measure the g_n are i.i.d. standard
//! complex Gaussians.

use crate::rng::{freq_slot, CounterRng};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("projection mask must be even: contains {0} but not {1}")]
    MaskNotEven(i64, i64),
    #[error("scaling factor must be positive, got {0}")]
    NegativeScale(f64),
}

pub fn japanese_bracket(n: i64) -> f64 {
    (1.0 + (n * n) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    n_max: i64,
    /// g_n for n = -n_max..=n_max, indexed by n + n_max.
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zero(n_max: i64) -> Self {
        assert!(n_max >= 0);
        FourierField {
            n_max,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * n_max + 1) as usize],
        }
    }

    pub fn from_coeffs(n_max: i64, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), (2 * n_max + 1) as usize);
        FourierField { n_max, coeffs }
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    /// Raw coefficient g_n (0 outside the cutoff).
    pub fn g(&self, n: i64) -> Complex64 {
        if n.abs() > self.n_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.n_max) as usize]
        }
    }

    pub fn set_g(&mut self, n: i64, v: Complex64) {
        assert!(n.abs() <= self.n_max);
        self.coeffs[(n + self.n_max) as usize] = v;
    }

    /// Fourier coefficient of the field: g_n / <n>.
    pub fn weighted_coefficient(&self, n: i64) -> Complex64 {
        self.g(n) / japanese_bracket(n)
    }

    /// All weighted coefficients, n = -n_max..=n_max.
    pub fn weighted_coeffs(&self) -> Vec<Complex64> {
        (-self.n_max..=self.n_max)
            .map(|n| self.weighted_coefficient(n))
            .collect()
    }

    pub fn iter_g(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        (-self.n_max..=self.n_max).map(move |n| (n, self.g(n)))
    }
}

/// Draw a field from the base Gaussian measure; pure function of
/// (seed, index, n_max), and g_n does not depend on n_max.
pub fn sample_gaussian_field(seed: u64, index: u64, n_max: i64) -> FourierField {
    let mut rng = CounterRng::new(seed, index);
    let mut f = FourierField::zero(n_max);
    for n in -n_max..=n_max {
        f.set_g(n, rng.complex_gaussian(freq_slot(n)));
    }
    f
}

/// |g_n|^2 for n = -n_max..=n_max, distributed as for the sampled field with
/// the same address (the phases are simply not materialized).
pub fn sample_mass_profile(seed: u64, index: u64, n_max: i64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed, index);
    (-n_max..=n_max)
        .map(|n| rng.exponential(freq_slot(n)))
        .collect()
}

/// MC mean of the truncated mass over `samples` profile draws. Chunked
/// deterministic reduction: the result is identical for every thread count.
pub fn mean_mass_mc(seed: u64, samples: u64, n_max: i64, threads: usize) -> crate::stats::Estimate {
    use crate::stats::{chunked_accumulate, MomentAccumulator};
    chunked_accumulate(
        samples,
        8192,
        threads,
        |range| {
            let mut acc = MomentAccumulator::default();
            for i in range {
                let mut rng = CounterRng::new(seed, i);
                let m: f64 = (-n_max..=n_max)
                    .map(|n| rng.exponential(freq_slot(n)) / japanese_bracket(n).powi(2))
                    .sum();
                acc.push(m);
            }
            acc
        },
        MomentAccumulator::merge,
        MomentAccumulator::default(),
    )
    .estimate()
}

/// Dyadic block projection P_N: keeps |n| in (N/2, N]. N must be a power of
/// two; frequencies beyond the stored cutoff are already zero.
pub fn project_dyadic(u: &FourierField, n_dyadic: i64) -> FourierField {
    assert!(n_dyadic >= 1 && (n_dyadic & (n_dyadic - 1)) == 0, "N must be a power of two");
    let lo = n_dyadic / 2;
    let mut out = FourierField::zero(u.n_max());
    for (n, g) in u.iter_g() {
        if n.abs() > lo && n.abs() <= n_dyadic {
            out.set_g(n, g);
        }
    }
    out
}

/// Sharp projection onto |n| <= cutoff.
pub fn project_leq(u: &FourierField, cutoff: i64) -> FourierField {
    let mut out = FourierField::zero(u.n_max());
    for (n, g) in u.iter_g() {
        if n.abs() <= cutoff {
            out.set_g(n, g);
        }
    }
    out
}

/// An even set of frequencies (n in Q iff -n in Q), validated on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMask {
    members: Vec<i64>, // sorted, deduplicated
}

impl ProjectionMask {
    pub fn new(mut members: Vec<i64>) -> Result<Self, FieldError> {
        members.sort_unstable();
        members.dedup();
        for &n in &members {
            if members.binary_search(&(-n)).is_err() {
                return Err(FieldError::MaskNotEven(n, -n));
            }
        }
        Ok(ProjectionMask { members })
    }

    pub fn full(n_max: i64) -> Self {
        ProjectionMask {
            members: (-n_max..=n_max).collect(),
        }
    }

    pub fn empty() -> Self {
        ProjectionMask { members: vec![] }
    }

    /// Complement within [-n_max, n_max]; even sets have even complements.
    pub fn complement(&self, n_max: i64) -> Self {
        ProjectionMask {
            members: (-n_max..=n_max)
                .filter(|n| !self.contains(*n))
                .collect(),
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        self.members.binary_search(&n).is_ok()
    }
}

pub fn project_mask(u: &FourierField, q: &ProjectionMask) -> FourierField {
    let mut out = FourierField::zero(u.n_max());
    for (n, g) in u.iter_g() {
        if q.contains(n) {
            out.set_g(n, g);
        }
    }
    out
}

/// Scaling map T_s^k: multiplies g_k and g_{-k} by s (only g_0 for k = 0).
pub fn scale_frequency(u: &FourierField, k: i64, s: f64) -> Result<FourierField, FieldError> {
    if s <= 0.0 {
        return Err(FieldError::NegativeScale(s));
    }
    assert!(k >= 0);
    let mut out = u.clone();
    if k <= u.n_max() {
        out.set_g(k, u.g(k) * s);
        if k > 0 {
            out.set_g(-k, u.g(-k) * s);
        }
    }
    Ok(out)
}

/// H^sigma norm: (sum <n>^{2 sigma} |g_n|^2 / <n>^2)^{1/2}. sigma = 0 is the
/// L^2 norm, whose square is the mass.
pub fn sobolev_norm(u: &FourierField, sigma: f64) -> f64 {
    u.iter_g()
        .map(|(n, g)| {
            let b = japanese_bracket(n);
            b.powf(2.0 * sigma) * g.norm_sqr() / (b * b)
        })
        .sum::<f64>()
        .sqrt()
}

/// A seeded, reproducible collection of field draws with optional weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: u64,
    pub n_max: i64,
    pub weights: Option<Vec<f64>>,
}

impl SampleBatch {
    pub fn new(seed: u64, count: u64, n_max: i64) -> Self {
        SampleBatch {
            seed,
            count,
            n_max,
            weights: None,
        }
    }

    pub fn field(&self, index: u64) -> FourierField {
        assert!(index < self.count);
        sample_gaussian_field(self.seed, index, self.n_max)
    }
}
