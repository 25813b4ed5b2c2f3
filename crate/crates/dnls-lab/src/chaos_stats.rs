//! Tail bounds and chaos norms for the quartic energy remainder.
//!
//! The exact L^2 enumeration uses only the complex-Gaussian moment identity
//! E|g|^{2k} = k! (|g|^2 is Exp(1)): the expectation of a product of four
//! g's and four conjugates is the number of frequency-preserving bijections
//! between the two index sets, and the 24 bijections split into 4 + 4 + 16
//! according to how many pairings stay inside one quadruple.

use crate::functionals::{f_n, scaled_chaos, CoefficientScaling};
use crate::rng::{freq_slot, CounterRng};
use crate::stats::{mean_stderr, wilson_interval, Estimate};
use crate::torus_field::{japanese_bracket, sample_gaussian_field, FourierField, SampleBatch};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChaosError {
    #[error("indicator acceptance {got:.2e} below {min:.0e}; raise m or use the tilted proposal")]
    AcceptanceUnderflow { got: f64, min: f64 },
    #[error("exact enumeration is O(M^3); M = {0} exceeds 128")]
    EnumerationTooLarge(i64),
}

/// Empirical tail probability against an analytic bound.
#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub lambda: f64,
    pub empirical_prob: f64,
    pub bound: f64,
    pub sample_count: u64,
    /// 99% Wilson score interval for the empirical probability.
    pub wilson: (f64, f64),
    pub bound_applicable: bool,
    /// True only if the whole Wilson interval lies above an applicable bound.
    pub violated: bool,
}

const WILSON_Z99: f64 = 2.576;

/// Frequencies of the dyadic block (N/2, N] by absolute value.
fn dyadic_block(n_dyadic: i64) -> Vec<i64> {
    assert!(n_dyadic >= 1 && n_dyadic & (n_dyadic - 1) == 0);
    let lo = n_dyadic / 2;
    let mut v: Vec<i64> = (lo + 1..=n_dyadic).collect();
    v.extend((lo + 1..=n_dyadic).map(|n| -n));
    v
}

/// P(sum over the block of |g_n|^2 > lambda) vs the bound e^{-lambda/4},
/// valid for lambda > 4 N ln 2.
pub fn gaussian_block_tail(n_dyadic: i64, lambda: f64, samples: u64, seed: u64) -> TailEstimate {
    let block = dyadic_block(n_dyadic);
    let mut hits = 0u64;
    for i in 0..samples {
        let mut rng = CounterRng::new(seed, i);
        let s: f64 = block.iter().map(|&n| rng.exponential(freq_slot(n))).sum();
        if s > lambda {
            hits += 1;
        }
    }
    let bound = (-lambda / 4.0).exp();
    let applicable = lambda > 4.0 * n_dyadic as f64 * std::f64::consts::LN_2;
    let wilson = wilson_interval(hits, samples, WILSON_Z99);
    TailEstimate {
        lambda,
        empirical_prob: hits as f64 / samples as f64,
        bound,
        sample_count: samples,
        wilson,
        bound_applicable: applicable,
        violated: applicable && wilson.0 > bound,
    }
}

/// P(||P_N u||^2 > lambda) for fields whose coefficients are scaled by a map
/// bounded by M (variance_cap = M^2), vs e^{-N^2 lambda / (16 M^2)}; valid
/// for lambda > 16 M^2 ln 2 / N. The bound's constant prefactor is taken
/// as 1.
pub fn dyadic_l2_tail(
    batch: &SampleBatch,
    n_dyadic: i64,
    lambda: f64,
    variance_cap: f64,
) -> TailEstimate {
    let block = dyadic_block(n_dyadic);
    let mut hits = 0u64;
    for i in 0..batch.count {
        let mut rng = CounterRng::new(batch.seed, i);
        let s: f64 = block
            .iter()
            .map(|&n| rng.exponential(freq_slot(n)) * variance_cap / japanese_bracket(n).powi(2))
            .sum();
        if s > lambda {
            hits += 1;
        }
    }
    let nf = n_dyadic as f64;
    let bound = (-nf * nf * lambda / (16.0 * variance_cap)).exp();
    let applicable = lambda > 16.0 * variance_cap * std::f64::consts::LN_2 / nf;
    let wilson = wilson_interval(hits, batch.count, WILSON_Z99);
    TailEstimate {
        lambda,
        empirical_prob: hits as f64 / batch.count as f64,
        bound,
        sample_count: batch.count,
        wilson,
        bound_applicable: applicable,
        violated: applicable && wilson.0 > bound,
    }
}

/// alpha(n1,n2,n3,n4): coefficient of g1 g2 conj(g3) conj(g4) in the chaos
/// difference S_{4,N} - S_{4,M}; supported on tuples with some |n_i| > N.
fn alpha(c: &CoefficientScaling, n_cut: i64, t: [i64; 4]) -> f64 {
    if t.iter().all(|n| n.abs() <= n_cut) {
        return 0.0;
    }
    let num: f64 = t.iter().map(|&n| c.at(n)).product();
    let den: f64 = t.iter().map(|&n| japanese_bracket(n)).product();
    0.75 * (t[0] + t[1]) as f64 * num / den
}

/// Exact ||S_{4,N} - S_{4,M}||^2_{L^2} by pairing enumeration.
///
/// With D = sum alpha(T) g1 g2 conj(g3) conj(g4), E D^2 splits by bijection
/// type into (2 sum_q beta(q))^2 + 4 sum_T alpha(T)^2 + 16 sum_q beta(q)^2,
/// where beta(q) = sum_p alpha(p,q,p,q). The first group is (E D)^2 = 0 by
/// the n -> -n symmetry; it is kept in the formula and vanishes numerically.
pub fn chaos_l2_exact(n: i64, m: i64, c: &CoefficientScaling) -> Result<f64, ChaosError> {
    assert!(m >= n);
    if m > 128 {
        return Err(ChaosError::EnumerationTooLarge(m));
    }
    // fully-cross group: 4 sum alpha(T)^2
    let mut cross = 0.0f64;
    for n1 in -m..=m {
        for n2 in -m..=m {
            for n3 in -m..=m {
                let n4 = n1 + n2 - n3;
                if n4.abs() > m {
                    continue;
                }
                let a = alpha(c, n, [n1, n2, n3, n4]);
                cross += a * a;
            }
        }
    }
    // diagonal sums beta(q)
    let mut beta_sq = 0.0f64;
    let mut beta_tot = 0.0f64;
    for q in -m..=m {
        let bq: f64 = (-m..=m).map(|p| alpha(c, n, [p, q, p, q])).sum();
        beta_sq += bq * bq;
        beta_tot += bq;
    }
    Ok((2.0 * beta_tot).powi(2) + 4.0 * cross + 16.0 * beta_sq)
}

/// Brute-force oracle for chaos_l2_exact: enumerates all tuple pairs and
/// counts frequency-preserving bijections directly. O(M^6 * 24); M <= 3.
pub fn chaos_l2_bruteforce(n: i64, m: i64, c: &CoefficientScaling) -> f64 {
    assert!(m <= 3, "brute force is O(M^6)");
    let mut tuples: Vec<([i64; 4], f64)> = Vec::new();
    for n1 in -m..=m {
        for n2 in -m..=m {
            for n3 in -m..=m {
                let n4 = n1 + n2 - n3;
                if n4.abs() > m {
                    continue;
                }
                let a = alpha(c, n, [n1, n2, n3, n4]);
                if a != 0.0 {
                    tuples.push(([n1, n2, n3, n4], a));
                }
            }
        }
    }
    // E D^2 = sum over T, T' of alpha alpha' * #bijections between the
    // g-list (n1,n2,n3',n4') and the conj-list (n3,n4,n1',n2').
    const PERMS: [[usize; 4]; 24] = [
        [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
        [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
        [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
        [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
    ];
    let mut total = 0.0f64;
    for (t, a) in &tuples {
        for (tp, ap) in &tuples {
            let gs = [t[0], t[1], tp[2], tp[3]];
            let hs = [t[2], t[3], tp[0], tp[1]];
            let matches = PERMS
                .iter()
                .filter(|perm| (0..4).all(|i| gs[i] == hs[perm[i]]))
                .count();
            total += a * ap * matches as f64;
        }
    }
    total
}

/// Exact vs Monte Carlo chaos norms.
#[derive(Debug, Clone, Serialize)]
pub struct ChaosNormReport {
    pub n: i64,
    pub m: i64,
    pub exact_l2_sq: Option<f64>,
    pub mc_l2_sq: Estimate,
    /// sigma distance between the MC estimate and the exact value.
    pub sigma_distance: Option<f64>,
}

/// MC estimate of ||S_{4,N} - S_{4,M}||^2 via per-sample chaos differences.
pub fn chaos_l2_mc(
    n: i64,
    m: i64,
    c: &CoefficientScaling,
    samples: u64,
    seed: u64,
) -> ChaosNormReport {
    let sq: Vec<f64> = (0..samples)
        .map(|i| {
            let u = sample_gaussian_field(seed, i, m);
            let d = scaled_chaos(&u, n, c) - scaled_chaos(&u, m, c);
            d * d
        })
        .collect();
    let mc = mean_stderr(&sq);
    let exact = chaos_l2_exact(n, m, c).ok();
    let sigma = exact.map(|e| mc.sigma_distance(&Estimate::new(e, 0.0)));
    ChaosNormReport {
        n,
        m,
        exact_l2_sq: exact,
        mc_l2_sq: mc,
        sigma_distance: sigma,
    }
}

/// Empirical ||S_{4,N}||_p / ||S_{4,N}||_2 for p in {4, 6, 8}; the fourth
/// order chaos bound is sqrt(5) (p-1)^2.
pub fn hypercontractivity_check(n: i64, p: f64, samples: u64, seed: u64) -> f64 {
    assert!(p == 4.0 || p == 6.0 || p == 8.0);
    let vals: Vec<f64> = (0..samples)
        .map(|i| f_n(&sample_gaussian_field(seed, i, n), n))
        .collect();
    let m2 = mean_stderr(&vals.iter().map(|v| v * v).collect::<Vec<_>>()).value;
    let mp = mean_stderr(&vals.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>()).value;
    mp.powf(1.0 / p) / m2.sqrt()
}

/// Exponentially tilted Gaussian proposal for small-mass conditioning: each
/// g_n is shrunk to variance <n>^2/(<n>^2 + theta), with the exact identity
/// E_mu[h] = E_q[h * exp(theta * mass - sum log(1 + theta/<n>^2))]. theta is
/// chosen so the proposal's mean mass equals the target m.
#[derive(Debug, Clone)]
pub struct TiltedProposal {
    pub n_max: i64,
    pub theta: f64,
    log_norm: f64,
    scales: Vec<f64>, // per |n|
}

impl TiltedProposal {
    pub fn for_target_mass(n_max: i64, m: f64) -> Self {
        let mean_mass = |theta: f64| -> f64 {
            (-n_max..=n_max)
                .map(|n| 1.0 / (japanese_bracket(n).powi(2) + theta))
                .sum()
        };
        let theta = if mean_mass(0.0) <= m {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while mean_mass(hi) > m {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mean_mass(mid) > m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let log_norm: f64 = (-n_max..=n_max)
            .map(|n| (1.0 + theta / japanese_bracket(n).powi(2)).ln())
            .sum();
        let scales = (0..=n_max)
            .map(|n| 1.0 / (1.0 + theta / japanese_bracket(n).powi(2)).sqrt())
            .collect();
        TiltedProposal {
            n_max,
            theta,
            log_norm,
            scales,
        }
    }

    /// Draw from the proposal; the field shares random addresses with the
    /// untilted sampler.
    pub fn sample(&self, seed: u64, index: u64) -> FourierField {
        let mut u = sample_gaussian_field(seed, index, self.n_max);
        for n in -self.n_max..=self.n_max {
            u.set_g(n, u.g(n) * self.scales[n.unsigned_abs() as usize]);
        }
        u
    }

    /// log of d mu / d q at u (mass passed in to avoid recomputation).
    pub fn log_weight(&self, mass: f64) -> f64 {
        self.theta * mass - self.log_norm
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityLpReport {
    /// estimate of int 1_{mass < m} exp(p * S) d mu
    pub chaos_only: Estimate,
    /// same with the extra -(p/2) int |u_N|^6 in the exponent
    pub gibbs: Estimate,
    pub indicator_fraction: f64,
    pub tilted: bool,
}

/// MC estimate of the cutoff exponential-chaos integral and of the Gibbs
/// density normalization. Uses the tilted proposal below m = 0.75 and plain
/// sampling otherwise.
pub fn density_lp_estimate(
    n: i64,
    m: f64,
    p: f64,
    c: &CoefficientScaling,
    samples: u64,
    seed: u64,
) -> Result<DensityLpReport, ChaosError> {
    assert!(m > 0.0);
    let tilted = m < 0.75;
    let proposal = tilted.then(|| TiltedProposal::for_target_mass(n, m));
    let mut chaos_vals = Vec::with_capacity(samples as usize);
    let mut gibbs_vals = Vec::with_capacity(samples as usize);
    let mut accepted = 0u64;
    for i in 0..samples {
        let u = match &proposal {
            Some(q) => q.sample(seed, i),
            None => sample_gaussian_field(seed, i, n),
        };
        let mass = crate::functionals::mass(&u);
        if mass >= m {
            chaos_vals.push(0.0);
            gibbs_vals.push(0.0);
            continue;
        }
        accepted += 1;
        let w = match &proposal {
            Some(q) => q.log_weight(mass).exp(),
            None => 1.0,
        };
        let s = scaled_chaos(&u, n, c);
        let sextic = crate::functionals::l6_norm_sixth(&u);
        chaos_vals.push(w * (p * s).exp());
        gibbs_vals.push(w * (p * (s - 0.5 * sextic)).exp());
    }
    let frac = accepted as f64 / samples as f64;
    if frac < 1e-5 {
        return Err(ChaosError::AcceptanceUnderflow {
            got: frac,
            min: 1e-5,
        });
    }
    Ok(DensityLpReport {
        chaos_only: mean_stderr(&chaos_vals),
        gibbs: mean_stderr(&gibbs_vals),
        indicator_fraction: frac,
        tilted,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosTailTable {
    pub n: i64,
    pub m: i64,
    pub rows: Vec<TailEstimate>,
    /// slope of log P(|S_N - S_M| > lambda) against sqrt(lambda).
    pub decay_slope: Option<f64>,
}

/// Empirical tail table for the chaos difference S_{4,N} - S_{4,M}.
pub fn chaos_tail_decay(
    n: i64,
    m: i64,
    lambda_grid: &[f64],
    samples: u64,
    seed: u64,
) -> ChaosTailTable {
    assert!(m >= 2 * n);
    let diffs: Vec<f64> = (0..samples)
        .map(|i| {
            let u = sample_gaussian_field(seed, i, m);
            (f_n(&u, n) - f_n(&u, m)).abs()
        })
        .collect();
    let rows: Vec<TailEstimate> = lambda_grid
        .iter()
        .map(|&lambda| {
            let hits = diffs.iter().filter(|&&d| d > lambda).count() as u64;
            TailEstimate {
                lambda,
                empirical_prob: hits as f64 / samples as f64,
                bound: f64::NAN,
                sample_count: samples,
                wilson: wilson_interval(hits, samples, WILSON_Z99),
                bound_applicable: false,
                violated: false,
            }
        })
        .collect();
    // least-squares slope of ln p on sqrt(lambda), nonzero rows only
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.empirical_prob > 0.0 && r.lambda > 0.0)
        .map(|r| (r.lambda.sqrt(), r.empirical_prob.ln()))
        .collect();
    let decay_slope = if pts.len() >= 2 {
        let nf = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((nf * sxy - sx * sy) / (nf * sxx - sx * sx))
    } else {
        None
    };
    ChaosTailTable {
        n,
        m,
        rows,
        decay_slope,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_matches_bruteforce_small() {
        let c = CoefficientScaling::constant(3, 1.0);
        for (n, m) in [(1i64, 2i64), (1, 3), (2, 3)] {
            let exact = chaos_l2_exact(n, m, &c).unwrap();
            let brute = chaos_l2_bruteforce(n, m, &c);
            assert!(
                (exact - brute).abs() < 1e-10 * brute.abs().max(1.0),
                "N={n} M={m}: exact {exact} vs brute {brute}"
            );
        }
    }

    #[test]
    fn exact_zero_when_equal() {
        let c = CoefficientScaling::constant(8, 1.0);
        assert_eq!(chaos_l2_exact(8, 8, &c).unwrap(), 0.0);
    }

    #[test]
    fn constant_scaling_is_eighth_power() {
        let c1 = CoefficientScaling::constant(16, 1.0);
        let ct = CoefficientScaling::constant(16, 0.5);
        let a = chaos_l2_exact(8, 16, &c1).unwrap();
        let b = chaos_l2_exact(8, 16, &ct).unwrap();
        assert!((b - a * 0.5f64.powi(8)).abs() < 1e-12 * a);
    }

    #[test]
    fn mc_agrees_with_exact() {
        let c = CoefficientScaling::constant(8, 1.0);
        let rep = chaos_l2_mc(4, 8, &c, 20_000, 11);
        assert!(
            rep.sigma_distance.unwrap() < 4.0,
            "sigma = {:?}",
            rep.sigma_distance
        );
    }

    #[test]
    fn gamma_tail_oracle_block_one() {
        // N = 1: two modes, Gamma(2,1) upper tail (1 + lambda) e^{-lambda}
        let lam = 3.0;
        let est = gaussian_block_tail(1, lam, 200_000, 5);
        let exact = (1.0 + lam) * (-lam).exp();
        assert!(est.wilson.0 < exact && exact < est.wilson.1, "{est:?}");
    }

    #[test]
    fn tilted_proposal_is_unbiased_on_the_ball() {
        // mu(mass < m) estimated plainly and through the tilt agree; the
        // weight is bounded by e^{theta m}/Z on the ball, so the variance is
        // finite there (and only there).
        let (n_max, m) = (8i64, 1.2f64);
        let q = TiltedProposal::for_target_mass(n_max, m);
        assert!(q.theta > 0.0);
        let n = 50_000u64;
        let tilted: Vec<f64> = (0..n)
            .map(|i| {
                let u = q.sample(3, i);
                let mass = crate::functionals::mass(&u);
                if mass < m {
                    q.log_weight(mass).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let plain: Vec<f64> = (0..n)
            .map(|i| {
                let u = sample_gaussian_field(4, i, n_max);
                if crate::functionals::mass(&u) < m {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let a = mean_stderr(&tilted);
        let b = mean_stderr(&plain);
        assert!(
            a.sigma_distance(&b) < 4.0,
            "tilted {} +- {}, plain {} +- {}",
            a.value,
            a.stderr,
            b.value,
            b.stderr
        );
    }

    #[test]
    fn density_estimate_c0_matches_indicator() {
        // c = 0 makes the integrand the bare indicator
        let c = CoefficientScaling::constant(8, 0.0);
        let rep = density_lp_estimate(8, 2.0, 1.0, &c, 20_000, 9).unwrap();
        // mu(mass < 2) with n_max = 8 is sizable; indicator fraction matches
        assert!((rep.chaos_only.value - rep.indicator_fraction).abs() < 1e-12);
    }
}
