//! Measures conditioned on the mass: thin shells, single-frequency scaling
//! shells, and the identities connecting them.
//!
//! Everything here is realized at a finite truncation, and every identity is
//! checked with the same truncation on both sides. Thin-shell sampling uses
//! plain rejection for moderate m and the exponentially tilted proposal for
//! small m, where the plain acceptance rate collapses.

use crate::chaos_stats::TiltedProposal;
use crate::functionals::{convolve, f_n, mass};
use crate::rng::{freq_slot, CounterRng};
use crate::stats::{
    mean_stderr, richardson_estimate, weighted_mean_stderr, Estimate,
    RatioAccumulator,
};
use crate::torus_field::{
    japanese_bracket, project_leq, sample_gaussian_field, scale_frequency, FourierField,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixedMassError {
    #[error("shell acceptance underflow: {accepted} of {tried} candidates; widen the shell or use the tilted sampler")]
    AcceptanceUnderflow { accepted: u64, tried: u64 },
    #[error("interior denominator {0:.3e} +- {1:.3e} indistinguishable from zero")]
    DenominatorVanishes(f64, f64),
}

/// Conditioning set parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ShellSpec {
    pub m: f64,
    pub n_max: i64,
    pub mode: ShellMode,
}

#[derive(Debug, Clone, Serialize)]
pub enum ShellMode {
    /// mass in (m - eps, m + eps)
    Thin { eps: f64 },
    /// ||T_s^k u||^2 > m >= ||T_{1/s}^k u||^2
    Scaling { k: i64, s: f64 },
}

#[derive(Debug, Clone)]
pub struct ConditionalSample {
    pub index: u64,
    pub field: FourierField,
    pub weight: f64,
}

/// |g_k|^2 + |g_{-k}|^2, or just |g_0|^2 when k = 0.
pub fn mode_pair_mass(u: &FourierField, k: i64) -> f64 {
    if k == 0 {
        u.g(0).norm_sqr()
    } else {
        u.g(k).norm_sqr() + u.g(-k).norm_sqr()
    }
}

const CANDIDATE_CAP: u64 = 50_000_000;

/// Exact draws from mu conditioned on mass in (m - eps, m + eps). Below
/// m = 0.75 the tilted proposal is used and samples carry importance
/// weights exp(theta * mass)/Z; otherwise weights are 1.
pub fn sample_thin_shell(
    spec: &ShellSpec,
    count: u64,
    seed: u64,
) -> Result<Vec<ConditionalSample>, FixedMassError> {
    let ShellMode::Thin { eps } = spec.mode else {
        panic!("thin-shell spec required");
    };
    let tilt = (spec.m < 0.75).then(|| TiltedProposal::for_target_mass(spec.n_max, spec.m));
    let mut out = Vec::with_capacity(count as usize);
    let mut tried = 0u64;
    for j in 0..CANDIDATE_CAP {
        tried = j + 1;
        let field = match &tilt {
            Some(q) => q.sample(seed, j),
            None => sample_gaussian_field(seed, j, spec.n_max),
        };
        let mass = mass(&field);
        if (mass - spec.m).abs() < eps {
            let weight = match &tilt {
                Some(q) => q.log_weight(mass).exp(),
                None => 1.0,
            };
            out.push(ConditionalSample {
                index: j,
                field,
                weight,
            });
            if out.len() as u64 == count {
                return Ok(out);
            }
        }
        if j == 1_000_000 && out.is_empty() {
            break;
        }
    }
    Err(FixedMassError::AcceptanceUnderflow {
        accepted: out.len() as u64,
        tried,
    })
}

/// Membership in Gamma^k_{m,s}: scaling the +-k pair up crosses the mass
/// level, scaling it down does not.
pub fn in_scaling_shell(u: &FourierField, m: f64, k: i64, s: f64) -> bool {
    let r = mode_pair_mass(u, k) / japanese_bracket(k).powi(2);
    let rest = mass(u) - r;
    rest + s * s * r > m && rest + r / (s * s) <= m
}

/// Exact rejection draws from nu^k_{m,s}; also returns the measured
/// acceptance rate.
pub fn sample_scaling_shell(
    spec: &ShellSpec,
    count: u64,
    seed: u64,
) -> Result<(Vec<ConditionalSample>, f64), FixedMassError> {
    let ShellMode::Scaling { k, s } = spec.mode else {
        panic!("scaling spec required");
    };
    assert!(s > 1.0 && s <= 2.0);
    let mut out = Vec::with_capacity(count as usize);
    let mut tried = 0u64;
    for j in 0..CANDIDATE_CAP {
        tried = j + 1;
        let field = sample_gaussian_field(seed, j, spec.n_max);
        if in_scaling_shell(&field, spec.m, k, s) {
            out.push(ConditionalSample {
                index: j,
                field,
                weight: 1.0,
            });
            if out.len() as u64 == count {
                return Ok((out, count as f64 / tried as f64));
            }
        }
        if j == 2_000_000 && out.is_empty() {
            break;
        }
    }
    Err(FixedMassError::AcceptanceUnderflow {
        accepted: out.len() as u64,
        tried,
    })
}

/// An observable depending only on frequencies |n| <= cutoff, with a
/// finite-difference s-derivative of u -> F(T_s^k u) at s = 1.
pub struct CylinderObservable {
    pub name: &'static str,
    pub cutoff: i64,
    eval: Box<dyn Fn(&FourierField) -> f64 + Send + Sync>,
}

impl CylinderObservable {
    pub fn new(
        name: &'static str,
        cutoff: i64,
        eval: impl Fn(&FourierField) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CylinderObservable {
            name,
            cutoff,
            eval: Box::new(eval),
        }
    }

    pub fn eval(&self, u: &FourierField) -> f64 {
        (self.eval)(u)
    }

    /// d/ds F(T_s^k u) at s = 1: central difference with one Richardson
    /// step (error O(h^4), h = 1e-3).
    pub fn s_derivative_at_1(&self, u: &FourierField, k: i64) -> f64 {
        if k > self.cutoff {
            return 0.0;
        }
        let d = |h: f64| {
            let up = scale_frequency(u, k, 1.0 + h).unwrap();
            let dn = scale_frequency(u, k, 1.0 - h).unwrap();
            (self.eval(&up) - self.eval(&dn)) / (2.0 * h)
        };
        let (h1, h2) = (1e-3, 5e-4);
        (4.0 * d(h2) - d(h1)) / 3.0
    }
}

/// Fixed regression suite of cylinder observables used by the identity
/// checks.
pub fn regression_suite() -> Vec<CylinderObservable> {
    vec![
        CylinderObservable::new("unit", 0, |_| 1.0),
        CylinderObservable::new("exp_neg_mass8", 8, |u| (-mass(&project_leq(u, 8))).exp()),
        CylinderObservable::new("g1_sq", 1, |u| u.g(1).norm_sqr()),
        CylinderObservable::new("l4_quartic4", 4, |u| {
            let a: Vec<_> = (-4i64..=4)
                .map(|n| u.weighted_coefficient(n))
                .collect();
            let a2 = convolve(&a, &a);
            0.5 * a2.iter().map(|c| c.norm_sqr()).sum::<f64>()
        }),
        CylinderObservable::new("cos_re_g2", 2, |u| u.g(2).re.cos()),
    ]
}

/// Paired two-sided comparison of an identity.
#[derive(Debug, Clone, Serialize)]
pub struct TwoSidedReport {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// paired difference (same draws on both sides)
    pub diff: Estimate,
    pub sigma: f64,
}

impl TwoSidedReport {
    fn from_pairs(name: String, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let diffs: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let diff = mean_stderr(&diffs);
        let sigma = if diff.stderr == 0.0 {
            if diff.value == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff.value.abs() / diff.stderr
        };
        TwoSidedReport {
            name,
            lhs: mean_stderr(&lhs),
            rhs: mean_stderr(&rhs),
            diff,
            sigma,
        }
    }
}

/// Exact finite-s change of variables for the scaling map: the Gamma-shell
/// integral of F equals the A_m integral of
/// s^4 e^{(1-s^2) r} F(T_s u) - s^{-4} e^{(1-1/s^2) r} F(T_{1/s} u)
/// (exponent 4 -> 2 and r = |g_0|^2 for k = 0). Both sides are estimated on
/// the same draws and compared as a paired difference.
pub fn change_of_variables_check(
    f: &CylinderObservable,
    m: f64,
    k: i64,
    s: f64,
    n_max: i64,
    samples: u64,
    seed: u64,
) -> TwoSidedReport {
    let pow = if k == 0 { 2 } else { 4 };
    let br2 = japanese_bracket(k).powi(2);
    let mut lhs = Vec::with_capacity(samples as usize);
    let mut rhs = Vec::with_capacity(samples as usize);
    for j in 0..samples {
        let u = sample_gaussian_field(seed, j, n_max);
        let r = mode_pair_mass(&u, k);
        let total = mass(&u);
        let rest = total - r / br2;
        lhs.push(if rest + s * s * r / br2 > m && rest + r / (s * s * br2) <= m {
            f.eval(&u)
        } else {
            0.0
        });
        rhs.push(if total <= m {
            let up = scale_frequency(&u, k, s).unwrap();
            let dn = scale_frequency(&u, k, 1.0 / s).unwrap();
            s.powi(pow) * ((1.0 - s * s) * r).exp() * f.eval(&up)
                - s.powi(-pow) * ((1.0 - 1.0 / (s * s)) * r).exp() * f.eval(&dn)
        } else {
            0.0
        });
    }
    TwoSidedReport::from_pairs(format!("change_of_variables[{}]", f.name), lhs, rhs)
}

pub const S_LADDER: [f64; 3] = [1.1, 1.05, 1.025];

#[derive(Debug, Clone, Serialize)]
pub struct NuKReport {
    pub per_s: Vec<(f64, Estimate)>,
    /// Richardson extrapolation of the two smallest rungs to s = 1
    pub extrapolated: Estimate,
    /// (int_{A_m} (2 - r) F + (1/2) d_s F(T_s u)|_1 d mu) / (int_{A_m} (2 - r) d mu)
    pub interior: Estimate,
    pub denominator: Estimate,
}

/// E_{nu_m^k}[F] two ways: conditional means on Gamma^k_{m,s} extrapolated
/// in s, and the interior derivative formula evaluated directly on A_m.
pub fn nu_k_expectation(
    f: &CylinderObservable,
    m: f64,
    k: i64,
    n_max: i64,
    samples: u64,
    seed: u64,
) -> Result<NuKReport, FixedMassError> {
    let br2 = japanese_bracket(k).powi(2);
    let base = if k == 0 { 1.0 } else { 2.0 };
    // tilt toward the ball; weights exp(theta * mass)/Z are bounded there
    let tilt = TiltedProposal::for_target_mass(n_max, m);
    let mut shell_acc = [RatioAccumulator::default(); 3];
    let mut interior = RatioAccumulator::default();
    for j in 0..samples {
        let u = tilt.sample(seed, j);
        let r = mode_pair_mass(&u, k);
        let total = mass(&u);
        let w = tilt.log_weight(total).exp();
        let rest = total - r / br2;
        let mut fval = f64::NAN; // computed lazily, at most once
        for (i, &s) in S_LADDER.iter().enumerate() {
            if rest + s * s * r / br2 > m && rest + r / (s * s * br2) <= m {
                if fval.is_nan() {
                    fval = f.eval(&u);
                }
                shell_acc[i].push(w * fval, w);
            } else {
                shell_acc[i].push(0.0, 0.0);
            }
        }
        if total <= m {
            if fval.is_nan() {
                fval = f.eval(&u);
            }
            let den = base - r;
            let num = den * fval + 0.5 * f.s_derivative_at_1(&u, k);
            interior.push(w * num, w * den);
        } else {
            interior.push(0.0, 0.0);
        }
    }
    let den = interior.denominator();
    if den.value.abs() < 2.0 * den.stderr {
        return Err(FixedMassError::DenominatorVanishes(den.value, den.stderr));
    }
    let per_s: Vec<(f64, Estimate)> = S_LADDER
        .iter()
        .zip(&shell_acc)
        .map(|(&s, acc)| (s, acc.finish()))
        .collect();
    let extrapolated = richardson_estimate(
        per_s[1].1,
        per_s[2].1,
        S_LADDER[1] - 1.0,
        S_LADDER[2] - 1.0,
    );
    Ok(NuKReport {
        per_s,
        extrapolated,
        interior: interior.finish(),
        denominator: den,
    })
}

pub const EPS_LADDER: [f64; 3] = [0.1, 0.05, 0.02];

#[derive(Debug, Clone, Serialize)]
pub struct RadonNikodymReport {
    pub name: String,
    /// E_{nu_m^k}[F] via the interior formula
    pub nu_side: Estimate,
    /// E_{mu_m^eps}[r F]/E_{mu_m^eps}[r] per eps, then extrapolated in eps^2
    pub per_eps: Vec<(f64, Estimate)>,
    pub mu_side: Estimate,
    pub c_km: Estimate,
    pub sigma: f64,
}

/// Checks c_{k,m} d nu_m^k = (|g_k|^2 + |g_{-k}|^2) d mu_m by comparing the
/// nu expectation of F with the r-weighted thin-shell mean of F.
pub fn radon_nikodym_check(
    f: &CylinderObservable,
    m: f64,
    k: i64,
    n_max: i64,
    samples: u64,
    seed: u64,
) -> Result<RadonNikodymReport, FixedMassError> {
    // nested thin shells from one scan
    let mut acc = [RatioAccumulator::default(); 3];
    let mut c_acc = RatioAccumulator::default();
    for j in 0..samples {
        let profile_mass = {
            let mut rng = CounterRng::new(seed, j);
            (-n_max..=n_max)
                .map(|n| rng.exponential(freq_slot(n)) / japanese_bracket(n).powi(2))
                .sum::<f64>()
        };
        if (profile_mass - m).abs() >= EPS_LADDER[0] {
            continue;
        }
        let u = sample_gaussian_field(seed, j, n_max);
        let r = mode_pair_mass(&u, k);
        let fval = f.eval(&u);
        for (i, &eps) in EPS_LADDER.iter().enumerate() {
            if (profile_mass - m).abs() < eps {
                acc[i].push(r * fval, r);
            }
        }
        if (profile_mass - m).abs() < EPS_LADDER[2] {
            c_acc.push(r, 1.0);
        }
    }
    if acc[2].count() < 100 {
        return Err(FixedMassError::AcceptanceUnderflow {
            accepted: acc[2].count(),
            tried: samples,
        });
    }
    let per_eps: Vec<(f64, Estimate)> = EPS_LADDER
        .iter()
        .zip(&acc)
        .map(|(&e, a)| (e, a.finish()))
        .collect();
    // the thin-shell bias is even in eps, so extrapolate in eps^2
    let mu_side = richardson_estimate(
        per_eps[1].1,
        per_eps[2].1,
        EPS_LADDER[1] * EPS_LADDER[1],
        EPS_LADDER[2] * EPS_LADDER[2],
    );
    let nu = nu_k_expectation(f, m, k, n_max, samples, seed.wrapping_add(1))?;
    let nu_side = nu.interior;
    let se = (nu_side.stderr.powi(2) + mu_side.stderr.powi(2)).sqrt();
    let sigma = (nu_side.value - mu_side.value).abs() / se;
    Ok(RadonNikodymReport {
        name: format!("radon_nikodym[{},k={k}]", f.name),
        nu_side,
        per_eps,
        mu_side,
        c_km: c_acc.finish(),
        sigma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub name: String,
    /// m * E_{mu_m}[F] from the thin shell
    pub lhs: Estimate,
    /// sum over k <= K of (c_{k,m}/<k>^2) E_{nu_m^k}[F] (interior formula)
    pub rhs: Estimate,
    /// bound on the dropped k > K part: E[tail mass] * max |F| on the shell
    pub tail_budget: f64,
    pub k_max: i64,
    pub pass: bool,
}

/// Verifies m int F d mu_m = sum_k (c_{k,m}/<k>^2) int F d nu_m^k for
/// nonnegative cylinder F, with the k-sum truncated and the remainder
/// charged to an explicit tail budget.
pub fn decomposition_check(
    f: &CylinderObservable,
    m: f64,
    k_max: i64,
    n_max: i64,
    samples: u64,
    seed: u64,
) -> Result<DecompositionReport, FixedMassError> {
    let eps = 0.05;
    // both passes sample from the tilted proposal; importance weights
    // exp(theta * mass)/Z are bounded on {mass <= m + eps}
    let tilt = TiltedProposal::for_target_mass(n_max, m);
    // pass 1: thin shell -> lhs, c_k, tail budget
    let mut lhs_acc = RatioAccumulator::default();
    let mut c_acc = vec![RatioAccumulator::default(); (k_max + 1) as usize];
    let mut tail_acc = RatioAccumulator::default();
    let mut sup_f = 0.0f64;
    for j in 0..samples {
        let u = tilt.sample(seed, j);
        let total = mass(&u);
        if (total - m).abs() >= eps {
            continue;
        }
        let w = tilt.log_weight(total).exp();
        let fv = f.eval(&u);
        lhs_acc.push(w * fv, w);
        sup_f = sup_f.max(fv.abs());
        let mut head = 0.0;
        for k in 0..=k_max {
            let r = mode_pair_mass(&u, k);
            c_acc[k as usize].push(w * r, w);
            head += r / japanese_bracket(k).powi(2);
        }
        tail_acc.push(w * (total - head), w);
    }
    if lhs_acc.count() < 100 {
        return Err(FixedMassError::AcceptanceUnderflow {
            accepted: lhs_acc.count(),
            tried: samples,
        });
    }
    let mean_f = lhs_acc.finish();
    let lhs = Estimate::new(m * mean_f.value, m * mean_f.stderr);
    let tail_budget = tail_acc.finish().value * sup_f;

    // pass 2: interior formula per k on independent draws. For k above the
    // observable's cylinder cutoff F is independent of the +-k pair and the
    // scaling derivative vanishes, so the pair is integrated out exactly:
    // for r ~ Gamma(2,1), E[1_{r < t}(2 - r)] = t^2 e^{-t}. This keeps the
    // estimator usable where the raw denominator E[2 - r_k | ball] decays
    // like <k>^-2.
    let mut interior = vec![RatioAccumulator::default(); (k_max + 1) as usize];
    let seed2 = seed.wrapping_add(1);
    let theta = tilt.theta;
    for j in 0..samples {
        let u = tilt.sample(seed2, j);
        let total = mass(&u);
        let in_ball = total <= m;
        let w = tilt.log_weight(total).exp();
        let fv = f.eval(&u);
        for k in 0..=k_max {
            let br2 = japanese_bracket(k).powi(2);
            if k <= f.cutoff {
                if in_ball {
                    let base = if k == 0 { 1.0 } else { 2.0 };
                    let den = base - mode_pair_mass(&u, k);
                    let num = den * fv + 0.5 * f.s_derivative_at_1(&u, k);
                    interior[k as usize].push(w * num, w * den);
                }
            } else {
                let y = total - mode_pair_mass(&u, k) / br2;
                let t = br2 * (m - y);
                if t > 0.0 {
                    let q = t * t * (-t).exp();
                    // weight for the non-pair modes alone; the pair's tilt
                    // cancels exactly inside the analytic integral
                    let wy = tilt.log_weight(y).exp() * (1.0 + theta / br2).powi(2);
                    interior[k as usize].push(wy * fv * q, wy * q);
                }
            }
        }
    }
    // interior accumulators saw only accepted draws; rescale is unnecessary
    // because the ratio is scale-free.
    let mut rhs_val = 0.0;
    let mut rhs_var = 0.0;
    for k in 0..=k_max {
        let idx = k as usize;
        let den = interior[idx].denominator();
        if den.value.abs() < 2.0 * den.stderr {
            return Err(FixedMassError::DenominatorVanishes(den.value, den.stderr));
        }
        let nu = interior[idx].finish();
        let c = c_acc[idx].finish();
        let w = 1.0 / japanese_bracket(k).powi(2);
        rhs_val += w * c.value * nu.value;
        rhs_var += (w * nu.value * c.stderr).powi(2) + (w * c.value * nu.stderr).powi(2);
    }
    let rhs = Estimate::new(rhs_val, rhs_var.sqrt());
    let se = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    let pass = (lhs.value - rhs.value).abs() <= 3.0 * se + tail_budget;
    Ok(DecompositionReport {
        name: format!("decomposition[{}]", f.name),
        lhs,
        rhs,
        tail_budget,
        k_max,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalBin {
    pub center: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub model: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub bins: Vec<MarginalBin>,
    pub max_sigma: f64,
    /// same comparison at eps = 0.2 against the p_0-weighted window average
    pub mixture_max_sigma: f64,
}

/// Compares the |g_0|^2 marginal of the thin-shell measure against the
/// closed-form conditional density p_1(m - y) e^{-y} / p_0(m), with p_1, p_0
/// inverted at the same truncation as the sampler.
pub fn marginal_density_check(
    m: f64,
    n_max: i64,
    samples: u64,
    seed: u64,
) -> Result<MarginalReport, FixedMassError> {
    use crate::mass_distributions::{
        invert_density, CharFunction, CharFunctionSpec, ModeSet, DEFAULT_DXI, DEFAULT_DX,
        DEFAULT_XI_MAX, DEFAULT_X_MAX,
    };
    let p1 = invert_density(
        &CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(1), n_max).without_tail()),
        DEFAULT_X_MAX,
        DEFAULT_DX,
        DEFAULT_XI_MAX,
        DEFAULT_DXI,
    )
    .expect("p1 inversion");
    // conditional density of y = |g_0|^2 on the shell
    let model_density = |y: f64, m_at: f64, z: f64| -> f64 {
        if y < 0.0 || y > m_at {
            0.0
        } else {
            p1.at(m_at - y).unwrap_or(0.0) * (-y).exp() / z
        }
    };
    let normalizer = |m_at: f64| -> f64 {
        let steps = 2000;
        let h = m_at / steps as f64;
        let v: Vec<f64> = (0..=steps)
            .map(|i| {
                let y = i as f64 * h;
                p1.at(m_at - y).unwrap_or(0.0) * (-y).exp()
            })
            .collect();
        let inner: f64 = v[1..steps].iter().sum();
        h * (0.5 * (v[0] + v[steps]) + inner)
    };
    let z_m = normalizer(m);

    let n_bins = 16usize;
    let bin_w = m / n_bins as f64;
    let run = |eps: f64, seed: u64| -> Result<(Vec<f64>, Vec<f64>, u64), FixedMassError> {
        let mut counts = vec![0u64; n_bins];
        let mut accepted = 0u64;
        for j in 0..samples {
            let mut rng = CounterRng::new(seed, j);
            let profile: Vec<f64> = (-n_max..=n_max)
                .map(|n| rng.exponential(freq_slot(n)))
                .collect();
            let total: f64 = profile
                .iter()
                .enumerate()
                .map(|(i, e)| e / japanese_bracket(i as i64 - n_max).powi(2))
                .sum();
            if (total - m).abs() >= eps {
                continue;
            }
            accepted += 1;
            let y = profile[n_max as usize]; // |g_0|^2
            let b = (y / bin_w) as usize;
            if b < n_bins {
                counts[b] += 1;
            }
        }
        if accepted < 200 {
            return Err(FixedMassError::AcceptanceUnderflow {
                accepted,
                tried: samples,
            });
        }
        let dens: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / accepted as f64 / bin_w)
            .collect();
        let errs: Vec<f64> = counts
            .iter()
            .map(|&c| {
                let p = c as f64 / accepted as f64;
                (p * (1.0 - p) / accepted as f64).sqrt() / bin_w
            })
            .collect();
        Ok((dens, errs, accepted))
    };

    // small-eps comparison against the fixed-mass formula
    let (dens, errs, _) = run(0.05, seed)?;
    let mut bins = Vec::with_capacity(n_bins);
    let mut max_sigma = 0.0f64;
    for b in 0..n_bins {
        let center = (b as f64 + 0.5) * bin_w;
        // bin-averaged model
        let sub = 20;
        let model: f64 = (0..sub)
            .map(|i| model_density(b as f64 * bin_w + (i as f64 + 0.5) * bin_w / sub as f64, m, z_m))
            .sum::<f64>()
            / sub as f64;
        let err = errs[b].max(1e-12);
        max_sigma = max_sigma.max((dens[b] - model).abs() / err);
        bins.push(MarginalBin {
            center,
            empirical: dens[b],
            stderr: errs[b],
            model,
        });
    }

    // mixture identity at eps = 0.2: empirical marginal vs the p_0-weighted
    // average of fixed-mass marginals over the window
    let eps_mix = 0.2;
    let (dens_mix, errs_mix, _) = run(eps_mix, seed.wrapping_add(7))?;
    let p0 = invert_density(
        &CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(0), n_max).without_tail()),
        DEFAULT_X_MAX,
        DEFAULT_DX,
        DEFAULT_XI_MAX,
        DEFAULT_DXI,
    )
    .expect("p0 inversion");
    let mut mixture_max_sigma = 0.0f64;
    let quad = 40usize;
    let hm = 2.0 * eps_mix / quad as f64;
    let weights: Vec<(f64, f64)> = (0..=quad)
        .map(|i| {
            let mp = m - eps_mix + i as f64 * hm;
            (mp, p0.at(mp).unwrap_or(0.0))
        })
        .collect();
    let w_total: f64 = weights.iter().map(|(_, w)| w).sum();
    for b in 0..n_bins {
        let y = (b as f64 + 0.5) * bin_w;
        let model: f64 = weights
            .iter()
            .map(|&(mp, w)| w * model_density(y, mp, normalizer(mp)))
            .sum::<f64>()
            / w_total;
        let err = errs_mix[b].max(1e-12);
        mixture_max_sigma = mixture_max_sigma.max((dens_mix[b] - model).abs() / err);
    }
    Ok(MarginalReport {
        bins,
        max_sigma,
        mixture_max_sigma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub k: i64,
    pub j: usize,
    pub p: f64,
    pub cov: Estimate,
    pub accepted: u64,
}

/// Empirical Cov(e^{p G_k^j}, |g_k|^2 + |g_{-k}|^2) on the conditioning set
/// where the mass excluding the +-k pair is at most m.
pub fn covariance_positivity(
    m: f64,
    k: i64,
    j: usize,
    p: f64,
    n_cut: i64,
    samples: u64,
    seed: u64,
) -> CovarianceReport {
    assert!(j <= 4 && k >= 1);
    let br2 = japanese_bracket(k).powi(2);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..samples {
        let u = sample_gaussian_field(seed, i, n_cut);
        let r = mode_pair_mass(&u, k);
        if mass(&u) - r / br2 > m {
            continue;
        }
        let g = crate::functionals::g_decomposition(&u, n_cut, k)[j];
        xs.push((p * g).exp());
        ys.push(r);
    }
    let mx = mean_stderr(&xs).value;
    let my = mean_stderr(&ys).value;
    let centered: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    CovarianceReport {
        k,
        j,
        p,
        cov: mean_stderr(&centered),
        accepted: xs.len() as u64,
    }
}

/// MC reproduction of Cov(X, X^2) = 12 for X ~ Gamma(2, 1) (the law of
/// |g_k|^2 + |g_{-k}|^2): E X^3 - E X E X^2 = 24 - 2 * 6.
pub fn gamma_cov_oracle(samples: u64, seed: u64) -> Estimate {
    let mut xs = Vec::with_capacity(samples as usize);
    for i in 0..samples {
        let mut rng = CounterRng::new(seed, i);
        xs.push(rng.exponential(0) + rng.exponential(1));
    }
    let m1 = mean_stderr(&xs).value;
    let m2 = mean_stderr(&xs.iter().map(|x| x * x).collect::<Vec<_>>()).value;
    let centered: Vec<f64> = xs.iter().map(|x| (x - m1) * (x * x - m2)).collect();
    mean_stderr(&centered)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpMomentReport {
    pub m: f64,
    pub p: f64,
    pub n_cut: i64,
    /// weighted estimate of E_{mu_m^eps}[e^{p f_N}] per eps
    pub per_eps: Vec<(f64, Estimate)>,
    pub ess: f64,
    /// exp(p * weighted mean of f_N), a Jensen lower bound
    pub jensen_floor: f64,
    pub heavy_tail: bool,
}

/// Thin-shell estimate of the exponential chaos moment at fixed mass.
pub fn exp_moment_fixed_mass(
    m: f64,
    p: f64,
    n_cut: i64,
    samples: u64,
    seed: u64,
) -> Result<ExpMomentReport, FixedMassError> {
    let spec = ShellSpec {
        m,
        n_max: n_cut,
        mode: ShellMode::Thin { eps: 0.1 },
    };
    // one scan; the eps = 0.05 shell is nested inside eps = 0.1
    let tilt = (m < 0.75).then(|| TiltedProposal::for_target_mass(n_cut, m));
    let mut vals = [Vec::new(), Vec::new()];
    let mut weights = [Vec::new(), Vec::new()];
    for j in 0..samples {
        let field = match &tilt {
            Some(q) => q.sample(seed, j),
            None => sample_gaussian_field(seed, j, spec.n_max),
        };
        let mass_v = mass(&field);
        if (mass_v - m).abs() >= 0.1 {
            continue;
        }
        let w = match &tilt {
            Some(q) => q.log_weight(mass_v).exp(),
            None => 1.0,
        };
        let v = (p * f_n(&field, n_cut)).exp();
        vals[0].push(v);
        weights[0].push(w);
        if (mass_v - m).abs() < 0.05 {
            vals[1].push(v);
            weights[1].push(w);
        }
    }
    if vals[1].len() < 100 {
        return Err(FixedMassError::AcceptanceUnderflow {
            accepted: vals[1].len() as u64,
            tried: samples,
        });
    }
    let per_eps: Vec<(f64, Estimate)> = [(0.1, 0), (0.05, 1)]
        .iter()
        .map(|&(e, i)| (e, weighted_mean_stderr(&vals[i], &weights[i])))
        .collect();
    let ess = crate::stats::effective_sample_size(&weights[0]);
    // Jensen floor from the weighted mean of f_N itself
    let log_vals: Vec<f64> = vals[0].iter().map(|v| v.ln() / p).collect();
    let jensen_floor = (p * weighted_mean_stderr(&log_vals, &weights[0]).value).exp();
    // heavy-tail diagnostic: top 0.1% of weights carrying half the sum
    let mut sorted = weights[0].clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = (sorted.len() / 1000).max(1);
    let top_sum: f64 = sorted[..top].iter().sum();
    let total: f64 = sorted.iter().sum();
    Ok(ExpMomentReport {
        m,
        p,
        n_cut,
        per_eps,
        ess,
        jensen_floor,
        heavy_tail: top_sum > 0.5 * total,
    })
}

/// Thin-shell estimate of int |f_N - f_M|^2 d mu_m.
pub fn chaos_l2_fixed_mass(
    m: f64,
    n: i64,
    m_big: i64,
    samples: u64,
    seed: u64,
) -> Result<Estimate, FixedMassError> {
    let mut sq = Vec::new();
    for j in 0..samples {
        let u = sample_gaussian_field(seed, j, m_big);
        if (mass(&u) - m).abs() >= 0.1 {
            continue;
        }
        let d = f_n(&u, n) - f_n(&u, m_big);
        sq.push(d * d);
    }
    if sq.len() < 100 {
        return Err(FixedMassError::AcceptanceUnderflow {
            accepted: sq.len() as u64,
            tried: samples,
        });
    }
    Ok(mean_stderr(&sq))
}

/// A smooth test function on the closed unit disk with its partials.
pub struct DiskFunction {
    pub name: &'static str,
    pub f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub fx: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub fy: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiskReport {
    /// (1/pi) d/dr|_1 of int_disk r f(sqrt r x, sqrt r y) dA
    pub scaling: f64,
    /// (1/2pi) int_disk 2f + x f_x + y f_y dA
    pub divergence: f64,
    /// circle average of f
    pub circle: f64,
    /// single-variable versions: scaling in x only, (1/pi) int f + x f_x,
    /// and the 2x^2-weighted circle average
    pub sv_scaling: f64,
    pub sv_divergence: f64,
    pub sv_measure: f64,
    /// |(1/2)(int f d[2x^2 s] + int f d[2y^2 s]) - int f ds| on the circle
    pub decomposition_gap: f64,
}

/// Area integral over the unit disk: midpoint in t = r^2, trapezoid in
/// theta (dA = (1/2) dt dtheta).
fn disk_integral(g: &dyn Fn(f64, f64) -> f64, n_r: usize, n_t: usize) -> f64 {
    let dt = 1.0 / n_r as f64;
    let dth = 2.0 * std::f64::consts::PI / n_t as f64;
    let mut acc = 0.0;
    for i in 0..n_r {
        let rad = ((i as f64 + 0.5) * dt).sqrt();
        let mut ring = 0.0;
        for j in 0..n_t {
            let th = j as f64 * dth;
            ring += g(rad * th.cos(), rad * th.sin());
        }
        acc += ring * dth * 0.5 * dt;
    }
    acc
}

fn circle_integral(g: &dyn Fn(f64) -> f64, n_t: usize) -> f64 {
    let dth = 2.0 * std::f64::consts::PI / n_t as f64;
    (0..n_t).map(|j| g(j as f64 * dth)).sum::<f64>() * dth
}

/// The two-dimensional scaling emulation of the divergence theorem: three
/// independent evaluations of the circle average of f, plus the
/// single-variable variant that defines the 2x^2-weighted circle measure.
pub fn disk_scaling_demo(tf: &DiskFunction, n_r: usize, n_t: usize) -> DiskReport {
    use std::f64::consts::PI;
    let f = &tf.f;
    let fx = &tf.fx;
    let fy = &tf.fy;
    let h = 1e-4;
    let scaled = |r: f64| -> f64 {
        disk_integral(&|x, y| r * f(r.sqrt() * x, r.sqrt() * y), n_r, n_t) / PI
    };
    let scaling = (scaled(1.0 + h) - scaled(1.0 - h)) / (2.0 * h);
    let divergence =
        disk_integral(&|x, y| 2.0 * f(x, y) + x * fx(x, y) + y * fy(x, y), n_r, n_t)
            / (2.0 * PI);
    let circle = circle_integral(&|th| f(th.cos(), th.sin()), n_t) / (2.0 * PI);

    let sv_scaled =
        |r: f64| -> f64 { disk_integral(&|x, y| r * f(r * x, y), n_r, n_t) / PI };
    let sv_scaling = (sv_scaled(1.0 + h) - sv_scaled(1.0 - h)) / (2.0 * h);
    let sv_divergence = disk_integral(&|x, y| f(x, y) + x * fx(x, y), n_r, n_t) / PI;
    let sv_measure =
        circle_integral(&|th| f(th.cos(), th.sin()) * 2.0 * th.cos() * th.cos(), n_t)
            / (2.0 * PI);
    let x_meas = sv_measure;
    let y_meas = circle_integral(&|th| f(th.cos(), th.sin()) * 2.0 * th.sin() * th.sin(), n_t)
        / (2.0 * PI);
    let decomposition_gap = (0.5 * (x_meas + y_meas) - circle).abs();
    DiskReport {
        scaling,
        divergence,
        circle,
        sv_scaling,
        sv_divergence,
        sv_measure,
        decomposition_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_shell_membership() {
        let spec = ShellSpec {
            m: 1.0,
            n_max: 16,
            mode: ShellMode::Thin { eps: 0.1 },
        };
        let batch = sample_thin_shell(&spec, 200, 12).unwrap();
        for s in &batch {
            assert!((mass(&s.field) - 1.0).abs() < 0.1);
            assert_eq!(s.weight, 1.0);
        }
    }

    #[test]
    fn scaling_shell_membership() {
        let spec = ShellSpec {
            m: 1.0,
            n_max: 16,
            mode: ShellMode::Scaling { k: 2, s: 1.2 },
        };
        let (batch, acc) = sample_scaling_shell(&spec, 200, 12).unwrap();
        assert!(acc > 0.0);
        for smp in &batch {
            let up = scale_frequency(&smp.field, 2, 1.2).unwrap();
            let dn = scale_frequency(&smp.field, 2, 1.0 / 1.2).unwrap();
            assert!(mass(&up) > 1.0 && mass(&dn) <= 1.0);
        }
    }

    #[test]
    fn change_of_variables_unit_and_odd() {
        let suite = regression_suite();
        let rep = change_of_variables_check(&suite[0], 1.0, 2, 1.2, 16, 100_000, 3);
        assert!(rep.sigma < 4.0, "{rep:?}");
        // odd observable: both sides vanish
        let odd = CylinderObservable::new("re_g1", 1, |u| u.g(1).re);
        let rep = change_of_variables_check(&odd, 1.0, 1, 1.2, 16, 50_000, 4);
        assert!(rep.lhs.value.abs() < 5.0 * rep.lhs.stderr.max(1e-6), "{rep:?}");
        assert!(rep.sigma < 4.0, "{rep:?}");
    }

    #[test]
    fn nu_unit_is_one() {
        let suite = regression_suite();
        let rep = nu_k_expectation(&suite[0], 1.0, 3, 16, 200_000, 5).unwrap();
        assert!((rep.interior.value - 1.0).abs() < 1e-9, "{rep:?}");
        assert!(
            (rep.extrapolated.value - 1.0).abs() < 4.0 * rep.extrapolated.stderr.max(1e-9),
            "{rep:?}"
        );
    }

    #[test]
    fn gamma_cov_is_twelve() {
        let e = gamma_cov_oracle(300_000, 8);
        assert!((e.value - 12.0).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn disk_demo_constant_and_x2() {
        let one = DiskFunction {
            name: "one",
            f: Box::new(|_, _| 1.0),
            fx: Box::new(|_, _| 0.0),
            fy: Box::new(|_, _| 0.0),
        };
        let r = disk_scaling_demo(&one, 500, 512);
        assert!((r.scaling - 1.0).abs() < 1e-6);
        assert!((r.divergence - 1.0).abs() < 1e-9);
        assert!((r.circle - 1.0).abs() < 1e-12);

        let x2 = DiskFunction {
            name: "x2",
            f: Box::new(|x, _| x * x),
            fx: Box::new(|x, _| 2.0 * x),
            fy: Box::new(|_, _| 0.0),
        };
        let r = disk_scaling_demo(&x2, 2000, 2048);
        assert!((r.circle - 0.5).abs() < 1e-9, "{}", r.circle);
        assert!((r.scaling - 0.5).abs() < 1e-6);
        assert!((r.divergence - 0.5).abs() < 1e-7);
        assert!((r.sv_scaling - r.sv_divergence).abs() < 1e-6);
        assert!((r.sv_divergence - r.sv_measure).abs() < 1e-7);
    }
}
