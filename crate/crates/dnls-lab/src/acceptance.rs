//! The acceptance suite: ten self-contained criteria, each with pinned
//! seeds, sample budgets and tolerances. `fast` variants shrink sample
//! counts and grid sizes so the whole suite stays interactive; verdicts are
//! only asserted by the full budgets.

use crate::chaos_stats::{
    chaos_l2_exact, chaos_l2_mc, gaussian_block_tail, hypercontractivity_check,
};
use crate::dnls_flow::{conservation_drift, invariance_harness, liouville_check, FlowConfig,
    Integrator};
use crate::fixed_mass::{
    change_of_variables_check, covariance_positivity, decomposition_check, disk_scaling_demo,
    exp_moment_fixed_mass, gamma_cov_oracle, radon_nikodym_check, regression_suite,
    CylinderObservable, DiskFunction,
};
use crate::functionals::{
    energy, f_n, mass, momentum, CoefficientScaling, QuadratureGrid,
};
use crate::mass_distributions::{
    default_curve, density_difference_decay, invert_density, shell_finite_s_k,
    shell_finite_s_k0, CharFunction, CharFunctionSpec, ModeSet, DEFAULT_DX,
    DEFAULT_DXI, DEFAULT_XI_MAX, DEFAULT_X_MAX,
};
use crate::rng::CounterRng;
use crate::torus_field::{japanese_bracket, sample_gaussian_field, FourierField};
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

struct Check {
    ok: bool,
    details: String,
}

impl Check {
    fn new() -> Self {
        Check {
            ok: true,
            details: String::new(),
        }
    }

    fn require(&mut self, cond: bool, msg: &str) {
        if !cond {
            self.ok = false;
            let _ = writeln!(self.details, "FAIL: {msg}");
        } else {
            let _ = writeln!(self.details, "ok: {msg}");
        }
    }

    fn note(&mut self, msg: &str) {
        let _ = writeln!(self.details, "     {msg}");
    }

    fn finish(self, id: usize, name: &'static str, start: Instant) -> CriterionResult {
        CriterionResult {
            id,
            name,
            passed: self.ok,
            details: self.details,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// 1. Sampler moments and the truncated mean mass.
pub fn criterion_1(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let n_draws: u64 = if fast { 100_000 } else { 1_000_000 };
    let tol2 = 0.003 * (1_000_000.0 / n_draws as f64).sqrt();
    let tol4 = 0.01 * (1_000_000.0 / n_draws as f64).sqrt();
    for &slot_freq in &[0i64, 1, -5, 17] {
        let slot = crate::rng::freq_slot(slot_freq);
        let (mut s2, mut s4) = (0.0f64, 0.0f64);
        for i in 0..n_draws {
            let g = CounterRng::new(101, i).complex_gaussian(slot);
            let m = g.norm_sqr();
            s2 += m;
            s4 += m * m;
        }
        let (m2, m4) = (s2 / n_draws as f64, s4 / n_draws as f64);
        c.require(
            (m2 - 1.0).abs() < tol2,
            &format!("E|g_{slot_freq}|^2 = {m2:.5} within {tol2}"),
        );
        c.require(
            (m4 - 2.0).abs() < tol4,
            &format!("E|g_{slot_freq}|^4 = {m4:.5} within {tol4}"),
        );
    }
    let n_max = 256i64;
    let n_mass: u64 = if fast { 20_000 } else { 200_000 };
    let est = crate::torus_field::mean_mass_mc(102, n_mass, n_max, 1);
    let partial: f64 = (-n_max..=n_max)
        .map(|n| 1.0 / japanese_bracket(n).powi(2))
        .sum();
    c.require(
        (est.value - partial).abs() < 3.0 * est.stderr,
        &format!(
            "truncated mean mass {:.5} +- {:.5} vs series {partial:.5} (full 3.15335)",
            est.value, est.stderr
        ),
    );
    c.finish(1, "sampler moments", start)
}

/// 2. Dual-path functional agreement and single-mode closed forms.
pub fn criterion_2(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let n_fields = if fast { 100 } else { 1000 };
    let n_max = 32i64;
    let grid = QuadratureGrid::for_sextic(n_max);
    let mut worst: f64 = 0.0;
    let mut worst_residue: f64 = 0.0;
    for i in 0..n_fields {
        let u = sample_gaussian_field(201, i, n_max);
        let pairs = [
            (mass(&u), grid.mass_grid(&u)),
            (momentum(&u), grid.momentum_grid(&u)),
            (energy(&u), grid.energy_grid(&u)),
            (f_n(&u, n_max), grid.f_n_grid(&u, n_max)),
        ];
        for (fourier, g) in pairs {
            worst = worst.max((fourier - g.value).abs() / fourier.abs().max(1.0));
            worst_residue = worst_residue.max(g.imag_residue);
        }
    }
    c.require(
        worst < 1e-10,
        &format!("dual-path relative agreement {worst:.2e} < 1e-10 over {n_fields} fields"),
    );
    c.require(
        worst_residue < 1e-9,
        &format!("imaginary residue {worst_residue:.2e}"),
    );
    // single mode u = a e^{ix}
    for &a in &[0.3f64, 0.9, 1.7] {
        let mut u = FourierField::zero(4);
        u.set_g(1, Complex64::new(a * japanese_bracket(1), 0.0));
        let g_mod4 = (a * japanese_bracket(1)).powi(4);
        let f = f_n(&u, 4);
        c.require(
            (f - 0.375 * g_mod4).abs() < 1e-10,
            &format!("single-mode f = {f:.12} vs (3/8)|g|^4"),
        );
        let e = energy(&u);
        let expect = a * a - 1.5 * a.powi(4) + 0.5 * a.powi(6);
        c.require(
            (e - expect).abs() < 1e-10,
            &format!("single-mode energy {e:.12} vs {expect:.12}"),
        );
    }
    c.finish(2, "functional correctness", start)
}

/// 3. Chaos Cauchy decay: exact enumeration scales like 1/N and MC agrees.
pub fn criterion_3(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let scaling = CoefficientScaling::constant(128, 1.0);
    let mut n_times_v = Vec::new();
    for &n in &[8i64, 16, 32, 64] {
        let v = chaos_l2_exact(n, 2 * n, &scaling).unwrap();
        n_times_v.push(n as f64 * v);
        c.note(&format!("N={n}: exact L2^2 = {v:.6}, N*value = {:.4}", n as f64 * v));
    }
    let (lo, hi) = (
        n_times_v.iter().cloned().fold(f64::INFINITY, f64::min),
        n_times_v.iter().cloned().fold(0.0f64, f64::max),
    );
    c.require(
        hi / lo < 3.0,
        &format!("N*value spread [{lo:.4}, {hi:.4}] within factor 3"),
    );
    let budgets: &[(i64, u64)] = if fast {
        &[(8, 10_000), (16, 5_000)]
    } else {
        &[(8, 100_000), (16, 50_000), (32, 20_000)]
    };
    for &(n, samples) in budgets {
        let rep = chaos_l2_mc(n, 2 * n, &scaling, samples, 301);
        let sig = rep.sigma_distance.unwrap();
        c.require(
            sig < 4.0,
            &format!(
                "MC at N={n}: {:.4} +- {:.4} vs exact {:.4} ({sig:.2} sigma)",
                rep.mc_l2_sq.value,
                rep.mc_l2_sq.stderr,
                rep.exact_l2_sq.unwrap()
            ),
        );
    }
    c.finish(3, "chaos Cauchy decay", start)
}

/// 4. Gaussian block tails and the hypercontractive ratio.
pub fn criterion_4(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let samples = if fast { 100_000 } else { 1_000_000 };
    for &(n, lam) in &[(8i64, 40.0f64), (16, 60.0)] {
        let est = gaussian_block_tail(n, lam, samples, 401);
        c.require(
            est.bound_applicable && !est.violated,
            &format!(
                "block N={n}, lambda={lam}: empirical {:.2e} (Wilson hi {:.2e}) vs bound {:.2e}",
                est.empirical_prob, est.wilson.1, est.bound
            ),
        );
    }
    let hyper_samples = if fast { 30_000 } else { 300_000 };
    let ratio = hypercontractivity_check(16, 4.0, hyper_samples, 402);
    let bound = 5.0f64.sqrt() * 9.0;
    c.require(
        ratio <= bound,
        &format!("||S4||_4/||S4||_2 = {ratio:.3} <= sqrt(5)*9 = {bound:.3}"),
    );
    c.finish(4, "tail bounds", start)
}

/// 5. Density inversion machinery.
pub fn criterion_5(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let p0 = default_curve(ModeSet::TailFrom(0));
    let total = p0.total_mass();
    c.require(
        (total - 1.0).abs() < 1e-6,
        &format!("p0 total mass {total:.8}"),
    );
    let series = std::f64::consts::PI / std::f64::consts::PI.tanh();
    let mean = p0.mean();
    c.require(
        (mean - series).abs() < 1e-4,
        &format!("p0 mean {mean:.6} vs series {series:.6}"),
    );

    // thin-shell MC of p0(1) against the curve at the same truncation
    let n_trunc = 256i64;
    let cf = CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(0), n_trunc).without_tail());
    let p0_trunc =
        invert_density(&cf, DEFAULT_X_MAX, DEFAULT_DX, DEFAULT_XI_MAX, DEFAULT_DXI).unwrap();
    let eps = 0.02;
    let samples: u64 = if fast { 200_000 } else { 2_000_000 };
    let mut hits = 0u64;
    for i in 0..samples {
        let mut rng = CounterRng::new(501, i);
        let m: f64 = (-n_trunc..=n_trunc)
            .map(|n| rng.exponential(crate::rng::freq_slot(n)) / japanese_bracket(n).powi(2))
            .sum();
        if (m - 1.0).abs() < eps {
            hits += 1;
        }
    }
    let mc = hits as f64 / samples as f64 / (2.0 * eps);
    let mc_se = (hits as f64).sqrt() / samples as f64 / (2.0 * eps);
    let curve_val = p0_trunc.at(1.0).unwrap();
    let combined = (mc_se * mc_se + 5e-4f64.powi(2)).sqrt();
    c.require(
        (mc - curve_val).abs() < 3.0 * combined,
        &format!("thin-shell MC p0(1) = {mc:.5} +- {mc_se:.5} vs curve {curve_val:.5}"),
    );

    let rows = density_difference_decay(&[2, 4, 8, 16]);
    for w in rows.windows(2) {
        let ratio = w[0].sup_distance / w[1].sup_distance;
        c.require(
            (3.0..=5.5).contains(&ratio),
            &format!(
                "||P_{} - p0||_inf / ||P_{} - p0||_inf = {ratio:.3} in [3.0, 5.5]",
                w[0].n, w[1].n
            ),
        );
    }
    c.finish(5, "density machinery", start)
}

/// 6. Divergence-by-scaling: exact change of variables and the disk demo.
pub fn criterion_6(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let samples: u64 = if fast { 50_000 } else { 1_000_000 };
    let n_max = 256i64;
    let suite = regression_suite();
    for &(m, k, s) in &[(1.0f64, 0i64, 1.2f64), (1.0, 2, 1.2), (1.0, 4, 1.05)] {
        for f in &suite {
            let rep = change_of_variables_check(f, m, k, s, n_max, samples, 601);
            c.require(
                rep.sigma < 3.0,
                &format!(
                    "CoV {} (m={m}, k={k}, s={s}): lhs {:.5} rhs {:.5} ({:.2} sigma)",
                    f.name, rep.lhs.value, rep.rhs.value, rep.sigma
                ),
            );
        }
    }
    // disk demonstration
    let (n_r, n_t) = if fast { (1000, 2048) } else { (2000, 4096) };
    let funcs = [
        DiskFunction {
            name: "one",
            f: Box::new(|_, _| 1.0),
            fx: Box::new(|_, _| 0.0),
            fy: Box::new(|_, _| 0.0),
        },
        DiskFunction {
            name: "x2_plus_3y4",
            f: Box::new(|x: f64, y: f64| x * x + 3.0 * y.powi(4)),
            fx: Box::new(|x: f64, _| 2.0 * x),
            fy: Box::new(|_, y: f64| 12.0 * y.powi(3)),
        },
    ];
    for tf in &funcs {
        let r = disk_scaling_demo(tf, n_r, n_t);
        c.require(
            (r.scaling - r.circle).abs() < 1e-6 && (r.divergence - r.circle).abs() < 1e-6,
            &format!(
                "disk {}: scaling {:.8} divergence {:.8} circle {:.8}",
                tf.name, r.scaling, r.divergence, r.circle
            ),
        );
        c.require(
            (r.sv_scaling - r.sv_measure).abs() < 1e-6
                && (r.sv_divergence - r.sv_measure).abs() < 1e-6,
            &format!("disk {} single-variable routes agree", tf.name),
        );
        c.require(
            r.decomposition_gap < 1e-6,
            &format!("disk {} measure decomposition gap {:.2e}", tf.name, r.decomposition_gap),
        );
    }
    c.finish(6, "divergence by scaling", start)
}

/// 7. Fixed-mass identities: Radon-Nikodym, decomposition, shell limits.
pub fn criterion_7(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let suite = regression_suite();
    let samples: u64 = if fast { 300_000 } else { 2_000_000 };

    for f in [&suite[1], &suite[3]] {
        match radon_nikodym_check(f, 1.0, 2, 64, samples, 701) {
            Ok(rep) => c.require(
                rep.sigma < 3.0,
                &format!(
                    "RN {}: nu {:.5} vs mu-side {:.5} ({:.2} sigma), c_km {:.4}",
                    f.name, rep.nu_side.value, rep.mu_side.value, rep.sigma, rep.c_km.value
                ),
            ),
            Err(e) => c.require(false, &format!("RN {}: {e}", f.name)),
        }
    }

    let dec_samples: u64 = if fast { 200_000 } else { 1_000_000 };
    for f in [&suite[0], &suite[1]] {
        match decomposition_check(f, 1.0, 64, 128, dec_samples, 702) {
            Ok(rep) => c.require(
                rep.pass,
                &format!(
                    "decomposition {}: lhs {:.5} +- {:.5}, rhs {:.5} +- {:.5}, tail {:.5}",
                    f.name, rep.lhs.value, rep.lhs.stderr, rep.rhs.value, rep.rhs.stderr,
                    rep.tail_budget
                ),
            ),
            Err(e) => c.require(false, &format!("decomposition {}: {e}", f.name)),
        }
    }

    // finite-s shell probabilities vs quadrature of the exact expression
    let n_trunc = 256i64;
    let s = 1.05f64;
    let mc_samples: u64 = if fast { 300_000 } else { 2_000_000 };
    for &k in &[0i64, 2, 8] {
        let set = ModeSet::AllExcept(k);
        let cf = CharFunction::new(CharFunctionSpec::new(set, n_trunc).without_tail());
        let pk =
            invert_density(&cf, DEFAULT_X_MAX, DEFAULT_DX, DEFAULT_XI_MAX, DEFAULT_DXI).unwrap();
        let quad = if k == 0 {
            shell_finite_s_k0(1.0, s, &pk)
        } else {
            shell_finite_s_k(1.0, k, s, &pk)
        };
        // MC with the +-k pair integrated out analytically
        let est = crate::mass_distributions::shell_pair_mc(1.0, k, s, n_trunc, mc_samples, 703, 1);
        let combined = (est.stderr * est.stderr + (5e-3 * quad).powi(2)).sqrt();
        c.require(
            (est.value - quad).abs() < 3.0 * combined,
            &format!(
                "shell k={k}, s={s}: MC {:.3e} +- {:.3e} vs quadrature {quad:.3e}",
                est.value, est.stderr
            ),
        );
        // convergence of the normalized finite-s values toward the limit
        let limit = if k == 0 {
            crate::mass_distributions::shell_limit_k0(1.0, &pk, &default_curve(ModeSet::TailFrom(0)))
                .limit
        } else {
            crate::mass_distributions::shell_limit_k(1.0, k, &pk).limit
        };
        let normalized = quad / (s * s - 1.0 / (s * s));
        c.require(
            (normalized - limit).abs() < 0.1 * limit,
            &format!("normalized finite-s {normalized:.6} within 10% of limit {limit:.6}"),
        );
    }
    c.finish(7, "fixed-mass identities", start)
}

/// 8. Covariance positivity on the enlarged conditioning set.
pub fn criterion_8(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let samples: u64 = if fast { 100_000 } else { 1_000_000 };
    for &k in &[1i64, 2, 4] {
        for j in 1..=4usize {
            let rep = covariance_positivity(1.0, k, j, 1.0, 16, samples, 801);
            c.require(
                rep.cov.value >= -4.0 * rep.cov.stderr,
                &format!(
                    "Cov(e^{{G_{k}^{j}}}, r_{k}) = {:.5} +- {:.5} on {} samples",
                    rep.cov.value, rep.cov.stderr, rep.accepted
                ),
            );
        }
    }
    let oracle_samples: u64 = if fast { 2_000_000 } else { 20_000_000 };
    let e = gamma_cov_oracle(oracle_samples, 802);
    c.require(
        (e.value - 12.0).abs() < 0.12,
        &format!("Gamma oracle Cov(r, r^2) = {:.4} +- {:.4} vs 12", e.value, e.stderr),
    );
    c.finish(8, "covariance positivity", start)
}

/// 9. Exponential moments at fixed small mass.
pub fn criterion_9(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    let samples: u64 = if fast { 30_000 } else { 200_000 };
    let mut ests = Vec::new();
    for &n in &[16i64, 32, 64] {
        match exp_moment_fixed_mass(0.5, 1.0, n, samples, 901) {
            Ok(rep) => {
                let (eps, est) = rep.per_eps[1];
                c.require(
                    est.value.is_finite() && rep.ess >= 1000.0,
                    &format!(
                        "N={n}: E[e^{{f_N}}] = {:.5} +- {:.5} (eps={eps}), ESS {:.0}",
                        est.value, est.stderr, rep.ess
                    ),
                );
                c.require(
                    est.value + 3.0 * est.stderr >= rep.jensen_floor,
                    &format!("N={n}: Jensen floor {:.5} respected", rep.jensen_floor),
                );
                if rep.heavy_tail {
                    c.note(&format!("N={n}: heavy-tail warning on weights"));
                }
                ests.push(est);
            }
            Err(e) => c.require(false, &format!("N={n}: {e}")),
        }
    }
    // Stability across N: the estimand itself moves with the cutoff at the
    // chaos Cauchy rate (the L2 distance between f_N and f_2N at fixed mass
    // is not zero), so the combined error budget is the Monte Carlo error
    // plus a truncation allowance p * 2*max(v) * ||f_N - f_2N||_{L2},
    // from a first-order bound with Cauchy-Schwarz. The L2 distances are
    // measured on a common tilted stream at the largest cutoff.
    if ests.len() == 3 {
        let pair_samples = samples;
        let tilt = crate::chaos_stats::TiltedProposal::for_target_mass(64, 0.5);
        let mut w = Vec::new();
        let mut d = [Vec::new(), Vec::new()];
        for j in 0..pair_samples {
            let u = tilt.sample(902, j);
            let mv = mass(&u);
            if (mv - 0.5).abs() >= 0.05 {
                continue;
            }
            w.push(tilt.log_weight(mv).exp());
            let f16 = f_n(&u, 16);
            let f32v = f_n(&u, 32);
            let f64v = f_n(&u, 64);
            d[0].push((f32v - f16).powi(2));
            d[1].push((f64v - f32v).powi(2));
        }
        let l2: Vec<f64> = d
            .iter()
            .map(|sq| {
                crate::stats::weighted_mean_stderr(sq, &w)
                    .value
                    .max(0.0)
                    .sqrt()
            })
            .collect();
        let mut drifts = Vec::new();
        for (i, pair) in ests.windows(2).enumerate() {
            let drift = (pair[1].value - pair[0].value).abs();
            let mc_err = (pair[0].stderr.powi(2) + pair[1].stderr.powi(2)).sqrt();
            let allowance = 2.0 * pair[0].value.max(pair[1].value) * l2[i];
            c.require(
                drift <= 3.0 * mc_err + allowance,
                &format!(
                    "stability {}->{}: drift {drift:.4} within 3 MC stderr ({mc_err:.4}) \
                     + truncation allowance {allowance:.4} (L2 chaos distance {:.4})",
                    16 << i,
                    32 << i,
                    l2[i]
                ),
            );
            drifts.push(drift);
        }
        // Cauchy behavior: the second increment must not exceed the first
        let sig = (ests[0].stderr.powi(2)
            + 2.0 * ests[1].stderr.powi(2)
            + ests[2].stderr.powi(2))
        .sqrt();
        c.require(
            drifts[1] <= drifts[0] + 3.0 * sig,
            &format!(
                "increments shrink with N: {:.4} -> {:.4}",
                drifts[0], drifts[1]
            ),
        );
    }
    c.finish(9, "exponential moments", start)
}

/// 10. Flow: order, conservation, Liouville, invariance harness.
pub fn criterion_10(fast: bool) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    // integrator order on a random field
    let u = sample_gaussian_field(1001, 0, 8);
    let integ = Integrator::new(8);
    let reference = integ.evolve(&u, &FlowConfig { n_max: 8, dt: 1e-4, t_final: 0.2 });
    let err_at = |dt: f64| -> f64 {
        let v = integ.evolve(&u, &FlowConfig { n_max: 8, dt, t_final: 0.2 });
        v.iter_g()
            .map(|(n, g)| (reference.g(n) - g).norm())
            .fold(0.0, f64::max)
    };
    let order = (err_at(4e-3) / err_at(2e-3)).log2();
    c.require(
        (3.7..=4.3).contains(&order),
        &format!("integrator order {order:.2}"),
    );

    // mass conservation at N = 32 over unit time; dt is a quarter of the
    // production default so the fifth-order local error sits safely below
    // the 1e-8 target on an O(1)-mass field
    let u32f = sample_gaussian_field(1002, 0, 32);
    let t_cons = if fast { 0.25 } else { 1.0 };
    let dt_cons = 0.0125 / (32.0f64 * 32.0);
    let drift = conservation_drift(
        &u32f,
        &FlowConfig { n_max: 32, dt: dt_cons, t_final: t_cons },
    );
    c.require(
        drift.mass_drift < 1e-8,
        &format!(
            "mass drift {:.2e} per unit time at N=32 (dt = {dt_cons:.2e})",
            drift.mass_drift
        ),
    );
    c.note(&format!(
        "momentum drift {:.2e}, energy drift {:.2e}",
        drift.momentum_drift, drift.energy_drift
    ));

    // Liouville at N <= 4
    for &n in &[2i64, 4] {
        if fast && n == 4 {
            continue;
        }
        let u0 = sample_gaussian_field(1003, 0, n);
        let cfg = FlowConfig::default_for(n, 1.0);
        let l = liouville_check(&u0, &cfg, 1e-4);
        c.require(l < 1e-3, &format!("|log det J| = {l:.2e} at N={n}, T=1"));
    }

    // invariance harness
    let observables = vec![
        CylinderObservable::new("u_hat_1_sq", 1, |u| u.weighted_coefficient(1).norm_sqr()),
        CylinderObservable::new("l4_norm_4", 16, |u| {
            let a = u.weighted_coeffs();
            let a2 = crate::functionals::convolve(&a, &a);
            a2.iter().map(|z| z.norm_sqr()).sum()
        }),
        CylinderObservable::new("re_u_hat_0", 0, |u| u.g(0).re),
    ];
    let (n_inv, t_inv, samples, seeds): (i64, f64, u64, &[u64]) = if fast {
        (8, 0.5, 1_000, &[1004])
    } else {
        (16, 1.0, 4_000, &[1004, 1005, 1006])
    };
    let ess_floor = if fast { 30.0 } else { 100.0 };
    let mut conservative = true;
    let mut all_z_ok = true;
    let mut min_ess = f64::INFINITY;
    for &seed in seeds {
        let rep = invariance_harness(1.0, n_inv, t_inv, samples, seed, &observables);
        c.note(&format!(
            "seed {seed}: accepted {}, ESS {:.0}, max mass drift {:.2e}, max energy drift {:.2e}",
            rep.accepted, rep.ess, rep.max_mass_drift, rep.max_energy_drift
        ));
        min_ess = min_ess.min(rep.ess);
        if rep.max_energy_drift >= 1e-6 {
            conservative = false;
        }
        for o in &rep.observables {
            c.note(&format!(
                "  {}: {:.5} -> {:.5} (z = {:.2})",
                o.name, o.initial.value, o.evolved.value, o.z
            ));
            if o.z > 5.0 {
                all_z_ok = false;
            }
        }
    }
    if conservative {
        // the z-scores are the criterion, so they must rest on enough
        // effective samples to mean anything
        c.require(
            min_ess >= ess_floor,
            &format!("effective sample size {min_ess:.0} >= {ess_floor}"),
        );
        c.require(
            all_z_ok,
            "energy drift < 1e-6: all invariance z-scores <= 5",
        );
    } else {
        c.note(
            "energy drift >= 1e-6: the raw Galerkin truncation need not preserve the \
             truncated Gibbs weight exactly (the invariance proof runs through a gauged \
             truncation); criterion falls back to the conservation/Liouville suite above",
        );
        c.note(&format!(
            "z-scores and ESS (min {min_ess:.0}) reported as findings, not failures"
        ));
        if !all_z_ok {
            c.note("some z-scores exceed 5");
        }
    }
    c.finish(10, "truncated flow", start)
}

/// All ten criteria in order.
pub fn run_all(fast: bool) -> Vec<CriterionResult> {
    [
        criterion_1 as fn(bool) -> CriterionResult,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ]
    .iter()
    .map(|f| f(fast))
    .collect()
}
