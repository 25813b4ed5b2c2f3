//! Galerkin-truncated derivative NLS flow.
//!
//! u_t = i u_xx + P_{<=N} d_x(|u_N|^2 u_N), integrated with an
//! integrating-factor RK4: the stiff linear phase is handled exactly in
//! Fourier space, the cubic nonlinearity pseudospectrally on a grid large
//! enough (M >= 4N + 1, rounded to a power of two) that no aliased mode
//! folds back onto |n| <= N.

use crate::fixed_mass::CylinderObservable;
use crate::functionals::{energy, f_n, l6_norm_sixth, mass, momentum};
use crate::stats::{effective_sample_size, weighted_mean_stderr, Estimate};
use crate::torus_field::{japanese_bracket, FourierField};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct FlowConfig {
    pub n_max: i64,
    pub dt: f64,
    pub t_final: f64,
}

impl FlowConfig {
    /// dt = 0.05/N^2 keeps the nonlinear substep well inside the RK4
    /// stability region at every tested N.
    pub fn default_for(n_max: i64, t_final: f64) -> Self {
        FlowConfig {
            n_max,
            dt: 0.05 / (n_max * n_max) as f64,
            t_final,
        }
    }
}

/// Reusable integrator state: FFT plans and the dealiased grid size.
pub struct Integrator {
    n_max: i64,
    grid: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Integrator {
    pub fn new(n_max: i64) -> Self {
        let grid = (4 * n_max as usize + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Integrator {
            n_max,
            grid,
            fwd: planner.plan_fft_forward(grid),
            inv: planner.plan_fft_inverse(grid),
        }
    }

    /// P_{<=N} of the Fourier coefficients of |u|^2 u, for u given by its
    /// weighted coefficients v_n (centered slice).
    fn cubic_term(&self, v: &[Complex64]) -> Vec<Complex64> {
        let m = self.grid;
        let n = self.n_max;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (i, &vn) in v.iter().enumerate() {
            let freq = i as i64 - n;
            buf[freq.rem_euclid(m as i64) as usize] = vn;
        }
        self.inv.process(&mut buf);
        for z in buf.iter_mut() {
            *z = *z * z.norm_sqr();
        }
        self.fwd.process(&mut buf);
        let scale = 1.0 / m as f64;
        (-n..=n)
            .map(|freq| buf[freq.rem_euclid(m as i64) as usize] * scale)
            .collect()
    }

    /// Nonlinear right-hand side: i n * (|u|^2 u)^_n.
    fn rhs(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.cubic_term(v)
            .iter()
            .enumerate()
            .map(|(i, &w)| Complex64::new(0.0, (i as i64 - self.n_max) as f64) * w)
            .collect()
    }

    /// One integrating-factor RK4 step on the weighted coefficients.
    fn step_coeffs(&self, a: &[Complex64], dt: f64) -> Vec<Complex64> {
        let n = self.n_max;
        let e_half: Vec<Complex64> = (-n..=n)
            .map(|f| Complex64::new(0.0, -(f * f) as f64 * dt / 2.0).exp())
            .collect();
        let mul = |x: &[Complex64], e: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(e).map(|(a, b)| a * b).collect()
        };
        let axpy = |x: &[Complex64], c: f64, y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(a, b)| a + c * b).collect()
        };
        let b1 = self.rhs(a);
        let a2 = mul(&axpy(a, dt / 2.0, &b1), &e_half);
        let b2 = self.rhs(&a2);
        let a3 = axpy(&mul(a, &e_half), dt / 2.0, &b2);
        let b3 = self.rhs(&a3);
        let ea = mul(&mul(a, &e_half), &e_half);
        let a4 = axpy(&ea, dt, &mul(&b3, &e_half));
        let b4 = self.rhs(&a4);
        let mut out = ea;
        for i in 0..out.len() {
            let t1 = e_half[i] * e_half[i] * b1[i];
            let t2 = e_half[i] * (b2[i] + b3[i]);
            out[i] += dt / 6.0 * (t1 + 2.0 * t2 + b4[i]);
        }
        out
    }

    pub fn step(&self, u: &FourierField, dt: f64) -> FourierField {
        assert_eq!(u.n_max(), self.n_max);
        let v = u.weighted_coeffs();
        let next = self.step_coeffs(&v, dt);
        let coeffs: Vec<Complex64> = next
            .iter()
            .enumerate()
            .map(|(i, &c)| c * japanese_bracket(i as i64 - self.n_max))
            .collect();
        for c in &coeffs {
            assert!(c.re.is_finite() && c.im.is_finite(), "flow blew up");
        }
        FourierField::from_coeffs(self.n_max, coeffs)
    }

    /// Integrate to t_final (a negative horizon runs the flow backward).
    pub fn evolve(&self, u0: &FourierField, cfg: &FlowConfig) -> FourierField {
        let steps = (cfg.t_final.abs() / cfg.dt).round().max(1.0) as u64;
        let dt = cfg.t_final / steps as f64;
        let mut u = u0.clone();
        for _ in 0..steps {
            u = self.step(&u, dt);
        }
        u
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
}

/// Per-unit-time drift of the three conserved quantities over one
/// trajectory.
pub fn conservation_drift(u0: &FourierField, cfg: &FlowConfig) -> DriftReport {
    let integ = Integrator::new(cfg.n_max);
    let u1 = integ.evolve(u0, cfg);
    let t = cfg.t_final.abs().max(f64::MIN_POSITIVE);
    DriftReport {
        mass_drift: (mass(&u1) - mass(u0)).abs() / t,
        momentum_drift: (momentum(&u1) - momentum(u0)).abs() / t,
        energy_drift: (energy(&u1) - energy(u0)).abs() / t,
    }
}

/// |log det| of the Jacobian of the time-T flow map, by central finite
/// differences in the 2(2N+1) real coordinates. N <= 6 keeps the dimension
/// at most 26.
pub fn liouville_check(u0: &FourierField, cfg: &FlowConfig, h: f64) -> f64 {
    let n = cfg.n_max;
    assert!(n <= 6, "finite-difference Jacobian limited to small N");
    let d = 2 * (2 * n + 1) as usize;
    let integ = Integrator::new(n);
    let to_vec = |u: &FourierField| -> Vec<f64> {
        u.iter_g().flat_map(|(_, g)| [g.re, g.im]).collect()
    };
    let from_vec = |x: &[f64]| -> FourierField {
        let coeffs = x
            .chunks(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        FourierField::from_coeffs(n, coeffs)
    };
    let x0 = to_vec(u0);
    let mut jac = vec![vec![0.0f64; d]; d];
    for col in 0..d {
        let mut xp = x0.clone();
        xp[col] += h;
        let mut xm = x0.clone();
        xm[col] -= h;
        let yp = to_vec(&integ.evolve(&from_vec(&xp), cfg));
        let ym = to_vec(&integ.evolve(&from_vec(&xm), cfg));
        for row in 0..d {
            jac[row][col] = (yp[row] - ym[row]) / (2.0 * h);
        }
    }
    log_abs_det(&mut jac)
}

/// |log |det A|| by LU with partial pivoting; dimensions here are tiny.
fn log_abs_det(a: &mut [Vec<f64>]) -> f64 {
    let d = a.len();
    let mut log_det = 0.0f64;
    for i in 0..d {
        let (pivot, _) = a[i..]
            .iter()
            .enumerate()
            .map(|(j, row)| (i + j, row[i].abs()))
            .fold((i, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        a.swap(i, pivot);
        let p = a[i][i];
        assert!(p != 0.0, "singular Jacobian");
        log_det += p.abs().ln();
        for j in i + 1..d {
            let factor = a[j][i] / p;
            for k in i..d {
                a[j][k] -= factor * a[i][k];
            }
        }
    }
    log_det.abs()
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableResult {
    pub name: String,
    pub initial: Estimate,
    pub evolved: Estimate,
    /// paired weighted z-score of the difference
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub n_max: i64,
    pub m: f64,
    pub t: f64,
    pub samples: u64,
    pub accepted: u64,
    pub ess: f64,
    pub observables: Vec<ObservableResult>,
    /// worst per-unit-time drifts across evolved samples
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
}

/// Empirical invariance test for the truncated Gibbs weight
/// 1_{mass < m} exp(f_N - (1/2) int |u_N|^6): weighted observable means
/// before and after evolving each accepted sample to time T.
pub fn invariance_harness(
    m: f64,
    n_max: i64,
    t: f64,
    samples: u64,
    seed: u64,
    observables: &[CylinderObservable],
) -> InvarianceReport {
    let cfg = FlowConfig::default_for(n_max, t);
    let integ = Integrator::new(n_max);
    // exponential tilt toward the mass ball; the importance factor
    // exp(theta * mass)/Z is bounded on {mass < m}
    let tilt = crate::chaos_stats::TiltedProposal::for_target_mass(n_max, m);
    let mut weights = Vec::new();
    let mut initial: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    let mut evolved: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    let mut max_mass_drift = 0.0f64;
    let mut max_energy_drift = 0.0f64;
    for i in 0..samples {
        let u = tilt.sample(seed, i);
        let mass_u = mass(&u);
        if mass_u >= m {
            continue;
        }
        let w = (tilt.log_weight(mass_u) + f_n(&u, n_max) - 0.5 * l6_norm_sixth(&u)).exp();
        weights.push(w);
        let ut = integ.evolve(&u, &cfg);
        for (j, f) in observables.iter().enumerate() {
            initial[j].push(f.eval(&u));
            evolved[j].push(f.eval(&ut));
        }
        max_mass_drift = max_mass_drift.max((mass(&ut) - mass(&u)).abs() / t);
        max_energy_drift = max_energy_drift.max((energy(&ut) - energy(&u)).abs() / t);
    }
    let obs_results = observables
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let diffs: Vec<f64> = initial[j]
                .iter()
                .zip(&evolved[j])
                .map(|(a, b)| b - a)
                .collect();
            let d = weighted_mean_stderr(&diffs, &weights);
            ObservableResult {
                name: f.name.to_string(),
                initial: weighted_mean_stderr(&initial[j], &weights),
                evolved: weighted_mean_stderr(&evolved[j], &weights),
                z: if d.stderr == 0.0 {
                    0.0
                } else {
                    d.value.abs() / d.stderr
                },
            }
        })
        .collect();
    InvarianceReport {
        n_max,
        m,
        t,
        samples,
        accepted: weights.len() as u64,
        ess: effective_sample_size(&weights),
        observables: obs_results,
        max_mass_drift,
        max_energy_drift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::{sample_gaussian_field, FourierField};

    fn single_mode(n_max: i64, amp: f64) -> FourierField {
        let mut u = FourierField::zero(n_max);
        // g_1 = amp * <1> so the function coefficient at n = 1 is amp
        u.set_g(1, Complex64::new(amp * japanese_bracket(1), 0.0));
        u
    }

    #[test]
    fn zero_field_stays_zero() {
        let integ = Integrator::new(8);
        let u = FourierField::zero(8);
        let v = integ.step(&u, 0.01);
        assert_eq!(v, u);
    }

    #[test]
    fn linear_regime_phase_rotation() {
        // tiny amplitude: solution is the free evolution e^{-i n^2 t}
        let integ = Integrator::new(8);
        let mut u = FourierField::zero(8);
        u.set_g(2, Complex64::new(1e-6, 0.0));
        u.set_g(-3, Complex64::new(0.0, 1e-6));
        let cfg = FlowConfig {
            n_max: 8,
            dt: 1e-3,
            t_final: 1.0,
        };
        let v = integ.evolve(&u, &cfg);
        for (n, g) in u.iter_g() {
            let expect = g * Complex64::new(0.0, -(n * n) as f64).exp();
            assert!((v.g(n) - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn single_mode_exact_solution() {
        // u0 = a e^{ix} evolves as a e^{i(x + (|a|^2 - 1) t)}: the quartic
        // momentum and sextic terms shift the phase velocity by |a|^2
        let a = 0.7f64;
        let u = single_mode(4, a);
        let integ = Integrator::new(4);
        let cfg = FlowConfig::default_for(4, 0.5);
        let v = integ.evolve(&u, &cfg);
        let phase = Complex64::new(0.0, (a * a - 1.0) * 0.5).exp();
        let expect = u.g(1) * phase;
        assert!(
            (v.g(1) - expect).norm() < 1e-8,
            "got {:?} expected {:?}",
            v.g(1),
            expect
        );
    }

    #[test]
    fn conservation_and_reversibility() {
        let u = sample_gaussian_field(21, 0, 16);
        let cfg = FlowConfig::default_for(16, 0.5);
        let drift = conservation_drift(&u, &cfg);
        assert!(drift.mass_drift < 1e-8, "{drift:?}");
        let integ = Integrator::new(16);
        let fwd = integ.evolve(&u, &cfg);
        let back_cfg = FlowConfig {
            t_final: -0.5,
            ..cfg
        };
        let back = integ.evolve(&fwd, &back_cfg);
        let err: f64 = u
            .iter_g()
            .map(|(n, g)| (back.g(n) - g).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "reversibility error {err}");
    }

    #[test]
    fn fourth_order_convergence() {
        let u = sample_gaussian_field(22, 1, 8);
        let integ = Integrator::new(8);
        let reference = integ.evolve(
            &u,
            &FlowConfig {
                n_max: 8,
                dt: 1e-4,
                t_final: 0.2,
            },
        );
        let err_at = |dt: f64| -> f64 {
            let v = integ.evolve(
                &u,
                &FlowConfig {
                    n_max: 8,
                    dt,
                    t_final: 0.2,
                },
            );
            v.iter_g()
                .map(|(n, g)| (reference.g(n) - g).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err_at(4e-3);
        let e2 = err_at(2e-3);
        let order = (e1 / e2).log2();
        assert!((3.7..4.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn liouville_identity_at_t0_and_linear() {
        let u = sample_gaussian_field(23, 2, 2);
        // T = tiny: identity map
        let cfg = FlowConfig {
            n_max: 2,
            dt: 1e-3,
            t_final: 0.5,
        };
        let l = liouville_check(&u, &cfg, 1e-4);
        assert!(l < 1e-3, "|log det J| = {l}");
    }
}
