//! Densities of the mass and of its partial sums, via characteristic
//! functions.
//!
//! The mass is a weighted sum of independent Exp(1) variables |g_n|^2 with
//! weights 1/<n>^2, so its characteristic function is the product of
//! 1/(1 - i xi / <n>^2) over the participating modes. Densities are
//! recovered by trapezoid inversion; "distribution function" throughout
//! means probability density (the curves integrate to one).

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::stats::Estimate;
use crate::torus_field::japanese_bracket;

#[derive(Debug, Error)]
pub enum MassError {
    #[error("characteristic function has not decayed at Xi = {xi}: |Phi| = {modulus:.2e}; increase Xi")]
    SlowDecay { xi: f64, modulus: f64 },
    #[error("x = {0} outside the tabulated grid; extrapolation refused")]
    OutOfRange(f64),
}

/// Which modes participate in the partial mass sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ModeSet {
    /// p_N: modes with |n| >= N (p_0 is the full mass).
    TailFrom(i64),
    /// P_N: all modes except n = +-N (only n = 0 removed when N = 0).
    AllExcept(i64),
}

impl ModeSet {
    fn included(&self, n: i64) -> bool {
        match *self {
            ModeSet::TailFrom(k) => n.abs() >= k,
            ModeSet::AllExcept(k) => n.abs() != k,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharFunctionSpec {
    pub set: ModeSet,
    /// modes with |n| <= cutoff enter the finite product
    pub cutoff: i64,
    /// first-order tail correction exp(i xi tau), tau = sum_{|n|>K} 1/<n>^2
    pub tail_correction: bool,
    /// second-order correction exp(-xi^2/2 sum_{|n|>K} 1/<n>^4)
    pub second_order: bool,
}

impl CharFunctionSpec {
    pub fn new(set: ModeSet, cutoff: i64) -> Self {
        assert!(cutoff >= 64);
        match set {
            ModeSet::TailFrom(k) | ModeSet::AllExcept(k) => assert!(k <= cutoff),
        }
        CharFunctionSpec {
            set,
            cutoff,
            tail_correction: true,
            second_order: false,
        }
    }

    pub fn without_tail(mut self) -> Self {
        self.tail_correction = false;
        self.second_order = false;
        self
    }

    /// E of the represented sum (the density's mean).
    pub fn mean(&self) -> f64 {
        let head: f64 = (-self.cutoff..=self.cutoff)
            .filter(|&n| self.set.included(n))
            .map(|n| 1.0 / japanese_bracket(n).powi(2))
            .sum();
        if self.tail_correction {
            head + tail_first_moment(self.cutoff)
        } else {
            head
        }
    }
}

/// sum_{|n| > K} 1/<n>^2, from the closed form of the full series
/// sum_{n in Z} 1/(1 + n^2) = pi coth(pi).
fn tail_first_moment(k: i64) -> f64 {
    let full = PI / PI.tanh();
    let head: f64 = (-k..=k).map(|n| 1.0 / japanese_bracket(n).powi(2)).sum();
    full - head
}

/// sum_{|n| > K} 1/<n>^4 by direct summation (converges like K^-3).
fn tail_second_moment(k: i64) -> f64 {
    let mut s = 0.0;
    for n in (k + 1)..=1_000_000 {
        s += 2.0 / japanese_bracket(n).powi(4);
    }
    s
}

/// Evaluator with precomputed mode list and tail moments.
pub struct CharFunction {
    pub spec: CharFunctionSpec,
    inv_brackets_sq: Vec<f64>,
    tau1: f64,
    tau2: f64,
}

impl CharFunction {
    pub fn new(spec: CharFunctionSpec) -> Self {
        let inv_brackets_sq = (-spec.cutoff..=spec.cutoff)
            .filter(|&n| spec.set.included(n))
            .map(|n| 1.0 / japanese_bracket(n).powi(2))
            .collect();
        let tau1 = if spec.tail_correction {
            tail_first_moment(spec.cutoff)
        } else {
            0.0
        };
        let tau2 = if spec.second_order {
            tail_second_moment(spec.cutoff)
        } else {
            0.0
        };
        CharFunction {
            spec,
            inv_brackets_sq,
            tau1,
            tau2,
        }
    }

    /// Phi(xi) = prod 1/(1 - i xi/<n>^2) times the tail factors; |Phi| <= 1.
    pub fn eval(&self, xi: f64) -> Complex64 {
        let mut phi = Complex64::new(1.0, 0.0);
        for &w in &self.inv_brackets_sq {
            phi /= Complex64::new(1.0, -xi * w);
        }
        phi * Complex64::new(-0.5 * xi * xi * self.tau2, xi * self.tau1).exp()
    }
}

/// Tabulated density on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct DensityCurve {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl DensityCurve {
    pub fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.values.len() - 1) as f64
    }

    /// Trapezoid integral over the full grid.
    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.values, self.dx)
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.x0 + i as f64 * self.dx) * v)
            .collect();
        trapezoid(&weighted, self.dx)
    }

    /// Linear interpolation; refuses extrapolation.
    pub fn at(&self, x: f64) -> Result<f64, MassError> {
        if x < self.x0 || x > self.x_max() {
            return Err(MassError::OutOfRange(x));
        }
        let t = (x - self.x0) / self.dx;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - i as f64;
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    /// Trapezoid CDF at x.
    pub fn cdf(&self, x: f64) -> Result<f64, MassError> {
        if x < self.x0 || x > self.x_max() {
            return Err(MassError::OutOfRange(x));
        }
        let t = (x - self.x0) / self.dx;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let mut acc = 0.0;
        for j in 0..i {
            acc += 0.5 * (self.values[j] + self.values[j + 1]) * self.dx;
        }
        let frac = t - i as f64;
        let v_end = self.values[i] * (1.0 - frac) + self.values[i + 1] * frac;
        acc += 0.5 * (self.values[i] + v_end) * frac * self.dx;
        Ok(acc)
    }

    pub fn sup_distance(&self, other: &DensityCurve) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &DensityCurve) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let sq: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        trapezoid(&sq, self.dx).sqrt()
    }
}

fn trapezoid(v: &[f64], dx: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    dx * (0.5 * (v[0] + v[v.len() - 1]) + inner)
}

pub const DEFAULT_CUTOFF: i64 = 512;
pub const DEFAULT_XI_MAX: f64 = 200.0;
pub const DEFAULT_DXI: f64 = 0.01;
/// The density tail is ~ 13.5 e^{-x}, so the grid runs to 30 to push the
/// missing mass below 1e-11.
pub const DEFAULT_X_MAX: f64 = 30.0;
pub const DEFAULT_DX: f64 = 0.005;

/// p(x) = (1/pi) int_0^Xi Re[e^{-i xi x} Phi(xi)] d xi by trapezoid, using
/// that Phi(-xi) = conj(Phi(xi)) for a real density.
pub fn invert_density(
    cf: &CharFunction,
    x_max: f64,
    dx: f64,
    xi_max: f64,
    dxi: f64,
) -> Result<DensityCurve, MassError> {
    let tail_mod = cf.eval(xi_max).norm();
    if tail_mod >= 1e-8 {
        return Err(MassError::SlowDecay {
            xi: xi_max,
            modulus: tail_mod,
        });
    }
    let n_xi = (xi_max / dxi).round() as usize;
    let phi: Vec<Complex64> = (0..=n_xi).map(|j| cf.eval(j as f64 * dxi)).collect();
    let n_x = (x_max / dx).round() as usize;
    let values: Vec<f64> = (0..=n_x)
        .map(|ix| {
            let x = ix as f64 * dx;
            // e^{-i xi_j x} by recurrence
            let step = Complex64::new(0.0, -dxi * x).exp();
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = 0.5 * phi[0].re; // trapezoid end weights
            for p in &phi[1..n_xi] {
                rot *= step;
                acc += (rot * p).re;
            }
            rot *= step;
            acc += 0.5 * (rot * phi[n_xi]).re;
            acc * dxi / PI
        })
        .collect();
    Ok(DensityCurve {
        x0: 0.0,
        dx,
        values,
    })
}

/// Density curve with the default grid and tail correction.
pub fn default_curve(set: ModeSet) -> DensityCurve {
    let cf = CharFunction::new(CharFunctionSpec::new(set, DEFAULT_CUTOFF));
    invert_density(&cf, DEFAULT_X_MAX, DEFAULT_DX, DEFAULT_XI_MAX, DEFAULT_DXI)
        .expect("default grid decays")
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub n: i64,
    pub sup_distance: f64,
    pub l2_distance: f64,
}

/// ||P_N - p_0|| per N; the distances should shrink like <N>^-2.
pub fn density_difference_decay(n_list: &[i64]) -> Vec<DecayRow> {
    let p0 = default_curve(ModeSet::TailFrom(0));
    n_list
        .iter()
        .map(|&n| {
            let pn = default_curve(ModeSet::AllExcept(n));
            DecayRow {
                n,
                sup_distance: pn.sup_distance(&p0),
                l2_distance: pn.l2_distance(&p0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellLimit {
    pub limit: f64,
    pub lower_bound: f64,
}

/// Limit of mu(Gamma_{m,s})/(s^2 - 1/s^2) as s -> 1 for the zero-frequency
/// shell: int_0^m P_0(y) (m-y) e^{-(m-y)} dy, with the analytic lower bound
/// (m e^{-m}/2) mu(mass < m/2).
pub fn shell_limit_k0(m: f64, p_all_but_0: &DensityCurve, p0: &DensityCurve) -> ShellLimit {
    let steps = 4000usize;
    let h = m / steps as f64;
    let integrand: Vec<f64> = (0..=steps)
        .map(|i| {
            let y = i as f64 * h;
            let d = m - y;
            p_all_but_0.at(y).unwrap_or(0.0) * d * (-d).exp()
        })
        .collect();
    let limit = trapezoid(&integrand, h);
    let lower = 0.5 * m * (-m).exp() * p0.cdf(m / 2.0).unwrap_or(0.0);
    ShellLimit {
        limit,
        lower_bound: lower,
    }
}

/// Same limit for the +-k shell, k >= 1:
/// (1/<k>^2) int_0^{<k>^2 m} P_k(m - y/<k>^2) y^2 e^{-y} dy, with the
/// lower bound (m^2 e^{-m}/4<k>^2) int_{m/2}^m P_k(m - y/<k>^2) dy.
pub fn shell_limit_k(m: f64, k: i64, p_all_but_k: &DensityCurve) -> ShellLimit {
    assert!(k >= 1);
    let br2 = japanese_bracket(k).powi(2);
    let y_top = (br2 * m).min(60.0); // y^2 e^-y is negligible past 60
    let steps = 8000usize;
    let h = y_top / steps as f64;
    let integrand: Vec<f64> = (0..=steps)
        .map(|i| {
            let y = i as f64 * h;
            p_all_but_k.at(m - y / br2).unwrap_or(0.0) * y * y * (-y).exp()
        })
        .collect();
    let limit = trapezoid(&integrand, h) / br2;
    // lower bound integral over y in [m/2, m]
    let steps_lb = 1000usize;
    let hl = (m / 2.0) / steps_lb as f64;
    let lb_vals: Vec<f64> = (0..=steps_lb)
        .map(|i| {
            let y = m / 2.0 + i as f64 * hl;
            p_all_but_k.at(m - y / br2).unwrap_or(0.0)
        })
        .collect();
    let lower = m * m * (-m).exp() / (4.0 * br2) * trapezoid(&lb_vals, hl);
    ShellLimit {
        limit,
        lower_bound: lower,
    }
}

/// mu(Gamma_{m,s}) at finite s, exactly (no limit taken):
/// int_0^m P_0(y) (e^{-(m-y)/s^2} - e^{-s^2 (m-y)}) dy.
pub fn shell_finite_s_k0(m: f64, s: f64, p_all_but_0: &DensityCurve) -> f64 {
    let steps = 4000usize;
    let h = m / steps as f64;
    let vals: Vec<f64> = (0..=steps)
        .map(|i| {
            let y = i as f64 * h;
            let d = m - y;
            p_all_but_0.at(y).unwrap_or(0.0)
                * ((-d / (s * s)).exp() - (-s * s * d).exp())
        })
        .collect();
    trapezoid(&vals, h)
}

/// mu(Gamma^k_{m,s}) at finite s for k >= 1:
/// int_0^m P_k(y) [(1 + <k>^2 (m-y)/s^2) e^{-<k>^2 (m-y)/s^2}
///               - (1 + <k>^2 s^2 (m-y)) e^{-<k>^2 s^2 (m-y)}] dy.
pub fn shell_finite_s_k(m: f64, k: i64, s: f64, p_all_but_k: &DensityCurve) -> f64 {
    assert!(k >= 1);
    let br2 = japanese_bracket(k).powi(2);
    let steps = 8000usize;
    let h = m / steps as f64;
    let vals: Vec<f64> = (0..=steps)
        .map(|i| {
            let y = i as f64 * h;
            let d = m - y;
            let lo = br2 * d / (s * s);
            let hi = br2 * d * s * s;
            p_all_but_k.at(y).unwrap_or(0.0)
                * ((1.0 + lo) * (-lo).exp() - (1.0 + hi) * (-hi).exp())
        })
        .collect();
    trapezoid(&vals, h)
}

/// Monte Carlo estimate of mu(Gamma^k_{m,s}) at truncation n_trunc with the
/// +-k pair integrated out analytically: only the mass y carried by the
/// other modes is sampled, and the pair's Exp(1) (k = 0) or Gamma(2,1)
/// (k >= 1) law supplies the exact conditional shell probability. Chunked
/// deterministic reduction; the result is thread-count independent.
pub fn shell_pair_mc(
    m: f64,
    k: i64,
    s: f64,
    n_trunc: i64,
    samples: u64,
    seed: u64,
    threads: usize,
) -> Estimate {
    use crate::rng::{freq_slot, CounterRng};
    use crate::stats::{chunked_accumulate, MomentAccumulator};
    assert!(k >= 0 && s > 1.0);
    let br2 = japanese_bracket(k).powi(2);
    let survival = move |t: f64| -> f64 {
        if t <= 0.0 {
            1.0
        } else if k == 0 {
            (-t).exp()
        } else {
            (1.0 + br2 * t) * (-br2 * t).exp()
        }
    };
    chunked_accumulate(
        samples,
        4096,
        threads,
        |range| {
            let mut acc = MomentAccumulator::default();
            for i in range {
                let mut rng = CounterRng::new(seed, i);
                let y: f64 = (-n_trunc..=n_trunc)
                    .filter(|n| n.abs() != k)
                    .map(|n| rng.exponential(freq_slot(n)) / japanese_bracket(n).powi(2))
                    .sum();
                acc.push(survival((m - y) / (s * s)) - survival((m - y) * (s * s)));
            }
            acc
        },
        MomentAccumulator::merge,
        MomentAccumulator::default(),
    )
    .estimate()
}

/// p_0(m) from a tabulated curve.
pub fn p0_at(m: f64, p0: &DensityCurve) -> Result<f64, MassError> {
    p0.at(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundWindow {
    pub m_lo: f64,
    pub m_hi: f64,
    /// (x, C_0(x)) with C_0(x) = min over computed N of
    /// int_{x/2}^x P_N(x - y/<N>^2) dy
    pub c0_curve: Vec<(f64, f64)>,
}

/// Numerical window around m on which the shell lower-bound integrals stay
/// positive uniformly over N <= 64.
pub fn uniform_lower_bound_window(m: f64) -> LowerBoundWindow {
    let n_list = [2i64, 4, 8, 16, 32, 64];
    let curves: Vec<(i64, DensityCurve)> = n_list
        .iter()
        .map(|&n| (n, default_curve(ModeSet::AllExcept(n))))
        .collect();
    let xs: Vec<f64> = (0..=40).map(|i| m * (0.5 + i as f64 * 0.0375)).collect();
    let c0_curve: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            let c0 = curves
                .iter()
                .map(|(n, pk)| {
                    let br2 = japanese_bracket(*n).powi(2);
                    let steps = 400usize;
                    let h = (x / 2.0) / steps as f64;
                    let vals: Vec<f64> = (0..=steps)
                        .map(|i| {
                            let y = x / 2.0 + i as f64 * h;
                            pk.at(x - y / br2).unwrap_or(0.0)
                        })
                        .collect();
                    trapezoid(&vals, h)
                })
                .fold(f64::INFINITY, f64::min);
            (x, c0)
        })
        .collect();
    // maximal positive window containing m
    let mut m_lo = m;
    let mut m_hi = m;
    for &(x, c0) in c0_curve.iter() {
        if c0 > 0.0 {
            if x < m_lo {
                m_lo = x;
            }
            if x > m_hi {
                m_hi = x;
            }
        }
    }
    LowerBoundWindow {
        m_lo,
        m_hi,
        c0_curve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_function_basics() {
        let cf = CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(0), 128));
        assert_eq!(cf.eval(0.0), Complex64::new(1.0, 0.0));
        for &xi in &[0.5, 2.0, 17.0, 150.0] {
            assert!(cf.eval(xi).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn empirical_char_function() {
        // E[e^{i xi mass}] over truncated samples matches the truncated product
        use crate::rng::{freq_slot, CounterRng};
        let k = 64i64;
        let cf = CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(0), k).without_tail());
        let n = 40_000u64;
        for &xi in &[0.5f64, 1.0, 2.0] {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut sq = 0.0;
            for i in 0..n {
                let mut rng = CounterRng::new(99, i);
                let mass: f64 = (-k..=k)
                    .map(|f| rng.exponential(freq_slot(f)) / japanese_bracket(f).powi(2))
                    .sum();
                let z = Complex64::new(0.0, xi * mass).exp();
                acc += z;
                sq += 1.0; // |z| = 1, crude variance bound
            }
            let emp = acc / n as f64;
            let se = (sq / n as f64 / n as f64).sqrt();
            let diff = (emp - cf.eval(xi)).norm();
            assert!(diff < 4.0 * se.max(1e-3), "xi={xi}: diff {diff}");
        }
    }

    #[test]
    fn p0_normalization_and_mean() {
        let cf = CharFunction::new(CharFunctionSpec::new(ModeSet::TailFrom(0), DEFAULT_CUTOFF));
        let curve = invert_density(&cf, DEFAULT_X_MAX, DEFAULT_DX, DEFAULT_XI_MAX, DEFAULT_DXI)
            .unwrap();
        assert!((curve.total_mass() - 1.0).abs() < 1e-6, "{}", curve.total_mass());
        let series = PI / PI.tanh();
        assert!((curve.mean() - series).abs() < 1e-4, "{}", curve.mean());
        assert!(curve.values.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn shell_k_upper_shape() {
        // value * <k>^2 bounded over a few k
        let p0 = default_curve(ModeSet::TailFrom(0));
        let mut worst: f64 = 0.0;
        for k in [1i64, 4, 16] {
            let pk = default_curve(ModeSet::AllExcept(k));
            let s = shell_limit_k(1.0, k, &pk);
            assert!(s.limit > s.lower_bound && s.lower_bound > 0.0);
            worst = worst.max(s.limit * japanese_bracket(k).powi(2));
        }
        // 2 * ||P_k||_inf is the analytic cap; p0 sup is a proxy for it
        let cap = 2.0 * p0.values.iter().cloned().fold(0.0, f64::max) * 1.5;
        assert!(worst < cap, "{worst} vs {cap}");
    }
}
