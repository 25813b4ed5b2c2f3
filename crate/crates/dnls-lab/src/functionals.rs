//! Conserved quantities and the quartic energy remainder.
//!
//! Integrals over the torus carry the 1/(2pi) normalization. Every quartic
//! and sextic functional has two evaluation paths: exact Fourier-space
//! convolution (the default) and dealiased grid quadrature (for
//! cross-checks). The convolution path is O(N^2) per field; a naive O(N^3)
//! loop for the energy remainder is kept as a reference oracle for small N.

use crate::torus_field::{japanese_bracket, FourierField, ProjectionMask};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Centered convolution: a over [-p, p], b over [-q, q], result over
/// [-(p+q), p+q].
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Weighted coefficients a_n = g_n/<n> restricted to |n| <= cutoff,
/// centered, length 2*min(cutoff, n_max')+1 where n_max' is the storage
/// cutoff.
fn weighted_upto(u: &FourierField, cutoff: i64) -> Vec<Complex64> {
    let c = cutoff.min(u.n_max());
    (-c..=c).map(|n| u.weighted_coefficient(n)).collect()
}

/// Squared L^2 norm: sum |g_n|^2 / <n>^2.
pub fn mass(u: &FourierField) -> f64 {
    u.iter_g()
        .map(|(n, g)| g.norm_sqr() / (japanese_bracket(n).powi(2)))
        .sum()
}

/// (1/2) int |u|^4 + int i conj(u) u_x.
pub fn momentum(u: &FourierField) -> f64 {
    let a = weighted_upto(u, u.n_max());
    let a2 = convolve(&a, &a);
    let quartic: f64 = a2.iter().map(|c| c.norm_sqr()).sum();
    let linear: f64 = u
        .iter_g()
        .map(|(n, g)| n as f64 * g.norm_sqr() / japanese_bracket(n).powi(2))
        .sum();
    0.5 * quartic - linear
}

/// int |u_x|^2 + (3/4) i int conj(u)^2 (u^2)_x + (1/2) int |u|^6.
/// Equals ||u_x||^2 - f_N(u) + (1/2)||u||_{L^6}^6 for the stored truncation.
pub fn energy(u: &FourierField) -> f64 {
    let kinetic: f64 = u
        .iter_g()
        .map(|(n, g)| (n * n) as f64 * g.norm_sqr() / japanese_bracket(n).powi(2))
        .sum();
    kinetic - f_n(u, u.n_max()) + 0.5 * l6_norm_sixth(u)
}

/// int |u|^6 = sum over sigma of |coeffs of u^3|^2.
pub fn l6_norm_sixth(u: &FourierField) -> f64 {
    let a = weighted_upto(u, u.n_max());
    let a2 = convolve(&a, &a);
    let a3 = convolve(&a2, &a);
    a3.iter().map(|c| c.norm_sqr()).sum()
}

/// Energy remainder: f_N(u) = -(3i/2) int (P_N conj u)^2 (P_N u)(P_N u)_x,
/// evaluated as the exactly real quadruple sum
/// (3/4) sum_{n1+n2=n3+n4, |ni|<=N} (n1+n2) prod g / prod <n_i>.
pub fn f_n(u: &FourierField, cutoff: i64) -> f64 {
    let a = weighted_upto(u, cutoff);
    let c = (a.len() as i64 - 1) / 2;
    let a2 = convolve(&a, &a);
    a2.iter()
        .enumerate()
        .map(|(i, v)| {
            let sigma = i as i64 - 2 * c;
            0.75 * sigma as f64 * v.norm_sqr()
        })
        .sum()
}

/// Naive O(N^3) reference for f_n; cost-guarded to small cutoffs.
pub fn f_n_reference(u: &FourierField, cutoff: i64) -> f64 {
    assert!(cutoff <= 16, "reference loop is O(N^3); use f_n");
    let c = cutoff.min(u.n_max());
    let mut acc = Complex64::new(0.0, 0.0);
    for n1 in -c..=c {
        for n2 in -c..=c {
            for n3 in -c..=c {
                let n4 = n1 + n2 - n3;
                if n4.abs() > c {
                    continue;
                }
                let num = u.g(n1) * u.g(n2) * u.g(n3).conj() * u.g(n4).conj();
                let den = japanese_bracket(n1)
                    * japanese_bracket(n2)
                    * japanese_bracket(n3)
                    * japanese_bracket(n4);
                acc += 0.75 * (n1 + n2) as f64 * num / den;
            }
        }
    }
    debug_assert!(acc.im.abs() < 1e-9);
    acc.re
}

/// Even, bounded per-frequency scaling c(n) = c(-n), stored by |n|.
#[derive(Debug, Clone)]
pub struct CoefficientScaling {
    vals: Vec<f64>, // index |n|
}

impl CoefficientScaling {
    pub fn constant(n_max: i64, t: f64) -> Self {
        CoefficientScaling {
            vals: vec![t; n_max as usize + 1],
        }
    }

    pub fn from_fn(n_max: i64, f: impl Fn(i64) -> f64) -> Self {
        CoefficientScaling {
            vals: (0..=n_max).map(f).collect(),
        }
    }

    pub fn at(&self, n: i64) -> f64 {
        let a = n.unsigned_abs() as usize;
        if a < self.vals.len() {
            self.vals[a]
        } else {
            0.0
        }
    }

    /// The bound M with |c(n)| <= M.
    pub fn bound(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| v.abs().max(m))
    }

    pub fn apply(&self, u: &FourierField) -> FourierField {
        let mut out = u.clone();
        for (n, g) in u.iter_g() {
            out.set_g(n, g * self.at(n));
        }
        out
    }
}

/// Fourth-order chaos with scaled coefficients: f_n of the field with g_n
/// replaced by c(n) g_n.
pub fn scaled_chaos(u: &FourierField, cutoff: i64, c: &CoefficientScaling) -> f64 {
    f_n(&c.apply(u), cutoff)
}

/// Splits f_N(u) by the number j of quadruple indices equal to +-k:
/// returns (G_k^0, ..., G_k^4) with sum_j G_k^j = f_N(u). Extracted as the
/// degree-j coefficients of t -> f_N(u with g_{+-k} scaled by t).
pub fn g_decomposition(u: &FourierField, cutoff: i64, k: i64) -> [f64; 5] {
    assert!(k >= 0);
    let f_at = |t: f64| {
        let mut v = u.clone();
        if k <= u.n_max() {
            v.set_g(k, u.g(k) * t);
            if k > 0 {
                v.set_g(-k, u.g(-k) * t);
            }
        }
        f_n(&v, cutoff)
    };
    let (fm2, fm1, f0, f1, f2) = (f_at(-2.0), f_at(-1.0), f_at(0.0), f_at(1.0), f_at(2.0));
    [
        f0,
        (fm2 - 8.0 * fm1 + 8.0 * f1 - f2) / 12.0,
        (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * f1 - f2) / 24.0,
        (f2 - 2.0 * f1 + 2.0 * fm1 - fm2) / 12.0,
        (fm2 - 4.0 * fm1 + 6.0 * f0 - 4.0 * f1 + f2) / 24.0,
    ]
}

/// Direct tuple-counting reference for g_decomposition (small cutoffs).
pub fn g_decomposition_reference(u: &FourierField, cutoff: i64, k: i64) -> [f64; 5] {
    assert!(cutoff <= 10, "reference loop is O(N^3)");
    let c = cutoff.min(u.n_max());
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for n1 in -c..=c {
        for n2 in -c..=c {
            for n3 in -c..=c {
                let n4 = n1 + n2 - n3;
                if n4.abs() > c {
                    continue;
                }
                let j = [n1, n2, n3, n4]
                    .iter()
                    .filter(|&&n| n.abs() == k)
                    .count();
                let num = u.g(n1) * u.g(n2) * u.g(n3).conj() * u.g(n4).conj();
                let den = japanese_bracket(n1)
                    * japanese_bracket(n2)
                    * japanese_bracket(n3)
                    * japanese_bracket(n4);
                out[j] += 0.75 * (n1 + n2) as f64 * num / den;
            }
        }
    }
    out.map(|z| {
        debug_assert!(z.im.abs() < 1e-9);
        z.re
    })
}

/// -(3i/2) int d/dx(P_{Q1} u_N) P_{Q2} u_N conj(P_{Q3} u_N) conj(P_{Q4} u_N),
/// as a complex number; summing the 16 mask/complement combinations
/// reproduces f_N exactly.
pub fn projected_quadrilinear_complex(
    u: &FourierField,
    cutoff: i64,
    masks: [&ProjectionMask; 4],
) -> Complex64 {
    let c = cutoff.min(u.n_max());
    let take = |q: &ProjectionMask, derivative: bool| -> Vec<Complex64> {
        (-c..=c)
            .map(|n| {
                if q.contains(n) {
                    let a = u.weighted_coefficient(n);
                    if derivative {
                        Complex64::new(0.0, n as f64) * a
                    } else {
                        a
                    }
                } else {
                    ZERO
                }
            })
            .collect()
    };
    let d1 = take(masks[0], true);
    let v2 = take(masks[1], false);
    let v3 = take(masks[2], false);
    let v4 = take(masks[3], false);
    let c12 = convolve(&d1, &v2);
    let c34 = convolve(&v3, &v4);
    let dot: Complex64 = c12
        .iter()
        .zip(&c34)
        .map(|(x, y)| x * y.conj())
        .sum();
    Complex64::new(0.0, -1.5) * dot
}

/// Real part of the projected quadrilinear form (the full form is real; a
/// single projected term may carry an imaginary component that cancels in
/// the 16-term expansion).
pub fn projected_quadrilinear(
    u: &FourierField,
    cutoff: i64,
    masks: [&ProjectionMask; 4],
) -> f64 {
    projected_quadrilinear_complex(u, cutoff, masks).re
}

/// S_n = sum_m 1/(<m>^2 <n-m>^2), truncated at |m| <= 10^6; the omitted tail
/// is below 1e-17 and a closed-form bound on it is added back.
pub fn convolution_sum(n: i64) -> f64 {
    const M: i64 = 1_000_000;
    let mut partial: Vec<f64> = Vec::with_capacity(64);
    let mut acc = 0.0f64;
    let mut count = 0u32;
    for m in -M..=M {
        acc += 1.0 / (japanese_bracket(m).powi(2) * japanese_bracket(n - m).powi(2));
        count += 1;
        if count == 65536 {
            partial.push(acc);
            acc = 0.0;
            count = 0;
        }
    }
    partial.push(acc);
    // tail |m| > M: each side below integral of 4/x^4 from M - |n| on
    let tail = 8.0 / (3.0 * ((M - n.abs()) as f64).powi(3));
    crate::stats::pairwise_sum(&partial) + tail
}

/// Equispaced quadrature on [0, 2pi): exact for trigonometric polynomials of
/// degree < points, with the 1/(2pi) convention baked in.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureGrid {
    pub points: usize,
}

/// Value of a grid-quadrature functional together with the imaginary residue
/// that was discarded to make it real.
#[derive(Debug, Clone, Copy)]
pub struct GridEval {
    pub value: f64,
    pub imag_residue: f64,
}

impl QuadratureGrid {
    /// Enough points to integrate quartic products exactly: M >= 4 n_max + 1,
    /// rounded up to a power of two.
    pub fn for_quartic(n_max: i64) -> Self {
        QuadratureGrid {
            points: (4 * n_max as usize + 1).next_power_of_two(),
        }
    }

    /// M >= 6 n_max + 1 for sextic products.
    pub fn for_sextic(n_max: i64) -> Self {
        QuadratureGrid {
            points: (6 * n_max as usize + 1).next_power_of_two(),
        }
    }

    /// u(x_j) at the grid nodes (direct summation).
    pub fn values(&self, u: &FourierField) -> Vec<Complex64> {
        self.values_of(&weighted_upto(u, u.n_max()))
    }

    /// Values of sum a_n e^{inx} for a centered coefficient slice.
    pub fn values_of(&self, a: &[Complex64]) -> Vec<Complex64> {
        let c = (a.len() as i64 - 1) / 2;
        let m = self.points;
        (0..m)
            .map(|j| {
                let x = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                a.iter()
                    .enumerate()
                    .map(|(i, &an)| an * Complex64::new(0.0, (i as i64 - c) as f64 * x).exp())
                    .sum()
            })
            .collect()
    }

    /// (1/2pi) int f for grid samples of f.
    pub fn integrate(&self, f: &[Complex64]) -> Complex64 {
        f.iter().sum::<Complex64>() / self.points as f64
    }

    pub fn mass_grid(&self, u: &FourierField) -> GridEval {
        let v = self.values(u);
        let i = self.integrate(&v.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect::<Vec<_>>());
        GridEval { value: i.re, imag_residue: i.im.abs() }
    }

    pub fn momentum_grid(&self, u: &FourierField) -> GridEval {
        let a = weighted_upto(u, u.n_max());
        let c = (a.len() as i64 - 1) / 2;
        let ax: Vec<Complex64> = a
            .iter()
            .enumerate()
            .map(|(i, &an)| an * Complex64::new(0.0, (i as i64 - c) as f64))
            .collect();
        let v = self.values_of(&a);
        let vx = self.values_of(&ax);
        let integrand: Vec<Complex64> = v
            .iter()
            .zip(&vx)
            .map(|(z, zx)| {
                Complex64::new(0.5 * z.norm_sqr() * z.norm_sqr(), 0.0)
                    + Complex64::new(0.0, 1.0) * z.conj() * zx
            })
            .collect();
        let i = self.integrate(&integrand);
        GridEval { value: i.re, imag_residue: i.im.abs() }
    }

    pub fn energy_grid(&self, u: &FourierField) -> GridEval {
        let a = weighted_upto(u, u.n_max());
        let c = (a.len() as i64 - 1) / 2;
        let ax: Vec<Complex64> = a
            .iter()
            .enumerate()
            .map(|(i, &an)| an * Complex64::new(0.0, (i as i64 - c) as f64))
            .collect();
        let v = self.values_of(&a);
        let vx = self.values_of(&ax);
        let integrand: Vec<Complex64> = v
            .iter()
            .zip(&vx)
            .map(|(z, zx)| {
                let kin = zx.norm_sqr();
                // conj(u)^2 d/dx(u^2) = conj(u)^2 * 2 u u_x
                let mid = Complex64::new(0.0, 0.75) * z.conj() * z.conj() * 2.0 * z * zx;
                let six = 0.5 * z.norm_sqr().powi(3);
                Complex64::new(kin + six, 0.0) + mid
            })
            .collect();
        let i = self.integrate(&integrand);
        GridEval { value: i.re, imag_residue: i.im.abs() }
    }

    /// -(3i/2) int conj(u_N)^2 u_N (u_N)_x by quadrature.
    pub fn f_n_grid(&self, u: &FourierField, cutoff: i64) -> GridEval {
        let a = weighted_upto(u, cutoff);
        let c = (a.len() as i64 - 1) / 2;
        let ax: Vec<Complex64> = a
            .iter()
            .enumerate()
            .map(|(i, &an)| an * Complex64::new(0.0, (i as i64 - c) as f64))
            .collect();
        let v = self.values_of(&a);
        let vx = self.values_of(&ax);
        let integrand: Vec<Complex64> = v
            .iter()
            .zip(&vx)
            .map(|(z, zx)| Complex64::new(0.0, -1.5) * z.conj() * z.conj() * z * zx)
            .collect();
        let i = self.integrate(&integrand);
        GridEval { value: i.re, imag_residue: i.im.abs() }
    }
}
