//! Structural invariants checked on randomized fields via proptest.

use dnls_lab::functionals::{
    convolution_sum, energy, f_n, f_n_reference, g_decomposition, g_decomposition_reference,
    mass, momentum, projected_quadrilinear_complex, scaled_chaos, CoefficientScaling,
    QuadratureGrid,
};
use dnls_lab::torus_field::{
    japanese_bracket, project_dyadic, project_leq, project_mask, sample_gaussian_field,
    scale_frequency, FourierField, ProjectionMask,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn field_strategy() -> impl Strategy<Value = FourierField> {
    (any::<u64>(), any::<u64>(), 1i64..=8).prop_map(|(seed, idx, n_max)| {
        sample_gaussian_field(seed, idx, n_max)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_and_grid_realness(u in field_strategy()) {
        let grid = QuadratureGrid::for_sextic(u.n_max());
        let m = grid.mass_grid(&u);
        prop_assert!((mass(&u) - m.value).abs() < 1e-12 * mass(&u).max(1.0));
        prop_assert!(m.imag_residue < 1e-12);
        let p = grid.momentum_grid(&u);
        prop_assert!((momentum(&u) - p.value).abs() < 1e-10 * momentum(&u).abs().max(1.0));
        let e = grid.energy_grid(&u);
        prop_assert!((energy(&u) - e.value).abs() < 1e-10 * energy(&u).abs().max(1.0));
    }

    #[test]
    fn frequency_scaling_inverts(u in field_strategy(), k in 0i64..=6, s in 0.2f64..5.0) {
        let there = scale_frequency(&u, k, s).unwrap();
        let back = scale_frequency(&there, k, 1.0 / s).unwrap();
        for (n, g) in u.iter_g() {
            prop_assert!((back.g(n) - g).norm() < 1e-14 * (1.0 + g.norm()));
        }
        // mass moves only through the +-k pair
        let r = if k == 0 {
            u.g(0).norm_sqr()
        } else {
            u.g(k).norm_sqr() + u.g(-k).norm_sqr()
        };
        let expect = (s * s - 1.0) * r / japanese_bracket(k).powi(2);
        prop_assert!((mass(&there) - mass(&u) - expect).abs() < 1e-12 * (1.0 + mass(&u)));
    }

    #[test]
    fn mask_complement_partitions(u in field_strategy(), picks in proptest::collection::vec(0i64..=8, 0..5)) {
        let mut members: Vec<i64> = picks
            .iter()
            .flat_map(|&n| if n == 0 { vec![0] } else { vec![n, -n] })
            .filter(|n| n.abs() <= u.n_max())
            .collect();
        members.sort_unstable();
        members.dedup();
        let q = ProjectionMask::new(members).unwrap();
        let comp = q.complement(u.n_max());
        let a = project_mask(&u, &q);
        let b = project_mask(&u, &comp);
        for (n, g) in u.iter_g() {
            prop_assert!((a.g(n) + b.g(n) - g).norm() < 1e-15);
            prop_assert!(q.contains(n) != comp.contains(n));
        }
        // idempotence
        let aa = project_mask(&a, &q);
        for (n, g) in a.iter_g() {
            prop_assert!((aa.g(n) - g).norm() < 1e-15);
        }
    }

    #[test]
    fn dyadic_blocks_partition(seed in any::<u64>(), idx in any::<u64>()) {
        let u = sample_gaussian_field(seed, idx, 8);
        let mut rebuilt = FourierField::zero(8);
        rebuilt.set_g(0, u.g(0));
        for &n in &[1i64, 2, 4, 8] {
            let block = project_dyadic(&u, n);
            for (m, g) in block.iter_g() {
                rebuilt.set_g(m, rebuilt.g(m) + g);
            }
        }
        let leq = project_leq(&u, 8);
        for (n, g) in leq.iter_g() {
            prop_assert!((rebuilt.g(n) - g).norm() < 1e-15);
        }
    }

    #[test]
    fn chaos_matches_reference(u in field_strategy()) {
        let n = u.n_max();
        let fast = f_n(&u, n);
        let slow = f_n_reference(&u, n);
        prop_assert!((fast - slow).abs() < 1e-10 * (1.0 + fast.abs()));
    }

    #[test]
    fn projected_terms_sum_to_chaos(u in field_strategy(), members in proptest::collection::vec(0i64..=8, 0..4)) {
        let mut ms: Vec<i64> = members
            .iter()
            .flat_map(|&n| if n == 0 { vec![0] } else { vec![n, -n] })
            .filter(|n| n.abs() <= u.n_max())
            .collect();
        ms.sort_unstable();
        ms.dedup();
        let q = ProjectionMask::new(ms).unwrap();
        let comp = q.complement(u.n_max());
        let mut total = Complex64::new(0.0, 0.0);
        for bits in 0..16u32 {
            let pick = |i: u32| if bits >> i & 1 == 0 { &q } else { &comp };
            total += projected_quadrilinear_complex(
                &u,
                u.n_max(),
                [pick(0), pick(1), pick(2), pick(3)],
            );
        }
        let f = f_n(&u, u.n_max());
        prop_assert!((total.re - f).abs() < 1e-10 * (1.0 + f.abs()));
        prop_assert!(total.im.abs() < 1e-10);
    }

    #[test]
    fn g_decomposition_invariants(u in field_strategy(), k in 0i64..=8, s in 0.3f64..3.0) {
        let n = u.n_max();
        let parts = g_decomposition(&u, n, k);
        let reference = g_decomposition_reference(&u, n, k);
        for j in 0..5 {
            prop_assert!((parts[j] - reference[j]).abs() < 1e-9 * (1.0 + parts[j].abs()));
        }
        let total: f64 = parts.iter().sum();
        let f = f_n(&u, n);
        prop_assert!((total - f).abs() < 1e-10 * (1.0 + f.abs()));
        // homogeneity under the +-k pair scaling
        let scaled = scale_frequency(&u, k, s).unwrap();
        let parts_s = g_decomposition(&scaled, n, k);
        for j in 0..5 {
            let expect = s.powi(j as i32) * parts[j];
            prop_assert!((parts_s[j] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
        // top coefficient in closed form
        if k >= 1 && k <= n {
            let bk4 = japanese_bracket(k).powi(4);
            let closed = 1.5 * k as f64 * (u.g(k).norm_sqr().powi(2) - u.g(-k).norm_sqr().powi(2)) / bk4;
            prop_assert!((parts[4] - closed).abs() < 1e-10 * (1.0 + closed.abs()));
        }
    }

    #[test]
    fn scaled_chaos_consistency(u in field_strategy(), k in 0i64..=6, s in 0.3f64..3.0) {
        let n = u.n_max();
        let ones = CoefficientScaling::constant(n, 1.0);
        prop_assert!((scaled_chaos(&u, n, &ones) - f_n(&u, n)).abs() < 1e-12);
        let c = CoefficientScaling::from_fn(n, |m| if m.abs() == k { s } else { 1.0 });
        let via_scaling = f_n(&scale_frequency(&u, k, s).unwrap(), n);
        let via_coeffs = scaled_chaos(&u, n, &c);
        prop_assert!((via_scaling - via_coeffs).abs() < 1e-10 * (1.0 + via_scaling.abs()));
    }
}

#[test]
fn convolution_sum_symmetry_and_size() {
    let s0 = convolution_sum(0);
    for &n in &[1i64, 5, 40, 300] {
        let sp = convolution_sum(n);
        let sm = convolution_sum(-n);
        assert!((sp - sm).abs() < 1e-14);
        assert!(sp <= s0);
        let scaled = sp * japanese_bracket(n).powi(2);
        assert!((1.0..=8.0).contains(&scaled), "S_n <n>^2 = {scaled}");
    }
}

#[test]
fn sampling_is_deterministic() {
    let a = sample_gaussian_field(42, 7, 16);
    let b = sample_gaussian_field(42, 7, 16);
    for (n, g) in a.iter_g() {
        assert_eq!(g, b.g(n));
    }
    // lower-cutoff sample is the restriction of the higher-cutoff one
    let small = sample_gaussian_field(42, 7, 8);
    for (n, g) in small.iter_g() {
        assert_eq!(g, b.g(n));
    }
}
