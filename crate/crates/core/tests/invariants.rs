use proptest::prelude::*;
use sphchaos::diagrams::enumerate_eta;
use sphchaos::mcstats::{k_statistics, monomial_to_hermite, TransformSpec};
use sphchaos::moments::{gauss_legendre_rule, SphereQuadrature};
use sphchaos::specfun::{hermite_prob, legendre_eval};
use sphchaos::wigner::{clebsch_gordan, threej};

fn sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn legendre_is_bounded(l in 0usize..400, t in -1.0f64..=1.0) {
        let p = legendre_eval(l, t).unwrap();
        prop_assert!(p.abs() <= 1.0 + 1e-12);
        prop_assert!((legendre_eval(l, -t).unwrap() - sign(l) * p).abs() < 1e-12);
    }

    #[test]
    fn hermite_three_term_recurrence(q in 1usize..30, x in -6.0f64..6.0) {
        let lhs = hermite_prob(q + 1, x);
        let rhs = x * hermite_prob(q, x) - q as f64 * hermite_prob(q - 1, x);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn threej_symmetries(l1 in 0usize..8, l2 in 0usize..8, l3 in 0usize..8, m1 in -7i32..=7, m2 in -7i32..=7) {
        let m3 = -m1 - m2;
        let v = threej(l1, l2, l3, m1, m2, m3);
        let phase = sign(l1 + l2 + l3);
        prop_assert!((threej(l2, l3, l1, m2, m3, m1) - v).abs() < 1e-12);
        prop_assert!((threej(l2, l1, l3, m2, m1, m3) - phase * v).abs() < 1e-12);
        prop_assert!((threej(l1, l2, l3, -m1, -m2, -m3) - phase * v).abs() < 1e-12);
    }

    #[test]
    fn clebsch_gordan_is_bounded(l1 in 0usize..7, l2 in 0usize..7, l3 in 0usize..13, m1 in -6i32..=6, m2 in -6i32..=6) {
        prop_assert!(clebsch_gordan(l1, m1, l2, m2, l3, m1 + m2).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn gauss_rule_integrates_monomials(n in 1usize..60, k in 0u32..200) {
        prop_assume!((k as usize) < 2 * n);
        let got: f64 = gauss_legendre_rule(n).iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
        let want = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
        prop_assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn sphere_rule_exactness(degree in 0usize..40, a in 0usize..40, m in 0usize..40) {
        prop_assume!(a + m <= degree);
        let grid = SphereQuadrature::exact_for(degree);
        // t^a (1-t^2)^{m/2} cos(mφ) is a polynomial of degree a+m in Cartesian coordinates
        let got = grid.integrate(|t, phi| t.powi(a as i32) * (1.0 - t * t).powf(m as f64 / 2.0) * (m as f64 * phi).cos());
        let want = if m == 0 && a % 2 == 0 { 4.0 * std::f64::consts::PI / (a + 1) as f64 } else { 0.0 };
        prop_assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn monomial_to_hermite_preserves_values(b in prop::collection::vec(-2.0f64..2.0, 1..12), x in -3.0f64..3.0) {
        let beta = monomial_to_hermite(&b).unwrap();
        let direct = TransformSpec::Monomial(b).eval(x);
        let via = TransformSpec::Hermite(beta).eval(x);
        prop_assert!((direct - via).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn k_statistics_shift_and_scale(xs in prop::collection::vec(-10.0f64..10.0, 12..60), shift in -5.0f64..5.0, scale in 0.2f64..3.0) {
        let a = k_statistics(&xs, 0, 0).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let b = k_statistics(&ys, 0, 0).unwrap();
        prop_assert!((b.mean - (scale * a.mean + shift)).abs() < 1e-9);
        prop_assert!((b.k2 - scale.powi(2) * a.k2).abs() <= 1e-8 * b.k2.abs().max(1.0));
        prop_assert!((b.k3 - scale.powi(3) * a.k3).abs() <= 1e-7 * (scale.powi(3) * a.k2.powf(1.5)).max(1.0));
        prop_assert!((b.k4 - scale.powi(4) * a.k4).abs() <= 1e-7 * (scale.powi(4) * a.k2.powi(2)).max(1.0));
    }
}

#[test]
fn eta_families_are_consistent() {
    for q in 1..=8u32 {
        for fam in enumerate_eta(q).unwrap() {
            assert_eq!(fam.eta.row_sums(), [q; 4]);
            assert!(fam.multiplicity >= 1.0 && fam.multiplicity.fract() == 0.0);
            assert_eq!(fam.connected, fam.eta.connected());
            if fam.connected {
                assert!(fam.eta.opposite_edges_equal());
            }
        }
    }
}
