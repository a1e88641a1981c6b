use std::f64::consts::PI;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skein::asymptotics::lobachevsky;
use skein::jones::jones_borromean;
use skein::qarith::{brace, brace_factorial_log, quantum_int, RootContext};
use skein::skein::{
    admissible, admissible_six, bracket_cheby, edge_weight, sixj, theta_appendix, ColorSixTuple, ColorTriple,
    Coefficients, Normalization,
};

fn odd_level() -> impl Strategy<Value = u32> {
    (2u32..=60).prop_map(|h| 2 * h + 1)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn quantum_int_sine_symmetries(r in odd_level(), frac in 0.0f64..=1.0) {
        let ctx = RootContext::so3(r).unwrap();
        let n = (frac * f64::from(r)).round() as i64;
        prop_assert!((quantum_int(&ctx, n) + quantum_int(&ctx, -n)).abs() < 1e-12);
        // [r-n] = -[n]: at A = e^{iπ/r}, sin(2π(r-n)/r) = -sin(2πn/r)
        prop_assert!((quantum_int(&ctx, i64::from(r) - n) + quantum_int(&ctx, n)).abs() < 1e-12);
        prop_assert!(((quantum_int(&ctx, i64::from(r) - n)).abs() - quantum_int(&ctx, n).abs()).abs() < 1e-12);
    }

    #[test]
    fn quantum_int_times_brace_one(r in odd_level(), frac in 0.0f64..1.0) {
        let ctx = RootContext::so3(r).unwrap();
        let n = (frac * f64::from(r)).floor() as i64;
        let lhs = quantum_int(&ctx, n) * brace(&ctx, 1).unwrap();
        prop_assert!((lhs - brace(&ctx, n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_brackets_pair_across_the_middle(r in odd_level(), frac in 0.0f64..1.0) {
        let ctx = RootContext::so3(r).unwrap();
        let m = (r - 1) / 2;
        let i = ((frac * f64::from(m)).floor() as u32).min(m - 1);
        prop_assert!((bracket_cheby(&ctx, m + i) - bracket_cheby(&ctx, m - 1 - i)).abs() < 1e-12);
    }

    #[test]
    fn brace_factorial_log_matches_linear(r in odd_level(), frac in 0.0f64..1.0) {
        let ctx = RootContext::so3(r).unwrap();
        let j = (frac * f64::from(r)).floor() as u32;
        let linear: f64 = (1..=i64::from(j)).map(|k| brace(&ctx, k).unwrap()).product();
        let log = brace_factorial_log(&ctx, j).unwrap();
        prop_assume!(linear.is_normal());
        prop_assert!(rel_close(log.log_abs(), linear.abs().ln(), 1e-9) || (log.log_abs() - linear.abs().ln()).abs() < 1e-12);
        prop_assert_eq!(f64::from(log.sign()), linear.signum());
    }

    #[test]
    fn borromean_is_symmetric(h in 3u32..=30, a in 1i64..=30, b in 1i64..=30, c in 1i64..=30) {
        let r = 2 * h + 1;
        let m = i64::from(h);
        let ctx = RootContext::so3(r).unwrap();
        let (a, b, c) = (a.min(m), b.min(m), c.min(m));
        let base = jones_borromean(&ctx, [a, b, c]).unwrap();
        for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            let v = jones_borromean(&ctx, perm).unwrap();
            prop_assert!((v - base).norm() <= 1e-12 * base.norm().max(1.0), "{:?}: {} vs {}", perm, v, base);
        }
        prop_assert!(base.im.abs() <= 1e-9 * base.norm().max(1.0));
    }

    #[test]
    fn lobachevsky_odd_and_periodic(theta in -10.0f64..10.0) {
        prop_assert!((lobachevsky(-theta) + lobachevsky(theta)).abs() < 1e-12);
        prop_assert!((lobachevsky(theta + PI) - lobachevsky(theta)).abs() < 1e-12);
    }

    #[test]
    fn lobachevsky_half_turn_identity(theta in -4.0f64..4.0) {
        let lhs = lobachevsky(theta + PI / 2.0);
        let rhs = 0.5 * lobachevsky(2.0 * theta) - lobachevsky(theta);
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }
}

#[test]
fn lobachevsky_half_turn_identity_on_grid() {
    for k in -2000..=2000 {
        let theta = f64::from(k) * PI / 1000.0;
        let lhs = lobachevsky(theta + PI / 2.0);
        let rhs = 0.5 * lobachevsky(2.0 * theta) - lobachevsky(theta);
        assert!((lhs - rhs).abs() < 1e-11, "θ = {theta}");
    }
}

fn random_admissible(rng: &mut StdRng, r: u32) -> ColorSixTuple {
    loop {
        let six: [u32; 6] = std::array::from_fn(|_| rng.gen_range(0..=r - 2));
        let six = ColorSixTuple::from(six);
        if admissible_six(r, six) {
            return six;
        }
    }
}

#[test]
fn prime_involution_symmetries() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for r in (5..=25).step_by(2) {
        let ctx = RootContext::so3(r).unwrap();
        let coeffs = Coefficients::new(&ctx, Normalization::Appendix);
        let p = |x: u32| r - 2 - x;
        for _ in 0..1000 {
            let s = random_admissible(&mut rng, r);
            let ColorSixTuple { i, j, k, l, m, n } = s;

            assert!((edge_weight(&ctx, p(i)) - edge_weight(&ctx, i)).abs() <= 1e-9 * edge_weight(&ctx, i).abs());

            assert!(admissible(r, p(i), p(j), k));
            let t = theta_appendix(&ctx, ColorTriple(i, j, k)).unwrap();
            let tp = theta_appendix(&ctx, ColorTriple(p(i), p(j), k)).unwrap();
            assert!(rel_close(t, tp, 1e-9), "r={r} {s:?}: {t} vs {tp}");

            let base = coeffs.sixj(s.to_array());
            let first = [i, j, k, p(l), p(m), p(n)];
            let second = [p(i), p(j), k, p(l), p(m), n];
            for other in [first, second] {
                assert!(admissible_six(r, other.into()), "r={r} {other:?}");
                let v = coeffs.sixj(other);
                assert!(rel_close(base, v, 1e-9) || (base - v).abs() < 1e-12, "r={r} {s:?} -> {other:?}: {base} vs {v}");
            }
            checked += 1;
        }
    }
    assert!(checked >= 10_000);
}

#[test]
fn level_three_coefficients_are_one() {
    let ctx = RootContext::so3(3).unwrap();
    for i in [0, 1] {
        assert!((edge_weight(&ctx, i) - 1.0).abs() < 1e-12);
    }
    for t in [ColorTriple(0, 0, 0), ColorTriple(1, 1, 0)] {
        assert!((theta_appendix(&ctx, t).unwrap() - 1.0).abs() < 1e-12);
    }
    for six in [[0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 1, 1], [1, 1, 0, 1, 1, 0]] {
        let v = sixj(&ctx, six.into(), Normalization::Appendix).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{six:?}: {v}");
    }
}

#[test]
fn both_normalizations_are_finite() {
    let mut rng = StdRng::seed_from_u64(7);
    for r in [5, 9, 13, 21] {
        let ctx = RootContext::so3(r).unwrap();
        for _ in 0..200 {
            let s = random_admissible(&mut rng, r);
            for norm in [Normalization::Section2, Normalization::Appendix] {
                assert!(sixj(&ctx, s, norm).unwrap().is_finite());
            }
        }
    }
}
