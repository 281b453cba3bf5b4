use jacobiflow::confspace::{
    brute_force_parity, canonical_rotation, component_check, cyclic_shift, evaluation_map, exceptional_values,
    is_reference, shift_parity, split, unsplit, ConfigPoint, SplitPoint,
};
use jacobiflow::diffeo::Domain1D;
use jacobiflow::section::{section_circle, section_line};
use jacobiflow::{Rational, SmoothExpr};
use proptest::prelude::*;

fn r(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

/// Strictly increasing rationals in `(0, n)` with denominators up to 12.
fn increasing(n: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::btree_set(1i64..(12 * n as i64), n - 1).prop_map(|s| s.into_iter().map(|k| r(k, 12)).collect())
}

fn split_points() -> impl Strategy<Value = SplitPoint<Rational>> {
    (2usize..=7)
        .prop_flat_map(|n| (increasing(n), 0i64..(12 * n as i64)))
        .prop_map(|(d, b)| SplitPoint::new(d, r(b, 12)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_and_unsplit_are_inverse(s in split_points()) {
        let p = unsplit(&s).unwrap();
        prop_assert!(component_check(&p));
        prop_assert_eq!(split(&p).unwrap(), s);
    }

    #[test]
    fn cyclic_action_laws(s in split_points(), d1 in -20i64..20, d2 in -20i64..20) {
        let p = unsplit(&s).unwrap();
        let n = p.n() as i64;
        prop_assert_eq!(cyclic_shift(&cyclic_shift(&p, d1), d2), cyclic_shift(&p, d1 + d2));
        prop_assert_eq!(cyclic_shift(&p, n), p.clone());
        prop_assert_eq!(cyclic_shift(&p, -d1), cyclic_shift(&p, n - d1.rem_euclid(n)));
        // The distinguished component is invariant under the action, and so is the orbit representative.
        prop_assert!(component_check(&cyclic_shift(&p, d1)));
        prop_assert_eq!(canonical_rotation(&cyclic_shift(&p, d1)), canonical_rotation(&p));
    }

    #[test]
    fn parity_formula_agrees_with_inversions(n in 1usize..=12, d in -30i64..30) {
        prop_assert_eq!(shift_parity(n, d), brute_force_parity(n, d));
    }
}

#[test]
fn points_outside_the_component() {
    let p = ConfigPoint::new(vec![r(2, 1), r(1, 1), r(1, 2)]).unwrap();
    assert!(!component_check(&p));
    assert!(split(&p).is_err());
    assert!(ConfigPoint::new(vec![r(1, 2), r(5, 2)]).is_err(), "1/2 and 5/2 coincide mod 2");
    assert!(SplitPoint::new(vec![r(2, 1), r(1, 1)], r(0, 1)).is_err());
    assert!(is_reference(&ConfigPoint::<Rational>::reference(5).unwrap()));
}

#[test]
fn line_section_interpolates_and_is_monotone() {
    let phi = section_line(5, &[1.2, 3.9, 4.5]).unwrap();
    for (k, x) in [(1.0, 1.0), (2.0, 1.2), (3.0, 3.9), (4.0, 4.5), (5.0, 5.0)] {
        assert!((phi.value(k).unwrap() - x).abs() < 1e-9, "phi({k})");
    }
    // Exactly the identity off the support [0, n + 1]; the end cells are translations by
    // the accumulated bump integrals, which vanish up to rounding.
    for t in [-3.0, 0.0, 6.0, 9.0] {
        assert_eq!(phi.value(t).unwrap(), t, "identity at {t}");
    }
    for t in [0.5, 0.99, 5.01, 5.8] {
        assert!((phi.value(t).unwrap() - t).abs() < 1e-12, "near identity at {t}");
    }
    let mut prev = f64::NEG_INFINITY;
    for j in 0..=600 {
        let t = j as f64 / 100.0;
        let v = phi.value(t).unwrap();
        // A strongly compressed cell is flat to double precision near its middle, so only
        // weak monotonicity is observable in f64.
        assert!(v >= prev, "t = {t}: {v} after {prev}");
        assert!(phi.derivative(t).unwrap() >= 0.0);
        prev = v;
    }
    assert!(section_line(4, &[3.0, 2.5]).is_err());
    assert!(section_line(4, &[2.5]).is_err());
    assert!(section_line(3, &[3.0]).is_err());
}

#[test]
fn circle_section_realises_the_split_point() {
    let n = 4;
    let x = [0.7, 1.1, 3.2];
    let shift = 2.25;
    let phi = section_circle(n, &x, shift).unwrap();
    let p = evaluation_map(&phi, n).unwrap();
    let s = split(&p).unwrap();
    for (got, want) in s.deltas.iter().zip(x) {
        assert!((got - want).abs() < 1e-9);
    }
    assert!((s.base - shift).abs() < 1e-9);
    // A lift commutes with the deck translation.
    for t in [0.1, 1.7, 3.3] {
        let lhs = phi.value(t + n as f64).unwrap();
        assert!((lhs - phi.value(t).unwrap() - n as f64).abs() < 1e-9);
    }
}

/// Exceptional values move by `phi` under `phi o f o h^{-1}` with `h` affine and `phi` increasing.
#[test]
fn exceptional_values_are_natural() {
    let f = SmoothExpr::parse("x^3 - 3*x", 1).unwrap();
    let base = exceptional_values(&f, Domain1D::Interval(-2.5, 2.5)).unwrap();
    let phi = |v: f64| 2.0 * v + v.powi(3) / 20.0 + 1.0;
    // h(x) = 3x - 1, so f o h^{-1}(y) = f((y + 1)/3) on h([-2.5, 2.5]) = [-8.5, 6.5].
    let g = SmoothExpr::parse("2*x + x^3/20 + 1", 1)
        .unwrap()
        .substitute(&[f.substitute(&[SmoothExpr::parse("(x + 1)/3", 1).unwrap()]).unwrap()])
        .unwrap();
    let moved = exceptional_values(&g, Domain1D::Interval(-8.5, 6.5)).unwrap();
    assert_eq!(base.len(), moved.len());
    for (a, b) in base.iter().zip(&moved) {
        assert!((phi(*a) - b).abs() < 1e-8, "{} vs {b}", phi(*a));
    }

    let periodic = SmoothExpr::parse("sin(x) + cos(2*x)/4", 1).unwrap();
    let circle = exceptional_values(&periodic, Domain1D::Circle(std::f64::consts::TAU)).unwrap();
    assert!(circle.len() >= 2);
    assert!(exceptional_values(&periodic, Domain1D::Circle(1.0)).is_err());
}
