//! Ring and derivation laws of truncated series, checked on random sparse polynomials.

use jacobiflow::{Rational, SmoothExpr, TruncSeries};
use proptest::prelude::*;

const M: usize = 2;
const N: u32 = 5;

fn series() -> impl Strategy<Value = TruncSeries> {
    prop::collection::vec(((0u32..4, 0u32..4), -6i64..=6, 1i64..=4), 0..6).prop_map(|terms| {
        TruncSeries::from_terms(
            M,
            N,
            terms
                .into_iter()
                .map(|((a, b), p, q)| (vec![a, b], Rational::new(p.into(), q.into()))),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_is_a_group(f in series(), g in series(), h in series()) {
        prop_assert_eq!(f.add(&g).unwrap(), g.add(&f).unwrap());
        prop_assert_eq!(f.add(&g).unwrap().add(&h).unwrap(), f.add(&g.add(&h).unwrap()).unwrap());
        prop_assert!(f.sub(&f).unwrap().is_zero());
        prop_assert_eq!(f.add(&f.neg()).unwrap(), TruncSeries::zero(M, N));
    }

    #[test]
    fn multiplication_is_truncated_and_distributive(f in series(), g in series(), h in series()) {
        prop_assert_eq!(f.mul(&g).unwrap(), g.mul(&f).unwrap());
        prop_assert_eq!(f.mul(&g).unwrap().mul(&h).unwrap(), f.mul(&g.mul(&h).unwrap()).unwrap());
        prop_assert_eq!(
            f.mul(&g.add(&h).unwrap()).unwrap(),
            f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap()
        );
        let p = f.mul(&g).unwrap();
        prop_assert!(p.terms().all(|(m, _)| m.degree() <= N));
    }

    #[test]
    fn partials_obey_leibniz(f in series(), g in series(), i in 0usize..M) {
        // d(fg) = f dg + g df holds up to degree N - 1: the product dropped terms of degree N + 1.
        let lhs = f.mul(&g).unwrap().partial(i).unwrap().retruncate(N - 1);
        let rhs = f
            .mul(&g.partial(i).unwrap())
            .unwrap()
            .add(&g.mul(&f.partial(i).unwrap()).unwrap())
            .unwrap()
            .retruncate(N - 1);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn text_format_round_trips(f in series()) {
        prop_assert_eq!(TruncSeries::from_text(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn expression_round_trip_and_evaluation(f in series(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = f.to_expr();
        prop_assert_eq!(TruncSeries::from_expr(&e, N).unwrap(), f.clone());
        let direct = f.eval(&[x, y]);
        prop_assert!((e.eval(&[x, y]).unwrap() - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn symbolic_derivative_matches_finite_differences() {
    let f = SmoothExpr::parse("exp(x)*sin(y) + log(1 + x^2)*cos(x*y) + flatexp(x - 2)", 2).unwrap();
    let h = 1e-5;
    for &(x, y) in &[(0.3, -0.7), (-1.2, 0.4), (0.9, 1.1)] {
        let fx = f.derive(0).unwrap().eval(&[x, y]).unwrap();
        let fy = f.derive(1).unwrap().eval(&[x, y]).unwrap();
        let cx = (f.eval(&[x + h, y]).unwrap() - f.eval(&[x - h, y]).unwrap()) / (2.0 * h);
        let cy = (f.eval(&[x, y + h]).unwrap() - f.eval(&[x, y - h]).unwrap()) / (2.0 * h);
        assert!((fx - cx).abs() < 1e-8, "{fx} vs {cx}");
        assert!((fy - cy).abs() < 1e-8, "{fy} vs {cy}");
    }
}

#[test]
fn from_expr_commutes_with_products_and_rejects_transcendentals() {
    let e = |t: &str| SmoothExpr::parse(t, 2).unwrap();
    let s = |t: &str, n: u32| TruncSeries::from_expr(&e(t), n).unwrap();
    for n in 1..=6 {
        let product = TruncSeries::from_expr(&(&e("x + y^2 - 1/3") * &e("x*y - 2*y + 5")), n).unwrap();
        assert_eq!(product, s("x + y^2 - 1/3", n).mul(&s("x*y - 2*y + 5", n)).unwrap());
    }
    assert!(s("(x + y)^2", 1).is_zero());
    assert_eq!(s("(x + y)*(x - y)", 2), s("x^2 - y^2", 2));
    assert!(TruncSeries::from_expr(&e("exp(x) - 1"), 4).is_err());
}
