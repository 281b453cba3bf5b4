use jacobiflow::jacobi::{
    accumulation_obstruction, closed_form_field, combine_sum_field, derived_field, gradient_residual,
    identity_residual, solve_membership, solve_power_membership, unit_box, DerivedMode, ExprProfile, Family,
    MembershipStatus, ObstructionStatus,
};
use jacobiflow::{directional_derivative, Rational, SmoothExpr, TruncSeries, VectorFieldExpr};

fn e(t: &str, m: usize) -> SmoothExpr {
    SmoothExpr::parse(t, m).unwrap()
}

fn s(t: &str, m: usize, n: u32) -> TruncSeries {
    TruncSeries::from_expr(&e(t, m), n).unwrap()
}

fn field(t: &str) -> VectorFieldExpr {
    VectorFieldExpr::parse(t).unwrap()
}

#[test]
fn witness_for_a_square() {
    let r = solve_membership(&s("x^2", 1, 8)).unwrap();
    assert_eq!(r.status, MembershipStatus::Member);
    assert_eq!(r.witness.unwrap()[0], s("x/2", 1, 8));
}

#[test]
fn homogeneous_member_agrees_with_euler_oracle() {
    let f = s("x^2*y + y^3", 2, 8);
    let r = solve_membership(&f).unwrap();
    assert_eq!(r.status, MembershipStatus::Member);
    assert!(r.residual.is_zero());
    // The witness need not be the Euler field, but both must satisfy the identity exactly.
    let euler = [s("x/3", 2, 8), s("y/3", 2, 8)];
    assert!(gradient_residual(&f, &f, &euler).unwrap().is_zero());
    assert!(gradient_residual(&f, &f, &r.witness.unwrap()).unwrap().is_zero());
}

#[test]
fn power_membership_examples() {
    let r = solve_power_membership(&s("x", 1, 6), 3).unwrap();
    assert_eq!(r.status, MembershipStatus::Member);
    assert_eq!(r.witness.unwrap()[0], s("x^3", 1, 6));
    assert_eq!(solve_power_membership(&s("x^2", 1, 8), 2).unwrap().status, MembershipStatus::Member);
    assert_eq!(
        solve_power_membership(&TruncSeries::zero(1, 4), 1).unwrap().status,
        MembershipStatus::Member
    );
    assert!(solve_power_membership(&s("x^3", 1, 6), 3).is_err());
}

#[test]
fn non_quasihomogeneous_germ_is_reported_as_bounded_non_member() {
    let r = solve_membership(&s("x^5 + y^5 + x^2*y^2", 2, 10)).unwrap();
    assert_eq!(r.status, MembershipStatus::NonMemberUpToN);
    assert!(r.witness.is_none() || !r.residual.is_zero());
}

/// `f o h` for `h(x, y) = (x + 2y + y^2, -x + y + xy)`, a local diffeomorphism at 0.
#[test]
fn membership_is_invariant_under_coordinate_changes() {
    let h = [e("x + 2*y + y^2", 2), e("-x + y + x*y", 2)];
    for f in ["x^3 + y^4", "x^2*y + y^4", "x^2 + y^5", "x^3 + x*y^3"] {
        let fh = e(f, 2).substitute(&h).unwrap();
        let r = solve_membership(&TruncSeries::from_expr(&fh, 8).unwrap()).unwrap();
        assert_eq!(r.status, MembershipStatus::Member, "{f} o h");
    }
}

/// `f^k` member implies `(f + f^2)^k` member.
#[test]
fn power_condition_is_invariant_under_left_changes() {
    for (f, k) in [("x^2 + y^3", 1u32), ("x^2 + y^2", 2), ("x*y", 2)] {
        let phi_f = format!("({f}) + ({f})^2");
        assert_eq!(solve_power_membership(&s(f, 2, 8), k).unwrap().status, MembershipStatus::Member);
        assert_eq!(
            solve_power_membership(&s(&phi_f, 2, 8), k).unwrap().status,
            MembershipStatus::Member,
            "{phi_f} ^ {k}"
        );
    }
}

#[test]
fn closed_form_families() {
    let f = e("x^2 + y^2", 2);
    assert_eq!(closed_form_field(&f, &Family::Homogeneous(2)).unwrap(), field("x/2; y/2"));
    let f = e("x1", 2);
    assert_eq!(closed_form_field(&f, &Family::Regular).unwrap(), field("x1; 0"));
    let f = e("x^3 + x*y^3", 2);
    let chain = closed_form_field(&f, &Family::Chain { a: vec![3, 3], b: vec![1] }).unwrap();
    assert_eq!(chain, field("x/3; 2*y/9"));
    let dd = directional_derivative(&f, &chain).unwrap();
    assert_eq!(TruncSeries::from_expr(&(&dd - &f), 6).unwrap(), TruncSeries::zero(2, 6));
    let f = e("x^2 - y^4", 2);
    let br = Family::Brieskorn { exponents: vec![2, 4], signs: vec![1, -1] };
    let fb = closed_form_field(&f, &br).unwrap();
    assert!(identity_residual(&f, &fb, &unit_box(2), 11).unwrap() <= 1e-12);
    assert!(closed_form_field(&e("x^2 + y^3", 2), &Family::Homogeneous(2)).is_err());
}

#[test]
fn block_sums_and_derived_fields() {
    let (h, hf) = combine_sum_field(&e("x^3", 1), &field("x/3"), &e("x^4", 1), &field("x/4")).unwrap();
    assert_eq!(h, e("x^3 + y^4", 2));
    assert!(identity_residual(&h, &hf, &unit_box(2), 11).unwrap() <= 1e-10);
    assert!(combine_sum_field(&e("x^3", 1), &field("x/2"), &e("x^4", 1), &field("x/4")).is_err());

    let d = derived_field(&e("x^2", 1), &field("x/2"), DerivedMode::Power(2), &unit_box(1)).unwrap();
    assert_eq!(d.f, e("x^4", 1));
    assert_eq!(d.field, field("x/4"));
    let d = derived_field(&e("x", 1), &field("x"), DerivedMode::Flat, &unit_box(1)).unwrap();
    assert_eq!(d.f, e("flatexp(x)", 1));
    assert!(d.residual <= 1e-8);
}

#[test]
fn obstruction_search_on_polynomials_finds_nothing() {
    for t in ["x^2", "x^3 - 3*x"] {
        let p = ExprProfile::new(e(t, 1)).unwrap();
        let rep = accumulation_obstruction(&p, -2.0, 2.0, 1e-6).unwrap();
        assert_eq!(rep.status, ObstructionStatus::NoObstructionFound);
    }
}

#[test]
fn constant_term_is_rejected() {
    assert!(solve_membership(&s("1 + x", 1, 4)).is_err());
    let c = TruncSeries::constant(2, 3, Rational::from_integer(2.into()));
    assert!(solve_membership(&c).is_err());
}
