use num_bigint::BigInt;

use metab_core::coset::BoxIndex;
use metab_core::group::catalog;
use metab_core::interval::{make_params, Overrides};
use metab_core::realization::{glue, verify_relations, RealizedAction};
use metab_core::regularity::{dkn_verdict, fixed_point_scan, RegularityError};

#[test]
fn grid_relation_holds_numerically() {
    let p = catalog("grid:2,1,[[2]]").unwrap();
    let params = make_params("0.45", p.k(), p.d(), &Overrides::default()).unwrap();
    let a = RealizedAction::build(&p, 0, &params).unwrap();
    let lhs = p.parse_word("[f1,g1_2]").unwrap();
    let rhs = p.parse_word("g1_1^2").unwrap();
    let rep = verify_relations(&a, &[(lhs, rhs)], 100, 21).unwrap();
    assert!(rep.checked == 100 && rep.max_error <= 1e-6, "{rep}");
    let u = p.parse_word("f1").unwrap();
    let trivial = verify_relations(&a, &[(u.clone(), u)], 20, 22).unwrap();
    assert_eq!(trivial.max_error, 0.0);
}

#[test]
fn scan_examples() {
    let p = catalog("heisenberg:1").unwrap();
    let params = make_params("0.45", 1, 2, &Overrides::default()).unwrap();
    let a = RealizedAction::build(&p, 0, &params).unwrap();
    assert!(fixed_point_scan(&a, &p.identity(), 4).iter().all(|e| !e.moving));
    for g in ["f", "C"] {
        let x = p.normal_form(&p.parse_word(g).unwrap());
        assert!(fixed_point_scan(&a, &x, 4).iter().all(|e| e.moving), "{g}");
    }
    // C keeps the block and moves j by one
    let w = BoxIndex::from_i64(&[3], 7);
    let img = a.coset_action().act(&p.normal_form(&p.parse_word("C").unwrap()), &w);
    assert_eq!(img.i, w.i);
    assert_eq!(img.j, BigInt::from(8));
}

#[test]
fn dkn_rejects_trivial_element() {
    let p = catalog("heisenberg:2").unwrap();
    let params = make_params("0.45", 2, 3, &Overrides::default()).unwrap();
    let glued = glue(&p, &[params.clone(), params.clone(), params]).unwrap();
    let a = &glued.copies()[0];
    let bx = BoxIndex::origin(2);
    let err = dkn_verdict(a, &[], &bx, &[0, 1], 0.75, 100).unwrap_err();
    assert!(matches!(err, RegularityError::Precondition(_)), "{err}");
    // Y1 does not commute with f1
    let y1 = p.parse_word("Y1").unwrap();
    assert!(matches!(dkn_verdict(a, &y1, &bx, &[0, 1], 0.75, 100), Err(RegularityError::Precondition(_))));
    let c = p.parse_word("C").unwrap();
    assert!(!dkn_verdict(a, &c, &bx, &[0, 1], 0.45, 200).unwrap().obstructs());
}

#[test]
fn glued_evaluation_stays_on_carriers() {
    let p = catalog("heisenberg:1").unwrap();
    let params = make_params("0.45", 1, 2, &Overrides::default()).unwrap();
    let glued = glue(&p, &[params.clone(), params]).unwrap();
    assert!(glued.certificate().passed());
    let f = p.parse_word("f").unwrap();
    for x in [0.0, 0.2, 0.5, 0.7, 1.0] {
        let (y, dy) = glued.eval(&f, x).unwrap();
        let s = ((x * 2.0).floor()).min(1.0);
        assert!(y >= s / 2.0 && y <= (s + 1.0) / 2.0 || x == 0.5 || x == 1.0, "{x} -> {y}");
        assert!(dy > 0.0);
    }
    assert_eq!(glued.eval(&f, 0.5).unwrap(), (0.5, 1.0));
}
