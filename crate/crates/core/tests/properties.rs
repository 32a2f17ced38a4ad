use std::sync::OnceLock;

use num_bigint::BigInt;
use proptest::prelude::*;

use metab_core::charts::{dq_rel, phi_rel, q_rel, q_rel_inv};
use metab_core::coset::{lex_compare, BoxIndex, CosetAction};
use metab_core::group::{catalog, Element, Letter, Presentation};
use metab_core::interval::{make_params, Overrides};
use metab_core::realization::{LocalPoint, RealizedAction};
use metab_core::regularity::{holder_report, run_walk, HolderConfig, WalkKind};

fn h2() -> &'static Presentation {
    static P: OnceLock<Presentation> = OnceLock::new();
    P.get_or_init(|| catalog("heisenberg:2").unwrap())
}

fn h1_action() -> &'static RealizedAction<'static> {
    static P: OnceLock<Presentation> = OnceLock::new();
    static A: OnceLock<RealizedAction<'static>> = OnceLock::new();
    let p = P.get_or_init(|| catalog("heisenberg:1").unwrap());
    A.get_or_init(|| {
        let params = make_params("0.45", 1, 2, &Overrides::default()).unwrap();
        RealizedAction::build(p, 0, &params).unwrap()
    })
}

// 4x4 unitriangular model of heisenberg:2, generators f1 f2 C Y1 Y2
fn unit(i: usize, j: usize) -> [[i64; 4]; 4] {
    let mut m = [[0; 4]; 4];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = 1;
    }
    m[i][j] = 1;
    m
}

fn mul(a: &[[i64; 4]; 4], b: &[[i64; 4]; 4]) -> [[i64; 4]; 4] {
    let mut c = [[0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    c
}

fn pow(g: usize, e: i64) -> [[i64; 4]; 4] {
    let pos = [(0, 1), (0, 2), (0, 3), (1, 3), (2, 3)][g];
    let mut m = unit(pos.0, pos.1);
    m[pos.0][pos.1] = e;
    m
}

fn matrix_of(x: &Element) -> [[i64; 4]; 4] {
    let mut m = unit(0, 0);
    for (g, e) in x.n.iter().chain(&x.m).enumerate() {
        m = mul(&m, &pow(g, i64::try_from(e).unwrap()));
    }
    m
}

fn word_strategy(ngens: usize, max_len: usize) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec((0..ngens, prop_oneof![-3i64..=-1, 1i64..=3]), 0..=max_len)
        .prop_map(|v| v.into_iter().map(|(gen, e)| Letter { gen, exp: BigInt::from(e) }).collect())
}

fn element_strategy(k: usize, d: usize) -> impl Strategy<Value = Element> {
    (prop::collection::vec(-6i64..=6, k), prop::collection::vec(-6i64..=6, d))
        .prop_map(|(n, m)| Element::from_i64(&n, &m))
}

fn box_strategy(k: usize) -> impl Strategy<Value = BoxIndex> {
    (prop::collection::vec(-20i64..=20, k), -500i64..=500).prop_map(|(i, j)| BoxIndex::from_i64(&i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normal_form_matches_matrices(word in word_strategy(5, 12)) {
        let p = h2();
        let mut want = unit(0, 0);
        for l in &word {
            want = mul(&want, &pow(l.gen, i64::try_from(&l.exp).unwrap()));
        }
        prop_assert_eq!(matrix_of(&p.normal_form(&word)), want);
    }

    #[test]
    fn associativity_and_inverse(a in element_strategy(2, 3), b in element_strategy(2, 3), c in element_strategy(2, 3)) {
        let p = h2();
        let left = p.multiply(&p.multiply(&a, &b), &c);
        let right = p.multiply(&a, &p.multiply(&b, &c));
        prop_assert_eq!(left, right);
        prop_assert!(p.multiply(&a, &p.inverse(&a)).is_identity());
        prop_assert!(p.commutator(&a, &a).is_identity());
    }

    #[test]
    fn coset_action_is_order_preserving_homomorphism(
        g in element_strategy(2, 3),
        h in element_strategy(2, 3),
        w1 in box_strategy(2),
        w2 in box_strategy(2),
        pivot in 0usize..3,
    ) {
        let p = h2();
        let a = CosetAction::new(p, pivot).unwrap();
        prop_assert_eq!(a.act(&p.multiply(&g, &h), &w1), a.act(&g, &a.act(&h, &w1)));
        prop_assert_eq!(lex_compare(&a.act(&g, &w1), &a.act(&g, &w2)), lex_compare(&w1, &w2));
        prop_assert_eq!(a.act(&p.identity(), &w1), w1);
    }

    #[test]
    fn chart_monotone_and_invertible(v1 in 0.001f64..0.999, dv in 1e-6f64..0.5, rs in -6.0f64..6.0, rd in -6.0f64..6.0) {
        let (rs, rd) = (rs.exp(), rd.exp());
        let v2 = (v1 + dv).min(0.9995);
        prop_assume!(v2 > v1);
        let (y1, y2) = (phi_rel(&v1, &rs, &rd), phi_rel(&v2, &rs, &rd));
        prop_assert!(y1 < y2);
        prop_assert!(dq_rel(&v1, &rs) > 0.0);
        let back = q_rel_inv(&q_rel(&v1, &rs), &rs);
        prop_assert!((back - v1).abs() <= 1e-12);
        // same neighbour ratio gives the identity
        prop_assert!((phi_rel(&v1, &rs, &rs) - v1).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realization_monotone_in_local_coordinates(
        word in word_strategy(3, 6),
        i in -30i64..=30,
        j in -300i64..=300,
        v1 in 0.01f64..0.98,
        dv in 1e-4f64..0.5,
        dj in 0i64..3,
    ) {
        let a = h1_action();
        let x = LocalPoint { w: BoxIndex::from_i64(&[i], j), v: v1 };
        let y = LocalPoint { w: BoxIndex::from_i64(&[i], j + dj), v: if dj == 0 { (v1 + dv).min(0.99) } else { v1 } };
        prop_assume!(dj > 0 || y.v > x.v);
        let (gx, lx) = a.apply_word(&word, &x);
        let (gy, ly) = a.apply_word(&word, &y);
        let order = lex_compare(&gx.w, &gy.w);
        prop_assert!(order.is_lt() || (order.is_eq() && gx.v < gy.v), "{:?} {:?}", gx, gy);
        prop_assert!(lx.is_finite() && ly.is_finite());
    }

    #[test]
    fn realization_homomorphism_and_chain_rule(
        u in word_strategy(3, 5),
        v in word_strategy(3, 5),
        i in -30i64..=30,
        j in -300i64..=300,
        t in 0.01f64..0.99,
    ) {
        let a = h1_action();
        let x = LocalPoint { w: BoxIndex::from_i64(&[i], j), v: t };
        let uv: Vec<Letter> = u.iter().chain(&v).cloned().collect();
        let (direct, ld) = a.apply_word(&uv, &x);
        let (mid, l1) = a.apply_word(&v, &x);
        let (two, l2) = a.apply_word(&u, &mid);
        prop_assert_eq!(&direct.w, &two.w);
        prop_assert!((direct.v - two.v).abs() <= 1e-9);
        prop_assert!((ld - (l1 + l2)).abs() <= 1e-9 * (1.0 + ld.abs()));
    }
}

#[test]
fn identity_generator_has_zero_quotients() {
    let a = h1_action();
    let rep = holder_report(a, &[], 0.5, 2, &HolderConfig::default()).unwrap();
    assert!(rep.levels.iter().all(|l| l.sup_quotient == 0.0));
}

#[test]
fn holder_sups_ordered_in_exponent() {
    let a = h1_action();
    let f = a.presentation().parse_word("f").unwrap();
    let cfg = HolderConfig { base: 1, ..Default::default() };
    let lo = holder_report(a, &f, 0.3, 2, &cfg).unwrap();
    let hi = holder_report(a, &f, 0.6, 2, &cfg).unwrap();
    for (l, h) in lo.levels.iter().zip(&hi.levels) {
        assert!(l.sup_quotient <= h.sup_quotient, "{} {}", l.sup_quotient, h.sup_quotient);
        assert!(l.sup_quotient >= 0.0);
    }
    // refinement is a superset, so sups never decrease
    for r in [&lo, &hi] {
        assert!(r.levels.windows(2).all(|w| w[0].sup_quotient <= w[1].sup_quotient && w[0].radius < w[1].radius));
    }
}

#[test]
fn walk_partial_sums_nondecreasing_and_replayable() {
    let len = |v: &[i64]| (1.0 + v.iter().map(|x| x.abs() as f64).sum::<f64>()).powf(-2.2);
    let kind = WalkKind::Random { seed: 11 };
    let a = run_walk(kind, &len, 2, 0.5, 5000, 1e3, 5000, false);
    let b = run_walk(kind, &len, 2, 0.5, 5000, 1e3, 5000, false);
    assert_eq!(a.prefix, b.prefix);
    assert!(a.checkpoints.windows(2).all(|w| w[0].1 <= w[1].1));
    let mut v = [0i64; 2];
    let direct: f64 = a
        .prefix
        .iter()
        .map(|&s| {
            v[s] += 1;
            len(&v).powf(0.5)
        })
        .sum();
    assert!((direct - a.sum).abs() <= 1e-12 * a.sum);
}
