//! Property tests for the exact arithmetic, surfaces and flow invariants.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use polyflow::analysis::{cover_time, grid_cover_time};
use polyflow::contfrac::{cf_convergents, cf_expand};
use polyflow::flow::{trace, trace_state, Budget, FlowState, Sense, TraceOptions};
use polyflow::cylinders::{self, closed_area, cylinder_decompose, DecomposeOptions, Direction, Gate, Seed, TowerQuery};
use polyflow::surface::{build_named, l_surface, p_distance, streets, torus, FiniteSurface, StreetDir};
use polyflow::{FaceId, PhasePoint, QuadRat, Side, Surface};

const FIELDS: [u64; 5] = [2, 3, 5, 7, 13];

fn quad_in(k: usize) -> impl Strategy<Value = QuadRat> {
    (-40i64..40, 1i64..12, -40i64..40, 1i64..12)
        .prop_map(move |(a, b, c, d)| &QuadRat::frac(a, b) + &(&QuadRat::frac(c, d) * &QuadRat::sqrt(FIELDS[k])))
}

fn quad() -> impl Strategy<Value = QuadRat> {
    (0usize..FIELDS.len()).prop_flat_map(quad_in)
}

// A positive irrational a/b + c/d sqrt(D) with c > 0.
fn positive_irrational() -> impl Strategy<Value = QuadRat> {
    (0i64..20, 1i64..6, 1i64..20, 1i64..6, 0usize..FIELDS.len()).prop_map(|(a, b, c, d, k)| {
        &QuadRat::frac(a, b) + &(&QuadRat::frac(c, d) * &QuadRat::sqrt(FIELDS[k]))
    })
}

// A connected origami: the right permutation is one n-cycle, the top one arbitrary.
fn origami() -> impl Strategy<Value = FiniteSurface> {
    (2usize..12).prop_flat_map(|n| {
        let order = Just((0..n as i64).collect::<Vec<_>>()).prop_shuffle();
        let top = Just((0..n as i64).collect::<Vec<_>>()).prop_shuffle();
        (order, top).prop_map(|(order, top)| {
            let f = |i: i64| FaceId::new(i, 0);
            let right: Vec<_> = (0..order.len()).map(|i| (f(order[i]), f(order[(i + 1) % order.len()]))).collect();
            let up: Vec<_> = (0..top.len()).map(|i| (f(i as i64), f(top[i]))).collect();
            FiniteSurface::from_permutations("origami", &right, &up).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms((x, y, z) in (0usize..FIELDS.len()).prop_flat_map(|k| (quad_in(k), quad_in(k), quad_in(k)))) {
        prop_assert_eq!(&x + &y, &y + &x);
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&x - &x, QuadRat::zero());
        if !y.is_zero() {
            prop_assert_eq!(&(&x / &y) * &y, x.clone());
        }
    }

    #[test]
    fn sign_is_multiplicative_and_ordered((x, y) in (0usize..FIELDS.len()).prop_flat_map(|k| (quad_in(k), quad_in(k)))) {
        prop_assert_eq!((&x * &y).signum(), x.signum() * y.signum());
        prop_assert_eq!(x.signum() as f64, x.to_f64().signum() * (!x.is_zero() as i32 as f64));
        prop_assert_eq!(x < y, (&y - &x).signum() > 0);
    }

    #[test]
    fn floor_and_fract(x in quad()) {
        let fl = QuadRat::from_bigint(x.floor());
        prop_assert!(fl <= x);
        prop_assert!(x < fl.add_int(1));
        let fr = x.fract();
        prop_assert!(fr.signum() >= 0 && fr < QuadRat::one());
        prop_assert_eq!(&fl + &fr, x.clone());
        prop_assert_eq!(x.ceil(), -(-x.clone()).floor());
    }

    #[test]
    fn parse_round_trip(x in quad()) {
        let back: QuadRat = x.to_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn decimal_expansion_agrees_with_order((x, y) in (0usize..FIELDS.len()).prop_flat_map(|k| (quad_in(k), quad_in(k)))) {
        let dec = |v: &QuadRat| {
            let s = v.to_decimal(100).replace('.', "");
            QuadRat::rational(BigRational::new(s.parse().unwrap(), BigInt::from(10u32).pow(100)))
        };
        let (dx, dy) = (dec(&x), dec(&y));
        let ulp = QuadRat::rational(BigRational::new(1.into(), BigInt::from(10u32).pow(100)));
        prop_assert!(dx <= x && x < &dx + &ulp);
        if x < y {
            prop_assert!(dx <= dy);
        }
    }

    #[test]
    fn convergent_identities(x in positive_irrational()) {
        let cf = cf_expand(&x, 24).unwrap();
        let c = cf_convergents(&cf, 20).unwrap();
        prop_assert!(c.determinant_holds());
        prop_assert!(c.approximation_holds(&x));
        for k in 1..c.len() {
            prop_assert!(c.q[k] >= c.q[k - 1]);
        }
    }

    #[test]
    fn trace_retraces_exactly(slope in positive_irrational(), x in 1i64..9, y in 1i64..9, n in 1usize..40) {
        let l = l_surface();
        let p = PhasePoint::new(FaceId::new(0, 0), QuadRat::frac(x, 10), QuadRat::frac(y, 10), slope, Sense::Forward).unwrap();
        let t = trace(&l, &p, &Budget::Crossings(n), &TraceOptions::default()).unwrap();
        let back = FlowState { dx: -&t.end.dx, dy: -&t.end.dy, ..t.end.clone() };
        let r = trace_state(&l, p.reversed(), back, &Budget::Arclen(t.arclen.clone()), &TraceOptions::default()).unwrap();
        prop_assert_eq!((r.end.face, &r.end.x, &r.end.y), (p.face, &p.x, &p.y));
        prop_assert_eq!(&r.arclen, &t.arclen);
    }

    #[test]
    fn gluings_are_involutions(s in origami()) {
        for f in s.faces().unwrap() {
            for side in [Side::L, Side::R, Side::B, Side::T] {
                let (g, t) = s.glue(f, side).unwrap();
                prop_assert_eq!(t, side.opposite());
                prop_assert_eq!(s.glue(g, t), Some((f, side)));
            }
        }
    }

    #[test]
    fn streets_partition_faces(s in origami()) {
        let n = s.faces().unwrap().len();
        let all = streets(&s, None).unwrap();
        for dir in [StreetDir::Horizontal, StreetDir::Vertical] {
            let mut count: BTreeMap<FaceId, usize> = BTreeMap::new();
            for st in all.iter().filter(|st| st.direction == dir) {
                prop_assert_eq!(st.length, st.cycle.len());
                for f in &st.cycle {
                    *count.entry(*f).or_default() += 1;
                }
            }
            prop_assert_eq!(count.len(), n);
            prop_assert!(count.values().all(|&c| c == 1));
        }
    }

    #[test]
    fn p_distance_is_a_metric(s in origami()) {
        let faces = s.faces().unwrap();
        let d = |a, b| p_distance(&s, a, b, 1 << 12).unwrap();
        for &a in &faces {
            prop_assert_eq!(d(a, a), 0);
            for &b in &faces {
                prop_assert_eq!(d(a, b), d(b, a));
                prop_assert_eq!(d(a, b) == 0, a == b);
                for &c in faces.iter().take(4) {
                    prop_assert!(d(a, c) <= d(a, b) + d(b, c));
                }
            }
        }
    }

    #[test]
    fn closed_cylinders_tile(s in origami(), p in 1i64..5, q in 1i64..5, neg in any::<bool>()) {
        prop_assume!(num_integer::gcd(p, q) == 1);
        let dir = Direction::new(if neg { -p } else { p }, q).unwrap();
        let cyls = cylinder_decompose(&s, dir, &Seed::All, DecomposeOptions::default()).unwrap();
        prop_assert!(cyls.iter().all(|c| c.is_closed()));
        prop_assert_eq!(closed_area(&cyls), QuadRat::int(s.faces().unwrap().len() as i64));
    }

    #[test]
    fn tower_formula_matches_simulation(k in 2u32..40, m in 2i64..120, neg in any::<bool>(), g2 in any::<bool>()) {
        let tq = TowerQuery::new(k, if neg { -m } else { m }, if g2 { Gate::G2 } else { Gate::G1 }).unwrap();
        prop_assert_eq!(cylinders::tower_exit(tq).unwrap(), cylinders::tower_exit_simulated(tq).unwrap());
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), which in 0usize..3) {
        let (name, params) = [
            ("plusminus-config", serde_json::Value::Null),
            ("tree-maze", serde_json::Value::Null),
            ("windtree", serde_json::json!({"a": "1/2", "b": "1/2", "f": "seed"})),
        ][which].clone();
        let a = build_named(name, &params, seed).unwrap();
        let b = build_named(name, &params, seed).unwrap();
        let mut f = a.origin();
        prop_assert_eq!(f, b.origin());
        // A deterministic walk exercising both copies on the same cells.
        for i in 0..300u64 {
            let side = Side::from_index(((seed >> (i % 60)) as u8 ^ i as u8) % 4);
            let ga = a.glue(f, side);
            prop_assert_eq!(ga, b.glue(f, side));
            if let Some((g, _)) = ga {
                f = g;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cover_time_is_monotone(x in positive_irrational()) {
        let l = l_surface();
        let ns: Vec<u64> = (2..=24).collect();
        let r = cover_time(&l, l.origin(), &x, &ns, &l.faces().unwrap(), 1 << 22).unwrap();
        let lens: Vec<f64> = r.rows.iter().map(|r| r.length.unwrap()).collect();
        prop_assert!(lens.windows(2).all(|w| w[0] <= w[1]), "{:?}", lens);
    }

    #[test]
    fn torus_cover_lower_bound(x in positive_irrational()) {
        let t = torus(1, 1);
        let alpha = x.fract();
        let ns = [4u64, 16, 64, 256];
        let r = cover_time(&t, t.origin(), &alpha, &ns, &t.faces().unwrap(), 1 << 22).unwrap();
        // n gaps below 1/n need n crossings of the vertical edge, one unit of horizontal travel apart.
        for row in &r.rows {
            prop_assert!(row.length.unwrap() >= row.n as f64 - 1.0);
        }
    }

    #[test]
    fn grid_and_edge_cover_agree(x in positive_irrational()) {
        // Edge gaps below 1/n cover every grid cell of side 1/n; the converse
        // holds once the grid is finer by 2 sqrt(1 + alpha^2).
        let l = l_surface();
        let c = 2.0 * (1.0 + x.to_f64().powi(2)).sqrt();
        let ns: Vec<u64> = (2..=8).collect();
        let r = cover_time(&l, l.origin(), &x, &ns, &l.faces().unwrap(), 1 << 22).unwrap();
        for row in &r.rows {
            let e = row.length.unwrap();
            let g = grid_cover_time(&l, l.origin(), &x, row.n as usize, 1 << 22).unwrap().unwrap();
            let fine = grid_cover_time(&l, l.origin(), &x, (c * row.n as f64).ceil() as usize, 1 << 22).unwrap().unwrap();
            prop_assert!(g <= e && e <= fine, "n={} grid {} edge {} fine grid {}", row.n, g, e, fine);
        }
    }
}

#[test]
fn floor_of_large_surd() {
    let x = QuadRat::from_ints(0, 1_000_000, 2);
    assert_eq!(x.floor(), BigInt::from(1_414_213));
}
