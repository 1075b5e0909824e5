use dyadic_lambda::atoms::{a_alpha_with, validate_atom, SpecialBasis};
use dyadic_lambda::dyadic::{Dyadic, DyadicBox, DyadicCube, Family};
use dyadic_lambda::harness::{random_atom, random_pp, Generator};
use dyadic_lambda::lipnorm::{default_window, lambda_norm_with};
use dyadic_lambda::pwpoly::{AlphaContext, PPFunction};
use dyadic_lambda::Exec;
use proptest::prelude::*;

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0), Just(1.5)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dyadic_round_trip(m in -1_000_000i64..1_000_000, e in -40i32..40) {
        let d = Dyadic::new(m, e);
        prop_assert_eq!(Dyadic::from_f64(d.to_f64()), Some(d));
        let k = d.floor_div_pow2(e - 3);
        prop_assert!(Dyadic::new(k, e - 3) <= d && d < Dyadic::new(k + 1, e - 3));
    }

    #[test]
    fn cube_tree(level in -8i32..8, k in proptest::collection::vec(-50i64..50, 1..4)) {
        let c = DyadicCube::new(level, &k);
        let kids = c.children();
        prop_assert_eq!(kids.len(), 1 << k.len());
        for ch in &kids {
            prop_assert!(c.contains(ch));
            prop_assert_eq!(&ch.parent(), &c);
        }
        let total: f64 = kids.iter().map(|ch| ch.corners().volume()).sum();
        prop_assert_eq!(total, c.corners().volume());
    }

    #[test]
    fn combine_and_pair(seed in 0u64..1000, a in alpha()) {
        let ctx = AlphaContext::new(1, a).unwrap();
        let f = random_pp(seed, &ctx, 3, Generator::Auto).unwrap();
        let g = random_pp(seed + 1, &ctx, 2, Generator::Auto).unwrap();
        let s = PPFunction::combine(2.0, &f, -1.0, &g).unwrap();
        let lhs = s.inner_product(&f);
        let rhs = 2.0 * f.norm_sq() - g.inner_product(&f);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert!((f.inner_product(&g) - g.inner_product(&f)).abs() <= 1e-13);
        prop_assert!(PPFunction::combine(1.0, &f, -1.0, &f).unwrap().norm() == 0.0);
    }

    #[test]
    fn dilation_scales_norm(seed in 0u64..1000, n in -3i32..4, s in 0.0f64..3.0) {
        let ctx = AlphaContext::new(1, 0.0).unwrap();
        let f = random_pp(seed, &ctx, 2, Generator::Jump).unwrap();
        let h = f.dilate_translate(n, &[Dyadic::new(3, -1)], s).unwrap();
        let expect = (n as f64 * (s - 0.5)).exp2() * f.norm();
        prop_assert!((h.norm() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn random_atoms_validate(seed in 0u64..1000, dim in 1usize..3, a in alpha(), e in -2i32..2) {
        let ctx = AlphaContext::new(dim, a).unwrap();
        let q = DyadicBox::centered(dim, e);
        let atom = random_atom(seed, &q, &ctx).unwrap();
        let c = validate_atom(&atom, &q, &ctx).unwrap();
        prop_assert!(c.pass);
        prop_assert!((c.size - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn parallel_matches_sequential(seed in 0u64..1000, a in alpha()) {
        let ctx = AlphaContext::new(1, a).unwrap();
        let b = SpecialBasis::build(&ctx).unwrap();
        let g = random_pp(seed, &ctx, 4, Generator::Auto).unwrap();
        let w = default_window(&g);
        for fam in [Family::D, Family::D0] {
            let s = lambda_norm_with(&g, &ctx, fam, &w, Exec::Sequential).unwrap();
            let p = lambda_norm_with(&g, &ctx, fam, &w, Exec::Parallel).unwrap();
            prop_assert_eq!(s, p);
        }
        prop_assert_eq!(
            a_alpha_with(&g, &b, &w, Exec::Sequential).unwrap(),
            a_alpha_with(&g, &b, &w, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn projection_is_idempotent(seed in 0u64..1000, a in alpha()) {
        let ctx = AlphaContext::new(2, a).unwrap();
        let g = random_pp(seed, &ctx, 1, Generator::Auto).unwrap();
        let q = DyadicBox::from_f64(&[-0.5, 0.0], &[0.5, 1.0]).unwrap();
        let p = g.project_poly(&q, ctx.degree()).unwrap();
        let pf = p.to_function(g.mesh_level()).unwrap();
        let again = pf.project_coeffs(&q, ctx.degree()).unwrap();
        for (x, y) in p.coeffs.iter().zip(&again) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(pf.residual_energy(&q, ctx.degree()).unwrap().0 <= 1e-24);
    }
}
