use proptest::prelude::*;
use rand::Rng;
use sublab::cover::{phi_capped, phi_eval, CoverOracle, DyadicWeight, MarkedWeightedSet, Origin, WeightedClass, DEFAULT_BUDGET};
use sublab::farah::{gen_dk, pathology_average, infinite_product_bounds, transversal_certificate, Exponent, FarahParams, Transversal};
use sublab::gen::{self, rng};
use sublab::thinness::is_mn_thin;
use sublab::tower::{build_xi, ekp_member, lemma55_pullback, TowerClasses, TowerParams};
use sublab::{AtomId, ClopenSet, CoordSet, SpaceCtx};

fn set_at(ctx: &SpaceCtx, seed: u64, density: f64) -> ClopenSet {
    gen::random_set(ctx, &mut rng(seed), density)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_is_a_closure(seed in any::<u64>(), m in 0u32..=3, m2 in 0u32..=3) {
        let ctx = SpaceCtx::new(3).unwrap();
        let x = set_at(&ctx, seed, 0.1);
        let e = x.envelope(m);
        prop_assert!(x.is_subset(&e));
        prop_assert_eq!(e.envelope(m), e.clone());
        let (lo, hi) = (m.min(m2), m.max(m2));
        prop_assert!(x.envelope(hi).is_subset(&x.envelope(lo)));
    }

    #[test]
    fn translation_forgets_the_prefix(seed in any::<u64>(), m in 1u32..=3, pick in any::<u64>()) {
        let ctx = SpaceCtx::new(4).unwrap();
        let a = AtomId::new(&ctx, m, pick % ctx.atom_count(m)).unwrap();
        let c = set_at(&ctx, seed, 0.4).intersection(&a.to_set(&ctx));
        let pre = c.translate_preimage(&a);
        prop_assert_eq!(pre.intersection(&a.to_set(&ctx)), c);
        prop_assert!(pre.depends_only_on(&CoordSet::interval(m, 4)));
    }

    #[test]
    fn max_hole_is_the_largest_hole(seed in any::<u64>(), m in 0u32..=2, gap in 1u32..=2, pick in any::<u64>()) {
        let ctx = SpaceCtx::new(4).unwrap();
        let n = m + gap;
        let x = set_at(&ctx, seed, 0.7);
        let a = AtomId::new(&ctx, m, pick % ctx.atom_count(m)).unwrap();
        let hole = x.max_hole(&a, n);
        prop_assert!(hole.is_disjoint(&x));
        for c in a.sub_atoms(n) {
            let cs = c.to_set(&ctx);
            prop_assert_eq!(cs.is_disjoint(&x), cs.is_subset(&hole));
        }
    }

    #[test]
    fn cover_value_is_monotone_and_antitone(seed in any::<u64>()) {
        let ctx = SpaceCtx::new(3).unwrap();
        let mut r = rng(seed);
        let class = gen::random_class(&ctx, &mut r, 8, 0.4);
        let b = gen::random_set(&ctx, &mut r, 0.3);
        let bigger = b.union(&gen::random_set(&ctx, &mut r, 0.2));
        let v = |c: &WeightedClass, s: &ClopenSet| phi_eval(c, s, DEFAULT_BUDGET).unwrap().value().unwrap();
        prop_assert!(v(&class, &b) <= v(&class, &bigger));
        let extra = gen::random_class(&ctx, &mut r, 3, 0.5);
        prop_assert!(v(&class.merged(&extra, "more"), &b) <= v(&class, &b));
    }

    #[test]
    fn budgeted_search_brackets_the_optimum(seed in any::<u64>(), budget in 1u64..40) {
        let ctx = SpaceCtx::new(3).unwrap();
        let mut r = rng(seed);
        let class = gen::random_class(&ctx, &mut r, 10, 0.3);
        let b = gen::random_set(&ctx, &mut r, 0.5);
        let exact = phi_eval(&class, &b, DEFAULT_BUDGET).unwrap();
        let cut = phi_eval(&class, &b, budget).unwrap();
        prop_assert_eq!(cut.coverable, exact.coverable);
        if exact.coverable {
            prop_assert!(cut.lower <= exact.upper && exact.upper <= cut.upper);
            if cut.optimal {
                prop_assert_eq!(cut.upper, exact.upper);
            }
        }
    }

    #[test]
    fn capped_value_stays_below_one(seed in any::<u64>(), q in 1u32..4) {
        let ctx = SpaceCtx::new(3).unwrap();
        let mut r = rng(seed);
        let unit = DyadicWeight::from_ratio(1, q as u64 + 1).unwrap();
        let items = (0..6).map(|_| MarkedWeightedSet::new(gen::random_set(&ctx, &mut r, 0.3), CoordSet::empty(), unit.clone())).collect();
        let class = WeightedClass::from_items(&ctx, "thin", items).unwrap();
        let b = gen::random_set(&ctx, &mut r, 0.4);
        prop_assert!(phi_capped(&class, &b, q).unwrap() <= DyadicWeight::one());
        prop_assert_eq!(phi_capped(&class, &ClopenSet::empty(&ctx), q).unwrap(), DyadicWeight::zero());
    }

    #[test]
    fn transversal_points_avoid_the_family(seed in any::<u64>(), take in 0usize..5) {
        let ctx = SpaceCtx::new(3).unwrap();
        let d = gen_dk(&ctx, &FarahParams::single(1, 3, Exponent::new(1, 2)), 1, 10_000).unwrap();
        let mut r = rng(seed);
        let items: Vec<MarkedWeightedSet> = (0..take).map(|_| d.items[r.random_range(0..d.len())].clone()).collect();
        if let Transversal::Found { point, reps, .. } = transversal_certificate(&ctx, &items) {
            prop_assert!(items.iter().all(|it| !it.x.contains(&point)));
            let mut ranks: Vec<u32> = reps.iter().map(|&(_, n)| n).collect();
            ranks.sort_unstable();
            ranks.dedup();
            prop_assert_eq!(ranks.len(), items.len());
        }
    }

    #[test]
    fn thin_family_membership_is_monotone(seed in any::<u64>(), card in 2usize..=4, drop in 0usize..4) {
        let ctx = SpaceCtx::new(4).unwrap();
        let classes = TowerClasses::new(&ctx, &TowerParams::surrogate()).unwrap();
        let above = classes.oracle(2);
        let mut r = rng(seed);
        let i = gen::random_ranks(&ctx, &mut r, card);
        let x = gen::thin_set(&ctx, &mut r, &i, 0.6);
        let (member, _) = ekp_member(&x, &i, 1, &above, &classes.params).unwrap();
        prop_assume!(member);
        let smaller = x.intersection(&gen::random_set(&ctx, &mut r, 0.7));
        prop_assert!(ekp_member(&smaller, &i, 1, &above, &classes.params).unwrap().0);
        let gone = i.as_slice()[drop % i.len()];
        let j = CoordSet::new(i.iter().filter(|&n| n != gone)).unwrap();
        prop_assert!(ekp_member(&x, &j, 1, &above, &classes.params).unwrap().0);
    }

    #[test]
    fn xi_is_causal_and_pullbacks_contain_preimages(seed in any::<u64>(), split in 1u32..=2) {
        let ctx = SpaceCtx::new(4).unwrap();
        let params = TowerParams::surrogate();
        let mut r = rng(seed);
        let windows = if split == 1 { vec![(1, 3)] } else { vec![(1, 2), (3, 4)] };
        let choices: Vec<Vec<AtomId>> = windows
            .iter()
            .map(|&(m, n)| {
                AtomId::ROOT.sub_atoms(m).map(|a| {
                    let subs: Vec<AtomId> = a.sub_atoms(n).collect();
                    subs[r.random_range(0..subs.len())]
                }).collect()
            })
            .collect();
        let xi = build_xi(&ctx, &windows, &choices).unwrap();
        prop_assert!(xi.is_prefix_causal());
        prop_assert!(xi.preserves_outside_windows());
        let d = TowerClasses::new(&ctx, &params).unwrap().d;
        let item = d.items[r.random_range(0..d.len())].clone();
        prop_assert_eq!(item.origin, Origin::D(1));
        let w_set = windows.iter().fold(CoordSet::empty(), |acc, &(m, n)| acc.union(&CoordSet::interval(m, n)));
        prop_assume!(!item.i.difference(&w_set).is_empty());
        let pb = lemma55_pullback::<CoverOracle>(&item, &xi, 1, &params, None).unwrap();
        prop_assert!(pb.superset_ok);
        prop_assert!(xi.preimage(&item.x).is_subset(&pb.item.x));
    }
}

#[test]
fn d_weights_fall_with_cardinality() {
    let ctx = SpaceCtx::new(4).unwrap();
    for n in [2u64, 3, 4] {
        let p = FarahParams::single(2, n, Exponent::new(1, 2));
        let d = gen_dk(&ctx, &p, 2, 100_000).unwrap();
        let mut by_card: Vec<(usize, DyadicWeight)> = d.items.iter().map(|it| (it.i.len(), it.w.clone())).collect();
        by_card.sort();
        by_card.dedup();
        assert!(by_card.windows(2).all(|w| w[0].0 == w[1].0 || w[0].1 > w[1].1));
        let top = by_card.iter().find(|(c, _)| *c as u64 == n).map(|(_, w)| w.clone());
        if n <= 4 {
            assert_eq!(top, Some(DyadicWeight::pow2(-2)));
        }
    }
}

#[test]
fn pathology_average_falls_to_the_product() {
    let (lo, _) = infinite_product_bounds(40);
    let mut prev = pathology_average(0);
    for n in 1..=12 {
        let a = pathology_average(n);
        assert!(a <= prev);
        assert!(a >= lo);
        prev = a;
    }
}

#[test]
fn thin_pairs_widen() {
    let ctx = SpaceCtx::new(4).unwrap();
    let mut r = rng(3);
    for _ in 0..30 {
        let i = gen::random_ranks(&ctx, &mut r, 2);
        let x = gen::thin_set(&ctx, &mut r, &i, 0.5);
        let (m, n) = (i.as_slice()[0], i.as_slice()[1]);
        for n2 in n..=4 {
            assert!(is_mn_thin(&x, m, n2).unwrap());
        }
    }
}
