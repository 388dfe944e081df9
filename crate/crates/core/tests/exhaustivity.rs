use sublab::cover::{CoverOracle, DyadicWeight, SubValue, Submeasure, DEFAULT_BUDGET};
use sublab::farah::{farah_exhaustivity_run, psi_class, Exponent, FarahParams, DEFAULT_CLASS_CAP};
use sublab::gen::{self, rng};
use sublab::{ClopenSet, SpaceCtx};

fn setup(d: u32) -> (SpaceCtx, FarahParams, sublab::cover::WeightedClass) {
    let ctx = SpaceCtx::new(d).unwrap();
    let p = FarahParams::single(1, 2, Exponent::new(1, 2));
    let class = psi_class(&ctx, &p, DEFAULT_CLASS_CAP).unwrap();
    (ctx, p, class)
}

#[test]
fn one_set_gives_a_short_chain() {
    let (ctx, p, class) = setup(4);
    let mu = CoverOracle::new(class.clone());
    let e = ClopenSet::cylinder(&ctx, 3, 2).unwrap();
    let t = DyadicWeight::pow2(-3);
    let rep = farah_exhaustivity_run(std::slice::from_ref(&e), &class, &mu, &p, &t, &t, DEFAULT_BUDGET).unwrap();
    assert_eq!(rep.steps.len(), (p.b as usize).min(ctx.depth() as usize - 1));
    assert_eq!(rep.ranks.len(), rep.steps.len() + 1);
    for s in &rep.steps {
        assert!(s.hole.tail_ok);
        assert!(s.telescoping.iter().all(|&ok| ok));
    }
}

#[test]
fn random_sequences_recheck_by_oracle() {
    let (ctx, p, class) = setup(5);
    let mu = CoverOracle::new(class.clone());
    // the hole argument needs psi(T) well above the threshold
    let alpha = DyadicWeight::pow2(-4);
    let threshold = DyadicWeight::pow2(-5);
    let mut r = rng(77);
    for _ in 0..4 {
        let es = gen::disjoint_sequence(&ctx, &mut r, 6, 0.25);
        let rep = farah_exhaustivity_run(&es, &class, &mu, &p, &alpha, &threshold, DEFAULT_BUDGET).unwrap();
        let mut b = ClopenSet::full(&ctx);
        for s in &rep.steps {
            assert!(s.hole.b_prime.is_subset(&b));
            // residuals re-evaluated from scratch
            for (i, e) in es.iter().enumerate() {
                let v = mu.eval(&b.intersection(e).difference(&s.hole.b_prime)).unwrap();
                assert_eq!(v, s.hole.residuals[i]);
                if i >= s.hole.tail_start {
                    assert!(v <= SubValue::Finite(alpha.clone()));
                }
            }
            assert!(s.telescoping.iter().all(|&ok| ok));
            b = s.hole.b_prime.clone();
        }
        assert!(rep.all_checks_hold());
        assert_eq!(rep.witness.x, b);
        assert_eq!(rep.witness.w, DyadicWeight::pow2(-(p.q as i32)));
    }
}
