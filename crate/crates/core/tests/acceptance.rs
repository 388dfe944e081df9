//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line with its pinned tolerance. Oracles are written here,
//! independently of the library code they check.

use std::io::Write;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::Rng;

use sublab::cover::{
    phi_eval, submeasure_axiom_check, CoverOracle, DyadicWeight, MarkedWeightedSet, Origin, SubValue, WeightedClass,
    DEFAULT_BUDGET,
};
use sublab::farah::{
    average_overlap, counting_select_u, gen_dk, infinite_product_bounds, pathology_average, pathology_bruteforce,
    project_triple, Exponent, FarahParams,
};
use sublab::gen::{self, rng};
use sublab::thinness::{prop24_certificate, roberts_select, roberts_select_sharp, stabilize_subsequence, Selection};
use sublab::tower::{
    approx, c_sequence_bounds, interval_pullback, main_estimate_certificate, LevelOracle, TowerClasses, TowerParams,
};
use sublab::{AtomId, ClopenSet, CoordSet, SpaceCtx};

/// Goes straight to the stdout handle so the line survives output capture.
fn report(n: u32, name: &str, tol: &str, ok: bool, detail: String) {
    let line = format!("criterion {n:>2} [{name}] tolerance {tol}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn within(start: Instant, limit: Duration) -> bool {
    start.elapsed() < limit
}

/// Minimum weight of a subfamily covering `b`, by listing all subfamilies.
fn brute_cover(class: &WeightedClass, b: &ClopenSet) -> SubValue {
    let n = class.items.len();
    let mut best: Option<DyadicWeight> = None;
    for mask in 0u32..(1 << n) {
        let mut u = ClopenSet::empty(&class.ctx);
        let mut w = DyadicWeight::zero();
        for (j, it) in class.items.iter().enumerate() {
            if mask >> j & 1 == 1 {
                u.union_with(&it.x);
                w += &it.w;
            }
        }
        if b.is_subset(&u) && best.as_ref().is_none_or(|x| w < *x) {
            best = Some(w);
        }
    }
    best.map_or(SubValue::Infinite, SubValue::Finite)
}

/// `(m, n)`-thinness straight from the definition.
fn thin_by_definition(x: &ClopenSet, m: u32, n: u32) -> bool {
    AtomId::ROOT.sub_atoms(m).all(|a| a.sub_atoms(n).any(|b| !x.meets_atom(&b)))
}

#[test]
fn criterion_01_cover_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut agree = 0;
    let total = 500;
    for _ in 0..total {
        let ctx = SpaceCtx::new(r.random_range(1..=4)).unwrap();
        let items = r.random_range(0..=12);
        let density = r.random_range(0.2..0.8);
        let class = gen::random_class(&ctx, &mut r, items, density);
        let bd = r.random_range(0.05..0.6);
        let b = gen::random_set(&ctx, &mut r, bd);
        let got = phi_eval(&class, &b, DEFAULT_BUDGET).unwrap();
        if got.optimal && got.value() == Some(brute_cover(&class, &b)) {
            agree += 1;
        }
    }
    let ok = agree == total && within(start, Duration::from_secs(60));
    report(1, "cover oracle = exhaustive subfamilies", "exact, < 60 s", ok, format!("{agree}/{total}, {:.1?}", start.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_02_submeasure_axioms() {
    let start = Instant::now();
    let ctx = SpaceCtx::new(4).unwrap();
    let mut r = rng(202);
    let classes = vec![
        gen::random_class(&ctx, &mut r, 12, 0.3),
        gen_dk(&ctx, &FarahParams::single(1, 2, Exponent::new(1, 2)), 1, 10_000).unwrap(),
        WeightedClass::new(&ctx, "empty"),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for class in classes {
        let pairs: Vec<(ClopenSet, ClopenSet)> = (0..1000)
            .map(|_| {
                let m = r.random_range(1..=3);
                (gen::random_measurable(&ctx, &mut r, m, 0.15), gen::random_measurable(&ctx, &mut r, m, 0.15))
            })
            .collect();
        let label = class.label.clone();
        let oracle = CoverOracle::new(class);
        let rep = submeasure_axiom_check(&oracle, &pairs).unwrap();
        ok &= rep.passed();
        lines.push(format!("{label}: {} violations", rep.violations.len()));
    }
    report(2, "submeasure axioms at d=4", "zero violations", ok, format!("{}, {:.1?}", lines.join("; "), start.elapsed()));
    assert!(ok);
}

fn selection_ok(sets: &[CoordSet], t: usize, sel: &Selection) -> bool {
    let mut perm = sel.perm.clone();
    perm.sort_unstable();
    perm == (0..sets.len()).collect::<Vec<_>>()
        && sel.blocks.len() == sets.len()
        && sel.blocks.iter().zip(&sel.perm).all(|(j, &p)| j.len() == t && j.iter().all(|x| sets[p].contains(x)))
        && sel.blocks.windows(2).all(|w| CoordSet::max(&w[0]).unwrap() <= CoordSet::min(&w[1]).unwrap())
}

#[test]
fn criterion_03_selection_lemma() {
    let start = Instant::now();
    let mut r = rng(303);
    let mut good = 0;
    let mut good_sharp = 0;
    let total = 1000;
    for _ in 0..total {
        let s = r.random_range(1..=6);
        let t = r.random_range(1..=5);
        let pool: Vec<u32> = (1..=60).collect();
        let draw = |r: &mut rand_chacha::ChaCha8Rng, card: usize| CoordSet::new(pool.choose_multiple(r, card).copied()).unwrap();
        let sets: Vec<CoordSet> = (0..s).map(|_| { let c = r.random_range(s * t..=s * t + 5); draw(&mut r, c) }).collect();
        if roberts_select(&sets, t).is_ok_and(|sel| selection_ok(&sets, t, &sel)) {
            good += 1;
        }
        let sharp: Vec<CoordSet> = (0..s).map(|_| draw(&mut r, s * (t - 1) + 1)).collect();
        if roberts_select_sharp(&sharp, t).is_ok_and(|sel| selection_ok(&sharp, t, &sel)) {
            good_sharp += 1;
        }
    }
    let ok = good == total && good_sharp == total && within(start, Duration::from_secs(10));
    report(3, "selection lemma", "exact, < 10 s", ok, format!("card >= st {good}/{total}, card = s(t-1)+1 {good_sharp}/{total}, {:.1?}", start.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_04_thin_family_avoidance() {
    let start = Instant::now();
    let ctx = SpaceCtx::new(5).unwrap();
    let mut r = rng(404);
    let mut good = 0;
    let total = 200;
    for _ in 0..total {
        let s = r.random_range(0..=2);
        let fam = gen::thin_family(&ctx, &mut r, s, 0.8);
        let n = r.random_range(1..=5);
        let tau = r.random_range(1..=ctx.radix(n));
        if let Ok((_, trace)) = prop24_certificate(&fam, &ctx, n, tau) {
            let z = &trace.point;
            if z.coord(n) == tau && fam.members.iter().all(|(x, _)| !x.contains(z)) {
                good += 1;
            }
        }
    }
    let ok = good == total && within(start, Duration::from_secs(60));
    report(4, "thin-family avoidance at d=5", "bit-exact, < 60 s", ok, format!("{good}/{total}, {:.1?}", start.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_05_counting_argument() {
    let start = Instant::now();
    let mut r = rng(505);
    let mut good = 0;
    let total = 300;
    let mut av_good = 0;
    let mut av_total = 0;
    for _ in 0..total {
        let s = r.random_range(1..=3);
        let t = r.random_range(2..=4);
        let pool: Vec<u32> = (1..=24).collect();
        let mut ranks: Vec<u32> = pool.choose_multiple(&mut r, s * t).copied().collect();
        ranks.sort_unstable();
        let blocks: Vec<CoordSet> = ranks.chunks(t).map(|c| CoordSet::new(c.iter().copied()).unwrap()).collect();
        let ctx = SpaceCtx::new(1).unwrap();
        let f2: Vec<MarkedWeightedSet> = (0..r.random_range(0..6))
            .map(|_| {
                let card = r.random_range(1..=8);
                let i = CoordSet::new(pool.choose_multiple(&mut r, card).copied()).unwrap();
                MarkedWeightedSet::new(ClopenSet::empty(&ctx), i, gen::random_weight(&mut r, 16, 3))
            })
            .collect();
        let w2: DyadicWeight = f2.iter().map(|it| &it.w).sum();
        let choice = counting_select_u(&blocks, &f2, t, &CoordSet::empty(), 6).unwrap();
        // enumerate every u independently
        let mut best: Option<DyadicWeight> = None;
        let mut sum = BigRational::from_integer(0.into());
        let mut count = 0i64;
        let mut u = vec![1usize; s];
        loop {
            let w_set = u.iter().zip(&blocks).fold(CoordSet::empty(), |acc, (&ul, j)| {
                acc.union(&CoordSet::interval(j.nth(ul), j.nth(ul + 1)))
            });
            let sv: DyadicWeight =
                f2.iter().filter(|it| 2 * it.i.intersection(&w_set).len() >= it.i.len()).map(|it| &it.w).sum();
            sum += sv.to_rational();
            count += 1;
            if best.as_ref().is_none_or(|b| sv < *b) {
                best = Some(sv);
            }
            let mut l = s;
            while l > 0 {
                l -= 1;
                if u[l] + 1 < t {
                    u[l] += 1;
                    break;
                }
                u[l] = 1;
                if l == 0 {
                    l = usize::MAX;
                    break;
                }
            }
            if l == usize::MAX {
                break;
            }
        }
        let avg = sum / BigRational::from_integer(count.into());
        let bound = w2.to_rational() * BigRational::new(2.into(), BigInt::from(t - 1));
        if Some(&choice.s_value) == best.as_ref() && choice.average == avg && choice.s_value.to_rational() <= bound {
            good += 1;
        }
        for it in &f2 {
            av_total += 1;
            let mut hits = 0usize;
            let mut n = 0usize;
            let mut u = vec![1usize; s];
            'all: loop {
                let w_set = u.iter().zip(&blocks).fold(CoordSet::empty(), |acc, (&ul, j)| {
                    acc.union(&CoordSet::interval(j.nth(ul), j.nth(ul + 1)))
                });
                hits += it.i.intersection(&w_set).len();
                n += 1;
                for l in (0..s).rev() {
                    if u[l] + 1 < t {
                        u[l] += 1;
                        continue 'all;
                    }
                    u[l] = 1;
                }
                break;
            }
            if average_overlap(&it.i, &blocks, t) == BigRational::new(hits.into(), n.into()) {
                av_good += 1;
            }
        }
    }
    let ok = good == total && av_good == av_total && within(start, Duration::from_secs(30));
    report(
        5,
        "counting argument",
        "exact, < 30 s",
        ok,
        format!("S(u) minimal and <= 2w/(t-1) {good}/{total}, closed-form average {av_good}/{av_total}, {:.1?}", start.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_06_pathology_identity() {
    let start = Instant::now();
    let mut ok = pathology_average(1) == BigRational::new(1.into(), 2.into())
        && pathology_average(2) == BigRational::new(3.into(), 8.into());
    let mut r = rng(606);
    for n in 1..=5u32 {
        let ctx = SpaceCtx::new(n).unwrap();
        let z = gen::random_set(&ctx, &mut r, 1.0).first().map(|i| sublab::Point::from_index(&ctx, i)).unwrap();
        // tau avoids z exactly when tau(j) != z_j for every j
        let oracle = (1..=n).fold(BigRational::from_integer(1.into()), |acc, j| {
            let radix = BigInt::from(1u64 << j);
            acc * BigRational::new(&radix - 1, radix)
        });
        ok &= pathology_average(n) == oracle && pathology_bruteforce(&ctx, n, &z) == oracle;
    }
    let (lo, hi) = infinite_product_bounds(40);
    for n in 1..=40 {
        let p = pathology_average(n);
        ok &= p >= lo;
    }
    ok &= (1..40).all(|n| pathology_average(n + 1) <= pathology_average(n));
    report(6, "pathology identity", "exact rationals", ok, format!("N <= 5, product in [{:.6}, {:.6}], {:.1?}", approx(&lo), approx(&hi), start.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_07_projection_laws() {
    let start = Instant::now();
    let ctx = SpaceCtx::new(5).unwrap();
    let mut r = rng(707);
    let slack = 2f64.powi(-40);
    let alphas = [Exponent::new(1, 2), Exponent::new(1, 3), Exponent::new(1, 4), Exponent::new(2, 3)];
    let mut good = 0;
    let total = 500;
    for case in 0..total {
        let alpha = *alphas.choose(&mut r).unwrap();
        let card = r.random_range(1..=5);
        let i = gen::random_ranks(&ctx, &mut r, card);
        let tau: Vec<u32> = i.iter().map(|n| r.random_range(1..=ctx.radix(n))).collect();
        let n_big = r.random_range(card as u64..=64);
        let params = FarahParams::single(1, n_big, alpha);
        let w = params.weight(1, card).unwrap();
        let mut item = MarkedWeightedSet::new(MarkedWeightedSet::section_set(&ctx, &i, &tau).unwrap(), i.clone(), w.clone())
            .with_origin(Origin::D(1));
        item.tau = Some(tau);
        let ok_case = if case % 2 == 0 {
            let jc = r.random_range(1..=5);
            let j = gen::random_ranks(&ctx, &mut r, jc).union(&CoordSet::new([i.nth(1)]).unwrap());
            let out = project_triple(&item, &j, 1, &params).unwrap();
            let c2 = out.i.len();
            let law = w.to_f64() * (card as f64 / c2 as f64).powf(alpha.num as f64 / alpha.den as f64);
            let half_rule = !(4 * c2 >= card && alpha.at_most_half()) || out.w <= w.mul_int(2);
            item.x.is_subset(&out.x) && out.x.depends_only_on(&j) && (out.w.to_f64() - law).abs() <= slack && half_rule
        } else {
            // the window pullback, on a thin item of the tower surrogate
            let tp = TowerParams::surrogate();
            let m0 = r.random_range(0..=3);
            let n0 = r.random_range(m0 + 1..=5);
            if i.count_in(m0, n0) == 0 {
                good += 1;
                continue;
            }
            let a = AtomId::ROOT.sub_atoms(m0).collect::<Vec<_>>().choose(&mut r).copied().unwrap();
            let e = MarkedWeightedSet::new(item.x.clone(), i.clone(), tp.e_weight(1, card).unwrap()).with_origin(Origin::E(1));
            let (out, _) = interval_pullback::<LevelOracle>(&e, m0, n0, &a, 1, &tp, None).unwrap();
            let window = CoordSet::interval(m0, n0);
            let c2 = out.i.len();
            let law = e.w.to_f64() * (card as f64 / c2 as f64).powf(0.5);
            item.x.translate_preimage(&a).is_subset(&out.x)
                && out.x.depends_only_on(&window)
                && out.x.is_measurable(n0)
                && (out.w.to_f64() - law).abs() <= slack
                && (4 * c2 < card || out.w <= e.w.mul_int(2))
        };
        if ok_case {
            good += 1;
        }
    }
    let ok = good == total && within(start, Duration::from_secs(30));
    report(7, "projection and window-pullback laws", "weight slack 2^-40, < 30 s", ok, format!("{good}/{total}, {:.1?}", start.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_08_main_estimate_certificate() {
    let start = Instant::now();
    let ctx = SpaceCtx::new(4).unwrap();
    let params = TowerParams::surrogate();
    let classes = TowerClasses::new(&ctx, &params).unwrap();
    let mut r = rng(808);
    let total = 200;
    let mut good = 0;
    let mut with_thin = 0;
    let mut direct = 0;
    let mut unargued = 0;
    let mut moved = 0;
    let mut failures = Vec::new();
    for sample in 0..total {
        let family = gen::tower_family(&classes, &mut r, 3, 0.6).unwrap();
        if family.iter().any(|it| it.origin == Origin::E(1)) {
            with_thin += 1;
        }
        let rep = main_estimate_certificate(&classes, &family, 1);
        direct += rep.direct_avoids;
        unargued += rep.unargued_avoids;
        moved += rep.reclassified;
        let z_ok = rep.point.as_ref().is_some_and(|z| family.iter().all(|it| !it.x.contains(z)));
        if rep.succeeded() && z_ok && rep.checks_hold(params.t) && rep.family_weight < params.c_of(1).unwrap() {
            good += 1;
        } else {
            failures.push((sample, rep.failure));
        }
    }
    let ok = good == total && within(start, Duration::from_secs(300));
    report(
        8,
        "main-estimate certificate, d=4 p=2 q=1",
        "bit-exact point, exact trace checks, < 5 min",
        ok,
        format!(
            "{good}/{total}, {with_thin} with thin members, {direct} direct atom choices, {unargued} unargued, {moved} reclassified, {:.1?}{}",
            start.elapsed(),
            failures.first().map(|f| format!(", first failure {f:?}")).unwrap_or_default()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_exhaustivity_harness() {
    let start = Instant::now();
    let ctx = SpaceCtx::new(5).unwrap();
    let q = 1u32;
    let cap = DyadicWeight::from_ratio(1, q as u64 + 1).unwrap();
    let mut r = rng(909);
    let runs = 20;
    let mut good = 0;
    let mut claims = 0;
    let mut tails = 0;
    let mut with_tail = 0;
    for _ in 0..runs {
        let seq = gen::disjoint_sequence(&ctx, &mut r, 20, 0.25);
        let st = stabilize_subsequence(&seq, q).unwrap();
        let claims_ok = st.claims.iter().all(|c| c.holds && thin_by_definition(&seq[st.indices[c.later]], c.m, c.n));
        // a subsequence shorter than 3q + 1 has no qualifying tail sets
        let tail_ok = st.tail.iter().all(|t| {
                let e = &seq[t.index];
                let member = t.ranks.consecutive_pairs().all(|(m, n)| thin_by_definition(e, m, n));
                member && t.thin && t.weight_bound <= cap
            });
        claims += st.claims.len();
        tails += st.tail.len();
        if claims_ok && tail_ok {
            good += 1;
        }
        if !st.tail.is_empty() {
            with_tail += 1;
        }
    }
    let ok = good == runs && tails > 0 && within(start, Duration::from_secs(120));
    report(
        9,
        "exhaustivity harness at d=5",
        "exact, witness <= 1/(q+1), < 2 min",
        ok,
        format!(
            "{good}/{runs} sequences, {with_tail} with a qualifying tail, {claims} thinness claims, {tails} tail witnesses, {:.1?}",
            start.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_c_sequence_bound() {
    let start = Instant::now();
    let b = c_sequence_bounds(10_000, 128);
    let s: f64 = (1..10_000).map(|j| 1.0 / ((j + 5) as f64).powi(3)).sum();
    let consistent = approx(&b.sum_lo) <= s + 1e-12 && s <= approx(&b.sum_hi) + 1e-12;
    let limit = BigRational::new(164.into(), 10.into());
    let ok = b.all_at_most_32 && b.limit_below(&limit) && consistent && within(start, Duration::from_secs(1));
    report(
        10,
        "c_k <= 32 for k <= 10^4",
        "rigorous interval, < 1 s",
        ok,
        format!("c_10000 in [{:.6}, {:.6}], limit <= {:.6}, {:.1?}", approx(&b.c_lo), approx(&b.c_hi), approx(&b.limit_hi), start.elapsed()),
    );
    assert!(ok);
}
