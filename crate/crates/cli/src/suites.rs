use anyhow::{bail, Context, Result};
use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sublab::cover::{
    phi_eval, submeasure_axiom_check, CoverOracle, CoverResult, DyadicWeight, MarkedWeightedSet, Origin, WeightedClass,
};
use sublab::farah::{counting_select_u, farah_exhaustivity_run, psi_class, transversal_certificate, Transversal, DEFAULT_CLASS_CAP};
use sublab::gen;
use sublab::thinness::{prop24_certificate, stabilize_subsequence};
use sublab::tower::{main_estimate_certificate, phi_tower_eval, TowerClasses};
use sublab::{ClopenSet, CoordSet, SpaceCtx};

use crate::profile::Profile;
use crate::report::{Record, WitnessRow};

pub struct Run<'a> {
    pub profile: &'a Profile,
    pub ctx: SpaceCtx,
    pub rng: ChaCha8Rng,
}

impl<'a> Run<'a> {
    pub fn new(profile: &'a Profile, seed: u64) -> Result<Self> {
        Ok(Run { profile, ctx: profile.ctx()?, rng: gen::rng(seed) })
    }

    fn d_class(&self) -> Result<WeightedClass> {
        psi_class(&self.ctx, &self.profile.farah(), DEFAULT_CLASS_CAP).context("cannot build the D class")
    }

    fn tower(&self) -> Result<Option<TowerClasses>> {
        match self.profile.tower_params()? {
            Some(params) => Ok(Some(TowerClasses::new(&self.ctx, &params)?)),
            None => Ok(None),
        }
    }

    /// Empty-set, monotonicity and subadditivity checks on random pairs for
    /// a random class, the profile's `D`, the empty class and the user
    /// class if any.
    pub fn verify_axioms(&mut self) -> Result<Vec<Record>> {
        let user = self.profile.user_class(&self.ctx)?;
        let ctx = self.ctx;
        let mut classes = vec![gen::random_class(&ctx, &mut self.rng, 12, 0.3), self.d_class()?, WeightedClass::new(&ctx, "empty")];
        classes.extend(user);
        let mut out = Vec::new();
        for class in classes {
            let pairs: Vec<(ClopenSet, ClopenSet)> = (0..self.profile.samples)
                .map(|_| {
                    let m = self.rng.random_range(1..=ctx.depth().min(3));
                    let a = gen::random_measurable(&ctx, &mut self.rng, m, 0.15);
                    (a, gen::random_measurable(&ctx, &mut self.rng, m, 0.15))
                })
                .collect();
            let label = class.label.clone();
            let items = class.len();
            let rep = submeasure_axiom_check(&CoverOracle::with_budget(class, self.profile.budget), &pairs)?;
            out.push(Record::new(
                format!("axioms/{label}"),
                "empty set, monotonicity, subadditivity",
                rep.passed(),
                json!({
                    "items": items,
                    "pairs": rep.pairs,
                    "monotone_checks": rep.monotone_checks,
                    "subadditive_checks": rep.subadditive_checks,
                    "violations": rep.violations.len(),
                    "first_violation": rep.first_violation(),
                }),
            ));
        }
        Ok(out)
    }

    pub fn certificates(&mut self) -> Result<Vec<Record>> {
        let mut out = Vec::new();
        if self.profile.samples == 0 {
            return Ok(out);
        }
        self.walks(&mut out)?;
        self.counting(&mut out)?;
        if let Some(classes) = self.tower()? {
            self.transversals(&classes, &mut out)?;
            self.main_estimates(&classes, &mut out)?;
        }
        Ok(out)
    }

    fn walks(&mut self, out: &mut Vec<Record>) -> Result<()> {
        let ctx = self.ctx;
        let d = ctx.depth();
        for i in 0..self.profile.samples {
            let s = self.rng.random_range(0..=(d as usize - 1) / 2);
            let fam = gen::thin_family(&ctx, &mut self.rng, s, 0.8);
            let n = self.rng.random_range(1..=d);
            let tau = self.rng.random_range(1..=ctx.radix(n));
            let rec = match prop24_certificate(&fam, &ctx, n, tau) {
                Ok((_, trace)) => {
                    let z = &trace.point;
                    let ok = z.coord(n) == tau && fam.members.iter().all(|(x, _)| !x.contains(z)) && trace.verify(&fam.members);
                    Record::new(
                        format!("walk/{i}"),
                        "point with the forced coordinate avoids every thin set",
                        ok,
                        json!({"members": s, "n": n, "tau": tau, "point": z, "steps": trace.steps.len()}),
                    )
                }
                Err(e) => Record::new(
                    format!("walk/{i}"),
                    "point with the forced coordinate avoids every thin set",
                    false,
                    json!({"members": s, "n": n, "tau": tau, "error": e.to_string()}),
                ),
            };
            out.push(rec);
        }
        Ok(())
    }

    fn counting(&mut self, out: &mut Vec<Record>) -> Result<()> {
        let pool: Vec<u32> = (1..=24).collect();
        let ctx = SpaceCtx::new(1)?;
        for i in 0..self.profile.samples {
            let s = self.rng.random_range(1..=3);
            let t = self.rng.random_range(2..=4);
            let mut ranks: Vec<u32> = pool.choose_multiple(&mut self.rng, s * t).copied().collect();
            ranks.sort_unstable();
            let blocks: Vec<CoordSet> = ranks.chunks(t).map(|c| CoordSet::new(c.iter().copied())).collect::<Result<_, _>>()?;
            let members = self.rng.random_range(0..6);
            let mut f2 = Vec::with_capacity(members);
            for _ in 0..members {
                let card = self.rng.random_range(1..=8);
                let ranks = CoordSet::new(pool.choose_multiple(&mut self.rng, card).copied())?;
                let w = gen::random_weight(&mut self.rng, 16, 3);
                f2.push(MarkedWeightedSet::new(ClopenSet::empty(&ctx), ranks, w));
            }
            let w2: DyadicWeight = f2.iter().map(|it| &it.w).sum();
            let choice = counting_select_u(&blocks, &f2, t, &CoordSet::empty(), 6)?;
            let bound = w2.to_rational() * BigRational::new(2.into(), (t as i64 - 1).into());
            let ok = choice.inequalities_hold() && choice.s_value.to_rational() <= bound;
            out.push(Record::new(
                format!("counting/{i}"),
                "selected windows carry at most 2/(t-1) of the weight",
                ok,
                json!({"s": s, "t": t, "u": choice.u.u, "s_value": choice.s_value, "weight": w2, "average": choice.average.to_string()}),
            ));
        }
        Ok(())
    }

    fn transversals(&mut self, classes: &TowerClasses, out: &mut Vec<Record>) -> Result<()> {
        let params = &classes.params;
        let cap = params.c_of(params.p)?;
        for i in 0..self.profile.samples {
            let want = self.rng.random_range(0..=self.ctx.depth() as usize);
            let mut items: Vec<MarkedWeightedSet> = Vec::new();
            let mut total = DyadicWeight::zero();
            for _ in 0..want {
                let Some(it) = classes.d.items.choose(&mut self.rng) else { break };
                let next = &total + &it.w;
                if next < cap {
                    total = next;
                    items.push(it.clone());
                }
            }
            let t = transversal_certificate(&self.ctx, &items);
            let ok = match &t {
                Transversal::Found { point, .. } => items.iter().all(|it| !it.x.contains(point)),
                Transversal::Refused(_) => false,
            };
            out.push(Record::new(
                format!("transversal/{i}"),
                "family lighter than the top constant has a point outside it",
                ok,
                json!({"members": items.len(), "weight": total, "bound": cap, "result": t}),
            ));
        }
        Ok(())
    }

    fn main_estimates(&mut self, classes: &TowerClasses, out: &mut Vec<Record>) -> Result<()> {
        let tp = self.profile.tower.as_ref().expect("tower section");
        let params = &classes.params;
        let c1 = params.c_of(1)?;
        for i in 0..self.profile.samples {
            let family = gen::tower_family(classes, &mut self.rng, tp.max_thin, tp.density)?;
            let rep = main_estimate_certificate(classes, &family, 1);
            let z_ok = rep.point.as_ref().is_some_and(|z| family.iter().all(|it| !it.x.contains(z)));
            let ok = rep.succeeded() && z_ok && rep.checks_hold(params.t) && rep.family_weight < c1;
            out.push(Record::new(
                format!("main-estimate/{i}"),
                "family lighter than c_1 leaves a verified point uncovered",
                ok,
                json!({
                    "members": family.len(),
                    "thin_members": family.iter().filter(|it| it.origin == Origin::E(1)).count(),
                    "weight": rep.family_weight,
                    "bound": c1,
                    "levels": rep.levels.len(),
                    "point": rep.point,
                    "failure": rep.failure,
                    "direct_avoids": rep.direct_avoids,
                    "reclassified": rep.reclassified,
                }),
            ));
        }
        Ok(())
    }

    /// Stabilized subsequences of random disjoint sequences, their thinness
    /// claims and tail witnesses; the first few sequences also run the
    /// hole-extraction chain.
    pub fn exhaustivity(&mut self) -> Result<(Vec<Record>, Vec<WitnessRow>)> {
        let ctx = self.ctx;
        let sp = &self.profile.sequence;
        let q = self.profile.q;
        let cap = DyadicWeight::from_ratio(1, q as u64 + 1)?;
        let chain_class = if sp.chains > 0 && self.profile.samples > 0 { Some(self.d_class()?) } else { None };
        let mu = chain_class.as_ref().map(|c| CoverOracle::with_budget(c.clone(), self.profile.budget));
        let mut records = Vec::new();
        let mut rows = Vec::new();
        for i in 0..self.profile.samples {
            let seq = gen::disjoint_sequence(&ctx, &mut self.rng, sp.length, sp.block);
            let st = stabilize_subsequence(&seq, q)?;
            records.push(Record::new(
                format!("stabilize/{i}"),
                "later sets are thin between consecutive stabilization ranks",
                st.all_claims_hold(),
                json!({
                    "length": seq.len(),
                    "indices": st.indices,
                    "ranks": st.ranks,
                    "claims": st.claims.len(),
                    "tail": st.tail.len(),
                }),
            ));
            for t in &st.tail {
                rows.push(WitnessRow {
                    sequence: i,
                    index: t.index,
                    weight_bound: t.weight_bound.to_string(),
                    verified: t.thin && t.weight_bound <= cap,
                });
            }
            if let (Some(class), Some(mu)) = (&chain_class, &mu) {
                if i < sp.chains {
                    let rep = farah_exhaustivity_run(
                        &seq,
                        class,
                        mu,
                        &self.profile.farah(),
                        &sp.chain_alpha,
                        &sp.chain_threshold,
                        self.profile.budget,
                    )?;
                    records.push(Record::new(
                        format!("chain/{i}"),
                        "hole chain is thin with tails below alpha",
                        rep.all_checks_hold(),
                        json!({
                            "ranks": rep.ranks,
                            "steps": rep.steps.len(),
                            "exhausted": rep.exhausted,
                            "final_thin": rep.final_thin,
                            "witness_weight": rep.witness.w,
                        }),
                    ));
                }
            }
        }
        Ok((records, rows))
    }

    /// Cover values of `set`, or of random measurable sets when none is
    /// given. `level` selects the explicit tower class `C_{k,p}`.
    pub fn eval(&mut self, set: Option<&str>, level: Option<u32>) -> Result<Vec<Record>> {
        let ctx = self.ctx;
        let sets: Vec<ClopenSet> = match set {
            Some(text) => {
                let b: ClopenSet = text.parse().context("cannot parse --set")?;
                if *b.ctx() != ctx {
                    bail!("--set lives at depth {}, the profile at {}", b.ctx().depth(), ctx.depth());
                }
                vec![b]
            }
            None => (0..self.profile.samples)
                .map(|_| {
                    let m = self.rng.random_range(1..=ctx.depth());
                    gen::random_measurable(&ctx, &mut self.rng, m, 0.3)
                })
                .collect(),
        };
        let mut out = Vec::new();
        match level {
            Some(k) => {
                let Some(classes) = self.tower()? else { bail!("--level needs a [tower] section in the profile") };
                for (i, b) in sets.iter().enumerate() {
                    let ev = phi_tower_eval(&classes, k, b)?;
                    out.push(value_record(i, b, &ev.result, json!({"level": k, "exact_over_explicit_class": ev.exact_over_explicit_class, "upper_bound_for_ideal": ev.upper_bound_for_ideal})));
                }
            }
            None => {
                let class = match self.profile.user_class(&ctx)? {
                    Some(c) => c,
                    None => self.d_class()?,
                };
                for (i, b) in sets.iter().enumerate() {
                    let r = phi_eval(&class, b, self.profile.budget)?;
                    out.push(value_record(i, b, &r, json!({"class": class.label})));
                }
            }
        }
        Ok(out)
    }
}

fn value_record(i: usize, b: &ClopenSet, r: &CoverResult, extra: serde_json::Value) -> Record {
    let value = r.value().map(|v| v.to_string());
    Record::new(
        format!("eval/{i}"),
        "cover search finished within the budget",
        value.is_some(),
        json!({
            "set": b,
            "value": value,
            "lower": r.lower,
            "upper": r.upper,
            "coverable": r.coverable,
            "witness": r.witness,
            "nodes": r.nodes,
            "context": extra,
        }),
    )
}
