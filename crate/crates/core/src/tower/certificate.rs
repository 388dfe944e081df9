use serde::{Deserialize, Serialize};

use super::{atom_avoid, build_xi, lemma55_pullback, AvoidRecord, AvoidRoute, Pullback, TowerClasses, TowerError, XiMap};
use crate::cover::{DyadicWeight, MarkedWeightedSet, Origin};
use crate::farah::{counting_select_u, transversal_certificate, CountingChoice, Transversal};
use crate::space::{AtomId, CoordSet, Point, SpaceCtx};
use crate::thinness::{roberts_select_adaptive, Selection};

/// The stage at which a certificate attempt stopped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageFailure {
    /// `w(F) >= c_q`: outside the statement.
    Weight { q: u32, weight: DyadicWeight, c: DyadicWeight },
    Classification { q: u32, detail: String },
    Selection { q: u32, detail: String },
    Counting { q: u32, detail: String },
    Avoid { q: u32, window: usize, detail: String },
    Pullback { q: u32, item: usize, detail: String },
    Transversal { q: u32, detail: String },
    /// `Xi(y)` landed in the union; would mean a bug upstream.
    Final { q: u32 },
    Internal { q: u32, detail: String },
}

/// What happened at one level of the recursion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub q: u32,
    pub family_weight: DyadicWeight,
    pub c_q: DyadicWeight,
    /// Indices of `E_{q,p}` members and of the rest.
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    pub f1_index_sets: Vec<CoordSet>,
    /// Ranks of the `D_k` members with `k < q`, kept out of the windows.
    pub i_star: CoordSet,
    pub selection: Option<Selection>,
    pub counting: Option<CountingChoice>,
    pub windows: Vec<(u32, u32)>,
    pub avoid: Vec<Vec<AvoidRecord>>,
    pub xi_prefix_causal: bool,
    pub xi_preserves_outside: bool,
    /// `F_3` members handled by projection instead of avoidance; the
    /// weight bound at the next level then carries the argument.
    pub reclassified: Vec<usize>,
    /// `(index into F_2, pullback)`.
    pub pullbacks: Vec<(usize, Pullback)>,
    pub transversal: Option<Transversal>,
    pub y: Option<Point>,
    pub z: Option<Point>,
}

impl LevelTrace {
    fn new(q: u32, family_weight: DyadicWeight, c_q: DyadicWeight) -> Self {
        LevelTrace {
            q,
            family_weight,
            c_q,
            f1: Vec::new(),
            f2: Vec::new(),
            f1_index_sets: Vec::new(),
            i_star: CoordSet::empty(),
            selection: None,
            counting: None,
            windows: Vec::new(),
            avoid: Vec::new(),
            xi_prefix_causal: true,
            xi_preserves_outside: true,
            reclassified: Vec::new(),
            pullbacks: Vec::new(),
            transversal: None,
            y: None,
            z: None,
        }
    }

    /// Re-checks the recorded inequalities from the stored data.
    pub fn checks_hold(&self, t: usize) -> bool {
        self.family_weight < self.c_q
            && self.selection.as_ref().is_none_or(|s| s.verify(&self.f1_index_sets, t))
            && self.counting.as_ref().is_none_or(|c| c.inequalities_hold() && c.u.is_chained())
            && self.avoid.iter().flatten().all(|r| r.atom.contains_atom(&r.choice))
            && self.xi_prefix_causal
            && self.xi_preserves_outside
            && self.pullbacks.iter().all(|(r, pb)| pb.holds() || (self.reclassified.contains(r) && pb.superset_ok))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub q: u32,
    pub family_weight: DyadicWeight,
    pub levels: Vec<LevelTrace>,
    pub point: Option<Point>,
    /// The point was checked against every member of the input family.
    pub verified: bool,
    pub failure: Option<StageFailure>,
    /// Atom choices that needed the direct scan.
    pub direct_avoids: usize,
    /// Choices made where the proof's inequality did not hold.
    pub unargued_avoids: usize,
    /// `F_3` members moved to the projection step, over all levels.
    pub reclassified: usize,
}

impl CertificateReport {
    pub fn succeeded(&self) -> bool {
        self.verified && self.failure.is_none()
    }

    pub fn checks_hold(&self, t: usize) -> bool {
        self.levels.iter().all(|l| l.checks_hold(t))
    }
}

fn internal(q: u32) -> impl Fn(TowerError) -> StageFailure {
    move |e| StageFailure::Internal { q, detail: e.to_string() }
}

/// A point of `T` outside `∪F` for `F ⊆ C_{q,p}` with `w(F) < c_q`, built
/// level by level: select windows in the `E_{q,p}` members, choose them by
/// counting, pick avoiding atoms, compose `Xi`, pull the remaining members
/// back to level `q + 1` and recurse; at level `p` a transversal finishes.
/// The returned point is checked against `F` directly.
pub fn main_estimate_certificate(classes: &TowerClasses, family: &[MarkedWeightedSet], q: u32) -> CertificateReport {
    let family_weight: DyadicWeight = family.iter().map(|it| &it.w).sum();
    let mut levels = Vec::new();
    let outcome = level(classes, family, q, &mut levels);
    levels.sort_by_key(|l: &LevelTrace| l.q);
    let avoids = || levels.iter().flat_map(|l| l.avoid.iter().flatten());
    let direct_avoids = avoids().filter(|r| r.route == AvoidRoute::Direct).count();
    let unargued_avoids = avoids().filter(|r| !r.argument_applies).count();
    let reclassified = levels.iter().map(|l| l.reclassified.len()).sum();
    let (point, verified, failure) = match outcome {
        Ok(z) => {
            let ok = family.iter().all(|it| !it.x.contains(&z));
            (Some(z), ok, if ok { None } else { Some(StageFailure::Final { q }) })
        }
        Err(f) => (None, false, Some(f)),
    };
    CertificateReport { q, family_weight, levels, point, verified, failure, direct_avoids, unargued_avoids, reclassified }
}

fn level(
    classes: &TowerClasses,
    family: &[MarkedWeightedSet],
    q: u32,
    traces: &mut Vec<LevelTrace>,
) -> Result<Point, StageFailure> {
    let ctx: SpaceCtx = classes.ctx;
    let params = &classes.params;
    let p = params.p;
    let weight: DyadicWeight = family.iter().map(|it| &it.w).sum();
    let c_q = params.c_of(q).map_err(internal(q))?;
    let mut trace = LevelTrace::new(q, weight.clone(), c_q.clone());
    if weight >= c_q {
        traces.push(trace);
        return Err(StageFailure::Weight { q, weight, c: c_q });
    }
    if q == p {
        if let Some(r) = family.iter().position(|it| !matches!(it.origin, Origin::D(_))) {
            traces.push(trace);
            return Err(StageFailure::Classification { q, detail: format!("member {r} is not in D") });
        }
        let t = transversal_certificate(&ctx, family);
        trace.transversal = Some(t.clone());
        traces.push(trace);
        return match t {
            Transversal::Found { point, .. } => Ok(point),
            Transversal::Refused(r) => Err(StageFailure::Transversal { q, detail: format!("{r:?}") }),
        };
    }

    for (r, it) in family.iter().enumerate() {
        match it.origin {
            Origin::E(k) if k == q => trace.f1.push(r),
            Origin::E(k) if k > q && k < p => trace.f2.push(r),
            Origin::D(k) => {
                if k < q {
                    trace.i_star = trace.i_star.union(&it.i);
                }
                trace.f2.push(r)
            }
            other => {
                traces.push(trace);
                return Err(StageFailure::Classification { q, detail: format!("member {r} has origin {other:?}") });
            }
        }
    }
    trace.f1_index_sets = trace.f1.iter().map(|&r| family[r].i.clone()).collect();
    let f2: Vec<MarkedWeightedSet> = trace.f2.iter().map(|&r| family[r].clone()).collect();

    let mut f4: Vec<usize> = (0..f2.len()).collect();
    let xi = if trace.f1.is_empty() {
        XiMap::identity(&ctx)
    } else {
        let sel = match roberts_select_adaptive(&trace.f1_index_sets, params.t) {
            Ok(s) => s,
            Err(e) => {
                traces.push(trace);
                return Err(StageFailure::Selection { q, detail: e.to_string() });
            }
        };
        let choice = match counting_select_u(&sel.blocks, &f2, params.t, &trace.i_star, q + 6) {
            Ok(c) => c,
            Err(e) => {
                trace.selection = Some(sel);
                traces.push(trace);
                return Err(StageFailure::Counting { q, detail: e.to_string() });
            }
        };
        trace.windows = choice.u.windows.clone();
        if let Some(&r) = choice.f3.iter().find(|r| !choice.f3_windows.iter().any(|w| w.contains(r))) {
            trace.selection = Some(sel);
            trace.counting = Some(choice);
            traces.push(trace);
            return Err(StageFailure::Counting { q, detail: format!("F_3 member {r} is in no window class") });
        }
        let above = classes.oracle(q + 1);
        let w_set = choice.u.window_set();
        let avoid_window = |l: usize, members: &[usize]| -> Result<Vec<AvoidRecord>, TowerError> {
            let (m, n) = trace.windows[l];
            let x_l = &family[trace.f1[sel.perm[l]]].x;
            let f3l: Vec<MarkedWeightedSet> = members.iter().map(|&r| f2[r].clone()).collect();
            AtomId::ROOT.sub_atoms(m).map(|a| atom_avoid(&a, n, x_l, &f3l, params, &above)).collect()
        };
        let mut choices = Vec::with_capacity(trace.windows.len());
        let mut avoid = Vec::with_capacity(trace.windows.len());
        let mut moved: Vec<usize> = Vec::new();
        for l in 0..trace.windows.len() {
            let members: Vec<usize> = choice.f3_windows[l].iter().copied().filter(|r| !moved.contains(r)).collect();
            let records = match avoid_window(l, &members) {
                Ok(rec) => Ok(rec),
                Err(first) => {
                    // too heavy for the window at this scale: send the D members
                    // that keep a rank outside W to the projection step instead
                    let movable: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&r| matches!(f2[r].origin, Origin::D(_)) && !f2[r].i.difference(&w_set).is_empty())
                        .collect();
                    if movable.is_empty() {
                        Err(first)
                    } else {
                        moved.extend(&movable);
                        let rest: Vec<usize> = members.iter().copied().filter(|r| !movable.contains(r)).collect();
                        avoid_window(l, &rest)
                    }
                }
            };
            match records {
                Ok(records) => {
                    choices.push(records.iter().map(|r| r.choice).collect::<Vec<_>>());
                    avoid.push(records);
                }
                Err(e) => {
                    trace.avoid = avoid;
                    trace.reclassified = moved;
                    trace.selection = Some(sel);
                    trace.counting = Some(choice);
                    traces.push(trace);
                    return Err(StageFailure::Avoid { q, window: l, detail: e.to_string() });
                }
            }
        }
        trace.avoid = avoid;
        moved.sort_unstable();
        trace.reclassified = moved;
        f4 = choice.f4.iter().chain(&trace.reclassified).copied().collect();
        f4.sort_unstable();
        trace.selection = Some(sel);
        trace.counting = Some(choice);
        match build_xi(&ctx, &trace.windows, &choices) {
            Ok(xi) => xi,
            Err(e) => {
                traces.push(trace);
                return Err(StageFailure::Internal { q, detail: e.to_string() });
            }
        }
    };
    trace.xi_prefix_causal = xi.is_prefix_causal();
    trace.xi_preserves_outside = xi.preserves_outside_windows();

    let mut next = Vec::with_capacity(f4.len());
    for &r in &f4 {
        let it = &f2[r];
        let verify = match it.origin {
            Origin::E(k) => Some(classes.oracle(k + 1)),
            _ => None,
        };
        let moved = trace.reclassified.contains(&r);
        match lemma55_pullback(it, &xi, q, params, verify.as_ref()) {
            Ok(pb) if pb.holds() || (moved && pb.superset_ok) => {
                next.push(pb.item.clone());
                trace.pullbacks.push((r, pb));
            }
            Ok(pb) => {
                trace.pullbacks.push((r, pb));
                traces.push(trace);
                return Err(StageFailure::Pullback { q, item: trace_index(&f4, r), detail: "recorded check failed".into() });
            }
            Err(e) => {
                traces.push(trace);
                return Err(StageFailure::Pullback { q, item: trace_index(&f4, r), detail: e.to_string() });
            }
        }
    }
    let y = match level(classes, &next, q + 1, traces) {
        Ok(y) => y,
        Err(f) => {
            traces.push(trace);
            return Err(f);
        }
    };
    let z = xi.apply(&y);
    trace.y = Some(y);
    trace.z = Some(z.clone());
    traces.push(trace);
    if family.iter().any(|it| it.x.contains(&z)) {
        return Err(StageFailure::Final { q });
    }
    Ok(z)
}

fn trace_index(f4: &[usize], r: usize) -> usize {
    f4.iter().position(|&x| x == r).unwrap_or(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farah::gen_dk;
    use crate::space::ClopenSet;
    use crate::tower::TowerParams;

    #[test]
    fn empty_family_and_base_level() {
        let ctx = SpaceCtx::new(3).unwrap();
        let params = TowerParams::surrogate();
        let classes = TowerClasses::new(&ctx, &params).unwrap();
        let rep = main_estimate_certificate(&classes, &[], 1);
        assert!(rep.succeeded(), "{rep:?}");
        let d = gen_dk(&ctx, &params.farah, 1, 1000).unwrap();
        let one = vec![d.items.iter().find(|it| it.i.len() == 2).unwrap().clone()];
        let rep = main_estimate_certificate(&classes, &one, 1);
        assert!(rep.succeeded(), "{:?}", rep.failure);
        assert!(rep.checks_hold(params.t));
    }

    #[test]
    fn heavy_family_is_refused() {
        let ctx = SpaceCtx::new(3).unwrap();
        let params = TowerParams::surrogate();
        let classes = TowerClasses::new(&ctx, &params).unwrap();
        let d = gen_dk(&ctx, &params.farah, 1, 1000).unwrap();
        let rep = main_estimate_certificate(&classes, &d.items[..3], 1);
        assert!(matches!(rep.failure, Some(StageFailure::Weight { q: 1, .. })));
        assert!(rep.point.is_none());
    }

    #[test]
    fn thin_member_with_a_d_member() {
        let ctx = SpaceCtx::new(4).unwrap();
        let params = TowerParams::surrogate();
        let mut classes = TowerClasses::new(&ctx, &params).unwrap();
        // z_2, z_3, z_4 all different from 1
        let x = ClopenSet::from_index_predicate(&ctx, |i| (2..=4).all(|n| i & SpaceCtx::field_mask(n) != 0));
        let i = CoordSet::new([1, 2, 3, 4]).unwrap();
        let e = classes.admit(1, x, i).unwrap().expect("thin");
        let d = gen_dk(&ctx, &params.farah, 1, 10_000).unwrap();
        let dm = d.items.iter().find(|it| it.i.len() == 4).unwrap().clone();
        let rep = main_estimate_certificate(&classes, &[e, dm], 1);
        assert!(rep.succeeded(), "{:?}", rep.failure);
        assert!(rep.checks_hold(params.t));
        assert_eq!(rep.levels.len(), 2);
    }
}
