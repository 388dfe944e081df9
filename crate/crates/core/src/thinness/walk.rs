use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::select::{roberts_select_adaptive, SelectError, Selection};
use crate::space::{AtomId, ClopenSet, CoordSet, Point, SpaceCtx, SpaceError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalkError {
    #[error("block {step} is not a strictly increasing triple chained after the previous one")]
    BadBlocks { step: usize },
    #[error("no rank-{rank} hole for set {step} inside atom {atom}: the set is not thin as declared")]
    NoHole { step: usize, rank: u32, atom: AtomId },
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Sets `X_l` with their thin index sets `I_l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinFamily {
    pub members: Vec<(ClopenSet, CoordSet)>,
    pub q: usize,
}

/// Which thinness pair was used to avoid a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chance {
    /// `(m_l, n_l)`
    Lower,
    /// `(n_l, r_l)`
    Upper,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkStep {
    pub member: usize,
    pub block: [u32; 3],
    /// Atom in which the hole is sought.
    pub a: AtomId,
    /// Chosen atom inside the hole; disjoint from the member.
    pub c: AtomId,
    pub chance: Chance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub n: u32,
    pub tau: u32,
    pub steps: Vec<WalkStep>,
    pub point: Point,
}

impl WalkTrace {
    /// Re-checks the trace against the family: nesting, disjointness and the
    /// final point.
    pub fn verify(&self, family: &[(ClopenSet, CoordSet)]) -> bool {
        let nested = self.steps.windows(2).all(|w| w[0].c.contains_atom(&w[1].a));
        let inside = self.steps.iter().all(|s| s.a.contains_atom(&s.c));
        let avoid = self.steps.iter().all(|s| !family[s.member].0.meets_atom(&s.c));
        let point_ok = self.steps.iter().all(|s| s.c.contains(&self.point))
            && self.point.coord(self.n) == self.tau
            && family.iter().all(|(x, _)| !x.contains(&self.point));
        nested && inside && avoid && point_ok
    }
}

/// Lowest-index rank-`n` atom inside `a` missing `x`.
fn pick_hole(x: &ClopenSet, a: &AtomId, n: u32, step: usize) -> Result<AtomId, WalkError> {
    let hole = x.max_hole(a, n);
    match hole.first() {
        Some(i) => Ok(AtomId::new(x.ctx(), n, i & SpaceCtx::prefix_mask(n))?),
        None => Err(WalkError::NoHole { step, rank: n, atom: *a }),
    }
}

/// Refine `cur` to rank `to`, fixing `z_n = tau` on the way when `n` falls
/// in `]rank(cur), to]`; remaining new coordinates are 1.
fn extend(cur: &AtomId, to: u32, n: u32, tau: u32, pending: &mut bool) -> AtomId {
    if to <= cur.rank() {
        return *cur;
    }
    if *pending && n > cur.rank() && n <= to {
        *pending = false;
        cur.refine_forcing(to, n, tau)
    } else {
        cur.sub_atoms(to).next().expect("atoms are nonempty")
    }
}

/// Builds `z` with `z_n = tau` outside every `X_l`, given triples
/// `(m_l, n_l, r_l) ⊆ I_l` with `J_1 ≺ J_2 ≺ ...`.
///
/// Step `l` starts from an atom of rank at most `m_l`. Depending on where
/// `n` sits relative to the triple:
/// * `n <= m_l` or `z_n` already fixed or `n > r_l`: refine to rank `m_l`
///   and use the `(m_l, n_l)` hole;
/// * `m_l < n <= n_l`: refine to rank `n_l` with `z_n = tau`, then use the
///   `(n_l, r_l)` hole;
/// * `n_l < n <= r_l`: use the `(m_l, n_l)` hole, then fix `z_n = tau`
///   inside it.
pub fn avoidance_walk(
    members: &[(ClopenSet, CoordSet)],
    blocks: &[[u32; 3]],
    n: u32,
    tau: u32,
    ctx: &SpaceCtx,
) -> Result<WalkTrace, WalkError> {
    ctx.check_value(n, tau)?;
    let mut prev_top = 0;
    for (step, b) in blocks.iter().enumerate() {
        if !(b[0] < b[1] && b[1] < b[2] && b[2] <= ctx.depth() && prev_top <= b[0]) {
            return Err(WalkError::BadBlocks { step });
        }
        prev_top = b[2];
    }
    let mut cur = AtomId::ROOT;
    let mut pending = true;
    let mut steps = Vec::with_capacity(blocks.len());
    for (step, (&[m, nn, r], (x, _))) in blocks.iter().zip(members).enumerate() {
        let live = pending && n <= r;
        let (a, c, chance) = if live && m < n && n <= nn {
            let a = extend(&cur, nn, n, tau, &mut pending);
            let c = pick_hole(x, &a, r, step)?;
            (a, c, Chance::Upper)
        } else if live && nn < n {
            let a = extend(&cur, m, n, tau, &mut pending);
            let c = pick_hole(x, &a, nn, step)?;
            let c_forced = extend(&c, n, n, tau, &mut pending);
            steps.push(WalkStep { member: step, block: [m, nn, r], a, c, chance: Chance::Lower });
            cur = c_forced;
            continue;
        } else {
            let a = extend(&cur, m, n, tau, &mut pending);
            let c = pick_hole(x, &a, nn, step)?;
            (a, c, Chance::Lower)
        };
        steps.push(WalkStep { member: step, block: [m, nn, r], a, c, chance });
        cur = c;
    }
    if pending {
        cur = extend(&cur, n.max(cur.rank()), n, tau, &mut pending);
    }
    let point = cur.first_point(ctx);
    Ok(WalkTrace { n, tau, steps, point })
}

/// Selection with `t = 3` followed by the walk, on the relabeled family.
pub fn prop24_certificate(
    family: &ThinFamily,
    ctx: &SpaceCtx,
    n: u32,
    tau: u32,
) -> Result<(Selection, WalkTrace), WalkError> {
    let sets: Vec<CoordSet> = family.members.iter().map(|(_, i)| i.clone()).collect();
    let sel = roberts_select_adaptive(&sets, 3)?;
    let members: Vec<(ClopenSet, CoordSet)> = sel.perm.iter().map(|&p| family.members[p].clone()).collect();
    let blocks: Vec<[u32; 3]> = sel
        .blocks
        .iter()
        .map(|j| [j.nth(1), j.nth(2), j.nth(3)])
        .collect();
    let mut trace = avoidance_walk(&members, &blocks, n, tau, ctx)?;
    for s in &mut trace.steps {
        s.member = sel.perm[s.member];
    }
    Ok((sel, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_family_forces_coordinate() {
        let ctx = SpaceCtx::new(3).unwrap();
        let t = avoidance_walk(&[], &[], 2, 3, &ctx).unwrap();
        assert_eq!(t.point.coord(2), 3);
        assert!(t.verify(&[]));
    }

    #[test]
    fn single_member_at_depth_three() {
        let ctx = SpaceCtx::new(3).unwrap();
        let x = ClopenSet::forbidden_section(&ctx, 2, 1)
            .unwrap()
            .intersection(&ClopenSet::forbidden_section(&ctx, 3, 1).unwrap());
        let i = CoordSet::new([1, 2, 3]).unwrap();
        let fam = vec![(x.clone(), i)];
        let t = avoidance_walk(&fam, &[[1, 2, 3]], 1, 1, &ctx).unwrap();
        assert_eq!(t.point.coord(1), 1);
        assert!(!x.contains(&t.point));
        assert!(t.point.coord(2) == 1 || t.point.coord(3) == 1);
        assert!(t.verify(&fam));
    }

    #[test]
    fn every_target_position() {
        let ctx = SpaceCtx::new(4).unwrap();
        // thin for {1,2,3}: misses z_2 = 1 or z_3 = 1 everywhere
        let x = ClopenSet::forbidden_section(&ctx, 2, 1)
            .unwrap()
            .intersection(&ClopenSet::forbidden_section(&ctx, 3, 1).unwrap());
        let fam = vec![(x.clone(), CoordSet::new([1, 2, 3]).unwrap())];
        for n in 1..=4 {
            for tau in 1..=(1u32 << n) {
                let t = avoidance_walk(&fam, &[[1, 2, 3]], n, tau, &ctx).unwrap();
                assert!(t.verify(&fam), "n={n} tau={tau}");
            }
        }
        // n > r_1: unconstrained walk, then z_4 forced afterwards
        let t = avoidance_walk(&fam, &[[1, 2, 3]], 4, 9, &ctx).unwrap();
        assert_eq!(t.point.coord(4), 9);
        assert!(!x.contains(&t.point));
    }

    #[test]
    fn non_thin_member_is_reported() {
        let ctx = SpaceCtx::new(3).unwrap();
        let fam = vec![(ClopenSet::full(&ctx), CoordSet::new([1, 2, 3]).unwrap())];
        assert!(matches!(avoidance_walk(&fam, &[[1, 2, 3]], 1, 1, &ctx), Err(WalkError::NoHole { .. })));
        assert!(matches!(avoidance_walk(&fam, &[[2, 1, 3]], 1, 1, &ctx), Err(WalkError::BadBlocks { .. })));
    }
}
