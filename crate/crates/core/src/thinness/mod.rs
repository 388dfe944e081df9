//! Thinness predicates, the selection lemma, the avoidance walk and the
//! stabilization step of Roberts's construction.
//!
//! `X` is `(m,n)`-thin when every rank-`m` atom contains a rank-`n` atom
//! missing `X`, and `I`-thin when it is `(m,n)`-thin for all `m < n` in `I`.

mod select;
mod stabilize;
mod walk;

pub use select::{roberts_select, roberts_select_adaptive, roberts_select_sharp, Selection, SelectError};
pub use stabilize::{stabilize_subsequence, StabilizeError, Stabilization, TailWitness, ThinClaim};
pub use walk::{avoidance_walk, prop24_certificate, Chance, ThinFamily, WalkError, WalkStep, WalkTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{DyadicWeight, OracleError, Submeasure};
use crate::space::{AtomId, ClopenSet, CoordSet, SpaceCtx};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThinError {
    #[error("rank order violated: need m < n <= depth, got m={m}, n={n}")]
    RankOrder { m: u32, n: u32 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn check_ranks(ctx: &SpaceCtx, m: u32, n: u32) -> Result<(), ThinError> {
    if m >= n || n > ctx.depth() {
        return Err(ThinError::RankOrder { m, n });
    }
    Ok(())
}

/// First rank-`m` atom with no rank-`n` hole, if any.
pub fn thin_failure(x: &ClopenSet, m: u32, n: u32) -> Result<Option<AtomId>, ThinError> {
    let ctx = *x.ctx();
    check_ranks(&ctx, m, n)?;
    let hit = x.atom_hits(n);
    let lo = SpaceCtx::index_bits(m);
    let per = 1u64 << (SpaceCtx::index_bits(n) - lo);
    for a in 0..ctx.atom_count(m) {
        if (0..per).all(|k| hit[(a | (k << lo)) as usize]) {
            return Ok(Some(AtomId::new(&ctx, m, a).expect("index in range")));
        }
    }
    Ok(None)
}

/// `(m,n)`-thinness.
pub fn is_mn_thin(x: &ClopenSet, m: u32, n: u32) -> Result<bool, ThinError> {
    Ok(thin_failure(x, m, n)?.is_none())
}

/// `I`-thinness via consecutive pairs of `I`.
pub fn is_i_thin(x: &ClopenSet, i: &CoordSet) -> bool {
    i.consecutive_pairs().all(|(m, n)| is_mn_thin(x, m, n).unwrap_or(false))
}

/// `I`-thinness checked on every pair `m < n` of `I`.
pub fn is_i_thin_pairwise(x: &ClopenSet, i: &CoordSet) -> bool {
    let r = i.as_slice();
    (0..r.len()).all(|a| (a + 1..r.len()).all(|b| is_mn_thin(x, r[a], r[b]).unwrap_or(false)))
}

/// Holes of a set on one rank-`m` atom: the maximal hole and its preimage.
pub fn hole_preimage(x: &ClopenSet, a: &AtomId, n: u32) -> ClopenSet {
    x.max_hole(a, n).translate_preimage(a)
}

/// Outcome of a `(m, n, mu)`-thinness check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuThinReport {
    pub m: u32,
    pub n: u32,
    pub threshold: DyadicWeight,
    pub holds: bool,
    /// First rank-`m` atom whose hole preimage falls short.
    pub failing_atom: Option<AtomId>,
}

/// `(m,n,mu)`-thinness: every rank-`m` atom `A` has a `B_n`-measurable hole
/// `C ⊆ A \ X` with `mu(pi_A^{-1}(C)) >= threshold`. Checking the maximal
/// hole suffices since `mu` is monotone.
pub fn is_mn_mu_thin<S: Submeasure + ?Sized>(
    x: &ClopenSet,
    m: u32,
    n: u32,
    mu: &S,
    threshold: &DyadicWeight,
) -> Result<bool, ThinError> {
    Ok(mn_mu_thin_report(x, m, n, mu, threshold)?.holds)
}

pub fn mn_mu_thin_report<S: Submeasure + ?Sized>(
    x: &ClopenSet,
    m: u32,
    n: u32,
    mu: &S,
    threshold: &DyadicWeight,
) -> Result<MuThinReport, ThinError> {
    let ctx = *x.ctx();
    check_ranks(&ctx, m, n)?;
    let mut rep = MuThinReport { m, n, threshold: threshold.clone(), holds: true, failing_atom: None };
    for a in AtomId::ROOT.sub_atoms(m) {
        let pre = hole_preimage(x, &a, n);
        if !mu.at_least(&pre, threshold)? {
            rep.holds = false;
            rep.failing_atom = Some(a);
            break;
        }
    }
    Ok(rep)
}

/// `(I, mu)`-thinness over consecutive pairs of `I`.
pub fn is_i_mu_thin<S: Submeasure + ?Sized>(
    x: &ClopenSet,
    i: &CoordSet,
    mu: &S,
    threshold: &DyadicWeight,
) -> Result<bool, ThinError> {
    for (m, n) in i.consecutive_pairs() {
        if !is_mn_mu_thin(x, m, n, mu, threshold)? {
            return Ok(false);
        }
    }
    Ok(true)
}
