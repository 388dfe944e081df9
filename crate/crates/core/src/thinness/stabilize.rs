use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{is_i_thin, is_mn_thin};
use crate::cover::{phi_capped, DyadicWeight, MarkedWeightedSet, Origin, WeightedClass};
use crate::space::{ClopenSet, CoordSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StabilizeError {
    #[error("sets {0} and {1} are not disjoint")]
    NotDisjoint(usize, usize),
    #[error("sets live on different spaces")]
    Mixed,
}

/// `E_k` is `(m(i), m(i+1))`-thin, for subsequence positions `k > i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinClaim {
    pub pos: usize,
    pub later: usize,
    pub m: u32,
    pub n: u32,
    pub holds: bool,
}

/// A tail set with its thin index set and capped witness value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailWitness {
    pub pos: usize,
    pub index: usize,
    pub ranks: CoordSet,
    pub thin: bool,
    pub weight_bound: DyadicWeight,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stabilization {
    /// Positions in the input sequence, increasing.
    pub indices: Vec<usize>,
    /// `m(i)`, strictly increasing, with `E_{indices[i]}` `B_{m(i)}`-measurable.
    pub ranks: Vec<u32>,
    pub claims: Vec<ThinClaim>,
    pub q: u32,
    pub tail: Vec<TailWitness>,
}

impl Stabilization {
    pub fn all_claims_hold(&self) -> bool {
        self.claims.iter().all(|c| c.holds)
    }

    pub fn tail_ok(&self) -> bool {
        let cap = DyadicWeight::from_ratio(1, self.q as u64 + 1).expect("q+1 > 0");
        self.tail.iter().all(|t| t.thin && t.weight_bound <= cap)
    }
}

/// Extracts a subsequence along which envelopes stabilize.
///
/// The first remaining set is taken with rank `m(i)`, the least rank at
/// which it is measurable (and above `m(i-1)`); the rest of the sequence
/// is then cut down to the largest class sharing one rank-`m(i)` envelope
/// (lowest first index on ties), so `(E_k)_{m(i)}` is the same for all
/// later picks. Positions past `3q` are checked to be thin for
/// `{m(1), ..., m(3q)}`, which makes them members of the capped class.
pub fn stabilize_subsequence(sets: &[ClopenSet], q: u32) -> Result<Stabilization, StabilizeError> {
    for a in 0..sets.len() {
        if sets[a].ctx() != sets[0].ctx() {
            return Err(StabilizeError::Mixed);
        }
        for b in a + 1..sets.len() {
            if sets[a].intersects(&sets[b]) {
                return Err(StabilizeError::NotDisjoint(a, b));
            }
        }
    }
    let mut out = Stabilization { indices: vec![], ranks: vec![], claims: vec![], q, tail: vec![] };
    let Some(first) = sets.first() else {
        return Ok(out);
    };
    let depth = first.ctx().depth();
    let mut left: Vec<usize> = (0..sets.len()).collect();
    let mut prev = 0u32;
    while let Some(&k) = left.first() {
        let m = sets[k].measurability_rank().max(prev + 1);
        if m > depth {
            break;
        }
        out.indices.push(k);
        out.ranks.push(m);
        prev = m;
        let rest = &left[1..];
        let mut classes: BTreeMap<ClopenSet, Vec<usize>> = BTreeMap::new();
        for &j in rest {
            classes.entry(sets[j].envelope(m)).or_default().push(j);
        }
        left = classes
            .into_values()
            .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
            .unwrap_or_default();
    }
    let r = &out.ranks;
    for i in 0..r.len().saturating_sub(1) {
        for later in i + 2..r.len() {
            let holds = is_mn_thin(&sets[out.indices[later]], r[i], r[i + 1]).unwrap_or(false);
            out.claims.push(ThinClaim { pos: i, later, m: r[i], n: r[i + 1], holds });
        }
    }
    let span = 3 * q as usize;
    if q > 0 && r.len() > span {
        let ranks = CoordSet::new(r[..span].iter().copied()).expect("positive ranks");
        let unit = DyadicWeight::from_ratio(1, q as u64 + 1).expect("q+1 > 0");
        for pos in span..r.len() {
            let index = out.indices[pos];
            let e = &sets[index];
            let thin = is_i_thin(e, &ranks);
            let item = MarkedWeightedSet::new(e.clone(), ranks.clone(), unit.clone()).with_origin(Origin::Thin(q));
            let class = WeightedClass::from_items(e.ctx(), "thin", vec![item]).expect("valid item");
            let weight_bound = phi_capped(&class, e, q).expect("uniform weights");
            out.tail.push(TailWitness { pos, index, ranks: ranks.clone(), thin, weight_bound });
        }
    }
    Ok(out)
}
