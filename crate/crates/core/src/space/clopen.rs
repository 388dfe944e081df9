use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AtomId, CoordSet, Point, SpaceCtx, SpaceError};

/// A clopen subset of `T_d`, stored as one bit per rank-`d` atom.
///
/// Bits past `atom_count(d)` are always zero, so derived equality and
/// hashing are set equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClopenSet {
    ctx: SpaceCtx,
    bits: Vec<u64>,
}

fn words_for(len: u64) -> usize {
    len.div_ceil(64) as usize
}

impl ClopenSet {
    pub fn empty(ctx: &SpaceCtx) -> Self {
        let len = ctx.atom_count(ctx.depth());
        ClopenSet { ctx: *ctx, bits: vec![0; words_for(len)] }
    }

    pub fn full(ctx: &SpaceCtx) -> Self {
        let mut s = Self::empty(ctx);
        s.bits.iter_mut().for_each(|w| *w = !0);
        s.trim();
        s
    }

    pub fn from_index_predicate<F: FnMut(u64) -> bool>(ctx: &SpaceCtx, mut pred: F) -> Self {
        let mut s = Self::empty(ctx);
        for i in 0..s.universe() {
            if pred(i) {
                s.bits[(i >> 6) as usize] |= 1 << (i & 63);
            }
        }
        s
    }

    pub fn from_indices<I: IntoIterator<Item = u64>>(ctx: &SpaceCtx, indices: I) -> Self {
        let mut s = Self::empty(ctx);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// `S_{n,tau} = {z : z_n != tau}`.
    pub fn forbidden_section(ctx: &SpaceCtx, n: u32, tau: u32) -> Result<Self, SpaceError> {
        Ok(Self::cylinder(ctx, n, tau)?.complement())
    }

    /// `{z : z_n = tau}`.
    pub fn cylinder(ctx: &SpaceCtx, n: u32, tau: u32) -> Result<Self, SpaceError> {
        ctx.check_value(n, tau)?;
        let field = SpaceCtx::field_mask(n);
        let want = (tau as u64 - 1) << SpaceCtx::offset(n);
        Ok(Self::from_index_predicate(ctx, |i| i & field == want))
    }

    pub fn ctx(&self) -> &SpaceCtx {
        &self.ctx
    }

    /// Number of rank-`d` atoms (length of the bit vector).
    pub fn universe(&self) -> u64 {
        self.ctx.atom_count(self.ctx.depth())
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    fn trim(&mut self) {
        let len = self.universe();
        if len % 64 != 0 {
            let last = self.bits.len() - 1;
            self.bits[last] &= (1u64 << (len % 64)) - 1;
        }
    }

    pub fn contains_index(&self, i: u64) -> bool {
        i < self.universe() && self.bits[(i >> 6) as usize] >> (i & 63) & 1 == 1
    }

    pub fn contains(&self, z: &Point) -> bool {
        self.contains_index(z.index())
    }

    pub fn insert(&mut self, i: u64) {
        assert!(i < self.universe(), "atom index {i} out of range");
        self.bits[(i >> 6) as usize] |= 1 << (i & 63);
    }

    pub fn remove(&mut self, i: u64) {
        if i < self.universe() {
            self.bits[(i >> 6) as usize] &= !(1 << (i & 63));
        }
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.universe()
    }

    /// Indices of member atoms, increasing.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(((wi as u64) << 6) | b)
            })
        })
    }

    pub fn first(&self) -> Option<u64> {
        self.iter().next()
    }

    fn same_space(&self, other: &ClopenSet) -> Result<(), SpaceError> {
        if self.ctx != other.ctx {
            return Err(SpaceError::ContextMismatch { left: self.ctx.depth, right: other.ctx.depth });
        }
        Ok(())
    }

    fn zip(&self, other: &ClopenSet, f: impl Fn(u64, u64) -> u64) -> ClopenSet {
        assert_eq!(self.ctx, other.ctx, "sets live on different spaces");
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        ClopenSet { ctx: self.ctx, bits }
    }

    /// Panics on a context mismatch; see [`ClopenSet::try_union`].
    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        self.zip(other, |a, b| a | b)
    }

    pub fn try_union(&self, other: &ClopenSet) -> Result<ClopenSet, SpaceError> {
        self.same_space(other)?;
        Ok(self.union(other))
    }

    pub fn intersection(&self, other: &ClopenSet) -> ClopenSet {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        self.zip(other, |a, b| a & !b)
    }

    pub fn symmetric_difference(&self, other: &ClopenSet) -> ClopenSet {
        self.zip(other, |a, b| a ^ b)
    }

    pub fn complement(&self) -> ClopenSet {
        let mut s = ClopenSet { ctx: self.ctx, bits: self.bits.iter().map(|w| !w).collect() };
        s.trim();
        s
    }

    pub fn union_with(&mut self, other: &ClopenSet) {
        assert_eq!(self.ctx, other.ctx, "sets live on different spaces");
        self.bits.iter_mut().zip(&other.bits).for_each(|(a, b)| *a |= b);
    }

    pub fn intersect_with(&mut self, other: &ClopenSet) {
        assert_eq!(self.ctx, other.ctx, "sets live on different spaces");
        self.bits.iter_mut().zip(&other.bits).for_each(|(a, b)| *a &= b);
    }

    pub fn subtract(&mut self, other: &ClopenSet) {
        assert_eq!(self.ctx, other.ctx, "sets live on different spaces");
        self.bits.iter_mut().zip(&other.bits).for_each(|(a, b)| *a &= !b);
    }

    pub fn is_subset(&self, other: &ClopenSet) -> bool {
        self.ctx == other.ctx && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &ClopenSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| a & b == 0)
    }

    pub fn intersects(&self, other: &ClopenSet) -> bool {
        !self.is_disjoint(other)
    }

    /// Membership table of the rank-`m` atoms that meet the set.
    pub fn atom_hits(&self, m: u32) -> Vec<bool> {
        let mask = SpaceCtx::prefix_mask(m);
        let mut hit = vec![false; self.ctx.atom_count(m) as usize];
        for i in self.iter() {
            hit[(i & mask) as usize] = true;
        }
        hit
    }

    /// `(X)_m`: union of the rank-`m` atoms meeting the set.
    pub fn envelope(&self, m: u32) -> ClopenSet {
        let m = m.min(self.ctx.depth());
        if m == self.ctx.depth() {
            return self.clone();
        }
        let hit = self.atom_hits(m);
        let mask = SpaceCtx::prefix_mask(m);
        ClopenSet::from_index_predicate(&self.ctx, |i| hit[(i & mask) as usize])
    }

    /// Whether the set is `B_m`-measurable.
    pub fn is_measurable(&self, m: u32) -> bool {
        self.envelope(m) == *self
    }

    /// Smallest `m` with the set `B_m`-measurable.
    pub fn measurability_rank(&self) -> u32 {
        (0..=self.ctx.depth()).find(|&m| self.is_measurable(m)).unwrap_or(self.ctx.depth())
    }

    /// True iff membership is unchanged by altering coordinates outside `J`.
    pub fn depends_only_on(&self, j: &CoordSet) -> bool {
        let keep = self.ctx.coord_mask(j);
        (0..self.universe()).all(|i| self.contains_index(i) == self.contains_index(i & keep))
    }

    /// `{z : pi_A(z) in C}`.
    pub fn translate_preimage(&self, a: &AtomId) -> ClopenSet {
        ClopenSet::from_index_predicate(&self.ctx, |i| self.contains_index(a.translate_index(i)))
    }

    /// Largest `B_n`-measurable subset of `A` disjoint from the set:
    /// `A \ (X ∩ A)_n`.
    pub fn max_hole(&self, a: &AtomId, n: u32) -> ClopenSet {
        let mask = SpaceCtx::prefix_mask(n);
        let mut hit = vec![false; self.ctx.atom_count(n) as usize];
        for i in self.iter().filter(|&i| a.contains_index(i)) {
            hit[(i & mask) as usize] = true;
        }
        ClopenSet::from_index_predicate(&self.ctx, |i| a.contains_index(i) && !hit[(i & mask) as usize])
    }

    /// Whether the rank-`n` atom meets the set.
    pub fn meets_atom(&self, atom: &AtomId) -> bool {
        self.iter().any(|i| atom.contains_index(i))
    }

    /// Fraction of atoms in the set, as `(count, universe)`.
    pub fn atom_fraction(&self) -> (u64, u64) {
        (self.count(), self.universe())
    }

    /// Little-endian byte image: bit `b` of byte `j` is atom `8j + b`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.universe().div_ceil(8) as usize;
        self.bits.iter().flat_map(|w| w.to_le_bytes()).take(n).collect()
    }

    pub fn from_bytes(ctx: &SpaceCtx, bytes: &[u8]) -> Result<Self, SpaceError> {
        let mut s = Self::empty(ctx);
        let n = s.universe().div_ceil(8) as usize;
        if bytes.len() != n {
            return Err(SpaceError::Parse(format!("expected {n} bytes, got {}", bytes.len())));
        }
        for (j, &b) in bytes.iter().enumerate() {
            s.bits[j / 8] |= (b as u64) << (8 * (j % 8));
        }
        let before = s.bits.clone();
        s.trim();
        if s.bits != before {
            return Err(SpaceError::Parse("bits set beyond the atom count".into()));
        }
        Ok(s)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(ctx: &SpaceCtx, text: &str) -> Result<Self, SpaceError> {
        let bytes = hex::decode(text.trim()).map_err(|e| SpaceError::Parse(e.to_string()))?;
        Self::from_bytes(ctx, &bytes)
    }

    /// `"d:hex"`.
    pub fn to_text(&self) -> String {
        format!("{}:{}", self.ctx.depth(), self.to_hex())
    }
}

impl FromStr for ClopenSet {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, hx) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| SpaceError::Parse(format!("missing depth prefix in {s:?}")))?;
        let depth = d.parse::<u32>().map_err(|e| SpaceError::Parse(e.to_string()))?;
        let ctx = SpaceCtx::new(depth)?;
        ClopenSet::from_hex(&ctx, hx)
    }
}

impl fmt::Display for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Debug for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClopenSet({}, {} atoms)", self.to_text(), self.count())
    }
}

impl Serialize for ClopenSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for ClopenSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
