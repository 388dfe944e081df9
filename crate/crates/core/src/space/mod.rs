//! Truncated product space `T_d = {1..2} x {1..4} x ... x {1..2^d}`.
//!
//! A point is a coordinate vector `(z_1, ..., z_d)` with `1 <= z_n <= 2^n`.
//! Rank-`m` atoms are the cylinders fixing the first `m` coordinates.
//!
//! Atoms are indexed mixed-radix little-endian in rank order: the digit of
//! rank `n` is `z_n - 1` and has weight `atom_count(n - 1)`. Because every
//! radix is a power of two, the digit of rank `n` is simply the bit field
//! `[n(n-1)/2, n(n+1)/2)` of the index, and the rank-`m` prefix of a rank-`d`
//! atom index is `index & (atom_count(m) - 1)`.

mod clopen;

pub use clopen::ClopenSet;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest depth the bitset representation will ever accept (2^28 atoms).
pub const HARD_DEPTH_CAP: u8 = 7;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("depth {depth} outside 1..={cap}")]
    DepthOutOfRange { depth: u32, cap: u8 },
    #[error("rank {rank} exceeds depth {depth}")]
    RankOutOfRange { rank: u32, depth: u8 },
    #[error("value {value} out of range 1..={max} for rank {rank}")]
    ValueOutOfRange { rank: u32, value: u32, max: u32 },
    #[error("point has {got} coordinates, space depth is {depth}")]
    PointLength { got: usize, depth: u8 },
    #[error("sets live on different spaces (depth {left} vs {right})")]
    ContextMismatch { left: u8, right: u8 },
    #[error("atom index {index} out of range for rank {rank}")]
    AtomIndex { rank: u8, index: u64 },
    #[error("coordinate set contains rank 0")]
    ZeroRank,
    #[error("malformed encoding: {0}")]
    Parse(String),
}

/// Handle to the truncated space `T_d`. Cheap to copy; all tables are
/// computed from the depth on the fly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceCtx {
    depth: u8,
}

impl SpaceCtx {
    /// `make_space` with the default cap.
    pub fn new(depth: u32) -> Result<Self, SpaceError> {
        Self::with_cap(depth, HARD_DEPTH_CAP)
    }

    /// Like [`SpaceCtx::new`] but with a caller-chosen cap (never above the
    /// hard cap).
    pub fn with_cap(depth: u32, cap: u8) -> Result<Self, SpaceError> {
        let cap = cap.min(HARD_DEPTH_CAP);
        if depth == 0 || depth > cap as u32 {
            return Err(SpaceError::DepthOutOfRange { depth, cap });
        }
        Ok(SpaceCtx { depth: depth as u8 })
    }

    pub fn depth(&self) -> u32 {
        self.depth as u32
    }

    /// `2^n`, the number of values of coordinate `n`.
    pub fn radix(&self, n: u32) -> u32 {
        1u32 << n
    }

    pub fn radices(&self) -> Vec<u32> {
        (1..=self.depth()).map(|n| self.radix(n)).collect()
    }

    /// Bit offset of the rank-`n` digit inside an atom index.
    pub(crate) fn offset(n: u32) -> u32 {
        n * (n.saturating_sub(1)) / 2
    }

    /// `log2 atom_count(m) = m(m+1)/2`.
    pub fn index_bits(m: u32) -> u32 {
        m * (m + 1) / 2
    }

    /// Number of rank-`m` atoms, `2 * 4 * ... * 2^m`. `atom_count(0) = 1`.
    pub fn atom_count(&self, m: u32) -> u64 {
        debug_assert!(m <= self.depth());
        1u64 << Self::index_bits(m)
    }

    /// Mask selecting the rank-`m` prefix of an atom index.
    pub fn prefix_mask(m: u32) -> u64 {
        (1u64 << Self::index_bits(m)) - 1
    }

    /// Mask selecting the digit of rank `n`.
    pub fn field_mask(n: u32) -> u64 {
        ((1u64 << n) - 1) << Self::offset(n)
    }

    pub(crate) fn digit(index: u64, n: u32) -> u32 {
        ((index >> Self::offset(n)) & ((1u64 << n) - 1)) as u32
    }

    pub fn check_rank(&self, rank: u32) -> Result<(), SpaceError> {
        if rank > self.depth() {
            return Err(SpaceError::RankOutOfRange { rank, depth: self.depth });
        }
        Ok(())
    }

    pub fn check_value(&self, rank: u32, value: u32) -> Result<(), SpaceError> {
        if rank == 0 {
            return Err(SpaceError::ZeroRank);
        }
        self.check_rank(rank)?;
        if value == 0 || value > self.radix(rank) {
            return Err(SpaceError::ValueOutOfRange { rank, value, max: self.radix(rank) });
        }
        Ok(())
    }

    /// Checked coordinate set on this space.
    pub fn coords<I: IntoIterator<Item = u32>>(&self, ranks: I) -> Result<CoordSet, SpaceError> {
        let set = CoordSet::new(ranks)?;
        set.check(self)?;
        Ok(set)
    }

    /// Mask of all index bits whose rank lies in `ranks`.
    pub(crate) fn coord_mask(&self, ranks: &CoordSet) -> u64 {
        ranks
            .iter()
            .filter(|&n| n <= self.depth())
            .fold(0u64, |acc, n| acc | Self::field_mask(n))
    }

    /// Iterate every rank-`d` atom as a point (lowest index first).
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.atom_count(self.depth())).map(move |i| Point::from_index(self, i))
    }
}

/// A point of `T_d`; coordinates are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<u32>,
}

impl Point {
    pub fn new(ctx: &SpaceCtx, coords: Vec<u32>) -> Result<Self, SpaceError> {
        if coords.len() != ctx.depth() as usize {
            return Err(SpaceError::PointLength { got: coords.len(), depth: ctx.depth });
        }
        for (i, &z) in coords.iter().enumerate() {
            ctx.check_value(i as u32 + 1, z)?;
        }
        Ok(Point { coords })
    }

    pub fn from_index(ctx: &SpaceCtx, index: u64) -> Self {
        let coords = (1..=ctx.depth()).map(|n| SpaceCtx::digit(index, n) + 1).collect();
        Point { coords }
    }

    /// Index of the rank-`d` atom containing the point.
    pub fn index(&self) -> u64 {
        self.coords
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &z)| acc | ((z as u64 - 1) << SpaceCtx::offset(i as u32 + 1)))
    }

    /// Coordinate of rank `n` (1-based).
    pub fn coord(&self, n: u32) -> u32 {
        self.coords[n as usize - 1]
    }

    pub fn set_coord(&mut self, n: u32, value: u32) {
        self.coords[n as usize - 1] = value;
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn depth(&self) -> u32 {
        self.coords.len() as u32
    }

    /// The rank-`m` atom containing this point.
    pub fn atom(&self, m: u32) -> AtomId {
        AtomId { rank: m as u8, index: self.index() & SpaceCtx::prefix_mask(m) }
    }

    pub fn parse(ctx: &SpaceCtx, text: &str) -> Result<Self, SpaceError> {
        let coords = text
            .split(',')
            .map(|s| s.trim().parse::<u32>().map_err(|e| SpaceError::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Point::new(ctx, coords)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|z| z.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// An atom of rank `m`: the cylinder fixing `(z_1, ..., z_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId {
    rank: u8,
    index: u64,
}

impl AtomId {
    /// The unique rank-0 atom, `T` itself.
    pub const ROOT: AtomId = AtomId { rank: 0, index: 0 };

    pub fn new(ctx: &SpaceCtx, rank: u32, index: u64) -> Result<Self, SpaceError> {
        ctx.check_rank(rank)?;
        if index >= ctx.atom_count(rank) {
            return Err(SpaceError::AtomIndex { rank: rank as u8, index });
        }
        Ok(AtomId { rank: rank as u8, index })
    }

    pub fn from_prefix(ctx: &SpaceCtx, prefix: &[u32]) -> Result<Self, SpaceError> {
        ctx.check_rank(prefix.len() as u32)?;
        let mut index = 0u64;
        for (i, &tau) in prefix.iter().enumerate() {
            let n = i as u32 + 1;
            ctx.check_value(n, tau)?;
            index |= (tau as u64 - 1) << SpaceCtx::offset(n);
        }
        Ok(AtomId { rank: prefix.len() as u8, index })
    }

    pub fn rank(&self) -> u32 {
        self.rank as u32
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn prefix(&self) -> Vec<u32> {
        (1..=self.rank()).map(|n| SpaceCtx::digit(self.index, n) + 1).collect()
    }

    /// Whether the rank-`d` atom `index` lies inside this atom.
    pub fn contains_index(&self, index: u64) -> bool {
        index & SpaceCtx::prefix_mask(self.rank()) == self.index
    }

    pub fn contains(&self, z: &Point) -> bool {
        self.contains_index(z.index())
    }

    /// Whether `other` (of rank at least ours) is a sub-atom.
    pub fn contains_atom(&self, other: &AtomId) -> bool {
        other.rank >= self.rank && self.contains_index(other.index)
    }

    /// The rank-`n` sub-atoms, lowest index first.
    pub fn sub_atoms(&self, n: u32) -> impl Iterator<Item = AtomId> {
        let base = self.index;
        let lo = SpaceCtx::index_bits(self.rank());
        let hi = SpaceCtx::index_bits(n.max(self.rank()));
        (0..(1u64 << (hi - lo))).map(move |j| AtomId { rank: n as u8, index: base | (j << lo) })
    }

    /// Smallest-index rank-`n` sub-atom whose coordinate of rank `at` equals
    /// `value` (requires `rank < at <= n`).
    pub fn refine_forcing(&self, n: u32, at: u32, value: u32) -> AtomId {
        debug_assert!(self.rank() < at && at <= n);
        AtomId { rank: n as u8, index: self.index | ((value as u64 - 1) << SpaceCtx::offset(at)) }
    }

    /// The prefix of rank `m <= rank`.
    pub fn truncate(&self, m: u32) -> AtomId {
        AtomId { rank: m as u8, index: self.index & SpaceCtx::prefix_mask(m) }
    }

    /// Smallest-index point of the atom.
    pub fn first_point(&self, ctx: &SpaceCtx) -> Point {
        Point::from_index(ctx, self.index)
    }

    pub fn to_set(&self, ctx: &SpaceCtx) -> ClopenSet {
        ClopenSet::from_index_predicate(ctx, |i| self.contains_index(i))
    }

    /// `pi_A(z)`: first `m` coordinates replaced by the atom's prefix.
    pub fn translate(&self, z: &Point) -> Point {
        let mask = SpaceCtx::prefix_mask(self.rank());
        let index = (z.index() & !mask) | self.index;
        let coords = (1..=z.depth()).map(|n| SpaceCtx::digit(index, n) + 1).collect();
        Point { coords }
    }

    /// `pi_A` on rank-`d` atom indices.
    pub fn translate_index(&self, index: u64) -> u64 {
        (index & !SpaceCtx::prefix_mask(self.rank())) | self.index
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.prefix().iter().map(|z| z.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Free function form of [`AtomId::translate`].
pub fn atom_translate(atom: &AtomId, z: &Point) -> Point {
    atom.translate(z)
}

/// Finite sorted set of positive ranks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct CoordSet {
    ranks: Vec<u32>,
}

impl CoordSet {
    pub fn new<I: IntoIterator<Item = u32>>(ranks: I) -> Result<Self, SpaceError> {
        let mut ranks: Vec<u32> = ranks.into_iter().collect();
        if ranks.contains(&0) {
            return Err(SpaceError::ZeroRank);
        }
        ranks.sort_unstable();
        ranks.dedup();
        Ok(CoordSet { ranks })
    }

    pub fn empty() -> Self {
        CoordSet { ranks: Vec::new() }
    }

    /// `]lo, hi] = {lo+1, ..., hi}`.
    pub fn interval(lo: u32, hi: u32) -> Self {
        CoordSet { ranks: (lo + 1..=hi).collect() }
    }

    pub fn check(&self, ctx: &SpaceCtx) -> Result<(), SpaceError> {
        match self.ranks.last() {
            Some(&r) => ctx.check_rank(r),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn contains(&self, n: u32) -> bool {
        self.ranks.binary_search(&n).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.ranks.iter().copied()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ranks
    }

    pub fn min(&self) -> Option<u32> {
        self.ranks.first().copied()
    }

    pub fn max(&self) -> Option<u32> {
        self.ranks.last().copied()
    }

    /// The `a`-th smallest element, 1-based.
    pub fn nth(&self, a: usize) -> u32 {
        self.ranks[a - 1]
    }

    pub fn intersection(&self, other: &CoordSet) -> CoordSet {
        CoordSet { ranks: self.iter().filter(|&n| other.contains(n)).collect() }
    }

    pub fn difference(&self, other: &CoordSet) -> CoordSet {
        CoordSet { ranks: self.iter().filter(|&n| !other.contains(n)).collect() }
    }

    pub fn union(&self, other: &CoordSet) -> CoordSet {
        let mut ranks: Vec<u32> = self.iter().chain(other.iter()).collect();
        ranks.sort_unstable();
        ranks.dedup();
        CoordSet { ranks }
    }

    /// Complement inside `{1, ..., depth}`.
    pub fn complement(&self, depth: u32) -> CoordSet {
        CoordSet { ranks: (1..=depth).filter(|&n| !self.contains(n)).collect() }
    }

    pub fn is_subset(&self, other: &CoordSet) -> bool {
        self.iter().all(|n| other.contains(n))
    }

    /// Number of elements in `]lo, hi]`.
    pub fn count_in(&self, lo: u32, hi: u32) -> usize {
        self.iter().filter(|&n| n > lo && n <= hi).count()
    }

    /// `self ≺ other`: `max self <= min other` (vacuous when either is empty).
    pub fn precedes(&self, other: &CoordSet) -> bool {
        match (self.max(), other.min()) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        }
    }

    /// Consecutive pairs `(m, n)`.
    pub fn consecutive_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.ranks.windows(2).map(|w| (w[0], w[1]))
    }
}

impl TryFrom<Vec<u32>> for CoordSet {
    type Error = SpaceError;

    fn try_from(v: Vec<u32>) -> Result<Self, Self::Error> {
        CoordSet::new(v)
    }
}

impl From<CoordSet> for Vec<u32> {
    fn from(c: CoordSet) -> Self {
        c.ranks
    }
}

impl FromStr for CoordSet {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches('{').trim_end_matches('}');
        if s.trim().is_empty() {
            return Ok(CoordSet::empty());
        }
        let ranks = s
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| SpaceError::Parse(format!("{p:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        CoordSet::new(ranks)
    }
}

impl fmt::Display for CoordSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranks.iter().map(|z| z.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_counts() {
        assert_eq!(SpaceCtx::new(3).unwrap().atom_count(3), 64);
        assert_eq!(SpaceCtx::new(1).unwrap().atom_count(1), 2);
        let ctx = SpaceCtx::new(5).unwrap();
        let product: u64 = (1..=5).map(|n| 1u64 << n).product();
        assert_eq!(ctx.atom_count(5), product);
        assert_eq!(ctx.atom_count(5), 32768);
        assert_eq!(ctx.atom_count(0), 1);
        assert_eq!(ctx.radices(), vec![2, 4, 8, 16, 32]);
    }

    #[test]
    fn depth_bounds() {
        assert!(SpaceCtx::new(0).is_err());
        assert!(SpaceCtx::new(8).is_err());
        assert!(SpaceCtx::new(7).is_ok());
        assert!(SpaceCtx::with_cap(5, 4).is_err());
        assert!(SpaceCtx::with_cap(8, 9).is_err());
    }

    #[test]
    fn point_index_roundtrip() {
        let ctx = SpaceCtx::new(4).unwrap();
        for i in 0..ctx.atom_count(4) {
            assert_eq!(Point::from_index(&ctx, i).index(), i);
        }
        let z = Point::new(&ctx, vec![2, 3, 1, 16]).unwrap();
        assert_eq!(Point::parse(&ctx, &z.to_string()).unwrap(), z);
        assert!(Point::new(&ctx, vec![3, 1, 1, 1]).is_err());
        assert!(Point::new(&ctx, vec![1, 1, 1]).is_err());
    }

    #[test]
    fn translate_examples() {
        let ctx = SpaceCtx::new(3).unwrap();
        let a = AtomId::from_prefix(&ctx, &[2, 1]).unwrap();
        let z = Point::new(&ctx, vec![1, 1, 1]).unwrap();
        assert_eq!(atom_translate(&a, &z).coords(), &[2, 1, 1]);

        let inside = Point::new(&ctx, vec![2, 1, 7]).unwrap();
        assert_eq!(a.translate(&inside), inside);

        let y = Point::new(&ctx, vec![2, 4, 5]).unwrap();
        assert_eq!(AtomId::ROOT.translate(&y), y);
    }

    #[test]
    fn sub_atoms_are_nested() {
        let ctx = SpaceCtx::new(4).unwrap();
        let a = AtomId::from_prefix(&ctx, &[2, 3]).unwrap();
        let subs: Vec<_> = a.sub_atoms(3).collect();
        assert_eq!(subs.len(), 8);
        for s in &subs {
            assert!(a.contains_atom(s));
            assert_eq!(&s.prefix()[..2], &[2, 3]);
        }
        let forced = a.refine_forcing(4, 4, 9);
        assert_eq!(forced.prefix(), vec![2, 3, 1, 9]);
    }

    #[test]
    fn coord_set_ops() {
        let i: CoordSet = "{1,4,2,4}".parse().unwrap();
        assert_eq!(i.as_slice(), &[1, 2, 4]);
        let j = CoordSet::interval(1, 3);
        assert_eq!(j.as_slice(), &[2, 3]);
        assert_eq!(i.intersection(&j).as_slice(), &[2]);
        assert_eq!(i.difference(&j).as_slice(), &[1, 4]);
        assert_eq!(i.complement(5).as_slice(), &[3, 5]);
        assert!(CoordSet::new([1, 2]).unwrap().precedes(&CoordSet::new([2, 3]).unwrap()));
        assert!(!CoordSet::new([1, 3]).unwrap().precedes(&CoordSet::new([2, 4]).unwrap()));
        assert!(CoordSet::new([0]).is_err());
        let ctx = SpaceCtx::new(3).unwrap();
        assert!(ctx.coords([1, 4]).is_err());
    }
}
