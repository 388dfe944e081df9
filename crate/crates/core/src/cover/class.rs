use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::weight::{DyadicWeight, WeightError};
use crate::space::{ClopenSet, CoordSet, SpaceCtx, SpaceError};

#[derive(Debug, Error)]
pub enum ClassError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("item {index} lives on depth {got}, class depth is {want}")]
    Depth { index: usize, got: u32, want: u32 },
    #[error("item {index} has zero weight")]
    ZeroWeight { index: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where an item came from. Drives the case split of the pullback lemma.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// Member of `D_k`.
    D(u32),
    /// Member of `E_{k,p}`.
    E(u32),
    /// Thin set of Roberts's class, weight `1/(q+1)`.
    Thin(u32),
    #[default]
    User,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::D(k) => write!(f, "D{k}"),
            Origin::E(k) => write!(f, "E{k}"),
            Origin::Thin(q) => write!(f, "R{q}"),
            Origin::User => f.write_str("user"),
        }
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |r: &str| r.parse::<u32>().map_err(|e| format!("bad origin {s:?}: {e}"));
        match s {
            "user" => Ok(Origin::User),
            _ if s.starts_with('D') => Ok(Origin::D(num(&s[1..])?)),
            _ if s.starts_with('E') => Ok(Origin::E(num(&s[1..])?)),
            _ if s.starts_with('R') => Ok(Origin::Thin(num(&s[1..])?)),
            _ => Err(format!("unknown origin {s:?}")),
        }
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn is_user(o: &Origin) -> bool {
    *o == Origin::User
}

/// A marked weighted set `(X, I, w)`.
///
/// Members of `D_k` also carry the forbidden values `tau`, aligned with `I`,
/// so that `X = ∩_{n in I} S_{n,tau(n)}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkedWeightedSet {
    #[serde(rename = "X")]
    pub x: ClopenSet,
    #[serde(rename = "I")]
    pub i: CoordSet,
    pub w: DyadicWeight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "is_user")]
    pub origin: Origin,
}

impl MarkedWeightedSet {
    pub fn new(x: ClopenSet, i: CoordSet, w: DyadicWeight) -> Self {
        MarkedWeightedSet { x, i, w, tau: None, origin: Origin::User }
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    /// `∩_{n in I} S_{n,tau(n)}` with `tau` aligned to the sorted ranks.
    pub fn section_set(ctx: &SpaceCtx, i: &CoordSet, tau: &[u32]) -> Result<ClopenSet, SpaceError> {
        let mut x = ClopenSet::full(ctx);
        for (n, &t) in i.iter().zip(tau) {
            x.intersect_with(&ClopenSet::forbidden_section(ctx, n, t)?);
        }
        Ok(x)
    }

    /// Value `tau(n)` for `n in I`, if the item carries a section form.
    pub fn tau_at(&self, n: u32) -> Option<u32> {
        let pos = self.i.as_slice().binary_search(&n).ok()?;
        self.tau.as_ref().map(|t| t[pos])
    }
}

/// A finite explicit class of marked weighted sets on one space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedClass {
    pub ctx: SpaceCtx,
    pub label: String,
    pub items: Vec<MarkedWeightedSet>,
}

impl WeightedClass {
    pub fn new(ctx: &SpaceCtx, label: impl Into<String>) -> Self {
        WeightedClass { ctx: *ctx, label: label.into(), items: Vec::new() }
    }

    pub fn from_items(ctx: &SpaceCtx, label: impl Into<String>, items: Vec<MarkedWeightedSet>) -> Result<Self, ClassError> {
        let class = WeightedClass { ctx: *ctx, label: label.into(), items };
        class.validate()?;
        Ok(class)
    }

    pub fn validate(&self) -> Result<(), ClassError> {
        for (index, it) in self.items.iter().enumerate() {
            if *it.x.ctx() != self.ctx {
                return Err(ClassError::Depth { index, got: it.x.ctx().depth(), want: self.ctx.depth() });
            }
            it.i.check(&self.ctx)?;
            if it.w.is_zero() {
                return Err(ClassError::ZeroWeight { index });
            }
        }
        Ok(())
    }

    pub fn push(&mut self, item: MarkedWeightedSet) {
        self.items.push(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_weight(&self) -> DyadicWeight {
        self.items.iter().map(|it| &it.w).sum()
    }

    pub fn union_set(&self) -> ClopenSet {
        let mut u = ClopenSet::empty(&self.ctx);
        for it in &self.items {
            u.union_with(&it.x);
        }
        u
    }

    /// Concatenation, keeping `self`'s items first.
    pub fn merged(&self, other: &WeightedClass, label: impl Into<String>) -> WeightedClass {
        let mut items = self.items.clone();
        items.extend(other.items.iter().cloned());
        WeightedClass { ctx: self.ctx, label: label.into(), items }
    }

    /// JSON lines, one item per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ClassError> {
        for it in &self.items {
            let line = serde_json::to_string(it).map_err(|e| ClassError::Parse { line: 0, msg: e.to_string() })?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads a class from JSON lines; blank lines and `#` comments are skipped.
    pub fn read_jsonl<R: BufRead>(ctx: &SpaceCtx, label: &str, input: R) -> Result<Self, ClassError> {
        let mut items = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let item: MarkedWeightedSet =
                serde_json::from_str(t).map_err(|e| ClassError::Parse { line: n + 1, msg: e.to_string() })?;
            items.push(item);
        }
        Self::from_items(ctx, label, items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let ctx = SpaceCtx::new(2).unwrap();
        let i = CoordSet::new([1, 2]).unwrap();
        let x = MarkedWeightedSet::section_set(&ctx, &i, &[1, 3]).unwrap();
        let mut item = MarkedWeightedSet::new(x, i, "0.75".parse().unwrap()).with_origin(Origin::D(1));
        item.tau = Some(vec![1, 3]);
        let user = MarkedWeightedSet::new(ClopenSet::full(&ctx), CoordSet::empty(), DyadicWeight::one());
        let class = WeightedClass::from_items(&ctx, "t", vec![item.clone(), user]).unwrap();
        let text = class.to_jsonl();
        assert!(text.lines().next().unwrap().contains("\"origin\":\"D1\""));
        assert!(!text.lines().nth(1).unwrap().contains("origin"));
        let back = WeightedClass::read_jsonl(&ctx, "t", text.as_bytes()).unwrap();
        assert_eq!(back, class);
        assert_eq!(back.items[0].tau_at(2), Some(3));
    }

    #[test]
    fn corrupted_lines_are_rejected() {
        let ctx = SpaceCtx::new(2).unwrap();
        for bad in [
            "{\"X\":\"2:zz\",\"I\":[1],\"w\":\"1\"}",
            "{\"X\":\"2:ff\",\"I\":[1],\"w\":\"0.1\"}",
            "{\"X\":\"3:ff\",\"I\":[1],\"w\":\"1\"}",
            "{\"X\":\"2:ff\",\"I\":[0],\"w\":\"1\"}",
            "{\"X\":\"2:ff\",\"I\":[5],\"w\":\"1\"}",
            "{\"X\":\"2:ff\",\"I\":[1],\"w\":\"0\"}",
            "not json",
        ] {
            assert!(WeightedClass::read_jsonl(&ctx, "x", bad.as_bytes()).is_err(), "{bad}");
        }
    }
}
