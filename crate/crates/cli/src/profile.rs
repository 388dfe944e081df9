use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sublab::cover::{DyadicWeight, WeightedClass, DEFAULT_BUDGET};
use sublab::farah::{Exponent, FarahParams, Mode};
use sublab::tower::TowerParams;
use sublab::SpaceCtx;

pub const DEFAULT_PROFILE: &str = include_str!("../profiles/default.toml");

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub depth: u32,
    pub k_range: [u32; 2],
    pub alpha: Vec<Exponent>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    pub q: u32,
    pub b: u32,
    pub mode: Mode,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub class: Option<PathBuf>,
    #[serde(default)]
    pub sequence: SequenceProfile,
    #[serde(default)]
    pub tower: Option<TowerProfile>,
}

fn default_samples() -> usize {
    200
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceProfile {
    pub length: usize,
    pub block: f64,
    pub chains: usize,
    pub chain_alpha: DyadicWeight,
    pub chain_threshold: DyadicWeight,
}

impl Default for SequenceProfile {
    fn default() -> Self {
        SequenceProfile {
            length: 20,
            block: 0.25,
            chains: 0,
            chain_alpha: DyadicWeight::pow2(-4),
            chain_threshold: DyadicWeight::pow2(-5),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerProfile {
    pub p: u32,
    pub alpha: Vec<Exponent>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    #[serde(rename = "M")]
    pub m: Vec<u64>,
    pub t: usize,
    pub unit: DyadicWeight,
    pub c1: DyadicWeight,
    #[serde(default = "default_max_thin")]
    pub max_thin: usize,
    #[serde(default = "default_density")]
    pub density: f64,
}

fn default_max_thin() -> usize {
    3
}

fn default_density() -> f64 {
    0.6
}

impl Profile {
    pub fn parse(text: &str) -> Result<Self> {
        let p: Profile = toml::from_str(text).context("profile does not parse")?;
        Ok(p)
    }

    /// Reads `path`, or the built-in profile when there is none. A relative
    /// class path is resolved against the profile's directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Self::parse(DEFAULT_PROFILE);
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read profile {}", path.display()))?;
        let mut p = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        if let Some(c) = &p.class {
            if c.is_relative() {
                p.class = Some(path.parent().unwrap_or(Path::new(".")).join(c));
            }
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        SpaceCtx::new(self.depth).context("bad depth")?;
        self.farah().validate().context("bad level parameters")?;
        if !(0.0..=1.0).contains(&self.sequence.block) {
            bail!("sequence.block must lie in [0, 1]");
        }
        if let Some(t) = &self.tower {
            if t.t < 2 {
                bail!("tower.t must be at least 2");
            }
            if t.m.len() + 1 != t.p as usize {
                bail!("tower.M needs one entry per level below p = {}", t.p);
            }
            if !(0.0..=1.0).contains(&t.density) {
                bail!("tower.density must lie in [0, 1]");
            }
            self.tower_params()?.expect("tower section").farah.validate().context("bad tower levels")?;
        }
        Ok(())
    }

    pub fn ctx(&self) -> Result<SpaceCtx> {
        Ok(SpaceCtx::new(self.depth)?)
    }

    pub fn farah(&self) -> FarahParams {
        FarahParams {
            k_range: self.k_range,
            alpha: self.alpha.clone(),
            n: self.n.clone(),
            q: self.q,
            b: self.b,
            mode: self.mode,
        }
    }

    pub fn tower_params(&self) -> Result<Option<TowerParams>> {
        let Some(t) = &self.tower else { return Ok(None) };
        if t.alpha.is_empty() || t.alpha.len() != t.n.len() {
            bail!("tower.alpha and tower.N need the same nonzero length");
        }
        let farah = FarahParams {
            k_range: [1, t.alpha.len() as u32],
            alpha: t.alpha.clone(),
            n: t.n.clone(),
            q: self.q,
            b: self.b,
            mode: self.mode,
        };
        Ok(Some(TowerParams { farah, p: t.p, m: t.m.clone(), t: t.t, unit: t.unit.clone(), c1: t.c1.clone() }))
    }

    pub fn user_class(&self, ctx: &SpaceCtx) -> Result<Option<WeightedClass>> {
        let Some(path) = &self.class else { return Ok(None) };
        let f = File::open(path).with_context(|| format!("cannot open class file {}", path.display()))?;
        let class = WeightedClass::read_jsonl(ctx, "user", BufReader::new(f))
            .with_context(|| format!("class file {} is malformed", path.display()))?;
        Ok(Some(class))
    }
}
