//! Cover-defined submeasures on truncated product spaces.
//!
//! The crate models the clopen algebra of `T_d = prod_{n<=d} {1..2^n}`
//! exactly, evaluates cover submeasures over explicit weighted classes and
//! produces checkable avoidance certificates for the thinness arguments
//! that drive the construction of an exhaustive pathological submeasure.

pub mod space;

pub use space::{atom_translate, AtomId, ClopenSet, CoordSet, Point, SpaceCtx, SpaceError};
pub mod cover;
pub mod thinness;
pub mod farah;
pub mod tower;
pub mod gen;
