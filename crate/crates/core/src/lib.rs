//! Exact arithmetic and the stratified Bruhat-Tits tree for PGL(2) over a
//! two-dimensional local field F_q((u))((t)).
//!
//! The crate is organized around the valuation tower K > O_K > O':
//!
//! - [`gamma`]: the rank-2 value group Z + Z with lexicographic order.
//! - [`field`]: truncated two-variable Laurent series with precision caps.
//! - [`ideal`]: classification and arithmetic of fractional O'-ideals.
//! - [`matrix`], [`decomp`]: matrices over K, the subgroups B, N, T, P, A,
//!   A_+, U, and the Bruhat / Cartan / Iwasawa decompositions by
//!   valuation-pivoted elimination.
//! - [`weyl`]: the three-involution Weyl group for n = 2 in normal form.
//! - [`tree1d`]: the classical tree of lattice classes over a rank-1 field.
//! - [`tree2d`]: the stratified tree of O'-module classes, its projection,
//!   fibers, apartments, metric, paths and retractions.
//! - [`verify`]: seeded randomized property suites used by the CLI.

pub mod decomp;
pub mod error;
pub mod field;
pub mod fp;
pub mod gamma;
pub mod ideal;
pub mod label;
pub mod matrix;
pub mod parse;
pub mod tree1d;
pub mod tree2d;
pub mod verify;
pub mod weyl;

pub use error::{Error, Result};
pub use field::{FieldElement, Precision, RingId};
pub use gamma::{Gamma, GammaExt};
