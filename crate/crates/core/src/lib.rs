//! Lipschitz and BMO norms computed from dyadic grids, the special atoms
//! that bridge dyadic and full Hardy spaces, and experiments around them.
//!
//! Functions are exact piecewise polynomials on dyadic cells, stored in
//! per-cell orthonormal Legendre coefficients. Every norm is a supremum of
//! exactly computed sharp values over a finite [`dyadic::ScaleWindow`].

pub mod atoms;
pub mod dyadic;
pub mod error;
pub mod harness;
pub mod legendre;
pub mod lipnorm;
pub mod par;
pub mod pwpoly;
pub mod quadrature;
pub mod report;

pub use atoms::{a_alpha, atom_decompose, hp_split, validate_atom, AtomCert, SpecialAtomId, SpecialBasis};
pub use dyadic::{Cube, Dyadic, DyadicBox, DyadicCube, Family, ScaleWindow, SpecialCube};
pub use error::{Error, Result};
pub use lipnorm::{lambda_norm, theorem_a_estimate, NormReport};
pub use par::Exec;
pub use pwpoly::{AlphaContext, PPFunction};
