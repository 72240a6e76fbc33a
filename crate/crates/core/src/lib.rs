//! Exact-arithmetic toolkit for inhomogeneous Diophantine approximation.
//!
//! The crate computes, at desk scale and with rigorous enclosures, the objects
//! around affine forms `q ↦ Aq − γ` on integer lattices: nearest-integer
//! distances, the running minima `M_l(t) = min_{l≤‖q‖≤t} ⟨Aq−γ⟩`, partial sums
//! of `S_l(A,γ) = Σ_{t≥l} t^(n−1) M_l(t)^m`, explicit witness constructions in
//! the space of approximation functions, continued-fraction analysis, and
//! closed-form Hausdorff-dimension evaluators.

pub mod cli;
pub mod contfrac;
pub mod dims;
pub mod error;
pub mod exactnum;
pub mod funcspace;
pub mod kurzweil;
pub mod lattice;
pub mod witness;

pub use error::{Error, Result};
