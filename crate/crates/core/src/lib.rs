//! Hermite-function spectral toolkit for the Stokes operator `A = −ℙΔ` and the
//! Hermite–Stokes operator `B = ℙ·½(−Δ+|x|²)` on ℝ³.
//!
//! Fields are stored as tensor-product Hermite coefficients. On top of the
//! basis sit the Leray projection, `A`, `B`, their fractional powers, the
//! nonlinear term `C(u,v) = ℙ(u·∇)u`, empirical checks of the trilinear and
//! interpolation estimates, the dissipativity thresholds and tests, and a
//! time integrator for `∂ₜu = −νAu − C(u,u) + ℙf`.

pub mod basis;
pub mod cli;
pub mod config;
pub mod container;
pub mod discretization;
pub mod dissipativity;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod field;
pub mod operators;
pub mod rng;
pub mod tensor;
pub mod truncation;

pub use basis::{BasisTable, MultiIndex};
pub use discretization::Discretization;
pub use error::{Error, Result};
pub use field::{random_field, BasisId, FieldSpec, GridField, SpectralField};
pub use operators::{OpKind, OperatorCache};
pub use truncation::Truncation;
