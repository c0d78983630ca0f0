//! Numerical companion for small-frequency solitary waves of the perturbed
//! cubic Schrödinger equation `i∂tψ + ∂x²ψ + |ψ|²ψ − g(|ψ|²)ψ = 0`.

pub mod banded;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod grid;
pub mod modulation;
pub mod nonlin;
pub mod operators;
pub mod quad;
pub mod soliton;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Boundary, Field, Grid};
pub use nonlin::{NonlinSpec, Nonlinearity};
pub use operators::{build_operator, LinearOperator, OperatorKind};
pub use soliton::SolitonProfile;
