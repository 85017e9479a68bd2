//! Finite-volume laboratory for spectral multiplicity of Anderson-type
//! random operators `A + sum_n omega_n C_n`.
//!
//! Everything is dense and finite: resolvent blocks, multiplicity of the
//! characteristic roots of `C_n G_nn(z)`, tree simplicity and atomic
//! spectral measures.

pub mod error;
pub mod greens_function;
pub mod linalg;
pub mod multiplicity;
pub mod operator_model;
pub mod spectral_measures;
pub mod tree_simplicity;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
