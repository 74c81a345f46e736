//! Numerical laboratory for BCS theory with boundary conditions at infinity.
//!
//! Modules build on each other: [`foundation`] provides grids and potentials, [`tibcs`] solves the
//! translation-invariant problem, [`entropy`] and [`kernels`] implement the matrix and Matsubara
//! inequalities, [`bdg`] builds reference states on a periodic box, [`decomp`] extracts the order
//! parameter, and [`cert`] assembles the free-energy lower bound.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdg;
pub mod cert;
pub mod decomp;
pub mod entropy;
pub mod error;
pub mod foundation;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod tibcs;

pub use error::{Error, Result};
