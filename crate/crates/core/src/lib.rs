//! Variational eigensolver toolkit comparing vanilla gradient descent, quantum
//! natural gradient (QNG), Hamiltonian-aware QNG (H-QNG) and OP-VQITE on an
//! exact statevector simulator, with an optional shot-noise layer and
//! brute-force oracles for every gradient and metric formula.
//!
//! Conventions shared by all modules: qubit 0 is the leftmost Pauli letter and
//! the most significant bit of a statevector index; every parameterized gate
//! is a Pauli rotation `exp(-i theta P / 2)` and each parameter drives exactly
//! one gate.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gradients;
pub mod meter;
pub mod metrics;
pub mod optimizers;
pub mod oracle;
pub mod pauli;
pub mod sampling;
pub mod sim;

pub use error::{Error, Result};
