//! Distorted (Choquet) expectations of claims on multinomial lattices that
//! approximate Lévy processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`distortion`]: probability and measure distortions, scaling families;
//! * [`choquet`]: Choquet integrals of discrete laws and step functions;
//! * [`levy`]: Lévy triplets, tail queries and the tilted model;
//! * [`lattice`]: moment-matched multinomial step distributions;
//! * [`valuation`]: the time-consistent backward recursion;
//! * [`closedform`]: Black-Scholes type reference values;
//! * [`coupling`]: ordered coupling of finite-activity subordinators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod choquet;
pub mod closedform;
pub mod coupling;
pub mod distortion;
pub mod error;
pub mod lattice;
pub mod levy;
pub mod quad;
pub mod valuation;

pub use error::{Error, Result};
