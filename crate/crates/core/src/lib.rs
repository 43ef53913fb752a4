//! Landau–Zener qubit with a time-dependent quantum non-demolition coupling
//! to a damped oscillator ("meter").
//!
//! The crate covers the full qubit ⊗ oscillator Lindblad dynamics, the
//! reduced adiabatic dephasing master equation, the BLP non-Markovianity
//! measure, and stroboscopic (pulsed) coupling protocols with timing noise.

pub mod ame;
pub mod eig;
pub mod error;
pub mod lz;
pub mod nonmarkov;
pub mod open;
pub mod operator;
pub mod qubit;
pub mod strobe;
pub mod trajectory;

pub use error::{Error, Result};
pub use lz::LzParams;
pub use open::MeterParams;
pub use operator::{CMatrix, DensityMatrix, HilbertLayout};
pub use trajectory::{Trajectory, Window};
