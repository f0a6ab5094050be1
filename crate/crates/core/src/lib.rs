//! Numerical laboratory for an age-structured hepatitis B transmission model
//! with acute infectives `I` and chronic carriers `J` aggregated over
//! infection age.
//!
//! The susceptible density `s(t, a)` is transported along characteristics,
//! while `I` and `J` obey
//!
//! ```text
//! I' = λ p_I*[s] − ν_I I,   J' = λ p_J*[s] − ν_J J,   λ = β_I I + β_J J
//! ```
//!
//! with `p_J(a) = κ e^{−r a}` and `p_I = 1 − p_J`. The crate computes the
//! threshold `R0`, both equilibria in closed form, simulates the semiflow,
//! certifies the spectrum of the endemic state, evaluates Lyapunov
//! functionals along orbits and runs the small-`β_J` perturbation
//! experiments.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod quadrature;
pub mod sim;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{
    basic_reproduction_number, disease_free_equilibrium, dual_exp, endemic_equilibrium,
    endemic_force, make_profile, AgeGrid, Class, EquilibriumState, InfectionAgeState, ModelParams,
    SusceptibilityProfile, SystemState,
};
