//! Domain types, the susceptibility profile with closed-form dual pairings,
//! the threshold `R0` and both stationary states.

mod equilibrium;
mod grid;
mod params;
mod profile;
mod state;

pub use equilibrium::{
    basic_reproduction_number, disease_free_equilibrium, endemic_equilibrium, endemic_force,
    endemic_values, force_balance, EndemicValues, EquilibriumState,
};
pub use grid::{AgeGrid, DualWeights, DEFAULT_TRUNCATION_TOL};
pub use params::ModelParams;
pub use profile::{dual_exp, make_profile, Class, SusceptibilityProfile};
pub use state::{InfectionAgeState, SystemState};
