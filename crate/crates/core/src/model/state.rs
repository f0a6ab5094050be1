use super::grid::AgeGrid;
use super::params::ModelParams;
use crate::error::{Error, Result};

/// Susceptible density on the age grid together with the aggregated acute
/// (`I`) and chronic (`J`) infectives.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Cell averages of `s(t, ·)`.
    pub s: Vec<f64>,
    pub acute: f64,
    pub chronic: f64,
    pub time: f64,
}

impl SystemState {
    pub fn new(s: Vec<f64>, acute: f64, chronic: f64) -> Self {
        Self {
            s,
            acute,
            chronic,
            time: 0.0,
        }
    }

    /// `c · s_F` with the given infectives, `s_F(a) = Λ e^{−μa}`.
    pub fn scaled_disease_free(
        params: &ModelParams,
        grid: &AgeGrid,
        scale: f64,
        acute: f64,
        chronic: f64,
    ) -> Self {
        Self::new(
            grid.cell_averages_exp(scale * params.lambda_influx(), params.mu()),
            acute,
            chronic,
        )
    }

    pub fn force(&self, params: &ModelParams) -> f64 {
        params.force(self.acute, self.chronic)
    }

    pub fn check_grid(&self, grid: &AgeGrid) -> Result<()> {
        if self.s.len() != grid.n_cells() {
            return Err(Error::GridMismatch {
                expected: grid.n_cells(),
                got: self.s.len(),
            });
        }
        Ok(())
    }

    pub fn is_non_negative(&self) -> bool {
        self.acute >= 0.0 && self.chronic >= 0.0 && self.s.iter().all(|&v| v >= 0.0)
    }

    /// `∫ s da + I + J`.
    pub fn norm(&self, grid: &AgeGrid) -> f64 {
        grid.integrate(&self.s) + self.acute.abs() + self.chronic.abs()
    }

    /// L¹ distance `∫|s − s'| da + |I − I'| + |J − J'|`.
    pub fn distance(&self, grid: &AgeGrid, s: &[f64], acute: f64, chronic: f64) -> f64 {
        let ds: f64 = self.s.iter().zip(s).map(|(a, b)| (a - b).abs()).sum();
        ds * grid.da() + (self.acute - acute).abs() + (self.chronic - chronic).abs()
    }
}

/// State of the infection-age model: `i(t, τ)` and `j(t, τ)` are densities
/// over time since infection, sharing the age grid's step and extent.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionAgeState {
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub time: f64,
}

impl InfectionAgeState {
    /// Infective mass `acute`/`chronic` spread uniformly over infection ages
    /// `[0, spread)`.
    pub fn uniform_infectives(
        s: Vec<f64>,
        grid: &AgeGrid,
        acute: f64,
        chronic: f64,
        spread: f64,
    ) -> Result<Self> {
        let cells = ((spread / grid.da()).round() as usize).clamp(1, grid.n_cells());
        let width = cells as f64 * grid.da();
        let fill = |mass: f64| {
            let mut v = vec![0.0; grid.n_cells()];
            v[..cells].iter_mut().for_each(|x| *x = mass / width);
            v
        };
        let state = Self {
            s,
            i: fill(acute),
            j: fill(chronic),
            time: 0.0,
        };
        state.check_grid(grid)?;
        Ok(state)
    }

    pub fn check_grid(&self, grid: &AgeGrid) -> Result<()> {
        for len in [self.s.len(), self.i.len(), self.j.len()] {
            if len != grid.n_cells() {
                return Err(Error::GridMismatch {
                    expected: grid.n_cells(),
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn aggregate(&self, grid: &AgeGrid) -> SystemState {
        SystemState {
            s: self.s.clone(),
            acute: grid.integrate(&self.i),
            chronic: grid.integrate(&self.j),
            time: self.time,
        }
    }
}
