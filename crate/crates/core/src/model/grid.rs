use super::params::ModelParams;
use super::profile::{Class, SusceptibilityProfile};
use crate::error::{Error, Result};

/// Default bound on the relative tail mass `e^{−μ a_max}` dropped by
/// truncating the age half-line.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-3;

/// Uniform discretization of `[0, a_max]` into cells of width `da`. Densities
/// on the grid are cell averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    da: f64,
    a_max: f64,
    n_cells: usize,
}

impl AgeGrid {
    /// Builds the grid and checks that the disease-free tail beyond `a_max`
    /// carries at most `truncation_tol` of the mass.
    pub fn new(da: f64, a_max: f64, params: &ModelParams, truncation_tol: f64) -> Result<Self> {
        let grid = Self::uniform(da, a_max)?;
        let tail = (-params.mu() * a_max).exp();
        if !(tail <= truncation_tol) {
            return Err(Error::Grid(format!(
                "tail mass e^(-mu a_max) = {tail:.3e} exceeds truncation tolerance \
                 {truncation_tol:.3e}; increase a_max"
            )));
        }
        Ok(grid)
    }

    pub fn with_default_tol(da: f64, a_max: f64, params: &ModelParams) -> Result<Self> {
        Self::new(da, a_max, params, DEFAULT_TRUNCATION_TOL)
    }

    fn uniform(da: f64, a_max: f64) -> Result<Self> {
        if !(da.is_finite() && da > 0.0) {
            return Err(Error::domain("da", da, "a finite value > 0"));
        }
        if !(a_max.is_finite() && a_max > da) {
            return Err(Error::domain("a_max", a_max, "a finite value > da"));
        }
        let n = (a_max / da).round();
        if (n * da - a_max).abs() > 4.0 * f64::EPSILON * a_max {
            return Err(Error::Grid(format!(
                "a_max = {a_max} is not an integer multiple of da = {da}"
            )));
        }
        Ok(Self {
            da,
            a_max,
            n_cells: n as usize,
        })
    }

    /// Same domain with the step divided by `factor` (for convergence studies).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Grid("refinement factor must be >= 1".into()));
        }
        Self::uniform(self.da / factor as f64, self.a_max)
    }

    pub fn da(&self) -> f64 {
        self.da
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell_lo(&self, k: usize) -> f64 {
        k as f64 * self.da
    }

    /// Cell averages of `amplitude · e^{−c a}`, from the exact integral over
    /// each cell.
    pub fn cell_averages_exp(&self, amplitude: f64, c: f64) -> Vec<f64> {
        let shape = if c == 0.0 {
            1.0
        } else {
            -(-c * self.da).exp_m1() / (c * self.da)
        };
        (0..self.n_cells)
            .map(|k| amplitude * (-c * self.cell_lo(k)).exp() * shape)
            .collect()
    }

    /// `∫ s da` for a cell-averaged density.
    pub fn integrate(&self, s: &[f64]) -> f64 {
        s.iter().sum::<f64>() * self.da
    }

    pub fn dual_weights(&self, profile: &SusceptibilityProfile) -> DualWeights {
        let cells = |which| {
            (0..self.n_cells)
                .map(|k| profile.cell_integral(which, self.cell_lo(k), self.da))
                .collect()
        };
        DualWeights {
            acute: cells(Class::Acute),
            chronic: cells(Class::Chronic),
        }
    }
}

/// Per-cell integrals of `p_I` and `p_J`: the discrete dual pairing of a
/// cell-averaged density `s` is `Σ_k s_k · w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights {
    pub acute: Vec<f64>,
    pub chronic: Vec<f64>,
}

impl DualWeights {
    /// `(p_I*[s], p_J*[s])`.
    pub fn pair(&self, s: &[f64]) -> (f64, f64) {
        let mut acute = 0.0;
        let mut chronic = 0.0;
        for ((&v, &wi), &wj) in s.iter().zip(&self.acute).zip(&self.chronic) {
            acute += v * wi;
            chronic += v * wj;
        }
        (acute, chronic)
    }

    pub fn weights(&self, which: Class) -> &[f64] {
        match which {
            Class::Acute => &self.acute,
            Class::Chronic => &self.chronic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_grid_has_8000_cells() {
        let g = AgeGrid::with_default_tol(0.05, 400.0, &ModelParams::reference()).unwrap();
        assert_eq!(g.n_cells(), 8000);
        assert!((g.n_cells() as f64 * g.da() - g.a_max()).abs() <= 4.0 * f64::EPSILON * 400.0);
        assert_eq!(g.refined(2).unwrap().n_cells(), 16000);
    }

    #[test]
    fn rejects_heavy_tail_and_bad_steps() {
        let p = ModelParams::reference();
        // e^{-0.02*100} ≈ 0.135
        assert!(matches!(
            AgeGrid::with_default_tol(0.05, 100.0, &p),
            Err(Error::Grid(_))
        ));
        assert!(AgeGrid::new(0.05, 400.0, &p, 1e-6).is_err());
        assert!(AgeGrid::new(0.05, 800.0, &p, 1e-6).is_ok());
        assert!(AgeGrid::with_default_tol(0.0, 400.0, &p).is_err());
        assert!(AgeGrid::with_default_tol(0.07, 400.0, &p).is_err());
    }

    #[test]
    fn cell_averages_preserve_integral() {
        let g = AgeGrid::with_default_tol(0.05, 400.0, &ModelParams::reference()).unwrap();
        let s = g.cell_averages_exp(1.0, 0.3);
        assert_relative_eq!(g.integrate(&s), 1.0 / 0.3, max_relative = 1e-12);
        assert!(s[0] < 1.0 && s[0] > (-0.3f64 * 0.05).exp());
    }

    #[test]
    fn acute_and_chronic_weights_partition_cells() {
        let g = AgeGrid::with_default_tol(0.05, 400.0, &ModelParams::reference()).unwrap();
        let w = g.dual_weights(&SusceptibilityProfile::fitted());
        for k in (0..g.n_cells()).step_by(97) {
            assert_relative_eq!(w.acute[k] + w.chronic[k], 0.05, max_relative = 1e-13);
        }
    }
}
