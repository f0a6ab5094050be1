//! Lyapunov-type functionals and their monotonicity along trajectories.
//!
//! * `L = (β_I/ν_I) I + (β_J/ν_J) J` decreases whenever `Σ_k Γ_k p_k*[s] ≤ 1`,
//!   which holds for `R0 ≤ 1` once `s ≤ s_F`.
//! * `V = ∫ α g(s/s_E) da + I_E g(I/I_E)` with `α = p_I s_E` and
//!   `g(x) = x − ln x − 1` decreases along `β_J = 0` orbits when `α' < 0`.

use crate::error::{Error, Result};
use crate::model::{
    AgeGrid, Class, EquilibriumState, ModelParams, SusceptibilityProfile, SystemState,
};
use crate::sim::{series, Trajectory};

pub const MONOTONE_ABS_TOL: f64 = 1e-10;
pub const MONOTONE_REL_TOL: f64 = 1e-8;

/// `g(x) = x − ln x − 1`, evaluated without cancellation near `x = 1`.
pub fn g(x: f64) -> f64 {
    if x < 0.5 {
        // x − 1 rounds to −1 for tiny x
        return x - x.ln() - 1.0;
    }
    let d = x - 1.0;
    d - d.ln_1p()
}

pub fn extinction_functional(state: &SystemState, params: &ModelParams) -> f64 {
    extinction_value(params, state.acute, state.chronic)
}

pub(crate) fn extinction_value(params: &ModelParams, acute: f64, chronic: f64) -> f64 {
    params.beta_i() / params.nu_i() * acute + params.beta_j() / params.nu_j() * chronic
}

/// Precomputed weights for `V` around one endemic equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct EndemicFunctional {
    // (cell, α_k·da, s_E,k) for cells with positive weight
    cells: Vec<(usize, f64, f64)>,
    acute_eq: f64,
    n_cells: usize,
}

impl EndemicFunctional {
    pub fn new(
        eq: &EquilibriumState,
        profile: &SusceptibilityProfile,
        grid: &AgeGrid,
    ) -> Result<Self> {
        if eq.s.len() != grid.n_cells() {
            return Err(Error::GridMismatch {
                expected: grid.n_cells(),
                got: eq.s.len(),
            });
        }
        if !(eq.acute > 0.0) {
            return Err(Error::Precondition(
                "endemic functional needs an equilibrium with I_E > 0".into(),
            ));
        }
        let weights: Vec<f64> = (0..grid.n_cells())
            .map(|k| profile.cell_integral(Class::Acute, grid.cell_lo(k), grid.da()) * eq.s[k])
            .collect();
        // every cell with positive weight counts; dropping the old-age tail
        // breaks the cancellation against the I term when s ≫ s_E there
        let cells = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, &w)| (k, w, eq.s[k]))
            .collect();
        Ok(Self {
            cells,
            acute_eq: eq.acute,
            n_cells: grid.n_cells(),
        })
    }

    pub fn weighted_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn evaluate(&self, state: &SystemState) -> Result<f64> {
        if state.s.len() != self.n_cells {
            return Err(Error::GridMismatch {
                expected: self.n_cells,
                got: state.s.len(),
            });
        }
        self.value(&state.s, state.acute)
    }

    pub(crate) fn value(&self, s: &[f64], acute: f64) -> Result<f64> {
        let mut v = 0.0;
        for &(k, w, se) in &self.cells {
            if !(s[k] > 0.0) {
                return Err(Error::FunctionalDomain { what: "s", cell: k });
            }
            v += w * g(s[k] / se);
        }
        if !(acute > 0.0) {
            return Err(Error::FunctionalDomain { what: "I", cell: 0 });
        }
        Ok(v + self.acute_eq * g(acute / self.acute_eq))
    }
}

pub fn endemic_functional(
    state: &SystemState,
    eq: &EquilibriumState,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
) -> Result<f64> {
    EndemicFunctional::new(eq, profile, grid)?.evaluate(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    Extinction,
    Endemic,
}

impl FunctionalKind {
    pub fn series_name(self) -> &'static str {
        match self {
            FunctionalKind::Extinction => series::EXTINCTION,
            FunctionalKind::Endemic => series::ENDEMIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub series: Vec<(f64, f64)>,
    /// Largest step-to-step increase (0 when the series never increases).
    pub max_increase: f64,
    /// Largest increase in excess of the per-step tolerance.
    pub worst_excess: f64,
    pub monotone: bool,
}

/// Monotonicity report for a functional recorded along `traj`, with the
/// default tolerance `1e−10 + 1e−8·|value|` per step.
pub fn monitor(traj: &Trajectory, functional: FunctionalKind) -> Result<LyapunovReport> {
    monitor_with_tolerance(traj, functional, MONOTONE_ABS_TOL, MONOTONE_REL_TOL)
}

pub fn monitor_with_tolerance(
    traj: &Trajectory,
    functional: FunctionalKind,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<LyapunovReport> {
    let name = functional.series_name();
    let values = traj
        .series(name)
        .ok_or_else(|| Error::Precondition(format!("trajectory has no `{name}` monitor")))?;
    Ok(monotonicity(&traj.series_times(), values, abs_tol, rel_tol))
}

pub fn monotonicity(times: &[f64], values: &[f64], abs_tol: f64, rel_tol: f64) -> LyapunovReport {
    let mut max_increase = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for w in values.windows(2) {
        let inc = w[1] - w[0];
        max_increase = max_increase.max(inc);
        worst_excess = worst_excess.max(inc - (abs_tol + rel_tol * w[0].abs()));
    }
    LyapunovReport {
        series: times.iter().cloned().zip(values.iter().cloned()).collect(),
        max_increase,
        worst_excess,
        monotone: !(worst_excess > 0.0) && values.iter().all(|v| !v.is_nan()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::endemic_equilibrium;
    use approx::assert_relative_eq;

    fn setup() -> (
        ModelParams,
        SusceptibilityProfile,
        AgeGrid,
        EquilibriumState,
    ) {
        let p = ModelParams::reference();
        let prof = SusceptibilityProfile::fitted();
        let grid = AgeGrid::with_default_tol(0.05, 400.0, &p).unwrap();
        let eq = endemic_equilibrium(&p, &prof, &grid).unwrap();
        (p, prof, grid, eq)
    }

    #[test]
    fn g_is_non_negative_with_unique_zero() {
        assert_eq!(g(1.0), 0.0);
        for k in 1..2000 {
            let x = k as f64 * 0.005;
            if (x - 1.0).abs() > 1e-12 {
                assert!(g(x) > 0.0, "g({x}) = {}", g(x));
            }
        }
        assert_relative_eq!(g(2.0), 1.0 - 2f64.ln(), max_relative = 1e-15);
        assert!(g(1.0 + 1e-9) > 0.0);
    }

    #[test]
    fn extinction_examples() {
        let p = ModelParams::new(1.0, 0.02, 0.5, 0.01, 0.5, 0.1).unwrap();
        let st = SystemState::new(vec![], 1.0, 2.0);
        assert_relative_eq!(extinction_functional(&st, &p), 1.2, max_relative = 1e-15);
        assert_eq!(
            extinction_functional(&SystemState::new(vec![], 0.0, 0.0), &p),
            0.0
        );
        let p0 = p.with_beta_j(0.0).unwrap();
        for j in [0.0, 3.0, 1e6] {
            assert_eq!(
                extinction_functional(&SystemState::new(vec![], 1.0, j), &p0),
                1.0
            );
        }
    }

    #[test]
    fn endemic_functional_examples() {
        let (_, prof, grid, eq) = setup();
        let at_eq = endemic_functional(&eq.to_state(), &eq, &prof, &grid).unwrap();
        assert_eq!(at_eq, 0.0);

        let weights = grid.dual_weights(&prof);
        let dual: f64 = weights.pair(&eq.s).0;
        let doubled = SystemState::new(eq.s.iter().map(|v| 2.0 * v).collect(), eq.acute, 0.0);
        let v = endemic_functional(&doubled, &eq, &prof, &grid).unwrap();
        assert_relative_eq!(v, (1.0 - 2f64.ln()) * dual, max_relative = 1e-10);
        // continuous dual is 1 on the reference configuration
        assert!((v - 0.306_853).abs() < 1e-5);

        let halved = SystemState::new(eq.s.clone(), eq.acute / 2.0, 7.0);
        let v = endemic_functional(&halved, &eq, &prof, &grid).unwrap();
        assert_relative_eq!(v, eq.acute * (0.5 + 2f64.ln() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn endemic_functional_ignores_chronic() {
        let (_, prof, grid, eq) = setup();
        let mut st = SystemState::new(eq.s.iter().map(|v| 1.3 * v).collect(), 0.8, 0.0);
        let f = EndemicFunctional::new(&eq, &prof, &grid).unwrap();
        let base = f.evaluate(&st).unwrap();
        for j in [0.5, 10.0, 1e3] {
            st.chronic = j;
            assert_eq!(f.evaluate(&st).unwrap(), base);
        }
    }

    #[test]
    fn endemic_functional_domain_errors() {
        let (_, prof, grid, eq) = setup();
        let mut st = eq.to_state();
        st.s[3] = 0.0;
        assert_eq!(
            endemic_functional(&st, &eq, &prof, &grid),
            Err(Error::FunctionalDomain { what: "s", cell: 3 })
        );
        let mut st = eq.to_state();
        st.acute = 0.0;
        assert!(endemic_functional(&st, &eq, &prof, &grid).is_err());
        let f = EndemicFunctional::new(&eq, &prof, &grid).unwrap();
        assert_eq!(f.weighted_cells(), grid.n_cells());
    }

    #[test]
    fn monotonicity_tolerance() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let r = monotonicity(&t, &[3.0, 2.0, 2.0, 1.0], 1e-10, 0.0);
        assert!(r.monotone);
        assert_eq!(r.max_increase, 0.0);
        let r = monotonicity(&t, &[3.0, 2.0, 2.0 + 5e-11, 1.0], 1e-10, 0.0);
        assert!(r.monotone);
        let r = monotonicity(&t, &[3.0, 2.0, 2.0 + 1e-9, 1.0], 1e-10, 0.0);
        assert!(!r.monotone);
        assert_relative_eq!(r.max_increase, 1e-9, max_relative = 1e-6);
    }
}
