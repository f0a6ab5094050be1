use super::grid::AgeGrid;
use super::params::ModelParams;
use super::profile::{Class, SusceptibilityProfile};
use super::state::SystemState;
use crate::error::{Error, Result};

/// A stationary point: `s(a) = amplitude · e^{−decay·a}` (sampled as cell
/// averages in `s`) with constant infectives and force of infection.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub s: Vec<f64>,
    pub amplitude: f64,
    /// `μ + λ_*`.
    pub decay: f64,
    pub acute: f64,
    pub chronic: f64,
    /// `λ_*`: zero for the disease-free state, `λ_E > 0` for the endemic one.
    pub force: f64,
}

impl EquilibriumState {
    pub fn to_state(&self) -> SystemState {
        SystemState::new(self.s.clone(), self.acute, self.chronic)
    }

    pub fn norm(&self, grid: &AgeGrid) -> f64 {
        grid.integrate(&self.s) + self.acute + self.chronic
    }

    pub fn distance_to(&self, state: &SystemState, grid: &AgeGrid) -> f64 {
        state.distance(grid, &self.s, self.acute, self.chronic)
    }

    pub fn is_endemic(&self) -> bool {
        self.force > 0.0
    }
}

/// Closed-form scalars of the endemic equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndemicValues {
    pub force: f64,
    pub acute: f64,
    pub chronic: f64,
    pub decay: f64,
    pub amplitude: f64,
}

// Λ·p_k*[e^{-c·}] per class; c > 0 is guaranteed by the callers.
fn weighted_duals(params: &ModelParams, profile: &SusceptibilityProfile, c: f64) -> (f64, f64) {
    let lam = params.lambda_influx();
    let acute = profile.dual_exp(Class::Acute, c).expect("c > 0");
    let chronic = profile.dual_exp(Class::Chronic, c).expect("c > 0");
    (lam * acute, lam * chronic)
}

/// `Λ Σ_k (β_k/ν_k) p_k*[e^{−(μ+λ)·}]`; equals `R0` at `λ = 0` and is
/// strictly decreasing in `λ`.
pub fn force_balance(params: &ModelParams, profile: &SusceptibilityProfile, force: f64) -> f64 {
    let (acute, chronic) = weighted_duals(params, profile, params.mu() + force);
    params.beta_i() / params.nu_i() * acute + params.beta_j() / params.nu_j() * chronic
}

pub fn basic_reproduction_number(params: &ModelParams, profile: &SusceptibilityProfile) -> f64 {
    force_balance(params, profile, 0.0)
}

/// Unique positive root of `force_balance(λ) = 1`, by bisection on
/// `[0, Λ(β_I/ν_I + β_J/ν_J)]`. The upper end is valid because
/// `p_k*[e^{−(μ+λ)·}] < 1/λ`.
pub fn endemic_force(params: &ModelParams, profile: &SusceptibilityProfile) -> Result<f64> {
    let r0 = basic_reproduction_number(params, profile);
    if r0 <= 1.0 {
        return Err(Error::NoEndemicEquilibrium { r0 });
    }
    let residual = |lam: f64| force_balance(params, profile, lam) - 1.0;
    let mut lo = 0.0;
    let mut hi = params.lambda_influx()
        * (params.beta_i() / params.nu_i() + params.beta_j() / params.nu_j());
    debug_assert!(residual(hi) < 0.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if residual(lo).abs() <= residual(hi).abs() {
        lo
    } else {
        hi
    })
}

pub fn endemic_values(
    params: &ModelParams,
    profile: &SusceptibilityProfile,
) -> Result<EndemicValues> {
    let force = endemic_force(params, profile)?;
    let decay = params.mu() + force;
    let (acute_dual, chronic_dual) = weighted_duals(params, profile, decay);
    Ok(EndemicValues {
        force,
        acute: force / params.nu_i() * acute_dual,
        chronic: force / params.nu_j() * chronic_dual,
        decay,
        amplitude: params.lambda_influx(),
    })
}

pub fn disease_free_equilibrium(params: &ModelParams, grid: &AgeGrid) -> EquilibriumState {
    EquilibriumState {
        s: grid.cell_averages_exp(params.lambda_influx(), params.mu()),
        amplitude: params.lambda_influx(),
        decay: params.mu(),
        acute: 0.0,
        chronic: 0.0,
        force: 0.0,
    }
}

pub fn endemic_equilibrium(
    params: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
) -> Result<EquilibriumState> {
    let v = endemic_values(params, profile)?;
    Ok(EquilibriumState {
        s: grid.cell_averages_exp(v.amplitude, v.decay),
        amplitude: v.amplitude,
        decay: v.decay,
        acute: v.acute,
        chronic: v.chronic,
        force: v.force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> (ModelParams, SusceptibilityProfile) {
        (ModelParams::reference(), SusceptibilityProfile::fitted())
    }

    // Independent oracle: with β_J = 0 the balance equation for c = μ + λ
    // becomes c² + (r − 1 + κ)c − r = 0 when Λβ_I/ν_I = 1.
    fn quadratic_force(mu: f64, kappa: f64, r: f64) -> f64 {
        let b = r - 1.0 + kappa;
        (-b + (b * b + 4.0 * r).sqrt()) / 2.0 - mu
    }

    #[test]
    fn r0_examples() {
        let (p, prof) = reference();
        assert_relative_eq!(
            basic_reproduction_number(&p, &prof),
            50.0 * (1.0 - 0.643 * 0.02 / 0.176),
            max_relative = 1e-13
        );
        let p1 = p.with_beta_j(0.01).unwrap();
        assert_relative_eq!(
            basic_reproduction_number(&p1, &prof),
            46.346_590_909_090_9 + 0.1 * 3.653_409_090_909_09,
            max_relative = 1e-12
        );
        let flat = SusceptibilityProfile::new(0.0, 0.3).unwrap();
        let p2 = p.with_beta_j(7.0).unwrap();
        assert_eq!(
            basic_reproduction_number(&p2, &flat),
            1.0 * 0.5 / (0.02 * 0.5)
        );
    }

    #[test]
    fn endemic_force_matches_quadratic_root() {
        let (p, prof) = reference();
        let lam = endemic_force(&p, &prof).unwrap();
        let oracle = quadratic_force(0.02, 0.643, 0.156);
        assert!((lam - oracle).abs() < 1e-12, "{lam} vs {oracle}");
        assert!((lam - 0.488_054).abs() < 1e-6);
        assert!((force_balance(&p, &prof, lam) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn endemic_force_kappa_zero_closed_form() {
        let p = ModelParams::new(2.0, 0.03, 0.4, 0.0, 0.7, 0.2).unwrap();
        let prof = SusceptibilityProfile::new(0.0, 1.0).unwrap();
        let lam = endemic_force(&p, &prof).unwrap();
        assert_relative_eq!(lam, 2.0 * 0.4 / 0.7 - 0.03, max_relative = 1e-14);
    }

    #[test]
    fn sub_threshold_has_no_endemic_state() {
        let (p, prof) = reference();
        // scale β_I so that R0 = 0.9
        let r0 = basic_reproduction_number(&p, &prof);
        let p = p.with_beta_i(0.5 * 0.9 / r0).unwrap();
        match endemic_force(&p, &prof) {
            Err(Error::NoEndemicEquilibrium { r0 }) => {
                assert_relative_eq!(r0, 0.9, max_relative = 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn balance_is_strictly_decreasing() {
        let (p, prof) = reference();
        let p = p.with_beta_j(0.05).unwrap();
        let values: Vec<f64> = (0..400)
            .map(|k| force_balance(&p, &prof, k as f64 * 0.01))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn endemic_equilibrium_examples() {
        let (p, prof) = reference();
        let grid = AgeGrid::with_default_tol(0.05, 400.0, &p).unwrap();
        let eq = endemic_equilibrium(&p, &prof, &grid).unwrap();
        let lam = quadratic_force(0.02, 0.643, 0.156);
        // p_I*[s_E] = ν_I/β_I = 1
        assert_relative_eq!(eq.acute, lam / 0.5, max_relative = 1e-11);
        assert!((eq.acute - 0.976_108).abs() < 1e-6);
        assert_relative_eq!(
            eq.chronic,
            lam / 0.1 * 0.643 / (0.02 + lam + 0.156),
            max_relative = 1e-11
        );
        assert!((eq.chronic - 4.725_79).abs() < 2e-5);
        assert_relative_eq!(0.5 * eq.acute, eq.force, max_relative = 1e-10);

        let p1 = p.with_beta_j(0.01).unwrap();
        let eq1 = endemic_equilibrium(&p1, &prof, &grid).unwrap();
        assert_relative_eq!(
            p1.force(eq1.acute, eq1.chronic),
            eq1.force,
            max_relative = 1e-10
        );
    }

    #[test]
    fn disease_free_examples() {
        let p = ModelParams::reference();
        let grid = AgeGrid::with_default_tol(0.05, 400.0, &p).unwrap();
        let eq = disease_free_equilibrium(&p, &grid);
        assert_eq!(eq.force, 0.0);
        assert_eq!((eq.acute, eq.chronic), (0.0, 0.0));
        // cell average over the first cell is just below Λ
        assert!((eq.s[0] - 1.0).abs() < 0.02 * 0.05);
        let tail = 50.0 * (-0.02f64 * 400.0).exp();
        assert_relative_eq!(grid.integrate(&eq.s), 50.0 - tail, max_relative = 1e-12);
    }
}
