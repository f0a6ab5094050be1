//! Time integration of the aggregated model along characteristics.
//!
//! The step is locked to the age step (`dt = da`), so transport in age is an
//! exact index shift. Within a step the force of infection is frozen at its
//! start value: `s` is shifted and multiplied by `e^{−(μ+λ)dt}`, the youngest
//! cell receives the boundary inflow `Λ` decayed across the cell, and mass
//! leaving the oldest cell is discarded.
//!
//! The infectives gain exactly the mass that infection removes from `s`
//! during the step (including newborns infected within it), split between the
//! classes by the profile along each cell's path. Recovery and death of
//! infectives is an explicit Euler decay.

use crate::error::{Error, Result};
use crate::lyapunov::{extinction_value, EndemicFunctional};
use crate::model::{
    AgeGrid, DualWeights, EquilibriumState, InfectionAgeState, ModelParams, SusceptibilityProfile,
    SystemState,
};

/// Names of the per-step monitor series.
pub mod series {
    pub const FORCE: &str = "force";
    pub const ACUTE: &str = "I";
    pub const CHRONIC: &str = "J";
    pub const SUSCEPTIBLES: &str = "susceptibles";
    pub const NORM: &str = "norm";
    pub const EXTINCTION: &str = "L";
    pub const ENDEMIC: &str = "V";
    pub const DISTANCE: &str = "distance";
}

/// Optional monitors; force, infectives, total susceptibles and norm are
/// always recorded.
#[derive(Debug, Clone)]
pub enum Monitor {
    /// `L = Γ_I I + Γ_J J`.
    Extinction,
    /// `V` around an endemic equilibrium. Recorded as `+∞` where `g` is
    /// undefined (vanishing density on a weighted cell).
    Endemic(EndemicFunctional),
    /// Distance to a reference state divided by `scale`.
    Distance {
        reference: EquilibriumState,
        scale: f64,
    },
}

impl Monitor {
    fn name(&self) -> &'static str {
        match self {
            Monitor::Extinction => series::EXTINCTION,
            Monitor::Endemic(_) => series::ENDEMIC,
            Monitor::Distance { .. } => series::DISTANCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub horizon: f64,
    /// Snapshots per unit time.
    pub output_stride: f64,
    pub monitors: Vec<Monitor>,
}

impl SimConfig {
    pub fn new(horizon: f64, output_stride: f64) -> Self {
        Self {
            horizon,
            output_stride,
            monitors: Vec::new(),
        }
    }

    pub fn with_monitor(mut self, monitor: Monitor) -> Self {
        self.monitors.push(monitor);
        self
    }

    fn validate(&self, grid: &AgeGrid) -> Result<(usize, usize)> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::domain("horizon", self.horizon, "a finite value > 0"));
        }
        if !(self.output_stride.is_finite() && self.output_stride > 0.0) {
            return Err(Error::domain(
                "output_stride",
                self.output_stride,
                "a finite value > 0",
            ));
        }
        let dt = grid.da();
        let steps = (self.horizon / dt - 1e-9).ceil().max(1.0) as usize;
        let every = ((1.0 / (self.output_stride * dt)).round() as usize).max(1);
        Ok((steps, every))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSeries {
    pub name: &'static str,
    pub values: Vec<f64>,
}

/// Snapshots at a constant stride plus per-step monitor series (entry `n`
/// belongs to `t = n·dt`, starting with the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshots: Vec<SystemState>,
    pub final_state: SystemState,
    pub monitors: Vec<MonitorSeries>,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.monitors
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.values.as_slice())
    }

    pub fn series_times(&self) -> Vec<f64> {
        let n = self.monitors.first().map_or(0, |m| m.values.len());
        (0..n).map(|k| k as f64 * self.dt).collect()
    }

    pub fn steps(&self) -> usize {
        self.series_times().len().saturating_sub(1)
    }
}

/// One-step propagator for a fixed configuration.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
    weights: DualWeights,
}

impl Integrator {
    pub fn new(
        params: &ModelParams,
        profile: &SusceptibilityProfile,
        grid: &AgeGrid,
    ) -> Result<Self> {
        let dt = grid.da();
        let fastest = params.nu_i().max(params.nu_j());
        if fastest * dt > 1.0 {
            return Err(Error::Precondition(format!(
                "explicit step loses positivity: max(nu_I, nu_J)*dt = {} > 1",
                fastest * dt
            )));
        }
        Ok(Self {
            params: *params,
            profile: *profile,
            grid: *grid,
            weights: grid.dual_weights(profile),
        })
    }

    pub fn weights(&self) -> &DualWeights {
        &self.weights
    }

    /// Mass moved from `s` into the (acute, chronic) class during one step
    /// with force `force`, for the pre-step density `s`.
    pub fn infection_transfer(&self, s: &[f64], force: f64) -> (f64, f64) {
        if force == 0.0 {
            return (0.0, 0.0);
        }
        let dt = self.grid.da();
        let c = self.params.mu() + force;
        let x = c * dt;
        let y = (c + self.profile.rate()) * dt;
        let (pi, pj) = self.weights.pair(s);
        let kappa = self.profile.kappa();
        let newborn = self.params.lambda_influx() * dt;
        let (phi_x, phi_y, psi_x, psi_y) = (phi(x), phi(y), psi(x), psi(y));
        // cells at age a carry p_J(a + τ) along their path during the step
        let chronic = phi_y * pj + newborn * kappa * psi_y;
        let acute = phi_x * pi
            + (phi_x - phi_y) * pj
            + newborn * ((1.0 - kappa) * psi_x + kappa * (psi_x - psi_y));
        (force * dt * acute, force * dt * chronic)
    }

    /// Advances `s` in place with force `force` held over the step.
    fn transport(&self, s: &mut [f64], force: f64) {
        let dt = self.grid.da();
        let c = self.params.mu() + force;
        let decay = (-c * dt).exp();
        let n = s.len();
        s.copy_within(0..n - 1, 1);
        s[1..].iter_mut().for_each(|v| *v *= decay);
        s[0] = self.params.lambda_influx() * phi(c * dt);
    }

    pub fn step(&self, state: &mut SystemState, step_index: usize) -> Result<()> {
        let dt = self.grid.da();
        let p = &self.params;
        let force = state.force(p);
        let (gain_i, gain_j) = self.infection_transfer(&state.s, force);
        if !(force.is_finite() && gain_i.is_finite() && gain_j.is_finite()) {
            return Err(failure(
                step_index,
                state.time,
                "non-finite force or transfer",
            ));
        }
        self.transport(&mut state.s, force);
        state.acute += gain_i - dt * p.nu_i() * state.acute;
        state.chronic += gain_j - dt * p.nu_j() * state.chronic;
        state.time = (step_index + 1) as f64 * dt;
        if !(state.acute.is_finite() && state.chronic.is_finite()) {
            return Err(failure(step_index, state.time, "non-finite infectives"));
        }
        Ok(())
    }
}

/// `(1 − e^{−x})/x`, the average of `e^{−u}` over `[0, x]`.
fn phi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(x − 1 + e^{−x})/x² = (1 − φ(x))/x`.
fn psi(x: f64) -> f64 {
    if x < 1e-3 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

fn failure(step: usize, time: f64, what: &str) -> Error {
    Error::NumericalFailure {
        step,
        time,
        what: what.to_string(),
    }
}

pub fn step(
    state: &SystemState,
    params: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
) -> Result<SystemState> {
    state.check_grid(grid)?;
    let integrator = Integrator::new(params, profile, grid)?;
    let mut next = state.clone();
    let index = (state.time / grid.da()).round() as usize;
    integrator.step(&mut next, index)?;
    next.time = state.time + grid.da();
    Ok(next)
}

struct Recorder<'a> {
    params: ModelParams,
    grid: AgeGrid,
    extra: &'a [Monitor],
    series: Vec<MonitorSeries>,
}

impl<'a> Recorder<'a> {
    fn new(params: &ModelParams, grid: &AgeGrid, extra: &'a [Monitor], capacity: usize) -> Self {
        let names = [
            series::FORCE,
            series::ACUTE,
            series::CHRONIC,
            series::SUSCEPTIBLES,
            series::NORM,
        ]
        .into_iter()
        .chain(extra.iter().map(Monitor::name));
        Self {
            params: *params,
            grid: *grid,
            extra,
            series: names
                .map(|name| MonitorSeries {
                    name,
                    values: Vec::with_capacity(capacity),
                })
                .collect(),
        }
    }

    fn record(&mut self, s: &[f64], acute: f64, chronic: f64) {
        let total = self.grid.integrate(s);
        let mut push = {
            let mut k = 0;
            let series = &mut self.series;
            move |v: f64| {
                series[k].values.push(v);
                k += 1;
            }
        };
        push(self.params.force(acute, chronic));
        push(acute);
        push(chronic);
        push(total);
        push(total + acute + chronic);
        for m in self.extra {
            push(match m {
                Monitor::Extinction => extinction_value(&self.params, acute, chronic),
                Monitor::Endemic(f) => f.value(s, acute).unwrap_or(f64::INFINITY),
                Monitor::Distance { reference, scale } => {
                    let state_dist: f64 = s
                        .iter()
                        .zip(&reference.s)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                        * self.grid.da()
                        + (acute - reference.acute).abs()
                        + (chronic - reference.chronic).abs();
                    state_dist / scale
                }
            });
        }
    }
}

fn check_positive(state: &SystemState, step: usize) -> Result<()> {
    if state.is_non_negative() {
        Ok(())
    } else {
        Err(failure(step, state.time, "negative component in snapshot"))
    }
}

pub fn simulate(
    initial: &SystemState,
    params: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
    config: &SimConfig,
) -> Result<Trajectory> {
    initial.check_grid(grid)?;
    if !initial.is_non_negative() {
        return Err(Error::Precondition(
            "initial state has negative components".into(),
        ));
    }
    let (steps, every) = config.validate(grid)?;
    let integrator = Integrator::new(params, profile, grid)?;

    let mut state = initial.clone();
    state.time = 0.0;
    let mut recorder = Recorder::new(params, grid, &config.monitors, steps + 1);
    recorder.record(&state.s, state.acute, state.chronic);
    let mut snapshots = vec![state.clone()];
    for n in 0..steps {
        integrator.step(&mut state, n)?;
        recorder.record(&state.s, state.acute, state.chronic);
        if (n + 1) % every == 0 {
            check_positive(&state, n)?;
            snapshots.push(state.clone());
        }
    }
    check_positive(&state, steps)?;
    Ok(Trajectory {
        dt: grid.da(),
        snapshots,
        final_state: state,
        monitors: recorder.series,
    })
}

/// Infection-age model with constant transmission rates: `i` and `j` are
/// transported in infection age and renewed at `τ = 0` by the infections of
/// each step, decayed across the youngest cell.
/// Snapshots and monitors refer to the aggregated state `(s, ∫i, ∫j)`.
pub fn simulate_infection_age(
    initial: &InfectionAgeState,
    params: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
    config: &SimConfig,
) -> Result<(Trajectory, InfectionAgeState)> {
    initial.check_grid(grid)?;
    let (steps, every) = config.validate(grid)?;
    let integrator = Integrator::new(params, profile, grid)?;
    let dt = grid.da();
    let decay_i = (-params.nu_i() * dt).exp();
    let decay_j = (-params.nu_j() * dt).exp();
    let inflow_i = phi(params.nu_i() * dt) / dt;
    let inflow_j = phi(params.nu_j() * dt) / dt;

    let mut state = initial.clone();
    state.time = 0.0;
    let mut recorder = Recorder::new(params, grid, &config.monitors, steps + 1);
    let aggregates = |st: &InfectionAgeState| (grid.integrate(&st.i), grid.integrate(&st.j));
    let (acute, chronic) = aggregates(&state);
    recorder.record(&state.s, acute, chronic);
    let mut snapshots = vec![state.aggregate(grid)];

    let shift = |v: &mut [f64], decay: f64, inflow: f64| {
        let n = v.len();
        v.copy_within(0..n - 1, 1);
        v[1..].iter_mut().for_each(|x| *x *= decay);
        v[0] = inflow;
    };
    for n in 0..steps {
        let (acute, chronic) = aggregates(&state);
        let force = params.force(acute, chronic);
        let (gain_i, gain_j) = integrator.infection_transfer(&state.s, force);
        if !(force.is_finite() && gain_i.is_finite() && gain_j.is_finite()) {
            return Err(failure(n, state.time, "non-finite force or transfer"));
        }
        integrator.transport(&mut state.s, force);
        shift(&mut state.i, decay_i, gain_i * inflow_i);
        shift(&mut state.j, decay_j, gain_j * inflow_j);
        state.time = (n + 1) as f64 * dt;

        let (acute, chronic) = aggregates(&state);
        recorder.record(&state.s, acute, chronic);
        if (n + 1) % every == 0 {
            let snap = state.aggregate(grid);
            check_positive(&snap, n)?;
            snapshots.push(snap);
        }
    }
    let final_state = state.aggregate(grid);
    check_positive(&final_state, steps)?;
    Ok((
        Trajectory {
            dt,
            snapshots,
            final_state,
            monitors: recorder.series,
        },
        state,
    ))
}

/// `‖U(t)x‖ ≤ (Λ/ν)(1 − e^{−νt}) + ‖x‖e^{−νt}` with `ν = min(μ, ν_I, ν_J)`.
pub fn dissipativity_bound(params: &ModelParams, initial_norm: f64, t: f64) -> f64 {
    let nu = params.nu_min();
    let e = (-nu * t).exp();
    params.lambda_influx() / nu * (1.0 - e) + initial_norm * e
}

/// Slack `bound(t) − norm(t)` at every recorded step.
pub fn dissipativity_check(
    traj: &Trajectory,
    params: &ModelParams,
    initial_norm: f64,
) -> Result<Vec<f64>> {
    let norm = traj
        .series(series::NORM)
        .ok_or_else(|| Error::Precondition("trajectory has no norm monitor".into()))?;
    Ok(traj
        .series_times()
        .iter()
        .zip(norm)
        .map(|(&t, &n)| dissipativity_bound(params, initial_norm, t) - n)
        .collect())
}

/// Relative tolerance of the envelope comparison.
pub const ENVELOPE_TOL: f64 = 1e-12;

/// Number of snapshot cells with `s > s_F (1 + tol)` in the region where the
/// envelope must hold: cells renewed from the boundary (`a < t`), or every
/// cell when the initial density already lies below `s_F`.
pub fn upper_envelope_check(traj: &Trajectory, params: &ModelParams, grid: &AgeGrid) -> usize {
    let envelope = grid.cell_averages_exp(params.lambda_influx(), params.mu());
    let above = |v: f64, e: f64| v > e * (1.0 + ENVELOPE_TOL);
    let dominated = traj
        .snapshots
        .first()
        .is_some_and(|s0| s0.s.iter().zip(&envelope).all(|(&v, &e)| !above(v, e)));
    traj.snapshots
        .iter()
        .chain(std::iter::once(&traj.final_state))
        .map(|snap| {
            let renewed = if dominated {
                snap.s.len()
            } else {
                // cell k covers [k da, (k+1) da); it is renewed once (k+1) da <= t
                ((snap.time / grid.da() + 1e-9).floor() as usize).min(snap.s.len())
            };
            snap.s[..renewed]
                .iter()
                .zip(&envelope)
                .filter(|(&v, &e)| above(v, e))
                .count()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{disease_free_equilibrium, endemic_equilibrium};
    use approx::assert_relative_eq;

    fn setup() -> (ModelParams, SusceptibilityProfile, AgeGrid) {
        let p = ModelParams::reference();
        (
            p,
            SusceptibilityProfile::fitted(),
            AgeGrid::with_default_tol(0.05, 400.0, &p).unwrap(),
        )
    }

    #[test]
    fn disease_free_state_is_a_fixed_point() {
        let (p, prof, grid) = setup();
        let eq = disease_free_equilibrium(&p, &grid);
        let next = step(&eq.to_state(), &p, &prof, &grid).unwrap();
        assert_eq!((next.acute, next.chronic), (0.0, 0.0));
        // the oldest cell loses its inflow from beyond a_max; all others agree
        for k in 0..grid.n_cells() {
            assert_relative_eq!(next.s[k], eq.s[k], max_relative = 1e-13);
        }
    }

    #[test]
    fn endemic_state_moves_less_than_1e6() {
        let (p, prof, grid) = setup();
        let p = p.with_beta_j(0.01).unwrap();
        let eq = endemic_equilibrium(&p, &prof, &grid).unwrap();
        let next = step(&eq.to_state(), &p, &prof, &grid).unwrap();
        assert!(((next.acute - eq.acute) / eq.acute).abs() < 1e-6);
        assert!(((next.chronic - eq.chronic) / eq.chronic).abs() < 1e-6);
        let ds = next
            .s
            .iter()
            .zip(&eq.s)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        assert!(ds < 1e-6, "{ds}");
    }

    #[test]
    fn boundary_inflow_fills_youngest_cell() {
        let (p, prof, grid) = setup();
        let empty = SystemState::new(vec![0.0; grid.n_cells()], 0.0, 0.0);
        let next = step(&empty, &p, &prof, &grid).unwrap();
        assert_relative_eq!(next.s[0], phi(0.02 * 0.05), max_relative = 1e-15);
        assert!(next.s[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_transport_without_infection() {
        let (p, prof, grid) = setup();
        let s0: Vec<f64> = (0..grid.n_cells())
            .map(|k| 1.0 + (k as f64 * 0.01).sin())
            .collect();
        let n = 300;
        let traj = simulate(
            &SystemState::new(s0.clone(), 0.0, 0.0),
            &p,
            &prof,
            &grid,
            &SimConfig::new(n as f64 * 0.05, 1.0),
        )
        .unwrap();
        let sn = &traj.final_state.s;
        let factor = (-0.02 * n as f64 * 0.05f64).exp();
        for k in n..grid.n_cells() {
            assert_relative_eq!(sn[k], s0[k - n] * factor, max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_and_unstable_step_are_rejected() {
        let (p, prof, grid) = setup();
        let bad = SystemState::new(vec![1.0; 10], 0.0, 0.0);
        assert!(matches!(
            step(&bad, &p, &prof, &grid),
            Err(Error::GridMismatch { .. })
        ));
        let fast = ModelParams::new(1.0, 0.02, 0.5, 0.0, 30.0, 0.1).unwrap();
        assert!(matches!(
            Integrator::new(&fast, &prof, &grid),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn trajectory_layout() {
        let (p, prof, grid) = setup();
        let init = SystemState::scaled_disease_free(&p, &grid, 1.0, 0.1, 0.0);
        let traj = simulate(&init, &p, &prof, &grid, &SimConfig::new(10.0, 2.0)).unwrap();
        assert_eq!(traj.steps(), 200);
        assert_eq!(traj.snapshots.len(), 21);
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert!(times.windows(2).all(|w| ((w[1] - w[0]) - 0.5).abs() < 1e-9));
        assert!(traj.snapshots.iter().all(SystemState::is_non_negative));
    }

    #[test]
    fn envelope_region_gating() {
        let (p, prof, grid) = setup();
        let init = SystemState::scaled_disease_free(&p, &grid, 2.0, 0.5, 0.0);
        let traj = simulate(&init, &p, &prof, &grid, &SimConfig::new(20.0, 1.0)).unwrap();
        // the un-renewed cells stay above s_F at t = 0 but are skipped
        assert_eq!(upper_envelope_check(&traj, &p, &grid), 0);
        let init = SystemState::scaled_disease_free(&p, &grid, 0.7, 0.5, 0.2);
        let traj = simulate(&init, &p, &prof, &grid, &SimConfig::new(20.0, 1.0)).unwrap();
        assert_eq!(upper_envelope_check(&traj, &p, &grid), 0);
    }

    #[test]
    fn dissipativity_stationary_and_no_influx() {
        let (p, prof, grid) = setup();
        let eq = disease_free_equilibrium(&p, &grid);
        let x0 = eq.norm(&grid);
        let traj = simulate(&eq.to_state(), &p, &prof, &grid, &SimConfig::new(50.0, 1.0)).unwrap();
        let slack = dissipativity_check(&traj, &p, x0).unwrap();
        assert!(slack.iter().all(|&v| v >= -1e-12));

        let p0 = p.without_influx();
        let init = SystemState::scaled_disease_free(&p, &grid, 0.05, 0.2, 0.1);
        let x0 = init.norm(&grid);
        let traj = simulate(&init, &p0, &prof, &grid, &SimConfig::new(50.0, 1.0)).unwrap();
        let norm = traj.series(series::NORM).unwrap();
        let worst = traj
            .series_times()
            .iter()
            .zip(norm)
            .map(|(t, n)| n / (x0 * (-p.nu_min() * t).exp()) - 1.0)
            .fold(f64::MIN, f64::max);
        // infection moves mass at O(dt^2) more than it removes per step
        assert!(worst < 1e-3, "{worst}");
    }
}
