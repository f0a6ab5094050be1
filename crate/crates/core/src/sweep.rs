//! Perturbation (`β_J = ε`) and extinction (`R0 ≤ 1`) experiments.
//!
//! A run has converged when its relative distance to the target equilibrium
//! stays within `tol` over the final tenth of the horizon. Rows near the
//! threshold (`|R0 − 1| < 0.05`) get ten times the horizon.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lyapunov::{self, FunctionalKind};
use crate::model::{
    basic_reproduction_number, disease_free_equilibrium, endemic_equilibrium, AgeGrid,
    EquilibriumState, ModelParams, SusceptibilityProfile, SystemState,
};
use crate::sim::{self, series, Monitor, SimConfig};
use crate::spectral::{count_unstable_roots, lyapunov_condition, CharacteristicContext};

pub const NEAR_THRESHOLD: f64 = 0.05;
pub const NEAR_THRESHOLD_FACTOR: f64 = 10.0;
/// Fraction of the horizon over which a converged run must stay in the ball.
pub const SETTLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialOutcome {
    pub index: usize,
    /// Not simulated because the initial lies outside the row's class.
    pub excluded: bool,
    pub converged: bool,
    /// Entry time into the tol-ball for good; `None` if never settled.
    pub convergence_time: Option<f64>,
    pub final_distance: f64,
    /// Extinction rows: whether `L` stayed non-increasing.
    pub monotone: Option<bool>,
    /// Extinction rows: whether the initial satisfies `s ≤ s_F`.
    pub dominated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `ε` for perturbation rows, `β_I` for extinction rows.
    pub parameter: f64,
    pub r0: f64,
    /// `λ_E`; `None` for extinction rows.
    pub force: Option<f64>,
    pub acute: f64,
    pub chronic: f64,
    /// `‖x_E^ε − x_E^0‖`; distance of `x_F` to itself for extinction rows.
    pub equilibrium_distance: f64,
    pub horizon: f64,
    /// Largest convergence time over the simulated initials.
    pub convergence_time: Option<f64>,
    /// Largest final relative distance over the simulated initials.
    pub final_distance: f64,
    pub unstable_roots: Option<i64>,
    pub outcomes: Vec<InitialOutcome>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict)
    }
}

fn row_horizon(horizon: f64, r0: f64) -> f64 {
    if (r0 - 1.0).abs() < NEAR_THRESHOLD {
        horizon * NEAR_THRESHOLD_FACTOR
    } else {
        horizon
    }
}

fn check_increasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Precondition(format!("empty {what} list")));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(format!(
            "{what} list must be strictly increasing"
        )));
    }
    Ok(())
}

/// Settling time of a relative-distance series sampled every `dt`, and
/// whether the series stays within `tol` over the final tenth.
fn settle(distance: &[f64], dt: f64, tol: f64) -> (bool, Option<f64>) {
    let n = distance.len();
    let tail_start = ((1.0 - SETTLE_FRACTION) * (n - 1) as f64).floor() as usize;
    let last_out = distance.iter().rposition(|&d| !(d <= tol));
    match last_out {
        None => (true, Some(0.0)),
        Some(k) if k + 1 < n => (k < tail_start, Some((k + 1) as f64 * dt)),
        Some(_) => (false, None),
    }
}

struct Run<'a> {
    params: ModelParams,
    profile: &'a SusceptibilityProfile,
    grid: &'a AgeGrid,
    target: &'a EquilibriumState,
    horizon: f64,
    tol: f64,
}

impl Run<'_> {
    fn go(&self, initial: &SystemState, index: usize, extinction: bool) -> Result<InitialOutcome> {
        let scale = self.target.norm(self.grid);
        let mut cfg =
            SimConfig::new(self.horizon, 1.0 / self.horizon).with_monitor(Monitor::Distance {
                reference: self.target.clone(),
                scale,
            });
        if extinction {
            cfg = cfg.with_monitor(Monitor::Extinction);
        }
        let traj = sim::simulate(initial, &self.params, self.profile, self.grid, &cfg)?;
        let distance = traj
            .series(series::DISTANCE)
            .expect("distance monitor requested");
        let (converged, convergence_time) = settle(distance, self.grid.da(), self.tol);
        let (monotone, dominated) = if extinction {
            let report = lyapunov::monitor(&traj, FunctionalKind::Extinction)?;
            let dominated = initial
                .s
                .iter()
                .zip(&self.target.s)
                .all(|(&v, &f)| v <= f * (1.0 + sim::ENVELOPE_TOL));
            (Some(report.monotone), Some(dominated))
        } else {
            (None, None)
        };
        Ok(InitialOutcome {
            index,
            excluded: false,
            converged,
            convergence_time,
            final_distance: *distance.last().expect("series holds the initial value"),
            monotone,
            dominated,
        })
    }
}

fn summarize(outcomes: &[InitialOutcome]) -> (Option<f64>, f64) {
    let used: Vec<_> = outcomes.iter().filter(|o| !o.excluded).collect();
    let time = used
        .iter()
        .map(|o| o.convergence_time)
        .try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)));
    let dist = used.iter().map(|o| o.final_distance).fold(0.0, f64::max);
    (time, dist)
}

/// Runs every initial at `β_J = ε` for each `ε` and checks convergence to
/// `x_E^ε` plus the spectral certificate of the unperturbed endemic state.
/// The `ε = 0` row only admits initials with `I_0 > 0`.
pub fn perturbation_sweep(
    base: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
    eps_list: &[f64],
    initials: &[SystemState],
    horizon: f64,
    tol: f64,
) -> Result<SweepReport> {
    check_increasing(eps_list, "epsilon")?;
    if let Some(&e) = eps_list.iter().find(|&&e| !(e >= 0.0 && e.is_finite())) {
        return Err(Error::domain("epsilon", e, "a finite value >= 0"));
    }
    let base = base.with_beta_j(0.0)?;
    let r0 = basic_reproduction_number(&base, profile);
    if !(r0 > 1.0) {
        return Err(Error::Precondition(format!(
            "base R0 = {r0} <= 1, no endemic branch"
        )));
    }
    let ctx = CharacteristicContext::new(&base, profile)?;
    let condition = lyapunov_condition(&base, profile, ctx.equilibrium.force);
    if !condition.holds {
        return Err(Error::Precondition(format!(
            "Lyapunov condition fails: r*kappa/(1-kappa) = {} >= mu + lambda_E = {}",
            condition.threshold, condition.decay
        )));
    }
    if initials.is_empty() {
        return Err(Error::Precondition("no initial states".into()));
    }
    for (k, x) in initials.iter().enumerate() {
        x.check_grid(grid)?;
        if !(x.acute + x.chronic > 0.0) {
            return Err(Error::Precondition(format!(
                "initial {k} has I0 + J0 = 0 and never becomes infected"
            )));
        }
    }
    let unstable = count_unstable_roots(&ctx)?.count;
    let reference = endemic_equilibrium(&base, profile, grid)?;

    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<SweepRow> {
            let params = base.with_beta_j(eps)?;
            let r0 = basic_reproduction_number(&params, profile);
            let target = endemic_equilibrium(&params, profile, grid)?;
            let run = Run {
                params,
                profile,
                grid,
                target: &target,
                horizon: row_horizon(horizon, r0),
                tol,
            };
            let outcomes = initials
                .par_iter()
                .enumerate()
                .map(|(k, x)| {
                    if eps == 0.0 && !(x.acute > 0.0) {
                        Ok(InitialOutcome {
                            index: k,
                            excluded: true,
                            converged: false,
                            convergence_time: None,
                            final_distance: f64::NAN,
                            monotone: None,
                            dominated: None,
                        })
                    } else {
                        run.go(x, k, false)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let (convergence_time, final_distance) = summarize(&outcomes);
            let all = outcomes.iter().filter(|o| !o.excluded).all(|o| o.converged);
            let any = outcomes.iter().any(|o| !o.excluded);
            Ok(SweepRow {
                parameter: eps,
                r0,
                force: Some(target.force),
                acute: target.acute,
                chronic: target.chronic,
                equilibrium_distance: reference.distance_to(&target.to_state(), grid),
                horizon: run.horizon,
                convergence_time,
                final_distance,
                unstable_roots: Some(unstable),
                outcomes,
                verdict: any && all && unstable == 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}

/// Runs every initial at each `β_I` (all with `R0 ≤ 1`) and checks
/// convergence to `x_F`. `L` must stay non-increasing for initials with
/// `s ≤ s_F`; for the others it is only reported.
pub fn extinction_sweep(
    base: &ModelParams,
    profile: &SusceptibilityProfile,
    grid: &AgeGrid,
    beta_i_list: &[f64],
    initials: &[SystemState],
    horizon: f64,
    tol: f64,
) -> Result<SweepReport> {
    check_increasing(beta_i_list, "beta_I")?;
    if initials.is_empty() {
        return Err(Error::Precondition("no initial states".into()));
    }
    for x in initials {
        x.check_grid(grid)?;
    }
    let mut params = Vec::with_capacity(beta_i_list.len());
    for (row, &b) in beta_i_list.iter().enumerate() {
        let p = base.with_beta_i(b)?;
        let r0 = basic_reproduction_number(&p, profile);
        if r0 > 1.0 {
            return Err(Error::Precondition(format!(
                "row {row} (beta_I = {b}) has R0 = {r0} > 1"
            )));
        }
        params.push((p, r0));
    }
    let target = disease_free_equilibrium(base, grid);

    let rows = params
        .par_iter()
        .map(|&(p, r0)| -> Result<SweepRow> {
            let run = Run {
                params: p,
                profile,
                grid,
                target: &target,
                horizon: row_horizon(horizon, r0),
                tol,
            };
            let outcomes = initials
                .par_iter()
                .enumerate()
                .map(|(k, x)| run.go(x, k, true))
                .collect::<Result<Vec<_>>>()?;
            let (convergence_time, final_distance) = summarize(&outcomes);
            let verdict = outcomes
                .iter()
                .all(|o| o.converged && (o.dominated == Some(false) || o.monotone == Some(true)));
            Ok(SweepRow {
                parameter: p.beta_i(),
                r0,
                force: None,
                acute: 0.0,
                chronic: 0.0,
                equilibrium_distance: 0.0,
                horizon: run.horizon,
                convergence_time,
                final_distance,
                unstable_roots: None,
                outcomes,
                verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}
