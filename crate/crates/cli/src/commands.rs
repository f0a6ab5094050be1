//! One function per command. Each writes `summary.json` plus its own CSV
//! files into the output directory and reports whether every asserted
//! property held.

use std::path::Path;

use semiflow_core::calibrate::{edmunds_samples, fit_exponential, parse_samples};
use semiflow_core::lyapunov::{monitor, EndemicFunctional, FunctionalKind, LyapunovReport};
use semiflow_core::model::force_balance;
use semiflow_core::sim::{
    dissipativity_check, series, simulate, simulate_infection_age, upper_envelope_check, Monitor,
    SimConfig, Trajectory,
};
use semiflow_core::spectral::{
    count_unstable_roots, delta, imaginary_axis_margin, kappa0_roots, lyapunov_condition,
    CharacteristicContext, Complex64,
};
use semiflow_core::sweep::{extinction_sweep, perturbation_sweep, SweepReport};
use semiflow_core::{
    basic_reproduction_number, disease_free_equilibrium, dual_exp, endemic_equilibrium, Class,
    EquilibriumState, InfectionAgeState, ModelParams, SystemState,
};
use serde_json::{json, Value};

use crate::config::{FitSource, InitialSpec, RunConfig};
use crate::output::{to_json, write_file, Cell, Table};
use crate::RunError;

/// Dissipativity slack allowed per unit of `Λ/ν`.
pub const DISSIPATIVITY_TOL: f64 = 1e-4;
/// Accepted band for the aggregation refinement ratio.
pub const CROSSCHECK_BAND: (f64, f64) = (1.7, 2.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    R0,
    Equilibria,
    Simulate,
    Crosscheck,
    Spectrum,
    Lyapunov,
    Fit,
    Sweep,
    Extinction,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::R0,
        Command::Equilibria,
        Command::Simulate,
        Command::Crosscheck,
        Command::Spectrum,
        Command::Lyapunov,
        Command::Fit,
        Command::Sweep,
        Command::Extinction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::R0 => "r0",
            Command::Equilibria => "equilibria",
            Command::Simulate => "simulate",
            Command::Crosscheck => "crosscheck",
            Command::Spectrum => "spectrum",
            Command::Lyapunov => "lyapunov",
            Command::Fit => "fit",
            Command::Sweep => "sweep",
            Command::Extinction => "extinction",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub verdict: bool,
    pub files: Vec<String>,
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Emitter<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        write_file(self.dir, name, contents).map_err(|source| RunError::Io {
            path: self.dir.join(name),
            source,
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn summary(
        &mut self,
        cmd: Command,
        verdict: bool,
        mut body: Value,
    ) -> Result<Outcome, RunError> {
        body["command"] = json!(cmd.name());
        body["verdict"] = json!(verdict);
        self.write("summary.json", &to_json(&body))?;
        Ok(Outcome {
            verdict,
            files: std::mem::take(&mut self.files),
        })
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut out = Emitter {
        dir: &cfg.out_dir,
        files: Vec::new(),
    };
    match cmd {
        Command::R0 => r0(cfg, &mut out),
        Command::Equilibria => equilibria(cfg, &mut out),
        Command::Simulate => trajectory_command(cmd, cfg, &mut out),
        Command::Lyapunov => trajectory_command(cmd, cfg, &mut out),
        Command::Crosscheck => crosscheck(cfg, &mut out),
        Command::Spectrum => spectrum(cfg, &mut out),
        Command::Fit => fit(cfg, &mut out),
        Command::Sweep => sweep(cfg, &mut out),
        Command::Extinction => extinction(cfg, &mut out),
    }
}

fn initial_state(cfg: &RunConfig, spec: &InitialSpec) -> SystemState {
    SystemState::scaled_disease_free(&cfg.params, &cfg.grid, spec.scale, spec.acute, spec.chronic)
}

fn endemic_json(cfg: &RunConfig, eq: Option<&EquilibriumState>) -> Value {
    match eq {
        None => Value::Null,
        Some(eq) => json!({
            "force": eq.force,
            "I": eq.acute,
            "J": eq.chronic,
            "susceptibles": cfg.grid.integrate(&eq.s),
            "balance_residual": force_balance(&cfg.params, &cfg.profile, eq.force) - 1.0,
        }),
    }
}

fn endemic_state(cfg: &RunConfig, r0: f64) -> Result<Option<EquilibriumState>, RunError> {
    if r0 > 1.0 {
        Ok(Some(endemic_equilibrium(
            &cfg.params,
            &cfg.profile,
            &cfg.grid,
        )?))
    } else {
        Ok(None)
    }
}

fn r0(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let r0 = basic_reproduction_number(&cfg.params, &cfg.profile);
    let unperturbed = basic_reproduction_number(&cfg.params.with_beta_j(0.0)?, &cfg.profile);
    let acute = dual_exp(&cfg.profile, Class::Acute, cfg.params.mu())?;
    let chronic = dual_exp(&cfg.profile, Class::Chronic, cfg.params.mu())?;
    out.summary(
        Command::R0,
        true,
        json!({
            "R0": r0,
            "R0_beta_J_zero": unperturbed,
            "dual_acute_at_mu": acute,
            "dual_chronic_at_mu": chronic,
            "endemic_exists": r0 > 1.0,
        }),
    )
}

fn equilibria(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let r0 = basic_reproduction_number(&cfg.params, &cfg.profile);
    let free = disease_free_equilibrium(&cfg.params, &cfg.grid);
    let endemic = endemic_state(cfg, r0)?;
    out.summary(
        Command::Equilibria,
        true,
        json!({
            "R0": r0,
            "disease_free": {
                "force": 0.0,
                "I": 0.0,
                "J": 0.0,
                "susceptibles": cfg.grid.integrate(&free.s),
            },
            "endemic": endemic_json(cfg, endemic.as_ref()),
        }),
    )
}

fn report_json(report: Option<&LyapunovReport>, asserted: bool) -> Value {
    match report {
        None => Value::Null,
        Some(r) => json!({
            "asserted": asserted,
            "monotone": r.monotone,
            "max_increase": r.max_increase,
            "worst_excess": r.worst_excess,
            "initial": r.series.first().map(|p| p.1),
            "final": r.series.last().map(|p| p.1),
        }),
    }
}

fn trajectory_table(traj: &Trajectory, slack: &[f64]) -> Table {
    let mut t = Table::new(&["t", "force", "I", "J", "susceptibles", "L", "V", "slack"]);
    let col = |name| traj.series(name);
    let (force, acute, chronic, total) = (
        col(series::FORCE).expect("always recorded"),
        col(series::ACUTE).expect("always recorded"),
        col(series::CHRONIC).expect("always recorded"),
        col(series::SUSCEPTIBLES).expect("always recorded"),
    );
    let (l, v) = (col(series::EXTINCTION), col(series::ENDEMIC));
    for snap in &traj.snapshots {
        let n = (snap.time / traj.dt).round() as usize;
        t.push(vec![
            snap.time.into(),
            force[n].into(),
            acute[n].into(),
            chronic[n].into(),
            total[n].into(),
            l.map(|s| s[n]).into(),
            v.map(|s| s[n]).into(),
            slack[n].into(),
        ]);
    }
    t
}

/// `simulate` asserts dissipativity and the upper envelope; `lyapunov`
/// asserts monotonicity of whichever functional the configuration
/// supports. Both emit the same trajectory table.
fn trajectory_command(
    cmd: Command,
    cfg: &RunConfig,
    out: &mut Emitter<'_>,
) -> Result<Outcome, RunError> {
    let p = &cfg.params;
    let r0 = basic_reproduction_number(p, &cfg.profile);
    let endemic = endemic_state(cfg, r0)?;
    let init = initial_state(cfg, &cfg.sim.initial);
    let dominated = cfg.sim.initial.scale <= 1.0;

    // V belongs to the unperturbed system and needs I > 0 from the start
    let condition = endemic
        .as_ref()
        .map(|eq| lyapunov_condition(p, &cfg.profile, eq.force));
    let v_applicable =
        p.beta_j() == 0.0 && endemic.is_some() && init.acute > 0.0 && cfg.sim.initial.scale > 0.0;

    let mut sim_cfg =
        SimConfig::new(cfg.sim.horizon, cfg.sim.output_stride).with_monitor(Monitor::Extinction);
    if v_applicable {
        let eq = endemic.as_ref().expect("checked above");
        sim_cfg = sim_cfg.with_monitor(Monitor::Endemic(EndemicFunctional::new(
            eq,
            &cfg.profile,
            &cfg.grid,
        )?));
    }
    let traj = simulate(&init, p, &cfg.profile, &cfg.grid, &sim_cfg)?;

    let x0 = init.norm(&cfg.grid);
    let slack = dissipativity_check(&traj, p, x0)?;
    let min_slack = slack.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack_tol = DISSIPATIVITY_TOL * p.lambda_influx() / p.nu_min();
    let dissipative = min_slack >= -slack_tol;
    let violations = upper_envelope_check(&traj, p, &cfg.grid);

    let l_report = monitor(&traj, FunctionalKind::Extinction)?;
    let l_asserted = r0 <= 1.0 && dominated;
    let v_report = if v_applicable {
        Some(monitor(&traj, FunctionalKind::Endemic)?)
    } else {
        None
    };
    let v_asserted = v_applicable && condition.is_some_and(|c| c.holds);

    let target = endemic
        .clone()
        .unwrap_or_else(|| disease_free_equilibrium(p, &cfg.grid));
    let f = &traj.final_state;
    let verdict = match cmd {
        Command::Simulate => dissipative && violations == 0,
        _ => {
            (!l_asserted || l_report.monotone)
                && (!v_asserted || v_report.as_ref().is_some_and(|r| r.monotone))
        }
    };

    out.write("trajectory.csv", &trajectory_table(&traj, &slack).render())?;
    out.summary(
        cmd,
        verdict,
        json!({
            "R0": r0,
            "endemic": endemic_json(cfg, endemic.as_ref()),
            "steps": traj.steps(),
            "final": {
                "t": f.time,
                "I": f.acute,
                "J": f.chronic,
                "susceptibles": cfg.grid.integrate(&f.s),
                "relative_distance_to_equilibrium": target.distance_to(f, &cfg.grid) / target.norm(&cfg.grid),
            },
            "dissipativity": {
                "min_slack": min_slack,
                "tolerance": slack_tol,
                "holds": dissipative,
            },
            "envelope_violations": violations,
            "L": report_json(Some(&l_report), l_asserted),
            "V": report_json(v_report.as_ref(), v_asserted),
            "lyapunov_condition": condition.map_or(Value::Null, |c| json!({
                "threshold": c.threshold,
                "decay": c.decay,
                "holds": c.holds,
            })),
        }),
    )
}

fn crosscheck(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let run = |grid: &semiflow_core::AgeGrid| -> Result<(Trajectory, Trajectory), RunError> {
        let spec = &cfg.sim.initial;
        let s0 = SystemState::scaled_disease_free(&cfg.params, grid, spec.scale, 0.0, 0.0).s;
        let sim_cfg = SimConfig::new(cfg.sim.horizon, cfg.sim.output_stride);
        let agg = simulate(
            &SystemState::new(s0.clone(), spec.acute, spec.chronic),
            &cfg.params,
            &cfg.profile,
            grid,
            &sim_cfg,
        )?;
        let init = InfectionAgeState::uniform_infectives(
            s0,
            grid,
            spec.acute,
            spec.chronic,
            cfg.sim.infection_age_spread,
        )?;
        let (ia, _) = simulate_infection_age(&init, &cfg.params, &cfg.profile, grid, &sim_cfg)?;
        Ok((agg, ia))
    };
    let mismatch = |agg: &Trajectory, ia: &Trajectory| {
        [series::ACUTE, series::CHRONIC]
            .iter()
            .flat_map(|name| {
                let a = agg.series(name).expect("always recorded");
                let b = ia.series(name).expect("always recorded");
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    };
    let fine_grid = cfg.grid.refined(2)?;
    let (coarse_run, fine_run) = rayon::join(|| run(&cfg.grid), || run(&fine_grid));
    let ((agg, ia), (agg2, ia2)) = (coarse_run?, fine_run?);
    let coarse = mismatch(&agg, &ia);
    let fine = mismatch(&agg2, &ia2);
    let ratio = coarse / fine;
    let verdict = ratio >= CROSSCHECK_BAND.0 && ratio <= CROSSCHECK_BAND.1;

    let mut table = Table::new(&[
        "t",
        "I_aggregated",
        "I_infection_age",
        "J_aggregated",
        "J_infection_age",
    ]);
    let cols = [series::ACUTE, series::CHRONIC].map(|n| {
        (
            agg.series(n).expect("recorded"),
            ia.series(n).expect("recorded"),
        )
    });
    for snap in &agg.snapshots {
        let n = (snap.time / agg.dt).round() as usize;
        table.push(vec![
            snap.time.into(),
            cols[0].0[n].into(),
            cols[0].1[n].into(),
            cols[1].0[n].into(),
            cols[1].1[n].into(),
        ]);
    }
    out.write("crosscheck.csv", &table.render())?;
    out.summary(
        Command::Crosscheck,
        verdict,
        json!({
            "da": cfg.grid.da(),
            "mismatch": coarse,
            "mismatch_half_step": fine,
            "ratio": ratio,
            "mismatch_over_da": coarse / cfg.grid.da(),
        }),
    )
}

fn spectrum(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let ctx = CharacteristicContext::new(&cfg.params, &cfg.profile)?;
    let report = count_unstable_roots(&ctx)?;
    let margin = imaginary_axis_margin(&ctx, cfg.spectrum.omega_max, cfg.spectrum.samples);
    let at_zero = delta(&ctx, Complex64::new(0.0, 0.0))?;
    let condition = lyapunov_condition(&ctx.params, &ctx.profile, ctx.equilibrium.force);
    let roots = kappa0_roots(&ctx).ok().map(|r| {
        r.iter()
            .map(|z| json!({"re": z.re, "im": z.im}))
            .collect::<Vec<_>>()
    });

    let mut table = Table::new(&["index", "re", "im", "delta_re", "delta_im", "winding"]);
    let mut turned = 0.0;
    let mut prev: Option<Complex64> = None;
    for (k, (z, w)) in report.samples.iter().enumerate() {
        if let Some(p) = prev {
            turned += (*w / p).arg();
        }
        prev = Some(*w);
        table.push(vec![
            k.into(),
            z.re.into(),
            z.im.into(),
            w.re.into(),
            w.im.into(),
            (turned / std::f64::consts::TAU).into(),
        ]);
    }
    out.write("spectrum.csv", &table.render())?;
    let verdict = report.count == 0 && margin > 0.0;
    out.summary(
        Command::Spectrum,
        verdict,
        json!({
            "lambda_E": ctx.equilibrium.force,
            "I_E": ctx.equilibrium.acute,
            "root_bound": ctx.root_bound(),
            "unstable_roots": report.count,
            "winding_raw": report.raw,
            "evaluations": report.evaluations,
            "min_modulus_on_contour": report.min_modulus,
            "indentations": report.indentations,
            "delta_at_zero": at_zero.re,
            "imaginary_axis_margin": margin,
            "kappa0_roots": roots,
            "lyapunov_condition": {
                "threshold": condition.threshold,
                "decay": condition.decay,
                "holds": condition.holds,
                "alternative": condition.alternative,
                "alternative_holds": condition.alternative_holds,
            },
        }),
    )
}

fn fit(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let (samples, source) = match &cfg.fit {
        FitSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
            (parse_samples(&text)?, json!({ "file": name }))
        }
        FitSource::Edmunds { kappa1, r1, s1 } => (
            edmunds_samples(*kappa1, *r1, *s1)?,
            json!({ "edmunds": { "kappa1": kappa1, "r1": r1, "s1": s1 } }),
        ),
    };
    let fit = fit_exponential(&samples)?;
    let mut table = Table::new(&["age", "value", "fitted", "residual"]);
    for &(a, y) in &samples {
        let m = fit.kappa * (-fit.rate * a).exp();
        table.push(vec![a.into(), y.into(), m.into(), (m - y).into()]);
    }
    out.write("fit.csv", &table.render())?;
    let (dk, dr) = (fit.kappa - 0.643, fit.rate - 0.156);
    out.summary(
        Command::Fit,
        fit.converged,
        json!({
            "source": source,
            "samples": samples.len(),
            "kappa": fit.kappa,
            "rate": fit.rate,
            "sse": fit.sse,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "published": {
                "kappa": 0.643,
                "rate": 0.156,
                "kappa_difference": dk,
                "rate_difference": dr,
                "within_0.05": dk.abs() <= 0.05 && dr.abs() <= 0.05,
            },
        }),
    )
}

fn initials(cfg: &RunConfig) -> Vec<SystemState> {
    cfg.sweep
        .initials
        .iter()
        .map(|s| initial_state(cfg, s))
        .collect()
}

fn sweep_rows(report: &SweepReport, table: &mut Table, perturbation: bool) {
    for row in &report.rows {
        let used = row.outcomes.iter().filter(|o| !o.excluded).count();
        let mut cells: Vec<Cell> = vec![row.parameter.into(), row.r0.into()];
        if perturbation {
            let per_eps = (row.parameter > 0.0).then(|| row.equilibrium_distance / row.parameter);
            cells.extend([
                row.force.into(),
                row.acute.into(),
                row.chronic.into(),
                row.equilibrium_distance.into(),
                per_eps.into(),
            ]);
        }
        cells.extend([
            row.horizon.into(),
            row.convergence_time.into(),
            row.final_distance.into(),
        ]);
        if perturbation {
            cells.push(row.unstable_roots.map_or(Cell::Missing, Cell::Int));
        } else {
            let monotone = row
                .outcomes
                .iter()
                .filter(|o| o.dominated == Some(true))
                .all(|o| o.monotone == Some(true));
            cells.push(monotone.into());
        }
        cells.extend([used.into(), row.verdict.into()]);
        table.push(cells);
    }
}

fn sweep(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let report = perturbation_sweep(
        &cfg.params,
        &cfg.profile,
        &cfg.grid,
        &cfg.sweep.eps,
        &initials(cfg),
        cfg.sweep.horizon,
        cfg.sweep.tol,
    )?;
    let mut table = Table::new(&[
        "epsilon",
        "R0",
        "lambda_E",
        "I_E",
        "J_E",
        "equilibrium_distance",
        "distance_per_epsilon",
        "horizon",
        "convergence_time",
        "final_distance",
        "unstable_roots",
        "initials_used",
        "verdict",
    ]);
    sweep_rows(&report, &mut table, true);
    out.write("sweep.csv", &table.render())?;
    let ratios: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.parameter > 0.0)
        .map(|r| r.equilibrium_distance / r.parameter)
        .collect();
    let spread = if ratios.is_empty() {
        Value::Null
    } else {
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        json!((hi - lo) / lo)
    };
    let verdict = report.all_pass();
    out.summary(
        Command::Sweep,
        verdict,
        json!({
            "rows": report.rows.len(),
            "tol": cfg.sweep.tol,
            "distance_per_epsilon_spread": spread,
            "failed_rows": report.rows.iter().filter(|r| !r.verdict).map(|r| r.parameter).collect::<Vec<_>>(),
        }),
    )
}

/// `β_I` at which `R0 = 1` for the configured `β_J`, if any.
fn threshold_beta_i(
    params: &ModelParams,
    profile: &semiflow_core::SusceptibilityProfile,
) -> Result<Option<f64>, RunError> {
    let chronic = params.beta_j() / params.nu_j()
        * params.lambda_influx()
        * dual_exp(profile, Class::Chronic, params.mu())?;
    let acute =
        params.lambda_influx() / params.nu_i() * dual_exp(profile, Class::Acute, params.mu())?;
    let b = (1.0 - chronic) / acute;
    Ok((b > 0.0).then_some(b))
}

fn extinction(cfg: &RunConfig, out: &mut Emitter<'_>) -> Result<Outcome, RunError> {
    let mut betas = cfg.sweep.beta_i.clone();
    let threshold = if cfg.sweep.threshold_row {
        threshold_beta_i(&cfg.params, &cfg.profile)?
    } else {
        None
    };
    if let Some(b) = threshold {
        // R0 is linear in β_I; land on or just below 1
        let mut b = b;
        while basic_reproduction_number(&cfg.params.with_beta_i(b)?, &cfg.profile) > 1.0 {
            b = f64::from_bits(b.to_bits() - 1);
        }
        betas.push(b);
    }
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let report = extinction_sweep(
        &cfg.params,
        &cfg.profile,
        &cfg.grid,
        &betas,
        &initials(cfg),
        cfg.sweep.extinction_horizon,
        cfg.sweep.tol,
    )?;
    let mut table = Table::new(&[
        "beta_I",
        "R0",
        "horizon",
        "convergence_time",
        "final_distance",
        "L_monotone",
        "initials_used",
        "verdict",
    ]);
    sweep_rows(&report, &mut table, false);
    out.write("extinction.csv", &table.render())?;
    let verdict = report.all_pass();
    out.summary(
        Command::Extinction,
        verdict,
        json!({
            "rows": report.rows.len(),
            "tol": cfg.sweep.tol,
            "threshold_beta_I": threshold,
            "failed_rows": report.rows.iter().filter(|r| !r.verdict).map(|r| r.parameter).collect::<Vec<_>>(),
        }),
    )
}
