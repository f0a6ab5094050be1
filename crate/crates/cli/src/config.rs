//! Run configuration: a TOML file with flat sections.
//!
//! ```toml
//! [model]
//! lambda_influx = 1.0
//! mu = 0.02
//! beta_I = 0.5
//! beta_J = 0.0
//! nu_I = 0.5
//! nu_J = 0.1
//!
//! [profile]
//! kappa = 0.643
//! rate = 0.156
//!
//! [grid]
//! da = 0.05
//! a_max = 400.0
//! ```
//!
//! `[model]`, `[profile]` and `[grid]` are required; `[sim]`, `[sweep]`,
//! `[spectrum]`, `[fit]` and `[io]` fall back to defaults key by key.
//! Unknown keys are rejected.

use std::ops::Range;
use std::path::{Path, PathBuf};

use semiflow_core::model::DEFAULT_TRUNCATION_TOL;
use semiflow_core::{AgeGrid, Error as CoreError, ModelParams, SusceptibilityProfile};
use serde::Deserialize;
use toml::Spanned;

/// Configuration problem anchored at a line of the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key, when the problem belongs to one.
    pub key: Option<String>,
    /// 1-based line, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "line {l}: `{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (Some(k), None) => write!(f, "`{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Sf = Spanned<f64>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Spanned<RawModel>,
    profile: Spanned<RawProfile>,
    grid: Spanned<RawGrid>,
    #[serde(default)]
    sim: Option<Spanned<RawSim>>,
    #[serde(default)]
    sweep: Option<Spanned<RawSweep>>,
    #[serde(default)]
    spectrum: Option<Spanned<RawSpectrum>>,
    #[serde(default)]
    fit: Option<Spanned<RawFit>>,
    #[serde(default)]
    io: Option<Spanned<RawIo>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    lambda_influx: Sf,
    mu: Sf,
    #[serde(rename = "beta_I")]
    beta_i: Sf,
    #[serde(rename = "beta_J")]
    beta_j: Sf,
    #[serde(rename = "nu_I")]
    nu_i: Sf,
    #[serde(rename = "nu_J")]
    nu_j: Sf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kappa: Sf,
    rate: Sf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    da: Sf,
    a_max: Sf,
    truncation_tol: Option<Sf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt_lock: Option<Spanned<bool>>,
    horizon: Option<Sf>,
    output_stride: Option<Sf>,
    initial_scale: Option<Sf>,
    #[serde(rename = "initial_I")]
    initial_i: Option<Sf>,
    #[serde(rename = "initial_J")]
    initial_j: Option<Sf>,
    infection_age_spread: Option<Sf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    eps: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "beta_I")]
    beta_i: Option<Spanned<Vec<f64>>>,
    threshold_row: Option<Spanned<bool>>,
    horizon: Option<Sf>,
    extinction_horizon: Option<Sf>,
    tol: Option<Sf>,
    initial_scales: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "initial_I")]
    initial_i: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "initial_J")]
    initial_j: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    omega_max: Option<Sf>,
    samples: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    samples_file: Option<Spanned<String>>,
    kappa1: Option<Sf>,
    r1: Option<Sf>,
    s1: Option<Sf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIo {
    out_dir: Option<Spanned<String>>,
}

/// Initial state `(scale·s_F, I_0, J_0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub scale: f64,
    pub acute: f64,
    pub chronic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub horizon: f64,
    pub output_stride: f64,
    pub initial: InitialSpec,
    /// Width of the infection-age window holding the initial infectives.
    pub infection_age_spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub eps: Vec<f64>,
    pub beta_i: Vec<f64>,
    /// Append an extinction row with `β_I` tuned to `R0 = 1`.
    pub threshold_row: bool,
    pub horizon: f64,
    pub extinction_horizon: f64,
    pub tol: f64,
    pub initials: Vec<InitialSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSettings {
    pub omega_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitSource {
    File(PathBuf),
    Edmunds { kappa1: f64, r1: f64, s1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub profile: SusceptibilityProfile,
    pub grid: AgeGrid,
    pub sim: SimSettings,
    pub sweep: SweepSettings,
    pub spectrum: SpectrumSettings,
    pub fit: FitSource,
    pub out_dir: PathBuf,
}

struct Lines<'a> {
    text: &'a str,
}

impl Lines<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, key: &str, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: Some(key.to_string()),
            line: Some(self.line(span)),
            message: message.into(),
        }
    }

    fn positive(&self, key: &str, v: &Sf) -> Result<f64, ConfigError> {
        let x = *v.get_ref();
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(self.err(key, v.span(), format!("must be finite and > 0, got {x}")))
        }
    }

    fn non_negative(&self, key: &str, v: &Sf) -> Result<f64, ConfigError> {
        let x = *v.get_ref();
        if x >= 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(self.err(key, v.span(), format!("must be finite and >= 0, got {x}")))
        }
    }

    fn list(&self, key: &str, v: &Spanned<Vec<f64>>, min: f64) -> Result<Vec<f64>, ConfigError> {
        let xs = v.get_ref().clone();
        if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x >= min)) {
            return Err(self.err(
                key,
                v.span(),
                format!("entries must be finite and >= {min}, got {x}"),
            ));
        }
        Ok(xs)
    }
}

fn with_span<T: Copy>(v: &Option<Spanned<T>>) -> Option<(T, Range<usize>)> {
    v.as_ref().map(|s| (*s.get_ref(), s.span()))
}

// `section.field` for unknown or missing fields, from the nearest table
// header at or above the reported line
fn field_key(text: &str, line: Option<usize>, message: &str) -> Option<String> {
    if !(message.starts_with("unknown field") || message.starts_with("missing field")) {
        return None;
    }
    let field = message.split('`').nth(1)?;
    let section = text
        .lines()
        .take(line?)
        .filter_map(|l| l.trim().strip_prefix('[')?.split(']').next())
        .last();
    Some(match section {
        Some(sec) => format!("{}.{field}", sec.trim()),
        None => field.to_string(),
    })
}

// core parameter names to config keys
fn model_key(name: &str) -> String {
    format!("model.{name}")
}

/// Parses and validates configuration text. Relative file paths are resolved
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let lines = Lines { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| lines.line(s));
        let message = e.message().trim().to_string();
        ConfigError {
            key: field_key(text, line, &message),
            line,
            message,
        }
    })?;

    let m = raw.model.get_ref();
    let params = ModelParams::new(
        *m.lambda_influx.get_ref(),
        *m.mu.get_ref(),
        *m.beta_i.get_ref(),
        *m.beta_j.get_ref(),
        *m.nu_i.get_ref(),
        *m.nu_j.get_ref(),
    )
    .map_err(|e| match e {
        CoreError::ParameterDomain { name, .. } => {
            let span = match name {
                "lambda_influx" => m.lambda_influx.span(),
                "mu" => m.mu.span(),
                "beta_I" => m.beta_i.span(),
                "beta_J" => m.beta_j.span(),
                "nu_I" => m.nu_i.span(),
                _ => m.nu_j.span(),
            };
            lines.err(&model_key(name), span, e.to_string())
        }
        other => lines.err("model", raw.model.span(), other.to_string()),
    })?;

    let p = raw.profile.get_ref();
    let kappa = *p.kappa.get_ref();
    if !(0.0..=1.0).contains(&kappa) {
        return Err(lines.err(
            "profile.kappa",
            p.kappa.span(),
            format!("must lie in [0, 1], got {kappa}"),
        ));
    }
    let rate = lines.positive("profile.rate", &p.rate)?;
    let profile = SusceptibilityProfile::new(kappa, rate)
        .map_err(|e| lines.err("profile", raw.profile.span(), e.to_string()))?;

    let g = raw.grid.get_ref();
    let da = lines.positive("grid.da", &g.da)?;
    let a_max = lines.positive("grid.a_max", &g.a_max)?;
    let tol = match &g.truncation_tol {
        Some(t) => lines.positive("grid.truncation_tol", t)?,
        None => DEFAULT_TRUNCATION_TOL,
    };
    let grid = AgeGrid::new(da, a_max, &params, tol)
        .map_err(|e| lines.err("grid", raw.grid.span(), e.to_string()))?;

    let sim = parse_sim(&lines, raw.sim.as_ref(), &params, da)?;
    let sweep = parse_sweep(&lines, raw.sweep.as_ref())?;
    let spectrum = parse_spectrum(&lines, raw.spectrum.as_ref())?;
    let fit = parse_fit(&lines, raw.fit.as_ref(), base_dir)?;
    let out_dir = raw
        .io
        .as_ref()
        .and_then(|io| io.get_ref().out_dir.as_ref())
        .map(|d| base_dir.join(d.get_ref()))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(RunConfig {
        params,
        profile,
        grid,
        sim,
        sweep,
        spectrum,
        fit,
        out_dir,
    })
}

fn parse_sim(
    lines: &Lines<'_>,
    raw: Option<&Spanned<RawSim>>,
    params: &ModelParams,
    da: f64,
) -> Result<SimSettings, ConfigError> {
    let mut out = SimSettings {
        horizon: 200.0,
        output_stride: 1.0,
        initial: InitialSpec {
            scale: 1.0,
            acute: 0.1,
            chronic: 0.0,
        },
        infection_age_spread: 1.0,
    };
    let Some(raw) = raw else { return Ok(out) };
    let s = raw.get_ref();
    if let Some((false, span)) = with_span(&s.dt_lock) {
        return Err(lines.err(
            "sim.dt_lock",
            span,
            "the time step is locked to the age step; only `true` is supported",
        ));
    }
    if let Some(v) = &s.horizon {
        out.horizon = lines.positive("sim.horizon", v)?;
    }
    if let Some(v) = &s.output_stride {
        out.output_stride = lines.positive("sim.output_stride", v)?;
    }
    if let Some(v) = &s.initial_scale {
        out.initial.scale = lines.non_negative("sim.initial_scale", v)?;
    }
    if let Some(v) = &s.initial_i {
        out.initial.acute = lines.non_negative("sim.initial_I", v)?;
    }
    if let Some(v) = &s.initial_j {
        out.initial.chronic = lines.non_negative("sim.initial_J", v)?;
    }
    if let Some(v) = &s.infection_age_spread {
        out.infection_age_spread = lines.positive("sim.infection_age_spread", v)?;
    }
    let fastest = params.nu_i().max(params.nu_j());
    if fastest * da > 1.0 {
        return Err(lines.err(
            "grid.da",
            raw.span(),
            format!(
                "max(nu_I, nu_J)*da = {} > 1 breaks positivity of the explicit step",
                fastest * da
            ),
        ));
    }
    Ok(out)
}

fn parse_sweep(
    lines: &Lines<'_>,
    raw: Option<&Spanned<RawSweep>>,
) -> Result<SweepSettings, ConfigError> {
    let mut out = SweepSettings {
        eps: vec![0.0, 1e-4, 1e-3, 1e-2],
        beta_i: vec![0.005],
        threshold_row: true,
        horizon: 200.0,
        extinction_horizon: 2000.0,
        tol: 1e-3,
        initials: vec![
            InitialSpec {
                scale: 1.0,
                acute: 0.1,
                chronic: 0.0,
            },
            InitialSpec {
                scale: 0.5,
                acute: 1.0,
                chronic: 1.0,
            },
            InitialSpec {
                scale: 1.5,
                acute: 0.01,
                chronic: 0.5,
            },
            InitialSpec {
                scale: 0.8,
                acute: 0.0,
                chronic: 0.2,
            },
        ],
    };
    let Some(raw) = raw else { return Ok(out) };
    let s = raw.get_ref();
    if let Some(v) = &s.eps {
        out.eps = lines.list("sweep.eps", v, 0.0)?;
    }
    if let Some(v) = &s.beta_i {
        out.beta_i = lines.list("sweep.beta_I", v, 0.0)?;
        if let Some(x) = out.beta_i.iter().find(|x| **x == 0.0) {
            return Err(lines.err(
                "sweep.beta_I",
                v.span(),
                format!("entries must be > 0, got {x}"),
            ));
        }
    }
    if let Some((flag, _)) = with_span(&s.threshold_row) {
        out.threshold_row = flag;
    }
    if let Some(v) = &s.horizon {
        out.horizon = lines.positive("sweep.horizon", v)?;
    }
    if let Some(v) = &s.extinction_horizon {
        out.extinction_horizon = lines.positive("sweep.extinction_horizon", v)?;
    }
    if let Some(v) = &s.tol {
        out.tol = lines.positive("sweep.tol", v)?;
    }
    let given = [&s.initial_scales, &s.initial_i, &s.initial_j];
    if given.iter().any(|g| g.is_some()) {
        let mut cols = Vec::new();
        for (key, v) in ["sweep.initial_scales", "sweep.initial_I", "sweep.initial_J"]
            .iter()
            .zip(given)
        {
            match v {
                Some(v) => cols.push((lines.list(key, v, 0.0)?, v.span())),
                None => {
                    return Err(lines.err(
                        key,
                        raw.span(),
                        "must be given together with the other initial_* lists",
                    ))
                }
            }
        }
        if cols.iter().any(|c| c.0.len() != cols[0].0.len()) {
            return Err(lines.err(
                "sweep.initial_J",
                cols[2].1.clone(),
                "initial_* lists differ in length",
            ));
        }
        out.initials = (0..cols[0].0.len())
            .map(|k| InitialSpec {
                scale: cols[0].0[k],
                acute: cols[1].0[k],
                chronic: cols[2].0[k],
            })
            .collect();
    }
    Ok(out)
}

fn parse_spectrum(
    lines: &Lines<'_>,
    raw: Option<&Spanned<RawSpectrum>>,
) -> Result<SpectrumSettings, ConfigError> {
    let mut out = SpectrumSettings {
        omega_max: 10.0,
        samples: 1000,
    };
    let Some(raw) = raw else { return Ok(out) };
    let s = raw.get_ref();
    if let Some(v) = &s.omega_max {
        out.omega_max = lines.positive("spectrum.omega_max", v)?;
    }
    if let Some(v) = &s.samples {
        let n = *v.get_ref();
        if n < 1 {
            return Err(lines.err(
                "spectrum.samples",
                v.span(),
                format!("must be >= 1, got {n}"),
            ));
        }
        out.samples = n as usize;
    }
    Ok(out)
}

fn parse_fit(
    lines: &Lines<'_>,
    raw: Option<&Spanned<RawFit>>,
    base_dir: &Path,
) -> Result<FitSource, ConfigError> {
    let (mut kappa1, mut r1, mut s1) = (
        semiflow_core::calibrate::EDMUNDS_KAPPA,
        semiflow_core::calibrate::EDMUNDS_RATE,
        semiflow_core::calibrate::EDMUNDS_EXPONENT,
    );
    let Some(raw) = raw else {
        return Ok(FitSource::Edmunds { kappa1, r1, s1 });
    };
    let f = raw.get_ref();
    if let Some(path) = &f.samples_file {
        if f.kappa1.is_some() || f.r1.is_some() || f.s1.is_some() {
            return Err(lines.err(
                "fit.samples_file",
                path.span(),
                "cannot be combined with kappa1/r1/s1",
            ));
        }
        return Ok(FitSource::File(base_dir.join(path.get_ref())));
    }
    if let Some(v) = &f.kappa1 {
        kappa1 = *v.get_ref();
        if !(0.0..=1.0).contains(&kappa1) {
            return Err(lines.err(
                "fit.kappa1",
                v.span(),
                format!("must lie in [0, 1], got {kappa1}"),
            ));
        }
    }
    if let Some(v) = &f.r1 {
        r1 = lines.positive("fit.r1", v)?;
    }
    if let Some(v) = &f.s1 {
        s1 = lines.positive("fit.s1", v)?;
    }
    Ok(FitSource::Edmunds { kappa1, r1, s1 })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        key: None,
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
