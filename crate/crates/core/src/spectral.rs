//! Characteristic function of the endemic equilibrium on the `β_J = 0`
//! branch and an argument-principle certificate for roots with `Re λ ≥ 0`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{endemic_values, Class, EndemicValues, ModelParams, SusceptibilityProfile};

/// Endemic state of the unperturbed (`β_J = 0`) system together with the
/// constants that enter `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicContext {
    pub params: ModelParams,
    pub profile: SusceptibilityProfile,
    pub equilibrium: EndemicValues,
}

impl CharacteristicContext {
    /// Builds the context from `params` with `β_J` replaced by 0.
    pub fn new(params: &ModelParams, profile: &SusceptibilityProfile) -> Result<Self> {
        let base = params.with_beta_j(0.0)?;
        Ok(Self {
            params: base,
            profile: *profile,
            equilibrium: endemic_values(&base, profile)?,
        })
    }

    /// `c = μ + λ_E`.
    pub fn decay(&self) -> f64 {
        self.equilibrium.decay
    }

    /// `β_I² I_E Λ`.
    fn gain(&self) -> f64 {
        let b = self.params.beta_i();
        b * b * self.equilibrium.acute * self.params.lambda_influx()
    }

    /// `p_I*[s_E]`.
    pub fn acute_dual(&self) -> f64 {
        self.params.lambda_influx()
            * self
                .profile
                .dual_exp(Class::Acute, self.decay())
                .expect("endemic decay rate is positive")
    }

    /// A priori root bound. On `Re λ ≥ 0`, `|(1 − e^{−λa})/λ| ≤ 2/|λ|`, so
    /// `|Δ(λ)| ≥ |λ| − 2 β_I² I_E p_I*[s_E]/|λ| > 0` once
    /// `|λ| > β_I (2 I_E p_I*[s_E])^{1/2}`. Padded by one.
    pub fn root_bound(&self) -> f64 {
        self.params.beta_i() * (2.0 * self.equilibrium.acute * self.acute_dual()).sqrt() + 1.0
    }
}

/// `Δ(λ) = λ + β_I² I_E Λ [1/(c(c+λ)) − κ/((c+r)(c+r+λ))]`, the closed form
/// of `λ + β_I² I_E p_I*[s_E (1 − e^{−λ·})/λ]` with the factor `1/λ`
/// cancelled, so `λ = 0` needs no special case.
pub fn delta(ctx: &CharacteristicContext, lam: Complex64) -> Result<Complex64> {
    let mu = ctx.params.mu();
    if !(lam.re > -mu) {
        return Err(Error::OutsideDomain {
            re: lam.re,
            im: lam.im,
            bound: -mu,
        });
    }
    Ok(delta_unchecked(ctx, lam))
}

fn delta_unchecked(ctx: &CharacteristicContext, lam: Complex64) -> Complex64 {
    let c = ctx.decay();
    let cr = c + ctx.profile.rate();
    let kappa = ctx.profile.kappa();
    lam + ctx.gain() * (1.0 / (c * (lam + c)) - kappa / (cr * (lam + cr)))
}

/// Roots of `cλ² + c²λ + β_I Λ λ_E = 0`, to which `Δ = 0` reduces for
/// `κ = 0`. Ordered by imaginary part, lower first.
pub fn kappa0_roots(ctx: &CharacteristicContext) -> Result<[Complex64; 2]> {
    let kappa = ctx.profile.kappa();
    if kappa != 0.0 {
        return Err(Error::InapplicableReduction { kappa });
    }
    let c = ctx.decay();
    let q = ctx.params.beta_i() * ctx.params.lambda_influx() * ctx.equilibrium.force / c;
    // λ² + cλ + q = 0
    let disc = Complex64::new(c * c - 4.0 * q, 0.0).sqrt();
    let a = (-c - disc) / 2.0;
    let b = (-c + disc) / 2.0;
    Ok(if a.im <= b.im { [a, b] } else { [b, a] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }
}

/// Tuning for the contour walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    /// Largest argument change accepted between neighbouring samples.
    pub max_arg_step: f64,
    pub min_samples_per_edge: usize,
    pub max_depth: u32,
    /// `|f|` below this on the left edge triggers an indentation.
    pub indent_threshold: f64,
    pub indent_radius: f64,
    /// Samples used to scan the left edge for near-zeros.
    pub scan_samples: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            max_arg_step: PI / 8.0,
            min_samples_per_edge: 64,
            max_depth: 40,
            indent_threshold: 1e-9,
            indent_radius: 1e-6,
            scan_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingReport {
    pub count: i64,
    /// Total argument change divided by 2π before rounding.
    pub raw: f64,
    pub evaluations: usize,
    pub min_modulus: f64,
    pub indentations: usize,
    /// Accepted contour points in traversal order with their `f` values.
    pub samples: Vec<(Complex64, Complex64)>,
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Line(Complex64, Complex64),
    // center, radius, start angle, end angle
    Arc(Complex64, f64, f64, f64),
}

impl Piece {
    fn at(&self, t: f64) -> Complex64 {
        match *self {
            Piece::Line(a, b) => a + (b - a) * t,
            Piece::Arc(c, r, t0, t1) => c + Complex64::from_polar(r, t0 + (t1 - t0) * t),
        }
    }
}

/// Counts zeros of `f` inside `rect` (counterclockwise boundary) by summing
/// argument increments with adaptive subdivision. Near-zeros of `f` on the
/// left edge are bypassed by semicircles into the rectangle.
pub fn winding_number<F>(f: F, rect: Rect, opts: &ContourOptions) -> Result<WindingReport>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(rect.re_min < rect.re_max && rect.im_min < rect.im_max) {
        return Err(Error::ContourResolution(format!(
            "degenerate rectangle {rect:?}"
        )));
    }
    let z = |re: f64, im: f64| Complex64::new(re, im);
    let (x0, x1, y0, y1) = (rect.re_min, rect.re_max, rect.im_min, rect.im_max);
    let mut pieces = vec![
        Piece::Line(z(x0, y0), z(x1, y0)),
        Piece::Line(z(x1, y0), z(x1, y1)),
        Piece::Line(z(x1, y1), z(x0, y1)),
    ];
    // left edge runs downward; indent around near-zeros
    let rho = opts.indent_radius;
    let mut holes: Vec<f64> = (0..=opts.scan_samples)
        .map(|k| y1 - (y1 - y0) * k as f64 / opts.scan_samples as f64)
        .filter(|&y| f(z(x0, y)).norm() < opts.indent_threshold)
        .collect();
    holes.dedup_by(|a, b| (*b - *a).abs() < 4.0 * rho);
    let mut top = y1;
    for &y in &holes {
        if y + rho >= y1 || y - rho <= y0 {
            return Err(Error::ContourResolution(format!(
                "f nearly vanishes at corner {x0}{y:+}i"
            )));
        }
        pieces.push(Piece::Line(z(x0, top), z(x0, y + rho)));
        pieces.push(Piece::Arc(z(x0, y), rho, FRAC_PI_2, -FRAC_PI_2));
        top = y - rho;
    }
    pieces.push(Piece::Line(z(x0, top), z(x0, y0)));

    let mut walk = Walk {
        f: &f,
        opts,
        total: 0.0,
        evaluations: 0,
        min_modulus: f64::INFINITY,
        samples: Vec::new(),
    };
    for piece in &pieces {
        walk.piece(piece)?;
    }
    let raw = walk.total / TAU;
    let count = raw.round();
    if (raw - count).abs() > 0.1 {
        return Err(Error::ContourResolution(format!(
            "winding sum {raw} is not within 0.1 of an integer"
        )));
    }
    Ok(WindingReport {
        count: count as i64,
        raw,
        evaluations: walk.evaluations,
        min_modulus: walk.min_modulus,
        indentations: holes.len(),
        samples: walk.samples,
    })
}

struct Walk<'a, F> {
    f: &'a F,
    opts: &'a ContourOptions,
    total: f64,
    evaluations: usize,
    min_modulus: f64,
    samples: Vec<(Complex64, Complex64)>,
}

impl<F: Fn(Complex64) -> Complex64> Walk<'_, F> {
    fn eval(&mut self, z: Complex64) -> Result<Complex64> {
        self.evaluations += 1;
        let w = (self.f)(z);
        let m = w.norm();
        if !m.is_finite() || m == 0.0 {
            return Err(Error::ContourResolution(format!(
                "f({z}) = {w} on the contour"
            )));
        }
        self.min_modulus = self.min_modulus.min(m);
        Ok(w)
    }

    fn piece(&mut self, piece: &Piece) -> Result<()> {
        let n = self.opts.min_samples_per_edge.max(1);
        let mut t0 = 0.0;
        let mut w0 = self.eval(piece.at(0.0))?;
        if self.samples.is_empty() {
            self.samples.push((piece.at(0.0), w0));
        }
        for k in 1..=n {
            let t1 = k as f64 / n as f64;
            let w1 = self.eval(piece.at(t1))?;
            self.segment(piece, t0, w0, t1, w1, 0)?;
            t0 = t1;
            w0 = w1;
        }
        Ok(())
    }

    fn segment(
        &mut self,
        piece: &Piece,
        t0: f64,
        w0: Complex64,
        t1: f64,
        w1: Complex64,
        depth: u32,
    ) -> Result<()> {
        let step = (w1 / w0).arg();
        if step.abs() < self.opts.max_arg_step {
            self.total += step;
            self.samples.push((piece.at(t1), w1));
            return Ok(());
        }
        if depth >= self.opts.max_depth {
            return Err(Error::ContourResolution(format!(
                "argument step {step} unresolved near {} after {depth} bisections",
                piece.at(t0)
            )));
        }
        let tm = 0.5 * (t0 + t1);
        let wm = self.eval(piece.at(tm))?;
        self.segment(piece, t0, w0, tm, wm, depth + 1)?;
        self.segment(piece, tm, wm, t1, w1, depth + 1)
    }
}

/// Winding count of `Δ` around `[0, M] × [−M, M]`, `M` the a priori root
/// bound: the number of roots with `Re λ ≥ 0`.
pub fn count_unstable_roots(ctx: &CharacteristicContext) -> Result<WindingReport> {
    let m = ctx.root_bound();
    winding_number(
        |lam| delta_unchecked(ctx, lam),
        Rect::new(0.0, m, -m, m),
        &ContourOptions::default(),
    )
}

/// `1/(c²+ω²) − κ/((c+r)²+ω²)` evaluated as one fraction whose numerator
/// `(1−κ)(c²+ω²) + r(2c+r)` is a sum of non-negative terms.
pub fn axis_margin_at(ctx: &CharacteristicContext, omega: f64) -> f64 {
    let c = ctx.decay();
    let r = ctx.profile.rate();
    let kappa = ctx.profile.kappa();
    let near = c * c + omega * omega;
    let far = (c + r) * (c + r) + omega * omega;
    ((1.0 - kappa) * near + r * (2.0 * c + r)) / (near * far)
}

/// Minimum of [`axis_margin_at`] over `ω_k = k·ω_max/n`, `k = 1..=n`.
pub fn imaginary_axis_margin(ctx: &CharacteristicContext, omega_max: f64, n_samples: usize) -> f64 {
    (1..=n_samples.max(1))
        .map(|k| axis_margin_at(ctx, omega_max * k as f64 / n_samples.max(1) as f64))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCondition {
    /// `rκ/(1−κ)`, infinite for `κ = 1` and `r > 0`.
    pub threshold: f64,
    /// `μ + λ_E`.
    pub decay: f64,
    /// `rκ/(1−κ) < μ + λ_E`.
    pub holds: bool,
    /// `Λ(β_I/ν_I) p_I*[e^{−(rκ/(1−κ))·}]`, infinite when the exponent is 0.
    pub alternative: f64,
    /// `alternative < 1`.
    pub alternative_holds: bool,
}

/// `p_I' < (μ + λ_E) p_I` on `[0, ∞)` for the exponential profile, which
/// reduces to `rκ/(1−κ) < μ + λ_E`. The alternative form is reported
/// alongside without being used for the verdict.
pub fn lyapunov_condition(
    params: &ModelParams,
    profile: &SusceptibilityProfile,
    lambda_e: f64,
) -> LyapunovCondition {
    let (kappa, r) = (profile.kappa(), profile.rate());
    let decay = params.mu() + lambda_e;
    let threshold = if kappa == 0.0 || r == 0.0 {
        0.0
    } else if kappa == 1.0 {
        f64::INFINITY
    } else {
        r * kappa / (1.0 - kappa)
    };
    let alternative = match profile.dual_exp(Class::Acute, threshold) {
        Ok(d) if threshold.is_finite() => {
            params.lambda_influx() * params.beta_i() / params.nu_i() * d
        }
        // e^{−∞·} pairs to zero; a zero exponent diverges
        _ if threshold.is_infinite() => 0.0,
        _ => f64::INFINITY,
    };
    LyapunovCondition {
        threshold,
        decay,
        holds: threshold < decay,
        alternative,
        alternative_holds: alternative < 1.0,
    }
}
