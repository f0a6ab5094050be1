//! Least-squares fit of `p_J(a) = κ e^{−r a}` to age-specific carrier
//! probabilities.

use crate::error::{Error, Result};

/// Lower bound on the fitted rate.
pub const RATE_FLOOR: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 30;

/// Edmunds-type carrier probability `κ₁ e^{−r₁ a^{s₁}}`.
pub fn edmunds_reference(a: f64, kappa1: f64, r1: f64, s1: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::domain("a", a, "a finite value >= 0"));
    }
    if !(0.0..=1.0).contains(&kappa1) {
        return Err(Error::domain("kappa1", kappa1, "a value in [0, 1]"));
    }
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(Error::domain("r1", r1, "a finite value > 0"));
    }
    if !(s1 > 0.0 && s1.is_finite()) {
        return Err(Error::domain("s1", s1, "a finite value > 0"));
    }
    Ok(kappa1 * (-r1 * a.powf(s1)).exp())
}

/// Curve constants of the Edmunds carrier curve used as the fitting target.
pub const EDMUNDS_KAPPA: f64 = 1.0;
pub const EDMUNDS_RATE: f64 = 0.645;
pub const EDMUNDS_EXPONENT: f64 = 0.455;

/// The Edmunds curve sampled at ages `0, 0.5, …, 40`.
pub fn edmunds_samples(kappa1: f64, r1: f64, s1: f64) -> Result<Vec<(f64, f64)>> {
    (0..=80)
        .map(|k| {
            let a = 0.5 * k as f64;
            edmunds_reference(a, kappa1, r1, s1).map(|y| (a, y))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub kappa: f64,
    pub rate: f64,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sse(samples: &[(f64, f64)], kappa: f64, rate: f64) -> f64 {
    samples
        .iter()
        .map(|&(a, y)| {
            let e = kappa * (-rate * a).exp() - y;
            e * e
        })
        .sum()
}

fn project(kappa: f64, rate: f64) -> (f64, f64) {
    (kappa.clamp(0.0, 1.0), rate.max(RATE_FLOOR))
}

// gradient of sse/2 and the Gauss–Newton matrix
fn linearize(samples: &[(f64, f64)], kappa: f64, rate: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for &(a, y) in samples {
        let e = (-rate * a).exp();
        let res = kappa * e - y;
        let jac = [e, -kappa * a * e];
        for i in 0..2 {
            g[i] += jac[i] * res;
            for j in 0..2 {
                h[i][j] += jac[i] * jac[j];
            }
        }
    }
    (g, h)
}

// zero the components that point out of the feasible box
fn projected_gradient(g: [f64; 2], kappa: f64, rate: f64) -> [f64; 2] {
    let gk = if (kappa <= 0.0 && g[0] > 0.0) || (kappa >= 1.0 && g[0] < 0.0) {
        0.0
    } else {
        g[0]
    };
    let gr = if rate <= RATE_FLOOR && g[1] > 0.0 {
        0.0
    } else {
        g[1]
    };
    [gk, gr]
}

fn validate(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    for &(a, y) in samples {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::domain("age", a, "a finite value >= 0"));
        }
        if !(y <= 1.0 && y.is_finite()) {
            return Err(Error::domain("value", y, "a finite value <= 1"));
        }
    }
    let a0 = samples[0].0;
    if samples.iter().all(|&(a, _)| a == a0) {
        return Err(Error::RankDeficient(format!("all samples at age {a0}")));
    }
    Ok(())
}

/// Log-linear regression of `ln y` on `a`; `None` if some value is not
/// positive.
fn log_linear_start(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    if samples.iter().any(|&(_, y)| y <= 0.0) {
        return None;
    }
    let n = samples.len() as f64;
    let ma = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let ml = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(a, y) in samples {
        sxy += (a - ma) * (y.ln() - ml);
        sxx += (a - ma) * (a - ma);
    }
    let slope = sxy / sxx;
    Some(project((ml - slope * ma).exp(), -slope))
}

fn grid_start(samples: &[(f64, f64)]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 1.0);
    for i in 0..=100 {
        for j in 1..=100 {
            let (k, r) = (i as f64 / 100.0, 5.0 * j as f64 / 100.0);
            let v = sse(samples, k, r);
            if v < best.0 {
                best = (v, k, r);
            }
        }
    }
    (best.1, best.2)
}

/// Projected, step-halving Gauss–Newton fit of `κ e^{−r a}`.
///
/// `converged` is false when the iteration budget runs out, when no
/// halving decreases the residual before the projected gradient is small,
/// or when `r` ends on its floor (the data show no decay).
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<FitResult> {
    validate(samples)?;
    let (mut kappa, mut rate) = log_linear_start(samples).unwrap_or_else(|| grid_start(samples));
    let mut value = sse(samples, kappa, rate);
    let mut iterations = 0;
    let mut small_gradient = false;
    while iterations < MAX_ITERATIONS {
        let (g, h) = linearize(samples, kappa, rate);
        let pg = projected_gradient(g, kappa, rate);
        if pg[0].hypot(pg[1]) < GRADIENT_TOL {
            small_gradient = true;
            break;
        }
        iterations += 1;
        // a tiny ridge keeps the system solvable when κ = 0
        let ridge = 1e-14 * (h[0][0] + h[1][1]);
        let (a, b, d) = (h[0][0] + ridge, h[0][1], h[1][1] + ridge);
        let det = a * d - b * b;
        let step = [-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det];
        let gnorm = pg[0].hypot(pg[1]);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let (k, r) = project(kappa + t * step[0], rate + t * step[1]);
            let v = sse(samples, k, r);
            // near the minimum the decrease drops below the rounding of the
            // sum; a flat step that shrinks the gradient still counts
            let flat = v <= value * (1.0 + 4.0 * f64::EPSILON) && {
                let (g1, _) = linearize(samples, k, r);
                let p1 = projected_gradient(g1, k, r);
                p1[0].hypot(p1[1]) < gnorm
            };
            if v < value || flat {
                kappa = k;
                rate = r;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(FitResult {
        kappa,
        rate,
        sse: value,
        iterations,
        converged: small_gradient && rate > RATE_FLOOR,
    })
}

/// Reads `age value` pairs, one per line; blank lines and lines starting
/// with `#` are skipped. Commas are accepted as separators.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::SampleFormat {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 columns, found {}", fields.len())));
        }
        let num = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| bad(format!("`{f}` is not a number")))
        };
        out.push((num(fields[0])?, num(fields[1])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model_data(kappa: f64, rate: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let a = 40.0 * k as f64 / (n - 1) as f64;
                (a, kappa * (-rate * a).exp())
            })
            .collect()
    }

    #[test]
    fn edmunds_examples() {
        assert_eq!(edmunds_reference(0.0, 0.8, 0.645, 0.455).unwrap(), 0.8);
        assert_relative_eq!(
            edmunds_reference(1.0, 1.0, 0.645, 0.455).unwrap(),
            0.524660,
            max_relative = 1e-5
        );
        assert_relative_eq!(
            edmunds_reference(3.0, 0.643, 0.156, 1.0).unwrap(),
            0.643 * (-0.468f64).exp(),
            max_relative = 1e-15
        );
        assert!(edmunds_reference(-1.0, 1.0, 0.645, 0.455).is_err());
        assert!(edmunds_reference(1.0, 1.5, 0.645, 0.455).is_err());
        assert_eq!(edmunds_samples(1.0, 0.645, 0.455).unwrap().len(), 81);
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let fit = fit_exponential(&model_data(0.643, 0.156, 50)).unwrap();
        assert!(fit.converged);
        assert!((fit.kappa - 0.643).abs() < 1e-6);
        assert!((fit.rate - 0.156).abs() < 1e-6);
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn constant_data_hits_rate_floor() {
        let data: Vec<_> = (0..10).map(|k| (k as f64, 0.5)).collect();
        let fit = fit_exponential(&data).unwrap();
        assert!(!fit.converged);
        assert!(fit.rate < 1e-8);
        assert_relative_eq!(fit.kappa, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_and_invalid_samples() {
        let same = [(2.0, 0.5), (2.0, 0.4), (2.0, 0.3)];
        assert!(matches!(
            fit_exponential(&same),
            Err(Error::RankDeficient(_))
        ));
        assert!(matches!(
            fit_exponential(&same[..2]),
            Err(Error::Precondition(_))
        ));
        assert!(fit_exponential(&[(0.0, 0.5), (1.0, 1.5), (2.0, 0.2)]).is_err());
    }

    #[test]
    fn non_positive_values_fall_back_to_grid_start() {
        let mut data = model_data(0.643, 0.156, 50);
        data.push((45.0, 0.0));
        let fit = fit_exponential(&data).unwrap();
        assert!(fit.converged);
        assert!((fit.kappa - 0.643).abs() < 1e-3);
        assert!((fit.rate - 0.156).abs() < 1e-3);
    }

    #[test]
    fn parses_sample_files() {
        let text = "# age value\n0 0.9\n\n1.5, 0.7\n  3\t0.5\n";
        assert_eq!(
            parse_samples(text).unwrap(),
            vec![(0.0, 0.9), (1.5, 0.7), (3.0, 0.5)]
        );
        assert_eq!(
            parse_samples("0 1\n1 x\n"),
            Err(Error::SampleFormat {
                line: 2,
                message: "`x` is not a number".into()
            })
        );
        assert!(matches!(
            parse_samples("1 2 3"),
            Err(Error::SampleFormat { line: 1, .. })
        ));
    }
}
