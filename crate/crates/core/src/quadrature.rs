//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! This is the cross-check path for the closed-form dual pairings; the model
//! itself never integrates numerically.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(mid - dx) + f(mid + dx);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Integrate `f` over `[lo, hi]` to the requested absolute or relative
/// tolerance, whichever is looser.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    const MAX_PANELS: usize = 20_000;
    let (first, first_err) = kronrod(&f, lo, hi);
    let mut panels = vec![(lo, hi, first, first_err)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || panels.len() >= MAX_PANELS {
            return total;
        }
        // bisect the worst panel
        let (worst, _) =
            panels.iter().enumerate().fold(
                (0, -1.0),
                |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc },
            );
        let (a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (l, le) = kronrod(&f, a, m);
        let (r, re) = kronrod(&f, m, b);
        panels.push((a, m, l, le));
        panels.push((m, b, r, re));
    }
}

/// `∫_0^∞ f` for an integrand dominated by `e^{−c a}`; the domain is cut
/// where that envelope falls below `1e−18` of its integral.
pub fn integrate_exp_tail<F: Fn(f64) -> f64>(f: F, c: f64, rel_tol: f64) -> f64 {
    let cut = 42.0 / c;
    // split on the natural length scale so the first panels are not too coarse
    let mut edges = vec![0.0];
    let mut x = 0.25 / c;
    while x < cut {
        edges.push(x);
        x *= 2.0;
    }
    edges.push(cut);
    edges
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], 1e-300, rel_tol))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-15, 1e-15);
        assert_relative_eq!(v, 32.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn exponential_tail() {
        for c in [0.01, 0.3, 10.0] {
            let v = integrate_exp_tail(|a| (-c * a).exp(), c, 1e-13);
            assert_relative_eq!(v, 1.0 / c, max_relative = 1e-12);
        }
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(
            |x| (10.0 * x).sin(),
            0.0,
            std::f64::consts::PI,
            1e-14,
            1e-14,
        );
        assert!(v.abs() < 1e-12);
    }
}
