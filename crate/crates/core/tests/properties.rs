use num_complex::Complex64;
use proptest::prelude::*;
use semiflow_core::calibrate::fit_exponential;
use semiflow_core::lyapunov::{g, EndemicFunctional};
use semiflow_core::sim::{step, Integrator};
use semiflow_core::spectral::{delta, CharacteristicContext};
use semiflow_core::*;

fn small_grid(p: &ModelParams) -> AgeGrid {
    AgeGrid::with_default_tol(0.5, 400.0, p).unwrap()
}

fn context() -> impl Strategy<Value = CharacteristicContext> {
    (0.0..=1.0f64, 0.01..2.0f64, 0.1..1.0f64).prop_filter_map(
        "needs an endemic state",
        |(k, r, b)| {
            let p = ModelParams::reference().with_beta_i(b).ok()?;
            CharacteristicContext::new(&p, &make_profile(k, r).ok()?).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_is_non_negative(x in 1e-300..1e300f64) {
        prop_assert!(g(x) >= 0.0);
        prop_assert_eq!(g(1.0), 0.0);
    }

    #[test]
    fn dual_is_decreasing_in_rate(k in 0.0..=1.0f64, r in 0.01..2.0f64, c in 0.001..10.0f64) {
        let prof = make_profile(k, r).unwrap();
        for which in [Class::Acute, Class::Chronic] {
            let lo = dual_exp(&prof, which, c).unwrap();
            let hi = dual_exp(&prof, which, c * 1.5).unwrap();
            prop_assert!(hi <= lo);
        }
        let sum = dual_exp(&prof, Class::Acute, c).unwrap() + dual_exp(&prof, Class::Chronic, c).unwrap();
        prop_assert!((sum * c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_has_conjugate_symmetry(ctx in context(), re in -0.019..5.0f64, im in -5.0..5.0f64) {
        let z = Complex64::new(re, im);
        let a = delta(&ctx, z.conj()).unwrap();
        let b = delta(&ctx, z).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0));
    }

    #[test]
    fn delta_at_zero_is_positive(ctx in context()) {
        prop_assert!(delta(&ctx, Complex64::new(0.0, 0.0)).unwrap().re > 0.0);
    }

    #[test]
    fn no_roots_beyond_bound(ctx in context(), t in 0.0..1.0f64, stretch in 1.0..50.0f64) {
        let m = ctx.root_bound();
        let lam = Complex64::from_polar(m * stretch, std::f64::consts::PI * (t - 0.5));
        prop_assert!(delta(&ctx, lam).unwrap().norm() > 0.0);
        // lower bound used to justify the bound
        let k = 2.0 * ctx.params.beta_i().powi(2) * ctx.equilibrium.acute * ctx.acute_dual();
        prop_assert!(delta(&ctx, lam).unwrap().norm() >= lam.norm() - k / lam.norm() - 1e-9);
    }

    #[test]
    fn step_preserves_positivity(
        scale in 0.0..3.0f64,
        acute in 0.0..20.0f64,
        chronic in 0.0..20.0f64,
        beta in 0.0..2.0f64,
        bumps in prop::collection::vec((0usize..800, 0.0..5.0f64), 0..20),
    ) {
        let p = ModelParams::reference().with_beta_i(beta).unwrap().with_beta_j(0.05).unwrap();
        let grid = small_grid(&p);
        let prof = SusceptibilityProfile::fitted();
        let mut x = SystemState::scaled_disease_free(&p, &grid, scale, acute, chronic);
        for (k, v) in bumps {
            x.s[k] = v;
        }
        let next = step(&x, &p, &prof, &grid).unwrap();
        prop_assert!(next.is_non_negative());
    }

    #[test]
    fn transport_is_exact_without_infection(n in 1usize..300, seed in 0.0..10.0f64) {
        let p = ModelParams::reference();
        let grid = small_grid(&p);
        let prof = SusceptibilityProfile::fitted();
        let s0: Vec<f64> = (0..grid.n_cells()).map(|k| 1.0 + (seed + k as f64).sin().abs()).collect();
        let mut x = SystemState::new(s0.clone(), 0.0, 0.0);
        let integ = Integrator::new(&p, &prof, &grid).unwrap();
        for k in 0..n {
            integ.step(&mut x, k).unwrap();
        }
        let f = (-p.mu() * n as f64 * grid.da()).exp();
        for k in n..grid.n_cells() {
            prop_assert!((x.s[k] - s0[k - n] * f).abs() <= 1e-13 * x.s[k]);
        }
    }

    #[test]
    fn endemic_functional_ignores_chronic(chronic in 0.0..100.0f64, scale in 0.1..3.0f64) {
        let p = ModelParams::reference();
        let grid = small_grid(&p);
        let prof = SusceptibilityProfile::fitted();
        let eq = endemic_equilibrium(&p, &prof, &grid).unwrap();
        let v = EndemicFunctional::new(&eq, &prof, &grid).unwrap();
        let mut x = SystemState::scaled_disease_free(&p, &grid, scale, 0.7, 0.0);
        let a = v.evaluate(&x).unwrap();
        x.chronic = chronic;
        prop_assert_eq!(a, v.evaluate(&x).unwrap());
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn fit_is_scale_equivariant(k in 0.2..1.0f64, r in 0.05..1.0f64, c in 0.1..=1.0f64) {
        let data: Vec<(f64, f64)> = (0..41).map(|i| {
            let a = i as f64;
            (a, k * (-r * a).exp())
        }).collect();
        let scaled: Vec<(f64, f64)> = data.iter().map(|&(a, y)| (a, c * y)).collect();
        let f1 = fit_exponential(&data).unwrap();
        let f2 = fit_exponential(&scaled).unwrap();
        prop_assert!((f2.kappa - c * f1.kappa).abs() < 1e-8);
        prop_assert!((f2.rate - f1.rate).abs() < 1e-8);
    }
}
