use semiflow_core::calibrate::{
    edmunds_samples, fit_exponential, EDMUNDS_EXPONENT, EDMUNDS_KAPPA, EDMUNDS_RATE,
};
use semiflow_core::spectral::{
    count_unstable_roots, imaginary_axis_margin, kappa0_roots, CharacteristicContext,
};
use semiflow_core::sweep::{extinction_sweep, perturbation_sweep};
use semiflow_core::*;

fn sse(data: &[(f64, f64)], k: f64, r: f64) -> f64 {
    data.iter()
        .map(|&(a, y)| (k * (-r * a).exp() - y).powi(2))
        .sum()
}

#[test]
fn kappa_zero_roots_lie_left_of_the_contour() {
    let prof = make_profile(0.0, 0.156).unwrap();
    let ctx = CharacteristicContext::new(&ModelParams::reference(), &prof).unwrap();
    let report = count_unstable_roots(&ctx).unwrap();
    assert_eq!(report.count, 0);
    for z in kappa0_roots(&ctx).unwrap() {
        assert!(z.re < 0.0);
        assert!((z.re + 0.5).abs() < 1e-10 && (z.im.abs() - 0.489898).abs() < 1e-6);
    }
    assert!(report.samples.iter().all(|(z, _)| z.re >= 0.0));
}

#[test]
fn reference_contexts_are_certified() {
    for kappa in [0.0, 0.25, 0.5, 0.643, 1.0] {
        let prof = SusceptibilityProfile::fitted().with_kappa(kappa).unwrap();
        let ctx = CharacteristicContext::new(&ModelParams::reference(), &prof).unwrap();
        assert_eq!(count_unstable_roots(&ctx).unwrap().count, 0);
        assert!(imaginary_axis_margin(&ctx, 10.0, 1000) > 0.0);
    }
}

#[test]
fn fit_beats_oracle_grid() {
    let data = edmunds_samples(EDMUNDS_KAPPA, EDMUNDS_RATE, EDMUNDS_EXPONENT).unwrap();
    let fit = fit_exponential(&data).unwrap();
    assert!(fit.converged);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..100 {
        for j in 1..=100 {
            let (k, r) = (i as f64 / 99.0, 2.0 * j as f64 / 100.0);
            let v = sse(&data, k, r);
            assert!(fit.sse <= v);
            if v < best.0 {
                best = (v, k, r);
            }
        }
    }
    // the grid optimum and the fit agree to grid resolution
    assert!((best.1 - fit.kappa).abs() < 0.011 && (best.2 - fit.rate).abs() < 0.021);
    assert!((fit.kappa - 0.643).abs() < 0.05 && (fit.rate - 0.156).abs() < 0.05);
}

#[test]
fn sweep_rows_are_ordered_and_consistent() {
    let p = ModelParams::reference();
    let prof = SusceptibilityProfile::fitted();
    let grid = AgeGrid::with_default_tol(0.1, 400.0, &p).unwrap();
    let initials = vec![
        SystemState::scaled_disease_free(&p, &grid, 1.0, 0.1, 0.0),
        SystemState::scaled_disease_free(&p, &grid, 0.5, 1.0, 1.0),
        SystemState::scaled_disease_free(&p, &grid, 1.2, 0.0, 0.3),
    ];
    let eps = [0.0, 1e-3, 1e-2];
    let report = perturbation_sweep(&p, &prof, &grid, &eps, &initials, 150.0, 1e-3).unwrap();
    assert!(report.all_pass());
    let rows = &report.rows;
    assert!(rows[0].outcomes[2].excluded);
    assert!(rows[1..]
        .iter()
        .all(|r| r.outcomes.iter().all(|o| !o.excluded)));
    for w in rows.windows(2) {
        assert!(w[0].parameter < w[1].parameter);
        assert!(w[0].r0 <= w[1].r0);
        assert!(w[0].force.unwrap() <= w[1].force.unwrap());
        assert!(w[0].equilibrium_distance < w[1].equilibrium_distance);
    }

    let r0 = basic_reproduction_number(&p, &prof);
    let ext = extinction_sweep(&p, &prof, &grid, &[0.005], &initials, 2000.0, 1e-3).unwrap();
    assert!(ext.all_pass());
    assert!((ext.rows[0].r0 - 0.005 / 0.5 * r0).abs() < 1e-12);
    let at_fixed_point = vec![disease_free_equilibrium(&p, &grid).to_state()];
    let ext = extinction_sweep(&p, &prof, &grid, &[0.005], &at_fixed_point, 100.0, 1e-3).unwrap();
    assert_eq!(ext.rows[0].convergence_time, Some(0.0));
}
