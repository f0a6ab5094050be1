use std::path::Path;

use semiflow_core::basic_reproduction_number;
use semiflow_lab::config::FitSource;
use semiflow_lab::parse_config;

const REFERENCE: &str = include_str!("../../../configs/reference.toml");

fn parse(text: &str) -> Result<semiflow_lab::RunConfig, semiflow_lab::ConfigError> {
    parse_config(text, Path::new("/base"))
}

#[test]
fn reference_config_parses() {
    let cfg = parse(REFERENCE).unwrap();
    let r0 = basic_reproduction_number(&cfg.params, &cfg.profile);
    assert!((r0 - 46.346591).abs() < 1e-6, "{r0}");
    assert_eq!(cfg.grid.n_cells(), 8000);
    assert_eq!(cfg.sweep.eps, vec![0.0, 1e-4, 1e-3, 1e-2]);
    assert_eq!(cfg.out_dir, Path::new("/base/out"));
    assert!(matches!(cfg.fit, FitSource::Edmunds { .. }));
}

#[test]
fn negative_beta_names_key_and_line() {
    let err = parse(&REFERENCE.replace("beta_I = 0.5", "beta_I = -1.0")).unwrap_err();
    assert_eq!(err.key.as_deref(), Some("model.beta_I"));
    let line = REFERENCE
        .lines()
        .position(|l| l.starts_with("beta_I"))
        .unwrap()
        + 1;
    assert_eq!(err.line, Some(line));
    assert!(err.message.contains("beta_I"));
}

#[test]
fn unknown_key_is_rejected() {
    let err = parse(&REFERENCE.replace("beta_I = 0.5", "betaI = 0.5")).unwrap_err();
    assert_eq!(err.key.as_deref(), Some("model.betaI"));
    assert!(err.message.contains("unknown field"), "{}", err.message);
}

#[test]
fn unknown_section_is_rejected() {
    let err = parse(&format!("{REFERENCE}\n[extra]\nx = 1\n")).unwrap_err();
    assert!(err.message.contains("extra"), "{}", err.message);
}

#[test]
fn missing_key_names_key_and_line() {
    let err = parse(&REFERENCE.replace("mu = 0.02\n", "")).unwrap_err();
    assert_eq!(err.key.as_deref(), Some("model.mu"));
    assert!(err.line.is_some());
}

#[test]
fn type_mismatch_reports_line() {
    let err = parse(&REFERENCE.replace("da = 0.05", "da = \"fine\"")).unwrap_err();
    let line = REFERENCE
        .lines()
        .position(|l| l.starts_with("da ="))
        .unwrap()
        + 1;
    assert_eq!(err.line, Some(line));
}

#[test]
fn optional_sections_default() {
    let minimal = "[model]\nlambda_influx = 1.0\nmu = 0.02\nbeta_I = 0.5\nbeta_J = 0.0\nnu_I = 0.5\nnu_J = 0.1\n\
                   [profile]\nkappa = 0.643\nrate = 0.156\n[grid]\nda = 0.05\na_max = 400.0\n";
    let cfg = parse(minimal).unwrap();
    assert_eq!(cfg.sim.horizon, 200.0);
    assert_eq!(cfg.sweep.initials.len(), 4);
    assert_eq!(cfg.spectrum.samples, 1000);
}

#[test]
fn short_grid_is_rejected() {
    let err = parse(&REFERENCE.replace("a_max = 400.0", "a_max = 100.0")).unwrap_err();
    assert!(
        err.key.as_deref().is_some_and(|k| k.starts_with("grid")),
        "{err:?}"
    );
}
