use std::path::Path;

use kfpness_cli::config::{ProfileCfg, RunConfig, ShapeCfg, VMax};
use kfpness_cli::parse_config_str;
use kfpness_core::{EnergyMode, Profile};

fn parse(text: &str) -> Result<kfpness_cli::Setup, kfpness_cli::config::ConfigError> {
    parse_config_str(text, Path::new("test.toml"))
}

#[test]
fn minimal_config_materializes_defaults() {
    let s = parse("").unwrap();
    assert_eq!(s.config, RunConfig::default());
    let c = &s.config;
    assert_eq!(c.model.dimension, 1);
    assert_eq!(c.model.alpha, 0.0);
    assert_eq!((c.grid.nx, c.grid.nv, c.grid.v_max), (32, 64, VMax::Auto));
    assert_eq!(c.output.record_every, 1);
    assert_eq!(s.integrator.dt, kfpness_core::integrator::cfl_max_dt(s.system.grid()));
    assert_eq!(s.integrator.energy_mode, EnergyMode::SelfConsistent);
    assert_eq!(s.fixed_point.max_outer, 50);

    let meta = s.metadata();
    let cfg = &meta["config"];
    for key in ["model", "grid", "integrator", "ness", "stability", "output"] {
        assert!(cfg.get(key).is_some(), "{key}");
    }
    assert_eq!(cfg["grid"]["v_max"], s.v_max);
    assert_eq!(meta["resolved"]["v_max_auto"], true);
    assert_eq!(cfg["integrator"]["dt"], s.integrator.dt);
    assert_eq!(cfg["model"]["weight"]["k"], 3.0);
}

#[test]
fn alpha_outside_range_is_rejected_with_line() {
    let e = parse("[model]\nalpha = 0.7\n").unwrap_err();
    assert!(e.mentions("alpha outside [0, 1/2)"), "{e}");
    assert_eq!(e.issues[0].path, "model.alpha");
    assert_eq!(e.issues[0].line, Some(2));
}

#[test]
fn misspelled_key_reports_path() {
    let e = parse("[model]\nalpha = 0.1\nthermostatts = []\n").unwrap_err();
    assert_eq!(e.issues[0].path, "model.thermostatts");
    assert!(e.issues[0].message.contains("unknown field"), "{e}");
    assert_eq!(e.issues[0].line, Some(3));
    assert!(e.to_string().starts_with("test.toml:3: model.thermostatts"));
}

#[test]
fn unknown_nested_and_top_level_keys() {
    let e = parse("[model.boundary]\nmode = \"maxwell\"\nacommodation = 1\n").unwrap_err();
    assert_eq!(e.issues[0].path, "model.boundary.acommodation");
    let e = parse("[gird]\nnx = 4\n").unwrap_err();
    assert!(e.issues[0].message.contains("unknown field `gird`"));
    let e = parse("[model]\nthermostats = [{ eta = 1.0, temperature = 1.0, regoin = 1 }]\n").unwrap_err();
    assert!(e.issues[0].path.starts_with("model.thermostats[0]"), "{e}");
}

#[test]
fn type_mismatch_reports_path_and_line() {
    let e = parse("[grid]\nnx = 4\nnv = \"many\"\n").unwrap_err();
    assert_eq!(e.issues[0].path, "grid.nv");
    assert_eq!(e.issues[0].line, Some(3));
    let e = parse("[grid]\nv_max = \"big\"\n").unwrap_err();
    assert!(e.mentions("auto"));
}

#[test]
fn syntax_error_has_line() {
    let e = parse("[model]\nalpha = = 1\n").unwrap_err();
    assert_eq!(e.issues[0].line, Some(2));
}

#[test]
fn invariant_violations_are_collected() {
    let text = "[model]\nalpha = -1\n[model.boundary]\nmode = \"maxwell\"\naccommodation = 0.5\nwall_temperature = 0.0\n[grid]\nnv = 7\n";
    let e = parse(text).unwrap_err();
    assert!(e.issues.len() >= 3, "{e}");
    let paths: Vec<_> = e.issues.iter().map(|i| i.path.as_str()).collect();
    assert!(paths.contains(&"model.alpha"));
    assert!(paths.contains(&"grid.nv"));
    let wall = e.issues.iter().find(|i| i.path.starts_with("model.boundary")).unwrap();
    assert_eq!(wall.line, Some(6));
}

#[test]
fn dt_above_cfl_is_rejected() {
    let e = parse("[grid]\nnx = 32\nv_max = 8.0\n[integrator]\ndt = 0.1\n").unwrap_err();
    assert_eq!(e.issues[0].path, "integrator.dt");
    assert_eq!(e.issues[0].line, Some(5));
}

#[test]
fn profile_forms() {
    let s = parse(
        "[model]\ntau = { linear_ramp = { start = 0.5, end = 1.5 } }\n\
         [model.boundary]\nmode = \"maxwell\"\naccommodation = { two_plateau = { low = 0.0, high = 1.0, split = 0.5 } }\nwall_temperature = 2\n",
    )
    .unwrap();
    assert_eq!(
        s.config.model.tau,
        ProfileCfg::Shape(ShapeCfg::LinearRamp { start: 0.5, end: 1.5 })
    );
    assert_eq!(s.system.params().boundary.wall_temperature, Profile::Constant(2.0));
    let tau = s.system.tau();
    assert!(tau[0] < tau[tau.len() - 1]);

    let table: Vec<String> = (0..4).map(|i| format!("{}", 1.0 + i as f64)).collect();
    let s = parse(&format!("[model]\ntau = {{ table = [{}] }}\n[grid]\nnx = 4\n", table.join(","))).unwrap();
    assert_eq!(s.system.tau(), &[1.0, 2.0, 3.0, 4.0]);
    let e = parse("[model]\ntau = { table = [1.0, 2.0] }\n[grid]\nnx = 4\n").unwrap_err();
    assert!(e.issues[0].path.starts_with("model.tau"), "{e}");
    let e = parse("[model]\ntau = { ramp = 1 }\n").unwrap_err();
    assert!(e.issues[0].path.starts_with("model.tau"), "{e}");
}

#[test]
fn frozen_mode_uses_lambda_or_tau() {
    let s = parse("[integrator]\nenergy_mode = \"frozen\"\n").unwrap();
    match &s.integrator.energy_mode {
        EnergyMode::Frozen(l) => assert!(l.values.iter().all(|&v| v == 1.0)),
        _ => panic!(),
    }
    let s = parse("[integrator]\nenergy_mode = \"frozen\"\nlambda = 2.5\n").unwrap();
    match &s.integrator.energy_mode {
        EnergyMode::Frozen(l) => assert!(l.values.iter().all(|&v| v == 2.5)),
        _ => panic!(),
    }
    let e = parse("[integrator]\nlambda = 2.5\n").unwrap_err();
    assert_eq!(e.issues[0].path, "integrator.lambda");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            kfpness_cli::parse_config(&p).unwrap_or_else(|e| panic!("{e}"));
            n += 1;
        }
    }
    assert!(n >= 5);
}
