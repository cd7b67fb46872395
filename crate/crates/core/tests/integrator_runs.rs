mod common;

use common::{bounded, grid, homogeneous, params, rel};
use kfpness_core::integrator::{self, cfl_max_dt, run_transient, step, Stepper};
use kfpness_core::ness::{linear_steady, SteadyOptions};
use kfpness_core::phasespace::uniform_maxwellian;
use kfpness_core::{
    BoundarySpec, DiffusivityProfile, EnergyMode, Error, IntegratorConfig, KineticSystem, Profile,
    WeightSpec,
};

fn pure_fp(lambda: f64) -> KineticSystem {
    KineticSystem::new(
        params(1, 0.0, Profile::Constant(lambda), vec![], BoundarySpec::periodic()),
        grid(1, 4, 128, 8.0),
    )
    .unwrap()
}

#[test]
fn homogeneous_energy_follows_the_moment_ode() {
    let sys = pure_fp(1.0);
    let g = sys.grid().clone();
    let e0 = 2.5;
    let f0 = uniform_maxwellian(g.clone(), e0, true).unwrap();
    let lam = DiffusivityProfile::constant(g.n_cells(), 1.0).unwrap();
    let mut cfg = IntegratorConfig::new(&g, 2.0, EnergyMode::Frozen(lam));
    cfg.dt = 1e-3;
    cfg.record_every = 50;
    cfg.stop_at_steady = false;
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    let mut prev = f64::INFINITY;
    for s in &trace.samples {
        let exact = 1.0 + (e0 - 1.0) * (-2.0 * s.t).exp();
        assert!((s.energy - exact).abs() <= 5e-3 * exact, "t {} {} {}", s.t, s.energy, exact);
        assert!(s.energy <= prev);
        prev = s.energy;
    }
}

#[test]
fn zero_horizon_returns_initial_datum() {
    let sys = homogeneous(0.0, 4);
    let g = sys.grid().clone();
    let f0 = uniform_maxwellian(g.clone(), 1.0, true).unwrap();
    let cfg = IntegratorConfig::new(&g, 0.0, EnergyMode::SelfConsistent);
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    assert_eq!(trace.samples.len(), 1);
    assert_eq!(trace.steps, 0);
    assert_eq!(trace.final_field.values(), f0.values());
}

#[test]
fn record_every_zero_keeps_first_and_last() {
    let sys = bounded(0.0, 0.5);
    let g = sys.grid().clone();
    let f0 = uniform_maxwellian(g.clone(), 1.0, true).unwrap();
    let mut cfg = IntegratorConfig::new(&g, 0.5, EnergyMode::SelfConsistent);
    cfg.record_every = 0;
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    assert_eq!(trace.samples.len(), 2);
    assert!((trace.samples[1].t - 0.5).abs() < 1e-12);
}

#[test]
fn trace_invariants_on_bounded_run() {
    let sys = bounded(0.05, 0.5);
    let g = sys.grid().clone();
    let f0 = uniform_maxwellian(g.clone(), 1.5, true).unwrap();
    let mut cfg = IntegratorConfig::new(&g, 5.0, EnergyMode::SelfConsistent);
    cfg.record_every = 10;
    cfg.stop_at_steady = false;
    let trace = run_transient(&f0, &sys, &cfg, Some(&f0)).unwrap();
    assert!(trace.mass_drift() <= 1e-10);
    assert!(trace.samples.windows(2).all(|w| w[1].t > w[0].t));
    assert!(trace.final_field.min_value() >= 0.0);
    assert_eq!(trace.samples[0].l2w_distance, Some(0.0));
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,mass,energy,l2w_distance,boundary_energy_flux\n"));
    assert_eq!(text.lines().count(), trace.samples.len() + 1);
}

#[test]
fn cfl_violation_is_reported() {
    let sys = homogeneous(0.0, 8);
    let g = sys.grid().clone();
    let f0 = uniform_maxwellian(g.clone(), 1.0, true).unwrap();
    let mut cfg = IntegratorConfig::new(&g, 1.0, EnergyMode::SelfConsistent);
    cfg.dt = 2.0 * cfl_max_dt(&g);
    assert!(matches!(step(&f0, &sys, &cfg), Err(Error::Cfl { .. })));
    let err = run_transient(&f0, &sys, &cfg, None).unwrap_err();
    assert!(err.is_numerical());
}

#[test]
fn unnormalized_start_needs_opt_in() {
    let sys = homogeneous(0.0, 4);
    let g = sys.grid().clone();
    let mut f0 = uniform_maxwellian(g.clone(), 1.0, true).unwrap();
    f0.scale(3.0);
    let mut cfg = IntegratorConfig::new(&g, 0.1, EnergyMode::SelfConsistent);
    assert!(matches!(run_transient(&f0, &sys, &cfg, None), Err(Error::Validation(_))));
    cfg.renormalize_initial = true;
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    assert!((trace.samples[0].mass - 1.0).abs() < 1e-14);
}

#[test]
fn converged_linear_state_is_a_fixed_point_of_the_scheme() {
    let sys = bounded(0.0, 1.0);
    let opts = SteadyOptions::new(&sys);
    let lam = DiffusivityProfile::new(sys.tau().to_vec()).unwrap();
    let ness = linear_steady(&sys, &lam, &opts, None).unwrap();
    assert!(ness.residual <= opts.steady_tol);
    let mode = EnergyMode::Frozen(lam);
    let mut stepper = Stepper::new(&sys, &mode);
    let mut f = ness.field.clone();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let next = stepper.step(&f, opts.dt).unwrap();
        let r = next.weighted_distance(&f, &opts.weight) / opts.dt;
        worst = worst.max(r);
        f = next;
    }
    assert!(worst <= opts.steady_tol, "{worst}");
}

#[test]
fn linear_steady_state_is_unique() {
    let sys = bounded(0.0, 1.0);
    let g = sys.grid().clone();
    let opts = SteadyOptions::new(&sys);
    let lam = DiffusivityProfile::new(sys.tau().to_vec()).unwrap();
    let hot = uniform_maxwellian(g.clone(), 3.0, true).unwrap();
    let cold = uniform_maxwellian(g.clone(), 0.3, true).unwrap();
    let a = linear_steady(&sys, &lam, &opts, Some(&hot)).unwrap();
    let b = linear_steady(&sys, &lam, &opts, Some(&cold)).unwrap();
    let w = WeightSpec::monitoring_default(1);
    let d = a.field.weighted_distance(&b.field, &w) / a.field.weighted_norm(&w, kfpness_core::Norm::L2);
    assert!(d <= 1e-6, "{d}");
}

#[test]
fn specular_self_consistent_energy_stays_bounded() {
    let sys = bounded(0.05, 0.0);
    let g = sys.grid().clone();
    let tau1 = 1.5;
    let f0 = uniform_maxwellian(g.clone(), 3.0 * tau1, true).unwrap();
    let mut cfg = IntegratorConfig::new(&g, f64::INFINITY, EnergyMode::SelfConsistent);
    cfg.max_steps = Some(5000);
    cfg.record_every = 50;
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    let bound = tau1 + 1.0 * 0.5 / (2.0 * 0.95);
    let tail = &trace.samples[trace.samples.len() / 2..];
    assert!(tail.iter().all(|s| s.energy <= 1.2 * bound && s.energy >= 0.0));
}

#[test]
fn two_dimensional_run_keeps_mass_and_sign() {
    let sys = KineticSystem::new(
        params(
            2,
            0.05,
            Profile::TwoPlateau {
                low: 0.6,
                high: 1.2,
                split: 0.5,
            },
            vec![common::whole_thermostat(2, 0.5, 0.8)],
            BoundarySpec::maxwell(0.7, 1.5),
        ),
        grid(2, 8, 16, 6.0),
    )
    .unwrap();
    let g = sys.grid().clone();
    let f0 = uniform_maxwellian(g.clone(), 1.0, true).unwrap();
    let mut cfg = IntegratorConfig::new(&g, 1.0, EnergyMode::SelfConsistent);
    cfg.record_every = 5;
    let trace = run_transient(&f0, &sys, &cfg, None).unwrap();
    assert!(trace.mass_drift() <= 1e-10);
    assert!(trace.final_field.min_value() >= 0.0);
    assert!(rel(trace.final_field.mass(), 1.0) <= 1e-10);
}

#[test]
fn single_precision_smoke() {
    use kfpness_core::integrator::{EnergyMode as Mode, IntegratorConfig as Cfg, KineticSystem as Sys};
    use kfpness_core::model::{BoundarySpec as B, ModelParams, Profile as P, WeightSpec as W};
    use kfpness_core::phasespace::PhaseSpaceGrid as G;
    let g = std::sync::Arc::new(G::<f32>::new(1, 8, 32, 6.0).unwrap());
    let sys = Sys::new(
        ModelParams {
            dimension: 1,
            alpha: 0.05f32,
            tau: P::Constant(1.0),
            thermostats: vec![],
            boundary: B::maxwell(0.5, 1.5),
            weight: W::monitoring_default(1),
        },
        g.clone(),
    )
    .unwrap();
    let f0 = kfpness_core::phasespace::uniform_maxwellian(g.clone(), 1.0f32, true).unwrap();
    let mut cfg = Cfg::new(&g, 0.5, Mode::SelfConsistent);
    cfg.record_every = 10;
    let trace = integrator::run_transient(&f0, &sys, &cfg, None).unwrap();
    assert!(trace.mass_drift() <= 1e-5);
    assert!(trace.final_field.min_value() >= 0.0);
}
