mod common;

use common::{bounded, grid};
use kfpness_core::integrator::{cfl_max_dt, step, IntegratorConfig};
use kfpness_core::model::Temperature;
use kfpness_core::operators::{
    bgk_apply, chang_cooper_equilibrium, fp_apply, transport_apply, transport_step,
    CollisionWorkspace,
};
use kfpness_core::phasespace::uniform_maxwellian;
use kfpness_core::{
    BoundarySpec, DiffusivityProfile, DistributionField, EnergyMode, PhaseSpaceGrid, WallModel,
};
use proptest::prelude::*;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cell averages of the 1D Maxwellian over `[v_j - dv/2, v_j + dv/2]` (5-point Gauss-Legendre).
fn cell_averaged_maxwellian(g: &PhaseSpaceGrid, t: f64) -> Vec<f64> {
    let nodes = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    let weights = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let norm = (2.0 * std::f64::consts::PI * t).sqrt();
    g.nodes_1d()
        .iter()
        .map(|&v| {
            nodes
                .iter()
                .zip(weights)
                .map(|(x, w)| {
                    let u = v + 0.5 * g.dv() * x;
                    0.5 * w * (-u * u / (2.0 * t)).exp() / norm
                })
                .sum()
        })
        .collect()
}

#[test]
fn chang_cooper_equilibrium_residual() {
    for lam in [0.3, 1.0, 2.7] {
        let g = grid(1, 2, 64, 8.0);
        let eq = chang_cooper_equilibrium(&g, lam);
        let f = DistributionField::from_values(g.clone(), eq.repeat(2), 0.0).unwrap();
        let r = fp_apply(&f, &DiffusivityProfile::constant(2, lam).unwrap());
        assert!(max_abs(r.values()) <= 1e-12);
    }
}

#[test]
fn point_samples_are_the_discrete_equilibrium() {
    let g = grid(1, 2, 64, 8.0);
    let samples = g.maxwellian_samples(Temperature::new(1.3).unwrap());
    let f = DistributionField::from_values(g.clone(), samples.repeat(2), 0.0).unwrap();
    let r = fp_apply(&f, &DiffusivityProfile::constant(2, 1.3).unwrap());
    assert!(max_abs(r.values()) <= 1e-12);
}

#[test]
fn cell_averaged_maxwellian_residual_is_second_order() {
    let lam = 1.0;
    let residual = |nv: usize| {
        let g = grid(1, 2, nv, 8.0);
        let f = DistributionField::from_values(g.clone(), cell_averaged_maxwellian(&g, lam).repeat(2), 0.0)
            .unwrap();
        max_abs(fp_apply(&f, &DiffusivityProfile::constant(2, lam).unwrap()).values())
    };
    let r: Vec<f64> = [32, 64, 128].iter().map(|&n| residual(n)).collect();
    for w in r.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.2, "{r:?}");
    }
}

#[test]
fn wall_kernel_quadrature_second_order() {
    let errs: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&nv| {
            let g = grid(1, 4, nv, 8.0);
            let w = WallModel::new(&g, &BoundarySpec::maxwell(1.0, 1.0)).unwrap();
            for face in 0..g.faces().len() {
                let k: f64 = w.kernel(face).iter().sum();
                assert!((k - 1.0).abs() <= 1e-13);
            }
            (w.raw_kernel_flux(0) - 1.0).abs()
        })
        .collect();
    for e in errs.windows(2) {
        assert!(((e[0] / e[1]).log2() - 2.0).abs() <= 0.2, "{errs:?}");
    }
}

#[test]
fn step_matches_operator_sum_as_dt_vanishes() {
    let sys = bounded(0.0, 0.5);
    let g = sys.grid().clone();
    // smooth, spatially varying and non-Maxwellian start
    let nvel = g.n_velocities();
    let base = uniform_maxwellian(g.clone(), 1.2, true).unwrap();
    let values: Vec<f64> = base
        .values()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let x = g.cell_center(i / nvel)[0];
            let v = g.velocity(i % nvel)[0];
            m * (1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin() + 0.2 * (v / (1.0 + v * v)))
        })
        .collect();
    let mut f = DistributionField::from_values(g.clone(), values, 0.0).unwrap();
    f.normalize_mass();
    let lam = DiffusivityProfile::new(sys.tau().to_vec()).unwrap();
    let op: Vec<f64> = {
        let a = transport_apply(&f, sys.wall());
        let b = fp_apply(&f, &lam);
        let c = bgk_apply(&f, sys.thermostats());
        a.values()
            .iter()
            .zip(b.values())
            .zip(c.values())
            .map(|((x, y), z)| x + y + z)
            .collect()
    };
    let norm = op.iter().map(|x| x * x).sum::<f64>().sqrt();
    let err = |dt: f64| {
        let mut cfg = IntegratorConfig::new(&g, 1.0, EnergyMode::Frozen(lam.clone()));
        cfg.dt = dt;
        let next = step(&f, &sys, &cfg).unwrap();
        next.values()
            .iter()
            .zip(f.values())
            .zip(&op)
            .map(|((n, o), l)| ((n - o) / dt - l).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm
    };
    let e1 = err(1e-5);
    let e2 = err(5e-6);
    assert!(e1 < 1e-2, "{e1}");
    assert!((e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
}

fn random_field(g: &std::sync::Arc<PhaseSpaceGrid>, seed: u64) -> DistributionField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = (0..g.n_values()).map(|_| rng.random::<f64>()).collect();
    let mut f = DistributionField::from_values(g.clone(), v, 0.0).unwrap();
    f.normalize_mass();
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_positive_and_conservative(
        d in 1usize..=2,
        iota in 0.0f64..=1.0,
        theta in 0.2f64..3.0,
        frac in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        let g = grid(d, 6, 8, 3.0);
        let w = WallModel::new(&g, &BoundarySpec::maxwell(iota, theta)).unwrap();
        let mut f = random_field(&g, seed);
        let dt = frac * cfl_max_dt(&g);
        for _ in 0..5 {
            f = transport_step(&f, dt, &w).unwrap();
        }
        prop_assert!(f.min_value() >= 0.0);
        prop_assert!((f.mass() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn implicit_collision_positive_and_conservative(
        d in 1usize..=2,
        lam in 0.05f64..5.0,
        dt in 1e-4f64..10.0,
        seed in any::<u64>(),
    ) {
        let g = grid(d, 2, 12, 4.0);
        let mut f = random_field(&g, seed);
        let ws = CollisionWorkspace::new(&g, &DiffusivityProfile::constant(g.n_cells(), lam).unwrap(), dt);
        ws.solve(&mut f);
        prop_assert!(f.min_value() >= 0.0);
        prop_assert!((f.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bgk_relaxation_positive_and_conservative(
        eta in 0.0f64..50.0,
        t in 0.1f64..4.0,
        dt in 1e-4f64..10.0,
        seed in any::<u64>(),
    ) {
        let g = grid(1, 8, 16, 6.0);
        let th = kfpness_core::ThermostatSet::new(&g, &[common::whole_thermostat(1, eta, t)]).unwrap();
        let mut f = random_field(&g, seed);
        th.relax(&mut f, dt);
        prop_assert!(f.min_value() >= 0.0);
        prop_assert!((f.mass() - 1.0).abs() < 1e-13);
    }
}
