#![allow(dead_code)]

use std::sync::Arc;

use kfpness_core::{
    BoundarySpec, KineticSystem, ModelParams, PhaseSpaceGrid, Profile, Region, ThermostatSpec,
    WeightSpec,
};

pub fn grid(d: usize, nx: usize, nv: usize, v_max: f64) -> Arc<PhaseSpaceGrid> {
    Arc::new(PhaseSpaceGrid::new(d, nx, nv, v_max).unwrap())
}

pub fn whole_thermostat(d: usize, eta: f64, temperature: f64) -> ThermostatSpec {
    ThermostatSpec {
        eta,
        temperature,
        region: Region::whole(d),
    }
}

pub fn params(
    d: usize,
    alpha: f64,
    tau: Profile,
    thermostats: Vec<ThermostatSpec>,
    boundary: BoundarySpec,
) -> ModelParams {
    ModelParams {
        dimension: d,
        alpha,
        tau,
        thermostats,
        boundary,
        weight: WeightSpec::monitoring_default(d),
    }
}

/// Periodic, `τ ≡ 1`, one full-domain thermostat `(η, T) = (2, 3)`.
pub fn homogeneous(alpha: f64, nx: usize) -> KineticSystem {
    KineticSystem::new(
        params(
            1,
            alpha,
            Profile::Constant(1.0),
            vec![whole_thermostat(1, 2.0, 3.0)],
            BoundarySpec::periodic(),
        ),
        grid(1, nx, 64, 8.0),
    )
    .unwrap()
}

/// Bounded slab: hot diffusive walls, cold thermostat near `x = 0`, ramped `τ`.
pub fn bounded(alpha: f64, iota: f64) -> KineticSystem {
    KineticSystem::new(
        params(
            1,
            alpha,
            Profile::LinearRamp {
                start: 0.5,
                end: 1.5,
            },
            vec![ThermostatSpec {
                eta: 1.0,
                temperature: 0.5,
                region: Region {
                    lower: vec![0.0],
                    upper: vec![0.3],
                },
            }],
            BoundarySpec::maxwell(iota, 2.0),
        ),
        grid(1, 32, 64, PhaseSpaceGrid::default_v_max(2.0)),
    )
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
