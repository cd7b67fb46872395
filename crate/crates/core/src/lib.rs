//! Finite-volume solver for the kinetic Fokker-Planck equation with BGK
//! thermostats and Maxwell walls, and its non-equilibrium steady states.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod integrator;
pub mod model;
pub mod ness;
pub mod operators;
pub mod phasespace;
pub mod scalar;

pub use error::{Error, Result, ValidationErrors, Violation};
pub use scalar::Real;

pub use analysis::{FitStatus, HomogeneousOracle};
pub use model::BoundaryMode;
pub use ness::NessSummary;
pub use phasespace::{FluxKind, Norm};

pub type Temperature = model::Temperature<f64>;
pub type Profile = model::Profile<f64>;
pub type Region = model::Region<f64>;
pub type ThermostatSpec = model::ThermostatSpec<f64>;
pub type BoundarySpec = model::BoundarySpec<f64>;
pub type WeightSpec = model::WeightSpec<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type DiffusivityProfile = model::DiffusivityProfile<f64>;
pub type PhaseSpaceGrid = phasespace::PhaseSpaceGrid<f64>;
pub type DistributionField = phasespace::DistributionField<f64>;
pub type BoundaryFlux = phasespace::BoundaryFlux<f64>;
pub type WallModel = operators::WallModel<f64>;
pub type ThermostatSet = operators::ThermostatSet<f64>;
pub type KineticSystem = integrator::KineticSystem<f64>;
pub type IntegratorConfig = integrator::IntegratorConfig<f64>;
pub type EnergyMode = integrator::EnergyMode<f64>;
pub type RunTrace = integrator::RunTrace<f64>;
pub type SteadyStateResult = ness::SteadyStateResult<f64>;
pub type SteadyOptions = ness::SteadyOptions<f64>;
pub type FixedPointOptions = ness::FixedPointOptions<f64>;
pub type NessOutcome = ness::NessOutcome<f64>;
pub type DecayFitResult = analysis::DecayFitResult<f64>;
pub type EnergyBudget = analysis::EnergyBudget<f64>;
