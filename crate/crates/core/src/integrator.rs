//! Strang-split time stepping and transient runs.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result, ValidationErrors};
use crate::model::{validate_params, DiffusivityProfile, ModelParams, WeightSpec};
use crate::operators::{
    boundary_energy_flux, transport_step, CollisionWorkspace, ThermostatSet, WallModel,
};
use crate::phasespace::{weighted_l2_distance, BoundaryFlux, DistributionField, PhaseSpaceGrid};
use crate::scalar::Real;

const CFL_SAFETY: f64 = 0.9;

/// Largest stable transport step, `0.9 dx / v_max`.
pub fn cfl_max_dt<S: Real>(grid: &PhaseSpaceGrid<S>) -> S {
    S::lit(CFL_SAFETY) * grid.dx() / grid.v_max()
}

/// Model parameters resolved on a grid.
#[derive(Debug, Clone)]
pub struct KineticSystem<S> {
    params: ModelParams<S>,
    grid: Arc<PhaseSpaceGrid<S>>,
    tau: Vec<S>,
    thermostats: ThermostatSet<S>,
    wall: WallModel<S>,
}

impl<S: Real> KineticSystem<S> {
    pub fn new(params: ModelParams<S>, grid: Arc<PhaseSpaceGrid<S>>) -> Result<Self> {
        validate_params(&params)?;
        if params.dimension != grid.dim() {
            let mut errs = ValidationErrors::default();
            errs.push(
                "grid",
                format!(
                    "grid dimension {} does not match model dimension {}",
                    grid.dim(),
                    params.dimension
                ),
            );
            return Err(errs.into());
        }
        if let Some(len) = params.tau.table_len() {
            if len != grid.n_cells() {
                return Err(Error::Shape(format!(
                    "tau table has {len} entries, grid has {} cells",
                    grid.n_cells()
                )));
            }
        }
        let tau = (0..grid.n_cells())
            .map(|c| params.tau.eval(c, grid.cell_center(c)[0]))
            .collect();
        let thermostats = ThermostatSet::new(&grid, &params.thermostats)?;
        let wall = WallModel::new(&grid, &params.boundary)?;
        Ok(Self {
            params,
            grid,
            tau,
            thermostats,
            wall,
        })
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }
    pub fn grid(&self) -> &Arc<PhaseSpaceGrid<S>> {
        &self.grid
    }
    /// Background temperature per cell.
    pub fn tau(&self) -> &[S] {
        &self.tau
    }
    pub fn thermostats(&self) -> &ThermostatSet<S> {
        &self.thermostats
    }
    pub fn wall(&self) -> &WallModel<S> {
        &self.wall
    }
    pub fn alpha(&self) -> S {
        self.params.alpha
    }

    /// Spatial mean of `tau`.
    pub fn tau_mean(&self) -> S {
        self.tau.iter().copied().sum::<S>() / S::from_usize_lossy(self.tau.len())
    }

    /// `Λ(x) = α ν + (1 - α) τ(x)`.
    pub fn lambda_at(&self, nu: S) -> Result<DiffusivityProfile<S>> {
        DiffusivityProfile::blend(self.params.alpha, nu, &self.tau)
    }

    /// Copy of the system with a different coupling `alpha`.
    pub fn with_alpha(&self, alpha: S) -> Result<Self> {
        let mut params = self.params.clone();
        params.alpha = alpha;
        Self::new(params, self.grid.clone())
    }
}

/// How the velocity diffusivity is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyMode<S> {
    /// Fixed `Λ(x)`: the linear problem.
    Frozen(DiffusivityProfile<S>),
    /// `Λ = α E_f + (1 - α) τ`, rebuilt from the current energy at each step.
    SelfConsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<S> {
    pub dt: S,
    pub t_final: S,
    pub energy_mode: EnergyMode<S>,
    /// Threshold on `||f_{t+dt} - f_t||_{L²_ω} / dt`.
    pub steady_tol: S,
    /// Sample every this many steps; 0 keeps only the first and last samples.
    pub record_every: usize,
    pub weight: WeightSpec<S>,
    /// Hard step budget (required when `t_final` is infinite).
    pub max_steps: Option<usize>,
    pub stop_at_steady: bool,
    pub renormalize_initial: bool,
}

impl<S: Real> IntegratorConfig<S> {
    /// Defaults: `dt = cfl_max_dt`, `steady_tol = 1e-10`, monitoring weight `k = d+2, ζ = 0.01, s = 1`.
    pub fn new(grid: &PhaseSpaceGrid<S>, t_final: S, energy_mode: EnergyMode<S>) -> Self {
        Self {
            dt: cfl_max_dt(grid),
            t_final,
            energy_mode,
            steady_tol: S::lit(1e-10),
            record_every: 1,
            weight: WeightSpec::monitoring_default(grid.dim()),
            max_steps: None,
            stop_at_steady: true,
            renormalize_initial: false,
        }
    }

    pub fn validate(&self, grid: &PhaseSpaceGrid<S>) -> std::result::Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::default();
        if !(self.dt > S::zero() && self.dt.is_finite()) {
            errs.push("integrator.dt", "dt must be finite and > 0");
        }
        if !(self.t_final >= S::zero()) {
            errs.push("integrator.t_final", "t_final must be >= 0");
        } else if !self.t_final.is_finite() && self.max_steps.is_none() {
            errs.push("integrator.t_final", "infinite t_final needs max_steps");
        }
        if !(self.steady_tol >= S::zero()) {
            errs.push("integrator.steady_tol", "steady_tol must be >= 0");
        }
        if !self.weight.is_admissible(grid.dim()) {
            errs.push("integrator.weight", "monitoring weight is not admissible");
        }
        if let EnergyMode::Frozen(l) = &self.energy_mode {
            if l.values.len() != grid.n_cells() {
                errs.push(
                    "integrator.energy_mode",
                    format!("lambda has {} values, grid has {} cells", l.values.len(), grid.n_cells()),
                );
            }
        }
        errs.into_result()
    }
}

/// Advances fields by one split step, caching the collision factorization.
#[derive(Debug)]
pub struct Stepper<'a, S: Real> {
    system: &'a KineticSystem<S>,
    mode: &'a EnergyMode<S>,
    workspace: Option<CollisionWorkspace<S>>,
    steps: usize,
}

impl<'a, S: Real> Stepper<'a, S> {
    pub fn new(system: &'a KineticSystem<S>, mode: &'a EnergyMode<S>) -> Self {
        Self {
            system,
            mode,
            workspace: None,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Diffusivity used for a step starting from `f`.
    pub fn lambda_for(&self, f: &DistributionField<S>) -> Result<DiffusivityProfile<S>> {
        match self.mode {
            EnergyMode::Frozen(l) => Ok(l.clone()),
            EnergyMode::SelfConsistent => self.system.lambda_at(f.energy_functional()),
        }
    }

    /// Half transport, implicit Fokker-Planck, exact BGK, half transport.
    pub fn step(&mut self, f: &DistributionField<S>, dt: S) -> Result<DistributionField<S>> {
        let grid = self.system.grid();
        let max = cfl_max_dt(grid);
        if !(dt > S::zero()) || dt > max * (S::one() + S::lit(1e-12)) {
            return Err(Error::Cfl {
                dt: dt.as_f64(),
                max: max.as_f64(),
            });
        }
        let lambda = self.lambda_for(f)?;
        let rebuild = self
            .workspace
            .as_ref()
            .map(|w| !w.matches(&lambda, dt))
            .unwrap_or(true);
        if rebuild {
            self.workspace = Some(CollisionWorkspace::new(grid, &lambda, dt));
        }
        let half = dt * S::lit(0.5);
        let wall = self.system.wall();
        let mut g = transport_step(f, half, wall)?;
        self.workspace.as_ref().unwrap().solve(&mut g);
        self.system.thermostats().relax(&mut g, dt);
        let mut g = transport_step(&g, half, wall)?;
        self.steps += 1;
        if !g.is_finite() {
            return Err(Error::NonFinite { step: self.steps });
        }
        g.t = f.t + dt;
        Ok(g)
    }
}

/// One step with a fresh stepper.
pub fn step<S: Real>(
    f: &DistributionField<S>,
    system: &KineticSystem<S>,
    cfg: &IntegratorConfig<S>,
) -> Result<DistributionField<S>> {
    Stepper::new(system, &cfg.energy_mode).step(f, cfg.dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample<S> {
    pub t: S,
    pub mass: S,
    pub energy: S,
    /// `None` when the run has no reference field.
    pub l2w_distance: Option<S>,
    pub boundary_energy_flux: S,
}

#[derive(Debug, Clone)]
pub struct RunTrace<S> {
    pub samples: Vec<TraceSample<S>>,
    pub final_field: DistributionField<S>,
    pub steady_reached: bool,
    pub steps: usize,
    /// Last measured `||f_{t+dt} - f_t||_{L²_ω} / dt` (infinite if no step was taken).
    pub residual: S,
}

impl<S: Real> RunTrace<S> {
    /// `(t, distance)` pairs, for runs with a reference.
    pub fn distance_series(&self) -> Vec<(S, S)> {
        self.samples
            .iter()
            .filter_map(|s| s.l2w_distance.map(|d| (s.t, d)))
            .collect()
    }

    /// Largest relative deviation of the mass column from its first entry.
    pub fn mass_drift(&self) -> S {
        let m0 = self.samples[0].mass;
        self.samples
            .iter()
            .fold(S::zero(), |acc, s| acc.max(((s.mass - m0) / m0).abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mass,energy,l2w_distance,boundary_energy_flux")?;
        for s in &self.samples {
            let d = s.l2w_distance.map(|d| d.as_f64()).unwrap_or(f64::NAN);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t.as_f64(),
                s.mass.as_f64(),
                s.energy.as_f64(),
                d,
                s.boundary_energy_flux.as_f64()
            )?;
        }
        Ok(())
    }
}

fn sample<S: Real>(
    f: &DistributionField<S>,
    system: &KineticSystem<S>,
    reference: Option<(&DistributionField<S>, &[S])>,
) -> TraceSample<S> {
    let grid = system.grid();
    TraceSample {
        t: f.t,
        mass: f.mass(),
        energy: f.energy_functional(),
        l2w_distance: reference
            .map(|(r, w)| weighted_l2_distance(grid, w, f.values(), r.values())),
        boundary_energy_flux: boundary_energy_flux(
            grid,
            &BoundaryFlux::outgoing_trace(f),
            system.wall(),
        ),
    }
}

/// Iterates [`Stepper::step`] until `t_final`, the step budget, or steady detection.
pub fn run_transient<S: Real>(
    f0: &DistributionField<S>,
    system: &KineticSystem<S>,
    cfg: &IntegratorConfig<S>,
    reference: Option<&DistributionField<S>>,
) -> Result<RunTrace<S>> {
    let grid = system.grid();
    cfg.validate(grid)?;
    if f0.grid().as_ref() != grid.as_ref() {
        return Err(Error::Shape("initial field lives on a different grid".into()));
    }
    if let Some(r) = reference {
        if r.grid().as_ref() != grid.as_ref() {
            return Err(Error::Shape("reference field lives on a different grid".into()));
        }
    }
    if f0.is_signed() || f0.min_value() < S::zero() {
        return Err(Error::InvalidField {
            index: f0.values().iter().position(|&v| v < S::zero()).unwrap_or(0),
        });
    }
    let mut f = f0.clone();
    if cfg.renormalize_initial {
        f.normalize_mass();
    } else if (f.mass() - S::one()).abs() > S::lit(1e-8).max(S::epsilon() * S::lit(100.0)) {
        let mut errs = ValidationErrors::default();
        errs.push(
            "initial.mass",
            format!("initial mass {} is not 1 (enable renormalization)", f.mass()),
        );
        return Err(errs.into());
    }

    let weights = grid.weight_table(&cfg.weight);
    let refw = reference.map(|r| (r, weights.as_slice()));
    let t_end = f.t + cfg.t_final;
    let mut samples = vec![sample(&f, system, refw)];
    let mut stepper = Stepper::new(system, &cfg.energy_mode);
    let mut steady = false;
    let mut residual = S::infinity();
    let eps = cfg.dt * S::lit(1e-9);
    loop {
        if f.t >= t_end - eps || cfg.max_steps.is_some_and(|m| stepper.steps() >= m) {
            break;
        }
        let dt = cfg.dt.min(t_end - f.t);
        let next = stepper.step(&f, dt)?;
        residual = weighted_l2_distance(grid, &weights, next.values(), f.values()) / dt;
        f = next;
        if cfg.record_every > 0 && stepper.steps().is_multiple_of(cfg.record_every) {
            samples.push(sample(&f, system, refw));
        }
        if residual <= cfg.steady_tol {
            steady = true;
            if cfg.stop_at_steady {
                break;
            }
        }
    }
    if samples.last().map(|s| s.t) != Some(f.t) {
        samples.push(sample(&f, system, refw));
    }
    Ok(RunTrace {
        samples,
        final_field: f,
        steady_reached: steady,
        steps: stepper.steps(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfl_formula() {
        let g = PhaseSpaceGrid::new(1, 32, 64, 8.0).unwrap();
        assert!((cfl_max_dt(&g) - 0.9f64 / 256.0).abs() < 1e-18);
        let g2 = PhaseSpaceGrid::new(1, 64, 64, 8.0).unwrap();
        assert!((cfl_max_dt(&g2) * 2.0f64 - cfl_max_dt(&g)).abs() < 1e-18);
    }
}
