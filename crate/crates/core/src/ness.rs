//! Steady states: linear NESS for frozen `Λ`, the energy map `ℱ`, the
//! self-consistent fixed point and the perturbation experiment.

use serde::{Deserialize, Serialize};

use crate::analysis::{decay_fit, DecayFitResult};
use crate::error::{Error, Result};
use crate::integrator::{
    cfl_max_dt, run_transient, EnergyMode, IntegratorConfig, KineticSystem, RunTrace,
};
use crate::model::{DiffusivityProfile, WeightSpec};
use crate::phasespace::{project_maxwellian, DistributionField};
use crate::scalar::Real;

pub const WITHIN_REGIME: &str = "within proven regime";
pub const OUTSIDE_REGIME: &str = "outside proven regime";

#[derive(Debug, Clone)]
pub struct SteadyStateResult<S> {
    /// Unit-mass steady field.
    pub field: DistributionField<S>,
    pub energy: S,
    /// Weighted increment per unit time at termination.
    pub residual: S,
    pub steps: usize,
    pub lambda_used: DiffusivityProfile<S>,
}

/// Time stepping controls for steady-state searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOptions<S> {
    pub dt: S,
    pub steady_tol: S,
    pub max_steps: usize,
    pub weight: WeightSpec<S>,
}

impl<S: Real> SteadyOptions<S> {
    pub fn new(system: &KineticSystem<S>) -> Self {
        let grid = system.grid();
        Self {
            dt: cfl_max_dt(grid),
            steady_tol: S::lit(1e-10),
            max_steps: 2_000_000,
            weight: WeightSpec::monitoring_default(grid.dim()),
        }
    }

    fn integrator(&self, mode: EnergyMode<S>) -> IntegratorConfig<S> {
        IntegratorConfig {
            dt: self.dt,
            t_final: S::infinity(),
            energy_mode: mode,
            steady_tol: self.steady_tol,
            record_every: 0,
            weight: self.weight,
            max_steps: Some(self.max_steps),
            stop_at_steady: true,
            renormalize_initial: true,
        }
    }
}

/// Default start of steady searches: unit density at the mean background temperature.
pub fn default_initial<S: Real>(system: &KineticSystem<S>) -> Result<DistributionField<S>> {
    let grid = system.grid().clone();
    let nc = grid.n_cells();
    let mut f = project_maxwellian(
        grid,
        &vec![S::one(); nc],
        &vec![system.tau_mean(); nc],
        true,
    )?;
    f.normalize_mass();
    Ok(f)
}

/// Steady state of the linear problem with diffusivity `lambda`.
pub fn linear_steady<S: Real>(
    system: &KineticSystem<S>,
    lambda: &DiffusivityProfile<S>,
    opts: &SteadyOptions<S>,
    initial: Option<&DistributionField<S>>,
) -> Result<SteadyStateResult<S>> {
    let f0 = match initial {
        Some(f) => f.clone(),
        None => default_initial(system)?,
    };
    let cfg = opts.integrator(EnergyMode::Frozen(lambda.clone()));
    let trace = run_transient(&f0, system, &cfg, None)?;
    if !trace.steady_reached {
        return Err(Error::NotConverged {
            steps: trace.steps,
            residual: trace.residual.as_f64(),
        });
    }
    let mut field = trace.final_field;
    field.normalize_mass();
    field.t = S::zero();
    Ok(SteadyStateResult {
        energy: field.energy_functional(),
        field,
        residual: trace.residual,
        steps: trace.steps,
        lambda_used: lambda.clone(),
    })
}

/// Steady state behind `ℱ(ν)`, with `Λ = α ν + (1 - α) τ`.
pub fn map_f_state<S: Real>(
    system: &KineticSystem<S>,
    nu: S,
    opts: &SteadyOptions<S>,
    initial: Option<&DistributionField<S>>,
) -> Result<SteadyStateResult<S>> {
    linear_steady(system, &system.lambda_at(nu)?, opts, initial)
}

/// The energy map `ℱ(ν)`.
pub fn map_f<S: Real>(system: &KineticSystem<S>, nu: S, opts: &SteadyOptions<S>) -> Result<S> {
    Ok(map_f_state(system, nu, opts, None)?.energy)
}

/// Energy `E₀` of the `α = 0` steady state (`Λ = τ`).
pub fn linear_reference<S: Real>(
    system: &KineticSystem<S>,
    opts: &SteadyOptions<S>,
) -> Result<SteadyStateResult<S>> {
    let lambda = DiffusivityProfile::new(system.tau().to_vec())?;
    linear_steady(system, &lambda, opts, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions<S> {
    pub theta: S,
    pub tol_fp: S,
    pub max_outer: usize,
    pub alpha_budget: S,
    /// Relative slack on the upper end of `[0, 2E₀]`.
    pub interval_margin: S,
    pub steady: SteadyOptions<S>,
}

impl<S: Real> FixedPointOptions<S> {
    pub fn new(system: &KineticSystem<S>) -> Self {
        Self {
            theta: S::lit(0.5),
            tol_fp: S::lit(1e-4),
            max_outer: 50,
            alpha_budget: S::lit(0.1),
            interval_margin: S::lit(0.05),
            steady: SteadyOptions::new(system),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointState<S> {
    pub nu: S,
    pub f_nu: S,
    /// Every evaluated `(ν_k, ℱ(ν_k))`.
    pub history: Vec<(S, S)>,
    pub theta: S,
    /// Bisection bracket once an oscillation was seen.
    pub bracket: Option<(S, S)>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct NessOutcome<S> {
    pub nu_star: S,
    pub state: FixedPointState<S>,
    pub steady: SteadyStateResult<S>,
    pub e0: S,
    pub alpha: S,
    pub regime_flag: &'static str,
}

impl<S: Real> NessOutcome<S> {
    pub fn iterations(&self) -> usize {
        self.state.history.len()
    }

    pub fn summary(&self) -> NessSummary {
        NessSummary {
            nu_star: self.nu_star.as_f64(),
            energy: self.steady.energy.as_f64(),
            e0: self.e0.as_f64(),
            alpha: self.alpha.as_f64(),
            iterations: self.iterations(),
            residual: (self.state.f_nu - self.state.nu).abs().as_f64(),
            regime_flag: self.regime_flag.to_string(),
        }
    }
}

/// Summary record of a fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NessSummary {
    pub nu_star: f64,
    pub energy: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// `|ℱ(ν*) - ν*|`.
    pub residual: f64,
    pub regime_flag: String,
}

/// Solves `ν = ℱ(ν)` by damped iteration from `ν₀ = E₀`, switching to
/// bisection once `ℱ(ν) - ν` changes sign between iterates.
pub fn fixed_point_ness<S: Real>(
    system: &KineticSystem<S>,
    opts: &FixedPointOptions<S>,
) -> Result<NessOutcome<S>> {
    let alpha = system.alpha();
    let regime_flag = if alpha <= opts.alpha_budget {
        WITHIN_REGIME
    } else {
        OUTSIDE_REGIME
    };
    let base = linear_reference(system, &opts.steady)?;
    let e0 = base.energy;
    let upper = S::lit(2.0) * e0 * (S::one() + opts.interval_margin);

    let mut state = FixedPointState {
        nu: e0,
        f_nu: e0,
        history: Vec::new(),
        theta: opts.theta,
        bracket: None,
        converged: false,
    };
    let mut warm = base.field.clone();
    let mut prev: Option<(S, S)> = None;
    for _ in 0..opts.max_outer {
        let nu = state.nu;
        let steady = map_f_state(system, nu, &opts.steady, Some(&warm))?;
        let f_nu = steady.energy;
        state.f_nu = f_nu;
        state.history.push((nu, f_nu));
        if !(f_nu >= S::zero() && f_nu <= upper) {
            return Err(Error::OutOfInterval {
                nu: nu.as_f64(),
                value: f_nu.as_f64(),
                upper: upper.as_f64(),
            });
        }
        let g = f_nu - nu;
        if g.abs() <= opts.tol_fp * nu.max(S::one()) {
            state.converged = true;
            return Ok(NessOutcome {
                nu_star: nu,
                state,
                steady,
                e0,
                alpha,
                regime_flag,
            });
        }
        warm = steady.field;
        state.bracket = match (state.bracket, prev) {
            (Some((lo, hi)), _) => {
                // g > 0 below the root: ℱ(ν) - ν decreases through ν*
                if g > S::zero() {
                    Some((nu, hi))
                } else {
                    Some((lo, nu))
                }
            }
            (None, Some((nu_p, g_p))) if g_p * g < S::zero() => {
                let (lo, hi) = if nu_p < nu { (nu_p, nu) } else { (nu, nu_p) };
                Some((lo, hi))
            }
            _ => None,
        };
        prev = Some((nu, g));
        state.nu = match state.bracket {
            Some((lo, hi)) => (lo + hi) * S::lit(0.5),
            None => (S::one() - opts.theta) * nu + opts.theta * f_nu,
        };
    }
    Err(Error::FixedPointBudget {
        iterations: opts.max_outer,
        residual: (state.f_nu - state.history.last().map(|h| h.0).unwrap_or(state.nu))
            .abs()
            .as_f64(),
    })
}

/// Mass-zero bump `ρ(x) (M̃_{0.6 E} - M̃_{0.8 E})` scaled by `amplitude`, added
/// to `base`, clipped at zero and renormalized to unit mass.
pub fn perturb<S: Real>(base: &DistributionField<S>, amplitude: S) -> Result<DistributionField<S>> {
    let grid = base.grid().clone();
    let e = base.energy_functional() / base.mass();
    let hot = grid.discrete_maxwellian(crate::model::Temperature::new(S::lit(0.8) * e)?);
    let cold = grid.discrete_maxwellian(crate::model::Temperature::new(S::lit(0.6) * e)?);
    let rho = base.density();
    let nvel = grid.n_velocities();
    let mut values = base.values().to_vec();
    let mut clipped = S::zero();
    let mut bump = S::zero();
    for c in 0..grid.n_cells() {
        for j in 0..nvel {
            let h = amplitude * rho[c] * (cold[j] - hot[j]);
            bump = bump + h.abs();
            let x = values[c * nvel + j] + h;
            if x < S::zero() {
                clipped = clipped - x;
                values[c * nvel + j] = S::zero();
            } else {
                values[c * nvel + j] = x;
            }
        }
    }
    if clipped > S::lit(1e-3) * bump {
        return Err(Error::Perturbation(format!(
            "clipping removed {} of a bump of size {}",
            clipped.as_f64(),
            bump.as_f64()
        )));
    }
    let mut f = DistributionField::from_values(grid, values, S::zero())?;
    f.normalize_mass();
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct StabilityOutcome<S> {
    pub trace: RunTrace<S>,
    pub fit: DecayFitResult<S>,
    pub floor: S,
}

/// Runs the self-consistent evolution from a perturbed steady state and
/// fits the decay of `||f_t - 𝔉||_{L²_ω}`.
pub fn stability_experiment<S: Real>(
    system: &KineticSystem<S>,
    ness: &SteadyStateResult<S>,
    amplitude: S,
    t_final: S,
    template: &IntegratorConfig<S>,
) -> Result<StabilityOutcome<S>> {
    let f0 = perturb(&ness.field, amplitude)?;
    let mut cfg = template.clone();
    cfg.energy_mode = EnergyMode::SelfConsistent;
    cfg.t_final = t_final;
    cfg.renormalize_initial = true;
    let trace = run_transient(&f0, system, &cfg, Some(&ness.field))?;
    let series = trace.distance_series();
    let min = series
        .iter()
        .fold(S::infinity(), |m, &(_, d)| m.min(d));
    let floor = min.max(S::lit(1e-12));
    let fit = decay_fit(&series, floor);
    Ok(StabilityOutcome { trace, fit, floor })
}
