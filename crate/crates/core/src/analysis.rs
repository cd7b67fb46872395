//! Post-processing: exponential decay fits, the homogeneous Fourier oracle
//! and the energy budget.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{EnergyMode, KineticSystem, Stepper};
use crate::model::BoundaryMode;
use crate::operators::{apply_maxwell_boundary, bgk_apply, fp_apply, wall_energy_rate};
use crate::phasespace::{BoundaryFlux, DistributionField, PhaseSpaceGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    NoDecaySignal,
    WindowTooShort,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Ok => "ok",
            FitStatus::NoDecaySignal => "no_decay_signal",
            FitStatus::WindowTooShort => "window_too_short",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFitResult<S> {
    /// Fitted `λ` in `d ≈ e^{intercept - λ t}`.
    pub rate: S,
    pub intercept: S,
    pub r_squared: S,
    pub window: (S, S),
    pub samples: usize,
    pub status: FitStatus,
}

const MIN_SAMPLES: usize = 10;

/// Least-squares fit of `log d` against `t` on the decaying tail.
///
/// The window holds the samples after the maximum with
/// `10 floor <= d <= max / 2`. It needs at least ten samples spanning one
/// e-fold; otherwise the status says why.
pub fn decay_fit<S: Real>(series: &[(S, S)], floor: S) -> DecayFitResult<S> {
    let nan = S::nan();
    let mut out = DecayFitResult {
        rate: nan,
        intercept: nan,
        r_squared: S::zero(),
        window: (nan, nan),
        samples: 0,
        status: FitStatus::NoDecaySignal,
    };
    let Some((imax, &(_, dmax))) = series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))
    else {
        return out;
    };
    let lo = S::lit(10.0) * floor;
    let hi = dmax * S::lit(0.5);
    let window: Vec<(S, S)> = series[imax..]
        .iter()
        .filter(|&&(_, d)| d >= lo && d <= hi && d > S::zero())
        .map(|&(t, d)| (t, d.ln()))
        .collect();
    out.samples = window.len();
    if window.len() < 2 {
        return out;
    }
    let n = S::from_usize_lossy(window.len());
    let tm = window.iter().map(|p| p.0).sum::<S>() / n;
    let ym = window.iter().map(|p| p.1).sum::<S>() / n;
    let (mut sxx, mut sxy, mut syy) = (S::zero(), S::zero(), S::zero());
    for &(t, y) in &window {
        sxx = sxx + (t - tm) * (t - tm);
        sxy = sxy + (t - tm) * (y - ym);
        syy = syy + (y - ym) * (y - ym);
    }
    if sxx == S::zero() {
        return out;
    }
    let slope = sxy / sxx;
    out.rate = -slope;
    out.intercept = ym - slope * tm;
    out.r_squared = if syy == S::zero() {
        S::one()
    } else {
        (sxy * sxy / (sxx * syy)).min(S::one()).max(S::zero())
    };
    out.window = (window[0].0, window[window.len() - 1].0);
    let (ymin, ymax) = window
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(a, b), p| (a.min(p.1), b.max(p.1)));
    out.status = if !(out.rate > S::zero()) || !out.rate.is_finite() {
        FitStatus::NoDecaySignal
    } else if window.len() < MIN_SAMPLES || ymax - ymin < S::one() {
        FitStatus::WindowTooShort
    } else {
        FitStatus::Ok
    };
    out
}

/// `(2Λ + ηT) / (η + 2)`: steady energy of the homogeneous linear problem.
pub fn homogeneous_energy(lambda: f64, eta: f64, temperature: f64) -> f64 {
    (2.0 * lambda + eta * temperature) / (eta + 2.0)
}

/// `(2(1-α)τ + ηT) / (η + 2 - 2α)`: homogeneous self-consistent fixed point.
pub fn homogeneous_fixed_point(alpha: f64, tau: f64, eta: f64, temperature: f64) -> f64 {
    (2.0 * (1.0 - alpha) * tau + eta * temperature) / (eta + 2.0 - 2.0 * alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousOracle {
    pub radii: Vec<f64>,
    pub profile: Vec<f64>,
    /// Extracted from the small-`r` behaviour of `f̂`.
    pub steady_energy: f64,
    pub closed_form: f64,
}

const QUAD_REL_TOL: f64 = 1e-13;
const QUAD_DEPTH: u32 = 50;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    fn level(
        f: &impl Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!(
                "adaptive Simpson depth exhausted on [{a:e}, {b:e}]"
            )));
        }
        Ok(
            level(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
                + level(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?,
        )
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = (QUAD_REL_TOL * whole.abs()).max(f64::MIN_POSITIVE);
    level(f, (a, fa), (m, fm), (b, fb), whole, tol, QUAD_DEPTH)
}

/// `1 - f̂(r)` with
/// `f̂(r) = ∫₀¹ exp(-r² [Λ(1 - u^{2/η}) + T u^{2/η}] / 2) du`
/// (the substitution `u = (s/r)^η` of the radial Fourier solution).
/// A further `u = w^m`, `m = ⌈η/2⌉`, keeps the integrand Lipschitz at 0.
fn one_minus_fhat(lambda: f64, eta: f64, temperature: f64, r: f64) -> Result<f64> {
    if eta == 0.0 {
        return Ok(-(-0.5 * lambda * r * r).exp_m1());
    }
    let m = (0.5 * eta).ceil().max(1.0);
    let power = 2.0 * m / eta;
    let q = |w: f64| {
        let p = if w == 0.0 { 0.0 } else { w.powf(power) };
        m * w.powf(m - 1.0) * -(-0.5 * r * r * (lambda * (1.0 - p) + temperature * p)).exp_m1()
    };
    if r == 0.0 {
        return Ok(0.0);
    }
    simpson(&q, 0.0, 1.0)
}

/// Fourier profile of the homogeneous steady state with one full-domain
/// thermostat, and the energy it implies.
pub fn homogeneous_oracle(
    lambda: f64,
    eta: f64,
    temperature: f64,
    probe: &[f64],
) -> Result<HomogeneousOracle> {
    if !(lambda > 0.0 && temperature > 0.0 && eta >= 0.0) {
        return Err(Error::NonPositiveTemperature(lambda.min(temperature)));
    }
    let profile = probe
        .iter()
        .map(|&r| one_minus_fhat(lambda, eta, temperature, r).map(|x| 1.0 - x))
        .collect::<Result<Vec<_>>>()?;
    // 2 (1 - f̂(r)) / r² = E + O(r²); Richardson on h, 2h
    let h = 1e-2;
    let g = |r: f64| one_minus_fhat(lambda, eta, temperature, r).map(|x| 2.0 * x / (r * r));
    let steady_energy = (4.0 * g(h)? - g(2.0 * h)?) / 3.0;
    Ok(HomogeneousOracle {
        radii: probe.to_vec(),
        profile,
        steady_energy,
        closed_form: homogeneous_energy(lambda, eta, temperature),
    })
}

/// Per-mechanism contributions to `dE/dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBudget<S> {
    pub fokker_planck: S,
    /// One entry per thermostat.
    pub bgk: Vec<S>,
    /// Net wall exchange of the discrete reflection.
    pub wall: S,
    pub sum: S,
    /// `(E(t+dt) - E(t)) / dt` along one step of the scheme.
    pub fd_derivative: S,
    pub dt: S,
    /// Informational boundary flux indicator (not part of `sum`).
    pub boundary_energy_flux: S,
}

impl<S: Real> EnergyBudget<S> {
    pub fn rows(&self) -> Vec<(String, S)> {
        let mut rows = vec![("fokker_planck".to_string(), self.fokker_planck)];
        for (n, b) in self.bgk.iter().enumerate() {
            rows.push((format!("bgk_{n}"), *b));
        }
        rows.push(("wall".into(), self.wall));
        rows.push(("sum".into(), self.sum));
        rows.push(("fd_derivative".into(), self.fd_derivative));
        rows.push(("boundary_energy_flux".into(), self.boundary_energy_flux));
        rows
    }

    /// `|sum - fd| / max(|fd|, |sum|)`.
    pub fn relative_mismatch(&self) -> S {
        let scale = self.fd_derivative.abs().max(self.sum.abs());
        if scale == S::zero() {
            S::zero()
        } else {
            (self.sum - self.fd_derivative).abs() / scale
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mechanism,value")?;
        for (name, v) in self.rows() {
            writeln!(w, "{name},{:.16e}", v.as_f64())?;
        }
        Ok(())
    }
}

fn energy_of_rate<S: Real>(grid: &PhaseSpaceGrid<S>, rate: &[S]) -> S {
    let nvel = grid.n_velocities();
    let mut acc = S::zero();
    for c in 0..grid.n_cells() {
        acc = acc
            + rate[c * nvel..(c + 1) * nvel]
                .iter()
                .zip(grid.speeds2())
                .map(|(&r, &v2)| r * v2)
                .sum::<S>();
    }
    acc * grid.cell_volume() * grid.velocity_volume() / S::from_usize_lossy(grid.dim())
}

/// Energy budget of `f`: each discrete mechanism's contribution to `dE/dt`,
/// their sum, and a one-step finite-difference derivative of the scheme.
pub fn moment_balance_check<S: Real>(
    f: &DistributionField<S>,
    system: &KineticSystem<S>,
    mode: &EnergyMode<S>,
    dt: S,
) -> Result<EnergyBudget<S>> {
    let grid = system.grid();
    let mut stepper = Stepper::new(system, mode);
    let lambda = stepper.lambda_for(f)?;
    let fokker_planck = energy_of_rate(grid, fp_apply(f, &lambda).values());

    let ths = system.thermostats();
    let bgk = (0..ths.len())
        .map(|n| {
            let spec = &system.params().thermostats[n..=n];
            let single = crate::operators::ThermostatSet::new(grid, spec)?;
            Ok(energy_of_rate(grid, bgk_apply(f, &single).values()))
        })
        .collect::<Result<Vec<S>>>()?;

    let outgoing = BoundaryFlux::outgoing_trace(f);
    let (wall, bflux) = match system.params().boundary.mode {
        BoundaryMode::Periodic => (S::zero(), S::zero()),
        BoundaryMode::Maxwell => {
            let incoming = apply_maxwell_boundary(grid, &outgoing, system.wall())?;
            (
                wall_energy_rate(grid, &outgoing, &incoming),
                crate::operators::boundary_energy_flux(grid, &outgoing, system.wall()),
            )
        }
    };
    let sum = fokker_planck + bgk.iter().copied().sum::<S>() + wall;
    let next = stepper.step(f, dt)?;
    let fd_derivative = (next.energy_functional() - f.energy_functional()) / dt;
    Ok(EnergyBudget {
        fokker_planck,
        bgk,
        wall,
        sum,
        fd_derivative,
        dt,
        boundary_energy_flux: bflux,
    })
}
