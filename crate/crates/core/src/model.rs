//! Physical configuration and closed-form kernels.
//!
//! The spatial domain is always the unit box `(0,1)^d`. Profiles such as the
//! background temperature `tau`, the accommodation coefficient and the wall
//! temperature are given either as a small set of named analytic shapes
//! (evaluated along the first spatial axis) or as explicit tables.

use crate::error::{Error, Result, ValidationErrors};
use crate::scalar::Real;

/// A strictly positive temperature (velocity² units).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature<S>(S);

impl<S: Real> Temperature<S> {
    pub fn new(value: S) -> Result<Self> {
        if value > S::zero() && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::NonPositiveTemperature(value.as_f64()))
        }
    }

    #[inline]
    pub fn get(self) -> S {
        self.0
    }
}

/// Scalar profile over the domain (cells) or over the boundary (faces).
#[derive(Debug, Clone, PartialEq)]
pub enum Profile<S> {
    Constant(S),
    /// `start + (end - start) * x0` along the first axis.
    LinearRamp { start: S, end: S },
    /// `low` for `x0 < split`, `high` otherwise.
    TwoPlateau { low: S, high: S, split: S },
    /// One value per cell (or per boundary face), in grid order.
    Table(Vec<S>),
}

impl<S: Real> Profile<S> {
    /// Value at the entity with flat `index` whose first coordinate is `x0`.
    pub fn eval(&self, index: usize, x0: S) -> S {
        match self {
            Profile::Constant(c) => *c,
            Profile::LinearRamp { start, end } => *start + (*end - *start) * x0,
            Profile::TwoPlateau { low, high, split } => {
                if x0 < *split {
                    *low
                } else {
                    *high
                }
            }
            Profile::Table(values) => values[index],
        }
    }

    /// Lower and upper bound of the profile over the closed unit interval.
    pub fn bounds(&self) -> (S, S) {
        match self {
            Profile::Constant(c) => (*c, *c),
            Profile::LinearRamp { start, end } => (start.min(*end), start.max(*end)),
            Profile::TwoPlateau { low, high, .. } => (low.min(*high), low.max(*high)),
            Profile::Table(values) => values.iter().fold(
                (S::infinity(), S::neg_infinity()),
                |(lo, hi), &v| (lo.min(v), hi.max(v)),
            ),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Profile::Constant(c) => c.is_finite(),
            Profile::LinearRamp { start, end } => start.is_finite() && end.is_finite(),
            Profile::TwoPlateau { low, high, split } => {
                low.is_finite() && high.is_finite() && split.is_finite()
            }
            Profile::Table(values) => values.iter().all(|v| v.is_finite()),
        }
    }

    pub fn table_len(&self) -> Option<usize> {
        match self {
            Profile::Table(values) => Some(values.len()),
            _ => None,
        }
    }
}

/// Axis-aligned sub-box of the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<S> {
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

impl<S: Real> Region<S> {
    pub fn whole(d: usize) -> Self {
        Self {
            lower: vec![S::zero(); d],
            upper: vec![S::one(); d],
        }
    }

    pub fn contains(&self, x: &[S]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermostatSpec<S> {
    /// Coupling strength (1/time).
    pub eta: S,
    pub temperature: S,
    pub region: Region<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Maxwell,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec<S> {
    pub mode: BoundaryMode,
    /// Accommodation coefficient per face, in `[0, 1]`.
    pub accommodation: Profile<S>,
    /// Wall temperature per face. Only read where the accommodation is positive.
    pub wall_temperature: Profile<S>,
}

impl<S: Real> BoundarySpec<S> {
    pub fn periodic() -> Self {
        Self {
            mode: BoundaryMode::Periodic,
            accommodation: Profile::Constant(S::zero()),
            wall_temperature: Profile::Constant(S::one()),
        }
    }

    pub fn maxwell(accommodation: S, wall_temperature: S) -> Self {
        Self {
            mode: BoundaryMode::Maxwell,
            accommodation: Profile::Constant(accommodation),
            wall_temperature: Profile::Constant(wall_temperature),
        }
    }
}

/// Weight `<v>^k exp(zeta <v>^s)` with `<v> = sqrt(1 + |v|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec<S> {
    pub k: S,
    pub zeta: S,
    pub s: S,
}

impl<S: Real> WeightSpec<S> {
    /// `k = 0, zeta = 0`: the unweighted norm.
    pub fn trivial() -> Self {
        Self {
            k: S::zero(),
            zeta: S::zero(),
            s: S::zero(),
        }
    }

    /// Monitoring weight used when none is configured: `k = d + 2, zeta = 0.01, s = 1`.
    pub fn monitoring_default(d: usize) -> Self {
        Self {
            k: S::from_usize_lossy(d + 2),
            zeta: S::lit(0.01),
            s: S::one(),
        }
    }

    pub fn is_admissible(&self, d: usize) -> bool {
        let mut errs = ValidationErrors::default();
        check_weight(self, d, "weight", &mut errs);
        errs.is_empty()
    }

    #[inline]
    pub fn eval(&self, v: &[S]) -> S {
        let v2: S = v.iter().map(|&x| x * x).sum();
        self.eval_speed2(v2)
    }

    #[inline]
    pub fn eval_speed2(&self, v2: S) -> S {
        let bracket = (S::one() + v2).sqrt();
        let mut w = bracket.powf(self.k);
        if self.zeta != S::zero() {
            w = w * (self.zeta * bracket.powf(self.s)).exp();
        }
        w
    }
}

/// Evaluates an admissible weight at velocity `v`.
pub fn weight_eval<S: Real>(w: &WeightSpec<S>, v: &[S]) -> S {
    w.eval(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub dimension: usize,
    pub alpha: S,
    pub tau: Profile<S>,
    pub thermostats: Vec<ThermostatSpec<S>>,
    pub boundary: BoundarySpec<S>,
    pub weight: WeightSpec<S>,
}

impl<S: Real> ModelParams<S> {
    /// Hottest temperature the configuration can impose (used for the velocity cutoff).
    pub fn max_temperature(&self) -> S {
        let mut t = self.tau.bounds().1;
        for th in &self.thermostats {
            t = t.max(th.temperature);
        }
        if self.boundary.mode == BoundaryMode::Maxwell {
            let (_, iota_hi) = self.boundary.accommodation.bounds();
            if iota_hi > S::zero() {
                let theta_hi = match &self.boundary.wall_temperature {
                    Profile::Table(values) => {
                        let iotas = match &self.boundary.accommodation {
                            Profile::Table(i) => i.clone(),
                            other => vec![other.bounds().1; values.len()],
                        };
                        values
                            .iter()
                            .zip(iotas)
                            .filter(|(_, i)| *i > S::zero())
                            .fold(S::zero(), |acc, (&v, _)| acc.max(v))
                    }
                    other => other.bounds().1,
                };
                t = t.max(theta_hi);
            }
        }
        t
    }
}

fn check_weight<S: Real>(w: &WeightSpec<S>, d: usize, path: &str, errs: &mut ValidationErrors) {
    if !(w.k >= S::zero() && w.k.is_finite()) {
        errs.push(format!("{path}.k"), "k must be finite and >= 0");
    }
    if !(w.zeta >= S::zero() && w.zeta.is_finite()) {
        errs.push(format!("{path}.zeta"), "zeta must be finite and >= 0");
    }
    if !(w.s >= S::zero() && w.s <= S::one()) {
        errs.push(format!("{path}.s"), "s outside [0, 1]");
    } else if w.s == S::zero() {
        if !(w.k > S::from_usize_lossy(d + 1)) {
            errs.push(format!("{path}.k"), "k must exceed d+1 when s=0");
        }
    } else if !(w.zeta > S::zero()) {
        errs.push(format!("{path}.zeta"), "zeta must be positive when s > 0");
    }
}

/// Checks every parameter constraint, collecting all violations.
pub fn validate_params<S: Real>(p: &ModelParams<S>) -> std::result::Result<(), ValidationErrors> {
    let mut errs = ValidationErrors::default();
    let d = p.dimension;
    if d != 1 && d != 2 {
        errs.push("model.dimension", format!("dimension must be 1 or 2, got {d}"));
    }
    if !(p.alpha >= S::zero() && p.alpha < S::lit(0.5)) {
        errs.push("model.alpha", format!("alpha outside [0, 1/2): {}", p.alpha));
    }
    let (tau0, _) = p.tau.bounds();
    if !p.tau.all_finite() {
        errs.push("model.tau", "tau must be finite");
    } else if !(tau0 > S::zero()) {
        errs.push("model.tau", format!("tau must be strictly positive (tau0 = {tau0})"));
    }
    for (n, th) in p.thermostats.iter().enumerate() {
        let path = format!("model.thermostats[{n}]");
        if !(th.eta >= S::zero() && th.eta.is_finite()) {
            errs.push(format!("{path}.eta"), "eta must be finite and >= 0");
        }
        if !(th.temperature > S::zero() && th.temperature.is_finite()) {
            errs.push(format!("{path}.temperature"), "temperature must be > 0");
        }
        let r = &th.region;
        if r.lower.len() != d || r.upper.len() != d {
            errs.push(format!("{path}.region"), format!("region must have {d} bounds per side"));
        } else if r
            .lower
            .iter()
            .zip(&r.upper)
            .any(|(&lo, &hi)| !(lo >= S::zero() && hi <= S::one() && lo < hi))
        {
            errs.push(
                format!("{path}.region"),
                "region must be a non-empty sub-box of the unit box",
            );
        }
    }
    if p.boundary.mode == BoundaryMode::Maxwell {
        check_boundary(&p.boundary, &mut errs);
    }
    check_weight(&p.weight, d, "model.weight", &mut errs);
    errs.into_result()
}

fn check_boundary<S: Real>(b: &BoundarySpec<S>, errs: &mut ValidationErrors) {
    let (iota_lo, iota_hi) = b.accommodation.bounds();
    if !b.accommodation.all_finite() || iota_lo < S::zero() || iota_hi > S::one() {
        errs.push("model.boundary.accommodation", "accommodation outside [0, 1]");
        return;
    }
    match (&b.accommodation, &b.wall_temperature) {
        (Profile::Table(iotas), Profile::Table(thetas)) => {
            if iotas.len() != thetas.len() {
                errs.push(
                    "model.boundary.wall_temperature",
                    "wall temperature table length differs from accommodation table",
                );
                return;
            }
            for (face, (&i, &t)) in iotas.iter().zip(thetas).enumerate() {
                if i > S::zero() && !(t > S::zero() && t.is_finite()) {
                    errs.push(
                        format!("model.boundary.wall_temperature[{face}]"),
                        "wall temperature must be positive where accommodation > 0",
                    );
                }
            }
        }
        (_, theta) => {
            let (t_lo, _) = theta.bounds();
            if iota_hi > S::zero() && !(theta.all_finite() && t_lo > S::zero()) {
                errs.push(
                    "model.boundary.wall_temperature",
                    "wall temperature must be positive where accommodation > 0",
                );
            }
        }
    }
}

/// Gaussian `(2 pi T)^{-d/2} exp(-|v|^2 / 2T)`, `d = v.len()`.
#[inline]
pub fn maxwellian<S: Real>(t: Temperature<S>, v: &[S]) -> S {
    let v2: S = v.iter().map(|&x| x * x).sum();
    maxwellian_speed2(t, v2, v.len())
}

#[inline]
pub fn maxwellian_speed2<S: Real>(t: Temperature<S>, v2: S, d: usize) -> S {
    let t = t.get();
    let norm = (S::TAU() * t).powf(S::from_usize_lossy(d) * S::lit(-0.5));
    norm * (-v2 / (t + t)).exp()
}

/// Flux-normalized wall Maxwellian `sqrt(2 pi / Theta) M_Theta`.
#[inline]
pub fn wall_maxwellian<S: Real>(theta: Temperature<S>, v: &[S]) -> S {
    (S::TAU() / theta.get()).sqrt() * maxwellian(theta, v)
}

/// Velocity diffusivity `Lambda(x)` per cell, with its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusivityProfile<S> {
    pub values: Vec<S>,
    pub lower: S,
    pub upper: S,
}

impl<S: Real> DiffusivityProfile<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        let (lower, upper) = values.iter().fold(
            (S::infinity(), S::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        );
        if values.is_empty() || !(lower > S::zero()) || !upper.is_finite() {
            let mut errs = ValidationErrors::default();
            errs.push("lambda", "diffusivity must be finite and strictly positive");
            return Err(errs.into());
        }
        Ok(Self {
            values,
            lower,
            upper,
        })
    }

    pub fn constant(cells: usize, value: S) -> Result<Self> {
        Self::new(vec![value; cells])
    }

    /// `alpha * nu + (1 - alpha) * tau(x)`.
    pub fn blend(alpha: S, nu: S, tau: &[S]) -> Result<Self> {
        Self::new(
            tau.iter()
                .map(|&t| alpha * nu + (S::one() - alpha) * t)
                .collect(),
        )
    }

    pub fn is_constant(&self) -> bool {
        self.lower == self.upper
    }
}
