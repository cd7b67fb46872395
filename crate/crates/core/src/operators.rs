//! Discrete collision, thermostat and transport operators.
//!
//! * Fokker-Planck `C_Λ f = Λ Δ_v f + div_v(v f)`: Chang-Cooper flux form,
//!   zero flux through `±v_max`, implicit solves per cell.
//! * BGK thermostats `Σ η_n 1_{Ω_n} (ρ_f M_{T_n} - f)` with discretely
//!   renormalized Maxwellians.
//! * Free transport `-v·∇_x f`: first-order upwind finite volumes, closed by
//!   periodic wrapping or by the Maxwell wall reflection.

use crate::error::{Error, Result};
use crate::integrator::cfl_max_dt;
use crate::model::{
    wall_maxwellian, BoundaryMode, BoundarySpec, DiffusivityProfile, Temperature, ThermostatSpec,
};
use crate::phasespace::{BoundaryFlux, DistributionField, FluxKind, PhaseSpaceGrid};
use crate::scalar::Real;

const SMALL_W: f64 = 1e-4;

/// Bernoulli function `B(w) = w / (e^w - 1)`, `B(0) = 1`.
#[inline]
pub fn bernoulli<S: Real>(w: S) -> S {
    if w.abs() < S::lit(SMALL_W) {
        S::one() - w / S::lit(2.0) + w * w / S::lit(12.0)
    } else {
        w / w.exp_m1()
    }
}

/// Chang-Cooper interpolation weight `δ(w) = 1/w - 1/(e^w - 1)`, in `[0, 1]`.
#[inline]
pub fn chang_cooper_delta<S: Real>(w: S) -> S {
    if w.abs() < S::lit(SMALL_W) {
        S::lit(0.5) - w / S::lit(12.0)
    } else {
        S::one() / w - S::one() / w.exp_m1()
    }
}

/// Face coefficients of one velocity line: `F_k = plus[k] f_{k+1} - minus[k] f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCoefficients<S> {
    pub delta: Vec<S>,
    pub plus: Vec<S>,
    pub minus: Vec<S>,
}

impl<S: Real> LineCoefficients<S> {
    pub fn new(nodes: &[S], dv: S, lambda: S) -> Self {
        let nf = nodes.len() - 1;
        let mut delta = Vec::with_capacity(nf);
        let mut plus = Vec::with_capacity(nf);
        let mut minus = Vec::with_capacity(nf);
        let base = lambda / dv;
        for k in 0..nf {
            let v_face = (nodes[k] + nodes[k + 1]) * S::lit(0.5);
            let w = v_face * dv / lambda;
            delta.push(chang_cooper_delta(w));
            plus.push(base * bernoulli(-w));
            minus.push(base * bernoulli(w));
        }
        Self { delta, plus, minus }
    }

    /// Adds `(F_{k+1/2} - F_{k-1/2}) / dv` along a strided line of `src` into `dst`.
    fn apply_line(&self, src: &[S], dst: &mut [S], start: usize, stride: usize, dv: S) {
        let n = self.plus.len() + 1;
        let at = |k: usize| start + k * stride;
        let mut left = S::zero();
        for k in 0..n {
            let right = if k + 1 < n {
                self.plus[k] * src[at(k + 1)] - self.minus[k] * src[at(k)]
            } else {
                S::zero()
            };
            dst[at(k)] = dst[at(k)] + (right - left) / dv;
            left = right;
        }
    }
}

/// Tridiagonal `(I - dt C)` of one velocity line, LU-factored (Thomas).
#[derive(Debug, Clone)]
struct LineFactor<S> {
    lower: Vec<S>,
    cprime: Vec<S>,
    inv_pivot: Vec<S>,
}

impl<S: Real> LineFactor<S> {
    fn new(coef: &LineCoefficients<S>, dt: S, dv: S) -> Self {
        let n = coef.plus.len() + 1;
        let r = dt / dv;
        let mut lower = vec![S::zero(); n];
        let mut upper = vec![S::zero(); n];
        let mut diag = vec![S::one(); n];
        for k in 0..n {
            if k + 1 < n {
                diag[k] = diag[k] + r * coef.minus[k];
                upper[k] = -r * coef.plus[k];
            }
            if k > 0 {
                diag[k] = diag[k] + r * coef.plus[k - 1];
                lower[k] = -r * coef.minus[k - 1];
            }
        }
        let mut cprime = vec![S::zero(); n];
        let mut inv_pivot = vec![S::zero(); n];
        for k in 0..n {
            let pivot = if k == 0 {
                diag[0]
            } else {
                diag[k] - lower[k] * cprime[k - 1]
            };
            inv_pivot[k] = S::one() / pivot;
            cprime[k] = upper[k] * inv_pivot[k];
        }
        Self {
            lower,
            cprime,
            inv_pivot,
        }
    }

    /// Solves in place along a strided line. Preserves nonnegativity exactly.
    fn solve(&self, x: &mut [S], start: usize, stride: usize) {
        let n = self.cprime.len();
        let at = |k: usize| start + k * stride;
        let mut prev = S::zero();
        for k in 0..n {
            let d = if k == 0 {
                x[at(0)]
            } else {
                x[at(k)] - self.lower[k] * prev
            };
            prev = d * self.inv_pivot[k];
            x[at(k)] = prev;
        }
        for k in (0..n - 1).rev() {
            x[at(k)] = x[at(k)] - self.cprime[k] * x[at(k + 1)];
        }
    }
}

/// `(start, stride)` of every velocity line along velocity `axis`.
fn velocity_lines<S: Real>(grid: &PhaseSpaceGrid<S>, axis: usize) -> Vec<(usize, usize)> {
    let nv = grid.nv();
    if grid.dim() == 1 {
        vec![(0, 1)]
    } else if axis == 0 {
        (0..nv).map(|j1| (j1, nv)).collect()
    } else {
        (0..nv).map(|j0| (j0 * nv, 1)).collect()
    }
}

/// Discrete `C_Λ f`. The per-cell velocity sum of the output telescopes to zero.
pub fn fp_apply<S: Real>(
    f: &DistributionField<S>,
    lambda: &DiffusivityProfile<S>,
) -> DistributionField<S> {
    let grid = f.grid();
    let nvel = grid.n_velocities();
    let mut out = vec![S::zero(); f.values().len()];
    let mut cached: Option<(S, LineCoefficients<S>)> = None;
    let lines: Vec<_> = (0..grid.dim()).map(|a| velocity_lines(grid, a)).collect();
    for c in 0..grid.n_cells() {
        let lam = lambda.values[c];
        if cached.as_ref().map(|(l, _)| *l != lam).unwrap_or(true) {
            cached = Some((lam, LineCoefficients::new(grid.nodes_1d(), grid.dv(), lam)));
        }
        let coef = &cached.as_ref().unwrap().1;
        let src = f.cell(c);
        let dst = &mut out[c * nvel..(c + 1) * nvel];
        for axis_lines in &lines {
            for &(start, stride) in axis_lines {
                coef.apply_line(src, dst, start, stride, grid.dv());
            }
        }
    }
    DistributionField::from_raw(grid.clone(), out, f.t, true)
}

/// Discrete Chang-Cooper equilibrium for diffusivity `lambda`, normalized to
/// unit discrete mass. Built from the zero-flux ratios `f_{k+1}/f_k = minus/plus`.
pub fn chang_cooper_equilibrium<S: Real>(grid: &PhaseSpaceGrid<S>, lambda: S) -> Vec<S> {
    let coef = LineCoefficients::new(grid.nodes_1d(), grid.dv(), lambda);
    let nv = grid.nv();
    // log-ratios accumulated from the center outwards to avoid underflow drift
    let mut line = vec![S::zero(); nv];
    let mid = nv / 2;
    for k in mid..nv - 1 {
        line[k + 1] = line[k] + (coef.minus[k] / coef.plus[k]).ln();
    }
    for k in (0..mid).rev() {
        line[k] = line[k + 1] - (coef.minus[k] / coef.plus[k]).ln();
    }
    let line: Vec<S> = line.into_iter().map(|x| x.exp()).collect();
    let mut eq: Vec<S> = (0..grid.n_velocities())
        .map(|j| {
            if grid.dim() == 1 {
                line[j]
            } else {
                line[j / nv] * line[j % nv]
            }
        })
        .collect();
    let mass: S = eq.iter().copied().sum::<S>() * grid.velocity_volume();
    for x in &mut eq {
        *x = *x / mass;
    }
    eq
}

/// Factorizations of `(I - dt C_Λ)` for every cell.
///
/// Must be rebuilt whenever `Λ` or `dt` changes.
#[derive(Debug, Clone)]
pub struct CollisionWorkspace<S> {
    dt: S,
    lambda: Vec<S>,
    coefficients: Vec<LineCoefficients<S>>,
    factors: Vec<LineFactor<S>>,
    cell_factor: Vec<usize>,
}

impl<S: Real> CollisionWorkspace<S> {
    pub fn new(grid: &PhaseSpaceGrid<S>, lambda: &DiffusivityProfile<S>, dt: S) -> Self {
        let mut coefficients = Vec::new();
        let mut factors = Vec::new();
        let mut cell_factor = Vec::with_capacity(lambda.values.len());
        let mut seen: Vec<S> = Vec::new();
        for &lam in &lambda.values {
            let idx = match seen.iter().position(|&l| l == lam) {
                Some(i) => i,
                None => {
                    let coef = LineCoefficients::new(grid.nodes_1d(), grid.dv(), lam);
                    factors.push(LineFactor::new(&coef, dt, grid.dv()));
                    coefficients.push(coef);
                    seen.push(lam);
                    seen.len() - 1
                }
            };
            cell_factor.push(idx);
        }
        Self {
            dt,
            lambda: lambda.values.clone(),
            coefficients,
            factors,
            cell_factor,
        }
    }

    pub fn matches(&self, lambda: &DiffusivityProfile<S>, dt: S) -> bool {
        self.dt == dt && self.lambda == lambda.values
    }

    /// Chang-Cooper weights of the cell's velocity faces.
    pub fn delta(&self, cell: usize) -> &[S] {
        &self.coefficients[self.cell_factor[cell]].delta
    }

    /// Replaces `f` by the solution of `(I - dt C_Λ) f* = f`, cell by cell.
    /// In two dimensions the two velocity axes are swept one after the other.
    pub fn solve(&self, f: &mut DistributionField<S>) {
        let grid = f.grid().clone();
        let nvel = grid.n_velocities();
        let lines: Vec<_> = (0..grid.dim()).map(|a| velocity_lines(&grid, a)).collect();
        let values = f.values_mut();
        for c in 0..grid.n_cells() {
            let factor = &self.factors[self.cell_factor[c]];
            let cell = &mut values[c * nvel..(c + 1) * nvel];
            for axis_lines in &lines {
                for &(start, stride) in axis_lines {
                    factor.solve(cell, start, stride);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct ResolvedThermostat<S> {
    eta: S,
    inside: Vec<bool>,
    maxwellian: Vec<S>,
}

/// Thermostats resolved on a grid: region masks and renormalized Maxwellians.
#[derive(Debug, Clone)]
pub struct ThermostatSet<S> {
    members: Vec<ResolvedThermostat<S>>,
    /// Per cell: total rate and the rate-weighted target shape (index into `shapes`).
    cell_relaxation: Vec<Option<(S, usize)>>,
    shapes: Vec<Vec<S>>,
}

impl<S: Real> ThermostatSet<S> {
    pub fn new(grid: &PhaseSpaceGrid<S>, specs: &[ThermostatSpec<S>]) -> Result<Self> {
        let members = specs
            .iter()
            .map(|th| {
                let t = Temperature::new(th.temperature)?;
                Ok(ResolvedThermostat {
                    eta: th.eta,
                    inside: (0..grid.n_cells())
                        .map(|c| th.region.contains(grid.cell_center(c)))
                        .collect(),
                    maxwellian: grid.discrete_maxwellian(t),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut patterns: Vec<Vec<bool>> = Vec::new();
        let mut shapes = Vec::new();
        let mut cell_relaxation = Vec::with_capacity(grid.n_cells());
        for c in 0..grid.n_cells() {
            let pattern: Vec<bool> = members
                .iter()
                .map(|m| m.inside[c] && m.eta > S::zero())
                .collect();
            let eta_bar: S = members
                .iter()
                .zip(&pattern)
                .filter(|(_, &p)| p)
                .map(|(m, _)| m.eta)
                .sum();
            if eta_bar == S::zero() {
                cell_relaxation.push(None);
                continue;
            }
            let idx = match patterns.iter().position(|p| *p == pattern) {
                Some(i) => i,
                None => {
                    let mut shape = vec![S::zero(); grid.n_velocities()];
                    for (m, _) in members.iter().zip(&pattern).filter(|(_, &p)| p) {
                        for (s, &mv) in shape.iter_mut().zip(&m.maxwellian) {
                            *s = *s + m.eta / eta_bar * mv;
                        }
                    }
                    patterns.push(pattern);
                    shapes.push(shape);
                    shapes.len() - 1
                }
            };
            cell_relaxation.push(Some((eta_bar, idx)));
        }
        Ok(Self {
            members,
            cell_relaxation,
            shapes,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Renormalized Maxwellian of thermostat `n`.
    pub fn maxwellian(&self, n: usize) -> &[S] {
        &self.members[n].maxwellian
    }

    pub fn contains(&self, n: usize, cell: usize) -> bool {
        self.members[n].inside[cell]
    }

    pub fn eta(&self, n: usize) -> S {
        self.members[n].eta
    }

    /// Exact solution of `∂_t f = 𝒢 f` over `dt`. Densities are invariant, so
    /// `f(dt) = e^{-η̄ dt} f + (1 - e^{-η̄ dt}) ρ M̄` per cell.
    pub fn relax(&self, f: &mut DistributionField<S>, dt: S) {
        let grid = f.grid().clone();
        let nvel = grid.n_velocities();
        let dvv = grid.velocity_volume();
        let values = f.values_mut();
        for (c, relax) in self.cell_relaxation.iter().enumerate() {
            let Some((eta_bar, shape)) = relax else {
                continue;
            };
            let cell = &mut values[c * nvel..(c + 1) * nvel];
            let rho: S = cell.iter().copied().sum::<S>() * dvv;
            let keep = (-*eta_bar * dt).exp();
            let gain = -(-*eta_bar * dt).exp_m1();
            for (x, &m) in cell.iter_mut().zip(&self.shapes[*shape]) {
                *x = keep * *x + gain * rho * m;
            }
        }
    }
}

/// Discrete `𝒢 f = Σ_n η_n 1_{Ω_n} (ρ_f M̃_{T_n} - f)`.
pub fn bgk_apply<S: Real>(
    f: &DistributionField<S>,
    thermostats: &ThermostatSet<S>,
) -> DistributionField<S> {
    let grid = f.grid();
    let nvel = grid.n_velocities();
    let dvv = grid.velocity_volume();
    let mut out = vec![S::zero(); f.values().len()];
    for c in 0..grid.n_cells() {
        let cell = f.cell(c);
        let rho: S = cell.iter().copied().sum::<S>() * dvv;
        let dst = &mut out[c * nvel..(c + 1) * nvel];
        for m in thermostats.members.iter().filter(|m| m.inside[c]) {
            for ((o, &x), &mv) in dst.iter_mut().zip(cell).zip(&m.maxwellian) {
                *o = *o + m.eta * (rho * mv - x);
            }
        }
    }
    DistributionField::from_raw(grid.clone(), out, f.t, true)
}

#[derive(Debug, Clone)]
struct WallFace<S> {
    iota: S,
    theta: Option<S>,
    /// Renormalized re-emission kernel on incoming nodes, `Σ = 1`.
    kernel: Vec<S>,
    /// Discrete incoming flux of the analytic kernel before renormalization.
    raw_flux: S,
}

/// Boundary data resolved on a grid's faces.
#[derive(Debug, Clone)]
pub struct WallModel<S> {
    mode: BoundaryMode,
    faces: Vec<WallFace<S>>,
}

impl<S: Real> WallModel<S> {
    pub fn new(grid: &PhaseSpaceGrid<S>, spec: &BoundarySpec<S>) -> Result<Self> {
        if spec.mode == BoundaryMode::Periodic {
            return Ok(Self {
                mode: BoundaryMode::Periodic,
                faces: Vec::new(),
            });
        }
        let n_faces = grid.faces().len();
        for (name, p) in [
            ("accommodation", &spec.accommodation),
            ("wall_temperature", &spec.wall_temperature),
        ] {
            if let Some(len) = p.table_len() {
                if len != n_faces {
                    return Err(Error::Shape(format!(
                        "{name} table has {len} entries, grid has {n_faces} boundary faces"
                    )));
                }
            }
        }
        let dvv = grid.velocity_volume();
        let nvel = grid.n_velocities();
        let faces = grid
            .faces()
            .iter()
            .enumerate()
            .map(|(idx, face)| {
                let iota = spec.accommodation.eval(idx, face.center[0]);
                if iota <= S::zero() {
                    return Ok(WallFace {
                        iota: S::zero(),
                        theta: None,
                        kernel: vec![S::zero(); nvel],
                        raw_flux: S::zero(),
                    });
                }
                let theta_val = spec.wall_temperature.eval(idx, face.center[0]);
                let theta = Temperature::new(theta_val).map_err(|_| {
                    Error::UndefinedWallTemperature {
                        face: idx,
                        iota: iota.as_f64(),
                    }
                })?;
                let mut kernel = vec![S::zero(); nvel];
                for (j, k) in kernel.iter_mut().enumerate() {
                    let vn = grid.normal_velocity(face, j);
                    if vn < S::zero() {
                        *k = wall_maxwellian(theta, grid.velocity(j)) * (-vn) * dvv;
                    }
                }
                let raw_flux: S = kernel.iter().copied().sum();
                for k in &mut kernel {
                    *k = *k / raw_flux;
                }
                Ok(WallFace {
                    iota,
                    theta: Some(theta.get()),
                    kernel,
                    raw_flux,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: BoundaryMode::Maxwell,
            faces,
        })
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn accommodation(&self, face: usize) -> S {
        self.faces[face].iota
    }

    pub fn wall_temperature(&self, face: usize) -> Option<S> {
        self.faces[face].theta
    }

    /// Re-emission kernel of a face (zeros where the face is purely specular).
    pub fn kernel(&self, face: usize) -> &[S] {
        &self.faces[face].kernel
    }

    /// Un-renormalized discrete flux `Σ_{n·v<0} 𝓜_Θ(v) |n·v| dv^d` of a face.
    pub fn raw_kernel_flux(&self, face: usize) -> S {
        self.faces[face].raw_flux
    }

    /// Largest `|raw flux - 1|` over diffusive faces: the renormalization applied.
    pub fn kernel_deviation(&self) -> S {
        self.faces
            .iter()
            .filter(|f| f.iota > S::zero())
            .fold(S::zero(), |m, f| m.max((f.raw_flux - S::one()).abs()))
    }

    fn reflect_face(
        &self,
        grid: &PhaseSpaceGrid<S>,
        face_idx: usize,
        out: &[S],
        inc: &mut [S],
    ) {
        let face = &grid.faces()[face_idx];
        let wall = &self.faces[face_idx];
        let specular = S::one() - wall.iota;
        let mut phi = S::zero();
        for (j, &o) in out.iter().enumerate() {
            if o != S::zero() {
                inc[grid.mirror(j, face.axis)] = specular * o;
                phi = phi + o;
            }
        }
        if wall.iota > S::zero() {
            let emitted = wall.iota * phi;
            for (x, &k) in inc.iter_mut().zip(&wall.kernel) {
                *x = *x + emitted * k;
            }
        }
    }
}

/// Maxwell reflection `γ₋f = (1-ι) 𝒮γ₊f + ι 𝒟γ₊f` on flux data.
///
/// The discrete incoming mass flux equals the outgoing one at every face.
pub fn apply_maxwell_boundary<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    outgoing: &BoundaryFlux<S>,
    wall: &WallModel<S>,
) -> Result<BoundaryFlux<S>> {
    if wall.mode != BoundaryMode::Maxwell {
        return Err(Error::Shape("periodic boundary has no wall reflection".into()));
    }
    if outgoing.kind != FluxKind::Outgoing || !outgoing.respects_support(grid) {
        return Err(Error::Shape(
            "reflection needs outgoing flux data supported on n·v > 0".into(),
        ));
    }
    let mut incoming = BoundaryFlux::zeros(grid, FluxKind::Incoming);
    for (idx, (out, inc)) in outgoing.faces.iter().zip(&mut incoming.faces).enumerate() {
        wall.reflect_face(grid, idx, out, inc);
    }
    Ok(incoming)
}

#[inline]
fn face_index<S: Real>(grid: &PhaseSpaceGrid<S>, axis: usize, upper: bool, transverse: usize) -> usize {
    let per_side = if grid.dim() == 1 { 1 } else { grid.nx() };
    (2 * axis + usize::from(upper)) * per_side + transverse
}

/// `(transverse index, first cell, stride)` of every spatial line along `axis`.
fn spatial_lines<S: Real>(grid: &PhaseSpaceGrid<S>, axis: usize) -> Vec<(usize, usize, usize)> {
    let nx = grid.nx();
    if grid.dim() == 1 {
        vec![(0, 0, 1)]
    } else if axis == 0 {
        (0..nx).map(|b| (b, b, nx)).collect()
    } else {
        (0..nx).map(|a| (a, a * nx, 1)).collect()
    }
}

/// Incoming trace fluxes for the faces normal to `axis`, from the current values.
fn incoming_for_axis<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    values: &[S],
    wall: &WallModel<S>,
    axis: usize,
) -> Vec<(usize, Vec<S>)> {
    let nvel = grid.n_velocities();
    let dvv = grid.velocity_volume();
    grid.faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.axis == axis)
        .map(|(idx, face)| {
            let cell = &values[face.cell * nvel..(face.cell + 1) * nvel];
            let out: Vec<S> = (0..nvel)
                .map(|j| {
                    let vn = grid.normal_velocity(face, j);
                    if vn > S::zero() {
                        cell[j] * vn * dvv
                    } else {
                        S::zero()
                    }
                })
                .collect();
            let mut inc = vec![S::zero(); nvel];
            wall.reflect_face(grid, idx, &out, &mut inc);
            (idx, inc)
        })
        .collect()
}

/// One upwind transport step of length `dt`.
///
/// In two dimensions the axes are swept in sequence, each sweep satisfying
/// the one-dimensional CFL bound. Mass changes only through the boundary,
/// where the reflected flux balances the outgoing flux exactly.
pub fn transport_step<S: Real>(
    f: &DistributionField<S>,
    dt: S,
    wall: &WallModel<S>,
) -> Result<DistributionField<S>> {
    let grid = f.grid().clone();
    let max = cfl_max_dt(&grid);
    if !(dt >= S::zero()) || dt > max * (S::one() + S::lit(1e-12)) {
        return Err(Error::Cfl {
            dt: dt.as_f64(),
            max: max.as_f64(),
        });
    }
    let mut src = f.values().to_vec();
    let mut dst = src.clone();
    for axis in 0..grid.dim() {
        sweep(&grid, &src, &mut dst, axis, dt, wall);
        std::mem::swap(&mut src, &mut dst);
    }
    Ok(DistributionField::from_raw(grid, src, f.t, f.is_signed()))
}

/// Upwind transport operator `-v·∇_x f` including the wall closure, as a rate.
pub fn transport_apply<S: Real>(
    f: &DistributionField<S>,
    wall: &WallModel<S>,
) -> DistributionField<S> {
    let grid = f.grid().clone();
    let src = f.values();
    let mut rate = vec![S::zero(); src.len()];
    let mut dst = src.to_vec();
    for axis in 0..grid.dim() {
        // a unit-length sweep is exactly src + R_axis(src)
        sweep(&grid, src, &mut dst, axis, S::one(), wall);
        for ((r, &a), &b) in rate.iter_mut().zip(&dst).zip(src) {
            *r = *r + (a - b);
        }
    }
    DistributionField::from_raw(grid, rate, f.t, true)
}

fn sweep<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    src: &[S],
    dst: &mut [S],
    axis: usize,
    dt: S,
    wall: &WallModel<S>,
) {
    let nx = grid.nx();
    let nvel = grid.n_velocities();
    let periodic = wall.mode() == BoundaryMode::Periodic;
    let incoming = if periodic {
        Vec::new()
    } else {
        incoming_for_axis(grid, src, wall, axis)
    };
    let incoming_at = |idx: usize| -> &[S] {
        &incoming
            .iter()
            .find(|(i, _)| *i == idx)
            .expect("face normal to the sweep axis")
            .1
    };
    let courant = dt / grid.dx();
    let inv_dvv = S::one() / grid.velocity_volume();
    for (t, first, stride) in spatial_lines(grid, axis) {
        let cell_at = |k: usize| first + k * stride;
        let lower_in = (!periodic).then(|| incoming_at(face_index(grid, axis, false, t)));
        let upper_in = (!periodic).then(|| incoming_at(face_index(grid, axis, true, t)));
        for j in 0..nvel {
            let v = grid.velocity_component(j, axis);
            let nu = courant * v.abs();
            for k in 0..nx {
                let here = src[cell_at(k) * nvel + j];
                // upwind neighbour in the direction the data comes from
                let gain = if v > S::zero() {
                    if k > 0 {
                        nu * src[cell_at(k - 1) * nvel + j]
                    } else if periodic {
                        nu * src[cell_at(nx - 1) * nvel + j]
                    } else {
                        courant * lower_in.unwrap()[j] * inv_dvv
                    }
                } else if k + 1 < nx {
                    nu * src[cell_at(k + 1) * nvel + j]
                } else if periodic {
                    nu * src[cell_at(0) * nvel + j]
                } else {
                    courant * upper_in.unwrap()[j] * inv_dvv
                };
                dst[cell_at(k) * nvel + j] = here - nu * here + gain;
            }
        }
    }
}

/// Net energy rate through the walls, `(1/d) Σ_faces area Σ_j |v_j|^2 (φ⁻_j - φ⁺_j)`.
pub fn wall_energy_rate<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    outgoing: &BoundaryFlux<S>,
    incoming: &BoundaryFlux<S>,
) -> S {
    let mut acc = S::zero();
    for (idx, face) in grid.faces().iter().enumerate() {
        acc = acc
            + face.area
                * (incoming.face_energy_flux(grid, idx) - outgoing.face_energy_flux(grid, idx));
    }
    acc / S::from_usize_lossy(grid.dim())
}

/// Boundary energy-flux indicator
/// `∫_{Σ₊} ι |v|^2 γ₊f (-|v|^2 + (d+1)/2 sqrt(2/π) Θ^{3/2}) (n·v)₊`.
///
/// Positive when the walls currently pump energy in.
pub fn boundary_energy_flux<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    outgoing: &BoundaryFlux<S>,
    wall: &WallModel<S>,
) -> S {
    if wall.mode() != BoundaryMode::Maxwell {
        return S::zero();
    }
    let d = S::from_usize_lossy(grid.dim());
    let c = (d + S::one()) / S::lit(2.0) * (S::lit(2.0) / S::PI()).sqrt();
    let mut acc = S::zero();
    for (idx, face) in grid.faces().iter().enumerate() {
        let wf = &wall.faces[idx];
        let Some(theta) = wf.theta else { continue };
        let hot = c * theta.powf(S::lit(1.5));
        let mut face_sum = S::zero();
        for (&phi, &v2) in outgoing.faces[idx].iter().zip(grid.speeds2()) {
            if phi != S::zero() {
                face_sum = face_sum + v2 * (hot - v2) * phi;
            }
        }
        acc = acc + face.area * wf.iota * face_sum;
    }
    acc
}
