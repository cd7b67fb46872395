//! Discrete phase space `(0,1)^d x [-v_max, v_max]^d`, distribution storage and
//! the integral functionals (mass, density, energy, weighted norms).
//!
//! Spatial cells and velocity nodes are both cell-centered and uniform. Flat
//! indices are row-major over axes: cell `(a, b)` is `a * nx + b`, velocity
//! node `(j0, j1)` is `j0 * nv + j1`. Field values are stored cell-major,
//! `values[cell * n_velocities + node]`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{maxwellian_speed2, Temperature, WeightSpec};
use crate::scalar::Real;

/// A boundary face of the spatial box, attached to exactly one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace<S> {
    /// Spatial axis the outward normal points along.
    pub axis: usize,
    /// Outward normal component along `axis`: `-1` on the lower side, `+1` on the upper.
    pub normal: S,
    pub cell: usize,
    pub area: S,
    /// Face center; unused trailing coordinates are zero.
    pub center: [S; 2],
}

impl<S: Real> BoundaryFace<S> {
    #[inline]
    pub fn is_upper(&self) -> bool {
        self.normal > S::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid<S> {
    d: usize,
    nx: usize,
    nv: usize,
    v_max: S,
    dx: S,
    dv: S,
    centers_1d: Vec<S>,
    nodes_1d: Vec<S>,
    cell_x: Vec<S>,
    vel: Vec<S>,
    speed2: Vec<S>,
    faces: Vec<BoundaryFace<S>>,
}

impl<S: Real> PhaseSpaceGrid<S> {
    /// Builds the grid. Requires `d ∈ {1,2}`, `nx >= 2`, even `nv >= 4` and `v_max > 0`.
    pub fn new(d: usize, nx: usize, nv: usize, v_max: S) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {d}")));
        }
        if nx < 2 {
            return Err(Error::Grid(format!("nx must be >= 2, got {nx}")));
        }
        if nv < 4 || !nv.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "nv must be even and >= 4 (specular reflection needs a symmetric grid), got {nv}"
            )));
        }
        if !(v_max > S::zero() && v_max.is_finite()) {
            return Err(Error::Grid(format!("v_max must be positive, got {v_max}")));
        }
        let dx = S::one() / S::from_usize_lossy(nx);
        let dv = (v_max + v_max) / S::from_usize_lossy(nv);
        let half = S::lit(0.5);
        let centers_1d: Vec<S> = (0..nx)
            .map(|i| (S::from_usize_lossy(i) + half) * dx)
            .collect();
        // symmetric by construction: node nv-1-j is exactly -node j
        let mut nodes_1d = vec![S::zero(); nv];
        for j in 0..nv / 2 {
            let v = (S::from_usize_lossy(nv / 2 - 1 - j) + half) * dv;
            nodes_1d[j] = -v;
            nodes_1d[nv - 1 - j] = v;
        }

        let n_cells = nx.pow(d as u32);
        let n_vel = nv.pow(d as u32);
        let mut cell_x = Vec::with_capacity(n_cells * d);
        for c in 0..n_cells {
            if d == 1 {
                cell_x.push(centers_1d[c]);
            } else {
                cell_x.push(centers_1d[c / nx]);
                cell_x.push(centers_1d[c % nx]);
            }
        }
        let mut vel = Vec::with_capacity(n_vel * d);
        let mut speed2 = Vec::with_capacity(n_vel);
        for j in 0..n_vel {
            if d == 1 {
                vel.push(nodes_1d[j]);
                speed2.push(nodes_1d[j] * nodes_1d[j]);
            } else {
                let (a, b) = (nodes_1d[j / nv], nodes_1d[j % nv]);
                vel.push(a);
                vel.push(b);
                speed2.push(a * a + b * b);
            }
        }

        let mut faces = Vec::new();
        for axis in 0..d {
            for upper in [false, true] {
                let normal = if upper { S::one() } else { -S::one() };
                let edge = if upper { nx - 1 } else { 0 };
                let wall = if upper { S::one() } else { S::zero() };
                if d == 1 {
                    faces.push(BoundaryFace {
                        axis,
                        normal,
                        cell: edge,
                        area: S::one(),
                        center: [wall, S::zero()],
                    });
                } else {
                    for t in 0..nx {
                        let (cell, center) = if axis == 0 {
                            (edge * nx + t, [wall, centers_1d[t]])
                        } else {
                            (t * nx + edge, [centers_1d[t], wall])
                        };
                        faces.push(BoundaryFace {
                            axis,
                            normal,
                            cell,
                            area: dx,
                            center,
                        });
                    }
                }
            }
        }

        Ok(Self {
            d,
            nx,
            nv,
            v_max,
            dx,
            dv,
            centers_1d,
            nodes_1d,
            cell_x,
            vel,
            speed2,
            faces,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }
    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn nv(&self) -> usize {
        self.nv
    }
    #[inline]
    pub fn v_max(&self) -> S {
        self.v_max
    }
    #[inline]
    pub fn dx(&self) -> S {
        self.dx
    }
    #[inline]
    pub fn dv(&self) -> S {
        self.dv
    }
    #[inline]
    pub fn n_cells(&self) -> usize {
        self.cell_x.len() / self.d
    }
    #[inline]
    pub fn n_velocities(&self) -> usize {
        self.speed2.len()
    }
    pub fn n_values(&self) -> usize {
        self.n_cells() * self.n_velocities()
    }
    /// `dx^d`.
    #[inline]
    pub fn cell_volume(&self) -> S {
        self.dx.powi(self.d as i32)
    }
    /// `dv^d`.
    #[inline]
    pub fn velocity_volume(&self) -> S {
        self.dv.powi(self.d as i32)
    }
    pub fn centers_1d(&self) -> &[S] {
        &self.centers_1d
    }
    pub fn nodes_1d(&self) -> &[S] {
        &self.nodes_1d
    }
    pub fn faces(&self) -> &[BoundaryFace<S>] {
        &self.faces
    }

    #[inline]
    pub fn cell_center(&self, cell: usize) -> &[S] {
        &self.cell_x[cell * self.d..(cell + 1) * self.d]
    }

    #[inline]
    pub fn velocity(&self, node: usize) -> &[S] {
        &self.vel[node * self.d..(node + 1) * self.d]
    }

    #[inline]
    pub fn velocity_component(&self, node: usize, axis: usize) -> S {
        self.vel[node * self.d + axis]
    }

    #[inline]
    pub fn speed2(&self, node: usize) -> S {
        self.speed2[node]
    }

    pub fn speeds2(&self) -> &[S] {
        &self.speed2
    }

    /// Node obtained by flipping the sign of velocity component `axis`.
    #[inline]
    pub fn mirror(&self, node: usize, axis: usize) -> usize {
        let nv = self.nv;
        if self.d == 1 {
            nv - 1 - node
        } else if axis == 0 {
            let (j0, j1) = (node / nv, node % nv);
            (nv - 1 - j0) * nv + j1
        } else {
            let (j0, j1) = (node / nv, node % nv);
            j0 * nv + (nv - 1 - j1)
        }
    }

    /// Flat-index stride of a unit step along spatial `axis`.
    #[inline]
    pub fn cell_stride(&self, axis: usize) -> usize {
        if self.d == 2 && axis == 0 {
            self.nx
        } else {
            1
        }
    }

    /// Position of `cell` along `axis` (0..nx).
    #[inline]
    pub fn cell_coord(&self, cell: usize, axis: usize) -> usize {
        (cell / self.cell_stride(axis)) % self.nx
    }

    /// `n_face . v` for node `node` at `face`.
    #[inline]
    pub fn normal_velocity(&self, face: &BoundaryFace<S>, node: usize) -> S {
        face.normal * self.velocity_component(node, face.axis)
    }

    /// Point samples of `M_T` at every velocity node.
    pub fn maxwellian_samples(&self, t: Temperature<S>) -> Vec<S> {
        self.speed2
            .iter()
            .map(|&v2| maxwellian_speed2(t, v2, self.d))
            .collect()
    }

    /// `M_T` samples divided by their discrete mass, so `sum * dv^d == 1`.
    pub fn discrete_maxwellian(&self, t: Temperature<S>) -> Vec<S> {
        let mut m = self.maxwellian_samples(t);
        let mass: S = m.iter().copied().sum::<S>() * self.velocity_volume();
        for x in &mut m {
            *x = *x / mass;
        }
        m
    }

    /// Weight value at every velocity node.
    pub fn weight_table(&self, w: &WeightSpec<S>) -> Vec<S> {
        self.speed2.iter().map(|&v2| w.eval_speed2(v2)).collect()
    }

    /// Default velocity cutoff `8 sqrt(T_max)`.
    pub fn default_v_max(max_temperature: S) -> S {
        S::lit(8.0) * max_temperature.sqrt()
    }
}

/// Which discrete norm `weighted_norm` computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// Values `f(x_i, v_j)` on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField<S> {
    grid: Arc<PhaseSpaceGrid<S>>,
    values: Vec<S>,
    pub t: S,
    signed: bool,
}

impl<S: Real> DistributionField<S> {
    pub fn zeros(grid: Arc<PhaseSpaceGrid<S>>) -> Self {
        let n = grid.n_values();
        Self {
            grid,
            values: vec![S::zero(); n],
            t: S::zero(),
            signed: false,
        }
    }

    /// Nonnegative field; rejects negative or non-finite entries.
    pub fn from_values(grid: Arc<PhaseSpaceGrid<S>>, values: Vec<S>, t: S) -> Result<Self> {
        check_len(&grid, &values)?;
        if let Some(index) = values.iter().position(|v| !(*v >= S::zero() && v.is_finite())) {
            return Err(Error::InvalidField { index });
        }
        Ok(Self {
            grid,
            values,
            t,
            signed: false,
        })
    }

    /// Signed field (perturbations, operator outputs); only finiteness is required.
    pub fn signed(grid: Arc<PhaseSpaceGrid<S>>, values: Vec<S>, t: S) -> Result<Self> {
        check_len(&grid, &values)?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField { index });
        }
        Ok(Self {
            grid,
            values,
            t,
            signed: true,
        })
    }

    /// Builds a field without checking entries. Callers guarantee the invariants.
    pub(crate) fn from_raw(grid: Arc<PhaseSpaceGrid<S>>, values: Vec<S>, t: S, signed: bool) -> Self {
        debug_assert_eq!(values.len(), grid.n_values());
        Self {
            grid,
            values,
            t,
            signed,
        }
    }

    pub fn grid(&self) -> &Arc<PhaseSpaceGrid<S>> {
        &self.grid
    }
    pub fn values(&self) -> &[S] {
        &self.values
    }
    pub(crate) fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<S> {
        self.values
    }
    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Velocity slice of one cell.
    #[inline]
    pub fn cell(&self, cell: usize) -> &[S] {
        let nv = self.grid.n_velocities();
        &self.values[cell * nv..(cell + 1) * nv]
    }

    pub fn min_value(&self) -> S {
        self.values.iter().fold(S::infinity(), |m, &v| m.min(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Multiplies every value by `factor`.
    pub fn scale(&mut self, factor: S) {
        for v in &mut self.values {
            *v = *v * factor;
        }
    }

    /// Rescales so the total mass is exactly one (to roundoff).
    pub fn normalize_mass(&mut self) {
        let m = self.mass();
        if m > S::zero() {
            self.scale(S::one() / m);
        }
    }

    /// `∫ f dv dx`.
    pub fn mass(&self) -> S {
        let s: S = self.values.iter().copied().sum();
        s * self.grid.cell_volume() * self.grid.velocity_volume()
    }

    /// `ρ_f(x_i) = ∫ f(x_i, v) dv` per cell.
    pub fn density(&self) -> Vec<S> {
        let dvv = self.grid.velocity_volume();
        (0..self.grid.n_cells())
            .map(|c| self.cell(c).iter().copied().sum::<S>() * dvv)
            .collect()
    }

    /// `(1/d) ∫ |v|^2 f(x_i, v) dv` per cell.
    pub fn cell_energies(&self) -> Vec<S> {
        let g = &self.grid;
        let scale = g.velocity_volume() / S::from_usize_lossy(g.dim());
        (0..g.n_cells())
            .map(|c| {
                self.cell(c)
                    .iter()
                    .zip(g.speeds2())
                    .map(|(&f, &v2)| f * v2)
                    .sum::<S>()
                    * scale
            })
            .collect()
    }

    /// Total energy `(1/d) ∫ |v|^2 f dv dx`.
    pub fn energy_functional(&self) -> S {
        self.cell_energies().into_iter().sum::<S>() * self.grid.cell_volume()
    }

    /// Discrete `L^p` norm of `ω f`.
    pub fn weighted_norm(&self, w: &WeightSpec<S>, p: Norm) -> S {
        let weights = self.grid.weight_table(w);
        norm_with_weights(&self.grid, &weights, self.values.iter().copied(), p)
    }

    /// `|| ω (self - other) ||_{L^2}`.
    pub fn weighted_distance(&self, other: &Self, w: &WeightSpec<S>) -> S {
        let weights = self.grid.weight_table(w);
        weighted_l2_distance(&self.grid, &weights, &self.values, &other.values)
    }
}

fn check_len<S: Real>(grid: &PhaseSpaceGrid<S>, values: &[S]) -> Result<()> {
    if values.len() != grid.n_values() {
        return Err(Error::Shape(format!(
            "expected {} values, got {}",
            grid.n_values(),
            values.len()
        )));
    }
    Ok(())
}

pub(crate) fn norm_with_weights<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    weights: &[S],
    values: impl Iterator<Item = S>,
    p: Norm,
) -> S {
    let nvel = grid.n_velocities();
    let vol = grid.cell_volume() * grid.velocity_volume();
    let mut acc = S::zero();
    for (k, f) in values.enumerate() {
        let x = (weights[k % nvel] * f).abs();
        acc = match p {
            Norm::L1 => acc + x,
            Norm::L2 => acc + x * x,
            Norm::Inf => acc.max(x),
        };
    }
    match p {
        Norm::L1 => acc * vol,
        Norm::L2 => (acc * vol).sqrt(),
        Norm::Inf => acc,
    }
}

pub(crate) fn weighted_l2_distance<S: Real>(
    grid: &PhaseSpaceGrid<S>,
    weights: &[S],
    a: &[S],
    b: &[S],
) -> S {
    norm_with_weights(grid, weights, a.iter().zip(b).map(|(&x, &y)| x - y), Norm::L2)
}

/// Initial datum `f[i,j] = rho[i] M_{T[i]}(v_j)`.
///
/// With `renormalize`, each cell's Maxwellian is divided by its discrete mass
/// so that the discrete density equals `rho` exactly.
pub fn project_maxwellian<S: Real>(
    grid: Arc<PhaseSpaceGrid<S>>,
    rho: &[S],
    temperature: &[S],
    renormalize: bool,
) -> Result<DistributionField<S>> {
    let nc = grid.n_cells();
    if rho.len() != nc || temperature.len() != nc {
        return Err(Error::Shape(format!(
            "rho and T must have {nc} entries, got {} and {}",
            rho.len(),
            temperature.len()
        )));
    }
    if let Some(i) = rho.iter().position(|r| !(*r >= S::zero() && r.is_finite())) {
        return Err(Error::InvalidField { index: i });
    }
    let nvel = grid.n_velocities();
    let mut values = Vec::with_capacity(nc * nvel);
    for c in 0..nc {
        let t = Temperature::new(temperature[c])?;
        let m = if renormalize {
            grid.discrete_maxwellian(t)
        } else {
            grid.maxwellian_samples(t)
        };
        values.extend(m.into_iter().map(|x| rho[c] * x));
    }
    Ok(DistributionField::from_raw(grid, values, S::zero(), false))
}

/// Spatially uniform Maxwellian at temperature `t` with unit mass.
pub fn uniform_maxwellian<S: Real>(
    grid: Arc<PhaseSpaceGrid<S>>,
    t: S,
    renormalize: bool,
) -> Result<DistributionField<S>> {
    let nc = grid.n_cells();
    project_maxwellian(grid, &vec![S::one(); nc], &vec![t; nc], renormalize)
}

/// Direction of a boundary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Outgoing,
    Incoming,
}

/// Boundary trace fluxes `γ±f |n·v| dv^d`, one dense velocity vector per face.
///
/// Entries off the trace's support (`n·v > 0` for outgoing, `< 0` for
/// incoming) are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux<S> {
    pub kind: FluxKind,
    pub faces: Vec<Vec<S>>,
}

impl<S: Real> BoundaryFlux<S> {
    pub fn zeros(grid: &PhaseSpaceGrid<S>, kind: FluxKind) -> Self {
        Self {
            kind,
            faces: vec![vec![S::zero(); grid.n_velocities()]; grid.faces().len()],
        }
    }

    /// Outgoing trace of `f`: the adjacent cell value on outgoing nodes.
    pub fn outgoing_trace(f: &DistributionField<S>) -> Self {
        let g = f.grid();
        let dvv = g.velocity_volume();
        let faces = g
            .faces()
            .iter()
            .map(|face| {
                let cell = f.cell(face.cell);
                (0..g.n_velocities())
                    .map(|j| {
                        let vn = g.normal_velocity(face, j);
                        if vn > S::zero() {
                            cell[j] * vn * dvv
                        } else {
                            S::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            kind: FluxKind::Outgoing,
            faces,
        }
    }

    /// Total mass flux through `face` per unit face area.
    pub fn face_mass_flux(&self, face: usize) -> S {
        self.faces[face].iter().copied().sum()
    }

    /// Energy flux `Σ_j |v_j|^2 φ_j` through `face` per unit face area.
    pub fn face_energy_flux(&self, grid: &PhaseSpaceGrid<S>, face: usize) -> S {
        self.faces[face]
            .iter()
            .zip(grid.speeds2())
            .map(|(&p, &v2)| p * v2)
            .sum()
    }

    /// True when all nonzero entries sit on the trace's support.
    pub fn respects_support(&self, grid: &PhaseSpaceGrid<S>) -> bool {
        self.faces.iter().zip(grid.faces()).all(|(vals, face)| {
            vals.iter().enumerate().all(|(j, &p)| {
                let vn = grid.normal_velocity(face, j);
                p == S::zero()
                    || match self.kind {
                        FluxKind::Outgoing => vn > S::zero(),
                        FluxKind::Incoming => vn < S::zero(),
                    }
            })
        })
    }
}

const SNAPSHOT_HEADER: &str = "d,nx,nv,v_max,t,mass,energy";

/// Writes the header line, the metadata row and one CSV row per cell, every
/// number with 17 significant digits.
pub fn write_snapshot<S: Real, W: Write>(f: &DistributionField<S>, mut w: W) -> Result<()> {
    let g = f.grid();
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    writeln!(
        w,
        "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
        g.dim(),
        g.nx(),
        g.nv(),
        g.v_max().as_f64(),
        f.t.as_f64(),
        f.mass().as_f64(),
        f.energy_functional().as_f64()
    )?;
    let mut line = String::new();
    for c in 0..g.n_cells() {
        line.clear();
        for (j, v) in f.cell(c).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", v.as_f64()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`], rebuilding its grid.
pub fn read_snapshot<S: Real, R: BufRead>(r: R) -> Result<DistributionField<S>> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Snapshot(format!("missing {what}")))?
            .map_err(Error::from)
    };
    let header = next("header")?;
    if header.trim() != SNAPSHOT_HEADER {
        return Err(Error::Snapshot(format!("unexpected header `{header}`")));
    }
    let meta = next("metadata row")?;
    let fields: Vec<&str> = meta.trim().split(',').collect();
    if fields.len() != 7 {
        return Err(Error::Snapshot("metadata row must have 7 entries".into()));
    }
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Snapshot(format!("bad integer `{s}`: {e}")))
    };
    let num = |s: &str| -> Result<S> {
        s.parse::<f64>()
            .map(S::lit)
            .map_err(|e| Error::Snapshot(format!("bad number `{s}`: {e}")))
    };
    let grid = Arc::new(PhaseSpaceGrid::new(
        int(fields[0])?,
        int(fields[1])?,
        int(fields[2])?,
        num(fields[3])?,
    )?);
    let t = num(fields[4])?;
    let nvel = grid.n_velocities();
    let mut values = Vec::with_capacity(grid.n_values());
    for c in 0..grid.n_cells() {
        let row = next(&format!("row {c}"))?;
        let before = values.len();
        for tok in row.trim().split(',') {
            values.push(num(tok)?);
        }
        if values.len() - before != nvel {
            return Err(Error::Snapshot(format!(
                "row {c} has {} values, expected {nvel}",
                values.len() - before
            )));
        }
    }
    if values.iter().any(|v| *v < S::zero()) {
        DistributionField::signed(grid, values, t)
    } else {
        DistributionField::from_values(grid, values, t)
    }
}
