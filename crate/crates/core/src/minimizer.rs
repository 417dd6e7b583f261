//! Axisymmetric minimization of `J(u) = ∫ |∇u|² + χ₍₋₁,₁₎(u)` on balls of
//! ℝ⁸ invariant under `O(4)×O(4)`, written on the quarter-plane
//! `x = |X₁|, y = |X₂|` with volume weight `x³y³` (the constant sphere
//! measures are dropped).
//!
//! Discretization: nodes on a square grid, one cell per grid square with all
//! four corners in the domain. A cell contributes
//! `½ w_c Σ (edge difference)²` to the Dirichlet term and `w_c h² χ(ū_c)` to
//! the phase term, where `w_c` is the weight at the cell center and `ū_c` the
//! mean of the clamped corner values. The Euler-Lagrange equation of the
//! Dirichlet part is the five-point divergence-form weighted Laplacian with
//! edge weights `W_e = ½ Σ_{cells ∋ e} w_c`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{shoot_foliation_leaf, FoliationLeaf, Side};

/// Smoothing widths, halved from 0.2 down to 0.0125.
pub const DEFAULT_SCHEDULE: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weight {
    Unit,
    /// `x³y³`.
    Simons,
}

impl Weight {
    pub fn at(self, x: f64, y: f64) -> f64 {
        match self {
            Weight::Unit => 1.0,
            Weight::Simons => (x * y).powi(3),
        }
    }
}

/// `Θ(s)`: the identity on `[-1, 1]`, constant outside.
pub fn one_dimensional_profile(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

#[inline]
fn chi_exact(v: f64) -> f64 {
    if v.abs() < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Monotone surrogate of `χ₍₋₁,₁₎`: `ψ((1-|v|)/κ)` with `ψ(s) = s(2 - s)` on
/// `[0, 1]`. The slope at `|v| = 1` is `2/κ`, so saturated values are pushed
/// onto the box and land exactly on `±1`; a flat start (smoothstep) leaves
/// them just inside, where the exact indicator still counts them.
#[inline]
fn chi_smooth(v: f64, kappa: f64) -> f64 {
    let s = ((1.0 - v.abs()) / kappa).clamp(0.0, 1.0);
    s * (2.0 - s)
}

#[inline]
fn chi_smooth_deriv(v: f64, kappa: f64) -> f64 {
    // one-sided (inward) value on the box boundary
    let s = ((1.0 - v.abs()) / kappa).max(0.0);
    if s >= 1.0 {
        return 0.0;
    }
    -v.signum() * 2.0 * (1.0 - s) / kappa
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub nx: usize,
    pub ny: usize,
    pub weight: Weight,
    /// Node belongs to the domain.
    pub inside: Vec<bool>,
    /// Dirichlet nodes; their values are held at `b`.
    pub boundary: Vec<bool>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl EnergyGrid {
    /// Quarter-plane grid with step `h` clipped to the disc of radius `a`.
    /// Nodes of the domain with a grid neighbour outside the disc form the
    /// boundary mask; the axes carry the natural (no-flux) condition.
    pub fn quarter_ball(a: f64, h: f64) -> Result<Self> {
        if !(a > 0.0) || !(h > 0.0) || a / h < 4.0 {
            return Err(invalid("a/h", "need a > 0 and at least four cells across"));
        }
        let n = (a / h + 1e-9).floor() as usize + 2;
        let inside_at = |i: usize, j: usize| ((i as f64 * h).hypot(j as f64 * h)) <= a * (1.0 + 1e-12);
        let mut inside = vec![false; n * n];
        let mut boundary = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                inside[i + j * n] = inside_at(i, j);
            }
        }
        for j in 0..n {
            for i in 0..n {
                if !inside[i + j * n] {
                    continue;
                }
                let out = |ii: usize, jj: usize| ii >= n || jj >= n || !inside[ii + jj * n];
                let mut edge = out(i + 1, j) || out(i, j + 1);
                if i > 0 {
                    edge |= out(i - 1, j);
                }
                if j > 0 {
                    edge |= out(i, j - 1);
                }
                boundary[i + j * n] = edge;
            }
        }
        Ok(Self {
            h,
            x0: 0.0,
            y0: 0.0,
            nx: n,
            ny: n,
            weight: Weight::Simons,
            inside,
            boundary,
            b: vec![0.0; n * n],
            u: vec![0.0; n * n],
        })
    }

    /// Full rectangle of `nx × ny` nodes with lower-left corner `(x0, y0)`
    /// and no Dirichlet nodes.
    pub fn rectangle(x0: f64, y0: f64, nx: usize, ny: usize, h: f64, weight: Weight) -> Result<Self> {
        if nx < 2 || ny < 2 || !(h > 0.0) {
            return Err(invalid("nx/ny/h", "need at least one cell and h > 0"));
        }
        Ok(Self {
            h,
            x0,
            y0,
            nx,
            ny,
            weight,
            inside: vec![true; nx * ny],
            boundary: vec![false; nx * ny],
            b: vec![0.0; nx * ny],
            u: vec![0.0; nx * ny],
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates in storage order.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|p| (self.x(p % self.nx), self.y(p / self.nx))).collect()
    }

    /// Marks Dirichlet nodes with `mask(x, y)` (domain nodes only).
    pub fn set_boundary_mask(&mut self, mask: impl Fn(f64, f64) -> bool) {
        for p in 0..self.len() {
            let (x, y) = (self.x(p % self.nx), self.y(p / self.nx));
            self.boundary[p] = self.inside[p] && mask(x, y);
        }
    }

    /// Sets the Dirichlet data from per-node values and copies it into `u`.
    pub fn set_boundary_values(&mut self, values: &[f64]) {
        for p in 0..self.len() {
            if self.boundary[p] {
                self.b[p] = values[p];
                self.u[p] = values[p];
            }
        }
    }

    /// Sets `u` from per-node values, keeping the Dirichlet data.
    pub fn set_field(&mut self, values: &[f64]) {
        for p in 0..self.len() {
            self.u[p] = if self.boundary[p] { self.b[p] } else { values[p] };
        }
    }

    pub fn fill(&mut self, f: impl Fn(f64, f64) -> f64) {
        let v: Vec<f64> = self.coords().into_iter().map(|(x, y)| f(x, y)).collect();
        self.set_field(&v);
    }

    /// Largest deviation from the Dirichlet data on the mask.
    pub fn boundary_error(&self) -> f64 {
        (0..self.len()).filter(|&p| self.boundary[p]).map(|p| (self.u[p] - self.b[p]).abs()).fold(0.0, f64::max)
    }

    pub fn clamp(&mut self) {
        for v in &mut self.u {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    fn cell_valid(&self, i: usize, j: usize) -> bool {
        i + 1 < self.nx
            && j + 1 < self.ny
            && self.inside[self.idx(i, j)]
            && self.inside[self.idx(i + 1, j)]
            && self.inside[self.idx(i, j + 1)]
            && self.inside[self.idx(i + 1, j + 1)]
    }

    fn cell_weight(&self, i: usize, j: usize) -> f64 {
        self.weight.at(self.x(i) + 0.5 * self.h, self.y(j) + 0.5 * self.h)
    }

    /// Midpoint-rule `J` with the exact phase indicator.
    pub fn energy(&self) -> f64 {
        self.energy_with(chi_exact)
    }

    /// `J` with the smoothed indicator of width `kappa`.
    pub fn smoothed_energy(&self, kappa: f64) -> f64 {
        self.energy_with(|v| chi_smooth(v, kappa))
    }

    /// Dirichlet part of `J`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.energy_with(|_| 0.0)
    }

    fn energy_with(&self, chi: impl Fn(f64) -> f64 + Sync) -> f64 {
        // row sums in parallel, added in a fixed order
        let rows: Vec<f64> = (0..self.ny.saturating_sub(1))
            .into_par_iter()
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..self.nx - 1 {
                    if self.cell_valid(i, j) {
                        acc += self.cell_energy(i, j, &chi);
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }

    fn cell_energy(&self, i: usize, j: usize, chi: &impl Fn(f64) -> f64) -> f64 {
        let u00 = self.u[self.idx(i, j)];
        let u10 = self.u[self.idx(i + 1, j)];
        let u01 = self.u[self.idx(i, j + 1)];
        let u11 = self.u[self.idx(i + 1, j + 1)];
        let w = self.cell_weight(i, j);
        let grad = (u10 - u00).powi(2) + (u11 - u01).powi(2) + (u01 - u00).powi(2) + (u11 - u10).powi(2);
        let c = |v: f64| v.clamp(-1.0, 1.0);
        let mean = 0.25 * (c(u00) + c(u10) + c(u01) + c(u11));
        0.5 * w * grad + w * self.h * self.h * chi(mean)
    }

    /// Bilinear interpolation of `u`; `None` outside the grid or in a cell
    /// that is not fully in the domain.
    pub fn evaluate(&self, x: f64, y: f64) -> Option<f64> {
        let fx = (x - self.x0) / self.h;
        let fy = (y - self.y0) / self.h;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        if tx > 1.0 + 1e-12 || ty > 1.0 + 1e-12 || !self.cell_valid(i, j) {
            return None;
        }
        let v = |a: usize, b: usize| self.u[self.idx(a, b)];
        Some(
            (1.0 - tx) * (1.0 - ty) * v(i, j)
                + tx * (1.0 - ty) * v(i + 1, j)
                + (1.0 - tx) * ty * v(i, j + 1)
                + tx * ty * v(i + 1, j + 1),
        )
    }
}

/// Per-node stencil data for the descent.
struct Stencil {
    /// Edge weights `W_e` towards (+x, -x, +y, -y); zero where absent.
    edge: Vec<[f64; 4]>,
    /// `w_c h²` for the cell with lower-left corner at the node; zero if invalid.
    cell: Vec<f64>,
    free: Vec<usize>,
}

impl Stencil {
    fn new(g: &EnergyGrid) -> Self {
        let n = g.len();
        let mut cell = vec![0.0; n];
        let mut cw = vec![0.0; n];
        for j in 0..g.ny.saturating_sub(1) {
            for i in 0..g.nx - 1 {
                if g.cell_valid(i, j) {
                    let w = g.cell_weight(i, j);
                    cw[g.idx(i, j)] = w;
                    cell[g.idx(i, j)] = w * g.h * g.h;
                }
            }
        }
        let cwa = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i as usize >= g.nx || j as usize >= g.ny {
                0.0
            } else {
                cw[g.idx(i as usize, j as usize)]
            }
        };
        let mut edge = vec![[0.0; 4]; n];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (ii, jj) = (i as isize, j as isize);
                edge[g.idx(i, j)] = [
                    0.5 * (cwa(ii, jj) + cwa(ii, jj - 1)),
                    0.5 * (cwa(ii - 1, jj) + cwa(ii - 1, jj - 1)),
                    0.5 * (cwa(ii, jj) + cwa(ii - 1, jj)),
                    0.5 * (cwa(ii, jj - 1) + cwa(ii - 1, jj - 1)),
                ];
            }
        }
        let free = (0..n).filter(|&p| g.inside[p] && !g.boundary[p]).collect();
        Self { edge, cell, free }
    }

    #[inline]
    fn neighbours(g: &EnergyGrid, p: usize) -> [Option<usize>; 4] {
        let (i, j) = (p % g.nx, p / g.nx);
        [
            (i + 1 < g.nx).then(|| p + 1),
            (i > 0).then(|| p - 1),
            (j + 1 < g.ny).then(|| p + g.nx),
            (j > 0).then(|| p - g.nx),
        ]
    }

    /// Lower-left corners of the cells containing node `p`.
    #[inline]
    fn cells(g: &EnergyGrid, p: usize) -> [Option<usize>; 4] {
        let (i, j) = (p % g.nx, p / g.nx);
        [
            Some(p),
            (i > 0).then(|| p - 1),
            (j > 0).then(|| p - g.nx),
            (i > 0 && j > 0).then(|| p - g.nx - 1),
        ]
    }

    /// Sum of the clamped values of the other three corners of cell `c`.
    #[inline]
    fn others(g: &EnergyGrid, c: usize, p: usize) -> f64 {
        let corners = [c, c + 1, c + g.nx, c + g.nx + 1];
        corners.iter().filter(|&&q| q != p).map(|&q| g.u[q].clamp(-1.0, 1.0)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub schedule: Vec<f64>,
    /// Over-relaxation of the preconditioned step.
    pub omega: f64,
    /// Stopping threshold on the largest nodal change in one sweep, per level.
    pub level_tol: f64,
    /// Threshold for the last level.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self { schedule: DEFAULT_SCHEDULE.to_vec(), omega: 1.9, level_tol: 1e-7, tol: 1e-9, max_sweeps: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub level: usize,
    /// Smoothing width; `None` for the pure Dirichlet problem.
    pub kappa: Option<f64>,
    pub sweep: usize,
    /// Smoothed energy after the sweep.
    pub energy: f64,
    pub max_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimization {
    pub grid: EnergyGrid,
    pub trace: Vec<TraceEntry>,
    /// `J` with the exact indicator at the end.
    pub energy: f64,
    pub initial_energy: f64,
}

impl Minimization {
    /// True if the smoothed energy never increases within a smoothing level.
    pub fn trace_is_monotone(&self) -> bool {
        let mut prev: Option<&TraceEntry> = None;
        for e in &self.trace {
            if let Some(p) = prev {
                if p.level == e.level && e.energy > p.energy + 1e-12 * p.energy.abs().max(1.0) {
                    return false;
                }
            }
            prev = Some(e);
        }
        true
    }
}

/// One smoothing level of projected, Jacobi-preconditioned coordinate
/// descent: each free node takes the step `-ω g/P` clamped to `[-1, 1]`,
/// halved until its local energy decreases.
fn descend(
    g: &mut EnergyGrid,
    st: &Stencil,
    level: usize,
    kappa: Option<f64>,
    omega: f64,
    tol: f64,
    max_sweeps: usize,
    trace: &mut Vec<TraceEntry>,
) -> Result<()> {
    let energy = |g: &EnergyGrid| match kappa {
        Some(k) => g.smoothed_energy(k),
        None => g.dirichlet_energy(),
    };
    let mut prev = energy(g);
    for sweep in 0..max_sweeps {
        let mut max_change = 0.0_f64;
        for &p in &st.free {
            let w = &st.edge[p];
            let nb = Stencil::neighbours(g, p);
            let (mut a, mut bsum) = (0.0, 0.0);
            for d in 0..4 {
                if let Some(q) = nb[d] {
                    if w[d] > 0.0 {
                        a += w[d];
                        bsum += w[d] * g.u[q];
                    }
                }
            }
            let cells = Stencil::cells(g, p);
            let mut others = [(0.0, 0.0); 4];
            let mut n_cells = 0;
            if kappa.is_some() {
                for c in cells.iter().flatten() {
                    if st.cell[*c] > 0.0 {
                        others[n_cells] = (st.cell[*c], Stencil::others(g, *c, p));
                        n_cells += 1;
                    }
                }
            }
            if a == 0.0 && n_cells == 0 {
                continue;
            }
            let local = |v: f64| -> f64 {
                let mut e = a * v * v - 2.0 * bsum * v;
                if let Some(k) = kappa {
                    for &(cw, s) in &others[..n_cells] {
                        e += cw * chi_smooth(0.25 * (v.clamp(-1.0, 1.0) + s), k);
                    }
                }
                e
            };
            let v = g.u[p];
            let mut grad = 2.0 * (a * v - bsum);
            if let Some(k) = kappa {
                for &(cw, s) in &others[..n_cells] {
                    grad += 0.25 * cw * chi_smooth_deriv(0.25 * (v + s), k);
                }
            }
            let precond = if a > 0.0 { 2.0 * a } else { others[..n_cells].iter().map(|c| c.0).sum::<f64>() };
            let e0 = local(v);
            let mut step = omega;
            for _ in 0..40 {
                let cand = (v - step * grad / precond).clamp(-1.0, 1.0);
                if cand == v {
                    break;
                }
                if local(cand) < e0 {
                    g.u[p] = cand;
                    max_change = max_change.max((cand - v).abs());
                    break;
                }
                step *= 0.5;
            }
        }
        let e = energy(g);
        if e > prev + 1e-12 * prev.abs().max(1.0) {
            return Err(Error::DescentViolation { before: prev, after: e });
        }
        prev = e;
        trace.push(TraceEntry { level, kappa, sweep, energy: e, max_change });
        if max_change < tol {
            break;
        }
    }
    Ok(())
}

/// Minimizes `J` over fields with the grid's Dirichlet data, starting from
/// `grid.u` (clamped first, which never increases `J`).
pub fn minimize(mut grid: EnergyGrid, cfg: &MinimizeConfig) -> Result<Minimization> {
    if cfg.schedule.is_empty() || cfg.schedule.iter().any(|k| !(*k > 0.0)) {
        return Err(invalid("schedule", "need positive smoothing widths"));
    }
    if !(cfg.omega > 0.0 && cfg.omega < 2.0) {
        return Err(invalid("omega", "must lie in (0, 2)"));
    }
    grid.clamp();
    let initial_energy = grid.energy();
    let st = Stencil::new(&grid);
    let mut trace = Vec::new();
    let last = cfg.schedule.len() - 1;
    for (level, &k) in cfg.schedule.iter().enumerate() {
        let tol = if level == last { cfg.tol } else { cfg.level_tol };
        descend(&mut grid, &st, level, Some(k), cfg.omega, tol, cfg.max_sweeps, &mut trace)?;
    }
    let energy = grid.energy();
    Ok(Minimization { grid, trace, energy, initial_energy })
}

/// Weighted harmonic extension of the Dirichlet data (`χ` ignored), clamped.
pub fn harmonic_extension(mut grid: EnergyGrid, cfg: &MinimizeConfig) -> Result<Minimization> {
    grid.clamp();
    let initial_energy = grid.energy();
    let st = Stencil::new(&grid);
    let mut trace = Vec::new();
    descend(&mut grid, &st, 0, None, cfg.omega, cfg.tol, cfg.max_sweeps, &mut trace)?;
    grid.clamp();
    let energy = grid.energy();
    Ok(Minimization { grid, trace, energy, initial_energy })
}

/// Divergence-form weighted Laplacian at free node `p`, normalized by
/// `h²` times the mean edge weight so that it approximates
/// `Δu + ∇(log w)·∇u`. `None` where the node has no edges.
pub fn weighted_laplacian(grid: &EnergyGrid, p: usize) -> Option<f64> {
    let st_edge = Stencil::new(grid).edge;
    laplacian_with(grid, &st_edge, p)
}

fn laplacian_with(grid: &EnergyGrid, edge: &[[f64; 4]], p: usize) -> Option<f64> {
    let nb = Stencil::neighbours(grid, p);
    let (mut sum, mut wsum, mut count) = (0.0, 0.0, 0);
    for d in 0..4 {
        if let Some(q) = nb[d] {
            let w = edge[p][d];
            if w > 0.0 {
                sum += w * (grid.u[q] - grid.u[p]);
                wsum += w;
                count += 1;
            }
        }
    }
    (wsum > 0.0).then(|| sum / (grid.h * grid.h * wsum / count as f64))
}

/// Sup of the normalized weighted Laplacian over free nodes with `|u| < level`.
pub fn harmonicity_residual(grid: &EnergyGrid, level: f64) -> f64 {
    let edge = Stencil::new(grid).edge;
    (0..grid.len())
        .filter(|&p| grid.inside[p] && !grid.boundary[p] && grid.u[p].abs() < level)
        .filter_map(|p| laplacian_with(grid, &edge, p))
        .fold(0.0, |m, r| m.max(r.abs()))
}

// ---------------------------------------------------------------------------
// Barriers

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarrierSide {
    /// `u_ε^+ = Θ(-d)` with `d` the signed distance to the leaf in `{x > y}`.
    Upper,
    /// `u_ε^- = Θ(d)` with `d` the signed distance to the leaf in `{y > x}`.
    Lower,
}

/// Leaves `S_ε^±` with axis foot `1/ε`, shot far enough to cover the disc of
/// radius `a` plus one unit.
#[derive(Clone, Debug)]
pub struct BarrierPair {
    pub eps: f64,
    pub upper: FoliationLeaf,
    pub lower: FoliationLeaf,
    /// Tube fields are the `h = 0` tube profile, not a glued solution.
    pub surrogate: bool,
}

impl BarrierPair {
    pub fn new(eps: f64, a: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        let x0 = 1.0 / eps;
        let r_max = (a + 2.0).max(1.5 * x0);
        let upper = shoot_foliation_leaf(Side::Plus, x0, 1e-3, r_max)?;
        let mut lower = upper.clone();
        lower.side = Side::Minus;
        Ok(Self { eps, upper, lower, surrogate: true })
    }

    pub fn value(&self, side: BarrierSide, x: f64, y: f64) -> f64 {
        match side {
            BarrierSide::Upper => one_dimensional_profile(-self.upper.signed_distance(x, y).0),
            BarrierSide::Lower => one_dimensional_profile(self.lower.signed_distance(x, y).0),
        }
    }

    /// Barrier values at every grid node (zero outside the domain).
    pub fn field(&self, grid: &EnergyGrid, side: BarrierSide) -> Vec<f64> {
        grid.coords()
            .par_iter()
            .enumerate()
            .map(|(p, &(x, y))| if grid.inside[p] { self.value(side, x, y) } else { 0.0 })
            .collect()
    }
}

/// Counts Dirichlet nodes where `b` is not between the barriers: outside
/// `[lower, upper]`, or not strictly inside where the barriers differ.
pub fn boundary_violations(grid: &EnergyGrid, lower: &[f64], upper: &[f64]) -> usize {
    const TOL: f64 = 1e-12;
    (0..grid.len())
        .filter(|&p| grid.boundary[p])
        .filter(|&p| {
            let (lo, up, b) = (lower[p], upper[p], grid.b[p]);
            b < lo - TOL || b > up + TOL || (lo < up - TOL && !(lo < b && b < up))
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRun {
    pub a: f64,
    pub eps0: f64,
    pub result: Minimization,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Exact `J` of the tube-profile candidate `(u⁺ + u⁻)/2`.
    pub tube_energy: f64,
    /// Exact `J` of the clamped weighted harmonic extension of `b_a`.
    pub harmonic_energy: f64,
    /// Harmonicity residual on `{|u| < 0.95}`.
    pub residual: f64,
    pub surrogate: bool,
}

/// Minimizes `J` on the ball of radius `a` with step `h`. The boundary data
/// default to the mean of the two barriers at `eps0`; any supplied data are
/// gated against them. Descent starts from the tube-profile candidate.
pub fn minimize_ball(
    a: f64,
    h: f64,
    barriers: &BarrierPair,
    boundary: Option<&dyn Fn(f64, f64) -> f64>,
    cfg: &MinimizeConfig,
) -> Result<BallRun> {
    let mut grid = EnergyGrid::quarter_ball(a, h)?;
    let lower = barriers.field(&grid, BarrierSide::Lower);
    let upper = barriers.field(&grid, BarrierSide::Upper);
    let mean: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let data: Vec<f64> = match boundary {
        Some(f) => grid.coords().iter().map(|&(x, y)| f(x, y)).collect(),
        None => mean.clone(),
    };
    grid.set_boundary_values(&data);
    let count = boundary_violations(&grid, &lower, &upper);
    if count > 0 {
        return Err(Error::InfeasibleBoundary { count });
    }
    grid.set_field(&mean);
    let tube_energy = grid.energy();
    let harmonic_energy = harmonic_extension(grid.clone(), cfg)?.energy;
    let result = minimize(grid, cfg)?;
    let residual = harmonicity_residual(&result.grid, 0.95);
    Ok(BallRun {
        a,
        eps0: barriers.eps,
        result,
        lower,
        upper,
        tube_energy,
        harmonic_energy,
        residual,
        surrogate: barriers.surrogate,
    })
}

// ---------------------------------------------------------------------------
// Sweeping

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Contact {
    Interior,
    Boundary,
    /// Contact at every node where the barrier is not saturated.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Touch {
    pub eps: f64,
    pub x: f64,
    pub y: f64,
    pub gap: f64,
    pub contact: Contact,
    /// The ordering is violated (gap below `-tol`) rather than just touching.
    pub ordering_failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub side: BarrierSide,
    pub surrogate: bool,
    pub eps: Vec<f64>,
    pub min_gap: Vec<f64>,
    /// `None`: no touch over the whole list.
    pub first_touch: Option<Touch>,
}

/// Barrier values within this of `±1` count as saturated.
pub const SATURATION: f64 = 1e-6;

/// Signed gap between a barrier and `u` at each domain node (`u⁺ - u` or
/// `u - u⁻`). Nodes where the barrier is saturated only count when the gap
/// is negative; elsewhere they report `+∞`.
fn effective_gaps(grid: &EnergyGrid, side: BarrierSide, barrier: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|p| {
            if !grid.inside[p] {
                return f64::INFINITY;
            }
            let gap = match side {
                BarrierSide::Upper => barrier[p] - grid.u[p],
                BarrierSide::Lower => grid.u[p] - barrier[p],
            };
            if barrier[p].abs() < 1.0 - SATURATION || gap < 0.0 {
                gap
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

fn min_gap(gaps: &[f64]) -> (usize, f64) {
    gaps.iter().enumerate().fold((0, f64::INFINITY), |acc, (p, &g)| if g < acc.1 { (p, g) } else { acc })
}

/// Walks the barrier family along `eps_list` and reports the first parameter
/// at which a barrier touches or crosses `u`, refined by bisection between
/// the last clear and the first touching entry. The touching node is the
/// node of smallest gap there.
pub fn sweep_barriers(
    grid: &EnergyGrid,
    side: BarrierSide,
    eps_list: &[f64],
    family: &dyn Fn(f64) -> Result<Vec<f64>>,
    surrogate: bool,
    tol: f64,
) -> Result<SweepReport> {
    const MONO_TOL: f64 = 1e-9;
    let mut report = SweepReport { side, surrogate, eps: Vec::new(), min_gap: Vec::new(), first_touch: None };
    let mut prev: Option<Vec<f64>> = None;
    let mut direction = 0i8;
    for (k, &eps) in eps_list.iter().enumerate() {
        let field = family(eps)?;
        if let Some(p) = &prev {
            let (mut up, mut down) = (false, false);
            for q in (0..grid.len()).filter(|&q| grid.inside[q]) {
                up |= field[q] > p[q] + MONO_TOL;
                down |= field[q] < p[q] - MONO_TOL;
            }
            let d = match (up, down) {
                (true, true) => return Err(Error::NonMonotoneFamily { eps }),
                (true, false) => 1,
                (false, true) => -1,
                _ => direction,
            };
            if direction != 0 && d != direction {
                return Err(Error::NonMonotoneFamily { eps });
            }
            direction = d;
        }
        let gaps = effective_gaps(grid, side, &field);
        let (_, g) = min_gap(&gaps);
        report.eps.push(eps);
        report.min_gap.push(g);
        if g <= tol {
            let (eps_t, field_t) = if k == 0 {
                (eps, field)
            } else {
                let (mut lo, mut hi) = (eps_list[k - 1], eps);
                let mut hi_field = field;
                while (hi - lo).abs() > 1e-6 * hi.abs().max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    let f = family(mid)?;
                    if min_gap(&effective_gaps(grid, side, &f)).1 <= tol {
                        hi = mid;
                        hi_field = f;
                    } else {
                        lo = mid;
                    }
                }
                (hi, hi_field)
            };
            report.first_touch = Some(classify(grid, side, eps_t, &field_t, tol));
            return Ok(report);
        }
        prev = Some(field);
    }
    Ok(report)
}

fn classify(grid: &EnergyGrid, side: BarrierSide, eps: f64, barrier: &[f64], tol: f64) -> Touch {
    let gaps = effective_gaps(grid, side, barrier);
    let (p, gap) = min_gap(&gaps);
    let active: Vec<usize> =
        (0..grid.len()).filter(|&q| grid.inside[q] && barrier[q].abs() < 1.0 - SATURATION).collect();
    let full = !active.is_empty() && active.iter().all(|&q| gaps[q] <= tol);
    let contact = if full {
        Contact::Full
    } else if grid.boundary[p] {
        Contact::Boundary
    } else {
        Contact::Interior
    };
    Touch { eps, x: grid.x(p % grid.nx), y: grid.y(p / grid.nx), gap, contact, ordering_failed: gap < -tol }
}

// ---------------------------------------------------------------------------
// Orbit envelopes

/// Haar-random element of `O(4)`: Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal4(rng: &mut impl rand::Rng) -> [[f64; 4]; 4] {
    loop {
        let mut m = [[0.0; 4]; 4];
        for row in &mut m {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
        let mut ok = true;
        for i in 0..4 {
            for k in 0..i {
                let d: f64 = (0..4).map(|c| m[i][c] * m[k][c]).sum();
                for c in 0..4 {
                    m[i][c] -= d * m[k][c];
                }
            }
            let norm = m[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for v in &mut m[i] {
                *v /= norm;
            }
        }
        if ok {
            return m;
        }
    }
}

fn apply_block(g: &[[f64; 4]; 4], h: &[[f64; 4]; 4], x: &[f64; 8]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for r in 0..4 {
        out[r] = (0..4).map(|c| g[r][c] * x[c]).sum();
        out[r + 4] = (0..4).map(|c| h[r][c] * x[c + 4]).sum();
    }
    out
}

/// Orbit envelopes `(min_g f(gX), max_g f(gX))` over `samples` random
/// elements of `O(4)×O(4)` plus the identity, at each point.
pub fn symmetrized_envelopes(
    f: &(dyn Fn(&[f64; 8]) -> f64 + Sync),
    points: &[[f64; 8]],
    samples: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group: Vec<_> = (0..samples).map(|_| (random_orthogonal4(&mut rng), random_orthogonal4(&mut rng))).collect();
    points
        .par_iter()
        .map(|x| {
            let v0 = f(x);
            group.iter().fold((v0, v0), |(lo, hi), (g, h)| {
                let v = f(&apply_block(g, h, x));
                (lo.min(v), hi.max(v))
            })
        })
        .collect()
}

/// The reduced field as a function on ℝ⁸: `u(|X₁|, |X₂|)`.
pub fn lift(grid: &EnergyGrid) -> impl Fn(&[f64; 8]) -> f64 + Sync + '_ {
    move |x: &[f64; 8]| {
        let r1 = x[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
        let r2 = x[4..].iter().map(|v| v * v).sum::<f64>().sqrt();
        grid.evaluate(r1, r2).unwrap_or(f64::NAN)
    }
}
