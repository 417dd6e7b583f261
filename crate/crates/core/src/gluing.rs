//! Approximate solutions in a tube around a minimal surface.
//!
//! Coordinates: `l` is arc length along the generating curve of `Γ₀`, `s` the
//! signed distance along its normal, and `t = (s - g(l)) / (1 + f(l))` the
//! normalized tube coordinate, so that `w_h = t` vanishes nowhere on the free
//! boundary components `Γ_{±1+h_{±1}}` except through its trace `±1`.
//!
//! For fixed heights `h` the corrector `φ` (zero at `t = ±1`) solves the full
//! Laplacian written in `(t, l)`; the outer loop then adjusts `h` so that
//! `|∇(w_h + φ)| = 1` on both components.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{derivatives, Field};
use crate::geometry::{
    integrate_catenoid_profile, mean_curvature_parallel, shoot_foliation_leaf, ChartKind, ChartTable, Side,
    SurfaceChart,
};
use crate::kernels::TransformDim;
use crate::norms::{field_norm, weighted_norm, NormFamily, DEFAULT_ALPHA};
use crate::numerics::{linspace, solve_tridiagonal, sup_abs};
use crate::reduced_solver::{compute_f0, solve_f, solve_g, HeightPair, RadialOperator, SpectralConfig};

// ---------------------------------------------------------------------------
// Tube and grid

/// Base surface sampled on the `(t, l)` grid.
#[derive(Clone, Debug)]
pub struct Tube {
    pub chart: SurfaceChart,
    pub table: ChartTable,
    pub t: Vec<f64>,
    pub l: Vec<f64>,
    /// `c` in the model drift `c/l`; `None` for the one-dimensional model.
    pub model_origin: Option<f64>,
    curvatures: Vec<Vec<f64>>,
}

impl Tube {
    /// Uniform grid with `nt` points on `[-1, 1]` and spacing `l_step` on `[0, l_max]`.
    pub fn new(chart: SurfaceChart, nt: usize, l_step: f64, l_max: f64, dim: TransformDim) -> Result<Self> {
        if nt < 7 || nt % 2 == 0 {
            return Err(invalid("nt", "need an odd number of t points, at least 7"));
        }
        if !(l_step > 0.0) || !(l_max > 4.0 * l_step) {
            return Err(invalid("l_step", "need 0 < 4 l_step < l_max"));
        }
        if l_max > chart.l_max + 1e-9 {
            return Err(Error::OutOfRange { value: l_max, min: 0.0, max: chart.l_max });
        }
        let nl = (l_max / l_step).round() as usize + 1;
        let l = linspace(0.0, l_max, nl);
        let t = linspace(-1.0, 1.0, nt);
        let table = ChartTable::new(&chart, &l)?;
        let curvatures = table.points.iter().map(|p| p.curvatures().k).collect();
        let model_origin = match dim {
            TransformDim::Four => Some(3.0),
            TransformDim::One => None,
        };
        Ok(Self { chart, table, t, l, model_origin, curvatures })
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn nl(&self) -> usize {
        self.l.len()
    }

    pub fn ht(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn hl(&self) -> f64 {
        self.l[1] - self.l[0]
    }

    pub fn a2(&self) -> &[f64] {
        &self.table.a2
    }

    /// Principal curvatures of `Γ₀` at grid column `j`.
    pub fn curvatures(&self, j: usize) -> &[f64] {
        &self.curvatures[j]
    }

    /// Drift `a₁(l, 0)` of the surface Laplacian, zero at a collapsing origin.
    pub fn surface_drift(&self) -> Result<Vec<f64>> {
        (0..self.nl()).map(|j| Ok(self.table.coefficients(j, 0.0)?.0)).collect()
    }

    /// Meridian-plane point at `(l, s)`.
    pub fn fermi_to_ambient(&self, l: f64, s: f64) -> Result<(f64, f64)> {
        Ok(self.chart.point(l)?.offset(s))
    }
}

/// Heights and their first two `l`-derivatives on the grid.
#[derive(Clone, Debug)]
struct HeightData {
    f: Vec<f64>,
    df: Vec<f64>,
    d2f: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
    d2g: Vec<f64>,
}

impl HeightData {
    fn new(l: &[f64], h: &HeightPair) -> Self {
        let (f, g) = (h.f(), h.g());
        let (df, d2f) = derivatives(l, &f, true);
        let (dg, d2g) = derivatives(l, &g, true);
        Self { f, df, d2f, g, dg, d2g }
    }

    /// Same data with derivatives from stride-`k` central differences
    /// (reflected at `l = 0`); used for the coarse-stencil error estimate.
    fn strided(l: &[f64], h: &HeightPair, k: usize) -> Self {
        let (f, g) = (h.f(), h.g());
        let step = k as f64 * (l[1] - l[0]);
        let n = l.len();
        let d = |v: &[f64]| {
            let mut d1 = vec![0.0; n];
            let mut d2 = vec![0.0; n];
            for j in 0..n {
                if j + k >= n {
                    continue;
                }
                let back = if j >= k { v[j - k] } else { v[k - j] };
                d1[j] = (v[j + k] - back) / (2.0 * step);
                d2[j] = (v[j + k] - 2.0 * v[j] + back) / (step * step);
            }
            (d1, d2)
        };
        let (df, d2f) = d(&f);
        let (dg, d2g) = d(&g);
        Self { f, df, d2f, g, dg, d2g }
    }
}

fn check_heights(tube: &Tube, h: &HeightPair) -> Result<()> {
    if h.l.len() != tube.nl() {
        return Err(invalid("h", "heights must live on the tube's l grid"));
    }
    for (j, f) in h.f().iter().enumerate() {
        if 1.0 + f <= 0.0 {
            return Err(Error::NonPositiveWidth { value: 1.0 + f, l: tube.l[j] });
        }
    }
    Ok(())
}

/// `s` of each grid node, `s = t(1 + f) + g`.
#[derive(Clone, Debug)]
pub struct TubeMap {
    /// `w_h` in `(t, l)`: identically `t`.
    pub w: Field,
    pub s: Field,
    /// Boundary offsets `∓1 + h_{∓1}`.
    pub s_minus: Vec<f64>,
    pub s_plus: Vec<f64>,
}

impl TubeMap {
    /// `t` of a point at offset `s` above grid column `j`.
    pub fn t_of(&self, h: &HeightPair, j: usize, s: f64) -> f64 {
        let (f, g) = (0.5 * (h.h_plus[j] - h.h_minus[j]), 0.5 * (h.h_plus[j] + h.h_minus[j]));
        (s - g) / (1.0 + f)
    }
}

/// Materializes `w_h = (s - g)/(1 + f)` on the tube grid.
pub fn build_w(tube: &Tube, h: &HeightPair) -> Result<TubeMap> {
    check_heights(tube, h)?;
    let (f, g) = (h.f(), h.g());
    let w = Field::from_fn(&tube.t, &tube.l, |t, _| t);
    let mut s = Field::zeros(&tube.t, &tube.l);
    for j in 0..tube.nl() {
        let kmax = tube.curvatures(j).iter().fold(0.0_f64, |m, k| m.max(k.abs()));
        for (i, &t) in tube.t.iter().enumerate() {
            let sv = t * (1.0 + f[j]) + g[j];
            if sv.abs() * kmax >= 1.0 {
                return Err(Error::Focal { index: j, product: sv.abs() * kmax });
            }
            s.set(i, j, sv);
        }
    }
    Ok(TubeMap { w, s, s_minus: h.h_minus.iter().map(|x| x - 1.0).collect(), s_plus: h.h_plus.iter().map(|x| x + 1.0).collect() })
}

// ---------------------------------------------------------------------------
// Operators in (t, l)

/// `Δ = a_tt ∂_t² + a_tl ∂_t∂_l + a_ll ∂_l² + b_t ∂_t + b_l ∂_l` at each node.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub a_tt: Vec<f64>,
    pub a_tl: Vec<f64>,
    pub a_ll: Vec<f64>,
    pub b_t: Vec<f64>,
    pub b_l: Vec<f64>,
}

impl Coefficients {
    /// Model operator `∂_t² + ∂_l² + (c/l)∂_l`, with `c ∂_l²` at `l = 0`.
    pub fn model(tube: &Tube) -> Self {
        let (nt, nl) = (tube.nt(), tube.nl());
        let c = tube.model_origin.unwrap_or(0.0);
        let mut a_ll = vec![1.0; nt * nl];
        let mut b_l = vec![0.0; nt * nl];
        for j in 0..nl {
            for i in 0..nt {
                if j == 0 {
                    a_ll[i] = 1.0 + c;
                } else {
                    b_l[j * nt + i] = c / tube.l[j];
                }
            }
        }
        Self { a_tt: vec![1.0; nt * nl], a_tl: vec![0.0; nt * nl], a_ll, b_t: vec![0.0; nt * nl], b_l }
    }
}

/// Chain-rule coefficients of the Laplacian of the ambient space for
/// functions of `(t, l)`, given the heights.
///
/// With `t_s = 1/(1+f)` and `t_l = -(g' + t f')/(1+f)`:
/// `a_tt = t_s² + 𝔤 t_l²`, `a_tl = 2𝔤 t_l`, `a_ll = 𝔤`,
/// `b_t = -H_s t_s + 𝔤 t_ll + a₁ t_l`, `b_l = a₁`, where `H_s` is the mean
/// curvature of `Γ_s` and `(a₁, 𝔤)` the coefficients of `Δ_{Γ_s}`.
fn coefficients(tube: &Tube, hd: &HeightData) -> Result<Coefficients> {
    let (nt, nl) = (tube.nt(), tube.nl());
    let origin = tube.table.origin_drift;
    let columns: Vec<Result<[Vec<f64>; 5]>> = (0..nl)
        .into_par_iter()
        .map(|j| {
            let mut col: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; nt]);
            let (f, df, d2f, g, dg, d2g) = (hd.f[j], hd.df[j], hd.d2f[j], hd.g[j], hd.dg[j], hd.d2g[j]);
            let w = 1.0 + f;
            for (i, &t) in tube.t.iter().enumerate() {
                let s = t * w + g;
                let ts = 1.0 / w;
                let q = dg + t * df;
                let tl = -q / w;
                let tll = -(d2g + t * d2f) / w + q * df / (w * w) - tl * df / w;
                let (drift, g11) = tube.table.coefficients(j, s)?;
                let hs = mean_curvature_parallel(tube.curvatures(j), s)?;
                let at_origin = j == 0 && origin.is_some();
                let c = if at_origin { origin.unwrap() } else { 0.0 };
                col[0][i] = ts * ts + g11 * tl * tl;
                col[1][i] = 2.0 * g11 * tl;
                col[2][i] = g11 * (1.0 + c);
                // at a collapsing origin (c/l) X_l → c X_ll, and t_l = 0
                col[3][i] = -hs * ts + g11 * (1.0 + c) * tll + drift * tl;
                col[4][i] = drift;
            }
            Ok(col)
        })
        .collect();
    let mut out = Coefficients {
        a_tt: Vec::with_capacity(nt * nl),
        a_tl: Vec::with_capacity(nt * nl),
        a_ll: Vec::with_capacity(nt * nl),
        b_t: Vec::with_capacity(nt * nl),
        b_l: Vec::with_capacity(nt * nl),
    };
    for col in columns {
        let [a, b, c, d, e] = col?;
        out.a_tt.extend(a);
        out.a_tl.extend(b);
        out.a_ll.extend(c);
        out.b_t.extend(d);
        out.b_l.extend(e);
    }
    Ok(out)
}

/// Discrete operator at interior nodes with stencil stride `k`. Columns are
/// reflected at `l = 0` (evenness) and at `l = L` (zero slope). Nodes whose
/// stride-`k` stencil leaves the grid are set to zero.
fn apply_operator(tube: &Tube, co: &Coefficients, phi: &Field, k: usize) -> Field {
    let (nt, nl) = (tube.nt(), tube.nl());
    let (ht, hl) = (k as f64 * tube.ht(), k as f64 * tube.hl());
    let col = |j: isize| -> usize {
        let last = nl as isize - 1;
        let r = if j < 0 { -j } else if j > last { 2 * last - j } else { j };
        r as usize
    };
    let mut out = Field::zeros(&tube.t, &tube.l);
    out.values.par_chunks_mut(nt).enumerate().for_each(|(j, column)| {
        if k > 1 && j + k >= nl {
            return;
        }
        let (jm, jp) = (col(j as isize - k as isize), col(j as isize + k as isize));
        for i in k..nt - k {
            let at = |ii: usize, jj: usize| phi.values[jj * nt + ii];
            let idx = j * nt + i;
            let u = at(i, j);
            let u_tt = (at(i + k, j) - 2.0 * u + at(i - k, j)) / (ht * ht);
            let u_t = (at(i + k, j) - at(i - k, j)) / (2.0 * ht);
            let u_ll = (at(i, jp) - 2.0 * u + at(i, jm)) / (hl * hl);
            let u_l = (at(i, jp) - at(i, jm)) / (2.0 * hl);
            let u_tl = (at(i + k, jp) - at(i + k, jm) - at(i - k, jp) + at(i - k, jm)) / (4.0 * ht * hl);
            column[i] = co.a_tt[idx] * u_tt
                + co.a_tl[idx] * u_tl
                + co.a_ll[idx] * u_ll
                + co.b_t[idx] * u_t
                + co.b_l[idx] * u_l;
        }
    });
    out
}

/// Exact inverse of the discrete model operator: sine transform in `t`,
/// tridiagonal solves in `l`.
#[derive(Clone, Debug)]
pub struct ModelSolver {
    nt: usize,
    hl: f64,
    l: Vec<f64>,
    origin: f64,
    /// Orthonormal sine vectors, row `p` = mode `p`.
    modes: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl ModelSolver {
    pub fn new(tube: &Tube) -> Self {
        let nt = tube.nt();
        let m = nt - 2;
        let ht = tube.ht();
        let norm = (2.0 / (m + 1) as f64).sqrt();
        let mut modes = vec![0.0; m * m];
        for p in 0..m {
            for i in 0..m {
                modes[p * m + i] =
                    norm * (std::f64::consts::PI * ((p + 1) * (i + 1)) as f64 / (m + 1) as f64).sin();
            }
        }
        let eigenvalues = (0..m)
            .map(|p| {
                let s = (std::f64::consts::PI * (p + 1) as f64 / (2 * (m + 1)) as f64).sin();
                -4.0 * s * s / (ht * ht)
            })
            .collect();
        Self { nt, hl: tube.hl(), l: tube.l.clone(), origin: tube.model_origin.unwrap_or(0.0), modes, eigenvalues }
    }

    /// Solves the model problem; values of `rhs` on the rows `t = ±1` are ignored.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        let (nt, nl, m) = (self.nt, self.l.len(), self.nt - 2);
        // forward sine transform of each column
        let mut spec = vec![0.0; m * nl];
        for j in 0..nl {
            let col = &rhs.values[j * nt + 1..j * nt + 1 + m];
            for p in 0..m {
                let row = &self.modes[p * m..(p + 1) * m];
                spec[p * nl + j] = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
        let h2 = self.hl * self.hl;
        let c = self.origin;
        let solved: Vec<Result<Vec<f64>>> = (0..m)
            .into_par_iter()
            .map(|p| {
                let mu = self.eigenvalues[p];
                let (mut lo, mut di, mut up) = (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
                for j in 1..nl - 1 {
                    let a = c / self.l[j];
                    lo[j] = 1.0 / h2 - a / (2.0 * self.hl);
                    di[j] = -2.0 / h2 + mu;
                    up[j] = 1.0 / h2 + a / (2.0 * self.hl);
                }
                di[0] = -2.0 * (1.0 + c) / h2 + mu;
                up[0] = 2.0 * (1.0 + c) / h2;
                lo[nl - 1] = 2.0 / h2;
                di[nl - 1] = -2.0 / h2 + mu;
                solve_tridiagonal(&lo, &di, &up, &spec[p * nl..(p + 1) * nl])
            })
            .collect();
        let solved = solved.into_iter().collect::<Result<Vec<_>>>()?;
        let mut out = Field::zeros(&rhs.t, &rhs.l);
        for j in 0..nl {
            for i in 0..m {
                let v: f64 = (0..m).map(|p| self.modes[p * m + i] * solved[p][j]).sum();
                out.values[j * nt + i + 1] = v;
            }
        }
        Ok(out)
    }
}

/// `∂_t²φ + ∂_l²φ + (c/l)∂_lφ = rhs`, `φ = 0` at `t = ±1`, even at `l = 0`,
/// zero slope at `l = L`.
pub fn solve_model_dirichlet(tube: &Tube, rhs: &Field) -> Result<Field> {
    ModelSolver::new(tube).solve(rhs)
}

/// The discrete model operator applied to `phi`.
pub fn apply_model(tube: &Tube, phi: &Field) -> Field {
    apply_operator(tube, &Coefficients::model(tube), phi, 1)
}

/// The discrete full Laplacian applied to `phi` for heights `h`.
pub fn apply_full(tube: &Tube, h: &HeightPair, phi: &Field) -> Result<Field> {
    check_heights(tube, h)?;
    let co = coefficients(tube, &HeightData::new(&tube.l, h))?;
    Ok(apply_operator(tube, &co, phi, 1))
}

/// Right-hand side `-Δw_h` for which `w_h + φ` is harmonic.
pub fn harmonic_rhs(tube: &Tube, h: &HeightPair) -> Result<Field> {
    check_heights(tube, h)?;
    let co = coefficients(tube, &HeightData::new(&tube.l, h))?;
    let mut out = Field::zeros(&tube.t, &tube.l);
    for (o, b) in out.values.iter_mut().zip(&co.b_t) {
        *o = -b;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerTrace {
    pub updates: Vec<f64>,
    pub factors: Vec<f64>,
    /// Sup of the discrete residual after the last update.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    pub phi: Field,
    pub trace: InnerTrace,
}

/// Solves the full Dirichlet problem by defect correction with the model
/// operator: `φ ← φ + L₁⁻¹(rhs - Δ_h φ)`.
pub fn solve_full_dirichlet(
    tube: &Tube,
    h: &HeightPair,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<DirichletSolution> {
    check_heights(tube, h)?;
    let co = coefficients(tube, &HeightData::new(&tube.l, h))?;
    let model = ModelSolver::new(tube);
    let mut phi = Field::zeros(&tube.t, &tube.l);
    let (mut updates, mut factors) = (Vec::new(), Vec::new());
    let mut bad = 0;
    for _ in 0..max_iter.max(1) {
        let applied = apply_operator(tube, &co, &phi, 1);
        let defect = rhs.zip_map(&applied, |a, b| a - b);
        let delta = model.solve(&defect)?;
        let update = delta.max_abs();
        for (p, d) in phi.values.iter_mut().zip(&delta.values) {
            *p += d;
        }
        if let Some(prev) = updates.last().copied() {
            let factor: f64 = if prev > 0.0 { update / prev } else { 0.0 };
            factors.push(factor);
            bad = if factor >= 1.0 { bad + 1 } else { 0 };
            if bad >= 3 {
                return Err(Error::Divergence { stage: "inner Dirichlet iteration", factors });
            }
        }
        updates.push(update);
        if update < tol {
            break;
        }
    }
    let applied = apply_operator(tube, &co, &phi, 1);
    let mut residual = 0.0_f64;
    for j in 0..tube.nl() {
        for i in 1..tube.nt() - 1 {
            residual = residual.max((applied.get(i, j) - rhs.get(i, j)).abs());
        }
    }
    Ok(DirichletSolution { phi, trace: InnerTrace { updates, factors, residual } })
}

/// `‖Φ(h₁) - Φ(h₂)‖ / (‖f₁ - f₂‖ + ε²‖g₁ - g₂‖)` in sup norms.
pub fn lipschitz_constant(tube: &Tube, h1: &HeightPair, h2: &HeightPair, eps: f64) -> Result<f64> {
    let phi = |h: &HeightPair| -> Result<Field> { Ok(solve_full_dirichlet(tube, h, &harmonic_rhs(tube, h)?, 1e-11, 60)?.phi) };
    let (p1, p2) = (phi(h1)?, phi(h2)?);
    let num = p1.zip_map(&p2, |a, b| a - b).max_abs();
    let df: Vec<f64> = h1.f().iter().zip(h2.f()).map(|(a, b)| a - b).collect();
    let dg: Vec<f64> = h1.g().iter().zip(h2.g()).map(|(a, b)| a - b).collect();
    let den = sup_abs(&df) + eps * eps * sup_abs(&dg);
    if den == 0.0 {
        return Err(invalid("h", "the two height pairs coincide"));
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Error terms

/// `Δ_{Γ₀}v = v'' + a₁(l, 0)v'`, with `(1 + c)v''` at a collapsing origin.
pub fn surface_laplacian(tube: &Tube, v: &[f64]) -> Result<Vec<f64>> {
    let drift = tube.surface_drift()?;
    let (d1, d2) = derivatives(&tube.l, v, true);
    let c = tube.table.origin_drift.unwrap_or(0.0);
    Ok((0..v.len()).map(|j| if j == 0 { (1.0 + c) * d2[0] } else { d2[j] + drift[j] * d1[j] }).collect())
}

/// `E₁ = -tfΔf + Δ(fg) - gΔf + Δ[(s - g)f²/(1+f)]`, the last Laplacian at
/// fixed `s`, so that `Δ_{Γ₀}w_h = -Δg - tΔf + E₁`.
pub fn error_e1(tube: &Tube, h: &HeightPair) -> Result<Field> {
    check_heights(tube, h)?;
    let (f, g) = (h.f(), h.g());
    let lap = |v: &[f64]| surface_laplacian(tube, v);
    let lf = lap(&f)?;
    let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
    let lfg = lap(&fg)?;
    let q: Vec<f64> = f.iter().map(|a| a * a / (1.0 + a)).collect();
    let gq: Vec<f64> = g.iter().zip(&q).map(|(a, b)| a * b).collect();
    let (lq, lgq) = (lap(&q)?, lap(&gq)?);
    let mut e = Field::zeros(&tube.t, &tube.l);
    for j in 0..tube.nl() {
        for (i, &t) in tube.t.iter().enumerate() {
            let s = t * (1.0 + f[j]) + g[j];
            e.set(i, j, -t * f[j] * lf[j] + lfg[j] - g[j] * lf[j] + s * lq[j] - lgq[j]);
        }
    }
    Ok(e)
}

/// `E₂ = (1/(1+f))Σ s²kᵢ³/(1 - skᵢ) - fg|A|²/(1+f)`, so that
/// `H_{Γ_s}/(1+f) = t|A|² + g|A|² + E₂`.
pub fn error_e2(tube: &Tube, h: &HeightPair) -> Result<Field> {
    let map = build_w(tube, h)?;
    let (f, g) = (h.f(), h.g());
    let mut e = Field::zeros(&tube.t, &tube.l);
    for j in 0..tube.nl() {
        let k = tube.curvatures(j);
        let a2 = tube.a2()[j];
        for i in 0..tube.nt() {
            let s = map.s.get(i, j);
            let cubic: f64 = k.iter().map(|x| s * s * x * x * x / (1.0 - s * x)).sum();
            e.set(i, j, (cubic - f[j] * g[j] * a2) / (1.0 + f[j]));
        }
    }
    Ok(e)
}

/// One-sided fourth-order `∂_t` at the boundary row of side `side` (`±1`).
fn boundary_dt(phi: &Field, j: usize, side: i8) -> f64 {
    let nt = phi.nt();
    let ht = phi.t[1] - phi.t[0];
    let c = [-25.0, 48.0, -36.0, 16.0, -3.0];
    if side > 0 {
        -(0..5).map(|m| c[m] * phi.get(nt - 1 - m, j)).sum::<f64>() / (12.0 * ht)
    } else {
        (0..5).map(|m| c[m] * phi.get(m, j)).sum::<f64>() / (12.0 * ht)
    }
}

/// Quadratic defect `E₃,ᵢ` such that on `t = i` (with `φ = 0` there)
/// `(1+f)²(|∇(w_h+φ)|² - 1) = 2(∂_tφ - f - E₃,ᵢ)` holds exactly:
/// `E₃,ᵢ = -½(1 + 𝔤hᵢ'²)(∂_tφ)² - 𝔤hᵢ'²∂_tφ + ½f² - ½𝔤hᵢ'²`.
pub fn boundary_defect_e3(tube: &Tube, side: i8, h: &HeightPair, phi: &Field) -> Result<Vec<f64>> {
    check_heights(tube, h)?;
    let hd = HeightData::new(&tube.l, h);
    let t = f64::from(side.signum());
    (0..tube.nl())
        .map(|j| {
            let s = t * (1.0 + hd.f[j]) + hd.g[j];
            let g11 = tube.table.coefficients(j, s)?.1;
            let dh = hd.dg[j] + t * hd.df[j];
            let p = boundary_dt(phi, j, side);
            let q = g11 * dh * dh;
            Ok(-0.5 * (1.0 + q) * p * p - q * p + 0.5 * hd.f[j] * hd.f[j] - 0.5 * q)
        })
        .collect()
}

/// `|∇(w_h + φ)| - 1` along `t = side`.
pub fn boundary_gradient_defect(tube: &Tube, side: i8, h: &HeightPair, phi: &Field) -> Result<Vec<f64>> {
    check_heights(tube, h)?;
    let hd = HeightData::new(&tube.l, h);
    let t = f64::from(side.signum());
    (0..tube.nl())
        .map(|j| {
            let w = 1.0 + hd.f[j];
            let s = t * w + hd.g[j];
            let g11 = tube.table.coefficients(j, s)?.1;
            let tl = -(hd.dg[j] + t * hd.df[j]) / w;
            let p = boundary_dt(phi, j, side);
            Ok((1.0 + p) * (1.0 / (w * w) + g11 * tl * tl).sqrt() - 1.0)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermNorms {
    pub e1: f64,
    pub e2: f64,
    pub e3_minus: f64,
    pub e3_plus: f64,
    pub upsilon_minus: f64,
    pub upsilon_plus: f64,
    /// `‖Υ₁ + Υ₋₁‖` and `max ‖Υ±₁‖` from the odd model terms alone.
    pub odd_upsilon_sum: f64,
    pub odd_upsilon_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `ε‖f̃‖ + ε²‖ḡ‖` of the iterate.
    pub norm: f64,
    pub update: f64,
    pub factor: Option<f64>,
    pub boundary_sup: f64,
    pub inner_iterations: usize,
    pub inner_factor_max: f64,
    pub projected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Sup of the ambient Laplacian of `u` at interior sample points.
    pub interior_sup: f64,
    /// `|Δ_{2h}u_h|/3` at the same points: the expected size of the
    /// discretization error of the solver's stencil.
    pub truncation_estimate: f64,
    pub boundary_sup: f64,
    pub boundary_minus: f64,
    pub boundary_plus: f64,
    pub per_term: Option<TermNorms>,
    pub iterations: Vec<OuterRecord>,
}

/// Six-point Lagrange weights at `x` on a uniform grid: first stencil
/// index and weights. Stencils are centred where possible; quintic accuracy
/// keeps the interpolant's second derivatives within `O(h⁴)` of the data.
fn lagrange6(x0: f64, h: f64, n: usize, x: f64, lower: isize) -> (isize, [f64; 6]) {
    let pos = (x - x0) / h;
    let base = (pos.floor() as isize - 2).clamp(lower, n as isize - 6);
    let u = pos - base as f64;
    let mut w = [1.0; 6];
    for (m, wm) in w.iter_mut().enumerate() {
        for k in 0..6 {
            if k != m {
                *wm *= (u - k as f64) / (m as f64 - k as f64);
            }
        }
    }
    (base, w)
}

struct Interpolant<'a> {
    tube: &'a Tube,
    f: Vec<f64>,
    g: Vec<f64>,
    phi: &'a Field,
}

impl Interpolant<'_> {
    fn radial(&self, v: &[f64], l: f64) -> f64 {
        let n = v.len();
        let (base, w) = lagrange6(0.0, self.tube.hl(), n, l.abs(), -2);
        (0..6)
            .map(|m| {
                let j = (base + m as isize).unsigned_abs().min(n - 1);
                w[m] * v[j]
            })
            .sum()
    }

    /// `u = t + φ(t, l)` at meridian point `(a, b)`.
    fn u(&self, a: f64, b: f64) -> Result<f64> {
        let (l, s) = self.tube.chart.meridian_to_fermi(a, b)?;
        let l = l.abs();
        let (f, g) = (self.radial(&self.f, l), self.radial(&self.g, l));
        let t = (s - g) / (1.0 + f);
        let (nt, nl) = (self.tube.nt(), self.tube.nl());
        let (bt, wt) = lagrange6(-1.0, self.tube.ht(), nt, t, 0);
        let (bl, wl) = lagrange6(0.0, self.tube.hl(), nl, l, -2);
        let mut phi = 0.0;
        for (mi, wi) in wt.iter().enumerate() {
            let i = (bt + mi as isize).clamp(0, nt as isize - 1) as usize;
            for (mj, wj) in wl.iter().enumerate() {
                let j = (bl + mj as isize).unsigned_abs().min(nl - 1);
                phi += wi * wj * self.phi.get(i, j);
            }
        }
        Ok(t + phi)
    }
}

/// Interior and boundary residuals of `u = w_h + φ`.
///
/// The interior residual is the ambient Laplacian of the interpolated `u`
/// from fourth-order differences in the meridian plane, at grid nodes with
/// `|t| ≤ 3/4` and `1 ≤ l ≤ L/2`; the truncation estimate evaluates the
/// solver's stencil at twice the spacing on the same nodes.
pub fn verify_free_boundary(tube: &Tube, h: &HeightPair, phi: &Field) -> Result<ResidualReport> {
    check_heights(tube, h)?;
    let (nt, nl) = (tube.nt(), tube.nl());
    let minus = boundary_gradient_defect(tube, -1, h, phi)?;
    let plus = boundary_gradient_defect(tube, 1, h, phi)?;
    let (boundary_minus, boundary_plus) = (sup_abs(&minus), sup_abs(&plus));

    // coarse-stencil truncation estimate
    let coarse = coefficients(tube, &HeightData::strided(&tube.l, h, 2))?;
    let lap2 = apply_operator(tube, &coarse, phi, 2);

    let l_max = tube.l[nl - 1];
    let mut nodes = Vec::new();
    let i_step = ((nt - 1) / 8).max(1);
    let j_step = (nl / 40).max(2) & !1;
    for j in (0..nl).step_by(j_step) {
        if tube.l[j] < 1.0 || tube.l[j] > 0.5 * l_max || j + 2 >= nl {
            continue;
        }
        for i in (0..nt).step_by(i_step) {
            if tube.t[i].abs() <= 0.75 + 1e-12 && i >= 2 && i + 2 < nt {
                nodes.push((i, j));
            }
        }
    }
    let truncation_estimate =
        nodes.iter().map(|&(i, j)| ((lap2.get(i, j) + coarse.b_t[j * nt + i]) / 3.0).abs()).fold(0.0, f64::max);

    let interp = Interpolant { tube, f: h.f(), g: h.g(), phi };
    let delta = 0.1;
    let samples: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let point = tube.chart.point(tube.l[j])?;
            let s = tube.t[i] * (1.0 + interp.f[j]) + interp.g[j];
            let (a, b) = point.offset(s);
            let u = |da: f64, db: f64| interp.u(a + da, b + db);
            let c = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
            let d = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
            let (mut uaa, mut ubb, mut ua, mut ub) = (0.0, 0.0, 0.0, 0.0);
            for m in 0..5 {
                let x = (m as f64 - 2.0) * delta;
                let va = u(x, 0.0)?;
                let vb = u(0.0, x)?;
                uaa += c[m] * va;
                ubb += c[m] * vb;
                ua += d[m] * va;
                ub += d[m] * vb;
            }
            let mut lap = (uaa + ubb) / (delta * delta);
            if point.p > 0 {
                lap += point.p as f64 / a * ua / delta;
            }
            if point.q > 0 {
                lap += point.q as f64 / b * ub / delta;
            }
            Ok(lap.abs())
        })
        .collect();
    let interior_sup = samples.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(ResidualReport {
        interior_sup,
        truncation_estimate,
        boundary_sup: boundary_minus.max(boundary_plus),
        boundary_minus,
        boundary_plus,
        per_term: None,
        iterations: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Outer loop

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingConfig {
    pub eps: f64,
    pub nt: usize,
    /// `l` spacing in units of `1/ε`.
    pub l_step: f64,
    /// Tube length in units of `1/ε`.
    pub l_extent: f64,
    pub beta0: f64,
    pub alpha: f64,
    pub spectral: SpectralConfig,
    /// Outer stopping tolerance on the update norm.
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Ball radius `C₀ε³` for the iterates.
    pub ball_c0: f64,
    pub project: bool,
}

impl GluingConfig {
    /// Defaults: 81 points in `t`, step `0.05/ε` up to `40/ε`, `tol = ε⁴`.
    pub fn standard(kind: ChartKind, n: usize, eps: f64) -> Self {
        let beta0 = match kind {
            ChartKind::Catenoid => (2 * n) as f64 - 6.0,
            _ => 2.25,
        };
        Self {
            eps,
            nt: 81,
            l_step: 0.05,
            l_extent: 40.0,
            beta0,
            alpha: DEFAULT_ALPHA,
            spectral: SpectralConfig::for_chart(kind),
            tol: eps.powi(4),
            max_iter: 25,
            inner_tol: 1e-10,
            inner_max_iter: 40,
            ball_c0: 10.0,
            project: true,
        }
    }

    pub fn l_max(&self) -> f64 {
        self.l_extent / self.eps
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_c0 * self.eps.powi(3)
    }
}

/// Chart of the catenoid `S_ε` in `ℝⁿ` or the Simons leaf `ε⁻¹S₁`, long
/// enough for a tube of length `l_max`.
pub fn standard_chart(kind: ChartKind, n: usize, eps: f64, l_max: f64) -> Result<SurfaceChart> {
    match kind {
        ChartKind::Catenoid => {
            let waist = 1.0 / eps;
            let profile = integrate_catenoid_profile(n, eps, waist + 1.1 * l_max, 0.01 * waist)?;
            Ok(SurfaceChart::catenoid(profile))
        }
        ChartKind::SimonsLeaf => {
            let leaf = shoot_foliation_leaf(Side::Plus, 1.0 / eps, 1e-3, 1.2 * l_max + 1.0 / eps)?;
            Ok(SurfaceChart::leaf(leaf))
        }
        ChartKind::Cone | ChartKind::Flat => Err(invalid("kind", "gluing runs need a catenoid or a Simons leaf")),
    }
}

#[derive(Clone, Debug)]
pub struct GluingRun {
    pub tube: Tube,
    pub h: HeightPair,
    pub f0: Vec<f64>,
    pub phi: Field,
    pub report: ResidualReport,
    /// Same verifier applied to `h = 0` with the harmonic corrector.
    pub naive: ResidualReport,
    pub converged: bool,
    pub ball_radius: f64,
}

/// `ε‖f̃‖_{β₀,2;ε} + ε²‖ḡ‖_{β₀,2;1}` with `ḡ` read on the unit-scale grid `εl`.
pub fn iterate_norm(l: &[f64], f_tilde: &[f64], g: &[f64], cfg: &GluingConfig) -> Result<f64> {
    let eps = cfg.eps;
    let fam = |delta| NormFamily::Weighted { beta: cfg.beta0, mu: 2, delta };
    let nf = weighted_norm(l, f_tilde, fam(eps), cfg.alpha)?.value;
    let lbar: Vec<f64> = l.iter().map(|x| eps * x).collect();
    let ng = weighted_norm(&lbar, g, fam(1.0), cfg.alpha)?.value;
    Ok(eps * nf + eps * eps * ng)
}

/// Boundary-derivative contributions of the odd model terms `t|A|²` and
/// `t³Σkᵢ³`, oriented along the outward normal of each side.
pub fn odd_upsilon(tube: &Tube) -> Result<(Vec<f64>, Vec<f64>)> {
    let cubes: Vec<f64> = (0..tube.nl()).map(|j| tube.curvatures(j).iter().map(|k| k * k * k).sum()).collect();
    let a2 = tube.a2().to_vec();
    let mut rhs = Field::zeros(&tube.t, &tube.l);
    for j in 0..tube.nl() {
        for (i, &t) in tube.t.iter().enumerate() {
            rhs.set(i, j, t * a2[j] + t * t * t * cubes[j]);
        }
    }
    let psi = solve_model_dirichlet(tube, &rhs)?;
    let minus = (0..tube.nl()).map(|j| boundary_dt(&psi, j, -1)).collect();
    let plus = (0..tube.nl()).map(|j| -boundary_dt(&psi, j, 1)).collect();
    Ok((minus, plus))
}

fn term_norms(tube: &Tube, h: &HeightPair, phi: &Field, cfg: &GluingConfig) -> Result<TermNorms> {
    let eps = cfg.eps;
    let fam = NormFamily::Weighted { beta: cfg.beta0, mu: 0, delta: eps };
    let radial = |v: &[f64]| -> Result<f64> { Ok(weighted_norm(&tube.l, v, fam, cfg.alpha)?.value) };
    let e1 = field_norm(&error_e1(tube, h)?, cfg.beta0, 0, eps, cfg.alpha)?;
    let e2 = field_norm(&error_e2(tube, h)?, cfg.beta0, 0, eps, cfg.alpha)?;
    let e3m = boundary_defect_e3(tube, -1, h, phi)?;
    let e3p = boundary_defect_e3(tube, 1, h, phi)?;
    // Υᵢ = E₃,ᵢ - (outward ∂_t of the model corrector) on each side
    let model_phi = solve_model_dirichlet(tube, &harmonic_rhs(tube, h)?)?;
    let ups_m: Vec<f64> = (0..tube.nl()).map(|j| e3m[j] - boundary_dt(&model_phi, j, -1)).collect();
    let ups_p: Vec<f64> = (0..tube.nl()).map(|j| e3p[j] + boundary_dt(&model_phi, j, 1)).collect();
    let (odd_m, odd_p) = odd_upsilon(tube)?;
    let odd_sum: Vec<f64> = odd_m.iter().zip(&odd_p).map(|(a, b)| a + b).collect();
    Ok(TermNorms {
        e1,
        e2,
        e3_minus: radial(&e3m)?,
        e3_plus: radial(&e3p)?,
        upsilon_minus: radial(&ups_m)?,
        upsilon_plus: radial(&ups_p)?,
        odd_upsilon_sum: radial(&odd_sum)?,
        odd_upsilon_max: radial(&odd_m)?.max(radial(&odd_p)?),
    })
}

/// Smooth cutoff switching off over the last tenth of the tube, where the
/// artificial far-end closure pollutes the boundary defects.
pub fn far_window(l: &[f64]) -> Vec<f64> {
    let big_l = l[l.len() - 1];
    l.iter().map(|x| 0.5 * (1.0 - ((x - 0.9 * big_l) / (0.02 * big_l)).tanh())).collect()
}

/// One quasi-Newton step for the heights from the boundary defects, using
/// the linearized reduced system: `δf̂ = (d̂₊ + d̂₋)/(2m1)` and
/// `(J δg)^ = -m1(d̂₊ - d̂₋)/2`.
pub fn height_update(
    op: &RadialOperator,
    d_minus: &[f64],
    d_plus: &[f64],
    cfg: &GluingConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = &op.l;
    let zero = vec![0.0; l.len()];
    let window = far_window(l);
    let sum: Vec<f64> = d_plus.iter().zip(d_minus).zip(&window).map(|((a, b), w)| w * (a + b)).collect();
    let diff: Vec<f64> = d_plus.iter().zip(d_minus).zip(&window).map(|((a, b), w)| w * (a - b)).collect();
    let df: Vec<f64> = solve_f(l, &sum, &zero, &cfg.spectral)?.f.iter().map(|v| -v).collect();
    let dg: Vec<f64> = solve_g(op, &diff, &cfg.spectral, cfg.beta0)?.g.eta.iter().map(|v| -v).collect();
    Ok((df, dg))
}

/// Runs the outer iteration from `(f₀, 0)`.
pub fn outer_fixed_point(chart: &SurfaceChart, cfg: &GluingConfig) -> Result<GluingRun> {
    if !(cfg.eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let tube = Tube::new(chart.clone(), cfg.nt, cfg.l_step / cfg.eps, cfg.l_max(), cfg.spectral.dim)?;
    let l = tube.l.clone();
    let op = RadialOperator::from_chart(chart, &l)?;
    let f0 = compute_f0(&l, tube.a2(), &cfg.spectral)?;
    let radius = cfg.ball_radius();

    let corrector = |h: &HeightPair| -> Result<DirichletSolution> {
        solve_full_dirichlet(&tube, h, &harmonic_rhs(&tube, h)?, cfg.inner_tol, cfg.inner_max_iter)
    };

    let zero = HeightPair::zero(&l);
    let naive_phi = corrector(&zero)?.phi;
    let naive = verify_free_boundary(&tube, &zero, &naive_phi)?;

    let mut f = f0.clone();
    let mut g = vec![0.0; l.len()];
    let mut records = Vec::new();
    let mut converged = false;
    let mut prev_update: Option<f64> = None;
    let mut bad = 0;
    let mut factors = Vec::new();
    let mut h = HeightPair::from_fg(&l, &f, &g);
    let mut phi;
    let mut iteration = 0;
    loop {
        let sol = corrector(&h)?;
        phi = sol.phi;
        let d_minus = boundary_gradient_defect(&tube, -1, &h, &phi)?;
        let d_plus = boundary_gradient_defect(&tube, 1, &h, &phi)?;
        let boundary_sup = sup_abs(&d_minus).max(sup_abs(&d_plus));
        let f_tilde: Vec<f64> = f.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let norm = iterate_norm(&l, &f_tilde, &g, cfg)?;
        let inner_factor_max = sol.trace.factors.iter().copied().fold(0.0, f64::max);
        if iteration == cfg.max_iter {
            records.push(OuterRecord {
                iteration,
                norm,
                update: 0.0,
                factor: None,
                boundary_sup,
                inner_iterations: sol.trace.updates.len(),
                inner_factor_max,
                projected: false,
            });
            break;
        }
        let (df, dg) = height_update(&op, &d_minus, &d_plus, cfg)?;
        let update = iterate_norm(&l, &df, &dg, cfg)?;
        let factor = prev_update.map(|p| if p > 0.0 { update / p } else { 0.0 });
        records.push(OuterRecord {
            iteration,
            norm,
            update,
            factor,
            boundary_sup,
            inner_iterations: sol.trace.updates.len(),
            inner_factor_max,
            projected: false,
        });
        if let Some(q) = factor {
            factors.push(q);
            bad = if q >= 1.0 { bad + 1 } else { 0 };
            if bad >= 3 {
                return Err(Error::Divergence { stage: "outer height iteration", factors });
            }
        }
        prev_update = Some(update);
        for j in 0..l.len() {
            f[j] += df[j];
            g[j] += dg[j];
        }
        let f_tilde: Vec<f64> = f.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let new_norm = iterate_norm(&l, &f_tilde, &g, cfg)?;
        if new_norm > radius {
            if !cfg.project {
                return Err(Error::BallViolation { norm: new_norm, radius });
            }
            let scale = radius / new_norm;
            for j in 0..l.len() {
                f[j] = f0[j] + scale * f_tilde[j];
                g[j] *= scale;
            }
            records.last_mut().unwrap().projected = true;
        }
        h = HeightPair::from_fg(&l, &f, &g);
        iteration += 1;
        if update < cfg.tol {
            converged = true;
            let sol = corrector(&h)?;
            phi = sol.phi;
            break;
        }
    }
    let mut report = verify_free_boundary(&tube, &h, &phi)?;
    report.per_term = Some(term_norms(&tube, &h, &phi, cfg)?);
    report.iterations = records;
    Ok(GluingRun { tube, h, f0, phi, report, naive, converged, ball_radius: radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_tube(nt: usize, l_max: f64, step: f64) -> Tube {
        Tube::new(SurfaceChart::flat(4, l_max), nt, step, l_max, TransformDim::Four).unwrap()
    }

    #[test]
    fn model_solver_inverts_model_stencil() {
        let tube = flat_tube(21, 10.0, 0.1);
        let rhs = Field::from_fn(&tube.t, &tube.l, |t, l| (1.0 - t * t) * (-(l * l) / 3.0).exp() + t * 0.1);
        let phi = solve_model_dirichlet(&tube, &rhs).unwrap();
        let back = apply_model(&tube, &phi);
        for j in 0..tube.nl() {
            for i in 1..tube.nt() - 1 {
                assert!((back.get(i, j) - rhs.get(i, j)).abs() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn flat_tube_without_heights_has_zero_forcing() {
        let tube = flat_tube(11, 8.0, 0.2);
        let h = HeightPair::zero(&tube.l);
        assert_eq!(harmonic_rhs(&tube, &h).unwrap().max_abs(), 0.0);
        let map = build_w(&tube, &h).unwrap();
        assert_eq!(map.s, map.w);
    }

    #[test]
    fn odd_forcing_gives_odd_corrector() {
        let tube = flat_tube(21, 10.0, 0.1);
        let rhs = Field::from_fn(&tube.t, &tube.l, |t, l| t * (-(l * l)).exp());
        let phi = solve_model_dirichlet(&tube, &rhs).unwrap();
        assert!(phi.parity_defect(1.0) < 1e-14);
    }
}
