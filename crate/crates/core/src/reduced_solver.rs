//! The reduced system for the boundary heights `(f, g)`.
//!
//! With `φ` solving `∂_t²φ + Δφ = Jg + t(Δf + |A|²)`, `φ = 0` at `t = ±1`, and
//! Neumann defects `∂_tφ - f = γ_{±1}`, separation in the model Laplacian
//! (symbol `-k²`, `k = 2π|ξ|`) gives
//!
//! * `(Jg)^ = m1 (γ̂₁ - γ̂₋₁) / 2`,
//! * `f̂ = p2'(1)(|A|²)^ / m1 - (γ̂₁ + γ̂₋₁) / (2 m1)`.
//!
//! [`ReducedForm::AsPrinted`] instead divides by `D1 = k² - 1/p2'(1)` and
//! `D2 = k²p2'(1) - 1`, the denominators obtained with the symbol `+k²`. Those
//! vanish at `k* ≈ 1.915`; the division is then governed by [`PolePolicy`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::derivatives;
use crate::geometry::{ChartKind, ChartTable, SurfaceChart};
use crate::kernels::{
    apply_multiplier, d2_root, frequency_grid, k_coth_k, multipliers, p2_dt_at_one, radial_fourier, Direction,
    TailWarning, TransformDim, DEFAULT_ZERO_MARGIN,
};
use crate::numerics::{fit_power_law, solve_tridiagonal, sup_abs};

/// Allowed shortfall of the fitted right-hand-side decay exponent.
const DECAY_SLACK: f64 = 0.1;
/// Right-hand-side tails below this fraction of the peak are transform noise.
const NOISE_FLOOR: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Height pairs

/// Boundary perturbations of the two free-boundary components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightPair {
    pub l: Vec<f64>,
    pub h_minus: Vec<f64>,
    pub h_plus: Vec<f64>,
}

impl HeightPair {
    pub fn zero(l: &[f64]) -> Self {
        Self { l: l.to_vec(), h_minus: vec![0.0; l.len()], h_plus: vec![0.0; l.len()] }
    }

    /// `h₋₁ = g - f`, `h₁ = g + f`.
    pub fn from_fg(l: &[f64], f: &[f64], g: &[f64]) -> Self {
        Self {
            l: l.to_vec(),
            h_minus: g.iter().zip(f).map(|(g, f)| g - f).collect(),
            h_plus: g.iter().zip(f).map(|(g, f)| g + f).collect(),
        }
    }

    pub fn f(&self) -> Vec<f64> {
        self.h_plus.iter().zip(&self.h_minus).map(|(p, m)| 0.5 * (p - m)).collect()
    }

    pub fn g(&self) -> Vec<f64> {
        self.h_plus.iter().zip(&self.h_minus).map(|(p, m)| 0.5 * (p + m)).collect()
    }
}

// ---------------------------------------------------------------------------
// Jacobi operator

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InnerBoundary {
    /// Even reflection at `l = 0`; a collapsing sphere contributes the limit
    /// `c ∂_l²` of the drift `c/l`.
    Symmetric { origin_drift: Option<f64> },
    /// At `l₀ > 0`, the homogeneous part behaves like `l^{-exponent}`.
    PowerLaw { exponent: f64 },
}

/// `η ↦ η'' + a₁η' + Vη` on a radial grid, with far field modeled by
/// `η'' + (d/l)η' + (c/l²)η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialOperator {
    pub l: Vec<f64>,
    pub drift: Vec<f64>,
    pub potential: Vec<f64>,
    pub inner: InnerBoundary,
    pub far_drift: f64,
    pub far_potential: f64,
    /// Decay rate of the homogeneous solution kept at `l = L`.
    pub far_exponent: f64,
    /// `Some(n)` when the slow mode `|l|^{3-n}` is carried as a deficiency.
    pub deficiency_dim: Option<usize>,
}

impl RadialOperator {
    /// Jacobi operator `Δ_Γ + |A|²` of a chart at `s = 0`.
    pub fn from_chart(chart: &SurfaceChart, l: &[f64]) -> Result<Self> {
        if l.first() != Some(&0.0) {
            return Err(invalid("l", "radial grid must start at 0"));
        }
        let table = ChartTable::new(chart, l)?;
        let mut drift = Vec::with_capacity(l.len());
        for j in 0..l.len() {
            drift.push(table.coefficients(j, 0.0)?.0);
        }
        let (far_drift, far_potential, far_exponent, deficiency_dim) = match chart.kind {
            ChartKind::SimonsLeaf | ChartKind::Cone => (6.0, 6.0, 3.0, None),
            ChartKind::Catenoid => {
                let n = chart.surface_dim() + 1;
                ((n - 2) as f64, 0.0, (n - 3) as f64, Some(n))
            }
            ChartKind::Flat => {
                let d = chart.surface_dim() as f64;
                (d - 1.0, 0.0, d - 2.0, None)
            }
        };
        Ok(Self {
            l: l.to_vec(),
            drift,
            potential: table.a2.clone(),
            inner: InnerBoundary::Symmetric { origin_drift: chart.origin_drift() },
            far_drift,
            far_potential,
            far_exponent,
            deficiency_dim,
        })
    }

    /// Exact cone model `∂_r² + (6/r)∂_r + 6/r²` on `r ≥ r[0] > 0`.
    pub fn cone(r: &[f64]) -> Result<Self> {
        if !(r[0] > 0.0) {
            return Err(invalid("r", "cone model needs r[0] > 0"));
        }
        Ok(Self {
            l: r.to_vec(),
            drift: r.iter().map(|x| 6.0 / x).collect(),
            potential: r.iter().map(|x| 6.0 / (x * x)).collect(),
            inner: InnerBoundary::PowerLaw { exponent: 2.0 },
            far_drift: 6.0,
            far_potential: 6.0,
            far_exponent: 3.0,
            deficiency_dim: None,
        })
    }

    /// Far-field indicial polynomial `P(β) = β(β+1-d) + c`, `J(l^{-β}) ≈ P(β) l^{-β-2}`.
    pub fn indicial(&self, beta: f64) -> f64 {
        beta * (beta + 1.0 - self.far_drift) + self.far_potential
    }

    pub fn indicial_roots(&self) -> [f64; 2] {
        let b = 1.0 - self.far_drift;
        let disc = (b * b - 4.0 * self.far_potential).max(0.0).sqrt();
        [0.5 * (-b - disc), 0.5 * (-b + disc)]
    }

    fn stencil(&self, i: usize, hm: f64, hp: f64) -> (f64, f64, f64) {
        let a1 = self.drift[i];
        let s = hm + hp;
        let lower = 2.0 / (hm * s) - a1 * hp / (hm * s);
        let diag = -2.0 / (hm * hp) + a1 * (hp - hm) / (hm * hp) + self.potential[i];
        let upper = 2.0 / (hp * s) + a1 * hm / (hp * s);
        (lower, diag, upper)
    }

    /// Discrete operator applied to `eta` at interior nodes.
    pub fn apply(&self, eta: &[f64]) -> Vec<f64> {
        let n = self.l.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b, c) = self.stencil(i, self.l[i] - self.l[i - 1], self.l[i + 1] - self.l[i]);
            out[i] = a * eta[i - 1] + b * eta[i] + c * eta[i + 1];
        }
        out
    }
}

/// Power-law particular solution near one end of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub amplitude: f64,
    /// Decay exponent `γ` of the right-hand side, `rhs ≈ A l^{-γ}`.
    pub gamma: f64,
}

pub fn fit_tail(l: &[f64], rhs: &[f64], from_end: bool) -> Option<PowerTail> {
    let n = l.len();
    let peak = sup_abs(rhs);
    if peak == 0.0 {
        return None;
    }
    let span = (n / 20).max(4).min(n);
    let idx: Vec<usize> = if from_end { (n - span..n).collect() } else { (0..span).collect() };
    let xs: Vec<f64> = idx.iter().map(|&i| l[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| rhs[i]).collect();
    if ys.iter().any(|y| y.abs() <= 1e-13 * peak) {
        return None;
    }
    let sign = ys[0].signum();
    if ys.iter().any(|y| y.signum() != sign) || xs[0] <= 0.0 {
        return None;
    }
    let (amp, slope) = fit_power_law(&xs, &ys);
    Some(PowerTail { amplitude: sign * amp, gamma: -slope })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiSolution {
    pub l: Vec<f64>,
    pub eta: Vec<f64>,
    /// Coefficient of `|l|^{3-n}` in the far field (catenoids).
    pub deficiency_coeff: Option<f64>,
    /// Sup of the discrete `J(η) - rhs` over interior nodes.
    pub residual: f64,
    pub tail: Option<PowerTail>,
}

/// Solves `J η = rhs` with the boundary closures of `op`.
///
/// At `l = L` the solution minus the power-law particular solution of the
/// right-hand-side tail is matched to the decaying homogeneous rate.
pub fn invert_jacobi_radial(op: &RadialOperator, rhs: &[f64], beta0: f64) -> Result<JacobiSolution> {
    invert_jacobi(op, rhs, beta0, true)
}

/// With `match_tail` off the far closure ignores the right-hand-side tail
/// (after the decay check), which keeps the map exactly linear.
fn invert_jacobi(op: &RadialOperator, rhs: &[f64], beta0: f64, match_tail: bool) -> Result<JacobiSolution> {
    let n = op.l.len();
    if rhs.len() != n || n < 4 {
        return Err(invalid("rhs", "length must match the operator grid (>= 4)"));
    }
    if op.deficiency_dim.is_none() {
        for root in op.indicial_roots() {
            if (beta0 - root).abs() < 1e-9 {
                return Err(Error::Resonance { beta0 });
            }
        }
    }
    let mut far_tail = fit_tail(&op.l, rhs, true);
    if let Some(t) = far_tail {
        if t.gamma < beta0 + 2.0 - DECAY_SLACK {
            let edge = rhs[n - n / 20..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if edge > NOISE_FLOOR * sup_abs(rhs) {
                return Err(Error::SlowDecay { exponent: t.gamma, required: beta0 + 2.0 });
            }
            far_tail = None;
        }
    }
    if !match_tail {
        far_tail = None;
    }
    let particular = |tail: Option<PowerTail>, x: f64| -> (f64, f64) {
        match tail {
            Some(t) => {
                let p = op.indicial(t.gamma - 2.0);
                if p.abs() < 1e-12 {
                    return (0.0, 0.0);
                }
                let v = t.amplitude * x.powf(2.0 - t.gamma) / p;
                (v, (2.0 - t.gamma) * v / x)
            }
            None => (0.0, 0.0),
        }
    };

    let (mut lower, mut diag, mut upper, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], rhs.to_vec());
    for i in 1..n - 1 {
        let (a, d, c) = op.stencil(i, op.l[i] - op.l[i - 1], op.l[i + 1] - op.l[i]);
        lower[i] = a;
        diag[i] = d;
        upper[i] = c;
    }
    // inner row
    let h0 = op.l[1] - op.l[0];
    match op.inner {
        InnerBoundary::Symmetric { origin_drift } => {
            if op.l[0] != 0.0 {
                return Err(invalid("l", "symmetric inner boundary needs l[0] = 0"));
            }
            let c = origin_drift.unwrap_or(0.0);
            diag[0] = -2.0 * (1.0 + c) / (h0 * h0) + op.potential[0];
            upper[0] = 2.0 * (1.0 + c) / (h0 * h0);
        }
        InnerBoundary::PowerLaw { exponent } => {
            let l0 = op.l[0];
            let (a, d, c) = op.stencil(0, h0, h0);
            let (p, dp) = particular(fit_tail(&op.l, rhs, false), l0);
            // ghost: η₋₁ = η₁ - 2h g, g = -(μ/l₀)(η₀ - p) + p'
            diag[0] = d + 2.0 * h0 * a * exponent / l0;
            upper[0] = a + c;
            b[0] = rhs[0] + 2.0 * h0 * a * (exponent / l0 * p + dp);
        }
    }
    // far row
    let hl = op.l[n - 1] - op.l[n - 2];
    let big_l = op.l[n - 1];
    let (a, d, c) = op.stencil(n - 1, hl, hl);
    let (p, dp) = particular(far_tail, big_l);
    let mu = op.far_exponent;
    lower[n - 1] = a + c;
    diag[n - 1] = d - 2.0 * hl * c * mu / big_l;
    b[n - 1] = rhs[n - 1] - 2.0 * hl * c * (mu / big_l * p + dp);

    let eta = solve_tridiagonal(&lower, &diag, &upper, &b)?;
    let applied = op.apply(&eta);
    let residual = (1..n - 1).map(|i| (applied[i] - rhs[i]).abs()).fold(0.0, f64::max);
    let deficiency_coeff = op.deficiency_dim.map(|dim| (eta[n - 1] - p) * big_l.powf(dim as f64 - 3.0));
    Ok(JacobiSolution { l: op.l.clone(), eta, deficiency_coeff, residual, tail: far_tail })
}

// ---------------------------------------------------------------------------
// Spectral division

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReducedForm {
    #[default]
    SignConsistent,
    AsPrinted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolePolicy {
    #[default]
    Notch,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub dim: TransformDim,
    /// Frequency cutoff as a fraction of the grid Nyquist frequency.
    pub cutoff: f64,
    pub margin: f64,
    pub form: ReducedForm,
    pub policy: PolePolicy,
}

impl SpectralConfig {
    /// 4-D radial transforms for Simons charts, 1-D for catenoids.
    pub fn for_chart(kind: ChartKind) -> Self {
        let dim = match kind {
            ChartKind::Catenoid => TransformDim::One,
            _ => TransformDim::Four,
        };
        Self { dim, cutoff: 1.0, margin: DEFAULT_ZERO_MARGIN, form: ReducedForm::default(), policy: PolePolicy::default() }
    }

    /// Drift of the model Laplacian the multipliers diagonalize.
    pub fn model_drift(&self, l: f64) -> f64 {
        match self.dim {
            TransformDim::One => 0.0,
            TransformDim::Four => 3.0 / l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotchReport {
    /// Pole location in the multiplier variable `k = 2π|ξ|`.
    pub k_star: f64,
    pub half_width: f64,
    /// Magnitude of the transformed numerator at the pole.
    pub numerator: f64,
    /// Bound on the spectral mass handled by interpolation.
    pub contribution: f64,
}

/// Half-width of the flagged interval around the root of `D2`.
fn notch_halfwidth(margin: f64) -> f64 {
    let k = d2_root();
    let flagged = |x: f64| multipliers(x, margin).d2_flag || multipliers(x, margin).d1_flag;
    let mut w = 1e-6;
    while flagged(k + w) || flagged(k - w) {
        w *= 1.25;
    }
    w
}

fn notched(symbol: impl Fn(f64) -> f64, k_star: f64, w: f64) -> impl Fn(f64) -> f64 {
    let (lo, hi) = (symbol(k_star - w), symbol(k_star + w));
    move |k| {
        if (k - k_star).abs() < w {
            lo + (hi - lo) * (k - (k_star - w)) / (2.0 * w)
        } else {
            symbol(k)
        }
    }
}

fn spectral_measure(dim: TransformDim, xi: f64) -> f64 {
    match dim {
        TransformDim::One => 2.0,
        TransformDim::Four => 2.0 * PI * PI * xi.powi(3),
    }
}

/// Applies a symbol that may be singular at `k*` under the configured policy.
/// `(1 - Δ_d)⁻¹v` for radial data on a grid starting at `l = 0`: even at the
/// origin, `w' = v'` at the far end. The Green's function decays like
/// `e^{-l}`, so truncating `v` only disturbs the last few units.
fn resolvent(l: &[f64], v: &[f64], dim: TransformDim) -> Result<Vec<f64>> {
    let n = l.len();
    let d = match dim {
        TransformDim::One => 1.0,
        TransformDim::Four => 4.0,
    };
    let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], v.to_vec());
    for j in 1..n - 1 {
        let (hm, hp) = (l[j] - l[j - 1], l[j + 1] - l[j]);
        let a = (d - 1.0) / l[j];
        lo[j] = -2.0 / (hm * (hm + hp)) + a * hp / (hm * (hm + hp));
        di[j] = 1.0 + 2.0 / (hm * hp) - a * (hp - hm) / (hm * hp);
        up[j] = -2.0 / (hp * (hm + hp)) - a * hm / (hp * (hm + hp));
    }
    let h0 = l[1];
    di[0] = 1.0 + 2.0 * d / (h0 * h0);
    up[0] = -2.0 * d / (h0 * h0);
    // ghost w_{n} = w_{n-2} + 2h v'(L), drift folded in with the same slope
    let h = l[n - 1] - l[n - 2];
    let slope = (v[n - 1] - v[n - 2]) / h;
    let a = (d - 1.0) / l[n - 1];
    lo[n - 1] = -2.0 / (h * h);
    di[n - 1] = 1.0 + 2.0 / (h * h);
    rhs[n - 1] += 2.0 * slope / h + a * slope;
    solve_tridiagonal(&lo, &di, &up, &rhs)
}

/// `σ(0)(1 - Δ)⁻¹v + ((σ(k) - σ(0)/(1 + k²))v̂)^∨`. Truncating `v` at
/// `l = L` mostly corrupts low frequencies; the real-space resolvent carries
/// them instead, and the spectral remainder vanishes at `k = 0`.
fn apply_split(
    l: &[f64],
    v: &[f64],
    xi: &[f64],
    dim: TransformDim,
    symbol: impl Fn(f64) -> f64 + Sync,
) -> Result<(Vec<f64>, Option<TailWarning>)> {
    let at_zero = symbol(0.0);
    if at_zero == 0.0 || l[0] != 0.0 || l.len() < 3 {
        return apply_multiplier(l, v, xi, dim, symbol);
    }
    let (rest, warn) = apply_multiplier(l, v, xi, dim, |k| symbol(k) - at_zero / (1.0 + k * k))?;
    let smooth = resolvent(l, v, dim)?;
    Ok((smooth.iter().zip(rest).map(|(a, b)| at_zero * a + b).collect(), warn))
}

fn divide(
    l: &[f64],
    v: &[f64],
    xi: &[f64],
    cfg: &SpectralConfig,
    symbol: impl Fn(f64) -> f64 + Sync + Copy,
) -> Result<(Vec<f64>, Option<TailWarning>, Option<NotchReport>)> {
    if cfg.form == ReducedForm::SignConsistent || sup_abs(v) == 0.0 {
        let (out, warn) = apply_split(l, v, xi, cfg.dim, symbol)?;
        return Ok((out, warn, None));
    }
    let k_star = d2_root();
    let w = notch_halfwidth(cfg.margin);
    let xi_star = k_star / (2.0 * PI);
    let at_pole = radial_fourier(l, v, &[0.0, xi_star], cfg.dim, Direction::Forward)?;
    let scale = radial_fourier(l, v, xi, cfg.dim, Direction::Forward)?;
    let numerator = at_pole.values[1].abs();
    let peak = sup_abs(&scale.values);
    match cfg.policy {
        PolePolicy::Reject if numerator > 1e-10 * peak => Err(Error::UnresolvablePole { xi: k_star, numerator }),
        _ => {
            let sym = notched(symbol, k_star, w);
            let (out, warn) = apply_split(l, v, xi, cfg.dim, &sym)?;
            let worst = sym(k_star - w).abs().max(sym(k_star + w).abs());
            let contribution = worst * numerator * spectral_measure(cfg.dim, xi_star) * 2.0 * w / (2.0 * PI);
            Ok((out, warn, Some(NotchReport { k_star, half_width: w, numerator, contribution })))
        }
    }
}

fn f_symbols(form: ReducedForm) -> (fn(f64) -> f64, fn(f64) -> f64) {
    match form {
        ReducedForm::SignConsistent => (|k| p2_dt_at_one(k) / k_coth_k(k), |k| -0.5 / k_coth_k(k)),
        ReducedForm::AsPrinted => {
            (|k| -1.0 / multipliers(k, 0.0).d1, |k| 0.5 / multipliers(k, 0.0).d2)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSolution {
    pub g: JacobiSolution,
    /// `(m1 (γ̂₁ - γ̂₋₁) / 2)^∨`, the right-hand side of the Jacobi solve.
    pub jacobi_rhs: Vec<f64>,
    pub truncation: Option<TailWarning>,
}

/// `J g = (m1 (γ̂₁ - γ̂₋₁) / 2)^∨`, with a far closure that is linear in the data.
pub fn solve_g(op: &RadialOperator, gamma_diff: &[f64], cfg: &SpectralConfig, beta0: f64) -> Result<GSolution> {
    let l = &op.l;
    let xi = frequency_grid(l, cfg.cutoff);
    let (jacobi_rhs, truncation) = if sup_abs(gamma_diff) == 0.0 {
        (vec![0.0; l.len()], None)
    } else {
        apply_split(l, gamma_diff, &xi, cfg.dim, |k| 0.5 * k_coth_k(k))?
    };
    let g = invert_jacobi(op, &jacobi_rhs, beta0, false)?;
    Ok(GSolution { g, jacobi_rhs, truncation })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FSolution {
    pub f: Vec<f64>,
    pub f0: Vec<f64>,
    pub notch: Option<NotchReport>,
    pub truncation: Option<TailWarning>,
}

/// `f = f₀ + (s₂ (γ̂₁ + γ̂₋₁))^∨` with `f₀ = (s₁ (|A|²)^)^∨`.
pub fn solve_f(l: &[f64], gamma_sum: &[f64], a2: &[f64], cfg: &SpectralConfig) -> Result<FSolution> {
    let xi = frequency_grid(l, cfg.cutoff);
    let (s1, s2) = f_symbols(cfg.form);
    let (f0, warn_a, notch_a) = divide(l, a2, &xi, cfg, s1)?;
    let (corr, warn_s, notch_s) = divide(l, gamma_sum, &xi, cfg, s2)?;
    let f = f0.iter().zip(&corr).map(|(a, b)| a + b).collect();
    let notch = match (notch_a, notch_s) {
        (Some(a), Some(b)) => Some(NotchReport {
            numerator: a.numerator.max(b.numerator),
            contribution: a.contribution + b.contribution,
            ..a
        }),
        (a, b) => a.or(b),
    };
    Ok(FSolution { f, f0, notch, truncation: warn_a.or(warn_s) })
}

/// `f₀` alone.
pub fn compute_f0(l: &[f64], a2: &[f64], cfg: &SpectralConfig) -> Result<Vec<f64>> {
    Ok(solve_f(l, &vec![0.0; l.len()], a2, cfg)?.f0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub f: Vec<f64>,
    pub updates: Vec<f64>,
    pub factors: Vec<f64>,
}

/// Replaces the model Laplacian in the `f`-equation by the chart's
/// Laplace–Beltrami operator: iterates `f ← f_model + S((a₁ - a_model) f')`,
/// where `S` is the `|A|²`-to-`f` symbol.
pub fn perturbation_correct(
    f_model: &[f64],
    op: &RadialOperator,
    cfg: &SpectralConfig,
    tol: f64,
    max_iter: usize,
) -> Result<Correction> {
    let l = &op.l;
    let xi = frequency_grid(l, cfg.cutoff);
    let (s1, _) = f_symbols(cfg.form);
    let delta: Vec<f64> =
        l.iter().zip(&op.drift).map(|(x, a)| if *x > 0.0 { a - cfg.model_drift(*x) } else { 0.0 }).collect();
    let mut f = f_model.to_vec();
    let (mut updates, mut factors) = (Vec::new(), Vec::new());
    let mut bad = 0;
    for _ in 0..max_iter.max(1) {
        let (df, _) = derivatives(l, &f, l[0] == 0.0);
        let src: Vec<f64> = delta.iter().zip(&df).map(|(d, g)| d * g).collect();
        let (corr, _, _) = divide(l, &src, &xi, cfg, s1)?;
        let next: Vec<f64> = f_model.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let update = next.iter().zip(&f).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if let Some(prev) = updates.last().copied() {
            let factor: f64 = if prev > 0.0 { update / prev } else { 0.0 };
            factors.push(factor);
            bad = if factor >= 1.0 { bad + 1 } else { 0 };
            if bad >= 3 {
                return Err(Error::Divergence { stage: "perturbation correction", factors });
            }
        }
        updates.push(update);
        f = next;
        if update < tol {
            break;
        }
    }
    Ok(Correction { f, updates, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;

    #[test]
    fn height_pair_round_trip() {
        let l = linspace(0.0, 1.0, 5);
        let f = vec![0.125, 0.25, 0.375, 0.5, 0.625];
        let g = vec![-1.0, 0.5, 0.25, 0.0, 2.0];
        let h = HeightPair::from_fg(&l, &f, &g);
        assert_eq!(h.f(), f);
        assert_eq!(h.g(), g);
    }

    #[test]
    fn cone_indicial_roots() {
        let op = RadialOperator::cone(&linspace(1.0, 2.0, 5)).unwrap();
        let r = op.indicial_roots();
        assert!((r[0] - 2.0).abs() < 1e-14 && (r[1] - 3.0).abs() < 1e-14);
        assert!(matches!(invert_jacobi_radial(&op, &[0.0; 5], 3.0), Err(Error::Resonance { .. })));
    }

    #[test]
    fn forms_agree_at_zero_frequency() {
        for form in [ReducedForm::SignConsistent, ReducedForm::AsPrinted] {
            let (s1, s2) = f_symbols(form);
            assert!((s1(0.0) - 1.0 / 3.0).abs() < 1e-12);
            assert!((s2(0.0) + 0.5).abs() < 1e-12);
        }
    }
}
