//! Boundary kernels of the strip problem, their Fourier multipliers, radial
//! Fourier transforms in dimensions 1 and 4, and the singular-integral form of
//! the |ξ| multiplier on radial functions in ℝ⁴.
//!
//! Transforms use the convention `f̂(ξ) = ∫ f(z) e^{-2πi ξ·z} dz`. The kernels
//! `p1`, `p2` and the multipliers take the decay rate `k = 2π|ξ|` of the
//! transverse problem `p'' - k² p = 1` (resp. `= t`) as their argument.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{integrate_panels, CubicSpline, GlRule, SplineEnd};

/// Below this rate the kernels and multipliers are evaluated by Taylor series.
pub const SERIES_SWITCH: f64 = 1e-4;
/// Default relative margin for flagging zeros of `D1`, `D2`.
pub const DEFAULT_ZERO_MARGIN: f64 = 1e-3;

// cosh(kt) - cosh(k) and sinh(kt) - t sinh(k) as power series in k, for k < 1.
fn cosh_diff_series(k: f64, t: f64) -> f64 {
    let (k2, t2) = (k * k, t * t);
    let mut term_k = 1.0;
    let mut t_pow = 1.0;
    let mut fact = 1.0;
    let mut sum = 0.0;
    for j in 1..30 {
        term_k *= k2;
        t_pow *= t2;
        fact *= ((2 * j - 1) * (2 * j)) as f64;
        let term = term_k * (t_pow - 1.0) / fact;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn sinh_diff_series(k: f64, t: f64) -> f64 {
    let (k2, t2) = (k * k, t * t);
    let mut term_k = k;
    let mut t_pow = t;
    let mut fact = 1.0;
    let mut sum = 0.0;
    for j in 1..30 {
        term_k *= k2;
        t_pow *= t2;
        fact *= ((2 * j) * (2 * j + 1)) as f64;
        let term = term_k * (t_pow - t) / fact;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

// cosh(kt)/cosh(k) and sinh(kt)/sinh(k) without overflow, k >= 1.
fn cosh_ratio(k: f64, t: f64) -> f64 {
    let a = t.abs();
    (k * (a - 1.0)).exp() * (1.0 + (-2.0 * k * a).exp()) / (1.0 + (-2.0 * k).exp())
}

fn sinh_ratio(k: f64, t: f64) -> f64 {
    let a = t.abs();
    t.signum() * (k * (a - 1.0)).exp() * (1.0 - (-2.0 * k * a).exp()) / (1.0 - (-2.0 * k).exp())
}

/// Even kernel solving `p'' - k²p = 1` on [-1, 1] with zero boundary values.
pub fn p1(k: f64, t: f64) -> f64 {
    let k = k.abs();
    if k <= SERIES_SWITCH {
        let t2 = t * t;
        0.5 * (t2 - 1.0) + k * k * (t2 * t2 - 6.0 * t2 + 5.0) / 24.0
    } else if k < 1.0 {
        cosh_diff_series(k, t) / (k * k * k.cosh())
    } else {
        (cosh_ratio(k, t) - 1.0) / (k * k)
    }
}

/// Odd kernel solving `p'' - k²p = t` on [-1, 1] with zero boundary values.
pub fn p2(k: f64, t: f64) -> f64 {
    let k = k.abs();
    if k <= SERIES_SWITCH {
        let t2 = t * t;
        (t2 * t - t) / 6.0 + k * k * (3.0 * t2 * t2 * t - 10.0 * t2 * t + 7.0 * t) / 360.0
    } else if k < 1.0 {
        sinh_diff_series(k, t) / (k * k * k.sinh())
    } else {
        (sinh_ratio(k, t) - t) / (k * k)
    }
}

/// `∂_t p1(k, t)`.
pub fn p1_dt(k: f64, t: f64) -> f64 {
    let k = k.abs();
    if k <= SERIES_SWITCH {
        t + k * k * (4.0 * t * t * t - 12.0 * t) / 24.0
    } else if k < 1.0 {
        (k * t).sinh() / (k * k.cosh())
    } else {
        sinh_ratio(k, t) * k.tanh() / k
    }
}

/// `∂_t p2(k, t)`.
pub fn p2_dt(k: f64, t: f64) -> f64 {
    let k = k.abs();
    let t2 = t * t;
    if k <= SERIES_SWITCH {
        (3.0 * t2 - 1.0) / 6.0 + k * k * (15.0 * t2 * t2 - 30.0 * t2 + 7.0) / 360.0
    } else if k < 1.0 {
        // (k cosh(kt) - sinh k) / (k² sinh k), numerator by series
        let mut sum = 0.0;
        let mut term_k = k;
        let mut fact = 1.0;
        let mut t_pow = 1.0;
        for j in 1..30 {
            term_k *= k * k;
            fact *= ((2 * j) * (2 * j + 1)) as f64;
            t_pow *= t2;
            let term = term_k * ((2 * j + 1) as f64 * t_pow - 1.0) / fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum / (k * k * k.sinh())
    } else {
        (k * cosh_ratio(k, t) / k.tanh() - 1.0) / (k * k)
    }
}

/// `k coth k`, equal to `1/p1'(1)`.
pub fn k_coth_k(k: f64) -> f64 {
    let k = k.abs();
    if k <= SERIES_SWITCH {
        let k2 = k * k;
        1.0 + k2 / 3.0 - k2 * k2 / 45.0
    } else {
        k / k.tanh()
    }
}

/// `p2'(1) = (k coth k - 1)/k²`, smooth through k = 0.
pub fn p2_dt_at_one(k: f64) -> f64 {
    let k = k.abs();
    if k < 0.25 {
        // 2^{2j} B_{2j} k^{2j-2} / (2j)!
        const C: [f64; 6] = [
            1.0 / 3.0,
            -1.0 / 45.0,
            2.0 / 945.0,
            -1.0 / 4725.0,
            2.0 / 93555.0,
            -1382.0 / 638512875.0,
        ];
        let k2 = k * k;
        C.iter().rev().fold(0.0, |acc, c| acc * k2 + c)
    } else {
        (k / k.tanh() - 1.0) / (k * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub k: f64,
    pub m1: f64,
    pub m2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d1_flag: bool,
    pub d2_flag: bool,
}

/// `m1 = 1/p1'(1)`, `m2 = k²p2'(1)`, `D1 = k² - 1/p2'(1)`, `D2 = k²p2'(1) - 1`.
///
/// A denominator is flagged when it is within `margin` of zero relative to the
/// sum of the magnitudes of its two terms.
pub fn multipliers(k: f64, margin: f64) -> Multipliers {
    let k = k.abs();
    let m1 = k_coth_k(k);
    let m2 = m1 - 1.0;
    let d2 = m1 - 2.0;
    let q = p2_dt_at_one(k);
    let d1 = d2 / q;
    let inv_q = 1.0 / q;
    Multipliers {
        k,
        m1,
        m2,
        d1,
        d2,
        d1_flag: d1.abs() <= margin * (k * k + inv_q),
        d2_flag: d2.abs() <= margin * (m2.abs() + 1.0),
    }
}

/// Unique positive zero of `D2`, i.e. of `k coth k = 2`, by bisection.
pub fn d2_root() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        crate::numerics::bisect(|k| k_coth_k(k) - 2.0, 0.5, 4.0, 1e-15).expect("sign change on [0.5, 4]")
    })
}

/// Coefficients of the ℝ⁴ kernels of the |ξ| and |ξ|⁻¹ multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `(|ξ|)^∨ = c0 |x|^{-5}` as a principal-value kernel.
    pub c0: f64,
    /// `(|ξ|^{-1})^∨ = c1 |x|^{-3}`.
    pub c1: f64,
}

/// Computed once by pairing both sides against the self-dual Gaussian.
pub fn kernel_constants() -> KernelConstants {
    static K: OnceLock<KernelConstants> = OnceLock::new();
    *K.get_or_init(|| {
        let sphere = 2.0 * PI * PI;
        let gauss = |r: f64| (-PI * r * r).exp();
        let cut = 12.0;
        // |ξ| paired with the Gaussian at the origin
        let lhs0 = sphere * integrate_panels(|r| r.powi(4) * gauss(r), 0.0, cut, 96);
        // P.V. integral of (1 - e^{-π|y|²})/|y|⁵ over ℝ⁴; tail beyond `cut` is 1/cut
        let rhs0 = sphere
            * (integrate_panels(|r| if r < 1e-3 { PI - 0.5 * PI * PI * r * r } else { (1.0 - gauss(r)) / (r * r) }, 0.0, cut, 96)
                + 1.0 / cut);
        let lhs1 = sphere * integrate_panels(|r| r * r * gauss(r), 0.0, cut, 96);
        let rhs1 = sphere * integrate_panels(gauss, 0.0, cut, 96);
        KernelConstants { c0: lhs0 / rhs0, c1: lhs1 / rhs1 }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformDim {
    One,
    Four,
}

impl TransformDim {
    pub fn value(self) -> usize {
        match self {
            TransformDim::One => 1,
            TransformDim::Four => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailWarning {
    pub edge_value: f64,
    pub tail_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub xi_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub dim: TransformDim,
    pub direction: Direction,
    pub truncation: Option<TailWarning>,
}

/// Radial kernel of the transform, including the surface measure.
#[inline]
fn radial_kernel(dim: TransformDim, xi: f64, r: f64) -> f64 {
    match dim {
        TransformDim::One => 2.0 * (2.0 * PI * xi * r).cos(),
        TransformDim::Four => {
            if xi * r < 1e-8 {
                2.0 * PI * PI * r * r * r
            } else {
                2.0 * PI / xi * puruspe::Jn(1, 2.0 * PI * xi * r) * r * r
            }
        }
    }
}

/// Relative edge size above which a truncation warning is attached.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Radial Fourier transform of samples on an increasing grid starting at 0.
///
/// The data are interpolated by a cubic spline with zero slope at the origin
/// and integrated panel-wise with Gauss–Legendre nodes. The transform is its
/// own inverse for radial data, so `direction` only labels the output.
pub fn radial_fourier(
    r: &[f64],
    values: &[f64],
    xi_grid: &[f64],
    dim: TransformDim,
    direction: Direction,
) -> Result<SpectralSample> {
    if r.len() < 4 || r.len() != values.len() {
        return Err(invalid("r", "need at least 4 samples matching values"));
    }
    if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("r", "grid must start at 0 and increase strictly"));
    }
    if xi_grid.windows(2).any(|w| w[1] <= w[0]) || xi_grid.iter().any(|x| *x < 0.0) {
        return Err(invalid("xi_grid", "must be nonnegative and strictly increasing"));
    }
    // spectral data may have a kink at the origin (|ξ|-type symbols)
    let left = match direction {
        Direction::Forward => SplineEnd::Slope(0.0),
        Direction::Inverse => {
            let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
            SplineEnd::Slope(
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * values[0] + (h1 + h2) / (h1 * h2) * values[1]
                    - h1 / (h2 * (h1 + h2)) * values[2],
            )
        }
    };
    let spline = CubicSpline::new(r, values, left, SplineEnd::Natural);
    let xi_max = xi_grid.last().copied().unwrap_or(0.0);
    let rule = quadrature_nodes(r, xi_max, &spline);
    let out: Vec<f64> = xi_grid
        .par_iter()
        .map(|&xi| rule.iter().map(|&(x, w, f)| w * f * radial_kernel(dim, xi, x)).sum())
        .collect();

    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let edge = values.last().unwrap().abs();
    let truncation = (edge > TAIL_TOLERANCE * peak.max(1e-300)).then(|| {
        let rmax = *r.last().unwrap();
        let measure = match dim {
            TransformDim::One => 2.0 * rmax,
            TransformDim::Four => 0.5 * PI * PI * rmax.powi(4),
        };
        TailWarning { edge_value: edge, tail_mass: edge * measure }
    });
    Ok(SpectralSample { xi_grid: xi_grid.to_vec(), values: out, dim, direction, truncation })
}

// (node, weight, interpolated value) triples; enough nodes per cell to
// resolve the oscillation of the kernel at `xi_max`.
fn quadrature_nodes(r: &[f64], xi_max: f64, spline: &CubicSpline) -> Vec<(f64, f64, f64)> {
    let h_max = r.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let phase = 2.0 * PI * xi_max * h_max;
    let degree = (8.0 + 2.0 * phase).ceil().min(64.0) as usize;
    let rule = GlRule::new(degree);
    let mut nodes = Vec::with_capacity((r.len() - 1) * degree);
    for w in r.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let p = 0.5 * (a + b) + half * x;
            nodes.push((p, wt * half, spline.eval(p)));
        }
    }
    nodes
}

/// Uniform grid `0, dx, ..., (n-1) dx`.
pub fn uniform_grid(dx: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| dx * i as f64).collect()
}

/// Applies the multiplier `symbol(2π|ξ|)` to radial samples: forward
/// transform, pointwise multiplication, inverse transform back onto `r`.
pub fn apply_multiplier<F>(
    r: &[f64],
    values: &[f64],
    xi_grid: &[f64],
    dim: TransformDim,
    symbol: F,
) -> Result<(Vec<f64>, Option<TailWarning>)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let fwd = radial_fourier(r, values, xi_grid, dim, Direction::Forward)?;
    let weighted: Vec<f64> = xi_grid.iter().zip(&fwd.values).map(|(x, v)| symbol(2.0 * PI * x) * v).collect();
    let back = if xi_grid[0] == 0.0 {
        radial_fourier(xi_grid, &weighted, r, dim, Direction::Inverse)?
    } else {
        let mut xi = vec![0.0];
        xi.extend_from_slice(xi_grid);
        let mut w = vec![weighted[0]];
        w.extend_from_slice(&weighted);
        radial_fourier(&xi, &w, r, dim, Direction::Inverse)?
    };
    Ok((back.values, fwd.truncation))
}

/// Frequency grid adapted to a spatial grid of spacing `dr`: spacing set by
/// the domain length, cutoff at `cutoff_factor` times the Nyquist frequency.
pub fn frequency_grid(r: &[f64], cutoff_factor: f64) -> Vec<f64> {
    let rmax = *r.last().unwrap();
    let dr = r[1] - r[0];
    let dxi = 0.25 / rmax;
    let xi_max = cutoff_factor * 0.5 / dr;
    let n = (xi_max / dxi).ceil() as usize + 1;
    uniform_grid(dxi, n)
}

/// Options for the principal-value quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvOptions {
    /// `rho` is treated as zero beyond this radius.
    pub support: f64,
    /// Maximum panel width in the radial variable |z - y|.
    pub panel: f64,
    /// Gauss–Legendre nodes in the angular integral.
    pub angular_nodes: usize,
}

impl Default for PvOptions {
    fn default() -> Self {
        Self { support: 12.0, panel: 0.125, angular_nodes: 48 }
    }
}

/// `(|ξ| ρ̂)^∨(z)` at radii `z` from the singular-integral representation
/// `c0 P.V. ∫ (ρ(|z|) - ρ(|y|)) / |z - y|⁵ dy`.
///
/// The integral over `w = |z - y|` is split at `w = 1` and `w = |z|/2`.
/// Beyond `|z| + support`, `ρ` is taken equal to its far value and that
/// part of the integral is added in closed form.
pub fn halfspace_pv_operator<F>(rho: F, z: &[f64], opts: PvOptions) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    if opts.support <= 0.0 || opts.panel <= 0.0 || opts.angular_nodes < 4 {
        return Err(invalid("PvOptions", "support, panel must be positive and angular_nodes >= 4"));
    }
    let c0 = kernel_constants().c0;
    let sphere = 2.0 * PI * PI;
    let angular = GlRule::new(opts.angular_nodes);
    let out = z
        .par_iter()
        .map(|&rz| {
            let center = rho(rz);
            // ∫_{S³} (ρ(R) - ρ(|z + wω|)) dω
            let shell = |w: f64| -> f64 {
                let avg = angular.integrate(0.0, PI, |psi| {
                    let s = psi.sin();
                    let d2 = rz * rz + w * w + 2.0 * rz * w * psi.cos();
                    4.0 * PI * s * s * (center - rho(d2.max(0.0).sqrt()))
                });
                avg / (w * w)
            };
            let far = rz + opts.support;
            let at_infinity = rho(far + opts.support);
            let mut cuts = vec![0.0, 1.0_f64.min(far)];
            if 0.5 * rz > 1.0 && 0.5 * rz < far {
                cuts.push(0.5 * rz);
            }
            cuts.push(far);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let panels = ((w[1] - w[0]) / opts.panel).ceil().max(1.0) as usize;
                total += integrate_panels(&shell, w[0], w[1], panels);
            }
            let total = total + sphere * (center - at_infinity) / far;
            let val = c0 * total;
            if val.is_finite() {
                Ok(val)
            } else {
                Err(Error::Integration { r: rz })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(out)
}

/// `sup (1 + δ r)^β |v(r)|`, the decay constant used in tail bounds.
pub fn decay_constant(r: &[f64], v: &[f64], delta: f64, beta: f64) -> f64 {
    r.iter().zip(v).fold(0.0, |m, (x, y)| m.max((1.0 + delta * x).powf(beta) * y.abs()))
}
