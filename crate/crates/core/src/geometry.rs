//! Rotationally symmetric minimal hypersurfaces and their Fermi-coordinate data.
//!
//! Every surface here is generated by a curve `(a(σ), b(σ))` in a meridian
//! half-plane, parametrized by arc length with tangent angle `θ`, and rotated
//! by `O(p+1) × O(q+1)`: a `p`-sphere of radius `a` and, for the Simons
//! leaves, a `q`-sphere of radius `b`. The unit normal is
//! `ν = (sin θ, -cos θ)`; principal curvatures are defined by
//! `√det g_s = √det g_0 · Π(1 - s kᵢ)`, so
//!
//! * profile curvature `-θ'`,
//! * `p` copies of `-sin θ / a`,
//! * `q` copies of `cos θ / b`.
//!
//! For the catenoid `(a, b) = (r, x_n)` and ν points away from the axis at the
//! waist. For a Simons leaf `(a, b) = (x, y)` on the side `x > y` and ν points
//! away from the cone.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{fit_power_law, gl20};

/// Tolerance for the profile-equation residual of a catenoid.
pub const PROFILE_TOL: f64 = 1e-8;
/// Tolerance for the curvature-equation residual of a leaf (times `x₀`).
pub const LEAF_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Catenoids

/// One tabulated point of a catenoid profile `x_n = ω̄(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub r: f64,
    pub height: f64,
    /// `ω̄'(r)`; infinite at the waist.
    pub slope: f64,
    pub arc: f64,
    /// Regularizing parameter with `(r/r₀)^{n-2} = cosh u`.
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatenoidProfile {
    pub n: usize,
    pub eps: f64,
    pub waist: f64,
    pub samples: Vec<ProfileSample>,
    /// Limit height `c_n` and coefficient `c_n'` of `c_n - c_n' r^{3-n}`; `n ≥ 4`.
    pub c_n: Option<f64>,
    pub c_n_prime: Option<f64>,
    pub residual_max: f64,
}

impl CatenoidProfile {
    fn m(&self) -> f64 {
        (self.n - 2) as f64
    }

    fn r_of_u(&self, u: f64) -> f64 {
        self.waist * u.cosh().powf(1.0 / self.m())
    }

    fn u_of_r(&self, r: f64) -> f64 {
        ((r / self.waist).powf(self.m())).max(1.0).acosh()
    }

    // dl/du and dz/du
    fn dl_du(&self, u: f64) -> f64 {
        self.waist / self.m() * u.cosh().powf(1.0 / self.m())
    }

    fn dz_du(&self, u: f64) -> f64 {
        self.waist / self.m() * u.cosh().powf(1.0 / self.m() - 1.0)
    }

    fn nearest_sample(&self, u: f64) -> &ProfileSample {
        let idx = self.samples.partition_point(|s| s.u <= u.abs());
        &self.samples[idx.saturating_sub(1)]
    }

    fn integrate_u(&self, f: impl Fn(f64) -> f64, from: f64, to: f64) -> f64 {
        let panels = ((to - from).abs() / 0.25).ceil().max(1.0) as usize;
        let h = (to - from) / panels as f64;
        (0..panels).map(|k| gl20().integrate(from + h * k as f64, from + h * (k + 1) as f64, &f)).sum()
    }

    /// Height `z(u)`, odd in `u`.
    fn z_of_u(&self, u: f64) -> f64 {
        let s = self.nearest_sample(u);
        let v = s.height + self.integrate_u(|x| self.dz_du(x), s.u, u.abs());
        v.copysign(u)
    }

    /// Arc length from the waist, odd in `u`.
    fn l_of_u(&self, u: f64) -> f64 {
        let s = self.nearest_sample(u);
        let v = s.arc + self.integrate_u(|x| self.dl_du(x), s.u, u.abs());
        v.copysign(u)
    }

    pub fn r_max(&self) -> f64 {
        self.samples.last().unwrap().r
    }

    pub fn l_max(&self) -> f64 {
        self.samples.last().unwrap().arc
    }

    /// `ω̄_ε(r)` for `r₀ ≤ r ≤ r_max`.
    pub fn height(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.z_of_u(self.u_of_r(r)))
    }

    /// `ω̄_ε'(r)`.
    pub fn slope(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let q = (r / self.waist).powf(self.m());
        Ok(if q <= 1.0 { f64::INFINITY } else { 1.0 / (q * q - 1.0).sqrt() })
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if r < self.waist * (1.0 - 1e-14) || r > self.r_max() * (1.0 + 1e-14) {
            return Err(Error::OutOfRange { value: r, min: self.waist, max: self.r_max() });
        }
        Ok(())
    }

    /// Radius at height `z` (inverse of `ω̄_ε` on the upper half).
    pub fn radius_at_height(&self, z: f64) -> Result<f64> {
        let zmax = self.samples.last().unwrap().height;
        if !(0.0..=zmax * (1.0 + 1e-14)).contains(&z) {
            return Err(Error::OutOfRange { value: z, min: 0.0, max: zmax });
        }
        let u = self.newton_u(z, |p, u| p.z_of_u(u), |p, u| p.dz_du(u))?;
        Ok(self.r_of_u(u))
    }

    fn newton_u(
        &self,
        target: f64,
        f: impl Fn(&Self, f64) -> f64,
        df: impl Fn(&Self, f64) -> f64,
    ) -> Result<f64> {
        // bracket from the table, then Newton
        let key = |s: &ProfileSample| f(self, s.u);
        let idx = self.samples.partition_point(|s| key(s) <= target);
        let lo = self.samples[idx.saturating_sub(1)].u;
        let hi = self.samples[idx.min(self.samples.len() - 1)].u;
        let mut u = 0.5 * (lo + hi);
        for _ in 0..60 {
            let step = (f(self, u) - target) / df(self, u);
            u = (u - step).clamp(lo, hi.max(lo));
            if step.abs() < 1e-15 * (1.0 + u.abs()) {
                return Ok(u);
            }
        }
        Err(Error::Integration { r: self.r_of_u(u) })
    }

    /// Parameter `u` at signed arc length `l`.
    pub fn u_at_arc(&self, l: f64) -> Result<f64> {
        let lmax = self.l_max();
        if l.abs() > lmax * (1.0 + 1e-14) {
            return Err(Error::OutOfRange { value: l, min: -lmax, max: lmax });
        }
        if self.n == 3 {
            return Ok((l / self.waist).asinh());
        }
        let u = self.newton_u(l.abs(), |p, u| p.l_of_u(u), |p, u| p.dl_du(u))?;
        Ok(u.copysign(l))
    }

    /// Radius at arc length `l`.
    pub fn radius_at_arc(&self, l: f64) -> Result<f64> {
        Ok(self.r_of_u(self.u_at_arc(l)?))
    }

    /// Arc length from the waist to radius `r`.
    pub fn arc_at_radius(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        Ok(self.l_of_u(self.u_of_r(r)))
    }

    /// Mean-curvature residual `r·(κ + (n-2) sin θ / r)` of the profile curve,
    /// from finite differences of independently integrated heights.
    pub fn ode_residual_at(&self, u: f64) -> f64 {
        let d = 1e-3 * (1.0 + u.abs());
        let z: Vec<f64> = (-2..=2).map(|j| self.z_of_u(u + j as f64 * d)).collect();
        let r: Vec<f64> = (-2..=2).map(|j| self.r_of_u(u + j as f64 * d)).collect();
        let d1 = |v: &[f64]| (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * d);
        let d2 = |v: &[f64]| (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * d * d);
        let (zu, zuu, ru, ruu) = (d1(&z), d2(&z), d1(&r), d2(&r));
        let speed = ru.hypot(zu);
        let kappa = (ru * zuu - zu * ruu) / speed.powi(3);
        r[2] * kappa + self.m() * zu / speed
    }
}

/// Integrates the catenoid profile from the first integral
/// `ω̄'(r) = r₀^{n-2} / √(r^{2(n-2)} - r₀^{2(n-2)})`, `r₀ = 1/ε`.
///
/// The substitution `(r/r₀)^{n-2} = cosh u` turns `dl` and `dx_n` into smooth
/// integrands, so the waist needs no special treatment.
pub fn integrate_catenoid_profile(n: usize, eps: f64, r_max: f64, step: f64) -> Result<CatenoidProfile> {
    if n < 3 {
        return Err(invalid("n", "dimension must be at least 3"));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if !(step > 0.0) {
        return Err(invalid("step", "must be positive"));
    }
    let waist = 1.0 / eps;
    if !(r_max > waist) {
        return Err(invalid("r_max", format!("must exceed the waist radius {waist}")));
    }
    let count = ((r_max - waist) / step).ceil() as usize + 1;
    let mut profile = CatenoidProfile {
        n,
        eps,
        waist,
        samples: Vec::with_capacity(count),
        c_n: None,
        c_n_prime: None,
        residual_max: 0.0,
    };
    let mut prev = ProfileSample { r: waist, height: 0.0, slope: f64::INFINITY, arc: 0.0, u: 0.0 };
    profile.samples.push(prev);
    for i in 1..count {
        let r = if i == count - 1 { r_max } else { waist + step * i as f64 };
        let u = profile.u_of_r(r);
        let height = prev.height + profile.integrate_u(|x| profile.dz_du(x), prev.u, u);
        let arc = prev.arc + profile.integrate_u(|x| profile.dl_du(x), prev.u, u);
        if !(height.is_finite() && arc.is_finite()) || arc <= prev.arc {
            return Err(Error::Integration { r });
        }
        let q = (r / waist).powf(profile.m());
        prev = ProfileSample { r, height, slope: 1.0 / (q * q - 1.0).sqrt(), arc, u };
        profile.samples.push(prev);
    }

    let mut worst = 0.0_f64;
    for s in &profile.samples[..profile.samples.len() - 1] {
        let res = profile.ode_residual_at(s.u).abs();
        if !(res <= PROFILE_TOL) {
            return Err(Error::Integration { r: s.r });
        }
        worst = worst.max(res);
    }
    profile.residual_max = worst;

    if n >= 4 {
        let m = profile.m();
        let alpha = 1.0 / m - 1.0;
        // ∫₀^∞ cosh^α; tail beyond U from cosh u ≈ e^u/2 with a second-order term
        let big_u = 40.0 / alpha.abs();
        let head = profile.integrate_u(|x| x.cosh().powf(alpha), 0.0, big_u);
        let tail = 2f64.powf(-alpha) * (alpha * big_u).exp() / (-alpha)
            + alpha * 2f64.powf(-alpha) * ((alpha - 2.0) * big_u).exp() / (2.0 - alpha);
        profile.c_n = Some(waist / m * (head + tail));
        profile.c_n_prime = Some(waist.powf(m) / (n as f64 - 3.0));
    }
    Ok(profile)
}

/// Monotone map `l(r)` with inverse, backed by the profile quadrature.
#[derive(Clone, Debug)]
pub struct ArcTable<'a> {
    profile: &'a CatenoidProfile,
    pub r: Vec<f64>,
    pub l: Vec<f64>,
}

impl ArcTable<'_> {
    pub fn l_of_r(&self, r: f64) -> Result<f64> {
        self.profile.arc_at_radius(r)
    }

    pub fn r_of_l(&self, l: f64) -> Result<f64> {
        self.profile.radius_at_arc(l)
    }
}

pub fn arc_length_table(profile: &CatenoidProfile) -> ArcTable<'_> {
    ArcTable {
        profile,
        r: profile.samples.iter().map(|s| s.r).collect(),
        l: profile.samples.iter().map(|s| s.arc).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvatures {
    pub k: Vec<f64>,
    pub a2: f64,
}

impl Curvatures {
    fn from_list(k: Vec<f64>) -> Self {
        let a2 = k.iter().map(|x| x * x).sum();
        Self { k, a2 }
    }

    pub fn sum(&self) -> f64 {
        self.k.iter().sum()
    }
}

/// Principal curvatures of the catenoid at signed arc length `l`.
pub fn catenoid_curvatures(profile: &CatenoidProfile, l: f64) -> Result<Curvatures> {
    let p = catenoid_point(profile, l)?;
    Ok(p.curvatures())
}

fn catenoid_point(profile: &CatenoidProfile, l: f64) -> Result<ChartPoint> {
    let u = profile.u_at_arc(l)?;
    let r = profile.r_of_u(u);
    let z = profile.z_of_u(u);
    let m = profile.m();
    // cos θ = tanh u, sin θ = sech u along the profile
    let (cos_t, sin_t) = (u.tanh(), 1.0 / u.cosh());
    let theta = sin_t.atan2(cos_t);
    let dtheta = -m * sin_t / r;
    let d2theta = -m * cos_t * (dtheta * r - sin_t) / (r * r);
    Ok(ChartPoint { l, a: r, b: z, theta, dtheta, d2theta, p: profile.n - 2, q: 0 })
}

// ---------------------------------------------------------------------------
// Simons cone foliation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Leaf in `{x > y}`, meeting the axis `y = 0`.
    Plus,
    /// Mirror image in `{y > x}`.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafSample {
    pub sigma: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// Generating curve of a leaf, stored for the `Plus` orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationLeaf {
    pub side: Side,
    pub axis_foot: f64,
    pub step: f64,
    /// Arc length at which the series start hands over to integration.
    pub start_sigma: f64,
    pub curve: Vec<LeafSample>,
    pub decay_fit: Option<DecayFit>,
    pub residual_max: f64,
}

/// `θ' = 3 cos θ / y - 3 sin θ / x`: weighted geodesics of `x³y³ ds`.
#[inline]
fn leaf_rhs(x: f64, y: f64, theta: f64) -> f64 {
    3.0 * theta.cos() / y - 3.0 * theta.sin() / x
}

/// Graph form of the leaf equation, `y = φ(x)`: returns
/// `d/dx[x³φ³φ'/√(1+φ'²)] - 3x³φ²√(1+φ'²)`.
pub fn simons_graph_residual(x: f64, phi: f64, dphi: f64, d2phi: f64) -> f64 {
    let w = (1.0 + dphi * dphi).sqrt();
    let lhs = (3.0 * x * x * phi.powi(3) + 3.0 * x.powi(3) * phi * phi * dphi) * dphi / w
        + x.powi(3) * phi.powi(3) * d2phi / w.powi(3);
    lhs - 3.0 * x.powi(3) * phi * phi * w
}

/// Shoots the leaf through `(x₀, 0)` using the axis series
/// `x(y) = x₀ + 3y²/(8x₀)` and RK4 in arc length up to radius `r_max`.
pub fn shoot_foliation_leaf(side: Side, x0: f64, step: f64, r_max: f64) -> Result<FoliationLeaf> {
    if !(x0 > 0.0) {
        return Err(invalid("x0", "axis foot must be positive"));
    }
    if !(step > 0.0) || !(r_max > x0) {
        return Err(invalid("step/r_max", "need step > 0 and r_max > x0"));
    }
    let h = step * x0;
    let y_start = 0.01 * x0;
    if h > 0.5 * y_start {
        return Err(Error::StartRegularization(format!(
            "step {step} too coarse for the axis series (needs <= {})",
            0.5 * y_start / x0
        )));
    }
    let x_start = x0 + 3.0 * y_start * y_start / (8.0 * x0);
    let slope = 3.0 * y_start / (4.0 * x0); // dx/dy
    let theta_start = 1.0_f64.atan2(slope);
    // arc length along the series from the axis
    let start_sigma = gl20().integrate(0.0, y_start, |y| (1.0 + (3.0 * y / (4.0 * x0)).powi(2)).sqrt());

    let mut curve = Vec::with_capacity(((r_max / h) * 1.2) as usize);
    // regularized start on the axis
    for j in 0..4 {
        let y = y_start * j as f64 / 4.0;
        let s = gl20().integrate(0.0, y, |v| (1.0 + (3.0 * v / (4.0 * x0)).powi(2)).sqrt());
        curve.push(LeafSample {
            sigma: s,
            x: x0 + 3.0 * y * y / (8.0 * x0),
            y,
            theta: 1.0_f64.atan2(3.0 * y / (4.0 * x0)),
        });
    }
    let mut state = [x_start, y_start, theta_start];
    let mut sigma = start_sigma;
    curve.push(LeafSample { sigma, x: state[0], y: state[1], theta: state[2] });
    let f = |s: &[f64; 3]| [s[2].cos(), s[2].sin(), leaf_rhs(s[0], s[1], s[2])];
    while state[0].hypot(state[1]) < r_max {
        let k1 = f(&state);
        let a = |k: &[f64; 3], c: f64| [state[0] + c * k[0], state[1] + c * k[1], state[2] + c * k[2]];
        let k2 = f(&a(&k1, 0.5 * h));
        let k3 = f(&a(&k2, 0.5 * h));
        let k4 = f(&a(&k3, h));
        for i in 0..3 {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        sigma += h;
        if !(state.iter().all(|v| v.is_finite())) || state[1] >= state[0] || state[1] <= 0.0 {
            return Err(Error::ConeCrossing { sigma });
        }
        curve.push(LeafSample { sigma, x: state[0], y: state[1], theta: state[2] });
    }

    let mut leaf =
        FoliationLeaf { side, axis_foot: x0, step, start_sigma, curve, decay_fit: None, residual_max: 0.0 };
    leaf.residual_max = leaf.max_residual();
    if !(leaf.residual_max <= LEAF_TOL) {
        return Err(Error::StartRegularization(format!("leaf residual {} exceeds tolerance", leaf.residual_max)));
    }
    leaf.decay_fit = leaf.fit_decay(10.0 * x0, 100.0 * x0);
    Ok(leaf)
}

impl FoliationLeaf {
    /// Curvature-equation residual from five-point differences of positions,
    /// scaled by `x₀`; skips the series start.
    pub fn max_residual(&self) -> f64 {
        let c = &self.curve;
        let h = self.step * self.axis_foot;
        let first = c.iter().position(|s| s.sigma >= self.start_sigma).unwrap_or(0) + 2;
        let mut worst = 0.0_f64;
        for i in first..c.len().saturating_sub(2) {
            let d1 = |f: &dyn Fn(&LeafSample) -> f64| {
                (f(&c[i - 2]) - 8.0 * f(&c[i - 1]) + 8.0 * f(&c[i + 1]) - f(&c[i + 2])) / (12.0 * h)
            };
            let d2 = |f: &dyn Fn(&LeafSample) -> f64| {
                (-f(&c[i - 2]) + 16.0 * f(&c[i - 1]) - 30.0 * f(&c[i]) + 16.0 * f(&c[i + 1]) - f(&c[i + 2]))
                    / (12.0 * h * h)
            };
            let (xp, yp) = (d1(&|s| s.x), d1(&|s| s.y));
            let (xpp, ypp) = (d2(&|s| s.x), d2(&|s| s.y));
            let speed2 = xp * xp + yp * yp;
            let kappa = (xp * ypp - yp * xpp) / speed2.powf(1.5);
            let theta = yp.atan2(xp);
            let res = (kappa - leaf_rhs(c[i].x, c[i].y, theta)) * self.axis_foot;
            worst = worst.max(res.abs());
        }
        worst
    }

    /// Fits `dist(leaf, cone) ≈ A r^p` over `r ∈ [r_min, r_max]`.
    pub fn fit_decay(&self, r_min: f64, r_max: f64) -> Option<DecayFit> {
        let (mut rs, mut ds) = (Vec::new(), Vec::new());
        for s in self.curve.iter().step_by(10) {
            let r = s.x.hypot(s.y);
            if r >= r_min && r <= r_max {
                rs.push(r);
                ds.push((s.x - s.y) * FRAC_1_SQRT_2);
            }
        }
        if rs.len() < 5 {
            return None;
        }
        let (amplitude, exponent) = fit_power_law(&rs, &ds);
        Some(DecayFit { amplitude, exponent, r_min, r_max })
    }

    pub fn sigma_max(&self) -> f64 {
        self.curve.last().unwrap().sigma
    }

    /// `(x, y, θ)` at arc length σ in the `Plus` orientation, by cubic Hermite
    /// interpolation of positions and angle.
    pub fn state_at(&self, sigma: f64) -> Result<(f64, f64, f64)> {
        let c = &self.curve;
        if sigma < 0.0 || sigma > self.sigma_max() {
            return Err(Error::OutOfRange { value: sigma, min: 0.0, max: self.sigma_max() });
        }
        let i = c.partition_point(|s| s.sigma <= sigma).clamp(1, c.len() - 1) - 1;
        let (s0, s1) = (&c[i], &c[i + 1]);
        let h = s1.sigma - s0.sigma;
        let t = (sigma - s0.sigma) / h;
        let (h00, h10, h01, h11) = (
            2.0 * t.powi(3) - 3.0 * t * t + 1.0,
            t.powi(3) - 2.0 * t * t + t,
            -2.0 * t.powi(3) + 3.0 * t * t,
            t.powi(3) - t * t,
        );
        let herm = |v0: f64, d0: f64, v1: f64, d1: f64| h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1;
        let x = herm(s0.x, s0.theta.cos(), s1.x, s1.theta.cos());
        let y = herm(s0.y, s0.theta.sin(), s1.y, s1.theta.sin());
        let dth = |s: &LeafSample| if s.y > 0.0 { leaf_rhs(s.x, s.y, s.theta) } else { -0.75 / self.axis_foot };
        let theta = herm(s0.theta, dth(s0), s1.theta, dth(s1));
        Ok((x, y, theta))
    }

    /// The leaf of `δ⁻¹ S`, i.e. every point scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> FoliationLeaf {
        let mut out = self.clone();
        out.axis_foot *= factor;
        out.step = self.step;
        out.start_sigma *= factor;
        for s in &mut out.curve {
            s.sigma *= factor;
            s.x *= factor;
            s.y *= factor;
        }
        out.decay_fit = out.fit_decay(10.0 * out.axis_foot, 100.0 * out.axis_foot);
        out
    }

    /// Position in the quarter-plane for this leaf's side.
    pub fn oriented(&self, x: f64, y: f64) -> (f64, f64) {
        match self.side {
            Side::Plus => (x, y),
            Side::Minus => (y, x),
        }
    }

    /// Signed distance from `(x, y)` to the leaf curve, positive in the
    /// direction of ν (away from the cone), and the foot arc length.
    pub fn signed_distance(&self, x: f64, y: f64) -> (f64, f64) {
        let (px, py) = self.oriented(x, y);
        let c = &self.curve;
        // coarse search then local refinement on the segment
        let stride = 16usize;
        let mut best = (f64::INFINITY, 0usize);
        for (i, s) in c.iter().enumerate().step_by(stride) {
            let d = (s.x - px).hypot(s.y - py);
            if d < best.0 {
                best = (d, i);
            }
        }
        let lo = best.1.saturating_sub(stride);
        let hi = (best.1 + stride).min(c.len() - 1);
        for i in lo..=hi {
            let d = (c[i].x - px).hypot(c[i].y - py);
            if d < best.0 {
                best = (d, i);
            }
        }
        let i = best.1;
        let s = &c[i];
        let (tx, ty) = (s.theta.cos(), s.theta.sin());
        let along = (px - s.x) * tx + (py - s.y) * ty;
        let sigma = (s.sigma + along).clamp(0.0, self.sigma_max());
        let (fx, fy, th) = self.state_at(sigma).unwrap_or((s.x, s.y, s.theta));
        // normal ν = (sin θ, -cos θ)
        let dist = (px - fx) * th.sin() - (py - fy) * th.cos();
        // points beyond the axis foot are measured to the foot itself
        if sigma <= 0.0 {
            return ((px - c[0].x).hypot(py).copysign(px - c[0].x), 0.0);
        }
        (dist, sigma)
    }
}

/// `|A|²` and curvatures of the exact cone `y = x` at distance `r` from the vertex.
pub fn cone_curvatures(r: f64) -> Curvatures {
    ChartPoint::cone(r).curvatures()
}

/// Principal curvatures of a leaf at arc length `l`.
pub fn simons_curvatures(leaf: &FoliationLeaf, l: f64) -> Result<Curvatures> {
    Ok(leaf_point(leaf, l)?.curvatures())
}

fn leaf_point(leaf: &FoliationLeaf, l: f64) -> Result<ChartPoint> {
    let (x, y, theta) = leaf.state_at(l)?;
    let (dtheta, d2theta) = if y > 1e-12 * leaf.axis_foot {
        let dt = leaf_rhs(x, y, theta);
        let (c, s) = (theta.cos(), theta.sin());
        let d2 = -3.0 * s * dt / y - 3.0 * c * s / (y * y) - 3.0 * c * dt / x + 3.0 * s * c / (x * x);
        (dt, d2)
    } else {
        // on the axis: θ' = -3/(4x₀) from the series, θ'' = 0 by symmetry
        (-3.0 / (4.0 * leaf.axis_foot), 0.0)
    };
    Ok(ChartPoint { l, a: x, b: y, theta, dtheta, d2theta, p: 3, q: 3 })
}

// ---------------------------------------------------------------------------
// Parallel surfaces

/// `H_{Γ_s} = Σ kᵢ/(1 - s kᵢ)`.
pub fn mean_curvature_parallel(k: &[f64], s: f64) -> Result<f64> {
    let mut h = 0.0;
    for (index, ki) in k.iter().enumerate() {
        let product = (s * ki).abs();
        if product >= 1.0 {
            return Err(Error::Focal { index, product });
        }
        h += ki / (1.0 - s * ki);
    }
    Ok(h)
}

/// `s|A|² + Σ s²kᵢ³/(1 - s kᵢ)`, equal to `H_{Γ_s}` when `Σkᵢ = 0`.
pub fn mean_curvature_expansion(k: &[f64], s: f64) -> f64 {
    let a2: f64 = k.iter().map(|x| x * x).sum();
    s * a2 + k.iter().map(|x| s * s * x.powi(3) / (1.0 - s * x)).sum::<f64>()
}

/// `Π(1 - s kᵢ)`, the ratio of area elements of `Γ_s` and `Γ_0`.
pub fn area_element_ratio(k: &[f64], s: f64) -> f64 {
    k.iter().map(|x| 1.0 - s * x).product()
}

// ---------------------------------------------------------------------------
// Charts

/// Local data of a generating curve at arc length `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub dtheta: f64,
    pub d2theta: f64,
    pub p: usize,
    pub q: usize,
}

impl ChartPoint {
    fn cone(r: f64) -> Self {
        Self { l: r, a: r * FRAC_1_SQRT_2, b: r * FRAC_1_SQRT_2, theta: FRAC_PI_4, dtheta: 0.0, d2theta: 0.0, p: 3, q: 3 }
    }

    pub fn profile_curvature(&self) -> f64 {
        -self.dtheta
    }

    pub fn curvatures(&self) -> Curvatures {
        let mut k = Vec::with_capacity(1 + self.p + self.q);
        k.push(-self.dtheta);
        let ka = if self.a > 0.0 { -self.theta.sin() / self.a } else { 0.0 };
        // on the axis cos θ / b → -θ'
        let kb = if self.b > 0.0 { self.theta.cos() / self.b } else { -self.dtheta };
        k.extend(std::iter::repeat(ka).take(self.p));
        if self.q > 0 {
            k.extend(std::iter::repeat(kb).take(self.q));
        }
        Curvatures::from_list(k)
    }

    /// Normal in the meridian plane.
    pub fn normal(&self) -> (f64, f64) {
        (self.theta.sin(), -self.theta.cos())
    }

    /// `𝔤^{11}(l, s) = (1 - s κ)^{-2}` with κ the profile curvature.
    pub fn g11(&self, s: f64) -> f64 {
        (1.0 - s * self.profile_curvature()).powi(-2)
    }

    /// First-order coefficient `a₁(l, s)` of the radial Laplace–Beltrami
    /// operator of `Γ_s`, and the metric coefficient `𝔤^{11}(l, s)`.
    pub fn laplacian_coefficients(&self, s: f64) -> Result<(f64, f64)> {
        let kp = self.profile_curvature();
        let focal = 1.0 - s * kp;
        if focal <= 0.0 {
            return Err(Error::Focal { index: 0, product: (s * kp).abs() });
        }
        let (sin_t, cos_t) = (self.theta.sin(), self.theta.cos());
        let a_s = self.a + s * sin_t;
        let b_s = self.b - s * cos_t;
        let dkp = -self.d2theta;
        let g11 = focal.powi(-2);
        let mut drift = s * dkp / focal;
        if self.p > 0 {
            if a_s <= 0.0 {
                return Err(Error::Focal { index: 1, product: (s * sin_t / self.a).abs() });
            }
            drift += self.p as f64 * cos_t * focal / a_s;
        }
        if self.q > 0 {
            if b_s <= 0.0 {
                return Err(Error::Focal { index: 1 + self.p, product: (s * cos_t / self.b).abs() });
            }
            drift += self.q as f64 * sin_t * focal / b_s;
        }
        Ok((g11 * drift, g11))
    }

    /// Point at signed distance `s` along the normal, in the meridian plane.
    pub fn offset(&self, s: f64) -> (f64, f64) {
        let (na, nb) = self.normal();
        (self.a + s * na, self.b + s * nb)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    SimonsLeaf,
    Catenoid,
    /// Exact cone `y = x`, parametrized by distance to the vertex.
    Cone,
    /// Flat ℝ^d in polar form; all curvatures vanish.
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Source {
    Leaf(FoliationLeaf),
    Catenoid(CatenoidProfile),
    Cone,
    Flat { dim: usize },
}

/// Radial chart `l ↦` Fermi data of a base minimal surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceChart {
    pub kind: ChartKind,
    pub l_min: f64,
    pub l_max: f64,
    source: Source,
}

impl SurfaceChart {
    pub fn leaf(leaf: FoliationLeaf) -> Self {
        let l_max = leaf.sigma_max();
        Self { kind: ChartKind::SimonsLeaf, l_min: 0.0, l_max, source: Source::Leaf(leaf) }
    }

    pub fn catenoid(profile: CatenoidProfile) -> Self {
        let l_max = profile.l_max();
        Self { kind: ChartKind::Catenoid, l_min: -l_max, l_max, source: Source::Catenoid(profile) }
    }

    pub fn cone(r_min: f64, r_max: f64) -> Self {
        Self { kind: ChartKind::Cone, l_min: r_min, l_max: r_max, source: Source::Cone }
    }

    pub fn flat(dim: usize, l_max: f64) -> Self {
        Self { kind: ChartKind::Flat, l_min: 0.0, l_max, source: Source::Flat { dim } }
    }

    /// Catenoid profile, if this chart is a catenoid.
    pub fn catenoid_profile(&self) -> Option<&CatenoidProfile> {
        match &self.source {
            Source::Catenoid(p) => Some(p),
            _ => None,
        }
    }

    pub fn leaf_curve(&self) -> Option<&FoliationLeaf> {
        match &self.source {
            Source::Leaf(l) => Some(l),
            _ => None,
        }
    }

    /// Dimension of the base surface.
    pub fn surface_dim(&self) -> usize {
        match &self.source {
            Source::Leaf(_) | Source::Cone => 7,
            Source::Catenoid(p) => p.n - 1,
            Source::Flat { dim } => *dim,
        }
    }

    /// For charts through a collapsing sphere at `l = 0` the drift behaves
    /// like `c/l`; returns `c`.
    pub fn origin_drift(&self) -> Option<f64> {
        match &self.source {
            Source::Leaf(_) => Some(3.0),
            Source::Flat { dim } if *dim > 1 => Some((*dim - 1) as f64),
            _ => None,
        }
    }

    pub fn point(&self, l: f64) -> Result<ChartPoint> {
        if l < self.l_min - 1e-12 || l > self.l_max + 1e-12 {
            return Err(Error::OutOfRange { value: l, min: self.l_min, max: self.l_max });
        }
        match &self.source {
            Source::Leaf(leaf) => leaf_point(leaf, l.clamp(0.0, self.l_max)),
            Source::Catenoid(p) => catenoid_point(p, l.clamp(-self.l_max, self.l_max)),
            Source::Cone => Ok(ChartPoint::cone(l)),
            Source::Flat { dim } => {
                Ok(ChartPoint { l, a: l, b: 0.0, theta: 0.0, dtheta: 0.0, d2theta: 0.0, p: dim - 1, q: 0 })
            }
        }
    }

    pub fn curvatures(&self, l: f64) -> Result<Curvatures> {
        Ok(self.point(l)?.curvatures())
    }

    pub fn laplacian_coefficients(&self, l: f64, s: f64) -> Result<(f64, f64)> {
        let p = self.point(l)?;
        if let (Some(_), true) = (self.origin_drift(), l.abs() < 1e-12) {
            // drift singular at the collapsing sphere; solvers use the limit
            return Ok((0.0, p.g11(s)));
        }
        p.laplacian_coefficients(s)
    }

    /// Inverse Fermi map in the meridian plane: `(a, b) ↦ (l, s)`.
    pub fn meridian_to_fermi(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        match &self.source {
            Source::Leaf(leaf) => {
                let (_, l) = leaf.signed_distance(a, b);
                self.refine_foot(a, b, l)
            }
            Source::Catenoid(p) => {
                // start from the radius-matched arc on the correct half
                let l0 = if a < 1.5 * p.waist { b } else { p.arc_at_radius(a.min(p.r_max()))?.copysign(b) };
                self.refine_foot(a, b, l0.clamp(self.l_min, self.l_max))
            }
            Source::Cone => {
                let l = (a + b) * FRAC_1_SQRT_2;
                Ok((l, (a - b) * FRAC_1_SQRT_2))
            }
            Source::Flat { .. } => Ok((a, -b)),
        }
    }

    fn refine_foot(&self, a: f64, b: f64, mut l: f64) -> Result<(f64, f64)> {
        // Newton on g(l) = (X - P(l))·T(l); T' = -θ' ν gives g' = -1 - sθ'
        for _ in 0..50 {
            let p = self.point(l.clamp(self.l_min, self.l_max))?;
            let (t_a, t_b) = (p.theta.cos(), p.theta.sin());
            let (da, db) = (a - p.a, b - p.b);
            let g = da * t_a + db * t_b;
            let (n_a, n_b) = p.normal();
            let s = da * n_a + db * n_b;
            let dg = -1.0 - s * p.dtheta;
            if dg >= -1e-3 {
                return Err(Error::Focal { index: 0, product: (s * p.dtheta).abs() });
            }
            let step = -g / dg;
            l = (l + step).clamp(self.l_min, self.l_max);
            if step.abs() < 1e-14 * (1.0 + l.abs()) {
                break;
            }
        }
        let p = self.point(l)?;
        let (n_a, n_b) = p.normal();
        Ok((l, (a - p.a) * n_a + (b - p.b) * n_b))
    }
}

/// Sampled chart on a uniform grid, used by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartTable {
    pub l: Vec<f64>,
    pub points: Vec<ChartPoint>,
    pub a2: Vec<f64>,
    pub origin_drift: Option<f64>,
}

impl ChartTable {
    pub fn new(chart: &SurfaceChart, l: &[f64]) -> Result<Self> {
        let points = l.iter().map(|x| chart.point(*x)).collect::<Result<Vec<_>>>()?;
        let a2 = points.iter().map(|p| p.curvatures().a2).collect();
        Ok(Self { l: l.to_vec(), points, a2, origin_drift: chart.origin_drift() })
    }

    /// `(a₁, 𝔤^{11})` at grid index `j` and offset `s`; zero drift at a
    /// collapsing-sphere origin.
    pub fn coefficients(&self, j: usize, s: f64) -> Result<(f64, f64)> {
        let p = &self.points[j];
        if self.origin_drift.is_some() && self.l[j].abs() < 1e-12 {
            return Ok((0.0, p.g11(s)));
        }
        p.laplacian_coefficients(s)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_profile_is_arccosh() {
        let p = integrate_catenoid_profile(3, 1.0, 5.0, 0.01).unwrap();
        for r in [1.0, 1.5, 3.0, 5.0] {
            assert!((p.height(r).unwrap() - r.acosh()).abs() < 1e-12);
            assert!((p.arc_at_radius(r).unwrap() - (r * r - 1.0).sqrt()).abs() < 1e-12);
        }
        assert!((p.height(1.0_f64.cosh()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waist_curvature_of_unit_catenoid() {
        let p = integrate_catenoid_profile(3, 1.0, 4.0, 0.05).unwrap();
        let c = catenoid_curvatures(&p, 0.0).unwrap();
        assert!((c.a2 - 2.0).abs() < 1e-12);
        assert!(c.sum().abs() < 1e-14);
    }

    #[test]
    fn cone_has_expected_curvatures() {
        let c = cone_curvatures(3.0);
        assert!((c.a2 - 6.0 / 9.0).abs() < 1e-14);
        let x = 3.0 * FRAC_1_SQRT_2;
        assert!(c.k[0].abs() < 1e-15);
        assert!((c.k[1] + 1.0 / (x * 2f64.sqrt())).abs() < 1e-15);
        assert!((c.k[4] - 1.0 / (x * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn cone_satisfies_graph_equation() {
        for x in [0.5, 1.0, 7.0] {
            assert!(simons_graph_residual(x, x, 1.0, 0.0).abs() < 1e-12 * x.powi(5));
        }
    }

    #[test]
    fn focal_violation_is_reported() {
        assert!(matches!(mean_curvature_parallel(&[0.5, -0.5], 2.0), Err(Error::Focal { index: 0, .. })));
    }
}
