use std::f64::consts::PI;

use fbp_core::geometry::{integrate_catenoid_profile, shoot_foliation_leaf, Side, SurfaceChart};
use fbp_core::kernels::{apply_multiplier, frequency_grid, halfspace_pv_operator, k_coth_k, PvOptions, TransformDim};
use fbp_core::numerics::{linspace, solve_tridiagonal, sup_abs};
use fbp_core::reduced_solver::*;
use fbp_core::Error;
use proptest::prelude::*;

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let q = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| a * (q * i as f64).exp()).collect()
}

fn rel_sup(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sup_abs(&d) / sup_abs(b)
}

#[test]
fn cone_power_law_is_inverted() {
    let r = geometric(1.0, 200.0, 8000);
    let rhs: Vec<f64> = r.iter().map(|x| x.powf(-4.5)).collect();
    let op = RadialOperator::cone(&r).unwrap();
    let sol = invert_jacobi_radial(&op, &rhs, 2.5).unwrap();
    for (x, e) in r.iter().zip(&sol.eta) {
        if (2.0..=100.0).contains(x) {
            let exact = -4.0 * x.powf(-2.5);
            assert!(((e - exact) / exact).abs() < 1e-4, "r={x}: {e} vs {exact}");
        }
    }
    assert!(sol.residual < 1e-6 * sup_abs(&rhs));
}

#[test]
fn zero_rhs_gives_zero() {
    let r = geometric(1.0, 50.0, 200);
    let op = RadialOperator::cone(&r).unwrap();
    let sol = invert_jacobi_radial(&op, &vec![0.0; r.len()], 2.25).unwrap();
    assert_eq!(sup_abs(&sol.eta), 0.0);
}

#[test]
fn slow_rhs_is_rejected() {
    let r = geometric(1.0, 200.0, 400);
    let rhs: Vec<f64> = r.iter().map(|x| x.powf(-3.0)).collect();
    let op = RadialOperator::cone(&r).unwrap();
    assert!(matches!(invert_jacobi_radial(&op, &rhs, 2.5), Err(Error::SlowDecay { .. })));
}

#[test]
fn indicial_identity_on_cone() {
    let r = geometric(1.0, 100.0, 50);
    let op = RadialOperator::cone(&r).unwrap();
    for beta in [2.25, 2.5, 3.5, 4.0] {
        for (i, x) in r.iter().enumerate() {
            let v = x.powf(-beta);
            let j = beta * (beta + 1.0) * v / (x * x) - op.drift[i] * beta * v / x + op.potential[i] * v;
            let want = (beta - 2.0) * (beta - 3.0) * x.powf(-beta - 2.0);
            assert!((j - want).abs() <= 1e-8 * want.abs().max(x.powf(-beta - 2.0)));
            assert!((op.indicial(beta) - (beta - 2.0) * (beta - 3.0)).abs() < 1e-14);
        }
    }
}

/// Catenoid Jacobi solve against shooting: the even homogeneous solution and
/// the zero-data particular solution, combined to satisfy the far condition.
fn catenoid_oracle(n: usize) {
    let profile = integrate_catenoid_profile(n, 1.0, 60.0, 0.01).unwrap();
    let chart = SurfaceChart::catenoid(profile);
    let big_l = 12.0;
    let l = linspace(0.0, big_l, 24001);
    let op = RadialOperator::from_chart(&chart, &l).unwrap();
    let bump = |x: f64| if x < 3.0 { (-(x * x)).exp() * (1.0 - x / 3.0).powi(4) } else { 0.0 };
    let rhs: Vec<f64> = l.iter().map(|x| bump(*x)).collect();
    let sol = invert_jacobi_radial(&op, &rhs, 0.0).unwrap();

    let coeff = |x: f64| {
        let drift = chart.laplacian_coefficients(x, 0.0).unwrap().0;
        (drift, chart.curvatures(x).unwrap().a2)
    };
    let shoot = |y0: [f64; 2], src: &dyn Fn(f64) -> f64| {
        let h = 2.5e-4;
        let steps = (big_l / h).round() as usize;
        let f = |x: f64, y: [f64; 2]| {
            let (a, v) = coeff(x);
            [y[1], src(x) - a * y[1] - v * y[0]]
        };
        let mut y = y0;
        for i in 0..steps {
            let x = i as f64 * h;
            let k1 = f(x, y);
            let k2 = f(x + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(x + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        y
    };
    let u = shoot([1.0, 0.0], &|_| 0.0);
    let p = shoot([0.0, 0.0], &bump);
    // far condition η' + (μ/L)η = 0
    let mu = (n - 3) as f64;
    let c = -(p[1] + mu / big_l * p[0]) / (u[1] + mu / big_l * u[0]);
    let want = (p[0] + c * u[0]) * big_l.powf(mu);
    let got = sol.deficiency_coeff.unwrap();
    assert!(((got - want) / want).abs() < 1e-6, "n={n}: {got} vs {want}");
}

#[test]
fn catenoid_deficiency_matches_variation_of_parameters() {
    catenoid_oracle(3);
    catenoid_oracle(4);
}

fn simons_chart(eps: f64, big_l: f64) -> SurfaceChart {
    let leaf = shoot_foliation_leaf(Side::Plus, 1.0 / eps, 1e-3, 1.2 * big_l).unwrap();
    SurfaceChart::leaf(leaf)
}

#[test]
fn solve_g_matches_singular_integral_path() {
    let chart = simons_chart(0.2, 40.0);
    let l = linspace(0.0, 40.0, 1601);
    let op = RadialOperator::from_chart(&chart, &l).unwrap();
    let cfg = SpectralConfig::for_chart(chart.kind);
    let bump = |x: f64| (-(x * x) / 4.0).exp();
    let gamma: Vec<f64> = l.iter().map(|x| bump(*x)).collect();
    let spectral = solve_g(&op, &gamma, &cfg, 2.25).unwrap();

    let pv = halfspace_pv_operator(bump, &l, PvOptions { support: 14.0, ..PvOptions::default() }).unwrap();
    let xi = frequency_grid(&l, 1.0);
    let (rem, _) = apply_multiplier(&l, &gamma, &xi, TransformDim::Four, |k| 0.5 * (k_coth_k(k) - k)).unwrap();
    let rhs: Vec<f64> = pv.iter().zip(&rem).map(|(p, r)| PI * p + r).collect();
    let other = invert_jacobi_radial(&op, &rhs, 2.25).unwrap();
    let err = rel_sup(&spectral.g.eta, &other.eta);
    assert!(err < 1e-2, "relative error {err}");
}

#[test]
fn zero_data_give_zero_heights() {
    let l = linspace(0.0, 20.0, 401);
    let cfg = SpectralConfig::for_chart(fbp_core::geometry::ChartKind::Catenoid);
    let zero = vec![0.0; l.len()];
    let out = solve_f(&l, &zero, &zero, &cfg).unwrap();
    assert_eq!(sup_abs(&out.f), 0.0);
    let chart = SurfaceChart::flat(4, 30.0);
    let op = RadialOperator::from_chart(&chart, &l).unwrap();
    assert_eq!(sup_abs(&solve_g(&op, &zero, &cfg, 2.25).unwrap().g.eta), 0.0);
}

#[test]
fn f_equals_f0_without_boundary_data() {
    let l = linspace(0.0, 20.0, 401);
    let a2: Vec<f64> = l.iter().map(|x| 6.0 / (1.0 + x * x)).collect();
    for form in [ReducedForm::SignConsistent, ReducedForm::AsPrinted] {
        let cfg = SpectralConfig { form, ..SpectralConfig::for_chart(fbp_core::geometry::ChartKind::SimonsLeaf) };
        let out = solve_f(&l, &vec![0.0; l.len()], &a2, &cfg).unwrap();
        assert_eq!(out.f, out.f0);
    }
}

/// Smooth truncation of the cone curvature `6/r²`.
fn truncated_cone_a2(r: f64) -> f64 {
    let cut = if r <= 10.0 {
        1.0
    } else if r >= 20.0 {
        0.0
    } else {
        let s = (r - 10.0) / 10.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    };
    6.0 / (1.0 + r * r) * cut
}

/// `f₀ = -Ψ(1)` for `∂_t²Ψ + ΔΨ = t|A|²`, odd in `t`, Neumann at `t = ±1`.
/// Expanding in `sin((m + ½)π t)` gives `f₀ = Σ 2/λ_m² (λ_m² - Δ)⁻¹ |A|²`,
/// each resolvent solved by finite differences in 4-D radial form.
fn f0_real_space(r: &[f64], a2: &[f64]) -> Vec<f64> {
    let n = r.len();
    let h = r[1] - r[0];
    let mut total = vec![0.0; n];
    let modes = 400;
    for m in 0..modes {
        let lam = (m as f64 + 0.5) * PI;
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 1..n - 1 {
            lo[i] = 1.0 / (h * h) - 1.5 / (r[i] * h);
            up[i] = 1.0 / (h * h) + 1.5 / (r[i] * h);
            di[i] = -2.0 / (h * h) - lam * lam;
        }
        di[0] = -8.0 / (h * h) - lam * lam;
        up[0] = 8.0 / (h * h);
        di[n - 1] = 1.0;
        let mut b: Vec<f64> = a2.iter().map(|v| -v).collect();
        b[n - 1] = 0.0;
        let v = solve_tridiagonal(&lo, &di, &up, &b).unwrap();
        for (t, vi) in total.iter_mut().zip(&v) {
            *t += 2.0 / (lam * lam) * vi;
        }
    }
    // Σ_{m ≥ M} 2/λ⁴ with the resolvent replaced by 1/λ²
    let tail: f64 = (modes..200_000).map(|m| 2.0 / ((m as f64 + 0.5) * PI).powi(4)).sum();
    total.iter().zip(a2).map(|(t, a)| t + tail * a).collect()
}

#[test]
fn f0_matches_real_space_neumann_problem() {
    let r = linspace(0.0, 30.0, 1501);
    let a2: Vec<f64> = r.iter().map(|x| truncated_cone_a2(*x)).collect();
    let cfg = SpectralConfig::for_chart(fbp_core::geometry::ChartKind::SimonsLeaf);
    let spectral = compute_f0(&r, &a2, &cfg).unwrap();
    let oracle = f0_real_space(&r, &a2);
    let err = rel_sup(&spectral, &oracle);
    assert!(err < 1e-2, "relative error {err}");
}

#[test]
fn printed_form_reports_notch_or_rejects() {
    let l = linspace(0.0, 30.0, 601);
    let a2: Vec<f64> = l.iter().map(|x| truncated_cone_a2(*x)).collect();
    let base = SpectralConfig::for_chart(fbp_core::geometry::ChartKind::SimonsLeaf);
    let notch = SpectralConfig { form: ReducedForm::AsPrinted, ..base };
    let out = solve_f(&l, &vec![0.0; l.len()], &a2, &notch).unwrap();
    let report = out.notch.expect("notch report");
    assert!((report.k_star - 1.915).abs() < 1e-3 && report.contribution.is_finite());
    let reject = SpectralConfig { policy: PolePolicy::Reject, ..notch };
    assert!(matches!(solve_f(&l, &vec![0.0; l.len()], &a2, &reject), Err(Error::UnresolvablePole { .. })));
}

#[test]
fn model_chart_correction_is_identity() {
    let l = linspace(0.0, 30.0, 601);
    let op = RadialOperator::from_chart(&SurfaceChart::flat(4, 40.0), &l).unwrap();
    let cfg = SpectralConfig::for_chart(fbp_core::geometry::ChartKind::Flat);
    let f: Vec<f64> = l.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
    let out = perturbation_correct(&f, &op, &cfg, 1e-12, 20).unwrap();
    assert_eq!(out.updates.len(), 1);
    assert!(rel_sup(&out.f, &f) < 1e-14);
}

#[test]
fn simons_correction_contracts() {
    let eps = 0.2;
    let big_l = 40.0 / eps;
    let chart = simons_chart(eps, big_l);
    let l = linspace(0.0, big_l, 801);
    let op = RadialOperator::from_chart(&chart, &l).unwrap();
    let cfg = SpectralConfig::for_chart(chart.kind);
    let f0 = compute_f0(&l, &op.potential, &cfg).unwrap();
    let out = perturbation_correct(&f0, &op, &cfg, 1e-12, 20).unwrap();
    println!("contraction factors {:?}", out.factors);
    assert!(!out.factors.is_empty());
    for q in &out.factors {
        assert!(*q <= 0.5, "factors {:?}", out.factors);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solves_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let l = linspace(0.0, 20.0, 401);
        let cfg = SpectralConfig::for_chart(fbp_core::geometry::ChartKind::Flat);
        let op = RadialOperator::from_chart(&SurfaceChart::flat(4, 20.0), &l).unwrap();
        let u: Vec<f64> = l.iter().map(|x| (-(x * x)).exp()).collect();
        let v: Vec<f64> = l.iter().map(|x| x * x * (-(x * x) / 2.0).exp()).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let zero = vec![0.0; l.len()];

        let f = |g: &[f64]| solve_f(&l, g, &zero, &cfg).unwrap().f;
        let (fu, fv, fw) = (f(&u), f(&v), f(&w));
        for i in 0..l.len() {
            prop_assert!((fw[i] - a * fu[i] - b * fv[i]).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        }
        let g = |x: &[f64]| solve_g(&op, x, &cfg, 2.25).unwrap().g.eta;
        let (gu, gv, gw) = (g(&u), g(&v), g(&w));
        let scale = 1.0 + sup_abs(&gu) + sup_abs(&gv);
        for i in 0..l.len() {
            prop_assert!((gw[i] - a * gu[i] - b * gv[i]).abs() < 1e-12 * scale * (1.0 + a.abs() + b.abs()));
        }

        let corr = |x: &[f64]| perturbation_correct(x, &op, &cfg, 0.0, 3).unwrap().f;
        let (cu, cv, cw) = (corr(&u), corr(&v), corr(&w));
        for i in 0..l.len() {
            prop_assert!((cw[i] - a * cu[i] - b * cv[i]).abs() < 1e-10 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn jacobi_round_trip(amp in 0.1f64..5.0, width in 0.5f64..3.0) {
        let r = geometric(1.0, 100.0, 600);
        let op = RadialOperator::cone(&r).unwrap();
        let rhs: Vec<f64> = r.iter().map(|x| amp * (-(x / width).powi(2)).exp() + x.powf(-5.0)).collect();
        let sol = invert_jacobi_radial(&op, &rhs, 2.25).unwrap();
        prop_assert!(sol.residual <= 1e-6 * sup_abs(&rhs));
    }
}
