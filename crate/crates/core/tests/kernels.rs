use std::f64::consts::PI;

use fbp_core::kernels::*;
use fbp_core::numerics::{linspace, sup_abs};
use proptest::prelude::*;

fn gaussian_grid(rmax: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let r = linspace(0.0, rmax, n);
    let v = r.iter().map(|x| (-PI * x * x).exp()).collect();
    (r, v)
}

#[test]
fn gaussian_is_self_dual_in_both_dimensions() {
    let (r, v) = gaussian_grid(6.0, 301);
    let xi = linspace(0.0, 3.0, 61);
    for dim in [TransformDim::One, TransformDim::Four] {
        let out = radial_fourier(&r, &v, &xi, dim, Direction::Forward).unwrap();
        assert!(out.truncation.is_none());
        for (x, f) in xi.iter().zip(&out.values) {
            assert!((f - (-PI * x * x).exp()).abs() < 1e-7, "{dim:?} xi={x} {f}");
        }
    }
}

#[test]
fn round_trip_on_compact_bump() {
    // C^∞ bump supported in [0, 3)
    let bump = |x: f64| if x < 3.0 { (-1.0 / (1.0 - (x / 3.0).powi(2))).exp() * std::f64::consts::E } else { 0.0 };
    let r = linspace(0.0, 5.0, 501);
    let v: Vec<f64> = r.iter().map(|x| bump(*x)).collect();
    let xi = linspace(0.0, 24.0, 2401);
    for dim in [TransformDim::One, TransformDim::Four] {
        let f = radial_fourier(&r, &v, &xi, dim, Direction::Forward).unwrap();
        let back = radial_fourier(&xi, &f.values, &r, dim, Direction::Inverse).unwrap();
        let err = r
            .iter()
            .zip(&back.values)
            .filter(|(x, _)| **x < 4.0)
            .map(|(x, b)| (b - bump(*x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{dim:?} round trip error {err}");
    }
}

#[test]
fn truncation_is_reported() {
    let r = linspace(0.0, 2.0, 41);
    let v: Vec<f64> = r.iter().map(|x| (-x).exp()).collect();
    let out = radial_fourier(&r, &v, &[0.0, 1.0], TransformDim::One, Direction::Forward).unwrap();
    let w = out.truncation.expect("edge value is not small");
    assert!(w.edge_value > 0.1 && w.tail_mass > 0.0);
}

#[test]
fn transform_of_x_tanh_pairs_with_closed_form() {
    // ⟨x tanh(πx), φ̂⟩ = ⟨K, φ⟩ with K(ξ) = -cosh(πξ)/(2 sinh²(πξ)) taken as a
    // finite part; for even φ this is ∫ K (φ - φ(0)).
    for scale in [0.6, 1.0, 1.7] {
        let phi = |x: f64| (-PI * (x / scale).powi(2)).exp();
        let xs = linspace(0.0, 8.0 * scale, 1601);
        let vals: Vec<f64> = xs.iter().map(|x| phi(*x)).collect();
        let grid = linspace(0.0, 12.0 / scale, 2401);
        let hat = radial_fourier(&xs, &vals, &grid, TransformDim::One, Direction::Forward).unwrap();
        let lhs: f64 = {
            let f: Vec<f64> = grid.iter().zip(&hat.values).map(|(x, h)| x * (PI * x).tanh() * h).collect();
            2.0 * trapezoid(&grid, &f)
        };
        let rhs = 2.0
            * fbp_core::numerics::integrate_panels(
                |x| {
                    let d = phi(x) - phi(0.0);
                    if x < 1e-4 {
                        // limit of K(x)(φ(x)-1) as x → 0
                        -(1.0 / (2.0 * PI * PI)) * (-PI / (scale * scale))
                    } else {
                        -(PI * x).cosh() / (2.0 * (PI * x).sinh().powi(2)) * d
                    }
                },
                0.0,
                10.0 * scale,
                400,
            );
        assert!((lhs - rhs).abs() < 1e-3 * rhs.abs(), "scale {scale}: {lhs} vs {rhs}");
    }
}

fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2).zip(f.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

#[test]
fn pv_operator_annihilates_constants() {
    let out = halfspace_pv_operator(|_| 2.5, &[0.5, 3.0, 7.0], PvOptions::default()).unwrap();
    assert!(sup_abs(&out) < 1e-12);
}

#[test]
fn pv_matches_spectral_on_gaussian_bump() {
    let rho = |x: f64| (-x * x).exp();
    let r = linspace(0.0, 8.0, 801);
    let vals: Vec<f64> = r.iter().map(|x| rho(*x)).collect();
    let xi = linspace(0.0, 4.0, 801);
    let (spec, _) = apply_multiplier(&r, &vals, &xi, TransformDim::Four, |k| k / (2.0 * PI)).unwrap();
    let z = linspace(0.0, 5.0, 26);
    let pv = halfspace_pv_operator(rho, &z, PvOptions { support: 7.0, ..PvOptions::default() }).unwrap();
    let scale = sup_abs(&pv);
    for (zi, p) in z.iter().zip(&pv) {
        let idx = (zi / 0.01).round() as usize;
        assert!((p - spec[idx]).abs() < 1e-2 * scale, "z={zi}: pv {p} spectral {}", spec[idx]);
    }
}

#[test]
fn d2_root_is_bracketed() {
    let root = d2_root();
    assert!((root - 1.915).abs() < 1e-3, "{root}");
    assert!(multipliers(root, DEFAULT_ZERO_MARGIN).d2_flag);
    assert!(multipliers(root - 1e-3, DEFAULT_ZERO_MARGIN).d2_flag);
    assert!(multipliers(root + 1e-3, DEFAULT_ZERO_MARGIN).d1_flag);
    assert!(!multipliers(root + 0.05, DEFAULT_ZERO_MARGIN).d2_flag);
}

#[test]
fn exponential_closeness_of_m1_to_rate() {
    for k in linspace(1.0, 40.0, 400) {
        let m = multipliers(k, DEFAULT_ZERO_MARGIN);
        let bound = 2.0 * k * (-2.0 * k).exp() / (1.0 - (-2.0 * k).exp());
        assert!((m.m1 - k).abs() <= bound * (1.0 + 1e-9) + 1e-14, "k={k}");
    }
}

fn second_difference_residual(k: f64, which: u8) -> f64 {
    let n = 201;
    let t = linspace(-1.0, 1.0, n);
    let h = t[1] - t[0];
    let f = |x: f64| if which == 1 { p1(k, x) } else { p2(k, x) };
    (2..n - 2)
        .map(|i| {
            let d2 = (-f(t[i + 2]) + 16.0 * f(t[i + 1]) - 30.0 * f(t[i]) + 16.0 * f(t[i - 1]) - f(t[i - 2]))
                / (12.0 * h * h);
            let rhs = if which == 1 { 1.0 } else { t[i] };
            (d2 - k * k * f(t[i]) - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn kernels_solve_their_two_point_problems() {
    for k in [0.0_f64, 0.5, 2.0, 6.0] {
        // fourth-order stencil, h = 1e-2: truncation ~ h⁴ k⁶ / 90
        let tol = 1e-8 + 1e-9 * k.powi(6);
        let (a, b) = (second_difference_residual(k, 1), second_difference_residual(k, 2));
        assert!(a < tol && b < tol, "k={k}: {a:e} {b:e}");
    }
}

proptest! {
    #[test]
    fn multiplier_identities_hold_exactly(k in 0.0f64..60.0) {
        let m = multipliers(k, DEFAULT_ZERO_MARGIN);
        prop_assert_eq!(m.m2, m.m1 - 1.0);
        prop_assert_eq!(m.d2, m.m1 - 2.0);
        prop_assert!((m.d1 - (k * k - 1.0 / p2_dt_at_one(k))).abs() <= 1e-9 * (1.0 + k * k));
    }

    #[test]
    fn kernel_parity(k in 0.0f64..30.0, t in -1.0f64..1.0) {
        prop_assert!((p1(k, t) - p1(k, -t)).abs() < 1e-15);
        prop_assert!((p2(k, t) + p2(k, -t)).abs() < 1e-15);
    }

    #[test]
    fn transform_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let r = linspace(0.0, 5.0, 101);
        let f: Vec<f64> = r.iter().map(|x| (-x * x).exp()).collect();
        let g: Vec<f64> = r.iter().map(|x| (-2.0 * x * x).exp() * (1.0 + x)).collect();
        let c: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let xi = linspace(0.0, 2.0, 9);
        for dim in [TransformDim::One, TransformDim::Four] {
            let tf = radial_fourier(&r, &f, &xi, dim, Direction::Forward).unwrap().values;
            let tg = radial_fourier(&r, &g, &xi, dim, Direction::Forward).unwrap().values;
            let tc = radial_fourier(&r, &c, &xi, dim, Direction::Forward).unwrap().values;
            for i in 0..xi.len() {
                prop_assert!((tc[i] - a * tf[i] - b * tg[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pv_is_linear(a in -2.0f64..2.0) {
        let z = [0.3, 2.0];
        let opts = PvOptions { support: 6.0, panel: 0.25, angular_nodes: 24 };
        let f = halfspace_pv_operator(|x| (-x * x).exp(), &z, opts).unwrap();
        let g = halfspace_pv_operator(|x| a * (-x * x).exp() + 1.0, &z, opts).unwrap();
        for i in 0..2 {
            prop_assert!((g[i] - a * f[i]).abs() < 1e-10);
        }
    }
}
