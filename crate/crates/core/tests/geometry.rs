use std::time::Instant;

use fbp_core::geometry::*;
use fbp_core::numerics::{fit_power_law, linspace};
use fbp_core::Error;
use proptest::prelude::*;

/// Fourth-order ambient Laplacian of `f` at `x`.
fn ambient_laplacian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let mut total = 0.0;
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let mut v = [0.0; 5];
        for (j, o) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
            y[i] = x[i] + o * h;
            v[j] = f(&y);
        }
        y[i] = x[i];
        total += (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
    }
    total
}

/// Embeds a meridian point `(a, b)` of a catenoid in ℝⁿ.
fn catenoid_ambient(n: usize, a: f64, b: f64) -> Vec<f64> {
    // spread the radius over the first n-1 axes unevenly to avoid symmetric stencils
    let mut x = vec![0.0; n];
    let w: Vec<f64> = (0..n - 1).map(|i| 1.0 + 0.3 * i as f64).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 0..n - 1 {
        x[i] = a * w[i] / norm;
    }
    x[n - 1] = b;
    x
}

fn catenoid_meridian(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    (x[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt(), x[n - 1])
}

#[test]
fn n3_catenoid_is_cosh_on_unit_height_range() {
    let start = Instant::now();
    let p = integrate_catenoid_profile(3, 1.0, 3f64.cosh() + 0.1, 1e-3).unwrap();
    let mut worst = 0.0_f64;
    for z in linspace(0.0, 3.0, 3001) {
        worst = worst.max((p.radius_at_height(z).unwrap() - z.cosh()).abs());
    }
    let table = arc_length_table(&p);
    for r in linspace(1.0, 10.0, 91) {
        worst = worst.max((table.l_of_r(r).unwrap() - (r * r - 1.0).sqrt()).abs());
    }
    assert!(worst <= 1e-8, "sup error {worst:e}");
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!((p.height(1f64.cosh()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn waist_sits_at_height_zero_in_every_dimension() {
    for n in 3..=8 {
        let p = integrate_catenoid_profile(n, 1.0, 4.0, 0.01).unwrap();
        assert_eq!(p.waist, 1.0);
        assert_eq!(p.height(1.0).unwrap(), 0.0);
        assert!(p.residual_max <= PROFILE_TOL);
        // slope positive and strictly decreasing
        assert!(p.samples.windows(2).all(|w| w[1].slope > 0.0 && w[1].slope < w[0].slope));
    }
}

#[test]
fn n5_height_approaches_limit_like_inverse_square() {
    let p = integrate_catenoid_profile(5, 1.0, 120.0, 0.05).unwrap();
    let c = p.c_n.unwrap();
    let r = linspace(10.0, 100.0, 60);
    let gap: Vec<f64> = r.iter().map(|x| c - p.height(*x).unwrap()).collect();
    let (amp, exp) = fit_power_law(&r, &gap);
    assert!((exp + 2.0).abs() < 0.05, "exponent {exp}");
    // leading coefficient is c_n'
    assert!((amp / p.c_n_prime.unwrap() - 1.0).abs() < 1e-2, "{amp}");
}

#[test]
fn arc_table_round_trips() {
    for n in [3, 4, 6] {
        let p = integrate_catenoid_profile(n, 0.5, 30.0, 0.05).unwrap();
        let table = arc_length_table(&p);
        assert_eq!(table.l[0], 0.0);
        assert!(table.l.windows(2).all(|w| w[1] > w[0]));
        for r in linspace(2.0, 30.0, 57) {
            let back = table.r_of_l(table.l_of_r(r).unwrap()).unwrap();
            assert!((back - r).abs() <= 1e-10 * r, "n={n} r={r} back={back}");
        }
    }
}

#[test]
fn catenoid_curvatures_are_balanced_and_decay() {
    let p = integrate_catenoid_profile(4, 1.0, 110.0, 0.05).unwrap();
    let l = linspace(10.0, 100.0, 40);
    let mut a2 = Vec::new();
    for x in &l {
        let c = catenoid_curvatures(&p, *x).unwrap();
        assert!(c.sum().abs() < 1e-8);
        assert_eq!(c.a2, c.k.iter().map(|v| v * v).sum::<f64>());
        assert_eq!(c.k.len(), 3);
        a2.push(c.a2);
    }
    let (_, slope) = fit_power_law(&l, &a2);
    assert!((slope + 6.0).abs() < 0.2, "slope {slope}");
    assert!(matches!(catenoid_curvatures(&p, 1e4), Err(Error::OutOfRange { .. })));
}

#[test]
fn leaf_approaches_cone_at_inverse_square_rate() {
    let leaf = shoot_foliation_leaf(Side::Plus, 1.0, 1e-3, 110.0).unwrap();
    assert!(leaf.residual_max <= LEAF_TOL, "{}", leaf.residual_max);
    let fit = leaf.decay_fit.unwrap();
    assert!((fit.exponent + 2.0).abs() < 0.2, "exponent {}", fit.exponent);
    assert!(leaf.curve.iter().skip(1).all(|s| s.x > s.y && s.y > 0.0));
    for r in [0.5, 1.0, 4.0, 50.0] {
        let c = cone_curvatures(r);
        assert!((c.a2 - 6.0 / (r * r)).abs() <= 1e-10 / (r * r));
    }
}

#[test]
fn leaf_is_balanced_everywhere() {
    let leaf = shoot_foliation_leaf(Side::Plus, 1.0, 1e-3, 30.0).unwrap();
    for l in linspace(0.0, leaf.sigma_max(), 300) {
        let c = simons_curvatures(&leaf, l).unwrap();
        assert_eq!(c.k.len(), 7);
        assert!(c.sum().abs() < 1e-8 * (1.0 + c.a2.sqrt()), "l={l}: {}", c.sum());
    }
}

#[test]
fn leaves_are_homothetic() {
    let unit = shoot_foliation_leaf(Side::Plus, 1.0, 1e-3, 40.0).unwrap();
    let big = shoot_foliation_leaf(Side::Plus, 2.5, 1e-3, 100.0).unwrap();
    let scaled = unit.scaled(2.5);
    for s in scaled.curve.iter().step_by(997) {
        let (d, _) = big.signed_distance(s.x, s.y);
        assert!(d.abs() < 1e-6 * 2.5, "({}, {}): {d:e}", s.x, s.y);
    }
}

#[test]
fn coarse_start_is_rejected() {
    assert!(matches!(shoot_foliation_leaf(Side::Plus, 1.0, 0.05, 10.0), Err(Error::StartRegularization(_))));
}

#[test]
fn two_curvature_parallel_formula() {
    for (kappa, s) in [(1.0, 0.3), (2.0, -0.4), (0.1, 5.0)] {
        let h = mean_curvature_parallel(&[kappa, -kappa], s).unwrap();
        let expect = 2.0 * s * kappa * kappa / (1.0 - s * s * kappa * kappa);
        assert!((h - expect).abs() < 1e-14 * expect.abs().max(1.0));
    }
    assert_eq!(mean_curvature_parallel(&[0.5, -0.25, -0.25], 0.0).unwrap(), 0.0);
}

#[test]
fn parallel_curvature_matches_ambient_distance_laplacian() {
    // H_{Γ_s} = -Δ(signed distance) on the n = 3 unit catenoid at s = 0.5
    let p = integrate_catenoid_profile(3, 1.0, 12.0, 0.01).unwrap();
    let chart = SurfaceChart::catenoid(p);
    let dist = |x: &[f64]| {
        let (a, b) = catenoid_meridian(x);
        chart.meridian_to_fermi(a, b).unwrap().1
    };
    for l in [-1.5, 0.0, 0.4, 1.0, 2.0] {
        let pt = chart.point(l).unwrap();
        let k = pt.curvatures().k;
        let formula = mean_curvature_parallel(&k, 0.5).unwrap();
        assert!((formula - mean_curvature_expansion(&k, 0.5)).abs() < 1e-10);
        let (a, b) = pt.offset(0.5);
        let fd = -ambient_laplacian(&dist, &catenoid_ambient(3, a, b), 1e-2);
        let rel = (fd - formula).abs() / formula.abs();
        assert!(rel <= 1e-3, "l={l}: fd {fd} formula {formula}");
    }
}

#[test]
fn parallel_curvature_is_log_derivative_of_area_element() {
    let k = [0.7, -0.2, -0.5];
    for s in [-0.8, 0.1, 0.9] {
        let d = 1e-5;
        let fd = -((area_element_ratio(&k, s + d)).ln() - (area_element_ratio(&k, s - d)).ln()) / (2.0 * d);
        assert!((fd - mean_curvature_parallel(&k, s).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn catenoid_drift_matches_profile_formula() {
    for n in [3, 5] {
        let p = integrate_catenoid_profile(n, 1.0, 20.0, 0.02).unwrap();
        let chart = SurfaceChart::catenoid(p.clone());
        for l in [-3.0, 0.0, 0.7, 5.0] {
            let (a1, g11) = chart.laplacian_coefficients(l, 0.0).unwrap();
            let r = p.radius_at_arc(l).unwrap();
            let d = 1e-5;
            let drdl = (p.radius_at_arc(l + d).unwrap() - p.radius_at_arc(l - d).unwrap()) / (2.0 * d);
            assert!((a1 - (n as f64 - 2.0) / r * drdl).abs() < 1e-8, "n={n} l={l}");
            assert_eq!(g11, 1.0);
        }
    }
}

#[test]
fn leaf_drift_is_close_to_model_drift() {
    let leaf = shoot_foliation_leaf(Side::Plus, 1.0, 1e-3, 60.0).unwrap();
    let chart = SurfaceChart::leaf(leaf);
    let worst = linspace(5.0, 50.0, 200)
        .into_iter()
        .map(|l| {
            let (a1, _) = chart.laplacian_coefficients(l, 0.0).unwrap();
            (a1 - 3.0 / l).abs() * (1.0 + l)
        })
        .fold(0.0, f64::max);
    assert!(worst <= 10.0, "{worst}");
}

#[test]
fn flat_chart_drift_is_independent_of_offset() {
    let chart = SurfaceChart::flat(4, 10.0);
    for l in [0.5, 2.0, 9.0] {
        let base = chart.laplacian_coefficients(l, 0.0).unwrap();
        for s in [-3.0, 0.4, 7.0] {
            assert_eq!(chart.laplacian_coefficients(l, s).unwrap(), base);
        }
    }
}

#[test]
fn drift_matches_ambient_laplacian_of_lifted_radial_function() {
    // η(l) lifted constant along normals: ambient Δ = 𝔤¹¹η'' + a₁η'
    let eta = |l: f64| (0.3 * l).sin() + 0.1 * l * l;
    let (d1, d2) = (|l: f64| 0.3 * (0.3 * l).cos() + 0.2 * l, |l: f64| -0.09 * (0.3 * l).sin() + 0.2);

    let p = integrate_catenoid_profile(4, 1.0, 15.0, 0.01).unwrap();
    let chart = SurfaceChart::catenoid(p);
    let lifted = |x: &[f64]| {
        let (a, b) = catenoid_meridian(x);
        eta(chart.meridian_to_fermi(a, b).unwrap().0)
    };
    for (l, s) in [(0.8, 0.3), (2.0, -0.4), (4.0, 0.5)] {
        let pt = chart.point(l).unwrap();
        let (a1, g11) = chart.laplacian_coefficients(l, s).unwrap();
        let (a, b) = pt.offset(s);
        let fd = ambient_laplacian(&lifted, &catenoid_ambient(4, a, b), 1e-2);
        let formula = g11 * d2(l) + a1 * d1(l);
        assert!((fd - formula).abs() <= 1e-3 * formula.abs(), "l={l} s={s}: {fd} vs {formula}");
    }

    let leaf = shoot_foliation_leaf(Side::Plus, 1.0, 1e-3, 20.0).unwrap();
    let chart = SurfaceChart::leaf(leaf);
    let lifted = |x: &[f64]| {
        let a = x[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
        let b = x[4..].iter().map(|v| v * v).sum::<f64>().sqrt();
        eta(chart.meridian_to_fermi(a, b).unwrap().0)
    };
    for (l, s) in [(2.0, 0.2), (5.0, -0.3), (8.0, 0.6)] {
        let pt = chart.point(l).unwrap();
        let (a1, g11) = chart.laplacian_coefficients(l, s).unwrap();
        let (a, b) = pt.offset(s);
        let x: Vec<f64> = [0.5, 0.5, 0.5, 0.5].iter().map(|v| v * a).chain([0.5, 0.5, 0.5, 0.5].iter().map(|v| v * b)).collect();
        let fd = ambient_laplacian(&lifted, &x, 1e-2);
        let formula = g11 * d2(l) + a1 * d1(l);
        assert!((fd - formula).abs() <= 1e-3 * formula.abs(), "leaf l={l} s={s}: {fd} vs {formula}");
    }
}

proptest! {
    #[test]
    fn expansion_identity_holds_on_charts(l in 0.0f64..8.0, s in -0.45f64..0.45) {
        let p = integrate_catenoid_profile(3, 1.0, 10.0, 0.05).unwrap();
        let k = catenoid_curvatures(&p, l).unwrap().k;
        let h = mean_curvature_parallel(&k, s).unwrap();
        prop_assert!((h - mean_curvature_expansion(&k, s)).abs() < 1e-10);
    }

    #[test]
    fn chart_metric_is_arc_length_at_zero_offset(l in 0.0f64..9.0) {
        let p = integrate_catenoid_profile(5, 1.0, 12.0, 0.05).unwrap();
        let chart = SurfaceChart::catenoid(p);
        prop_assert_eq!(chart.laplacian_coefficients(l, 0.0).unwrap().1, 1.0);
    }

    #[test]
    fn focal_offsets_are_rejected(kappa in 0.1f64..5.0, extra in 0.0f64..2.0) {
        let s = (1.0 + extra) / kappa;
        let is_focal = matches!(mean_curvature_parallel(&[kappa, -kappa], s), Err(Error::Focal { index: 0, .. }));
        prop_assert!(is_focal);
    }
}
