//! Discrete weighted Hölder norms on radial functions and tube fields.
//!
//! A local `C^{μ,α}` norm on a unit window is `Σ_{k≤μ} sup|η^{(k)}|` plus the
//! Hölder seminorm of `η^{(μ)}`, estimated as the largest divided difference
//! `|D(x) - D(y)| / |x - y|^α` over pairs at dyadic index strides inside the
//! window.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{derivatives, Field};

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Window radius in the chart's arc length.
const WINDOW: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormFamily {
    /// `sup (1+δl)^β ‖η‖_{C^{μ,α}(B₁(l))}`.
    Weighted { beta: f64, mu: u8, delta: f64 },
    /// Weights `β`, `β+1`, `β+2` on `η`, `η'`, `η''`, each in `C^{0,α}`.
    Split { beta: f64, delta: f64 },
    /// `|c| + ‖η - c v‖` in the `Weighted` norm, with `v(l) = |l|^{3-n}` far out
    /// and `c` fitted on the far field.
    WeightedPlusDeficiency { beta: f64, mu: u8, delta: f64, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub deficiency: Option<f64>,
}

/// Even cutoff profile: `|l|^{3-n}` for `|l| > 2`, zero for `|l| < 1`.
pub fn deficiency_profile(l: f64, n: usize) -> f64 {
    let a = l.abs();
    if a <= 1.0 {
        return 0.0;
    }
    let tail = a.powf(3.0 - n as f64);
    if a >= 2.0 {
        return tail;
    }
    // C² smoothstep on [1, 2]
    let s = a - 1.0;
    tail * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

struct Windows {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

fn windows(l: &[f64]) -> Result<Windows> {
    let extent = l.last().unwrap() - l[0];
    if extent < WINDOW {
        return Err(Error::Resolution { window: WINDOW, extent });
    }
    let n = l.len();
    let (mut lo, mut hi) = (vec![0; n], vec![0; n]);
    let (mut a, mut b) = (0usize, 0usize);
    for j in 0..n {
        while l[j] - l[a] > WINDOW {
            a += 1;
        }
        while b + 1 < n && l[b + 1] - l[j] <= WINDOW {
            b += 1;
        }
        lo[j] = a;
        hi[j] = b;
    }
    Ok(Windows { lo, hi })
}

/// Per-window `sup|d|` and Hölder seminorm of `d`.
fn window_stats(l: &[f64], d: &[f64], w: &Windows, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let n = l.len();
    let mut sup = vec![0.0; n];
    let mut hol = vec![0.0; n];
    for j in 0..n {
        let (lo, hi) = (w.lo[j], w.hi[j]);
        sup[j] = d[lo..=hi].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut h = 0.0_f64;
        let mut stride = 1;
        while stride <= hi - lo {
            for i in lo..=hi - stride {
                let q = (d[i + stride] - d[i]).abs() / (l[i + stride] - l[i]).powf(alpha);
                h = h.max(q);
            }
            stride *= 2;
        }
        hol[j] = h;
    }
    (sup, hol)
}

fn check(l: &[f64], v: &[f64], alpha: f64) -> Result<()> {
    if l.len() != v.len() || l.len() < 3 {
        return Err(invalid("l", "need at least 3 samples matching values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    Ok(())
}

fn plain_weighted(l: &[f64], v: &[f64], beta: f64, mu: u8, delta: f64, alpha: f64) -> Result<f64> {
    if mu > 2 {
        return Err(invalid("mu", "must be 0, 1 or 2"));
    }
    let w = windows(l)?;
    let even = l[0] == 0.0;
    let (d1, d2) = derivatives(l, v, even);
    let derivs: [&[f64]; 3] = [v, &d1, &d2];
    let mut local = vec![0.0; l.len()];
    for (k, d) in derivs.iter().enumerate().take(mu as usize + 1) {
        let (sup, hol) = window_stats(l, d, &w, alpha);
        for j in 0..l.len() {
            local[j] += sup[j] + if k == mu as usize { hol[j] } else { 0.0 };
        }
    }
    Ok(l.iter().zip(&local).fold(0.0, |m, (x, y)| m.max((1.0 + delta * x.abs()).powf(beta) * y)))
}

/// Norm of a radial function sampled on an increasing grid.
pub fn weighted_norm(l: &[f64], v: &[f64], family: NormFamily, alpha: f64) -> Result<NormValue> {
    check(l, v, alpha)?;
    match family {
        NormFamily::Weighted { beta, mu, delta } => {
            Ok(NormValue { value: plain_weighted(l, v, beta, mu, delta, alpha)?, deficiency: None })
        }
        NormFamily::Split { beta, delta } => {
            let w = windows(l)?;
            let (d1, d2) = derivatives(l, v, l[0] == 0.0);
            let weight = |x: f64, p: f64| (1.0 + delta * x.abs()).powf(p);
            let (s0, h0) = window_stats(l, v, &w, alpha);
            let (s1, h1) = window_stats(l, &d1, &w, alpha);
            let (s2, h2) = window_stats(l, &d2, &w, alpha);
            let mut first = 0.0_f64;
            let mut second = 0.0_f64;
            for j in 0..l.len() {
                first = first.max(weight(l[j], beta) * (s0[j] + h0[j]) + weight(l[j], beta + 1.0) * (s1[j] + h1[j]));
                second = second.max(weight(l[j], beta + 2.0) * (s2[j] + h2[j]));
            }
            Ok(NormValue { value: first + second, deficiency: None })
        }
        NormFamily::WeightedPlusDeficiency { beta, mu, delta, n } => {
            let c = fit_deficiency(l, v, beta, delta, n);
            let rest: Vec<f64> = l.iter().zip(v).map(|(x, y)| y - c * deficiency_profile(*x, n)).collect();
            let value = c.abs() + plain_weighted(l, &rest, beta, mu, delta, alpha)?;
            Ok(NormValue { value, deficiency: Some(c) })
        }
    }
}

/// Least-squares coefficient of `v` in the far field, jointly with a
/// `(1+δl)^{-β}` remainder.
pub fn fit_deficiency(l: &[f64], v: &[f64], beta: f64, delta: f64, n: usize) -> f64 {
    let lmax = l.last().unwrap().abs();
    let start = (0.5 * lmax).max(2.0);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in l.iter().zip(v) {
        if x.abs() < start {
            continue;
        }
        let p = deficiency_profile(*x, n);
        let q = (1.0 + delta * x.abs()).powf(-beta);
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * y;
        b2 += q * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return if a11 > 0.0 { b1 / a11 } else { 0.0 };
    }
    (b1 * a22 - b2 * a12) / det
}

/// `sup (1+ε|l|)^β ‖φ‖_{C^{μ,α}}` over unit windows of the tube `[-1,1] × [0, L]`.
pub fn field_norm(field: &Field, beta: f64, mu: u8, eps: f64, alpha: f64) -> Result<f64> {
    if mu > 2 {
        return Err(invalid("mu", "must be 0, 1 or 2"));
    }
    let (nt, nl) = (field.nt(), field.nl());
    let w = windows(&field.l)?;
    let even = field.l[0] == 0.0;

    // derivative fields up to order μ
    let mut derivs: Vec<Vec<f64>> = vec![field.values.clone()];
    if mu >= 1 {
        let mut dt = vec![0.0; nt * nl];
        let mut dtt = vec![0.0; nt * nl];
        for j in 0..nl {
            let (a, b) = derivatives(&field.t, field.column(j), false);
            dt[j * nt..(j + 1) * nt].copy_from_slice(&a);
            dtt[j * nt..(j + 1) * nt].copy_from_slice(&b);
        }
        let mut dl = vec![0.0; nt * nl];
        let mut dll = vec![0.0; nt * nl];
        let mut dtl = vec![0.0; nt * nl];
        for i in 0..nt {
            let row = field.row(i);
            let (a, b) = derivatives(&field.l, &row, even);
            let row_t: Vec<f64> = (0..nl).map(|j| dt[j * nt + i]).collect();
            let (c, _) = derivatives(&field.l, &row_t, false);
            for j in 0..nl {
                dl[j * nt + i] = a[j];
                dll[j * nt + i] = b[j];
                dtl[j * nt + i] = c[j];
            }
        }
        derivs.push(dt);
        derivs.push(dl);
        if mu == 2 {
            derivs.push(dtt);
            derivs.push(dtl);
            derivs.push(dll);
        }
    }
    let order = |k: usize| match k {
        0 => 0,
        1 | 2 => 1,
        _ => 2,
    };

    let mut local = vec![0.0; nl];
    for (k, d) in derivs.iter().enumerate() {
        let col_sup: Vec<f64> = (0..nl).map(|j| d[j * nt..(j + 1) * nt].iter().fold(0.0_f64, |m, v| m.max(v.abs()))).collect();
        let top = order(k) == mu as usize;
        // Hölder along t inside each column
        let col_hol: Vec<f64> = if top {
            (0..nl)
                .map(|j| {
                    let c = &d[j * nt..(j + 1) * nt];
                    let mut h = 0.0_f64;
                    let mut s = 1;
                    while s < nt {
                        for i in 0..nt - s {
                            h = h.max((c[i + s] - c[i]).abs() / (field.t[i + s] - field.t[i]).powf(alpha));
                        }
                        s *= 2;
                    }
                    h
                })
                .collect()
        } else {
            vec![0.0; nl]
        };
        for j in 0..nl {
            let (lo, hi) = (w.lo[j], w.hi[j]);
            let mut sup = 0.0_f64;
            let mut hol = 0.0_f64;
            for jj in lo..=hi {
                sup = sup.max(col_sup[jj]);
                hol = hol.max(col_hol[jj]);
            }
            if top {
                let mut s = 1;
                while s <= hi - lo {
                    for jj in lo..=hi - s {
                        let dist = (field.l[jj + s] - field.l[jj]).powf(alpha);
                        for i in 0..nt {
                            hol = hol.max((d[(jj + s) * nt + i] - d[jj * nt + i]).abs() / dist);
                        }
                    }
                    s *= 2;
                }
            }
            local[j] += sup + if top { hol } else { 0.0 };
        }
    }
    Ok(field.l.iter().zip(&local).fold(0.0, |m, (x, y)| m.max((1.0 + eps * x.abs()).powf(beta) * y)))
}
