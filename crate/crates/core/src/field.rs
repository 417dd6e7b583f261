//! Scalar samples on the normalized tube `[-1, 1] × [0, L]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Values `φ(tᵢ, lⱼ)` stored column by column (t varies fastest). Data are
/// understood to extend evenly to `l < 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub t: Vec<f64>,
    pub l: Vec<f64>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(t: &[f64], l: &[f64]) -> Self {
        Self { t: t.to_vec(), l: l.to_vec(), values: vec![0.0; t.len() * l.len()] }
    }

    pub fn from_fn(t: &[f64], l: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(t.len() * l.len());
        for &lj in l {
            values.extend(t.iter().map(|&ti| f(ti, lj)));
        }
        Self { t: t.to_vec(), l: l.to_vec(), values }
    }

    pub fn from_values(t: &[f64], l: &[f64], values: Vec<f64>) -> Result<Self> {
        if values.len() != t.len() * l.len() {
            return Err(invalid("values", "length must equal nt * nl"));
        }
        Ok(Self { t: t.to_vec(), l: l.to_vec(), values })
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn nl(&self) -> usize {
        self.l.len()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.t.len() + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let nt = self.t.len();
        &self.values[j * nt..(j + 1) * nt]
    }

    /// Row `t = tᵢ` as a function of `l`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.nl()).map(|j| self.get(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Field { t: self.t.clone(), l: self.l.clone(), values }
    }

    /// `max |φ(t, l) + sign·φ(-t, l)|`; zero for odd (sign = 1) or even (sign = -1) fields.
    pub fn parity_defect(&self, sign: f64) -> f64 {
        let nt = self.nt();
        let mut worst = 0.0_f64;
        for j in 0..self.nl() {
            for i in 0..nt {
                worst = worst.max((self.get(i, j) + sign * self.get(nt - 1 - i, j)).abs());
            }
        }
        worst
    }
}

/// First and second derivatives on a nonuniform grid by three-point
/// differences. With `even` and `x[0] = 0` the data are reflected at the
/// origin; otherwise the ends use one-sided stencils.
pub fn derivatives(x: &[f64], v: &[f64], even: bool) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    if n < 3 {
        return (d1, d2);
    }
    let central = |hm: f64, hp: f64, a: f64, b: f64, c: f64| {
        let first = (-hp / (hm * (hm + hp))) * a + ((hp - hm) / (hm * hp)) * b + (hm / (hp * (hm + hp))) * c;
        let second = 2.0 * (a / (hm * (hm + hp)) - b / (hm * hp) + c / (hp * (hm + hp)));
        (first, second)
    };
    for i in 1..n - 1 {
        let (a, b) = central(x[i] - x[i - 1], x[i + 1] - x[i], v[i - 1], v[i], v[i + 1]);
        d1[i] = a;
        d2[i] = b;
    }
    if even && x[0] == 0.0 {
        let h = x[1];
        d1[0] = 0.0;
        d2[0] = 2.0 * (v[1] - v[0]) / (h * h);
    } else {
        let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
        d1[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1] - h1 / (h2 * (h1 + h2)) * v[2];
        d2[0] = d2[1];
    }
    let (h1, h2) = (x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]);
    d1[n - 1] =
        (2.0 * h1 + h2) / (h1 * (h1 + h2)) * v[n - 1] - (h1 + h2) / (h1 * h2) * v[n - 2] + h1 / (h2 * (h1 + h2)) * v[n - 3];
    d2[n - 1] = d2[n - 2];
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;

    #[test]
    fn derivatives_of_quadratic_are_exact() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let v: Vec<f64> = x.iter().map(|s| 2.0 * s * s - s + 1.0).collect();
        let (d1, d2) = derivatives(&x, &v, false);
        for i in 0..x.len() {
            assert!((d1[i] - (4.0 * x[i] - 1.0)).abs() < 1e-10, "{i}");
            assert!((d2[i] - 4.0).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn parity_of_odd_field() {
        let t = linspace(-1.0, 1.0, 11);
        let l = linspace(0.0, 2.0, 5);
        let f = Field::from_fn(&t, &l, |t, l| t * (1.0 + l));
        assert!(f.parity_defect(1.0) < 1e-14);
    }
}
