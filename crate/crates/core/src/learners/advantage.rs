//! Closed-form action advantages with zero mean under the Gaussian policy.
//!
//! A head maps raw network outputs to the coefficients of a concave function `f(a)` peaked
//! at the policy mean; the advantage is `A(a) = f(a) - E_{a'~pi}[f(a')]`. `u = a - m` is the
//! offset from the mean and `var` the per-component policy variance. Expectations are taken
//! under the untruncated Gaussian.

use serde::{Deserialize, Serialize};

use crate::nncore::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvKind {
    #[default]
    None,
    /// `f_Q = -1/2 u^T L L^T u` with lower-triangular `L`.
    Quadratic,
    /// `f_G = K exp(-1/2 sum u+^2 / L+ - 1/2 sum u-^2 / L-)`.
    AsymGaussian,
}

impl AdvKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => AdvKind::None,
            "quadratic" => AdvKind::Quadratic,
            "asym_gaussian" => AdvKind::AsymGaussian,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AdvKind::None => "none",
            AdvKind::Quadratic => "quadratic",
            AdvKind::AsymGaussian => "asym_gaussian",
        }
    }

    /// Network outputs needed for `d` action components.
    pub fn n_outputs(self, d: usize) -> usize {
        match self {
            AdvKind::None => 0,
            AdvKind::Quadratic => tri_len(d),
            AdvKind::AsymGaussian => 1 + 2 * d,
        }
    }

    /// `(A(a), dA/draw)`; `None` for [`AdvKind::None`].
    pub fn evaluate(self, raw: &[f64], u: &[f64], var: &[f64]) -> Option<(f64, Vec<f64>)> {
        match self {
            AdvKind::None => None,
            AdvKind::Quadratic => Some(quadratic_advantage(raw, u, var)),
            AdvKind::AsymGaussian => Some(asym_advantage(raw, u, var)),
        }
    }
}

pub fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of `L[i][k]` (`k <= i`) in the row-major packed lower triangle.
pub fn tri_index(i: usize, k: usize) -> usize {
    i * (i + 1) / 2 + k
}

/// Unpack a lower-triangular matrix from raw outputs, diagonal through softplus.
pub fn lower_triangular(raw: &[f64], d: usize) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for k in 0..=i {
            let x = raw[tri_index(i, k)];
            l[i][k] = if i == k { softplus(x) } else { x };
        }
    }
    l
}

/// `y = L^T u`.
pub fn lt_times(l: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let d = u.len();
    (0..d)
        .map(|k| (k..d).map(|i| l[i][k] * u[i]).sum())
        .collect()
}

pub fn quadratic_value(l: &[Vec<f64>], u: &[f64]) -> f64 {
    -0.5 * lt_times(l, u).iter().map(|y| y * y).sum::<f64>()
}

/// `E[f_Q] = -1/2 Tr(L L^T Sigma)` for diagonal `Sigma = diag(var)`.
pub fn quadratic_expectation(l: &[Vec<f64>], var: &[f64]) -> f64 {
    -0.5 * (0..var.len())
        .map(|i| var[i] * (0..=i).map(|k| l[i][k] * l[i][k]).sum::<f64>())
        .sum::<f64>()
}

fn quadratic_advantage(raw: &[f64], u: &[f64], var: &[f64]) -> (f64, Vec<f64>) {
    let d = u.len();
    let l = lower_triangular(raw, d);
    let y = lt_times(&l, u);
    let f = -0.5 * y.iter().map(|v| v * v).sum::<f64>();
    let e = quadratic_expectation(&l, var);
    let mut g = vec![0.0; tri_len(d)];
    for i in 0..d {
        for k in 0..=i {
            let dl = -y[k] * u[i] + var[i] * l[i][k];
            let idx = tri_index(i, k);
            g[idx] = if i == k { dl * sigmoid(raw[idx]) } else { dl };
        }
    }
    (f - e, g)
}

/// Positive coefficients `(K, L+, L-)` of the asymmetric Gaussian head.
pub fn asym_coefficients(raw: &[f64], d: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let k = softplus(raw[0]);
    let lp = raw[1..1 + d].iter().map(|&x| softplus(x)).collect();
    let lm = raw[1 + d..1 + 2 * d].iter().map(|&x| softplus(x)).collect();
    (k, lp, lm)
}

pub fn asym_value(k: f64, lp: &[f64], lm: &[f64], u: &[f64]) -> f64 {
    let q: f64 = u
        .iter()
        .zip(lp.iter().zip(lm))
        .map(|(&x, (p, m))| if x > 0.0 { x * x / p } else { x * x / m })
        .sum();
    k * (-0.5 * q).exp()
}

/// `E[f_G] = K prod_i (sqrt(L+/(L+ + var)) + sqrt(L-/(L- + var))) / 2`.
pub fn asym_expectation(k: f64, lp: &[f64], lm: &[f64], var: &[f64]) -> f64 {
    k * lp
        .iter()
        .zip(lm)
        .zip(var)
        .map(|((p, m), v)| 0.5 * ((p / (p + v)).sqrt() + (m / (m + v)).sqrt()))
        .product::<f64>()
}

fn asym_advantage(raw: &[f64], u: &[f64], var: &[f64]) -> (f64, Vec<f64>) {
    let d = u.len();
    let (k, lp, lm) = asym_coefficients(raw, d);
    let f = asym_value(k, &lp, &lm, u);
    let halves: Vec<f64> = (0..d)
        .map(|i| 0.5 * ((lp[i] / (lp[i] + var[i])).sqrt() + (lm[i] / (lm[i] + var[i])).sqrt()))
        .collect();
    let e = k * halves.iter().product::<f64>();
    let mut g = vec![0.0; 1 + 2 * d];
    g[0] = (f - e) / k * sigmoid(raw[0]);
    // d/dx sqrt(x / (x + v)) = v / (2 sqrt(x) (x + v)^1.5)
    let dsqrt = |x: f64, v: f64| v / (2.0 * x.sqrt() * (x + v).powf(1.5));
    for i in 0..d {
        let others = e / halves[i];
        let (df_p, df_m) = if u[i] > 0.0 {
            (f * 0.5 * u[i] * u[i] / (lp[i] * lp[i]), 0.0)
        } else {
            (0.0, f * 0.5 * u[i] * u[i] / (lm[i] * lm[i]))
        };
        let de_p = others * 0.5 * dsqrt(lp[i], var[i]);
        let de_m = others * 0.5 * dsqrt(lm[i], var[i]);
        g[1 + i] = (df_p - de_p) * sigmoid(raw[1 + i]);
        g[1 + d + i] = (df_m - de_m) * sigmoid(raw[1 + d + i]);
    }
    (f - e, g)
}
