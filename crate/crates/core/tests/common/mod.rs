//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use refer::harness::metrics::MetricsRow;
use refer::harness::{TrainConfig, Trainer};

/// Naive softsign MLP forward pass over the flat layout: per layer, the `fan_in x fan_out`
/// weight matrix row-major by input, then the biases.
pub fn mlp_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut off = 0;
    let n_layers = sizes.len() - 1;
    for l in 0..n_layers {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let mut next = vec![0.0; fo];
        for (o, y) in next.iter_mut().enumerate() {
            let mut z = params[off + fi * fo + o];
            for (i, a) in act.iter().enumerate() {
                z += a * params[off + i * fo + o];
            }
            *y = if l + 1 < n_layers { z / (1.0 + z.abs()) } else { z };
        }
        off += (fi + 1) * fo;
        act = next;
    }
    assert_eq!(off, params.len());
    act
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log density of independent Gaussians (normalisation constants dropped).
pub fn log_gauss(a: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    a.iter()
        .zip(mean.iter().zip(std))
        .map(|(a, (m, s))| -0.5 * ((a - m) / s).powi(2) - s.ln())
        .sum()
}

/// `KL(N(m1, s1^2) || N(m2, s2^2))` summed over components, from the integral definition.
pub fn kl(m1: &[f64], s1: &[f64], m2: &[f64], s2: &[f64]) -> f64 {
    (0..m1.len())
        .map(|i| {
            let r = s1[i] * s1[i] / (s2[i] * s2[i]);
            let d = (m1[i] - m2[i]) / s2[i];
            0.5 * (r + d * d - 1.0 - r.ln())
        })
        .sum()
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = p[i];
            p[i] = x0 + h;
            let fp = f(&p);
            p[i] = x0 - h;
            let fm = f(&p);
            p[i] = x0;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(1, |n|)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// A configuration that trains in well under a second.
pub fn tiny_config() -> TrainConfig {
    let mut c = TrainConfig::default();
    c.steps = 3000;
    c.capacity = 2000;
    c.n_start = 600;
    c.hidden = vec![8, 8];
    c.batch = Some(16);
    c.bin_width = 250;
    c.reward_every = 100;
    c.dkl_samples = 32;
    c.wall_clock = false;
    c
}

pub fn run_rows(trainer: &mut Trainer) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    trainer
        .run(|r| {
            rows.push(*r);
            Ok(())
        })
        .unwrap();
    rows
}

pub fn csv_of(rows: &[MetricsRow]) -> String {
    let mut s = String::from(refer::harness::metrics::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}
