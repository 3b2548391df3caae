//! Adam and the joint c_max / learning-rate annealing schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c_max(t) = 1 + C / (1 + A t)` and `eta(t) = eta0 / (1 + A t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta0: f64,
    pub c: f64,
    pub a: f64,
}

impl Schedule {
    pub fn new(eta0: f64, c: f64, a: f64) -> Result<Self> {
        if !(eta0 > 0.0 && c > 0.0 && a >= 0.0) {
            return Err(Error::Config(format!(
                "schedule needs eta0 > 0, C > 0, A >= 0 (got {eta0}, {c}, {a})"
            )));
        }
        Ok(Self { eta0, c, a })
    }

    /// Returns `(c_max, eta)` at time step `t`.
    pub fn anneal(&self, t: u64) -> (f64, f64) {
        let decay = 1.0 + self.a * t as f64;
        (1.0 + self.c / decay, self.eta0 / decay)
    }

    pub fn learning_rate(&self, t: u64) -> f64 {
        self.anneal(t).1
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update of `params` along `-grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                what: "adam step",
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient component {i} = {}",
                grads[i]
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        Ok(())
    }
}

/// Adds the L2 penalty gradient `decay * w` for the parameters in `ranges`.
pub fn add_weight_decay(
    grads: &mut [f64],
    params: &[f64],
    decay: f64,
    ranges: impl IntoIterator<Item = std::ops::Range<usize>>,
) {
    for r in ranges {
        for i in r {
            grads[i] += decay * params[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn anneal_values() {
        let s = Schedule::new(1e-4, 4.0, 5e-7).unwrap();
        assert_eq!(s.anneal(0), (5.0, 1e-4));
        let (c, eta) = s.anneal(2_000_000);
        assert_abs_diff_eq!(c, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta, 0.5e-4, epsilon = 1e-18);
        let flat = Schedule::new(1e-4, 4.0, 0.0).unwrap();
        for t in [0, 10, 1_000_000_000] {
            assert_eq!(flat.anneal(t), (5.0, 1e-4));
        }
        assert!(Schedule::new(0.0, 4.0, 0.0).is_err());
        assert!(Schedule::new(1e-4, 4.0, -1.0).is_err());
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut st = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        st.step(&mut p, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut st = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        let g = [3.0, -1e-3];
        st.step(&mut p, &g, 1e-2).unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            let want = 1e-2 * gi.abs() / (gi.abs() + ADAM_EPS);
            assert_abs_diff_eq!(pi.abs(), want, epsilon = 1e-15);
            assert!(pi.signum() == -gi.signum());
        }
    }

    #[test]
    fn matches_hand_rolled_trace() {
        // hand-unrolled Adam on two scalars with gradients fixed per step
        let grads = [[0.5, -1.0], [0.25, 2.0], [-0.75, 0.1]];
        let lr = 0.1;
        let mut want = [1.0f64, -1.0f64];
        let (mut m0, mut m1, mut v0, mut v1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as f64;
            m0 = 0.9 * m0 + 0.1 * g[0];
            m1 = 0.9 * m1 + 0.1 * g[1];
            v0 = 0.999 * v0 + 0.001 * g[0] * g[0];
            v1 = 0.999 * v1 + 0.001 * g[1] * g[1];
            let b1 = 1.0 - 0.9f64.powf(t);
            let b2 = 1.0 - 0.999f64.powf(t);
            want[0] -= lr * (m0 / b1) / ((v0 / b2).sqrt() + 1e-8);
            want[1] -= lr * (m1 / b1) / ((v1 / b2).sqrt() + 1e-8);
        }
        let mut st = AdamState::new(2);
        let mut p = vec![1.0, -1.0];
        for g in &grads {
            st.step(&mut p, g, lr).unwrap();
        }
        assert_abs_diff_eq!(p[0], want[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], want[1], epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut st = AdamState::new(2);
        let mut p = vec![0.0; 2];
        assert!(st.step(&mut p, &[1.0], 1e-3).is_err());
        assert!(matches!(
            st.step(&mut p, &[1.0, f64::NAN], 1e-3),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn weight_decay_adds_scaled_params() {
        let mut g = vec![1.0, 1.0, 1.0];
        add_weight_decay(&mut g, &[2.0, 4.0, 8.0], 1e-4, [0..2]);
        assert_eq!(g, vec![1.0002, 1.0004, 1.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn schedule_monotone(c in 0.1f64..10.0, a in 0.0f64..1e-3, t1 in 0u64..10_000_000, dt in 0u64..10_000_000) {
                let s = Schedule::new(1e-4, c, a).unwrap();
                let (c1, e1) = s.anneal(t1);
                let (c2, e2) = s.anneal(t1 + dt);
                prop_assert!(c1 >= c2 && e1 >= e2);
                prop_assert!(c2 > 1.0);
            }

            #[test]
            fn step_norm_bounded(g in proptest::collection::vec(-1e3f64..1e3, 1..20), steps in 1usize..5) {
                let n = g.len();
                let mut st = AdamState::new(n);
                let mut p = vec![0.0; n];
                let lr = 1e-3;
                for _ in 0..steps {
                    let before = p.clone();
                    st.step(&mut p, &g, lr).unwrap();
                    let norm: f64 = p.iter().zip(&before).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    prop_assert!(norm <= lr * (n as f64).sqrt() * (1.0 + 1e-9));
                    prop_assert!(st.v.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }
}
