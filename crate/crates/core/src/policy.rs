//! Diagonal-Gaussian policies truncated at three standard deviations.
//!
//! Densities are those of the truncated normal, so every component carries the constant
//! truncation mass [`TRUNCATION_MASS`]. Because the box scales with sigma, the mass does not
//! depend on the policy parameters and the score function below is exact. The KL divergence
//! uses the closed form of the untruncated Gaussians.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Half-width of the sampling box, in standard deviations.
pub const TRUNCATION: f64 = 3.0;

/// `erf(3 / sqrt(2))`: probability mass of a standard normal inside (-3, 3).
pub const TRUNCATION_MASS: f64 = 0.997_300_203_936_739_8;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Behavior statistics frozen when an action was taken.
pub type BehaviorRecord = GaussianPolicy;

/// Gradient of a scalar with respect to a policy's mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        if mean.len() != stddev.len() {
            return Err(Error::Dimension {
                what: "policy stddev",
                expected: mean.len(),
                got: stddev.len(),
            });
        }
        if stddev.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::NonFinite(format!(
                "policy statistics mean={mean:?} stddev={stddev:?}"
            )));
        }
        Ok(Self { mean, stddev })
    }

    /// Same standard deviation in every component.
    pub fn isotropic(mean: Vec<f64>, stddev: f64) -> Result<Self> {
        let s = vec![stddev; mean.len()];
        Self::new(mean, s)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn in_box(&self, action: &[f64]) -> bool {
        action
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .all(|(a, (m, s))| (a - m).abs() < TRUNCATION * s)
    }

    /// Per-component rejection sampling from `N(m_i, s_i^2)` restricted to the open 3-sigma box.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let a: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.stddev)
            .map(|(&m, &s)| loop {
                let z: f64 = rng.sample(StandardNormal);
                if z.abs() < TRUNCATION {
                    break m + s * z;
                }
            })
            .collect();
        assert!(
            a.iter()
                .zip(self.mean.iter().zip(&self.stddev))
                .all(|(a, (m, s))| (a - m).abs() <= TRUNCATION * s),
            "sampled action left the truncation box"
        );
        a
    }

    /// Log density of the truncated policy; `-inf` outside the box.
    pub fn log_density(&self, action: &[f64]) -> f64 {
        if !self.in_box(action) {
            return f64::NEG_INFINITY;
        }
        let ln_mass = TRUNCATION_MASS.ln();
        action
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(a, (m, s))| {
                let z = (a - m) / s;
                -0.5 * z * z - s.ln() - HALF_LN_2PI - ln_mass
            })
            .sum()
    }
}

/// `pi(a) / mu(a)`; zero when `a` lies outside `pi`'s box.
pub fn importance_weight(pi: &GaussianPolicy, mu: &BehaviorRecord, action: &[f64]) -> f64 {
    let lp = pi.log_density(action);
    if lp == f64::NEG_INFINITY {
        return 0.0;
    }
    (lp - mu.log_density(action)).exp()
}

/// Closed-form `D_KL(mu || pi)` of two diagonal Gaussians.
pub fn kl_divergence(mu: &BehaviorRecord, pi: &GaussianPolicy) -> f64 {
    mu.mean
        .iter()
        .zip(&mu.stddev)
        .zip(pi.mean.iter().zip(&pi.stddev))
        .map(|((mm, ms), (pm, ps))| {
            let dm = mm - pm;
            (ps / ms).ln() + (ms * ms + dm * dm) / (2.0 * ps * ps) - 0.5
        })
        .sum()
}

/// Gradient of `D_KL(mu || pi)` with respect to `pi`'s mean and stddev.
pub fn kl_gradient(mu: &BehaviorRecord, pi: &GaussianPolicy) -> PolicyGrad {
    let mut g = PolicyGrad {
        mean: Vec::with_capacity(pi.dim()),
        stddev: Vec::with_capacity(pi.dim()),
    };
    for ((mm, ms), (pm, ps)) in mu
        .mean
        .iter()
        .zip(&mu.stddev)
        .zip(pi.mean.iter().zip(&pi.stddev))
    {
        let dm = pm - mm;
        g.mean.push(dm / (ps * ps));
        g.stddev.push(1.0 / ps - (ms * ms + dm * dm) / (ps * ps * ps));
    }
    g
}

/// Score function: gradient of `ln pi(a)` with respect to `pi`'s mean and stddev.
pub fn logprob_gradient(pi: &GaussianPolicy, action: &[f64]) -> PolicyGrad {
    let mut g = PolicyGrad {
        mean: Vec::with_capacity(pi.dim()),
        stddev: Vec::with_capacity(pi.dim()),
    };
    for (a, (m, s)) in action.iter().zip(pi.mean.iter().zip(&pi.stddev)) {
        let u = a - m;
        g.mean.push(u / (s * s));
        g.stddev.push((u * u - s * s) / (s * s * s));
    }
    g
}
