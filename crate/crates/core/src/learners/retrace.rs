//! Clipped-trace value targets computed backwards through an episode.
//!
//! For an episode of `L` observations, `rewards[j]` is the reward observed on arrival at
//! step `j` (so `rewards[0] == 0`), `values[j]` the cached state value and `rhos[j]` the
//! importance weight of the action taken at step `j < L-1`. The closing step carries the
//! bootstrap value in `values[L-1]` (zero for terminal states).

/// Truncated trace coefficient `min(1, rho)`.
pub fn clipped_trace(rho: f64) -> f64 {
    rho.min(1.0)
}

/// Returns `(vtbc, qret)` with lengths `L` and `L-1`:
/// `qret[t] = r[t+1]/scale + gamma * vtbc[t+1]`,
/// `vtbc[t] = V[t] + min(1, rho[t]) * (qret[t] - Q[t])`, `vtbc[L-1] = V[L-1]`.
///
/// `q_values` defaults to `values` (action values approximated by state values).
pub fn vtbc_backward(
    rewards: &[f64],
    values: &[f64],
    q_values: Option<&[f64]>,
    rhos: &[f64],
    gamma: f64,
    reward_scale: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    assert!(n >= 1 && rewards.len() == n && rhos.len() + 1 == n);
    let mut vtbc = vec![0.0; n];
    let mut qret = vec![0.0; n - 1];
    vtbc[n - 1] = values[n - 1];
    backward_prefix(
        rewards,
        values,
        q_values,
        rhos,
        gamma,
        reward_scale,
        &mut vtbc,
        &mut qret,
        n - 1,
    );
    (vtbc, qret)
}

/// Recompute `qret[t]` and `vtbc[t]` for `t < upto`, in place, keeping `vtbc[upto]`.
#[allow(clippy::too_many_arguments)]
pub fn backward_prefix(
    rewards: &[f64],
    values: &[f64],
    q_values: Option<&[f64]>,
    rhos: &[f64],
    gamma: f64,
    reward_scale: f64,
    vtbc: &mut [f64],
    qret: &mut [f64],
    upto: usize,
) {
    let inv = 1.0 / reward_scale;
    let q = q_values.unwrap_or(values);
    for t in (0..upto).rev() {
        let target = rewards[t + 1] * inv + gamma * vtbc[t + 1];
        qret[t] = target;
        vtbc[t] = values[t] + clipped_trace(rhos[t]) * (target - q[t]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_step_terminal() {
        let (v, q) = vtbc_backward(&[0.0, 1.0], &[0.5, 0.0], None, &[2.0], 0.995, 1.0);
        assert_abs_diff_eq!(q[0], 1.0);
        assert_abs_diff_eq!(v[0], 1.0);
        let (v, _) = vtbc_backward(&[0.0, 1.0], &[0.5, 0.0], None, &[0.5], 0.995, 1.0);
        assert_abs_diff_eq!(v[0], 0.75);
    }

    #[test]
    fn on_policy_telescopes_to_discounted_return() {
        let rewards = [0.0, 1.0, -2.0, 0.5, 3.0, 1.5];
        let values = [0.3, -0.1, 2.0, 0.7, 1.1, 0.0];
        let gamma = 0.9;
        let (v, _) = vtbc_backward(&rewards, &values, None, &[1.0; 5], gamma, 1.0);
        for t in 0..5 {
            let mc: f64 = (t + 1..6).map(|j| gamma.powi((j - t - 1) as i32) * rewards[j]).sum();
            assert_abs_diff_eq!(v[t], mc, epsilon = 1e-12);
        }
    }

    #[test]
    fn reward_scale_divides_rewards() {
        let (a, _) = vtbc_backward(&[0.0, 2.0, 4.0], &[0.1, 0.2, 0.0], None, &[0.7, 1.3], 0.99, 2.0);
        let (b, _) = vtbc_backward(&[0.0, 1.0, 2.0], &[0.1, 0.2, 0.0], None, &[0.7, 1.3], 0.99, 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }
}
