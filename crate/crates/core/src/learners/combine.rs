//! Rule 2 combination of task and penalty directions.

/// `beta * g_task - (1 - beta) * g_kl` for near-policy samples and `-(1 - beta) * g_kl`
/// otherwise. `g_task` is an ascent direction of the task objective and `g_kl` the gradient
/// of `D_KL(mu || pi)`, so the result is an update direction.
pub fn refer_combine(g_task: &[f64], g_kl: &[f64], beta: f64, near: bool) -> Vec<f64> {
    assert_eq!(g_task.len(), g_kl.len());
    let task_w = if near { beta } else { 0.0 };
    g_task
        .iter()
        .zip(g_kl)
        .map(|(t, k)| task_w * t - (1.0 - beta) * k)
        .collect()
}

/// Same combination expressed on loss gradients (what the optimizer descends):
/// `beta * near * g_task_loss + (1 - beta) * g_kl`, accumulated into `out` with weight `scale`.
pub fn combine_loss_into(
    out: &mut [f64],
    g_task_loss: &[f64],
    g_kl: &[f64],
    beta: f64,
    near: bool,
    scale: f64,
) {
    let task_w = if near { beta } else { 0.0 };
    for ((o, t), k) in out.iter_mut().zip(g_task_loss).zip(g_kl) {
        *o += scale * (task_w * t + (1.0 - beta) * k);
    }
}
