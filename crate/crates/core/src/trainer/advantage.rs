/// Undiscounted suffix sums `x_t + x_{t+1} + ... + x_{T-1}`.
pub fn compute_returns(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    let mut acc = 0.0;
    for t in (0..xs.len()).rev() {
        acc += xs[t];
        out[t] = acc;
    }
    out
}

/// Generalized advantage estimates for one episode.
///
/// `values` has one more entry than `xs`: the bootstrap value after the
/// last step, zero when the episode ends there.
pub fn gae_advantages(xs: &[f64], values: &[f64], gamma: f64, gae_lambda: f64) -> Vec<f64> {
    assert_eq!(values.len(), xs.len() + 1, "values must include the bootstrap entry");
    let mut adv = vec![0.0; xs.len()];
    let mut next = 0.0;
    for t in (0..xs.len()).rev() {
        let delta = xs[t] + gamma * values[t + 1] - values[t];
        next = delta + gamma * gae_lambda * next;
        adv[t] = next;
    }
    adv
}

/// `operational - lambda * safety`, elementwise.
pub fn adjusted_advantages(adv_opr: &[f64], adv_safe: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(adv_opr.len(), adv_safe.len());
    adv_opr.iter().zip(adv_safe).map(|(a, s)| a - lambda * s).collect()
}

/// Shifts and scales to zero mean and unit variance in place.
pub fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
