/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Relative error for every coordinate, in parameter order.
    pub errors: Vec<f64>,
    pub max: f64,
    pub worst_index: Option<usize>,
}

impl GradCheckReport {
    /// Largest error over the coordinate range `[start, start + len)`.
    pub fn max_in(&self, start: usize, len: usize) -> f64 {
        self.errors[start..start + len].iter().copied().fold(0.0, f64::max)
    }
}

/// `|a - g| / max(|a|, |g|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient returned by `loss_fn` at `params` with
/// central differences `(L(θ + h e_i) - L(θ - h e_i)) / 2h`.
///
/// `loss_fn` must be deterministic: any dropout masks have to be frozen.
pub fn grad_check<F>(mut loss_fn: F, params: &[f64], h: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match parameter count");
    let mut theta = params.to_vec();
    let mut errors = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let (up, _) = loss_fn(&theta);
        theta[i] = orig - h;
        let (down, _) = loss_fn(&theta);
        theta[i] = orig;
        errors.push(relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    let (worst_index, max) = errors
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0), |(wi, m), (i, e)| if e > m { (Some(i), e) } else { (wi, m) });
    GradCheckReport { errors, max, worst_index }
}
