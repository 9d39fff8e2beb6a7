/// Worst-case disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Index (into the checked coordinates) where the maximum occurred.
    pub worst: Option<usize>,
}

/// Compare `analytic[i]` against `(f(θ+h e_i) − f(θ−h e_i)) / 2h` for every
/// `i` in `coords`. The error is `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check_coords<F>(mut f: F, params: &[f64], analytic: &[f64], coords: &[usize], h: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    let mut theta = params.to_vec();
    let mut out = GradCheck { max_rel_error: 0.0, worst: None };
    for &i in coords {
        let orig = theta[i];
        theta[i] = orig + h;
        let fp = f(&theta);
        theta[i] = orig - h;
        let fm = f(&theta);
        theta[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let mut err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        if err.is_nan() {
            err = f64::INFINITY;
        }
        if out.worst.is_none() || err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst = Some(i);
        }
    }
    out
}

/// [`grad_check_coords`] over every coordinate.
pub fn grad_check<F>(f: F, params: &[f64], analytic: &[f64], h: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..params.len()).collect();
    grad_check_coords(f, params, analytic, &coords, h)
}
