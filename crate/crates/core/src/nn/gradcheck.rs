//! Central finite differences for checking analytic gradients.

use super::Parameters;

/// Relative error `|a − n| / max(|a| + |n|, floor)`; the floor keeps
/// near-zero gradients from inflating the ratio.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// Worst relative error between `analytic` and central differences of
/// `loss` over every scalar parameter.
pub fn max_relative_error<P, F>(params: &P, analytic: &P, step: f64, floor: f64, mut loss: F) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let mut work = params.clone();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.data().to_vec()).collect();
    let mut worst: f64 = 0.0;
    let n_tensors = grads.len();
    for ti in 0..n_tensors {
        for k in 0..grads[ti].len() {
            let orig = work.tensors()[ti].1.data()[k];
            work.tensors_mut()[ti].1.data_mut()[k] = orig + step;
            let up = loss(&work);
            work.tensors_mut()[ti].1.data_mut()[k] = orig - step;
            let down = loss(&work);
            work.tensors_mut()[ti].1.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(grads[ti][k], numeric, floor));
        }
    }
    worst
}
