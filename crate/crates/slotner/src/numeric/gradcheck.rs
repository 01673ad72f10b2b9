//! Central finite-difference verification of recorded gradients.
//!
//! The check rebuilds the loss graph from scratch for every probe, so it
//! exercises only forward evaluations and stays independent of the backward
//! implementation it is verifying.

use super::tensor::Tensor;

/// One element whose analytic and numerically estimated gradients disagree.
#[derive(Debug, Clone)]
pub struct GradCheckFailure {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

fn agrees(analytic: f64, numeric: f64, rtol: f64, atol: f64) -> bool {
    let diff = (analytic - numeric).abs();
    if diff <= atol {
        return true;
    }
    diff <= rtol * analytic.abs().max(numeric.abs())
}

/// Compare the recorded gradient of `loss_fn` w.r.t. every listed tensor
/// against central finite differences with step `eps`.
///
/// Agreement requires `|a - n| <= atol` or relative error below `rtol`.
/// Returns every disagreeing element; an empty list means the check passed.
pub fn check_gradients<F>(
    params: &[(String, Tensor)],
    mut loss_fn: F,
    eps: f64,
    rtol: f64,
    atol: f64,
) -> Vec<GradCheckFailure>
where
    F: FnMut() -> Tensor,
{
    for (_, p) in params {
        p.zero_grad();
    }
    let loss = loss_fn();
    loss.backward().expect("loss must be scalar");
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|(_, p)| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut failures = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for (pi, (name, p)) in params.iter().enumerate() {
        for i in 0..p.numel() {
            let original = p.get(i);
            p.set(i, original + eps);
            let plus = loss_fn().item();
            p.set(i, original - eps);
            let minus = loss_fn().item();
            p.set(i, original);
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][i];
            if !agrees(a, numeric, rtol, atol) {
                failures.push(GradCheckFailure {
                    tensor: name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    failures
}
