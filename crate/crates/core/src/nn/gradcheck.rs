//! Central finite-difference gradient checking.

use ndarray::{Array2, ArrayView2};

use super::{Mlp, Parameters};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-4;
/// Inputs whose hidden pre-activations come closer than this to a ReLU kink
/// are nudged before checking.
pub const KINK_GUARD: f64 = 1e-6;
const MAX_NUDGES: usize = 16;

/// `|a − n| / max(1, |a|, |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Central-difference gradient of `loss` with respect to every parameter.
pub fn numeric_gradient<P, F>(params: &mut P, mut loss: F, step: f64) -> Vec<Vec<f64>>
where
    P: Parameters + ?Sized,
    F: FnMut(&P) -> f64,
{
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (t, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = params.tensors()[t][i];
            params.tensors_mut()[t][i] = orig + step;
            let plus = loss(params);
            params.tensors_mut()[t][i] = orig - step;
            let minus = loss(params);
            params.tensors_mut()[t][i] = orig;
            *gi = (plus - minus) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

pub fn max_relative_error<P: Parameters + ?Sized>(analytic: &P, numeric: &[Vec<f64>]) -> f64 {
    analytic
        .tensors()
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.iter().zip(n).map(|(&a, &n)| relative_error(a, n)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// The input sat on a ReLU kink and was nudged before checking.
    pub input_perturbed: bool,
}

/// Compares backprop gradients of `loss_fn ∘ m` against central differences.
///
/// `loss_fn` maps the network output to `(loss, dloss/doutput)`.
pub fn grad_check<F>(m: &Mlp, loss_fn: F, x: ArrayView2<'_, f64>) -> Result<GradCheck>
where
    F: Fn(ArrayView2<'_, f64>) -> (f64, Array2<f64>),
{
    let mut x = x.to_owned();
    let mut input_perturbed = false;
    let mut nudges = 0;
    let (out, cache) = loop {
        let (out, cache) = m.forward(x.view())?;
        if cache.min_abs_preactivation() >= KINK_GUARD || nudges == MAX_NUDGES {
            break (out, cache);
        }
        nudges += 1;
        input_perturbed = true;
        let scale = 1e-3 * nudges as f64;
        for (k, v) in x.iter_mut().enumerate() {
            *v += scale * ((k as f64 + 1.0) * 0.618_033_988_75).sin();
        }
    };
    let (_, d_out) = loss_fn(out.view());
    let (_, analytic) = m.backward(&cache, d_out.view())?;
    let mut probe = m.clone();
    let numeric = numeric_gradient(
        &mut probe,
        |net: &Mlp| {
            let y = net.predict(x.view()).expect("shape checked above");
            loss_fn(y.view()).0
        },
        FD_STEP,
    );
    Ok(GradCheck {
        max_rel_error: max_relative_error(&analytic, &numeric),
        input_perturbed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::softmax_rows;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_input(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
    }

    /// Mean label-smoothed cross-entropy over rows, target class = row % C.
    fn smoothed_ce(out: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        let eps = 0.1;
        let (b, c) = out.dim();
        let p = softmax_rows(out);
        let mut loss = 0.0;
        let mut grad = p.clone();
        for r in 0..b {
            for k in 0..c {
                let y = if k == r % c { 1.0 - eps } else { 0.0 } + eps / c as f64;
                loss -= y * p[[r, k]].ln();
                grad[[r, k]] -= y;
            }
        }
        (loss / b as f64, grad / b as f64)
    }

    #[test]
    fn small_net_with_smoothed_ce() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Mlp::new(&[5, 7, 6, 4], &mut rng);
        let x = random_input(6, 5, 12);
        let r = grad_check(&m, smoothed_ce, x.view()).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn linear_net_with_quadratic_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Mlp::new(&[4, 3], &mut rng);
        let x = random_input(5, 4, 6);
        let quadratic = |y: ArrayView2<'_, f64>| (0.5 * y.mapv(|v| v * v).sum(), y.to_owned());
        let r = grad_check(&m, quadratic, x.view()).unwrap();
        assert!(r.max_rel_error <= 1e-7, "{r:?}");
        assert!(!r.input_perturbed);
    }

    #[test]
    fn kink_input_is_nudged() {
        let mut m = Mlp::zeros(&[2, 3, 2]);
        m.layers[0].w = ndarray::array![[1.0, -1.0, 0.5], [1.0, 1.0, -0.5]];
        m.layers[1].w = ndarray::array![[1.0, 0.2], [-0.3, 1.0], [0.7, 0.7]];
        // first hidden unit sees exactly 0
        let x = ndarray::array![[1.0, -1.0], [0.5, 0.25]];
        let r = grad_check(&m, smoothed_ce, x.view()).unwrap();
        assert!(r.input_perturbed);
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }
}
