//! Backpropagation against central finite differences for a small MLP
//! under a label-smoothed cross-entropy loss.

use coview::losses::{smoothed_ce_grad, LossConfig};
use coview::nn::{grad_check, softmax_backward_rows, softmax_rows, Mlp};
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> coview::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(&[6, 8, 8, 5], &mut rng);
    let x = Array2::from_shape_simple_fn((4, 6), || StandardNormal.sample(&mut rng));
    let targets = [0usize, 2, 1, 2];
    let cfg = LossConfig::default();

    let loss = |logits: ArrayView2<'_, f64>| {
        let p = softmax_rows(logits);
        let mut dp = Array2::zeros(p.raw_dim());
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let (l, g) = smoothed_ce_grad(&p.row(i).to_vec(), t, 3, &cfg).expect("target in range");
            total += l / targets.len() as f64;
            for (d, v) in dp.row_mut(i).iter_mut().zip(g) {
                *d = v / targets.len() as f64;
            }
        }
        (total, softmax_backward_rows(p.view(), dp.view()))
    };

    let check = grad_check(&net, loss, x.view())?;
    println!(
        "max relative error {:.3e} (input nudged off a ReLU kink: {})",
        check.max_rel_error, check.input_perturbed
    );
    Ok(())
}
