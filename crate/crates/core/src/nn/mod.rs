//! Dense networks with hand-written backpropagation, AdamW, and gradient
//! checking.

mod adamw;
pub mod gradcheck;
mod mlp;
mod model;

use ndarray::{Array2, ArrayView2, Axis, Zip};

pub use adamw::{AdamWConfig, OptimState};
pub use gradcheck::{grad_check, GradCheck};
pub use mlp::{Dense, Mlp, MlpCache};
pub use model::{Branch, BranchCache, ModelParams, PROJ_DIM};

/// Anything that exposes its trainable tensors as flat slices in a fixed order.
///
/// Gradient containers use the same type as the parameters they belong to,
/// so tensor `i` of the gradient lines up with tensor `i` of the parameters.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Row-wise softmax.
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|p| p / sum);
    }
    out
}

/// Pulls `dL/dp` back through a row-wise softmax: `dz = p ⊙ (dp − ⟨dp, p⟩)`.
pub fn softmax_backward_rows(probs: ArrayView2<'_, f64>, d_probs: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    Zip::from(out.rows_mut())
        .and(probs.rows())
        .and(d_probs.rows())
        .for_each(|mut o, p, g| {
            let dot = p.dot(&g);
            Zip::from(&mut o).and(&p).and(&g).for_each(|o, &p, &g| *o = p * (g - dot));
        });
    out
}
