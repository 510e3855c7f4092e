//! Objective terms: label-smoothed cross-entropy on known types, the
//! pairwise hinge loss over symmetrized KL for unlabeled pairs, the
//! cross-view consistency term, and their weighted total.
//!
//! Every term comes in two forms: a plain value, and a `*_grad` variant that
//! also returns the gradient with respect to the input probabilities. The
//! trainer pulls those back through the softmax.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Hinge margin for pairs in different pseudo-clusters.
    pub alpha: f64,
    /// Weight of the consistency term.
    pub beta: f64,
    pub smoothing_eps: f64,
    pub prob_clamp: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 0.2,
            smoothing_eps: 0.1,
            prob_clamp: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.smoothing_eps) {
            return Err(Error::Config(format!(
                "smoothing_eps must be in [0, 1), got {}",
                self.smoothing_eps
            )));
        }
        if !(self.prob_clamp > 0.0) {
            return Err(Error::Config(format!(
                "prob_clamp must be > 0, got {}",
                self.prob_clamp
            )));
        }
        Ok(())
    }
}

/// A batch-level loss value. `degenerate` marks batches too small to define
/// the term (fewer than two unlabeled members), which contribute zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub degenerate: bool,
}

/// Label-smoothed cross-entropy. The smoothing mass spreads over every class
/// of `pred`; `true_class` must fall inside the first `num_known` entries.
pub fn smoothed_ce(pred: &[f64], true_class: usize, num_known: usize, cfg: &LossConfig) -> Result<f64> {
    Ok(smoothed_ce_grad(pred, true_class, num_known, cfg)?.0)
}

pub fn smoothed_ce_grad(
    pred: &[f64],
    true_class: usize,
    num_known: usize,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    if true_class >= num_known || num_known > pred.len() {
        return Err(Error::ClassOutOfRange {
            index: true_class,
            known: num_known.min(pred.len()),
        });
    }
    let c = pred.len() as f64;
    let eps = cfg.smoothing_eps;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (k, (&p, g)) in pred.iter().zip(grad.iter_mut()).enumerate() {
        let y = if k == true_class { 1.0 - eps } else { 0.0 } + eps / c;
        if p > cfg.prob_clamp {
            loss -= y * p.ln();
            *g = -y / p;
        } else {
            loss -= y * cfg.prob_clamp.ln();
        }
    }
    Ok((loss, grad))
}

/// Clamped, renormalized copy of a distribution plus what the backward pass
/// needs.
struct Clamped {
    p: Vec<f64>,
    log_p: Vec<f64>,
    sum: f64,
    active: Vec<bool>,
}

impl Clamped {
    fn new(p: ArrayView1<'_, f64>, clamp: f64) -> Self {
        let raw: Vec<f64> = p.iter().map(|&v| v.max(clamp)).collect();
        let active = p.iter().map(|&v| v > clamp).collect();
        let sum: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let log_p = p.iter().map(|v| v.ln()).collect();
        Self {
            p,
            log_p,
            sum,
            active,
        }
    }

    /// Maps a gradient with respect to the renormalized vector back to the
    /// raw input, adding into `out`.
    fn pull_back(&self, g: &[f64], mut out: ndarray::ArrayViewMut1<'_, f64>) {
        let dot: f64 = g.iter().zip(&self.p).map(|(g, p)| g * p).sum();
        for (k, o) in out.iter_mut().enumerate() {
            if self.active[k] {
                *o += (g[k] - dot) / self.sum;
            }
        }
    }
}

/// `½ Σ (p − q)(ln p − ln q)` on clamped distributions.
fn sym_kl_clamped(p: &Clamped, q: &Clamped) -> f64 {
    0.5 * p
        .p
        .iter()
        .zip(&q.p)
        .zip(p.log_p.iter().zip(&q.log_p))
        .map(|((a, b), (la, lb))| (a - b) * (la - lb))
        .sum::<f64>()
}

/// Adds `scale · ∂d/∂p̃` to `gp` and `scale · ∂d/∂q̃` to `gq`.
fn sym_kl_clamped_grad(p: &Clamped, q: &Clamped, scale: f64, gp: &mut [f64], gq: &mut [f64]) {
    for k in 0..p.p.len() {
        let (a, b) = (p.p[k], q.p[k]);
        let log_ratio = p.log_p[k] - q.log_p[k];
        gp[k] += scale * 0.5 * (log_ratio + 1.0 - b / a);
        gq[k] += scale * 0.5 * (-log_ratio + 1.0 - a / b);
    }
}

fn check_same_len(p: usize, q: usize) -> Result<()> {
    if p != q {
        return Err(Error::Shape(format!(
            "distributions have different lengths ({p} vs {q})"
        )));
    }
    Ok(())
}

/// Symmetrized KL divergence `½(KL(p‖q) + KL(q‖p))`. Both inputs are
/// clamped elementwise to `prob_clamp` and renormalized first.
pub fn sym_kl(p: &[f64], q: &[f64], cfg: &LossConfig) -> Result<f64> {
    check_same_len(p.len(), q.len())?;
    let cp = Clamped::new(ArrayView1::from(p), cfg.prob_clamp);
    let cq = Clamped::new(ArrayView1::from(q), cfg.prob_clamp);
    Ok(sym_kl_clamped(&cp, &cq))
}

pub fn sym_kl_grad(p: &[f64], q: &[f64], cfg: &LossConfig) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_same_len(p.len(), q.len())?;
    let cp = Clamped::new(ArrayView1::from(p), cfg.prob_clamp);
    let cq = Clamped::new(ArrayView1::from(q), cfg.prob_clamp);
    let n = p.len();
    let (mut gp_t, mut gq_t) = (vec![0.0; n], vec![0.0; n]);
    sym_kl_clamped_grad(&cp, &cq, 1.0, &mut gp_t, &mut gq_t);
    let mut gp = ndarray::Array1::zeros(n);
    let mut gq = ndarray::Array1::zeros(n);
    cp.pull_back(&gp_t, gp.view_mut());
    cq.pull_back(&gq_t, gq.view_mut());
    Ok((sym_kl_clamped(&cp, &cq), gp.to_vec(), gq.to_vec()))
}

/// `q·d + (1 − q)·max(0, α − d)`
pub fn pair_loss(d: f64, same: bool, cfg: &LossConfig) -> f64 {
    if same {
        d
    } else {
        (cfg.alpha - d).max(0.0)
    }
}

/// Derivative of [`pair_loss`] in `d`.
pub fn pair_loss_grad(d: f64, same: bool, cfg: &LossConfig) -> f64 {
    if same {
        1.0
    } else if d < cfg.alpha {
        -1.0
    } else {
        0.0
    }
}

/// Sum over pairs `i < j` of `l(d_ij, q_ij)` where `d` comes from `preds` and
/// `q` from `pseudo`. When `grad` is given, `∂sum/∂preds · scale` is added.
fn pair_sum(
    preds: ArrayView2<'_, f64>,
    pseudo: &[usize],
    cfg: &LossConfig,
    grad: Option<(&mut Array2<f64>, f64)>,
) -> f64 {
    let b = preds.nrows();
    let c = preds.ncols();
    let rows: Vec<Clamped> = preds
        .rows()
        .into_iter()
        .map(|r| Clamped::new(r, cfg.prob_clamp))
        .collect();
    let mut total = 0.0;
    let mut g_tilde = grad.as_ref().map(|_| vec![vec![0.0; c]; b]);
    for i in 0..b {
        for j in i + 1..b {
            let same = pseudo[i] == pseudo[j];
            let d = sym_kl_clamped(&rows[i], &rows[j]);
            total += pair_loss(d, same, cfg);
            if let Some(gt) = g_tilde.as_mut() {
                let dl = pair_loss_grad(d, same, cfg);
                if dl != 0.0 {
                    let (lo, hi) = gt.split_at_mut(j);
                    sym_kl_clamped_grad(&rows[i], &rows[j], dl, &mut lo[i], &mut hi[0]);
                }
            }
        }
    }
    if let (Some((g, scale)), Some(gt)) = (grad, g_tilde) {
        for (i, row) in rows.iter().enumerate() {
            let scaled: Vec<f64> = gt[i].iter().map(|v| v * scale).collect();
            row.pull_back(&scaled, g.row_mut(i));
        }
    }
    total
}

fn check_batch(
    p1: ArrayView2<'_, f64>,
    p2: ArrayView2<'_, f64>,
    y1: &[usize],
    y2: &[usize],
) -> Result<()> {
    let b = p1.nrows();
    if p2.nrows() != b || y1.len() != b || y2.len() != b {
        return Err(Error::Shape(format!(
            "batch lists differ in length ({}, {}, {}, {})",
            b,
            p2.nrows(),
            y1.len(),
            y2.len()
        )));
    }
    check_same_len(p1.ncols(), p2.ncols())
}

fn num_pairs(b: usize) -> f64 {
    (b * (b - 1) / 2) as f64
}

/// Cross-view pair loss: mean over within-batch pairs of
/// `l(d¹_ij, q²_ij) + l(d²_ij, q¹_ij)`, where `dᵛ` is the divergence between
/// view-`v` predictions and `qᵛ` says whether view `v` put both instances in
/// the same pseudo-cluster.
pub fn unsup_batch_loss(
    preds1: ArrayView2<'_, f64>,
    preds2: ArrayView2<'_, f64>,
    pseudo1: &[usize],
    pseudo2: &[usize],
    cfg: &LossConfig,
) -> Result<BatchLoss> {
    check_batch(preds1, preds2, pseudo1, pseudo2)?;
    let b = preds1.nrows();
    if b < 2 {
        return Ok(BatchLoss {
            value: 0.0,
            degenerate: true,
        });
    }
    let sum = pair_sum(preds1, pseudo2, cfg, None) + pair_sum(preds2, pseudo1, cfg, None);
    Ok(BatchLoss {
        value: sum / num_pairs(b),
        degenerate: false,
    })
}

pub fn unsup_batch_loss_grad(
    preds1: ArrayView2<'_, f64>,
    preds2: ArrayView2<'_, f64>,
    pseudo1: &[usize],
    pseudo2: &[usize],
    cfg: &LossConfig,
) -> Result<(BatchLoss, Array2<f64>, Array2<f64>)> {
    check_batch(preds1, preds2, pseudo1, pseudo2)?;
    let b = preds1.nrows();
    let mut g1 = Array2::zeros(preds1.raw_dim());
    let mut g2 = Array2::zeros(preds2.raw_dim());
    if b < 2 {
        let loss = BatchLoss {
            value: 0.0,
            degenerate: true,
        };
        return Ok((loss, g1, g2));
    }
    let scale = 1.0 / num_pairs(b);
    let sum = pair_sum(preds1, pseudo2, cfg, Some((&mut g1, scale)))
        + pair_sum(preds2, pseudo1, cfg, Some((&mut g2, scale)));
    let loss = BatchLoss {
        value: sum * scale,
        degenerate: false,
    };
    Ok((loss, g1, g2))
}

/// Single-view form of the pair loss: predictions and pseudo-labels come
/// from the same view.
pub fn contrastive_batch_loss_grad(
    preds: ArrayView2<'_, f64>,
    pseudo: &[usize],
    cfg: &LossConfig,
) -> Result<(BatchLoss, Array2<f64>)> {
    if pseudo.len() != preds.nrows() {
        return Err(Error::Shape(format!(
            "{} predictions but {} pseudo-labels",
            preds.nrows(),
            pseudo.len()
        )));
    }
    let b = preds.nrows();
    let mut g = Array2::zeros(preds.raw_dim());
    if b < 2 {
        let loss = BatchLoss {
            value: 0.0,
            degenerate: true,
        };
        return Ok((loss, g));
    }
    let scale = 1.0 / num_pairs(b);
    let sum = pair_sum(preds, pseudo, cfg, Some((&mut g, scale)));
    let loss = BatchLoss {
        value: sum * scale,
        degenerate: false,
    };
    Ok((loss, g))
}

/// Mean over instances of `sym_kl(ŷ¹_i, ŷ²_i)`.
pub fn consistency_loss(
    preds1: ArrayView2<'_, f64>,
    preds2: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(consistency_loss_grad(preds1, preds2, cfg)?.0)
}

pub fn consistency_loss_grad(
    preds1: ArrayView2<'_, f64>,
    preds2: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if preds1.dim() != preds2.dim() {
        return Err(Error::Shape(format!(
            "view predictions have shapes {:?} and {:?}",
            preds1.dim(),
            preds2.dim()
        )));
    }
    let (b, c) = preds1.dim();
    let mut g1 = Array2::zeros((b, c));
    let mut g2 = Array2::zeros((b, c));
    if b == 0 {
        return Ok((0.0, g1, g2));
    }
    let scale = 1.0 / b as f64;
    let mut total = 0.0;
    for i in 0..b {
        let p = Clamped::new(preds1.row(i), cfg.prob_clamp);
        let q = Clamped::new(preds2.row(i), cfg.prob_clamp);
        total += sym_kl_clamped(&p, &q);
        let (mut gp, mut gq) = (vec![0.0; c], vec![0.0; c]);
        sym_kl_clamped_grad(&p, &q, scale, &mut gp, &mut gq);
        p.pull_back(&gp, g1.row_mut(i));
        q.pull_back(&gq, g2.row_mut(i));
    }
    Ok((total * scale, g1, g2))
}

/// `sup + unsup + β·consist`
pub fn total_loss(sup: f64, unsup: f64, consist: f64, cfg: &LossConfig) -> f64 {
    sup + unsup + cfg.beta * consist
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn ce_uniform_is_ln_c() {
        for eps in [0.0, 0.1, 0.5] {
            let c = LossConfig {
                smoothing_eps: eps,
                ..cfg()
            };
            for t in 0..2 {
                let v = smoothed_ce(&[0.25; 4], t, 2, &c).unwrap();
                assert!((v - 4f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ce_one_hot_without_smoothing_is_zero() {
        let c = LossConfig {
            smoothing_eps: 0.0,
            ..cfg()
        };
        assert_eq!(smoothed_ce(&[1.0, 0.0, 0.0], 0, 3, &c).unwrap(), 0.0);
    }

    #[test]
    fn ce_two_class_example() {
        // y = [0.95, 0.05] with eps = 0.1 over C = 2
        let v = smoothed_ce(&[0.95, 0.05], 0, 2, &cfg()).unwrap();
        let expected = -(0.95 * 0.95f64.ln() + 0.05 * 0.05f64.ln());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.198515).abs() < 1e-6);
    }

    #[test]
    fn ce_rejects_unknown_segment_target() {
        assert!(matches!(
            smoothed_ce(&[0.5, 0.5], 1, 1, &cfg()),
            Err(Error::ClassOutOfRange { index: 1, known: 1 })
        ));
    }

    #[test]
    fn sym_kl_examples() {
        assert_eq!(sym_kl(&[0.3, 0.7], &[0.3, 0.7], &cfg()).unwrap(), 0.0);
        let v = sym_kl(&[0.6, 0.4], &[0.4, 0.6], &cfg()).unwrap();
        assert!((v - 0.2 * 1.5f64.ln()).abs() < 1e-12);
        assert!((v - 0.081093).abs() < 1e-6);
        let d = 1e-8;
        let v = sym_kl(&[1.0 - d, d], &[d, 1.0 - d], &cfg()).unwrap();
        let expected = (1.0 - 2.0 * d) * ((1.0 - d) / d).ln();
        assert!((v - expected).abs() < 1e-9);
        assert!((v - 18.42).abs() < 0.01);
        assert!(sym_kl(&[1.0], &[0.5, 0.5], &cfg()).is_err());
    }

    #[test]
    fn sym_kl_handles_exact_zeros() {
        let v = sym_kl(&[1.0, 0.0], &[0.0, 1.0], &cfg()).unwrap();
        assert!(v.is_finite() && v > 18.0);
    }

    #[test]
    fn pair_loss_examples() {
        assert_eq!(pair_loss(0.5, true, &cfg()), 0.5);
        assert_eq!(pair_loss(0.5, false, &cfg()), 1.5);
        assert_eq!(pair_loss(3.0, false, &cfg()), 0.0);
    }

    #[test]
    fn unsup_examples() {
        let p = array![[0.2, 0.8], [0.2, 0.8], [0.2, 0.8]];
        let l = unsup_batch_loss(p.view(), p.view(), &[1, 1, 1], &[4, 4, 4], &cfg()).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(!l.degenerate);

        let p = array![[0.5, 0.5], [0.5, 0.5]];
        let l = unsup_batch_loss(p.view(), p.view(), &[0, 1], &[0, 1], &cfg()).unwrap();
        assert_eq!(l.value, 4.0);

        let one = array![[0.5, 0.5]];
        let l = unsup_batch_loss(one.view(), one.view(), &[0], &[0], &cfg()).unwrap();
        assert_eq!(l, BatchLoss { value: 0.0, degenerate: true });
    }

    #[test]
    fn unsup_matches_pair_enumeration() {
        let p1 = array![[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]];
        let p2 = array![[0.6, 0.3, 0.1], [0.2, 0.2, 0.6], [0.5, 0.25, 0.25]];
        let y1 = [0, 1, 0];
        let y2 = [2, 2, 1];
        let c = cfg();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d1 = sym_kl(p1.row(i).as_slice().unwrap(), p1.row(j).as_slice().unwrap(), &c).unwrap();
                let d2 = sym_kl(p2.row(i).as_slice().unwrap(), p2.row(j).as_slice().unwrap(), &c).unwrap();
                sum += pair_loss(d1, y2[i] == y2[j], &c) + pair_loss(d2, y1[i] == y1[j], &c);
                pairs += 1;
            }
        }
        let l = unsup_batch_loss(p1.view(), p2.view(), &y1, &y2, &c).unwrap();
        assert!((l.value - sum / pairs as f64).abs() < 1e-14);
    }

    #[test]
    fn consistency_examples() {
        let a = array![[0.6, 0.4]];
        let b = array![[0.4, 0.6]];
        let v = consistency_loss(a.view(), b.view(), &cfg()).unwrap();
        assert!((v - 0.081093).abs() < 1e-6);
        assert_eq!(consistency_loss(a.view(), a.view(), &cfg()).unwrap(), 0.0);
        let p = array![[0.6, 0.4], [0.9, 0.1]];
        let q = array![[0.4, 0.6], [0.5, 0.5]];
        let v = consistency_loss(p.view(), q.view(), &cfg()).unwrap();
        let e = (sym_kl(&[0.6, 0.4], &[0.4, 0.6], &cfg()).unwrap()
            + sym_kl(&[0.9, 0.1], &[0.5, 0.5], &cfg()).unwrap())
            / 2.0;
        assert!((v - e).abs() < 1e-15);
        assert!(consistency_loss(a.view(), array![[0.2, 0.3, 0.5]].view(), &cfg()).is_err());
    }

    #[test]
    fn total_examples() {
        assert!((total_loss(1.0, 2.0, 5.0, &cfg()) - 4.0).abs() < 1e-15);
        let no_c = LossConfig { beta: 0.0, ..cfg() };
        assert_eq!(total_loss(1.25, 2.5, 7.0, &no_c), 3.75);
        assert_eq!(total_loss(0.0, 0.0, 0.0, &cfg()), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(LossConfig { alpha: 0.0, ..cfg() }.validate().is_err());
        assert!(LossConfig { beta: -0.1, ..cfg() }.validate().is_err());
        assert!(LossConfig { smoothing_eps: 1.0, ..cfg() }.validate().is_err());
        assert!(LossConfig { prob_clamp: 0.0, ..cfg() }.validate().is_err());
    }

    fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) {
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.to_vec();
            xp[k] += h;
            let mut xm = x.to_vec();
            xm[k] -= h;
            let n = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((n - analytic[k]).abs() < 1e-6, "component {k}: {n} vs {}", analytic[k]);
        }
    }

    #[test]
    fn sym_kl_grad_matches_finite_differences() {
        // unnormalized inputs exercise the renormalization path
        let p = [0.5, 0.3, 0.4];
        let q = [0.2, 0.6, 0.1];
        let (_, gp, gq) = sym_kl_grad(&p, &q, &cfg()).unwrap();
        fd_check(|x| sym_kl(x, &q, &cfg()).unwrap(), &p, &gp);
        fd_check(|x| sym_kl(&p, x, &cfg()).unwrap(), &q, &gq);
    }

    #[test]
    fn ce_grad_matches_finite_differences() {
        let p = [0.2, 0.5, 0.3];
        let (_, g) = smoothed_ce_grad(&p, 1, 2, &cfg()).unwrap();
        fd_check(|x| smoothed_ce(x, 1, 2, &cfg()).unwrap(), &p, &g);
    }
}
