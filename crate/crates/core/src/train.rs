//! Warmup, co-training epochs, evaluation and K sweeps.

use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{assign_pseudo_labels, kmeans_fit, KmeansParams};
use crate::data::checkpoint::{read_checkpoint, write_checkpoint};
use crate::data::{Dataset, ViewId};
use crate::error::{Error, Result};
use crate::losses::{
    consistency_loss_grad, contrastive_batch_loss_grad, smoothed_ce_grad, unsup_batch_loss_grad,
    LossConfig,
};
use crate::metrics::{encode_labels, matching_accuracy, ClusterReport};
use crate::nn::{softmax_backward_rows, softmax_rows, AdamWConfig, ModelParams, OptimState, PROJ_DIM};

/// Which views take part in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    #[default]
    Both,
    Token,
    Mask,
}

impl ViewMode {
    pub fn views(self) -> Vec<ViewId> {
        match self {
            ViewMode::Both => ViewId::ALL.to_vec(),
            ViewMode::Token => vec![ViewId::Token],
            ViewMode::Mask => vec![ViewId::Mask],
        }
    }
}

/// Which distribution the unlabeled pair and consistency losses compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnlabeledSoftmax {
    /// Softmax over the concatenated known and unknown logits.
    #[default]
    Concat,
    /// Softmax over the unknown-head logits alone.
    Unknown,
}

/// How test instances are assigned to clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalSource {
    /// Argmax over the unknown segment of the view-averaged prediction.
    #[default]
    UnknownHead,
    /// K-means on the concatenated projections.
    Kmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub loss: LossConfig,
    /// Number of unknown clusters (width of the unknown heads).
    #[serde(rename = "K")]
    pub k: usize,
    /// Evaluate on the test split every this many epochs; 0 only at the end.
    pub eval_every: usize,
    pub views: ViewMode,
    pub hidden_dim: usize,
    pub eval_source: EvalSource,
    pub unlabeled_softmax: UnlabeledSoftmax,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 32,
            lr: 5e-5,
            weight_decay: 0.01,
            pretrain_epochs: 3,
            train_epochs: 30,
            loss: LossConfig::default(),
            k: 10,
            eval_every: 1,
            views: ViewMode::Both,
            hidden_dim: PROJ_DIM,
            eval_source: EvalSource::UnknownHead,
            unlabeled_softmax: UnlabeledSoftmax::Concat,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.k < 2 {
            return bad(format!("K must be at least 2, got {}", self.k));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be a finite non-negative number, got {}", self.lr));
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        self.loss.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Known-class accuracy on the labeled training set at the end of the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub sup: f64,
    pub unsup: f64,
    pub consist: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pl_acc_token: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pl_acc_mask: Option<f64>,
    /// Batches with fewer than two unlabeled members.
    pub degenerate_batches: usize,
    /// K-means collapsed for at least one view this epoch.
    pub pseudo_degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<ClusterReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub pretrain: Vec<PretrainRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Test accuracy per evaluated epoch, as `(epoch, accuracy)`.
    pub fn accuracy_curve(&self) -> Vec<(usize, f64)> {
        self.epochs
            .iter()
            .filter_map(|r| r.report.as_ref().map(|rep| (r.epoch, rep.accuracy)))
            .collect()
    }

    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.epochs {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

const STREAM_INIT: u64 = 1;
const STREAM_PRETRAIN: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_PSEUDO: u64 = 4;
const STREAM_EVAL: u64 = 5;

/// Independent seed for one use of randomness (splitmix64 finalizer).
fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh parameters for the configured views, seeded by `cfg.seed`.
pub fn init_params(data: &Dataset, cfg: &TrainConfig) -> ModelParams {
    let dims: Vec<(ViewId, usize)> = cfg
        .views
        .views()
        .into_iter()
        .map(|v| (v, data.view(v).dim()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_INIT, 0));
    ModelParams::init(&dims, cfg.hidden_dim, data.labels.num_known(), cfg.k, &mut rng)
}

fn num_batches(n: usize, batch: usize) -> u64 {
    n.div_ceil(batch) as u64
}

/// Warmup on labeled instances. Returns the trained projections with both
/// heads of every view reset to their initial values.
pub fn pretrain(data: &Dataset, cfg: &TrainConfig) -> Result<(ModelParams, Vec<PretrainRecord>)> {
    cfg.validate()?;
    let part = data.partition();
    if part.labeled_train.is_empty() {
        return Err(Error::Empty("no labeled training instances".into()));
    }
    let fresh = init_params(data, cfg);
    let mut params = fresh.clone();
    if cfg.pretrain_epochs == 0 {
        return Ok((params, Vec::new()));
    }
    let c_l = data.labels.num_known();
    let mut order = part.labeled_train.clone();
    let steps = cfg.pretrain_epochs as u64 * num_batches(order.len(), cfg.batch_size);
    let mut opt = OptimState::new(cfg.optimizer(), &params, steps);
    let mut records = Vec::with_capacity(cfg.pretrain_epochs);

    for epoch in 0..cfg.pretrain_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_PRETRAIN, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let targets = data.known_targets(chunk);
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for (branch, grad) in params.branches.iter().zip(grads.branches.iter_mut()) {
                let x = data.view(branch.view).gather(chunk);
                let (logits, cache) = branch.forward(x.view())?;
                let probs = softmax_rows(logits.slice(s![.., ..c_l]));
                let (loss, d_probs) = mean_ce(probs.view(), &targets, c_l, &cfg.loss)?;
                batch_loss += loss;
                let mut d_logits = Array2::zeros(logits.raw_dim());
                d_logits
                    .slice_mut(s![.., ..c_l])
                    .assign(&softmax_backward_rows(probs.view(), d_probs.view()));
                *grad = branch.backward(&cache, d_logits.view())?;
            }
            opt.update(&mut params, &grads);
            loss_sum += batch_loss;
            batches += 1;
        }
        let accuracy = known_accuracy(data, &params, &part.labeled_train)?;
        records.push(PretrainRecord {
            epoch,
            loss: loss_sum / batches as f64,
            accuracy,
        });
        log::debug!("pretrain epoch {epoch}: loss {:.4} acc {accuracy:.4}", loss_sum / batches as f64);
    }

    for (b, f) in params.branches.iter_mut().zip(&fresh.branches) {
        b.head_known = f.head_known.clone();
        b.head_unknown = f.head_unknown.clone();
    }
    Ok((params, records))
}

/// Accuracy of the known heads (view-averaged, known logits only).
pub fn known_accuracy(data: &Dataset, params: &ModelParams, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let c_l = data.labels.num_known();
    let mut avg = Array2::<f64>::zeros((indices.len(), c_l));
    for branch in &params.branches {
        let x = data.view(branch.view).gather(indices);
        let logits = branch.logits(x.view())?;
        avg += &softmax_rows(logits.slice(s![.., ..c_l]));
    }
    let targets = data.known_targets(indices);
    let hits = avg
        .rows()
        .into_iter()
        .zip(&targets)
        .filter(|(row, &t)| argmax(row.iter().copied()) == t)
        .count();
    Ok(hits as f64 / indices.len() as f64)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Mean smoothed cross-entropy over rows, with its gradient in probability space.
fn mean_ce(
    probs: ArrayView2<'_, f64>,
    targets: &[usize],
    num_known: usize,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    let n = targets.len() as f64;
    let mut grad = Array2::zeros(probs.raw_dim());
    let mut total = 0.0;
    for ((row, &t), mut g) in probs.rows().into_iter().zip(targets).zip(grad.rows_mut()) {
        let (loss, gr) = smoothed_ce_grad(&row.to_vec(), t, num_known, cfg)?;
        total += loss;
        for (dst, v) in g.iter_mut().zip(gr) {
            *dst = v / n;
        }
    }
    Ok((total / n, grad))
}

fn check_dims(data: &Dataset, params: &ModelParams, cfg: &TrainConfig) -> Result<()> {
    if params.branches.is_empty() {
        return Err(Error::Shape("model has no branches".into()));
    }
    for b in &params.branches {
        let d = data.view(b.view).dim();
        if b.proj.in_dim() != d {
            return Err(Error::Shape(format!(
                "{} projection expects {} inputs but the view has {d}",
                b.view,
                b.proj.in_dim()
            )));
        }
        if b.num_known() != data.labels.num_known() || b.num_unknown() != cfg.k {
            return Err(Error::Shape(format!(
                "{} heads are {}+{} wide, expected {}+{}",
                b.view,
                b.num_known(),
                b.num_unknown(),
                data.labels.num_known(),
                cfg.k
            )));
        }
    }
    Ok(())
}

fn pseudo_label_accuracy(gold: Option<&[usize]>, pseudo: &[usize]) -> Result<Option<f64>> {
    match gold {
        Some(g) if !g.is_empty() => Ok(Some(matching_accuracy(g, pseudo)?.0)),
        _ => Ok(None),
    }
}

/// Co-training. Never reads rows outside the training split.
pub fn train(data: &Dataset, params: ModelParams, cfg: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    train_observed(data, params, cfg, |_, _| Ok(()))
}

/// [`train`], calling `observer` after every epoch with the new record and
/// the current parameters.
pub fn train_observed<F>(
    data: &Dataset,
    mut params: ModelParams,
    cfg: &TrainConfig,
    mut observer: F,
) -> Result<(ModelParams, TrainLog)>
where
    F: FnMut(&EpochRecord, &ModelParams) -> Result<()>,
{
    cfg.validate()?;
    check_dims(data, &params, cfg)?;
    let part = data.partition();
    if part.unlabeled_train.is_empty() {
        return Err(Error::Empty("no unlabeled training instances".into()));
    }
    let mut log = TrainLog::default();
    if cfg.train_epochs == 0 {
        return Ok((params, log));
    }

    let c_l = data.labels.num_known();
    let views = params.views();
    let gold_train = data
        .gold_types(&part.unlabeled_train)
        .map(|g| encode_labels(&g).0);
    // Position of each unlabeled train row within `unlabeled_train`, for pseudo-label lookup.
    let mut slot = vec![usize::MAX; data.len()];
    for (pos, &i) in part.unlabeled_train.iter().enumerate() {
        slot[i] = pos;
    }
    let unlabeled_rows: Vec<Array2<f64>> = views
        .iter()
        .map(|&v| data.view(v).gather(&part.unlabeled_train))
        .collect();

    let mut order: Vec<usize> = part
        .labeled_train
        .iter()
        .chain(&part.unlabeled_train)
        .copied()
        .collect();
    order.sort_unstable();
    let steps = cfg.train_epochs as u64 * num_batches(order.len(), cfg.batch_size);
    let mut opt = OptimState::new(cfg.optimizer(), &params, steps);

    for epoch in 0..cfg.train_epochs {
        let mut pseudo = Vec::with_capacity(views.len());
        let mut pseudo_degenerate = false;
        for (vi, rows) in unlabeled_rows.iter().enumerate() {
            let seed = sub_seed(cfg.seed, STREAM_PSEUDO, (epoch * 2 + vi) as u64);
            let pl = assign_pseudo_labels(&params, rows.view(), views[vi], cfg.k, seed)?;
            pseudo_degenerate |= pl.degenerate;
            pseudo.push(pl.ids);
        }
        let mut pl_acc = [None, None];
        for (vi, &v) in views.iter().enumerate() {
            pl_acc[v as usize] = pseudo_label_accuracy(gold_train.as_deref(), &pseudo[vi])?;
        }

        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_TRAIN, epoch as u64)));
        let (mut sup_sum, mut unsup_sum, mut cons_sum, mut total_sum) = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        let mut degenerate_batches = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let lab: Vec<usize> = (0..chunk.len()).filter(|&r| data.instances[chunk[r]].known).collect();
            let unl: Vec<usize> = (0..chunk.len()).filter(|&r| !data.instances[chunk[r]].known).collect();
            let targets: Vec<usize> = data.known_targets(&lab.iter().map(|&r| chunk[r]).collect::<Vec<_>>());

            let mut probs = Vec::with_capacity(views.len());
            let mut caches = Vec::with_capacity(views.len());
            let mut unl_probs = Vec::with_capacity(views.len());
            for branch in &params.branches {
                let x = data.view(branch.view).gather(chunk);
                let (logits, cache) = branch.forward(x.view())?;
                let p = softmax_rows(logits.view());
                unl_probs.push(match cfg.unlabeled_softmax {
                    UnlabeledSoftmax::Concat => p.select(Axis(0), &unl),
                    UnlabeledSoftmax::Unknown => {
                        softmax_rows(logits.select(Axis(0), &unl).slice(s![.., c_l..]))
                    }
                });
                probs.push(p);
                caches.push(cache);
            }
            let mut d_probs: Vec<Array2<f64>> = probs.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
            let mut d_unl: Vec<Array2<f64>> = unl_probs.iter().map(|p| Array2::zeros(p.raw_dim())).collect();

            let mut sup = 0.0;
            if !lab.is_empty() {
                for (p, dp) in probs.iter().zip(d_probs.iter_mut()) {
                    let sel = p.select(Axis(0), &lab);
                    let (loss, g) = mean_ce(sel.view(), &targets, c_l, &cfg.loss)?;
                    sup += loss;
                    scatter_add(dp, &lab, &g, 1.0);
                }
            }

            let unl_pseudo: Vec<Vec<usize>> = pseudo
                .iter()
                .map(|ids| unl.iter().map(|&r| ids[slot[chunk[r]]]).collect())
                .collect();
            let mut consist = 0.0;
            let unsup = if views.len() == 2 {
                let (bl, g1, g2) = unsup_batch_loss_grad(
                    unl_probs[0].view(),
                    unl_probs[1].view(),
                    &unl_pseudo[0],
                    &unl_pseudo[1],
                    &cfg.loss,
                )?;
                degenerate_batches += usize::from(bl.degenerate);
                d_unl[0] += &g1;
                d_unl[1] += &g2;
                if !unl.is_empty() {
                    let (c, g1, g2) = consistency_loss_grad(unl_probs[0].view(), unl_probs[1].view(), &cfg.loss)?;
                    consist = c;
                    d_unl[0].scaled_add(cfg.loss.beta, &g1);
                    d_unl[1].scaled_add(cfg.loss.beta, &g2);
                }
                bl.value
            } else {
                let (bl, g) = contrastive_batch_loss_grad(unl_probs[0].view(), &unl_pseudo[0], &cfg.loss)?;
                degenerate_batches += usize::from(bl.degenerate);
                d_unl[0] += &g;
                bl.value
            };

            let offset = match cfg.unlabeled_softmax {
                UnlabeledSoftmax::Concat => 0,
                UnlabeledSoftmax::Unknown => c_l,
            };
            let mut grads = params.zeros_like();
            for (vi, (branch, grad)) in params.branches.iter().zip(grads.branches.iter_mut()).enumerate() {
                let mut dz = softmax_backward_rows(probs[vi].view(), d_probs[vi].view());
                let dz_unl = softmax_backward_rows(unl_probs[vi].view(), d_unl[vi].view());
                for (&r, g) in unl.iter().zip(dz_unl.rows()) {
                    dz.row_mut(r).slice_mut(s![offset..]).scaled_add(1.0, &g);
                }
                *grad = branch.backward(&caches[vi], dz.view())?;
            }
            opt.update(&mut params, &grads);

            sup_sum += sup;
            unsup_sum += unsup;
            cons_sum += consist;
            total_sum += sup + unsup + cfg.loss.beta * consist;
            batches += 1;
        }

        let nb = batches as f64;
        let evaluate_now = (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.train_epochs;
        let report = if evaluate_now && !part.unlabeled_test.is_empty() && data.gold_types(&part.unlabeled_test).is_some() {
            Some(evaluate(data, &params, cfg, cfg.eval_source)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            sup: sup_sum / nb,
            unsup: unsup_sum / nb,
            consist: cons_sum / nb,
            total: total_sum / nb,
            pl_acc_token: pl_acc[ViewId::Token as usize],
            pl_acc_mask: pl_acc[ViewId::Mask as usize],
            degenerate_batches,
            pseudo_degenerate,
            report,
        };
        log::debug!(
            "epoch {epoch}: total {:.4} acc {:?}",
            record.total,
            record.report.as_ref().map(|r| r.accuracy)
        );
        observer(&record, &params)?;
        log.epochs.push(record);
    }
    Ok((params, log))
}

fn scatter_add(dst: &mut Array2<f64>, rows: &[usize], src: &Array2<f64>, scale: f64) {
    for (&r, s) in rows.iter().zip(src.rows()) {
        dst.row_mut(r).scaled_add(scale, &s);
    }
}

/// Cluster id for every index in `indices`.
pub fn predict_clusters(
    data: &Dataset,
    params: &ModelParams,
    indices: &[usize],
    cfg: &TrainConfig,
    source: EvalSource,
) -> Result<Vec<usize>> {
    if params.branches.is_empty() {
        return Err(Error::Shape("model has no branches".into()));
    }
    match source {
        EvalSource::UnknownHead => {
            let c_l = params.branches[0].num_known();
            let mut avg: Option<Array2<f64>> = None;
            for branch in &params.branches {
                let x = data.view(branch.view).gather(indices);
                let logits = branch.logits(x.view())?;
                let p = match cfg.unlabeled_softmax {
                    UnlabeledSoftmax::Concat => softmax_rows(logits.view()).slice_move(s![.., c_l..]),
                    UnlabeledSoftmax::Unknown => softmax_rows(logits.slice(s![.., c_l..])),
                };
                match avg.as_mut() {
                    Some(a) => *a += &p,
                    None => avg = Some(p),
                }
            }
            let avg = avg.expect("at least one branch");
            Ok(avg.rows().into_iter().map(|row| argmax(row.iter().copied())).collect())
        }
        EvalSource::Kmeans => {
            let mut parts = Vec::with_capacity(params.branches.len());
            for branch in &params.branches {
                let x = data.view(branch.view).gather(indices);
                parts.push(branch.project(x.view())?);
            }
            let views: Vec<ArrayView2<'_, f64>> = parts.iter().map(|p| p.view()).collect();
            let h = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
            let res = kmeans_fit(h.view(), cfg.k, &KmeansParams::with_seed(sub_seed(cfg.seed, STREAM_EVAL, 0)))?;
            Ok(res.assignments)
        }
    }
}

/// Clustering quality on the unlabeled test split.
pub fn evaluate(data: &Dataset, params: &ModelParams, cfg: &TrainConfig, source: EvalSource) -> Result<ClusterReport> {
    let test = data.partition().unlabeled_test;
    if test.is_empty() {
        return Err(Error::Empty("no unlabeled test instances".into()));
    }
    let gold = data
        .gold_types(&test)
        .ok_or_else(|| Error::Config("test instances carry no gold types".into()))?;
    let pred = predict_clusters(data, params, &test, cfg, source)?;
    ClusterReport::compute(&gold, &pred)
}

/// `report.json`: every metric, the assignment source, and the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub report: ClusterReport,
    pub source: EvalSource,
    pub seed: u64,
    pub config: TrainConfig,
}

impl RunReport {
    pub fn new(report: ClusterReport, source: EvalSource, cfg: &TrainConfig) -> Self {
        Self {
            report,
            source,
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: ModelParams,
    pub log: TrainLog,
    pub report: ClusterReport,
}

/// Pretrain, train and evaluate with one config.
pub fn run(data: &Dataset, cfg: &TrainConfig) -> Result<RunOutput> {
    let (params, pre) = pretrain(data, cfg)?;
    let (params, mut log) = train(data, params, cfg)?;
    log.pretrain = pre;
    let report = evaluate(data, &params, cfg, cfg.eval_source)?;
    Ok(RunOutput { params, log, report })
}

/// Worker cap for [`sweep_k`], from `COVIEW_THREADS` (default 1).
pub fn thread_budget() -> usize {
    std::env::var("COVIEW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Full runs for each K, same seed. Results keep the order of `k_values`.
pub fn sweep_k(data: &Dataset, cfg: &TrainConfig, k_values: &[usize], threads: usize) -> Result<Vec<(usize, ClusterReport)>> {
    if let Some(&k) = k_values.iter().find(|&&k| k < 2) {
        return Err(Error::Config(format!("K must be at least 2, got {k}")));
    }
    let one = |k: usize| -> Result<(usize, ClusterReport)> {
        let c = TrainConfig { k, ..cfg.clone() };
        Ok((k, run(data, &c)?.report))
    };
    let threads = threads.max(1);
    if threads == 1 {
        return k_values.iter().map(|&k| one(k)).collect();
    }
    let mut out = Vec::with_capacity(k_values.len());
    for group in k_values.chunks(threads) {
        let results: Vec<Result<(usize, ClusterReport)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = group.iter().map(|&k| scope.spawn(move || one(k))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

pub fn save_params(params: &ModelParams, dir: &Path) -> Result<()> {
    write_checkpoint(dir, &params.to_tensors())
}

pub fn load_params(dir: &Path) -> Result<ModelParams> {
    ModelParams::from_tensors(&read_checkpoint(dir)?)
}
