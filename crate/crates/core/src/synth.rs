//! Seeded two-view Gaussian-blob datasets with per-view class confusions.
//!
//! Each class gets one mean per view, drawn uniformly on a sphere of radius
//! `10 · noise_sigma`. For every confusion pair listed for a view, the second
//! class's mean in that view is overwritten with the first's, so the two
//! classes are indistinguishable there but still separable in the other view.

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance, LabelSpace, Split, ViewId, ViewMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_known_classes: usize,
    pub num_unknown_classes: usize,
    pub per_class_count: usize,
    /// Token view width.
    pub dim_view1: usize,
    /// Mask view width.
    pub dim_view2: usize,
    pub noise_sigma: f64,
    /// Class ids (known classes first, then unknown) whose token-view means coincide.
    #[serde(default)]
    pub confusion_pairs_view1: Vec<(usize, usize)>,
    /// Class ids whose mask-view means coincide.
    #[serde(default)]
    pub confusion_pairs_view2: Vec<(usize, usize)>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// The benchmark used by the acceptance suite: 8 known and 8 unknown
    /// classes, 200 instances each, two confused unknown pairs per view.
    pub fn standard(seed: u64) -> Self {
        Self {
            num_known_classes: 8,
            num_unknown_classes: 8,
            per_class_count: 200,
            dim_view1: 64,
            dim_view2: 32,
            noise_sigma: 1.0,
            confusion_pairs_view1: vec![(8, 9), (10, 11)],
            confusion_pairs_view2: vec![(12, 13), (14, 15)],
            test_fraction: 0.15,
            seed,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_known_classes + self.num_unknown_classes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_unknown_classes < 2 {
            return bad(format!(
                "num_unknown_classes must be at least 2, got {}",
                self.num_unknown_classes
            ));
        }
        if self.per_class_count == 0 || self.dim_view1 == 0 || self.dim_view2 == 0 {
            return bad("per_class_count and view dims must be positive".into());
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be positive, got {}", self.noise_sigma));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        let c = self.num_classes();
        let norm = |&(a, b): &(usize, usize)| (a.min(b), a.max(b));
        for (name, pairs) in [
            ("confusion_pairs_view1", &self.confusion_pairs_view1),
            ("confusion_pairs_view2", &self.confusion_pairs_view2),
        ] {
            for &(a, b) in pairs.iter() {
                if a >= c || b >= c || a == b {
                    return bad(format!("{name}: invalid pair ({a}, {b}) for {c} classes"));
                }
            }
        }
        let first: HashSet<(usize, usize)> = self.confusion_pairs_view1.iter().map(norm).collect();
        if let Some(p) = self.confusion_pairs_view2.iter().map(norm).find(|p| first.contains(p)) {
            return bad(format!(
                "pair {p:?} is confused in both views and could never be separated"
            ));
        }
        Ok(())
    }

    pub fn class_name(&self, class: usize) -> String {
        if class < self.num_known_classes {
            format!("known_{class:02}")
        } else {
            format!("novel_{:02}", class - self.num_known_classes)
        }
    }
}

/// Generated data plus the class means used to draw it.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    /// `classes × dim_view1`
    pub means_view1: Array2<f64>,
    /// `classes × dim_view2`
    pub means_view2: Array2<f64>,
    /// Class id of every instance, in dataset order.
    pub classes: Vec<usize>,
}

fn sphere_means(rng: &mut ChaCha8Rng, classes: usize, dim: usize, radius: f64) -> Array2<f64> {
    let mut means = Array2::zeros((classes, dim));
    for mut row in means.rows_mut() {
        loop {
            row.mapv_inplace(|_| -> f64 { StandardNormal.sample(rng) });
            let norm = row.dot(&row).sqrt();
            if norm > 1e-12 {
                row.mapv_inplace(|v| v * radius / norm);
                break;
            }
        }
    }
    means
}

fn confuse(means: &mut Array2<f64>, pairs: &[(usize, usize)]) {
    for &(a, b) in pairs {
        let src = means.row(a).to_owned();
        means.row_mut(b).assign(&src);
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    Ok(generate_full(cfg)?.dataset)
}

pub fn generate_full(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.num_classes();
    let radius = 10.0 * cfg.noise_sigma;
    let mut means_view1 = sphere_means(&mut rng, c, cfg.dim_view1, radius);
    let mut means_view2 = sphere_means(&mut rng, c, cfg.dim_view2, radius);
    confuse(&mut means_view1, &cfg.confusion_pairs_view1);
    confuse(&mut means_view2, &cfg.confusion_pairs_view2);

    let n = c * cfg.per_class_count;
    let mut classes = Vec::with_capacity(n);
    let mut x1 = Array2::zeros((n, cfg.dim_view1));
    let mut x2 = Array2::zeros((n, cfg.dim_view2));
    for class in 0..c {
        for _ in 0..cfg.per_class_count {
            let r = classes.len();
            for (v, m) in x1.row_mut(r).iter_mut().zip(means_view1.row(class)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = m + cfg.noise_sigma * z;
            }
            for (v, m) in x2.row_mut(r).iter_mut().zip(means_view2.row(class)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = m + cfg.noise_sigma * z;
            }
            classes.push(class);
        }
    }

    let per_class_test = ((cfg.test_fraction * cfg.per_class_count as f64).round() as usize)
        .clamp(1, cfg.per_class_count.saturating_sub(1).max(1));
    let mut split = vec![Split::Train; n];
    for class in 0..c {
        let mut members: Vec<usize> = (class * cfg.per_class_count..(class + 1) * cfg.per_class_count).collect();
        members.shuffle(&mut rng);
        for &i in members.iter().take(per_class_test) {
            split[i] = Split::Test;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut instances = Vec::with_capacity(n);
    let mut token = Array2::zeros((n, cfg.dim_view1));
    let mut mask = Array2::zeros((n, cfg.dim_view2));
    let mut shuffled_classes = Vec::with_capacity(n);
    for (row, &src) in order.iter().enumerate() {
        let class = classes[src];
        let name = cfg.class_name(class);
        let known = class < cfg.num_known_classes;
        instances.push(Instance {
            id: format!("syn{row:06}"),
            label: known.then(|| name.clone()),
            known,
            split: split[src],
            gold: (!known).then_some(name),
        });
        token.row_mut(row).assign(&x1.row(src).mapv(|v| v as f32));
        mask.row_mut(row).assign(&x2.row(src).mapv(|v| v as f32));
        shuffled_classes.push(class);
    }
    let labels = LabelSpace::new(
        (0..cfg.num_known_classes).map(|k| cfg.class_name(k)).collect(),
        cfg.num_unknown_classes,
    )?;
    let dataset = Dataset::new(
        instances,
        labels,
        ViewMatrix::new(ViewId::Token, token),
        ViewMatrix::new(ViewId::Mask, mask),
    )?;
    Ok(SynthData {
        dataset,
        means_view1,
        means_view2,
        classes: shuffled_classes,
    })
}
