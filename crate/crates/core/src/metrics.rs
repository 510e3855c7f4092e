//! Cluster-quality metrics against gold types: matching accuracy, B-cubed,
//! V-measure, adjusted Rand index, and a leave-one-out k-NN probe.
//!
//! Labels are arbitrary `usize` ids; only equality between ids matters.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps arbitrary labels to dense ids in order of first appearance.
pub fn encode_labels<T: Eq + Hash + Clone>(labels: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut index: HashMap<T, usize> = HashMap::new();
    let mut names = Vec::new();
    let ids = labels
        .iter()
        .map(|l| {
            *index.entry(l.clone()).or_insert_with(|| {
                names.push(l.clone());
                names.len() - 1
            })
        })
        .collect();
    (ids, names)
}

/// Counts `n[p][g]` of items in predicted cluster `p` and gold class `g`.
#[derive(Debug, Clone)]
struct Contingency {
    table: Array2<f64>,
    pred_ids: Vec<usize>,
    gold_ids: Vec<usize>,
    n: usize,
}

impl Contingency {
    fn new(gold: &[usize], pred: &[usize]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::Shape(format!(
                "gold has {} labels, prediction has {}",
                gold.len(),
                pred.len()
            )));
        }
        if gold.is_empty() {
            return Err(Error::Empty("no items to score".into()));
        }
        let (g, gold_ids) = encode_labels(gold);
        let (p, pred_ids) = encode_labels(pred);
        let mut table = Array2::zeros((pred_ids.len(), gold_ids.len()));
        for (&pi, &gi) in p.iter().zip(&g) {
            table[[pi, gi]] += 1.0;
        }
        Ok(Self {
            table,
            pred_ids,
            gold_ids,
            n: gold.len(),
        })
    }

    fn pred_sizes(&self) -> Vec<f64> {
        self.table.sum_axis(Axis(1)).to_vec()
    }

    fn gold_sizes(&self) -> Vec<f64> {
        self.table.sum_axis(Axis(0)).to_vec()
    }
}

/// Minimum-cost assignment on a rectangular matrix (Hungarian method with
/// potentials, O(r²c)). Returns `(row, col)` pairs; every row is matched
/// when `rows ≤ cols`, every column otherwise.
pub fn linear_sum_assignment(cost: ArrayView2<'_, f64>) -> Vec<(usize, usize)> {
    let (rows, cols) = cost.dim();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let mut t: Vec<(usize, usize)> = linear_sum_assignment(cost.t())
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        t.sort_unstable();
        return t;
    }
    let (n, m) = (rows, cols);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // p[j]: row (1-based) matched to column j; way[j]: previous column on the path
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    out.sort_unstable();
    out
}

/// Accuracy under the best one-to-one map from predicted clusters to gold
/// types. Returns the accuracy and the map (predicted id → gold id).
pub fn matching_accuracy(gold: &[usize], pred: &[usize]) -> Result<(f64, BTreeMap<usize, usize>)> {
    let c = Contingency::new(gold, pred)?;
    let cost = c.table.mapv(|v| -v);
    let mut matched = 0.0;
    let mut map = BTreeMap::new();
    for (p, g) in linear_sum_assignment(cost.view()) {
        matched += c.table[[p, g]];
        map.insert(c.pred_ids[p], c.gold_ids[g]);
    }
    Ok((matched / c.n as f64, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BCubed {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn bcubed(gold: &[usize], pred: &[usize]) -> Result<BCubed> {
    let c = Contingency::new(gold, pred)?;
    let ps = c.pred_sizes();
    let gs = c.gold_sizes();
    let mut precision = 0.0;
    let mut recall = 0.0;
    for ((p, g), &n) in c.table.indexed_iter() {
        // each of the n items in this cell scores n/|p| and n/|g|
        precision += n * n / ps[p];
        recall += n * n / gs[g];
    }
    precision /= c.n as f64;
    recall /= c.n as f64;
    Ok(BCubed {
        precision,
        recall,
        f1: harmonic(precision, recall),
    })
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v: f64,
}

fn entropy(sizes: &[f64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| -(s / n) * (s / n).ln())
        .sum()
}

pub fn v_measure(gold: &[usize], pred: &[usize]) -> Result<VMeasure> {
    let c = Contingency::new(gold, pred)?;
    let n = c.n as f64;
    let ps = c.pred_sizes();
    let gs = c.gold_sizes();
    let h_gold = entropy(&gs, n);
    let h_pred = entropy(&ps, n);
    let mut h_gold_given_pred = 0.0;
    let mut h_pred_given_gold = 0.0;
    for ((p, g), &nij) in c.table.indexed_iter() {
        if nij > 0.0 {
            h_gold_given_pred -= (nij / n) * (nij / ps[p]).ln();
            h_pred_given_gold -= (nij / n) * (nij / gs[g]).ln();
        }
    }
    let homogeneity = if h_gold == 0.0 {
        1.0
    } else {
        1.0 - h_gold_given_pred / h_gold
    };
    let completeness = if h_pred == 0.0 {
        1.0
    } else {
        1.0 - h_pred_given_gold / h_pred
    };
    Ok(VMeasure {
        homogeneity,
        completeness,
        v: harmonic(homogeneity, completeness),
    })
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. When the expected index equals its maximum (both
/// partitions trivial) the result is 1 if the partitions coincide, else 0.
pub fn ari(gold: &[usize], pred: &[usize]) -> Result<f64> {
    let c = Contingency::new(gold, pred)?;
    if c.n < 2 {
        return Err(Error::Empty("ARI needs at least two items".into()));
    }
    let index: f64 = c.table.iter().map(|&v| comb2(v)).sum();
    let sum_p: f64 = c.pred_sizes().into_iter().map(comb2).sum();
    let sum_g: f64 = c.gold_sizes().into_iter().map(comb2).sum();
    let expected = sum_p * sum_g / comb2(c.n as f64);
    let max = 0.5 * (sum_p + sum_g);
    if max == expected {
        let same = sum_p == index && sum_g == index;
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Every metric for one clustering of the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub accuracy: f64,
    pub bcubed_precision: f64,
    pub bcubed_recall: f64,
    pub bcubed_f1: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub ari: f64,
    /// Predicted cluster → matched gold type.
    pub matching: BTreeMap<usize, String>,
}

impl ClusterReport {
    pub fn compute<S: AsRef<str>>(gold: &[S], pred: &[usize]) -> Result<Self> {
        let names: Vec<&str> = gold.iter().map(AsRef::as_ref).collect();
        let (gold_ids, gold_names) = encode_labels(&names);
        let (accuracy, map) = matching_accuracy(&gold_ids, pred)?;
        let b = bcubed(&gold_ids, pred)?;
        let v = v_measure(&gold_ids, pred)?;
        let ari = if gold_ids.len() >= 2 {
            ari(&gold_ids, pred)?
        } else {
            1.0
        };
        Ok(Self {
            accuracy,
            bcubed_precision: b.precision,
            bcubed_recall: b.recall,
            bcubed_f1: b.f1,
            homogeneity: v.homogeneity,
            completeness: v.completeness,
            v_measure: v.v,
            ari,
            matching: map
                .into_iter()
                .map(|(p, g)| (p, gold_names[g].to_string()))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub type_id: usize,
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnProbe {
    pub k: usize,
    /// Sorted by type id.
    pub per_type: Vec<TypeAccuracy>,
    pub macro_avg: f64,
    /// Some query had tied neighbour similarities at the k-th position.
    pub had_ties: bool,
}

/// Leave-one-out k-NN classification with cosine similarity.
///
/// Neighbour ties go to the lower index. Vote ties go to the type with the
/// larger summed similarity, then to the smaller type id. Zero vectors have
/// similarity 0 to everything.
pub fn knn_probe(rows: ArrayView2<'_, f64>, gold: &[usize], k: usize) -> Result<KnnProbe> {
    let n = rows.nrows();
    if gold.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", gold.len())));
    }
    if n <= k {
        return Err(Error::Config(format!("k-NN probe needs more than k = {k} rows, got {n}")));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("probe input contains non-finite values".into()));
    }
    let mut unit = rows.to_owned();
    for mut r in unit.axis_iter_mut(Axis(0)) {
        let norm = r.dot(&r).sqrt();
        if norm > 0.0 {
            r.mapv_inplace(|v| v / norm);
        }
    }
    let sims = unit.dot(&unit.t());
    let num_types = gold.iter().max().map_or(0, |m| m + 1);
    let mut correct = vec![0usize; num_types];
    let mut totals = vec![0usize; num_types];
    let mut had_ties = false;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = sims.row(i);
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        if order.len() > k && row[order[k - 1]] == row[order[k]] {
            had_ties = true;
        }
        let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for &j in &order[..k] {
            let e = votes.entry(gold[j]).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += row[j];
        }
        let predicted = votes
            .iter()
            .max_by(|(ta, (ca, sa)), (tb, (cb, sb))| {
                ca.cmp(cb).then(sa.total_cmp(sb)).then(tb.cmp(ta))
            })
            .map(|(t, _)| *t)
            .expect("k >= 1 neighbours");
        totals[gold[i]] += 1;
        if predicted == gold[i] {
            correct[gold[i]] += 1;
        }
    }
    let per_type: Vec<TypeAccuracy> = (0..num_types)
        .filter(|&t| totals[t] > 0)
        .map(|t| TypeAccuracy {
            type_id: t,
            count: totals[t],
            accuracy: correct[t] as f64 / totals[t] as f64,
        })
        .collect();
    let macro_avg = per_type.iter().map(|t| t.accuracy).sum::<f64>() / per_type.len() as f64;
    Ok(KnnProbe {
        k,
        per_type,
        macro_avg,
        had_ties,
    })
}
