//! Brute-force reference implementations shared by the integration tests.
//! Written independently of the library: no contingency tables, no
//! assignment solver.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

pub fn bcubed(gold: &[usize], pred: &[usize]) -> (f64, f64, f64) {
    let n = gold.len();
    let (mut p, mut r) = (0.0, 0.0);
    for i in 0..n {
        let same_pred: Vec<usize> = (0..n).filter(|&j| pred[j] == pred[i]).collect();
        let same_gold: Vec<usize> = (0..n).filter(|&j| gold[j] == gold[i]).collect();
        let both = same_pred.iter().filter(|&&j| gold[j] == gold[i]).count() as f64;
        p += both / same_pred.len() as f64;
        r += both / same_gold.len() as f64;
    }
    let (p, r) = (p / n as f64, r / n as f64);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1.0;
    }
    -counts.values().map(|&c| c / n * (c / n).ln()).sum::<f64>()
}

/// H(a | b), summing over the values of `b`.
fn conditional_entropy(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let values: BTreeSet<usize> = b.iter().copied().collect();
    let mut h = 0.0;
    for v in values {
        let sub: Vec<usize> = a.iter().zip(b).filter(|(_, &bb)| bb == v).map(|(&aa, _)| aa).collect();
        h += sub.len() as f64 / n * entropy(&sub);
    }
    h
}

pub fn v_measure(gold: &[usize], pred: &[usize]) -> (f64, f64, f64) {
    let hg = entropy(gold);
    let hp = entropy(pred);
    let h = if hg == 0.0 { 1.0 } else { 1.0 - conditional_entropy(gold, pred) / hg };
    let c = if hp == 0.0 { 1.0 } else { 1.0 - conditional_entropy(pred, gold) / hp };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    (h, c, v)
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    pairs(a.len()).all(|(i, j)| (a[i] == a[j]) == (b[i] == b[j]))
}

pub fn ari(gold: &[usize], pred: &[usize]) -> f64 {
    let n = gold.len();
    let total = (n * (n - 1) / 2) as f64;
    let (mut both, mut in_gold, mut in_pred) = (0.0, 0.0, 0.0);
    for (i, j) in pairs(n) {
        let g = gold[i] == gold[j];
        let p = pred[i] == pred[j];
        both += f64::from(u8::from(g && p));
        in_gold += f64::from(u8::from(g));
        in_pred += f64::from(u8::from(p));
    }
    let expected = in_gold * in_pred / total;
    let max = (in_gold + in_pred) / 2.0;
    if max == expected {
        return if same_partition(gold, pred) { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

fn permutations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest, k - 1) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Best accuracy over every injective matching between predicted clusters
/// and gold types.
pub fn matching_accuracy(gold: &[usize], pred: &[usize]) -> f64 {
    let clusters: Vec<usize> = pred.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let types: Vec<usize> = gold.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let count = |c: usize, t: usize| gold.iter().zip(pred).filter(|(&g, &p)| g == t && p == c).count();
    let mut best = 0;
    if clusters.len() <= types.len() {
        for perm in permutations(&types, clusters.len()) {
            let hit: usize = clusters.iter().zip(&perm).map(|(&c, &t)| count(c, t)).sum();
            best = best.max(hit);
        }
    } else {
        for perm in permutations(&clusters, types.len()) {
            let hit: usize = types.iter().zip(&perm).map(|(&t, &c)| count(c, t)).sum();
            best = best.max(hit);
        }
    }
    best as f64 / gold.len() as f64
}

/// Relabels `labels` through a permutation of `0..k`.
pub fn relabel(labels: &[usize], perm: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| perm[l]).collect()
}
