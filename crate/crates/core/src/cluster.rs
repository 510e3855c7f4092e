//! K-means over projected features and pseudo-label production.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::ViewId;
use crate::error::{Error, Result};
use crate::nn::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansParams {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the summed squared centroid movement drops to this.
    pub tol: f64,
    pub n_init: usize,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

impl KmeansParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
    /// Fewer than `k` clusters could be populated (too few distinct points).
    pub degenerate: bool,
}

/// Lloyd's algorithm with k-means++ seeding, best of `n_init` restarts.
pub fn kmeans_fit(points: ArrayView2<'_, f64>, k: usize, params: &KmeansParams) -> Result<KmeansResult> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints { points: n, k });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("k-means input contains non-finite values".into()));
    }
    let sq_norms: Array1<f64> = points.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<KmeansResult> = None;
    for _ in 0..params.n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let run = lloyd(points, sq_norms.view(), k, params, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init<R: Rng>(points: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, points.row(first)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, r) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, points.row(pick)));
        }
    }
    centroids
}

/// Nearest centroid for every point, ties going to the lower index. The
/// matrix-product expansion shortlists candidates; the final pick and the
/// returned squared distances use exact differences.
fn assign(
    points: ArrayView2<'_, f64>,
    sq_norms: ArrayView1<'_, f64>,
    centroids: &Array2<f64>,
) -> (Vec<usize>, Vec<f64>) {
    let c_norms: Vec<f64> = centroids.rows().into_iter().map(|r| r.dot(&r)).collect();
    let cross = points.dot(&centroids.t());
    let mut labels = Vec::with_capacity(points.nrows());
    let mut dists = Vec::with_capacity(points.nrows());
    for (i, row) in cross.axis_iter(Axis(0)).enumerate() {
        let approx: Vec<f64> = row
            .iter()
            .zip(&c_norms)
            .map(|(x, cn)| sq_norms[i] - 2.0 * x + cn)
            .collect();
        let best = approx.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = 1e-9 * (sq_norms[i] + c_norms.iter().copied().fold(0.0, f64::max)) + 1e-12;
        let mut pick = (usize::MAX, f64::INFINITY);
        for (c, a) in approx.iter().enumerate() {
            if *a <= best + slack {
                let exact = sq_dist(points.row(i), centroids.row(c));
                if exact < pick.1 {
                    pick = (c, exact);
                }
            }
        }
        labels.push(pick.0);
        dists.push(pick.1);
    }
    (labels, dists)
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Returns false when some cluster stays empty because every point already
/// sits on its centroid.
fn repair_empty(
    points: ArrayView2<'_, f64>,
    labels: &mut [usize],
    dists: &mut [f64],
    centroids: &mut Array2<f64>,
) -> bool {
    let k = centroids.nrows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut complete = true;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None::<(usize, f64)>, |acc, i| match acc {
                Some((_, d)) if d >= dists[i] => acc,
                _ => Some((i, dists[i])),
            });
        match far {
            Some((i, d)) if d > 0.0 => {
                sizes[labels[i]] -= 1;
                sizes[c] = 1;
                labels[i] = c;
                dists[i] = 0.0;
                centroids.row_mut(c).assign(&points.row(i));
            }
            _ => complete = false,
        }
    }
    complete
}

fn update_centroids(points: ArrayView2<'_, f64>, labels: &[usize], old: &Array2<f64>) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(old.raw_dim());
    let mut counts = vec![0usize; old.nrows()];
    for (row, &l) in points.rows().into_iter().zip(labels) {
        let mut s = sums.row_mut(l);
        s += &row;
        counts[l] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            sums.row_mut(c).assign(&old.row(c));
        } else {
            sums.row_mut(c).mapv_inplace(|v| v / count as f64);
        }
    }
    sums
}

fn lloyd<R: Rng>(
    points: ArrayView2<'_, f64>,
    sq_norms: ArrayView1<'_, f64>,
    k: usize,
    params: &KmeansParams,
    rng: &mut R,
) -> KmeansResult {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut prev_labels: Option<Vec<usize>> = None;
    loop {
        let (mut labels, mut dists) = assign(points, sq_norms, &centroids);
        let complete = repair_empty(points, &mut labels, &mut dists, &mut centroids);
        let inertia: f64 = dists.iter().sum();
        debug_assert!(
            trace.last().is_none_or(|&prev: &f64| inertia <= prev * (1.0 + 1e-12) + 1e-12),
            "k-means inertia increased: {:?} -> {inertia}",
            trace.last()
        );
        trace.push(inertia);
        let stable = prev_labels.as_deref() == Some(&labels[..]);
        if stable || iterations >= params.max_iter {
            return KmeansResult {
                centroids,
                assignments: labels,
                inertia,
                iterations,
                inertia_trace: trace,
                degenerate: !complete,
            };
        }
        let updated = update_centroids(points, &labels, &centroids);
        let shift: f64 = (&updated - &centroids).mapv(|v| v * v).sum();
        centroids = updated;
        iterations += 1;
        prev_labels = Some(labels);
        if shift <= params.tol {
            // one more assignment pass against the settled centroids
            let (mut labels, mut dists) = assign(points, sq_norms, &centroids);
            let complete = repair_empty(points, &mut labels, &mut dists, &mut centroids);
            let inertia: f64 = dists.iter().sum();
            trace.push(inertia);
            return KmeansResult {
                centroids,
                assignments: labels,
                inertia,
                iterations,
                inertia_trace: trace,
                degenerate: !complete,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub ids: Vec<usize>,
    pub degenerate: bool,
}

/// Projects `rows` through the view's projection network and clusters the
/// result into `k` pseudo-classes.
pub fn assign_pseudo_labels(
    params: &ModelParams,
    rows: ArrayView2<'_, f64>,
    view: ViewId,
    k: usize,
    seed: u64,
) -> Result<PseudoLabels> {
    let branch = params
        .branch(view)
        .ok_or_else(|| Error::Config(format!("model has no {view} branch")))?;
    let h = branch.project(rows)?;
    let res = kmeans_fit(h.view(), k, &KmeansParams::with_seed(seed))?;
    Ok(PseudoLabels {
        ids: res.assignments,
        degenerate: res.degenerate,
    })
}

/// Upper-triangular same-cluster indicators `q_ij`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLabels {
    n: usize,
    same: Vec<bool>,
}

impl PairLabels {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        // rows 0..i contribute (n-1) + (n-2) + ... + (n-i) entries
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `q_ij` for `i < j`; panics otherwise.
    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < j && j < self.n, "pair ({i}, {j}) outside upper triangle");
        self.same[self.offset(i, j)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }
}

pub fn pairwise_labels(cluster_ids: &[usize]) -> PairLabels {
    let n = cluster_ids.len();
    let mut same = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            same.push(cluster_ids[i] == cluster_ids[j]);
        }
    }
    PairLabels { n, same }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_symmetric_blobs() {
        let pts = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let r = kmeans_fit(pts.view(), 2, &KmeansParams::default()).unwrap();
        assert!((r.inertia - 1.0).abs() < 1e-12);
        let mut cents: Vec<(f64, f64)> = r.centroids.rows().into_iter().map(|c| (c[0], c[1])).collect();
        cents.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(cents, vec![(0.0, 0.5), (10.0, 0.5)]);
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_ne!(r.assignments[0], r.assignments[2]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = array![[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]];
        let r = kmeans_fit(pts.view(), 1, &KmeansParams::default()).unwrap();
        let mean = pts.mean_axis(Axis(0)).unwrap();
        for (a, b) in r.centroids.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let var_n: f64 = pts.rows().into_iter().map(|p| sq_dist(p, mean.view())).sum();
        assert!((r.inertia - var_n).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n() {
        let pts = array![[0.0], [1.0], [3.0], [7.0]];
        let r = kmeans_fit(pts.view(), 4, &KmeansParams::default()).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut ids = r.assignments.clone();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn too_few_points() {
        let pts = array![[0.0], [1.0]];
        assert!(matches!(
            kmeans_fit(pts.view(), 3, &KmeansParams::default()),
            Err(Error::TooFewPoints { points: 2, k: 3 })
        ));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = Array2::from_elem((6, 3), 2.5);
        let r = kmeans_fit(pts.view(), 3, &KmeansParams::default()).unwrap();
        assert!(r.degenerate);
        assert!(r.assignments.iter().all(|&a| a == r.assignments[0]));
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let pts = array![[0.0], [1.0], [2.0], [10.0]];
        let mut centroids = array![[1.0], [100.0]];
        let sq: Array1<f64> = pts.rows().into_iter().map(|r| r.dot(&r)).collect();
        let (mut labels, mut d) = assign(pts.view(), sq.view(), &centroids);
        assert_eq!(labels, vec![0, 0, 0, 0]);
        assert!(repair_empty(pts.view(), &mut labels, &mut d, &mut centroids));
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(centroids[[1, 0]], 10.0);
    }

    #[test]
    fn same_seed_same_result() {
        let pts = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 3) as f64).sin() * 5.0);
        let p = KmeansParams::with_seed(9);
        let a = kmeans_fit(pts.view(), 4, &p).unwrap();
        let b = kmeans_fit(pts.view(), 4, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pair_labels() {
        let q = pairwise_labels(&[0, 0, 1]);
        assert!(q.get(0, 1));
        assert!(!q.get(0, 2));
        assert!(!q.get(1, 2));
        assert_eq!(q.iter().count(), 3);
        assert!(pairwise_labels(&[4, 4, 4, 4]).iter().all(|(_, _, s)| s));
        let relabeled = pairwise_labels(&[7, 7, 2]);
        assert_eq!(q, relabeled);
    }
}
