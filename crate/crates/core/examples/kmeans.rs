//! K-means++ with Lloyd iterations on Gaussian blobs: inertia per
//! iteration, restarts, and the degenerate case.

use coview::cluster::{kmeans_fit, KmeansParams};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> coview::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.6).expect("valid sigma");
    let centers = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0), (5.0, 5.0)];
    let mut points = Array2::zeros((400, 2));
    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        let (cx, cy) = centers[i % centers.len()];
        row[0] = cx + noise.sample(&mut rng);
        row[1] = cy + noise.sample(&mut rng);
    }

    for n_init in [1, 10] {
        let params = KmeansParams { seed: 0, n_init, ..KmeansParams::default() };
        let fit = kmeans_fit(points.view(), 4, &params)?;
        println!("n_init {n_init:>2}: inertia {:.3} after {} iterations", fit.inertia, fit.iterations);
        let trace: Vec<String> = fit.inertia_trace.iter().map(|v| format!("{v:.2}")).collect();
        println!("  trace {}", trace.join(" > "));
        for c in fit.centroids.rows() {
            println!("  centroid ({:>6.3}, {:>6.3})", c[0], c[1]);
        }
    }

    let same = Array2::from_elem((5, 3), 1.5);
    let fit = kmeans_fit(same.view(), 3, &KmeansParams::default())?;
    println!("identical points: assignments {:?}, degenerate {}", fit.assignments, fit.degenerate);
    Ok(())
}
