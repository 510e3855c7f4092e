//! Trains with half, exactly, and twice the true number of unknown types.
//! Homogeneity rises with K; completeness falls.
//!
//! `COVIEW_THREADS` sets how many K values train at once.

use coview::synth::{generate, SynthConfig};
use coview::train::{sweep_k, thread_budget, EvalSource, TrainConfig};

fn main() -> coview::Result<()> {
    let data = generate(&SynthConfig::standard(4))?;
    let cfg = TrainConfig {
        seed: 4,
        eval_every: 0,
        eval_source: EvalSource::Kmeans,
        ..TrainConfig::default()
    };
    let results = sweep_k(&data, &cfg, &[4, 8, 16], thread_budget())?;
    println!("{:>4} {:>8} {:>8} {:>8} {:>8}", "K", "acc", "homog", "compl", "V");
    for (k, r) in results {
        println!(
            "{k:>4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.accuracy, r.homogeneity, r.completeness, r.v_measure
        );
    }
    Ok(())
}
