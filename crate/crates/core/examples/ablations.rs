//! Single-view variants and training ablations on one seed of the standard
//! benchmark. Reports matching accuracy from both assignment sources.
//!
//! Usage: `cargo run --release --example ablations [seed]`

use coview::synth::{generate, SynthConfig};
use coview::train::{evaluate, run, EvalSource, TrainConfig, ViewMode};

fn main() -> coview::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = generate(&SynthConfig::standard(seed))?;
    let base = TrainConfig { seed, k: 8, eval_every: 0, ..TrainConfig::default() };

    let mut no_consistency = base.clone();
    no_consistency.loss.beta = 0.0;
    let variants = [
        ("full model", base.clone()),
        ("token view only", TrainConfig { views: ViewMode::Token, ..base.clone() }),
        ("mask view only", TrainConfig { views: ViewMode::Mask, ..base.clone() }),
        ("w/o pretraining", TrainConfig { pretrain_epochs: 0, ..base.clone() }),
        ("w/o consistency", no_consistency),
    ];

    println!("{:<18} {:>12} {:>10}", "variant", "unknown head", "k-means");
    for (name, cfg) in variants {
        let out = run(&data, &cfg)?;
        let km = evaluate(&data, &out.params, &cfg, EvalSource::Kmeans)?;
        println!("{name:<18} {:>12.4} {:>10.4}", out.report.accuracy, km.accuracy);
    }
    Ok(())
}
