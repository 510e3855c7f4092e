//! Pretrains on the known classes, co-trains both views on the standard
//! synthetic benchmark, and prints the per-epoch log and final metrics.
//!
//! Pass `fast` to run a few epochs with a larger learning rate.

use coview::synth::{generate, SynthConfig};
use coview::train::{evaluate, pretrain, train_observed, EvalSource, TrainConfig};

fn main() -> coview::Result<()> {
    let fast = std::env::args().any(|a| a == "fast");
    let data = generate(&SynthConfig::standard(1))?;
    let cfg = TrainConfig {
        seed: 1,
        k: 8,
        train_epochs: if fast { 4 } else { 30 },
        lr: if fast { 5e-4 } else { 5e-5 },
        ..TrainConfig::default()
    };

    let (params, warmup) = pretrain(&data, &cfg)?;
    for r in &warmup {
        println!("pretrain {}: loss {:.4}  known acc {:.4}", r.epoch, r.loss, r.accuracy);
    }

    println!("epoch    L_sup   L_unsup  L_cons    total  PL tok  PL msk  test acc");
    let (params, _log) = train_observed(&data, params, &cfg, |r, _| {
        println!(
            "{:>5} {:>8.4} {:>8.4} {:>7.4} {:>8.4} {:>7.3} {:>7.3} {:>9.4}",
            r.epoch,
            r.sup,
            r.unsup,
            r.consist,
            r.total,
            r.pl_acc_token.unwrap_or(f64::NAN),
            r.pl_acc_mask.unwrap_or(f64::NAN),
            r.report.as_ref().map_or(f64::NAN, |rep| rep.accuracy),
        );
        Ok(())
    })?;

    for source in [EvalSource::UnknownHead, EvalSource::Kmeans] {
        let rep = evaluate(&data, &params, &cfg, source)?;
        println!(
            "{source:?}: acc {:.4}  B3 F1 {:.4}  V {:.4}  ARI {:.4}",
            rep.accuracy, rep.bcubed_f1, rep.v_measure, rep.ari
        );
    }
    Ok(())
}
