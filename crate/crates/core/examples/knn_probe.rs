//! Leave-one-out cosine k-NN accuracy per type for each view, laid out like
//! a per-type probing table. On the synthetic benchmark the two views fail
//! on different types.

use coview::metrics::{encode_labels, knn_probe};
use coview::synth::{generate, SynthConfig};
use coview::ViewId;

fn main() -> coview::Result<()> {
    let data = generate(&SynthConfig::standard(2))?;
    let rows: Vec<usize> = (0..data.len()).filter(|&i| !data.instances[i].known).collect();
    let names = data.gold_types(&rows).expect("synthetic data has gold");
    let (gold, types) = encode_labels(&names);

    let k = 32;
    let probes: Vec<_> = ViewId::ALL
        .iter()
        .map(|&v| knn_probe(data.view(v).gather(&rows).view(), &gold, k))
        .collect::<coview::Result<_>>()?;

    println!("{:<10} {:>6} {:>8} {:>8}", "type", "count", "token", "mask");
    let mut order: Vec<usize> = (0..types.len()).collect();
    order.sort_by_key(|&t| &types[t]);
    for t in order {
        let name = &types[t];
        let (tok, msk) = (&probes[0].per_type[t], &probes[1].per_type[t]);
        println!("{name:<10} {:>6} {:>8.4} {:>8.4}", tok.count, tok.accuracy, msk.accuracy);
    }
    println!("{:<10} {:>6} {:>8.4} {:>8.4}", "Avg", rows.len(), probes[0].macro_avg, probes[1].macro_avg);
    Ok(())
}
