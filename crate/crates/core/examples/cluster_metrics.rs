//! The four clustering scores on a few hand-made predictions.

use coview::metrics::{ari, bcubed, matching_accuracy, v_measure, ClusterReport};

fn main() -> coview::Result<()> {
    let gold = [0, 0, 0, 1, 1, 1, 2, 2];
    let cases: [(&str, [usize; 8]); 4] = [
        ("relabelled copy", [2, 2, 2, 0, 0, 0, 1, 1]),
        ("one merge", [0, 0, 0, 0, 0, 0, 1, 1]),
        ("one split", [0, 0, 3, 1, 1, 1, 2, 2]),
        ("all singletons", [0, 1, 2, 3, 4, 5, 6, 7]),
    ];
    println!("{:<16} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7}", "prediction", "acc", "B3 P", "B3 R", "B3 F1", "V", "ARI");
    for (name, pred) in cases {
        let (acc, _) = matching_accuracy(&gold, &pred)?;
        let b = bcubed(&gold, &pred)?;
        let v = v_measure(&gold, &pred)?;
        let a = ari(&gold, &pred)?;
        println!(
            "{name:<16} {acc:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {a:>7.3}",
            b.precision, b.recall, b.f1, v.v
        );
    }

    let names = ["cause_of_death", "cause_of_death", "city_of_birth", "city_of_birth"];
    let report = ClusterReport::compute(&names, &[1, 1, 0, 1])?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
