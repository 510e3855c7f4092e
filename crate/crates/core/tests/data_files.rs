use coview::data::{self, Dataset, Instance, LabelSpace, Split, ViewId, ViewMatrix};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known_types: Vec<String> = (0..4).map(|i| format!("rel_{i}")).collect();
    let instances: Vec<Instance> = (0..n)
        .map(|i| {
            let known = rng.random_bool(0.5);
            Instance {
                id: format!("inst-{i}-{}", rng.random::<u32>()),
                label: known.then(|| known_types[rng.random_range(0..4)].clone()),
                known,
                split: if rng.random_bool(0.2) { Split::Test } else { Split::Train },
                gold: (!known && rng.random_bool(0.7)).then(|| format!("new_{}", rng.random_range(0..3))),
            }
        })
        .collect();
    let mut view = |id: ViewId, d: usize| {
        ViewMatrix::new(id, Array2::from_shape_simple_fn((n, d), || rng.random_range(-1e3f32..1e3)))
    };
    let token = view(ViewId::Token, 7);
    let mask = view(ViewId::Mask, 3);
    Dataset::new(instances, LabelSpace::new(known_types, 3).unwrap(), token, mask).unwrap()
}

fn file_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn write_then_load_is_identity(n in 0usize..40, seed in any::<u64>()) {
        let d = random_dataset(n, seed);
        let dir = tempfile::tempdir().unwrap();
        data::write_dataset(&d, dir.path()).unwrap();
        let back = data::load_dir(dir.path()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn partition_covers_exactly_the_eligible_rows(n in 0usize..60, seed in any::<u64>()) {
        let d = random_dataset(n, seed);
        let p = d.partition();
        let mut seen = vec![0u8; n];
        for &i in p.labeled_train.iter().chain(&p.unlabeled_train).chain(&p.unlabeled_test) {
            seen[i] += 1;
        }
        for (i, inst) in d.instances.iter().enumerate() {
            let expected = u8::from(!(inst.known && inst.split == Split::Test));
            prop_assert_eq!(seen[i], expected);
        }
        prop_assert!(p.labeled_train.iter().all(|&i| d.instances[i].known));
        prop_assert!(p.unlabeled_test.iter().all(|&i| d.instances[i].split == Split::Test));
    }

    #[test]
    fn split_changes_only_the_split_field(n in 1usize..60, seed in any::<u64>(), fraction in 0.05f64..0.95) {
        let d = random_dataset(n, seed);
        let mut moved = d.instances.clone();
        data::split_instances(&mut moved, fraction, seed).unwrap();
        for (a, b) in d.instances.iter().zip(&moved) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(&a.label, &b.label);
            prop_assert_eq!(&a.gold, &b.gold);
        }
    }
}

#[test]
fn thousand_instances_write_identical_bytes() {
    let d = random_dataset(1000, 42);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    data::write_dataset(&d, a.path()).unwrap();
    data::write_dataset(&d, b.path()).unwrap();
    let fa = file_bytes(a.path());
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, file_bytes(b.path()));
}

#[test]
fn split_holds_out_the_fraction_of_every_type() {
    let mut d = random_dataset(2000, 3);
    data::split_instances(&mut d.instances, 0.15, 9).unwrap();
    let mut groups: std::collections::BTreeMap<Option<String>, (usize, usize)> = Default::default();
    for inst in &d.instances {
        let e = groups.entry(inst.gold_type().map(str::to_owned)).or_default();
        e.0 += 1;
        e.1 += usize::from(inst.split == Split::Test);
    }
    for (key, (total, test)) in groups {
        let expected = (0.15 * total as f64).round() as usize;
        assert_eq!(test, expected, "type {key:?}");
    }
}

#[test]
fn load_rejects_short_view() {
    let d = random_dataset(5, 1);
    let dir = tempfile::tempdir().unwrap();
    data::write_dataset(&d, dir.path()).unwrap();
    // replace the mask view with one that has fewer rows
    let short = Array2::<f32>::zeros((4, 3));
    coview::data::emb::write_emb(&dir.path().join(ViewId::Mask.file_name()), short.view()).unwrap();
    let err = data::load_dir(dir.path()).unwrap_err();
    assert_eq!(err.kind(), "row_count_mismatch", "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = data::load_dir(&dir.path().join("nowhere")).unwrap_err();
    assert_eq!(err.kind(), "io");
}
