//! Writes a dataset the way an external embedding extractor would
//! (`meta.jsonl` plus two `EMB1` matrices), loads it back, and round-trips
//! a model checkpoint.

use coview::data::{self, emb, Instance, Split};
use coview::train::{init_params, load_params, save_params, TrainConfig};
use ndarray::Array2;

fn main() -> coview::Result<()> {
    let dir = std::env::temp_dir().join("coview-formats");
    std::fs::create_dir_all(&dir).map_err(|e| coview::Error::io(&dir, e))?;

    let rows = [
        ("r0", Some("per:title"), Split::Train),
        ("r1", Some("org:founded_by"), Split::Train),
        ("r2", None, Split::Train),
        ("r3", None, Split::Test),
    ];
    let instances: Vec<Instance> = rows
        .iter()
        .map(|&(id, label, split)| Instance {
            id: id.into(),
            label: label.map(Into::into),
            known: label.is_some(),
            split,
            gold: None,
        })
        .collect();
    data::write_meta(&dir.join(data::META_FILE), &instances)?;

    // Relation token views concatenate head and tail vectors, so they are
    // twice as wide as the mask view.
    let token = Array2::from_shape_fn((4, 6), |(i, j)| (i * 6 + j) as f32 * 0.1);
    let mask = Array2::from_shape_fn((4, 3), |(i, j)| (i as f32 - j as f32) * 0.5);
    emb::write_emb(&dir.join(data::TOKEN_VIEW_FILE), token.view())?;
    emb::write_emb(&dir.join(data::MASK_VIEW_FILE), mask.view())?;

    let bytes = std::fs::read(dir.join(data::MASK_VIEW_FILE)).map_err(|e| coview::Error::io(&dir, e))?;
    println!("mask view header: {:?} then {} payload bytes", &bytes[..12], bytes.len() - 12);

    let d = data::load_dir(&dir)?;
    println!("loaded {} instances, dims token {} / mask {}", d.len(), d.token.dim(), d.mask.dim());
    println!("derived label space: {:?}", d.labels);

    let cfg = TrainConfig { k: 2, hidden_dim: 16, ..TrainConfig::default() };
    let params = init_params(&d, &cfg);
    let ckpt = dir.join("checkpoint");
    save_params(&params, &ckpt)?;
    let back = load_params(&ckpt)?;
    println!("checkpoint with {} tensors round-trips: {}", params.to_tensors().len(), back.to_tensors() == params.to_tensors());
    Ok(())
}
