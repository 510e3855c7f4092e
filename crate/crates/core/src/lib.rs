//! Two-view co-training for discovering new relation and event types.
//!
//! Instances carry two embedding views (a token view and a type-prompt
//! "mask" view). Each view gets a projection network plus a known-type head
//! and an unknown-type head. Labeled instances supervise the known heads;
//! K-means over each view's projections yields pseudo-labels that supervise
//! the *other* view through a pairwise hinge loss, and a consistency term
//! pulls the two views' predictions together.
//!
//! ```no_run
//! use coview::{synth, train};
//!
//! let data = synth::generate(&synth::SynthConfig::standard(0)).unwrap();
//! let cfg = train::TrainConfig { k: 8, ..Default::default() };
//! let out = train::run(&data, &cfg).unwrap();
//! println!("accuracy {:.3}", out.report.accuracy);
//! ```

pub mod cluster;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod synth;
pub mod train;

pub use data::{Dataset, Instance, LabelSpace, Split, ViewId, ViewMatrix};
pub use error::{Error, Result};
pub use metrics::ClusterReport;
pub use nn::ModelParams;
pub use train::{TrainConfig, TrainLog};
