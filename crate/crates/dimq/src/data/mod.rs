//! Offline dataset construction, sampling, and persistence.

mod dataset_io;
mod generate;
mod sample;

pub use dataset_io::{dataset_from_str, dataset_to_string, read_dataset, write_dataset};
pub use generate::{filter_successes, generate_mixed_dataset, relabel_episode, NoiseSpec};
pub use sample::{make_sample, sample_batch, Batch, Sample};
