//! Detector readout, resolution reduction, triplet assembly and dataset files.

mod io;
mod preprocess;
mod split;
mod triplets;

pub use io::{hex_digest, read_dataset, write_dataset, DatasetManifest, Mode, RunRecord, DATASET_MAGIC, SCHEMA_VERSION};
pub use preprocess::{add_detector_noise, detector_readout, downsample_box, normalize01, Image};
pub use split::split_dataset;
pub use triplets::{assemble_triplets, one_hot, LabeledSample, NetInput, TripletOptions, FRAMES_PER_INPUT};
