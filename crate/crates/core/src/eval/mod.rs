//! Fréchet distance between Gaussian fits of utterance features, the
//! repeated-draw protocol around it, and speaker-table projection.

mod fid;
mod speakers;

pub use fid::{
    decode_stats, encode_stats, fid, gaussian_stats, pool_source, read_stats, repeated_fid, utterance_feature,
    write_stats, FidReference, GaussianStats, RepeatedFid, STATS_MAGIC,
};
pub use speakers::{format_projection_tsv, project_speakers, silhouette, write_projection, Projection};

/// Dimension of [`utterance_feature`] for 256-band mels.
pub const FEATURE_DIM: usize = 512;
