//! Convolutional acoustic model mapping pseudo-phonemes and a speaker label to
//! log-mel frames and a scaled pitch contour.

mod checkpoint;
mod gradcheck;
mod layers;
mod model;
mod tensor;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{gradient_check, group_of, GradCheckOptions, GradCheckReport, GroupCheck, GROUPS};
pub use layers::{gelu, sigmoid};
pub use model::{
    align_durations, length_regulate, loss, predict_duration, AcousticModel, AcousticOutput, LossBreakdown, Mode,
    ModelConfig, ModelInput, TrainItem,
};
pub use tensor::{ParamSet, Tensor};
pub use train::{train, Adam, AdamConfig, TrainOptions, TrainReport};
