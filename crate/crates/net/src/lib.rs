//! Neural coefficient prediction for superdirective arrays.
//!
//! This crate supplies the learning half of the pipeline: a small dense
//! f64 autodiff engine ([`tensor`]), finite-difference verification
//! ([`gradcheck`]), seeded parameter stores ([`params`]), the
//! attention-bottleneck U-Net generator and convolutional discriminator
//! ([`model`]), adaptive-moment optimization ([`adam`]) with warmup-cosine
//! learning-rate schedules ([`schedule`]), the adversarial training loop
//! ([`train`]), checkpoint serialization ([`checkpoint`]), and coefficient
//! evaluation against the physics solver ([`eval`]).
//!
//! Everything is deterministic: fixed seeds and configs reproduce datasets,
//! weights, loss traces, and reports byte for byte, independent of thread
//! count.

/// Shared error type, re-exported from the physics crate so both halves of
/// the pipeline speak the same failure language.
pub mod error {
    pub use superdir_core::error::{Error, Result};
}

pub mod adam;
pub mod checkpoint;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod parallel;
pub mod params;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use eval::{evaluate, EvalReport};
pub use gradcheck::{grad_check, grad_check_inputs, GradCheckReport};
pub use model::{
    discriminator_predict, fuse_attention, generator_predict, Discriminator, DiscriminatorConfig,
    Generator, GeneratorConfig, InputWiring, LN_EPS,
};
pub use params::ParamStore;
pub use schedule::LrSchedule;
pub use tensor::{Tape, Var};
pub use train::{train, TraceRow, TrainConfig, TrainOutput};
