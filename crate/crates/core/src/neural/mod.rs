//! LSTM variational autoencoder written from scratch: forward pass, exact
//! gradients, Adam, and the training loop.

pub mod adam;
pub mod checkpoint;
pub mod lstm;
pub mod tensor;
pub mod train;
pub mod vae;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::Checkpoint;
pub use train::{train, train_with, EpochLog, PaddedBatch, TrainingLog};
pub use vae::{
    backward, backward_with_noise, decode, encode, event_weight, forward_loss, loss, reconstruct,
    reparameterize, reparameterize_with, LatentStats, LossBreakdown, ModelConfig, ModelParams,
    ReconstructionMatrix, Weights, PROB_EPS,
};

/// The RNG used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
