//! Reinforcement learning of locally-adaptive measurement policies: the
//! episodic measurement environment, a from-scratch policy/value MLP, clipped
//! proximal policy optimization, and greedy policy extraction.
//!
//! The agent sees (mask, posterior), picks one flat action per round from the
//! quantized catalog, and collects a sparse terminal reward equal to the
//! optimal success probability of the final single-qubit measurement. Training
//! is plain PPO with Monte-Carlo advantages; everything is seeded and
//! bit-reproducible on a fixed thread layout.

mod checkpoint;
mod env;
mod net;
mod ppo;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use env::{MeasurementEnv, RE_MEASURE_PENALTY, STEP_CAP_FACTOR};
pub use net::{log_softmax, softmax, PolicyValueNet, DEFAULT_HIDDEN};
pub use ppo::{
    clip, compute_advantages, flatten_batch, ppo_update, surrogate_gradient, surrogate_objective,
    Adam, LossDiagnostics, PpoConfig, Sample, Trajectory, TrajectoryStep,
};
pub use train::{extract_greedy_policy, train, TrainOutcome};
