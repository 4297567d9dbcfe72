//! Small dense networks, their gradients, action heads and the optimizer.

mod adam;
mod autodiff;
mod checkpoint;
mod heads;
mod mlp;

pub use adam::{clip_grad_norm, Adam};
pub use autodiff::{logsumexp, sigmoid, softplus, Gradients, Tape, Var};
pub use checkpoint::{mlp_from_bytes, mlp_to_bytes, read_mlp, write_mlp, CHECKPOINT_VERSION};
pub use heads::{
    allocation_log_prob, allocation_mode, allocation_output_dim, allocation_sample_logprob, enumeration_log_probs,
    enumeration_log_probs_tape, gaussian_entropy_tape, gaussian_log_prob, gaussian_log_prob_tape, gaussian_mode,
    gaussian_sample_logprob, log_one_minus_tanh_sq, option_logit, sequential_log_prob, sequential_log_prob_tape,
    squash, OptionSet, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{Mlp, MlpCache};
