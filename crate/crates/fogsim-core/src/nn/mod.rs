//! Minimal neural-network engine for the multi-branch depth-wise CNN:
//! typed tensors, architecture specs, forward pass, backpropagation and a
//! deterministic mini-batch trainer.

mod backward;
mod forward;
mod params;
mod spec;
mod tensor;
pub(crate) mod test_fixtures;
mod train;

pub use backward::{backward, bce_loss_and_dlogit, LOGIT_CLAMP};
pub use forward::{
    branch_activations, branch_input, dense_forward, depthwise_conv1d_forward, forward,
    forward_cached, global_mean, relu, sigmoid, ForwardCache,
};
pub use params::{
    check_layout, conv_paths, dense_paths, deserialize_parameters, init_parameters,
    load_parameters, parameter_layout, save_parameters, serialize_parameters, zeros_like_spec,
    Parameters, PARAM_HEADER_BYTES, PARAM_MAGIC, PARAM_VERSION,
};
pub(crate) use params::Cursor;
pub use spec::{conv_out_len, same_padding, BranchSpec, LayerSpec, ModelSpec, Padding};
pub use tensor::Tensor;
pub use train::{predict, train, OptimizerKind, TrainConfig, TrainOutcome};
