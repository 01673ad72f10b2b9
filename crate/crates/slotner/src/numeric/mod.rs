//! Dense f64 tensors with reverse-mode gradients.
//!
//! Every forward operation records its inputs and a backward closure on the
//! output node; [`Tensor::backward`] replays the recorded graph in reverse
//! creation order and accumulates gradients additively into every node that
//! requires them. Graphs are rebuilt per forward pass, so variable-length
//! utterances need no padding or masking.
//!
//! Tensors are single-threaded values (`Rc`-backed); share them across
//! threads by rebuilding from raw data, not by moving handles.

mod adam;
mod gradcheck;
mod ops;
mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use gradcheck::{check_gradients, GradCheckFailure};
pub use ops::{concat, conv1d_maxpool, stack_rows};
pub use tensor::Tensor;
