//! Dense networks, reverse-mode gradients and the Adam optimizer.

mod adam;
mod checkpoint;
mod matrix;
mod mlp;
mod tape;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::Checkpoint;
pub use matrix::Matrix;
pub use mlp::{Activation, Mlp, MlpVars};
pub use tape::{Gradients, Tape, Var};
