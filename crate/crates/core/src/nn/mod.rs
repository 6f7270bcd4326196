//! Fully connected networks with exact gradients.
//!
//! Besides ordinary backpropagation, [`loss_and_grads`] differentiates the
//! gradient-norm regularizer `(‖∇_z D(z)‖ − t)²` with respect to the weights.
//! That needs second-order information, obtained by pushing a tangent through
//! the network (a directional derivative along `∂R/∂∇D`) and reverse
//! differentiating forward pass and tangent pass together.

mod adam;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use loss::{loss_and_grads, GradBundle, NORM_EPS};
pub use mlp::{Activation, Dense, DenseGrad, Gradients, Mlp};
