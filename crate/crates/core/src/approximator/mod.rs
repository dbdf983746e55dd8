//! Dense tanh networks with hand-derived reverse-mode gradients, and Adam.

mod adam;
mod net;

pub use adam::Adam;
pub use net::{DenseNet, Scratch};
