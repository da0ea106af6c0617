//! Federated-learning simulator and update-leakage attack framework.
//!
//! The crate simulates federated averaging over simulated clients and
//! implements a malicious-server reconstruction attack: per-client data
//! representatives are recovered from model updates by gradient matching,
//! and a multi-task GAN (real/fake, category, client identity) is trained
//! against them to synthesize a chosen client's private data.

pub mod error;
pub mod layers;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use layers::{apply_layer, finite_diff_grad, Gradients, LayerKind, LayerSpec, Phase, Tape};
pub use params::ParamSet;
pub use scalar::{Dual, Dual32, Real};
pub use tensor::Tensor;
