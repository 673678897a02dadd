//! Dense tensor arithmetic, tape-based reverse-mode autodiff, the Adam
//! optimizer, and finite-difference gradient verification.

mod adam;
mod gradcheck;
mod graph;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::grad_check;
pub use graph::{Graph, NodeId};
pub use tensor::Tensor;
