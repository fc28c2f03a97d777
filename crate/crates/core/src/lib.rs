pub mod cli;
pub mod edges;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod local_moments;
pub mod prox_ops;
pub mod solvers;
pub mod synthetic;

pub use edges::EdgeSet;
pub use error::{Error, Result};
