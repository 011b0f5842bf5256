//! Training laboratory for implicit neural representations.

pub mod alloc;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod tasks;

pub use error::{Error, Result};
