//! GRU-enhanced Informer (GiNet) for battery state-of-charge forecasting.

pub mod complexity;
pub mod data;
pub mod digest;
pub mod error;
pub mod gru;
pub mod informer;
pub mod model;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{GiNet, GiNetConfig, Variant};
pub use tensor::{Graph, Mode, Padding, ParamId, ParamStore, Session, Tensor, Var};
