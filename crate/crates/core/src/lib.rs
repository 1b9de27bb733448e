pub mod anchors;
pub mod cpf;
pub mod error;
pub mod geom;
pub mod hand;
pub mod io;
pub mod labels;
pub mod metrics;
pub mod optim;
pub mod scene;

pub use error::{Error, Result};
