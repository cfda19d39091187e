pub mod cli;
pub mod error;
pub mod game;
pub mod model;
pub mod oracle;
pub mod population;
pub mod quadrature;
pub mod reduction;
pub mod synthesis;

pub use error::{Error, Result};
