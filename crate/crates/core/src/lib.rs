pub mod cli;
pub mod cont;
pub mod dynamics;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod multiindex;
pub mod po;
pub mod rom;
pub mod spectral;
pub mod ssm;
pub mod tor2;
pub mod lift;
pub mod verify;
pub mod trajectory;
pub mod model;

pub use error::{Error, Result};
