pub mod error;
pub mod linalg;
pub mod divergences;
pub mod io;
pub mod markov;
pub mod quantum;
pub mod recovery;
pub mod bounds;
pub mod spinchain;
pub mod cli;

pub use error::{Error, Result};
