pub mod ansatz;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod qconv;
pub mod rng;
pub mod sim;
pub mod spectra;

pub use error::{Error, Result};
