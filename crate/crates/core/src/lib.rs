pub mod adaptive;
pub mod config;
pub mod error;
pub mod fd;
pub mod flow;
pub mod grid;
pub mod io;
pub mod model;
pub mod observables;
pub mod pod;
pub mod rom;
pub mod snapshots;
pub mod timeseries;

pub use error::{Error, FormatError, Result};
