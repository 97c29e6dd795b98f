pub mod calibrate;
pub mod classify;
pub mod envspec;
pub mod error;
pub mod faultfreq;
pub mod io;
pub mod sigmodel;
pub mod stats;

pub use error::{Error, Result};
