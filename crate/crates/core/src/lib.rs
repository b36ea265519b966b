pub mod error;
pub mod math;
pub mod nn;
pub mod training;
pub mod audio;
pub mod text;
pub mod emotion;
pub mod sentiment;
pub mod humor;
pub mod corpus;
pub mod persona;
pub mod checkpoint;
pub mod verify;
pub mod config;

pub use error::{Error, Result};
pub mod cli;
