pub mod autodiff;
pub mod commands;
pub mod data;
pub mod dsp;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod train;
