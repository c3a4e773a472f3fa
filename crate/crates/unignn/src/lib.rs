//! File formats and the experiment runner around `unignn-core`.

pub mod io;
pub mod runner;
