//! File formats, the Monte Carlo harness and the command line for
//! [`rhygarch_core`].

pub mod cli;
pub mod io;
pub mod mc;
