//! Library surface of the causeway command-line tool: the theory file
//! format, report structures, and the built-in demo scenarios. The binary in
//! `main.rs` is a thin driver over these.

pub mod demos;
pub mod format;
pub mod report;
