//! Driver layer over `mfg-core`: JSON problem configs, binary field dumps,
//! CSV reporting and the grid-refinement harness.

pub mod commands;
pub mod config;
pub mod dump;
pub mod refine;
pub mod report;
