pub mod ais;
pub mod cellmap;
pub mod cli;
pub mod compute;
pub mod config;
pub mod contrario;
pub mod fourhot;
pub mod report;
pub mod store;
pub mod synth;
pub mod vrnn;
