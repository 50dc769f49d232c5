//! Toolchain and simulator for proved cyclic control programs running on a
//! two-microcontroller safety platform.
//!
//! The pipeline is: [`b0`] source is parsed and type checked, [`verifier`]
//! discharges its proof obligations, [`backend`] compiles it twice through
//! unrelated instruction sets, [`firmware`] links both images into a
//! CRC-protected bundle, and [`safesim`] runs the bundle on a simulated
//! dual-MCU board whose safety checks latch a panic state on any anomaly.
//! [`relay`] turns relay schematics into B0 sources and [`wcet`] bounds the
//! cycle cost of the bytecode image.

pub mod b0;
pub mod backend;
pub mod cli;
pub mod crc;
pub mod firmware;
pub mod relay;
pub mod safesim;
pub mod verifier;
pub mod wcet;
