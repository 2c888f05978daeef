//! Experiment harness around `halpern-core`: Monte Carlo ensembles with
//! rate/bound verification, a reference desk-case suite, JSON-configured CLI
//! runs, and CSV/JSON reporting.

#![deny(unsafe_code)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod desk;
pub mod harness;
pub mod qbench;
pub mod ratesheet;
pub mod verify;
