//! Gas-aware search-based repair for MiniSol smart contracts.
//!
//! The pipeline: [`lang`] parses and type checks contracts, [`vm`] executes
//! them under a gas meter, [`detect`] finds vulnerabilities, [`mutate`]
//! produces candidate patches, [`gas`] derives symbolic gas formulas and
//! compares them, [`testgen`] builds regression tests from transaction logs
//! and [`search`] drives the multi-objective repair loop.

pub mod detect;
pub mod gas;
pub mod lang;
pub mod mutate;
pub mod search;
pub mod testgen;
pub mod vm;
