//! Indentation contact mechanics on a one-dimensional spring bed, synthetic
//! robotic indentation experiments, and estimation of foam elasticity with
//! an unknown surface height.

pub mod cli;
pub mod config;
pub mod contact;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kinematics;
pub mod recovery;
pub mod simulator;

pub use contact::{IndenterProfile, Material};
pub use error::{Error, Result};
pub use estimator::{estimate, EstimationResult, FitModel};
pub use recovery::{fit_recovery, RecoveryParams};
pub use simulator::{simulate_indentation, ExperimentConfig, IndentationRecord, Specimen};
