//! Prescribed-time synchronization of multiweighted, directed complex
//! networks: structural validation, coupling thresholds, scalar stability
//! models and a simulator that integrates up to, never through, the
//! prescribed time.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod network;
pub mod quadrature;
pub mod regulator;
pub mod scalar;
pub mod simulator;

pub use config::RunConfig;
pub use dynamics::NodeDynamics;
pub use error::{Error, Result};
pub use integrator::IntegratorConfig;
pub use linalg::DenseMatrix;
pub use network::{MultiWeightNetwork, NetworkSpec, PinningConfig, SumMatrixSet, ValidationReport};
pub use regulator::{Divergence, Regulator, RegulatorKind};
pub use scalar::{PhiClass, ScalarKind, ScalarModel};
pub use simulator::Trajectory;
