//! Run configuration documents and the built-in three-node benchmark.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::NodeDynamics;
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::linalg::DenseMatrix;
use crate::network::{MultiWeightNetwork, NetworkSpec, PinningConfig};
use crate::regulator::Regulator;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

/// One JSON document describing a network, its node dynamics, initial
/// states and integration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub dynamics: NodeDynamics,
    /// `N×n`, row `i` is node `i`.
    pub initial_states: DenseMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub outputs: Outputs,
}

fn is_default(o: &Outputs) -> bool {
    *o == Outputs::default()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Builds the network and checks that every dimension agrees.
    pub fn build_network(&self, tol: f64) -> Result<MultiWeightNetwork> {
        let net = self.network.build_with_tol(tol)?;
        if self.dynamics.dim() != net.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dynamics has dimension {}, ICMs {}",
                self.dynamics.dim(),
                net.dim()
            )));
        }
        if self.initial_states.rows() != net.nodes() || self.initial_states.cols() != net.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial states are {}x{}, expected {}x{}",
                self.initial_states.rows(),
                self.initial_states.cols(),
                net.nodes(),
                net.dim()
            )));
        }
        self.integrator_config().validate(net.regulator().horizon())?;
        Ok(net)
    }

    /// The configured integrator, or the defaults for the horizon.
    pub fn integrator_config(&self) -> IntegratorConfig {
        self.integrator.clone().unwrap_or_else(|| IntegratorConfig::for_horizon(self.network.regulator.horizon()))
    }
}

/// The three-node, four-layer benchmark with Chua-type nodes, horizon 3
/// and regulator `(3 − t)²`.
pub mod benchmark {
    use super::*;

    pub const HORIZON: f64 = 3.0;
    /// Time at which end-of-run errors are compared.
    pub const PROBE_GAP: f64 = 1e-3;

    pub fn ocms() -> Vec<DenseMatrix> {
        [
            [[-3.0, 3.0, 0.0], [0.0, 0.0, 0.0], [3.0, 0.0, -3.0]],
            [[0.0, 0.0, 0.0], [0.0, -6.0, 6.0], [3.0, 0.0, -3.0]],
            [[2.0, -2.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, -4.0]],
            [[-2.0, 0.0, 2.0], [0.0, -5.0, 5.0], [4.0, 0.0, -4.0]],
        ]
        .iter()
        .map(|m| DenseMatrix::from_rows(m).expect("constant"))
        .collect()
    }

    pub fn icms() -> Vec<DenseMatrix> {
        [[7.0, 5.0, 6.0], [7.0, 5.0, 6.0], [6.0, -1.0, 1.0], [6.0, 5.0, 7.0]]
            .iter()
            .map(|d| DenseMatrix::from_diag(d))
            .collect()
    }

    pub fn pinning() -> PinningConfig {
        PinningConfig { gain: DenseMatrix::from_diag(&[11.0, 13.0, 15.0]), target_initial: vec![4.0, 8.0, 12.0] }
    }

    pub fn initial_states() -> DenseMatrix {
        DenseMatrix::from_rows(&[[10.0, 15.0, 20.0], [25.0, 30.0, 35.0], [40.0, 45.0, 50.0]]).expect("constant")
    }

    /// Default integrator with an extra sample at `T − 1e-3`.
    pub fn integrator() -> IntegratorConfig {
        let mut cfg = IntegratorConfig::for_horizon(HORIZON);
        cfg.probe_times = vec![HORIZON - PROBE_GAP];
        cfg
    }

    fn config(eta: f64, pinning: Option<PinningConfig>) -> RunConfig {
        RunConfig {
            network: NetworkSpec {
                ocms: ocms(),
                icms: icms(),
                eta,
                regulator: Regulator::power(HORIZON, 2.0).expect("constant"),
                pinning,
            },
            dynamics: NodeDynamics::chua3(),
            initial_states: initial_states(),
            integrator: Some(integrator()),
            outputs: Outputs::default(),
        }
    }

    pub fn sync(eta: f64) -> RunConfig {
        config(eta, None)
    }

    pub fn pinned(eta: f64) -> RunConfig {
        config(eta, Some(pinning()))
    }
}
