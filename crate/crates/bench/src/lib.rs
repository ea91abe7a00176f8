//! Fixtures shared by the benchmarks.

use ptsync_core::config::benchmark;
use ptsync_core::linalg::{DenseMatrix, DEFAULT_TOL};
use ptsync_core::{MultiWeightNetwork, RunConfig};

pub fn network(cfg: &RunConfig) -> MultiWeightNetwork {
    cfg.build_network(DEFAULT_TOL).expect("benchmark network is valid")
}

/// Stacked `M̄` of the three-node benchmark, 9×9 and symmetric.
pub fn stacked_benchmark_matrix() -> DenseMatrix {
    use ptsync_core::network::{assemble_stacked, build_sum_matrices, nlevecs};
    let net = network(&benchmark::sync(1.0));
    let s = build_sum_matrices(&net, false).expect("sum matrices");
    let psis = nlevecs(&s, DEFAULT_TOL).expect("weights");
    assemble_stacked(&s, &psis, false).expect("stacked")
}
