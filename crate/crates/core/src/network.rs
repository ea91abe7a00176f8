//! Multiweighted directed networks: sum matrices, the `A₁` class, normalized
//! left kernel vectors, stacked matrices and coupling thresholds.
//!
//! States are grouped by dimension when stacking: the stacked vector is
//! `(x^1_1..x^1_N, x^2_1..x^2_N, ...)`, so block `(d, e)` of the stacked
//! matrix is the `N×N` sum matrix `M^{[de]}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen, DenseMatrix, DEFAULT_TOL};
use crate::regulator::Regulator;

/// Symmetry tolerance for ICMs and the pinning gain, relative to `max(1, ‖·‖_∞)`.
const SYMMETRY_TOL: f64 = 1e-12;

/// Feedback on node 1 toward an isolated target trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningConfig {
    pub gain: DenseMatrix,
    pub target_initial: Vec<f64>,
}

/// Plain description of a network as it appears in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub ocms: Vec<DenseMatrix>,
    pub icms: Vec<DenseMatrix>,
    pub eta: f64,
    pub regulator: Regulator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinning: Option<PinningConfig>,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<MultiWeightNetwork> {
        self.build_with_tol(DEFAULT_TOL)
    }

    pub fn build_with_tol(&self, tol: f64) -> Result<MultiWeightNetwork> {
        MultiWeightNetwork::with_tolerance(
            self.ocms.clone(),
            self.icms.clone(),
            self.eta,
            self.regulator,
            self.pinning.clone(),
            tol,
        )
    }
}

/// `N` nodes of dimension `n` coupled through `W ≥ 2` layers of
/// (OCM, ICM) pairs. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiWeightNetwork {
    nodes: usize,
    dim: usize,
    ocms: Vec<DenseMatrix>,
    icms: Vec<DenseMatrix>,
    eta: f64,
    regulator: Regulator,
    pinning: Option<PinningConfig>,
    tol: f64,
}

impl MultiWeightNetwork {
    pub fn new(
        ocms: Vec<DenseMatrix>,
        icms: Vec<DenseMatrix>,
        eta: f64,
        regulator: Regulator,
        pinning: Option<PinningConfig>,
    ) -> Result<Self> {
        Self::with_tolerance(ocms, icms, eta, regulator, pinning, DEFAULT_TOL)
    }

    /// As [`new`](Self::new) with a custom structural tolerance (relative to
    /// `max(1, max|entry|)`), used for row sums, kernel detection and
    /// definiteness decisions.
    pub fn with_tolerance(
        ocms: Vec<DenseMatrix>,
        icms: Vec<DenseMatrix>,
        eta: f64,
        regulator: Regulator,
        pinning: Option<PinningConfig>,
        tol: f64,
    ) -> Result<Self> {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Error::InvalidParameters(format!("tolerance must be finite and nonnegative, got {tol}")));
        }
        if ocms.len() < 2 {
            return Err(Error::InvalidParameters(format!("need at least two weight layers, got {}", ocms.len())));
        }
        if icms.len() != ocms.len() {
            return Err(Error::DimensionMismatch(format!("{} OCMs but {} ICMs", ocms.len(), icms.len())));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameters(format!("coupling strength must be positive, got {eta}")));
        }
        regulator.validate()?;

        let nodes = ocms[0].rows();
        for (w, m) in ocms.iter().enumerate() {
            if m.rows() != nodes || m.cols() != nodes {
                return Err(Error::DimensionMismatch(format!(
                    "OCM {w} is {}x{}, expected {nodes}x{nodes}",
                    m.rows(),
                    m.cols()
                )));
            }
            let row_tol = tol * m.max_abs().max(1.0);
            if let Some((row, sum)) = m.row_sums().into_iter().enumerate().find(|(_, s)| s.abs() > row_tol) {
                return Err(Error::NotZeroRowSum { row, sum });
            }
        }
        let dim = icms[0].rows();
        for (w, g) in icms.iter().enumerate() {
            if g.rows() != dim || g.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "ICM {w} is {}x{}, expected {dim}x{dim}",
                    g.rows(),
                    g.cols()
                )));
            }
            require_symmetric(g)?;
        }
        if let Some(p) = &pinning {
            if p.gain.rows() != dim || p.gain.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "pinning gain is {}x{}, expected {dim}x{dim}",
                    p.gain.rows(),
                    p.gain.cols()
                )));
            }
            require_symmetric(&p.gain)?;
            if p.target_initial.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "target has {} components, expected {dim}",
                    p.target_initial.len()
                )));
            }
            if p.target_initial.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { nodes, dim, ocms, icms, eta, regulator, pinning, tol })
    }

    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            ocms: self.ocms.clone(),
            icms: self.icms.clone(),
            eta: self.eta,
            regulator: self.regulator,
            pinning: self.pinning.clone(),
        }
    }

    /// Copy with a different coupling strength.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut s = self.spec();
        s.eta = eta;
        s.build_with_tol(self.tol)
    }

    /// Copy with a different regulator.
    pub fn with_regulator(&self, regulator: Regulator) -> Result<Self> {
        let mut s = self.spec();
        s.regulator = regulator;
        s.build_with_tol(self.tol)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> usize {
        self.ocms.len()
    }

    pub fn ocms(&self) -> &[DenseMatrix] {
        &self.ocms
    }

    pub fn icms(&self) -> &[DenseMatrix] {
        &self.icms
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn regulator(&self) -> &Regulator {
        &self.regulator
    }

    pub fn pinning(&self) -> Option<&PinningConfig> {
        self.pinning.as_ref()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// `Σ_w M^w ⊗ Γ^w`, node-major: entry `(i·n + a, j·n + b)` is
    /// `Σ_w M^w_ij Γ^w_ab`.
    pub fn coupling_matrix(&self) -> DenseMatrix {
        let size = self.nodes * self.dim;
        let mut l = DenseMatrix::zeros(size, size);
        for (m, g) in self.ocms.iter().zip(&self.icms) {
            l = &l + &m.kron(g);
        }
        l
    }
}

fn require_symmetric(g: &DenseMatrix) -> Result<()> {
    let asymmetry = g.asymmetry()?;
    if asymmetry > SYMMETRY_TOL * g.inf_norm().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// The `n×n` grid of `N×N` sum matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumMatrixSet {
    /// `blocks[d][e]` is `M^{[de]}`, or its pinned variant.
    pub blocks: Vec<Vec<DenseMatrix>>,
    /// All ICMs (and the pinning gain, if used) are diagonal.
    pub diagonal_only: bool,
    pub pinned: bool,
}

impl SumMatrixSet {
    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    pub fn nodes(&self) -> usize {
        self.blocks[0][0].rows()
    }

    pub fn block(&self, d: usize, e: usize) -> &DenseMatrix {
        &self.blocks[d][e]
    }

    /// The full `nN×nN` matrix with block `(d, e) = M^{[de]}`.
    pub fn stacked(&self) -> DenseMatrix {
        let (n, big_n) = (self.dim(), self.nodes());
        let mut out = DenseMatrix::zeros(n * big_n, n * big_n);
        for (d, row) in self.blocks.iter().enumerate() {
            for (e, b) in row.iter().enumerate() {
                out.set_block(d * big_n, e * big_n, b);
            }
        }
        out
    }
}

/// `M^{[de]} = Σ_w γ^w_{de} M^w`; with pinning, `γ_{de}` of the pinning
/// gain is subtracted from entry `(1, 1)` of every block.
pub fn build_sum_matrices(net: &MultiWeightNetwork, with_pinning: bool) -> Result<SumMatrixSet> {
    let pin = match (with_pinning, net.pinning()) {
        (true, None) => return Err(Error::MissingPinning),
        (true, Some(p)) => Some(&p.gain),
        (false, _) => None,
    };
    let n = net.dim();
    let mut blocks = Vec::with_capacity(n);
    for d in 0..n {
        let mut row = Vec::with_capacity(n);
        for e in 0..n {
            let mut b = DenseMatrix::zeros(net.nodes(), net.nodes());
            for (m, g) in net.ocms().iter().zip(net.icms()) {
                b = &b + &m.scale(g[(d, e)]);
            }
            if let Some(gain) = pin {
                b[(0, 0)] -= gain[(d, e)];
            }
            row.push(b);
        }
        blocks.push(row);
    }
    let diagonal_only = net.icms().iter().chain(pin).all(DenseMatrix::is_diagonal);
    Ok(SumMatrixSet { blocks, diagonal_only, pinned: with_pinning })
}

/// Why a matrix falls outside `A₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason")]
pub enum A1Failure {
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    NonZeroRowSum { row: usize, sum: f64 },
    NotStronglyConnected { components: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A1Verdict {
    pub dimension: usize,
    pub holds: bool,
    pub failures: Vec<A1Failure>,
}

/// Membership of a single matrix in `A₁`: nonnegative off-diagonals, zero
/// row sums (within `tol·max(1, max|entry|)`) and strong connectivity.
/// The spectral condition follows from these three.
pub fn check_a1(m: &DenseMatrix, tol: f64) -> Result<Vec<A1Failure>> {
    m.require_square()?;
    let mut failures = Vec::new();
    let size = m.rows();
    for i in 0..size {
        for j in 0..size {
            if i != j && m[(i, j)] < 0.0 {
                failures.push(A1Failure::NegativeOffDiagonal { row: i, col: j, value: m[(i, j)] });
            }
        }
    }
    let row_tol = tol * m.max_abs().max(1.0);
    for (row, sum) in m.row_sums().into_iter().enumerate() {
        if sum.abs() > row_tol {
            failures.push(A1Failure::NonZeroRowSum { row, sum });
        }
    }
    let components = linalg::strongly_connected_components(m)?.len();
    if components != 1 {
        failures.push(A1Failure::NotStronglyConnected { components });
    }
    Ok(failures)
}

/// `A₁` verdict for each diagonal block `M^{[dd]}`.
pub fn check_assumption_a1(s: &SumMatrixSet, tol: f64) -> Vec<A1Verdict> {
    (0..s.dim())
        .map(|d| {
            let failures = check_a1(s.block(d, d), tol).expect("sum matrices are square");
            A1Verdict { dimension: d, holds: failures.is_empty(), failures }
        })
        .collect()
}

/// `ψ^{[d]}` for every dimension, from the unpinned diagonal blocks.
pub fn nlevecs(s: &SumMatrixSet, tol: f64) -> Result<Vec<Vec<f64>>> {
    (0..s.dim()).map(|d| linalg::left_null_vector(s.block(d, d), tol)).collect()
}

/// `I_ψ = diag(ψ) − ψψᵀ` when `pinned` is false, `diag(ψ)` otherwise.
pub fn weight_matrix(psi: &[f64], pinned: bool) -> DenseMatrix {
    let mut w = DenseMatrix::from_diag(psi);
    if !pinned {
        for (i, a) in psi.iter().enumerate() {
            for (j, b) in psi.iter().enumerate() {
                w[(i, j)] -= a * b;
            }
        }
    }
    w
}

/// Symmetrized stacked matrix `(I M + Mᵀ I)/2` with `I` the block-diagonal
/// weight built from the `ψ` vectors: `M̄` for synchronization, `M̃` for
/// pinning.
pub fn assemble_stacked(s: &SumMatrixSet, psis: &[Vec<f64>], pinned: bool) -> Result<DenseMatrix> {
    if psis.len() != s.dim() || psis.iter().any(|p| p.len() != s.nodes()) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} weight vectors of length {}",
            s.dim(),
            s.nodes()
        )));
    }
    let weights: Vec<DenseMatrix> = psis.iter().map(|p| weight_matrix(p, pinned)).collect();
    let weighted = &DenseMatrix::block_diag(&weights) * &s.stacked();
    let mut sym = weighted.symmetric_part()?;
    // exact symmetry regardless of rounding order
    let size = sym.rows();
    for i in 0..size {
        for j in 0..i {
            sym[(i, j)] = sym[(j, i)];
        }
    }
    Ok(sym)
}

/// Orthonormal basis of `{v ∈ R^N : Σ v_i = 0}` as the columns of an
/// `N×(N−1)` matrix (Helmert contrasts).
pub fn transverse_basis(size: usize) -> Option<DenseMatrix> {
    if size < 2 {
        return None;
    }
    let mut q = DenseMatrix::zeros(size, size - 1);
    for k in 1..size {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    Some(q)
}

/// Largest eigenvalue of `mbar` restricted to the transverse space, where
/// each of the `blocks` diagonal blocks of size `block_size` has its
/// all-ones direction removed. Fails unless the result is below
/// `−tol·‖mbar‖_F`.
pub fn fiedler_lambda2(mbar: &DenseMatrix, block_size: usize, blocks: usize, tol: f64) -> Result<f64> {
    if mbar.rows() != block_size * blocks || !mbar.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix does not split into {blocks} blocks of {block_size}",
            mbar.rows(),
            mbar.cols()
        )));
    }
    let Some(q) = transverse_basis(block_size) else {
        return Err(Error::NotNegativeInTS { eigenvalue: 0.0 });
    };
    let qb = DenseMatrix::block_diag(&vec![q; blocks]);
    let restricted = &(&qb.transpose() * mbar) * &qb;
    let lambda = symmetric_eigen(&restricted.symmetric_part()?)?.max();
    if lambda >= -tol * mbar.frobenius_norm() {
        return Err(Error::NotNegativeInTS { eigenvalue: lambda });
    }
    Ok(lambda)
}

/// Largest eigenvalue of a symmetric matrix; fails unless it is below
/// `−tol·‖m‖_F`.
pub fn negative_definite_max(m: &DenseMatrix, tol: f64) -> Result<f64> {
    let lambda = symmetric_eigen(m)?.max();
    if lambda >= -tol * m.frobenius_norm() {
        return Err(Error::NotNegativeDefinite { eigenvalue: lambda });
    }
    Ok(lambda)
}

/// Same quantity as `fiedler_lambda2` / `negative_definite_max` computed
/// block by block. Only valid when every off-diagonal sum matrix vanishes.
pub fn diagonal_path_eigenvalue(s: &SumMatrixSet, psis: &[Vec<f64>], pinned: bool, tol: f64) -> Result<f64> {
    if !s.diagonal_only {
        return Err(Error::InvalidParameters("the per-block path needs diagonal ICMs".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for (d, psi) in psis.iter().enumerate() {
        let block = (&weight_matrix(psi, pinned) * s.block(d, d)).symmetric_part()?;
        let lambda = if pinned {
            negative_definite_max(&block, tol)?
        } else {
            fiedler_lambda2(&block, s.nodes(), 1, tol)?
        };
        worst = worst.max(lambda);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Synchronization,
    Pinning,
}

/// Everything the structural analysis found, including failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub mode: CouplingMode,
    pub nodes: usize,
    pub dim: usize,
    pub layers: usize,
    pub a1: Vec<A1Verdict>,
    pub assumptions_hold: bool,
    pub diagonal_only: bool,
    pub nlevecs: Vec<Vec<f64>>,
    /// Largest transverse eigenvalue of `M̄`.
    pub lambda2: Option<f64>,
    /// Largest eigenvalue of `M̃` (pinning only).
    pub lambda_max: Option<f64>,
    pub hf: f64,
    pub c0: f64,
    pub eta: f64,
    pub threshold: Option<f64>,
    pub eta_sufficient: bool,
    pub warnings: Vec<String>,
    /// First hard failure, as text.
    pub failure: Option<String>,
    #[serde(skip)]
    pub failure_error: Option<Error>,
}

impl ValidationReport {
    /// The threshold, or the error that prevented computing it.
    pub fn require_threshold(&self) -> Result<f64> {
        match (&self.failure_error, self.threshold) {
            (Some(e), _) => Err(e.clone()),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(Error::AssumptionViolated("threshold unavailable".into())),
        }
    }
}

/// Full structural analysis. Assumption violations are recorded in the
/// report rather than returned as errors.
pub fn validate(net: &MultiWeightNetwork, hf: f64) -> Result<ValidationReport> {
    if !(hf.is_finite() && hf >= 0.0) {
        return Err(Error::InvalidParameters(format!("H_f must be finite and nonnegative, got {hf}")));
    }
    let tol = net.tolerance();
    let mode = if net.pinning().is_some() { CouplingMode::Pinning } else { CouplingMode::Synchronization };
    let sums = build_sum_matrices(net, false)?;
    let a1 = check_assumption_a1(&sums, tol);
    let c0 = net.regulator().initial_value();
    let mut report = ValidationReport {
        mode,
        nodes: net.nodes(),
        dim: net.dim(),
        layers: net.layers(),
        assumptions_hold: a1.iter().all(|v| v.holds),
        a1,
        diagonal_only: sums.diagonal_only,
        nlevecs: Vec::new(),
        lambda2: None,
        lambda_max: None,
        hf,
        c0,
        eta: net.eta(),
        threshold: None,
        eta_sufficient: false,
        warnings: Vec::new(),
        failure: None,
        failure_error: None,
    };
    if let Err(e) = analyse(net, &sums, &mut report) {
        report.failure = Some(e.to_string());
        report.failure_error = Some(e);
        report.assumptions_hold = false;
    }
    if let Some(t) = report.threshold {
        report.eta_sufficient = net.eta() > t;
        if !report.eta_sufficient {
            report.warnings.push(format!(
                "eta = {} does not exceed the sufficient threshold {t:.6}; convergence is not guaranteed",
                net.eta()
            ));
        }
    }
    Ok(report)
}

fn analyse(net: &MultiWeightNetwork, sums: &SumMatrixSet, report: &mut ValidationReport) -> Result<()> {
    let tol = net.tolerance();
    if !report.assumptions_hold {
        let failing: Vec<String> = report
            .a1
            .iter()
            .filter(|v| !v.holds)
            .map(|v| format!("dimension {}: {:?}", v.dimension + 1, v.failures))
            .collect();
        return Err(Error::AssumptionViolated(format!("sum matrices outside A1: {}", failing.join("; "))));
    }
    let psis = nlevecs(sums, tol)?;
    report.nlevecs = psis.clone();

    let numerator = report.hf * report.c0 + 1.0;
    let transverse = assemble_stacked(sums, &psis, false)
        .and_then(|mbar| fiedler_lambda2(&mbar, net.nodes(), net.dim(), tol));
    match (report.mode, transverse) {
        (CouplingMode::Synchronization, Err(e)) => return Err(e),
        (CouplingMode::Synchronization, Ok(l2)) => {
            report.lambda2 = Some(l2);
            report.threshold = Some(numerator / l2.abs());
        }
        (CouplingMode::Pinning, l2) => {
            match l2 {
                Ok(v) => report.lambda2 = Some(v),
                Err(e) => report.warnings.push(format!("transverse eigenvalue unavailable: {e}")),
            }
            let pinned = build_sum_matrices(net, true)?;
            let mtilde = assemble_stacked(&pinned, &psis, true)?;
            let lmax = negative_definite_max(&mtilde, tol)?;
            report.lambda_max = Some(lmax);
            report.threshold = Some(numerator / lmax.abs());
        }
    }
    Ok(())
}

/// The sufficient coupling threshold, or an error when the assumptions it
/// rests on do not hold.
pub fn compute_threshold(net: &MultiWeightNetwork, hf: f64) -> Result<ValidationReport> {
    let report = validate(net, hf)?;
    report.require_threshold()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[f64; 3]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn sec4(pinned: bool) -> MultiWeightNetwork {
        let ocms = vec![
            m(&[[-3.0, 3.0, 0.0], [0.0, 0.0, 0.0], [3.0, 0.0, -3.0]]),
            m(&[[0.0, 0.0, 0.0], [0.0, -6.0, 6.0], [3.0, 0.0, -3.0]]),
            m(&[[2.0, -2.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, -4.0]]),
            m(&[[-2.0, 0.0, 2.0], [0.0, -5.0, 5.0], [4.0, 0.0, -4.0]]),
        ];
        let icms = [[7.0, 5.0, 6.0], [7.0, 5.0, 6.0], [6.0, -1.0, 1.0], [6.0, 5.0, 7.0]]
            .iter()
            .map(|d| DenseMatrix::from_diag(d))
            .collect();
        let pinning = pinned.then(|| PinningConfig {
            gain: DenseMatrix::from_diag(&[11.0, 13.0, 15.0]),
            target_initial: vec![4.0, 8.0, 12.0],
        });
        MultiWeightNetwork::new(ocms, icms, 0.35, Regulator::power(3.0, 2.0).unwrap(), pinning).unwrap()
    }

    #[test]
    fn sec4_sum_matrices_are_exact() {
        let s = build_sum_matrices(&sec4(false), false).unwrap();
        assert_eq!(s.block(0, 0), &m(&[[-21.0, 9.0, 12.0], [0.0, -72.0, 72.0], [90.0, 0.0, -90.0]]));
        assert_eq!(s.block(1, 1), &m(&[[-27.0, 17.0, 10.0], [0.0, -55.0, 55.0], [46.0, 0.0, -46.0]]));
        assert_eq!(s.block(2, 2), &m(&[[-30.0, 16.0, 14.0], [0.0, -71.0, 71.0], [68.0, 0.0, -68.0]]));
        assert!(s.diagonal_only);
        assert_eq!(s.block(0, 1), &DenseMatrix::zeros(3, 3));

        let p = build_sum_matrices(&sec4(true), true).unwrap();
        for (d, want) in [-32.0, -40.0, -45.0].into_iter().enumerate() {
            assert_eq!(p.block(d, d)[(0, 0)], want);
            let mut restored = p.block(d, d).clone();
            restored[(0, 0)] = s.block(d, d)[(0, 0)];
            assert_eq!(&restored, s.block(d, d));
        }
    }

    #[test]
    fn pinning_requires_config() {
        assert_eq!(build_sum_matrices(&sec4(false), true), Err(Error::MissingPinning));
    }

    #[test]
    fn zero_icms_give_zero_blocks() {
        let a = DenseMatrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let net = MultiWeightNetwork::new(
            vec![a.clone(), a],
            vec![DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 2)],
            1.0,
            Regulator::power(1.0, 1.0).unwrap(),
            None,
        )
        .unwrap();
        let s = build_sum_matrices(&net, false).unwrap();
        assert!(s.blocks.iter().flatten().all(|b| b.max_abs() == 0.0));
    }

    #[test]
    fn a1_on_sec4_and_on_competitive_layer() {
        let s = build_sum_matrices(&sec4(false), false).unwrap();
        assert!(check_assumption_a1(&s, DEFAULT_TOL).iter().all(|v| v.holds));

        let m3 = m(&[[2.0, -2.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, -4.0]]);
        let f = check_a1(&m3, DEFAULT_TOL).unwrap();
        assert!(matches!(f[0], A1Failure::NegativeOffDiagonal { row: 0, col: 1, .. }));
        assert!(check_a1(&DenseMatrix::zeros(1, 1), DEFAULT_TOL).unwrap().is_empty());
    }

    #[test]
    fn sec4_nlevecs() {
        let s = build_sum_matrices(&sec4(false), false).unwrap();
        let psis = nlevecs(&s, DEFAULT_TOL).unwrap();
        let want = [[0.7362, 0.0920, 0.1718], [0.5274, 0.1630, 0.3096], [0.6000, 0.1352, 0.2647]];
        for (psi, w) in psis.iter().zip(want) {
            for (a, b) in psi.iter().zip(w) {
                assert!((a - b).abs() <= 5e-4, "{psi:?}");
            }
        }
    }

    #[test]
    fn stacked_matrix_kills_block_ones() {
        let s = build_sum_matrices(&sec4(false), false).unwrap();
        let psis = nlevecs(&s, DEFAULT_TOL).unwrap();
        let mbar = assemble_stacked(&s, &psis, false).unwrap();
        assert_eq!(mbar, mbar.transpose());
        for d in 0..3 {
            let mut v = vec![0.0; 9];
            v[3 * d..3 * d + 3].fill(1.0);
            assert!(mbar.matvec(&v).iter().all(|x| x.abs() < 1e-9));
        }
        // diagonal ICMs: off-diagonal blocks vanish
        assert_eq!(mbar.block(0, 3, 3, 3).max_abs(), 0.0);
    }

    #[test]
    fn sec4_spectra_and_thresholds() {
        let net = sec4(false);
        let r = compute_threshold(&net, 5.4704).unwrap();
        let l2 = r.lambda2.unwrap();
        assert!((l2 + 9.9387).abs() < 1e-3, "{l2}");
        // (H_f C(0) + 1) / |λ₂| evaluated directly
        assert!((r.threshold.unwrap() - (5.4704 * 9.0 + 1.0) / l2.abs()).abs() < 1e-12);
        assert!((r.threshold.unwrap() - 5.0543).abs() < 1e-3);
        assert!(!r.eta_sufficient);
        assert_eq!(r.warnings.len(), 1);

        let r = compute_threshold(&sec4(true), 5.4704).unwrap();
        assert!((r.lambda_max.unwrap() + 1.8241).abs() < 1e-3);
        assert!((r.threshold.unwrap() - 27.5386).abs() < 1e-3);
        assert_eq!(r.mode, CouplingMode::Pinning);
    }

    #[test]
    fn diagonal_path_agrees_with_stacked_path() {
        for pinned in [false, true] {
            let net = sec4(pinned);
            let s = build_sum_matrices(&net, false).unwrap();
            let psis = nlevecs(&s, DEFAULT_TOL).unwrap();
            let sp = build_sum_matrices(&net, pinned).unwrap();
            let general = if pinned {
                negative_definite_max(&assemble_stacked(&sp, &psis, true).unwrap(), DEFAULT_TOL).unwrap()
            } else {
                fiedler_lambda2(&assemble_stacked(&sp, &psis, false).unwrap(), 3, 3, DEFAULT_TOL).unwrap()
            };
            let diag = diagonal_path_eigenvalue(&sp, &psis, pinned, DEFAULT_TOL).unwrap();
            assert!((general - diag).abs() < 1e-9);
        }
    }

    #[test]
    fn pinning_removes_the_kernel() {
        let net = sec4(true);
        let s = build_sum_matrices(&net, false).unwrap();
        let psis = nlevecs(&s, DEFAULT_TOL).unwrap();
        let unpinned = assemble_stacked(&s, &psis, true).unwrap();
        assert!(symmetric_eigen(&unpinned).unwrap().max().abs() < 1e-9);
        assert!(matches!(negative_definite_max(&unpinned, DEFAULT_TOL), Err(Error::NotNegativeDefinite { .. })));
    }

    #[test]
    fn complete_graph_transverse_value() {
        let l = m(&[[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]]);
        let sym = (&weight_matrix(&[1.0 / 3.0; 3], false) * &l).symmetric_part().unwrap();
        let v = fiedler_lambda2(&sym, 3, 1, DEFAULT_TOL).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!(matches!(
            fiedler_lambda2(&DenseMatrix::zeros(1, 1), 1, 1, DEFAULT_TOL),
            Err(Error::NotNegativeInTS { .. })
        ));
    }

    #[test]
    fn helmert_basis_is_orthonormal_and_transverse() {
        let q = transverse_basis(5).unwrap();
        let g = &q.transpose() * &q;
        assert!((&g - &DenseMatrix::identity(4)).max_abs() < 1e-15);
        assert!(q.vecmat(&[1.0; 5]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn threshold_limit_formula() {
        let r = compute_threshold(&sec4(false).with_regulator(Regulator::power(1.0, 1.0).unwrap()).unwrap(), 0.0)
            .unwrap();
        assert!((r.threshold.unwrap() - 1.0 / r.lambda2.unwrap().abs()).abs() < 1e-14);
    }

    #[test]
    fn violations_are_reported_not_thrown() {
        let m3 = m(&[[2.0, -2.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, -4.0]]);
        let net = MultiWeightNetwork::new(
            vec![m3.clone(), m3],
            vec![DenseMatrix::identity(3), DenseMatrix::identity(3)],
            1.0,
            Regulator::power(3.0, 2.0).unwrap(),
            None,
        )
        .unwrap();
        let r = validate(&net, 1.0).unwrap();
        assert!(!r.assumptions_hold && r.threshold.is_none());
        assert!(r.a1.iter().all(|v| matches!(v.failures[0], A1Failure::NegativeOffDiagonal { .. })));
        assert!(matches!(compute_threshold(&net, 1.0), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn construction_checks() {
        let a = DenseMatrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let reg = Regulator::power(1.0, 1.0).unwrap();
        let i2 = DenseMatrix::identity(2);
        assert!(MultiWeightNetwork::new(vec![a.clone()], vec![i2.clone()], 1.0, reg, None).is_err());
        let bad = DenseMatrix::from_rows(&[[-1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(
            MultiWeightNetwork::new(vec![a.clone(), bad], vec![i2.clone(), i2.clone()], 1.0, reg, None),
            Err(Error::NotZeroRowSum { row: 1, .. })
        ));
        let asym = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            MultiWeightNetwork::new(vec![a.clone(), a.clone()], vec![i2.clone(), asym], 1.0, reg, None),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(MultiWeightNetwork::new(vec![a.clone(), a], vec![i2.clone(), i2], -1.0, reg, None).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let net = sec4(true);
        let text = serde_json::to_string(&net.spec()).unwrap();
        let back: NetworkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap(), net);
    }

    #[test]
    fn coupling_matrix_is_node_major() {
        let net = sec4(false);
        let l = net.coupling_matrix();
        // node 3, dim 1 <- node 1, dim 1: Σ_w M^w_31 Γ^w_11 = 3·7 + 3·7 + 4·6 + 4·6
        assert_eq!(l[(6, 0)], 90.0);
        assert_eq!(l[(6, 1)], 0.0);
    }
}
