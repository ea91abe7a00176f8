//! Integration of the coupled network up to `T - stop_gap`.
//!
//! The state is split into a reference (node 1, or the pinning target) and
//! the deviations of the other nodes from it. Zero row sums make the
//! coupling act on deviations only, so the `1/C(t)` gain is a linear
//! operator on the deviation block and is propagated exactly.

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::NodeDynamics;
use crate::error::{Error, Result};
use crate::integrator::{integrate_split, IntegratorConfig, Remainder, SplitState, SplitSystem};
use crate::linalg::DenseMatrix;
use crate::network::{build_sum_matrices, nlevecs, MultiWeightNetwork};
use crate::regulator::Regulator;

pub use crate::dynamics::QuadCheck;

/// Sampled solution of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `N×n` node states per sample.
    pub states: Vec<DenseMatrix>,
    /// Pinning target per sample, if pinned.
    pub target: Option<Vec<Vec<f64>>>,
    /// `W(t)`; absent when the weight vectors could not be computed.
    pub lyapunov: Option<Vec<f64>>,
    pub ln_lyapunov: Option<Vec<f64>>,
    /// `E₁(t)` (synchronization) or `E₂(t)` (pinning).
    pub error: Vec<f64>,
    /// `ln E`, finite even where `E` underflows.
    pub ln_error: Vec<f64>,
    pub steps: usize,
}

impl Trajectory {
    fn empty(pinned: bool) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            target: pinned.then(Vec::new),
            lyapunov: None,
            ln_lyapunov: None,
            error: Vec::new(),
            ln_error: Vec::new(),
            steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_pinned(&self) -> bool {
        self.target.is_some()
    }

    /// `ln E` at the sample nearest to `t`.
    pub fn ln_error_at(&self, t: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(self.ln_error[k])
    }

    /// `W` strictly decreases between consecutive samples (a vanishing
    /// `W` may stay at zero).
    pub fn lyapunov_strictly_decreasing(&self) -> Option<bool> {
        let w = self.ln_lyapunov.as_ref()?;
        Some(w.windows(2).all(|p| p[1] < p[0] || (p[0] == f64::NEG_INFINITY && p[1] == f64::NEG_INFINITY)))
    }

    pub fn summary(&self) -> Option<RunSummary> {
        let (first, last) = (*self.ln_error.first()?, *self.ln_error.last()?);
        let tiny = 1e-9f64.ln();
        let ln_ratio = if first <= tiny && last <= tiny {
            f64::NEG_INFINITY
        } else {
            last - first
        };
        Some(RunSummary {
            t_final: *self.times.last()?,
            error_initial: first.exp(),
            error_final: last.exp(),
            ln_error_final: last,
            ratio: ln_ratio.exp(),
            ln_ratio,
            lyapunov_monotone: self.lyapunov_strictly_decreasing(),
            steps: self.steps,
        })
    }

    /// CSV with header `t,W,E[,x_i_d...][,x0_d...]`; floats in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, out: &mut W, full_state: bool) -> io::Result<()> {
        let (nodes, dim) = self.states.first().map_or((0, 0), |s| (s.rows(), s.cols()));
        let mut header = vec!["t".to_string(), "W".into(), "E".into()];
        if full_state {
            for i in 1..=nodes {
                for d in 1..=dim {
                    header.push(format!("x_{i}_{d}"));
                }
            }
            if self.is_pinned() {
                header.extend((1..=dim).map(|d| format!("x0_{d}")));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:?}", self.times[k])];
            row.push(self.lyapunov.as_ref().map_or(String::new(), |w| format!("{:?}", w[k])));
            row.push(format!("{:?}", self.error[k]));
            if full_state {
                row.extend(self.states[k].as_slice().iter().map(|v| format!("{v:?}")));
                if let Some(x0) = &self.target {
                    row.extend(x0[k].iter().map(|v| format!("{v:?}")));
                }
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Endpoint statistics of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub t_final: f64,
    pub error_initial: f64,
    pub error_final: f64,
    pub ln_error_final: f64,
    /// `E(end)/E(0)`, reported as 0 when both ends are below `1e-9`.
    pub ratio: f64,
    pub ln_ratio: f64,
    pub lyapunov_monotone: Option<bool>,
    pub steps: usize,
}

/// A run that stopped early, with the samples taken before the failure.
#[derive(Debug, Clone)]
pub struct IntegrationFailure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

/// Writes the partial trajectory followed by a marker row naming the failure.
pub fn write_truncated_csv<W: Write>(f: &IntegrationFailure, out: &mut W, full_state: bool) -> io::Result<()> {
    f.partial.write_csv(out, full_state)?;
    writeln!(out, "# truncated: {}", f.error)
}

/// `Σ_{i≥2} ‖x_i − x_1‖₂` over the rows of `x`.
pub fn error_e1(x: &DenseMatrix) -> f64 {
    (1..x.rows()).map(|i| distance(x.row(i), x.row(0))).sum()
}

/// `Σ_i ‖x_i − x₀‖₂`.
pub fn error_e2(x: &DenseMatrix, x0: &[f64]) -> Result<f64> {
    if x0.len() != x.cols() {
        return Err(Error::DimensionMismatch(format!("target has {} components, states {}", x0.len(), x.cols())));
    }
    Ok((0..x.rows()).map(|i| distance(x.row(i), x0)).sum())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// `x*_d = Σ_i ψ_i^{[d]} x_i^d`.
pub fn dummy_target(x: &DenseMatrix, psis: &[Vec<f64>]) -> Vec<f64> {
    psis.iter()
        .enumerate()
        .map(|(d, psi)| psi.iter().enumerate().map(|(i, p)| p * x[(i, d)]).sum())
        .collect()
}

/// `W = ½ Σ_d Σ_i ψ_i^{[d]} (x_i^d − c_d)²` with `c` the dummy target, or
/// the pinning target when given.
pub fn lyapunov(x: &DenseMatrix, psis: &[Vec<f64>], x0: Option<&[f64]>) -> f64 {
    let centre = x0.map_or_else(|| dummy_target(x, psis), <[f64]>::to_vec);
    let mut w = 0.0;
    for (d, psi) in psis.iter().enumerate() {
        for (i, p) in psi.iter().enumerate() {
            let dev = x[(i, d)] - centre[d];
            w += p * dev * dev;
        }
    }
    0.5 * w
}

/// Right-hand side of the network in ordinary coordinates: node
/// derivatives, and the target derivative when `x0` is given.
pub fn eval_rhs(
    net: &MultiWeightNetwork,
    dynamics: &NodeDynamics,
    t: f64,
    x: &DenseMatrix,
    x0: Option<&[f64]>,
) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
    let (nodes, dim) = (net.nodes(), net.dim());
    if x.rows() != nodes || x.cols() != dim || dynamics.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, network {nodes}x{dim}, dynamics {}",
            x.rows(),
            x.cols(),
            dynamics.dim()
        )));
    }
    if x.as_slice().iter().chain(x0.into_iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    let gain = net.eta() * net.regulator().gain(t)?;
    let mut dx = DenseMatrix::zeros(nodes, dim);
    for i in 0..nodes {
        let fi = dynamics.eval(x.row(i));
        for a in 0..dim {
            let mut coupling = 0.0;
            for (m, g) in net.ocms().iter().zip(net.icms()) {
                for j in 0..nodes {
                    for b in 0..dim {
                        coupling += m[(i, j)] * g[(a, b)] * x[(j, b)];
                    }
                }
            }
            dx[(i, a)] = fi[a] + gain * coupling;
        }
    }
    let target = match (x0, net.pinning()) {
        (None, _) => None,
        (Some(_), None) => return Err(Error::MissingPinning),
        (Some(x0), Some(p)) => {
            if x0.len() != dim {
                return Err(Error::DimensionMismatch(format!("target has {} components", x0.len())));
            }
            for a in 0..dim {
                let pull: f64 = (0..dim).map(|b| p.gain[(a, b)] * (x[(0, b)] - x0[b])).sum();
                dx[(0, a)] -= gain * pull;
            }
            Some(dynamics.eval(x0))
        }
    };
    Ok((dx, target))
}

/// The network in split form.
struct NetworkSystem<'a> {
    dynamics: &'a NodeDynamics,
    regulator: Regulator,
    eta: f64,
    b_ee: DenseMatrix,
    b_re: Option<DenseMatrix>,
    dim: usize,
    stiffness: f64,
}

impl<'a> NetworkSystem<'a> {
    fn new(net: &MultiWeightNetwork, dynamics: &'a NodeDynamics, pinned: bool) -> Self {
        let (nodes, n) = (net.nodes(), net.dim());
        let l = net.coupling_matrix();
        let (b_ee, b_re) = if pinned {
            let mut b = l;
            let gain = &net.pinning().expect("pinned network").gain;
            for a in 0..n {
                for c in 0..n {
                    b[(a, c)] -= gain[(a, c)];
                }
            }
            (b, None)
        } else {
            // deviations e_i = x_i − x_1, i ≥ 2
            let m = (nodes - 1) * n;
            let mut b_ee = DenseMatrix::zeros(m, m);
            let mut b_re = DenseMatrix::zeros(n, m);
            for j in 1..nodes {
                for c in 0..n {
                    let col = (j - 1) * n + c;
                    for a in 0..n {
                        b_re[(a, col)] = l[(a, j * n + c)];
                    }
                    for i in 1..nodes {
                        for a in 0..n {
                            b_ee[((i - 1) * n + a, col)] = l[(i * n + a, j * n + c)] - l[(a, j * n + c)];
                        }
                    }
                }
            }
            (b_ee, Some(b_re))
        };
        Self {
            dynamics,
            regulator: *net.regulator(),
            eta: net.eta(),
            b_ee,
            b_re,
            dim: n,
            stiffness: dynamics.lipschitz_bound(),
        }
    }
}

impl SplitSystem for NetworkSystem<'_> {
    fn regulator(&self) -> &Regulator {
        &self.regulator
    }

    fn gain_scale(&self) -> f64 {
        self.eta
    }

    fn b_ee(&self) -> &DenseMatrix {
        &self.b_ee
    }

    fn b_re(&self) -> Option<&DenseMatrix> {
        self.b_re.as_ref()
    }

    fn remainder(&self, _t: f64, r: &[f64], e_hat: &[f64], ln_kappa: f64) -> Remainder {
        let f_r = self.dynamics.eval(r);
        let f_e = if ln_kappa == f64::NEG_INFINITY {
            vec![0.0; e_hat.len()]
        } else {
            e_hat
                .chunks(self.dim)
                .flat_map(|d| self.dynamics.scaled_increment(r, d, ln_kappa))
                .collect()
        };
        Remainder { r: f_r, e: f_e, ln_scale: ln_kappa }
    }

    fn stiffness(&self, _state: &SplitState) -> f64 {
        self.stiffness
    }
}

/// Integrates the network from `x_init` (`N×n`) over `[0, T − stop_gap]`.
/// Pinned networks also carry the target, started at the configured value.
pub fn integrate(
    net: &MultiWeightNetwork,
    dynamics: &NodeDynamics,
    x_init: &DenseMatrix,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let pinned = net.pinning().is_some();
    let fail = |error| IntegrationFailure { error, partial: Box::new(Trajectory::empty(pinned)) };
    let (nodes, n) = (net.nodes(), net.dim());
    if x_init.rows() != nodes || x_init.cols() != n || dynamics.dim() != n {
        return Err(fail(Error::DimensionMismatch(format!(
            "initial state is {}x{}, network {nodes}x{n}, dynamics {}",
            x_init.rows(),
            x_init.cols(),
            dynamics.dim()
        ))));
    }
    let psis = build_sum_matrices(net, false).and_then(|s| nlevecs(&s, net.tolerance())).ok();
    let sys = NetworkSystem::new(net, dynamics, pinned);

    let (r0, e0): (Vec<f64>, Vec<f64>) = if pinned {
        let x0 = net.pinning().expect("pinned").target_initial.clone();
        let e = (0..nodes).flat_map(|i| x_init.row(i).iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>()).collect();
        (x0, e)
    } else {
        let r = x_init.row(0).to_vec();
        let e = (1..nodes).flat_map(|i| x_init.row(i).iter().zip(&r).map(|(a, b)| a - b).collect::<Vec<_>>()).collect();
        (r, e)
    };
    let init = SplitState::new(0.0, r0, e0);
    let assemble = |samples: &[SplitState], steps| build_trajectory(samples, steps, nodes, n, pinned, psis.as_deref());
    match integrate_split(&sys, init, cfg) {
        Ok(run) => Ok(assemble(&run.samples, run.steps)),
        Err(f) => Err(IntegrationFailure { error: f.error, partial: Box::new(assemble(&f.partial, 0)) }),
    }
}

fn build_trajectory(
    samples: &[SplitState],
    steps: usize,
    nodes: usize,
    n: usize,
    pinned: bool,
    psis: Option<&[Vec<f64>]>,
) -> Trajectory {
    let mut traj = Trajectory::empty(pinned);
    traj.steps = steps;
    let mut ln_w = psis.map(|_| Vec::with_capacity(samples.len()));
    for s in samples {
        traj.times.push(s.t);
        let kappa = s.ln_kappa.exp();
        // deviation rows relative to the reference, node 1 included as zero
        // in the unpinned layout
        let dev_rows: Vec<Vec<f64>> = if pinned {
            s.e_hat.chunks(n).map(<[f64]>::to_vec).collect()
        } else {
            std::iter::once(vec![0.0; n]).chain(s.e_hat.chunks(n).map(<[f64]>::to_vec)).collect()
        };
        let mut x = DenseMatrix::zeros(nodes, n);
        for (i, row) in dev_rows.iter().enumerate() {
            for d in 0..n {
                x[(i, d)] = s.r[d] + kappa * row[d];
            }
        }
        traj.states.push(x);
        if let Some(t) = traj.target.as_mut() {
            t.push(s.r.clone());
        }

        let hat = DenseMatrix::from_rows(&dev_rows).expect("rectangular");
        let ln_e = ln_scaled(s.ln_kappa, if pinned { error_e2(&hat, &vec![0.0; n]).expect("dims") } else { error_e1(&hat) });
        traj.ln_error.push(ln_e);
        traj.error.push(ln_e.exp());
        if let (Some(w), Some(p)) = (ln_w.as_mut(), psis) {
            let centre = pinned.then(|| vec![0.0; n]);
            w.push(2.0 * s.ln_kappa + lyapunov(&hat, p, centre.as_deref()).ln());
        }
    }
    traj.lyapunov = ln_w.as_ref().map(|w| w.iter().map(|v| v.exp()).collect());
    traj.ln_lyapunov = ln_w;
    traj
}

/// `ln(κ v)` with `κ = e^{ln κ}`, `−∞` when either factor vanishes.
fn ln_scaled(ln_kappa: f64, v: f64) -> f64 {
    if v == 0.0 || ln_kappa == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        ln_kappa + v.ln()
    }
}

/// Largest one-sided Lipschitz quotient of `dynamics` over sampled pairs.
pub fn verify_quad(dynamics: &NodeDynamics, trials: usize, radius: f64, seed: u64) -> QuadCheck {
    dynamics.verify_quad(trials, radius, seed)
}
