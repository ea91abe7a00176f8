//! Property checks shared by the property suite and the acceptance runner.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use ptsync_core::config::benchmark;
use ptsync_core::integrator::{IntegratorConfig, Scheme};
use ptsync_core::linalg::{self, symmetric_eigen, DenseMatrix, DEFAULT_TOL};
use ptsync_core::network::{self, build_sum_matrices, MultiWeightNetwork};
use ptsync_core::simulator::integrate;
use ptsync_core::{Divergence, Regulator, ScalarModel};

pub type Check = Result<(), String>;

pub const CASES: u32 = 200;

fn runner() -> TestRunner {
    TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn square(m: usize, entries: Vec<f64>) -> DenseMatrix {
    DenseMatrix::new(m, m, entries).unwrap()
}

pub fn symmetric(m: usize, entries: &[f64]) -> DenseMatrix {
    let a = square(m, entries.to_vec());
    (&a + &a.transpose()).scale(0.5)
}

pub fn sym_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..8).prop_flat_map(|m| (Just(m), prop::collection::vec(-10.0f64..10.0, m * m)))
}

/// Negated Laplacian from positive off-diagonal weights.
pub fn laplacian(m: usize, weights: &[f64]) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                a[(i, j)] = weights[k];
                k += 1;
            }
        }
        let s: f64 = (0..m).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = -s;
    }
    a
}

/// Zero-row-sum matrix with arbitrary-sign off-diagonal entries.
fn zero_row_sum(m: usize, off: &[f64]) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                a[(i, j)] = off[k];
                k += 1;
            }
        }
        a[(i, i)] = -(0..m).filter(|&j| j != i).map(|j| a[(i, j)]).sum::<f64>();
    }
    a
}

pub fn rayleigh_bounds() -> Check {
    let strategy = (sym_strategy(), prop::collection::vec(-5.0f64..5.0, 8));
    runner()
        .run(&strategy, |((m, entries), xi)| {
            let a = symmetric(m, &entries);
            let spec = symmetric_eigen(&a).unwrap();
            let x = &xi[..m];
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let q: f64 = x.iter().zip(a.matvec(x)).map(|(u, v)| u * v).sum();
            let slack = 1e-10 * a.frobenius_norm().max(1.0) * xx.max(1.0);
            prop_assert!(spec.min() * xx <= q + slack);
            prop_assert!(q <= spec.max() * xx + slack);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Sums of zero-row-sum matrices, weighted by arbitrary ICM entries, keep
/// zero row sums; so does every block the network builds from them.
pub fn zero_row_sum_closure() -> Check {
    let strategy = (
        2usize..6,
        prop::collection::vec(-3.0f64..3.0, 3 * 30),
        prop::collection::vec(-4.0f64..4.0, 3 * 3),
    );
    runner()
        .run(&strategy, |(m, off, icm)| {
            let ocms: Vec<DenseMatrix> = (0..3).map(|w| zero_row_sum(m, &off[30 * w..30 * w + m * (m - 1)])).collect();
            let icms: Vec<DenseMatrix> = (0..3)
                .map(|w| {
                    let e = &icm[3 * w..3 * w + 3];
                    DenseMatrix::from_rows(&[[e[0], e[1]], [e[1], e[2]]]).unwrap()
                })
                .collect();
            let net = MultiWeightNetwork::new(ocms, icms, 1.0, Regulator::power(1.0, 1.0).unwrap(), None).unwrap();
            let s = build_sum_matrices(&net, false).unwrap();
            for d in 0..2 {
                for e in 0..2 {
                    prop_assert!(linalg::is_zero_row_sum(s.block(d, e), 1e-12).unwrap());
                }
            }
            let stacked = s.stacked();
            for i in 0..stacked.rows() {
                let row: f64 = (0..stacked.cols()).map(|j| stacked[(i, j)]).sum();
                prop_assert!(row.abs() < 1e-11);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `ψᵀ M = 0`, `ψ > 0`, `Σψ = 1` for random strongly connected Laplacians
/// and for the benchmark's diagonal sum matrices.
pub fn psi_orthogonality() -> Check {
    let strategy = (2usize..7, prop::collection::vec(0.1f64..5.0, 42));
    runner()
        .run(&strategy, |(m, seed)| {
            let a = laplacian(m, &seed[..m * (m - 1)]);
            let psi = linalg::left_null_vector(&a, DEFAULT_TOL).unwrap();
            let res: f64 = a.vecmat(&psi).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-9 * a.frobenius_norm());
            prop_assert!((psi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            prop_assert!(psi.iter().all(|&p| p > 0.0));
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let net = benchmark::sync(1.0).build_network(DEFAULT_TOL).unwrap();
    let s = build_sum_matrices(&net, false).unwrap();
    let psis = network::nlevecs(&s, DEFAULT_TOL).map_err(|e| e.to_string())?;
    for (d, psi) in psis.iter().enumerate() {
        let m = s.block(d, d);
        let res: f64 = m.vecmat(psi).iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(res <= 1e-9 * m.frobenius_norm(), || format!("benchmark ψ[{}] residual {res:e}", d + 1))?;
    }
    Ok(())
}

/// A synchronized start stays synchronized up to rounding.
pub fn synchronized_manifold_invariance() -> Check {
    let strategy = (prop::collection::vec(-20.0f64..20.0, 3), 0.1f64..5.0);
    runner()
        .run(&strategy, |(x, eta)| {
            let cfg = benchmark::sync(eta);
            let net = cfg.build_network(DEFAULT_TOL).unwrap();
            let x0 = DenseMatrix::from_rows(&[x.clone(), x.clone(), x]).unwrap();
            let mut ic = cfg.integrator_config();
            ic.samples = 20;
            let traj = integrate(&net, &cfg.dynamics, &x0, &ic).unwrap();
            let scale = traj.states.iter().map(DenseMatrix::max_abs).fold(0.0, f64::max);
            prop_assert!(traj.error.iter().all(|&e| e <= 1e-8 * (1.0 + scale)));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every regulator kind is strictly decreasing on a fine grid and its
/// `∫ 1/C` grows without bound toward the horizon.
pub fn divergence_witnesses() -> Check {
    let kinds = [
        Regulator::power(3.0, 2.0).unwrap(),
        Regulator::power(1.0, 1.0).unwrap(),
        Regulator::exp_a(1.0, 1.0).unwrap(),
        Regulator::exp_b(1.0, 1.0).unwrap(),
    ];
    for r in kinds {
        let t_end = r.horizon();
        let vals: Vec<f64> = (0..1000).map(|k| r.eval(t_end * k as f64 / 1000.0).unwrap()).collect();
        ensure(vals.windows(2).all(|w| w[0] > w[1]), || format!("{r:?} not strictly decreasing"))?;
        ensure(r.classify_divergence() == Divergence::Diverges, || format!("{r:?} not classified as diverging"))?;
        let witness: Vec<f64> = (3..=9).map(|k| r.numeric_integral_to(t_end - 10f64.powi(-k)).unwrap()).collect();
        ensure(witness.windows(2).all(|w| w[1] > w[0]), || format!("{r:?} witness not increasing: {witness:?}"))?;
        ensure(*witness.last().unwrap() > 10.0, || format!("{r:?} witness too small: {witness:?}"))?;
    }
    let half = Regulator::power_any(1.0, 0.5).unwrap();
    ensure(half.classify_divergence() == Divergence::Converges, || "ℓ = 0.5 not converging".into())?;
    let total = half.numeric_integral_to(1.0 - 1e-9).unwrap();
    ensure((total - 2.0).abs() < 1e-4, || format!("ℓ = 0.5 integral {total}"))
}

/// Error ratio between step caps `h` and `h/2` for classical RK4 on the
/// lemma2 problem, measured up to 1% of the horizon.
pub fn rk4_order_ratio() -> f64 {
    let m = ScalarModel::lemma2(Regulator::power(1.0, 1.0).unwrap(), 1.5, 15.0).unwrap();
    let max_err = |h: f64| {
        let cfg = IntegratorConfig {
            stop_gap: 0.01,
            step_cap: h,
            shrink_factor: 0.5,
            samples: 50,
            probe_times: Vec::new(),
            scheme: Scheme::Classical,
        };
        let tr = m.simulate_with(&cfg).unwrap();
        tr.times
            .iter()
            .zip(&tr.values)
            .map(|(&t, v)| (v - m.closed_form(t).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    // steps small against the distance 0.01 T to the singular coefficient
    max_err(2e-4) / max_err(1e-4)
}

pub fn rk4_order() -> Check {
    let ratio = rk4_order_ratio();
    ensure((12.0..=20.0).contains(&ratio), || format!("ratio {ratio}"))
}
