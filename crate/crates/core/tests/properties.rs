use proptest::prelude::*;

mod common;

use common::{laplacian, sym_strategy, symmetric};
use ptsync_core::config::benchmark;
use ptsync_core::integrator::IntegratorConfig;
use ptsync_core::linalg::{self, symmetric_eigen, DenseMatrix, DEFAULT_TOL};
use ptsync_core::network::{build_sum_matrices, MultiWeightNetwork};
use ptsync_core::simulator::error_e1;
use ptsync_core::{NodeDynamics, PhiClass, Regulator, ScalarModel};

#[test]
fn rayleigh_bounds() {
    common::rayleigh_bounds().unwrap();
}

#[test]
fn zero_row_sum_closure() {
    common::zero_row_sum_closure().unwrap();
}

#[test]
fn psi_orthogonality() {
    common::psi_orthogonality().unwrap();
}

#[test]
fn synchronized_manifold_is_invariant() {
    common::synchronized_manifold_invariance().unwrap();
}

#[test]
fn regulator_divergence_witnesses() {
    common::divergence_witnesses().unwrap();
}

#[test]
fn classical_rk4_is_fourth_order() {
    common::rk4_order().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigendecomposition_reconstructs((m, entries) in sym_strategy()) {
        let a = symmetric(m, &entries);
        let spec = symmetric_eigen(&a).unwrap();
        let v = &spec.eigenvectors;
        let rebuilt = &(v * &DenseMatrix::from_diag(&spec.eigenvalues)) * &v.transpose();
        prop_assert!((&a - &rebuilt).frobenius_norm() <= 1e-8 * a.frobenius_norm().max(1e-300));
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for k in 0..m {
            let vk = spec.eigenvector(k);
            let r: f64 = a.matvec(&vk).iter().zip(&vk).map(|(av, x)| (av - spec.eigenvalues[k] * x).powi(2)).sum();
            prop_assert!(r.sqrt() <= 1e-9 * a.frobenius_norm().max(1e-300));
        }
    }

    #[test]
    fn nlevec_follows_permutations(m in 2usize..6, seed in prop::collection::vec(0.1f64..5.0, 30), shift in 0usize..5) {
        let a = laplacian(m, &seed[..m * (m - 1)]);
        let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let mut b = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] = a[(perm[i], perm[j])];
            }
        }
        let pa = linalg::left_null_vector(&a, DEFAULT_TOL).unwrap();
        let pb = linalg::left_null_vector(&b, DEFAULT_TOL).unwrap();
        for i in 0..m {
            prop_assert!((pb[i] - pa[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn sum_matrices_match_triple_loop(
        ocm_w in prop::collection::vec(-3.0f64..3.0, 12),
        icm_e in prop::collection::vec(-4.0f64..4.0, 6),
    ) {
        // W = 2, N = 3, n = 2
        let ocms: Vec<DenseMatrix> = (0..2).map(|w| {
            let mut m = DenseMatrix::zeros(3, 3);
            let mut k = 6 * w;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        m[(i, j)] = ocm_w[k];
                        k += 1;
                    }
                }
                m[(i, i)] = -(0..3).filter(|&j| j != i).map(|j| m[(i, j)]).sum::<f64>();
            }
            m
        }).collect();
        let icms: Vec<DenseMatrix> = (0..2).map(|w| {
            let e = &icm_e[3 * w..3 * w + 3];
            DenseMatrix::from_rows(&[[e[0], e[1]], [e[1], e[2]]]).unwrap()
        }).collect();
        let net = MultiWeightNetwork::new(ocms.clone(), icms.clone(), 1.0, Regulator::power(1.0, 1.0).unwrap(), None).unwrap();
        let s = build_sum_matrices(&net, false).unwrap();
        for d in 0..2 {
            for e in 0..2 {
                for i in 0..3 {
                    let mut row = 0.0;
                    for j in 0..3 {
                        let mut want = 0.0;
                        for w in 0..2 {
                            want += icms[w][(d, e)] * ocms[w][(i, j)];
                        }
                        prop_assert!((s.block(d, e)[(i, j)] - want).abs() < 1e-12);
                        row += s.block(d, e)[(i, j)];
                    }
                    prop_assert!(row.abs() < 1e-12);
                }
            }
        }
        prop_assert_eq!(s.diagonal_only, icms.iter().all(DenseMatrix::is_diagonal));

        // scaling one ICM entry scales only that layer's contribution
        let mut scaled = icms.clone();
        scaled[0][(0, 1)] *= 3.0;
        scaled[0][(1, 0)] *= 3.0;
        let net2 = MultiWeightNetwork::new(ocms.clone(), scaled, 1.0, Regulator::power(1.0, 1.0).unwrap(), None).unwrap();
        let s2 = build_sum_matrices(&net2, false).unwrap();
        let delta = &s2.block(0, 1).clone() - s.block(0, 1);
        let want = ocms[0].scale(2.0 * icms[0][(0, 1)]);
        prop_assert!((&delta - &want).max_abs() < 1e-12);
    }
}

/// Transitive closure of the off-diagonal sparsity digraph.
fn brute_force_strong(m: &DenseMatrix) -> bool {
    let n = m.rows();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach.iter().all(|r| r.iter().all(|&b| b))
}

#[test]
fn strong_connectivity_agrees_with_closure_on_all_small_digraphs() {
    for n in 1..=4usize {
        let arcs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << arcs.len()) {
            let mut m = DenseMatrix::zeros(n, n);
            for (k, &(i, j)) in arcs.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    m[(i, j)] = 1.0;
                }
            }
            assert_eq!(linalg::is_strongly_connected(&m).unwrap(), brute_force_strong(&m), "n={n} mask={mask:b}");
        }
    }
}

#[test]
fn scalar_speed_ordering() {
    let grid: Vec<f64> = (1..50).map(|k| k as f64 / 50.0).collect();
    // compared through ln V, which stays finite where V underflows
    let v = |ell: f64, delta: f64, t: f64| {
        ScalarModel::lemma2(Regulator::power(1.0, ell).unwrap(), delta, 15.0).unwrap().closed_form_ln(t).unwrap()
    };
    for &t in &grid {
        for ell in [1.0, 2.0, 3.0] {
            assert!(v(ell, 0.5, t) > v(ell, 1.0, t) && v(ell, 1.0, t) > v(ell, 2.0, t));
        }
        for delta in [0.5, 1.0, 2.0] {
            assert!(v(1.0, delta, t) > v(2.0, delta, t) && v(2.0, delta, t) > v(3.0, delta, t));
        }
    }
    // the same ordering on simulated samples
    let sim = |ell: f64, delta: f64| {
        ScalarModel::lemma2(Regulator::power(1.0, ell).unwrap(), delta, 15.0).unwrap().simulate(1e-3, 40).unwrap()
    };
    let (a, b) = (sim(1.0, 1.0), sim(1.0, 2.0));
    assert!(a.ln_values.iter().zip(&b.ln_values).skip(1).all(|(x, y)| x > y));
    let c = sim(2.0, 1.0);
    assert!(a.ln_values.iter().zip(&c.ln_values).skip(1).all(|(x, y)| x > y));
}

#[test]
fn forcing_keeps_solution_below_closed_form() {
    // V' = -δV/C - g(t), g ≥ 0, by RK4 with an independent step loop
    let reg = Regulator::power(1.0, 1.0).unwrap();
    let m = ScalarModel::lemma2(reg, 1.0, 15.0).unwrap();
    let rhs = |t: f64, v: f64| -v / reg.eval(t).unwrap() - 0.5 * (1.0 + t.sin());
    let (mut t, mut v, h) = (0.0, 15.0, 1e-4);
    while t < 0.9 - 1e-12 {
        let k1 = rhs(t, v);
        let k2 = rhs(t + h / 2.0, v + h / 2.0 * k1);
        let k3 = rhs(t + h / 2.0, v + h / 2.0 * k2);
        let k4 = rhs(t + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        assert!(v <= m.closed_form(t).unwrap());
    }
}

#[test]
fn pt_stability_for_diverging_regulators() {
    let regs = [
        Regulator::power(1.0, 1.0).unwrap(),
        Regulator::power(2.0, 2.0).unwrap(),
        Regulator::exp_a(1.0, 1.0).unwrap(),
        Regulator::exp_b(1.0, 1.0).unwrap(),
    ];
    for reg in regs {
        let c0 = reg.initial_value();
        let models = [
            ScalarModel::lemma2(reg, 1.0, 15.0).unwrap(),
            ScalarModel::power(reg, 1.0, 0.5, 15.0).unwrap(),
            ScalarModel::power(reg, 1.0, 1.5, 15.0).unwrap(),
            ScalarModel::lemma3(reg, 0.5, c0 * 0.5 + 2.0, 1.0, 15.0).unwrap(),
            ScalarModel::lemma3(reg, 0.5, c0 * 0.5 + 2.0, 0.5, 15.0).unwrap(),
        ];
        for m in models {
            let gap = 1e-6 * reg.horizon();
            let tr = m.simulate(gap, 30).unwrap();
            let end = *tr.values.last().unwrap();
            if m.p > 1.0 {
                // only logarithmic decay: V^{1-p} grows like ln(1/gap)
                let exact = m.closed_form(reg.horizon() - gap).unwrap();
                assert!((end / exact - 1.0).abs() < 1e-6, "{m:?}: {end} vs {exact}");
                assert!(tr.values.windows(2).all(|w| w[1] < w[0]));
            } else {
                assert!(end <= 1e-3 * 15.0, "{m:?}: {end}");
            }
        }
    }
}

#[test]
fn near_horizon_behaviour_matches_classification() {
    let h = 1e-6;
    let probe = |m: &ScalarModel| {
        let mut cfg = IntegratorConfig::for_horizon(1.0);
        cfg.stop_gap = 1e-7;
        cfg.samples = 30;
        cfg.probe_times = vec![1.0 - 2.0 * h, 1.0 - h];
        let tr = m.simulate_with(&cfg).unwrap();
        let at = |t: f64| tr.values[tr.times.iter().position(|&s| s == t).unwrap()];
        (at(1.0 - h), at(1.0 - 2.0 * h))
    };
    let zero = ScalarModel::lemma2(Regulator::power(1.0, 1.0).unwrap(), 2.0, 15.0).unwrap();
    assert_eq!(zero.classify_phi().unwrap(), PhiClass::Zero);
    let (a, b) = probe(&zero);
    assert!(((a - b) / h).abs() < 1e-4);

    let unit = ScalarModel::lemma2(Regulator::power(1.0, 1.0).unwrap(), 1.0, 15.0).unwrap();
    let PhiClass::NonzeroConstant(k) = unit.classify_phi().unwrap() else { panic!() };
    let (a, _) = probe(&unit);
    assert!((a / h / k - 1.0).abs() < 0.01);
}

#[test]
fn sync_error_metric_on_benchmark_start() {
    assert!((error_e1(&benchmark::initial_states()) - 45.0 * 3f64.sqrt()).abs() < 1e-12);
    let _ = NodeDynamics::chua3();
}
