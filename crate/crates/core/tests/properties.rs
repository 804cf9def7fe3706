use cavitybus_core::dynamics::{process_from_states, propagate_gate, propagate_unitary, PropagatorConfig};
use cavitybus_core::effective::sw_block_diagonalize_split;
use cavitybus_core::gates::{
    average_gate_fidelity, makhlin_invariants, random_local, sqrt_iswap, TwoQubitGate, TwoQubitProcess,
};
use cavitybus_core::linalg::{self, c, C64, I};
use cavitybus_core::model::{build_hamiltonian, DqdParams, OrbitalBasis, PulseSchedule, PulseStep, QubitKind, SystemParams};
use cavitybus_core::noise::{run_noisy_gate, NoiseModel};
use cavitybus_core::ops::hermitian_eig;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dqd() -> impl Strategy<Value = DqdParams> {
    (-15.0..15.0f64, 5.0..15.0f64, 4.0..7.0f64, -0.3..0.3f64, -0.1..0.1f64, 0.0..0.08f64).prop_map(
        |(epsilon, omega_tunnel, omega_z, g_x, g_z, g_ac)| DqdParams {
            epsilon,
            omega_tunnel,
            omega_z,
            g_x,
            g_z,
            g_ac,
        },
    )
}

fn system(n_dqd: usize) -> impl Strategy<Value = SystemParams> {
    (4.0..8.0f64, prop::collection::vec(dqd(), n_dqd), 1usize..5).prop_map(|(omega_r, dqds, n_photon_max)| {
        SystemParams {
            omega_r,
            dqds,
            n_photon_max,
        }
    })
}

fn random_hermitian(n: usize, rng: &mut impl Rng) -> Array2<C64> {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let ad = linalg::dagger(&a.view());
    (&a + &ad).mapv(|z| z * 0.5)
}

fn random_unitary4(rng: &mut impl Rng) -> TwoQubitGate {
    let h = random_hermitian(4, rng);
    TwoQubitGate::new(linalg::hermitian_function(&h, |x| (I * 3.0 * x).exp()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_basis_independent(p in prop_oneof![system(1), system(2)]) {
        let lr = hermitian_eig(&build_hamiltonian(&p, OrbitalBasis::LeftRight).unwrap()).unwrap();
        let eb = hermitian_eig(&build_hamiltonian(&p, OrbitalBasis::Eigen).unwrap()).unwrap();
        let d = lr.values.iter().zip(eb.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(d < 1e-10, "spectra differ by {d:e}");
    }

    #[test]
    fn pulsed_propagator_is_unitary(
        p in system(2),
        e_to in prop::collection::vec(-6.0..6.0f64, 2),
        ramp in 0.5..3.0f64,
    ) {
        let e0 = [p.dqds[0].epsilon, p.dqds[1].epsilon];
        let progs: Vec<Vec<PulseStep>> = (0..2)
            .map(|i| vec![
                PulseStep::Hold { duration: 0.5 },
                PulseStep::Smooth { duration: ramp, to: e_to[i] },
                PulseStep::Hold { duration: 1.0 },
            ])
            .collect();
        let sched = PulseSchedule::from_steps(&e0, &progs).unwrap();
        let cfg = PropagatorConfig { convergence_check: false, ..Default::default() };
        let span = sched.span();
        let traj = propagate_unitary(&p, &sched, &cfg, &[0.5, span]).unwrap();
        for u in &traj.states {
            let d = linalg::unitarity_defect(u);
            prop_assert!(d < 1e-8, "unitarity defect {d:e}");
        }
    }

    #[test]
    fn reduced_process_preserves_hermiticity(p in system(2), t in 1.0..30.0f64) {
        let sched = PulseSchedule::constant(&[p.dqds[0].epsilon, p.dqds[1].epsilon], t).unwrap();
        let cfg = PropagatorConfig { convergence_check: false, ..Default::default() };
        let traj = propagate_gate(&p, QubitKind::Spin, &sched, &cfg, &[t]).unwrap();
        let proc = process_from_states(&traj.states[0], &traj.space, QubitKind::Spin).unwrap();
        prop_assert!(proc.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn depolarizing_fidelity_is_one_quarter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary4(&mut rng);
        let f = average_gate_fidelity(&TwoQubitProcess::depolarizing(), &u).unwrap();
        prop_assert!((f - 0.25).abs() < 1e-10, "F = {f}");
    }

    #[test]
    fn unitary_process_has_unit_fidelity_with_itself(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary4(&mut rng);
        let p = TwoQubitProcess::conjugation(&u);
        prop_assert!(p.hermiticity_defect() < 1e-12);
        let f = average_gate_fidelity(&p, &u).unwrap();
        prop_assert!((f - 1.0).abs() < 1e-10, "F = {f}");
    }
}

#[test]
fn makhlin_invariants_ignore_local_dressing() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut gates = vec![sqrt_iswap()];
    for _ in 0..3 {
        gates.push(random_unitary4(&mut rng));
    }
    for g in &gates {
        let base = makhlin_invariants(g).unwrap();
        for _ in 0..100 {
            let a = linalg::kron(&random_local(&mut rng), &random_local(&mut rng));
            let b = linalg::kron(&random_local(&mut rng), &random_local(&mut rng));
            let dressed = TwoQubitGate::new(a.dot(g.matrix()).dot(&b)).unwrap();
            let inv = makhlin_invariants(&dressed).unwrap();
            for k in 0..3 {
                assert!((inv[k] - base[k]).abs() < 1e-8, "invariant {k}: {} vs {}", inv[k], base[k]);
            }
        }
    }
}

/// Largest error of the low eigenvalues of the second-order effective
/// Hamiltonian for `H0 + λV`.
fn sw_error(h0: &Array2<C64>, v: &Array2<C64>, p: &Array2<C64>, n_low: usize, lambda: f64) -> f64 {
    let vl = v.mapv(|z| z * lambda);
    let sw = sw_block_diagonalize_split(h0, &vl, p).unwrap();
    let (approx, _) = linalg::eigh(&sw.h_effective).unwrap();
    let (exact, _) = linalg::eigh(&(h0 + &vl)).unwrap();
    (0..n_low).map(|k| (approx[k] - exact[k]).abs()).fold(0.0, f64::max)
}

#[test]
fn schrieffer_wolff_error_is_third_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (n, n_low) = (10, 4);
    let mut h0 = Array2::zeros((n, n));
    let mut p = Array2::zeros((n, n));
    for k in 0..n {
        h0[[k, k]] = if k < n_low {
            c(rng.random_range(0.0..1.0))
        } else {
            c(rng.random_range(8.0..12.0))
        };
        if k < n_low {
            p[[k, k]] = c(1.0);
        }
    }
    let v = random_hermitian(n, &mut rng);
    let lambdas = [0.005, 0.0025, 0.00125, 0.000625];
    let errs: Vec<f64> = lambdas.iter().map(|&l| sw_error(&h0, &v, &p, n_low, l)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((5.5..11.5).contains(&ratio), "halving ratio {ratio} (errors {errs:?})");
    }
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 3.0).abs() < 0.3, "fitted exponent {slope} (errors {errs:?})");
}

#[test]
fn monte_carlo_is_identical_across_thread_counts() {
    let d = DqdParams {
        epsilon: 0.0,
        omega_tunnel: 12.0,
        omega_z: 0.0,
        g_x: 0.0,
        g_z: 0.0,
        g_ac: 0.04,
    };
    let p = SystemParams {
        omega_r: 6.0,
        dqds: vec![d, d],
        n_photon_max: 2,
    };
    let noise = NoiseModel {
        sigma_eps: 0.02,
        n_samples: 6,
        master_seed: 11,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_noisy_gate(&p, &noise, &sqrt_iswap(), QubitKind::Charge, 1200.0).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one.n_failed, 0);
    for (a, b) in one.per_sample.iter().zip(&many.per_sample) {
        assert_eq!(a.min_infidelity.to_bits(), b.min_infidelity.to_bits());
        assert_eq!(a.gate_time.to_bits(), b.gate_time.to_bits());
        assert_eq!(a.leakage.to_bits(), b.leakage.to_bits());
    }
    assert_eq!(one.mean_infidelity.to_bits(), many.mean_infidelity.to_bits());
}
