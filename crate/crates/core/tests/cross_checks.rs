mod common;

use common::*;
use hqng::gradients::{derivative_state_jacobian, energy, parameter_shift_jacobian};
use hqng::meter::CostMeter;
use hqng::metrics::{fubini_study, fubini_study_metered, hamiltonian_aware, InversePolicy};
use hqng::optimizers::{
    continuous_trajectory, coordinate_maps, run, run_reparameterized, Method, Optimizer,
    OptimizerConfig, RunStatus,
};
use hqng::oracle::density_matrix;
use hqng::pauli::{pauli_matrix, Hamiltonian};
use hqng::sampling::ExpectationEstimator;
use hqng::sim::{prepare_state, Ansatz};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn bundled(name: &str) -> (Hamiltonian, Ansatz) {
    let h = Hamiltonian::parse(&std::fs::read_to_string(data(&format!("{name}.ham"))).unwrap())
        .unwrap();
    let a = Ansatz::parse(&std::fs::read_to_string(data(&format!("{name}.ans"))).unwrap()).unwrap();
    (h, a)
}

/// OP-VQITE right-hand side from dense matrices:
/// `b = sum_r V(rho, a_r P_r) grad tr(rho a_r P_r)`.
fn dense_op_vqite_rhs(a: &Ansatz, h: &Hamiltonian, p: &[f64]) -> DVector<f64> {
    let rho = density_matrix(&prepare_state(a, p).unwrap()).unwrap();
    let hm = h.dense_matrix().unwrap();
    let tr = |m: &DMatrix<Complex64>| m.trace().re;
    let e = tr(&(&rho * &hm));
    let tj = derivative_state_jacobian(a, h, p).unwrap();
    let mut b = DVector::zeros(a.n_params());
    for (r, (c, term)) in h.terms().iter().enumerate() {
        let o = pauli_matrix(term).unwrap() * Complex64::new(*c, 0.0);
        let anti = &o * &hm + &hm * &o;
        let v = tr(&(&rho * anti)) - 2.0 * e * tr(&(&rho * &o));
        b += tj.entries.column(r) * (v * c);
    }
    b
}

#[test]
fn op_vqite_rhs_matches_dense_oracle() {
    let mut rng = rng(21);
    for k in 0..25 {
        let n = 1 + k % 3;
        let m = rng.random_range(1..=4);
        let v = rng.random_range(2..=6).min((1usize << (2 * n)) - 1);
        let a = random_ansatz(&mut rng, n, m);
        let h = random_hamiltonian(&mut rng, n, v, k % 2 == 0);
        let p = random_params(&mut rng, m);
        let mut opt = Optimizer::new(&a, &h, OptimizerConfig::new(Method::OpVqite)).unwrap();
        let rhs = opt.components(&p).unwrap().rhs;
        let oracle = dense_op_vqite_rhs(&a, &h, &p);
        assert!(
            (&rhs - &oracle).amax() < 1e-10,
            "instance {k}: {rhs} vs {oracle}"
        );
    }
}

#[test]
fn op_vqite_rhs_is_not_the_gradient() {
    let (h, a) = bundled("heisenberg2");
    let p = [0.3, -0.7];
    let mut opt = Optimizer::new(&a, &h, OptimizerConfig::new(Method::OpVqite)).unwrap();
    let c = opt.components(&p).unwrap();
    assert!((&c.rhs - &c.gradient).amax() > 1e-3);
}

#[test]
fn energy_traces_do_not_increase_on_two_qubit_instance() {
    let (h, a) = bundled("heisenberg2");
    for method in Method::ALL {
        let c = OptimizerConfig {
            eta: 0.01,
            max_steps: 600,
            energy_tolerance: 0.0,
            ..OptimizerConfig::new(method)
        };
        let r = run(&a, &h, &c, &[-0.5, 2.5], None).unwrap();
        for w in r.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-14, "{method}: {} -> {}", w[0], w[1]);
        }
    }
}

/// Two independent qubits; T stays well conditioned along the whole path.
fn product_instance() -> (Hamiltonian, Ansatz) {
    let h = Hamiltonian::parse("1 ZI\n0.5 XI\n-0.8 IZ\n0.6 IX\n0.3 ZZ").unwrap();
    let a = Ansatz::parse("qubits 2\nRY q0 p0\nRY q1 p1\n").unwrap();
    (h, a)
}

#[test]
fn zero_regularization_tracks_exact_solve() {
    for (method, (h, a)) in [
        (Method::Qng, bundled("heisenberg2")),
        (Method::Hqng, product_instance()),
    ] {
        let base = OptimizerConfig {
            max_steps: 30,
            energy_tolerance: 0.0,
            ..OptimizerConfig::new(method)
        };
        let exact = OptimizerConfig {
            policy: InversePolicy::ExactSolve,
            ..base.clone()
        };
        let zero = OptimizerConfig {
            policy: InversePolicy::Regularized { lambda: 0.0 },
            ..base
        };
        let x = run(&a, &h, &exact, &[-0.5, 2.5], None).unwrap();
        let y = run(&a, &h, &zero, &[-0.5, 2.5], None).unwrap();
        let worst_condition = x
            .params
            .iter()
            .map(|p| {
                let ev = Optimizer::new(&a, &h, exact.clone())
                    .unwrap()
                    .components(p)
                    .unwrap()
                    .metric
                    .unwrap()
                    .eigenvalues();
                ev[1] / ev[0]
            })
            .fold(0.0, f64::max);
        assert!(
            worst_condition < 100.0,
            "{method}: condition {worst_condition}"
        );
        assert!(trace_distance(&x.params, &y.params) < 1e-9, "{method}");
    }
}

#[test]
fn regularization_breaks_reparameterization_invariance() {
    let (h, a) = bundled("heisenberg2");
    let maps = coordinate_maps();
    let c = OptimizerConfig {
        eta: 0.001,
        max_steps: 200,
        energy_tolerance: 0.0,
        ..OptimizerConfig::new(Method::Hqng)
    };
    let t1 = run_reparameterized(&a, &h, &c, maps[0].as_ref(), &[-0.5, 2.5], None).unwrap();
    let t2 = run_reparameterized(&a, &h, &c, maps[1].as_ref(), &[-0.5, 2.5], None).unwrap();
    assert!(trace_distance(&t1.params, &t2.params) > 1e-2);
}

#[test]
fn continuous_limit_is_coordinate_free() {
    // Shrinking dt shrinks the gap between the plain and the nonlinear-map flow.
    let (h, a) = bundled("heisenberg2");
    let maps = coordinate_maps();
    let gap = |dt: f64| {
        let steps = (0.2 / dt).round() as usize;
        let c = OptimizerConfig {
            eta: dt,
            policy: InversePolicy::ExactSolve,
            max_steps: steps,
            energy_tolerance: 0.0,
            ..OptimizerConfig::new(Method::Qng)
        };
        let plain = continuous_trajectory(
            &a,
            &h,
            Method::Qng,
            InversePolicy::ExactSolve,
            &[-0.5, 2.5],
            0.2,
            dt,
        )
        .unwrap();
        let mapped = run_reparameterized(&a, &h, &c, maps[2].as_ref(), &[-0.5, 2.5], None).unwrap();
        max_abs_diff(plain.last().unwrap(), mapped.params.last().unwrap())
    };
    let (coarse, fine) = (gap(0.01), gap(0.001));
    assert!(fine < coarse / 5.0, "coarse {coarse:e}, fine {fine:e}");
}

#[test]
fn noisy_fubini_study_is_unbiased() {
    let (_, a) = bundled("heisenberg2");
    let p = [0.4, 1.1];
    let exact = fubini_study(&a, &p).unwrap().entries;
    let mut est = ExpectationEstimator::shots(4096, 3);
    let trials = 200;
    let mut mean = DMatrix::zeros(2, 2);
    for _ in 0..trials {
        mean += fubini_study_metered(&a, &p, &mut est, &mut CostMeter::new())
            .unwrap()
            .entries;
    }
    mean /= trials as f64;
    // per-element standard error is about 0.5 / sqrt(4096 * 200) ~ 6e-4
    assert!((mean - exact).amax() < 3e-3);
}

#[test]
fn noisy_run_is_reproducible_and_differs_from_exact() {
    let (h, a) = bundled("h2");
    let init = vec![0.2; a.n_params()];
    let c = OptimizerConfig {
        max_steps: 5,
        energy_tolerance: 0.0,
        shots: Some(1024),
        seed: 9,
        ..OptimizerConfig::new(Method::Hqng)
    };
    let x = run(&a, &h, &c, &init, None).unwrap();
    let y = run(&a, &h, &c, &init, None).unwrap();
    assert_eq!(x, y);
    let exact = run(&a, &h, &OptimizerConfig { shots: None, ..c }, &init, None).unwrap();
    assert_ne!(x.params, exact.params);
    assert_eq!(x.status, RunStatus::BudgetExhausted);
}

#[test]
fn identity_offset_does_not_change_updates() {
    let (h, a) = bundled("heisenberg2");
    let mut terms = h.terms().to_vec();
    terms.push((-4.0, hqng::pauli::PauliTerm::identity(2)));
    let shifted = Hamiltonian::new(terms).unwrap();
    for method in [Method::Vg, Method::Qng] {
        let c = OptimizerConfig::new(method);
        let x = Optimizer::new(&a, &h, c.clone())
            .unwrap()
            .step(&[0.3, 0.2])
            .unwrap();
        let y = Optimizer::new(&a, &shifted, c)
            .unwrap()
            .step(&[0.3, 0.2])
            .unwrap();
        assert!(max_abs_diff(&x, &y) < 1e-12);
    }
    let e = energy(&a, &shifted, &[0.3, 0.2]).unwrap() - energy(&a, &h, &[0.3, 0.2]).unwrap();
    assert!((e + 4.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_aware_tensor_is_symmetric_psd(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=5);
        let v = rng.random_range(1..=6).min((1usize << (2 * n)) - 1);
        let a = random_ansatz(&mut rng, n, m);
        let h = random_hamiltonian(&mut rng, n, v, true);
        let p = random_params(&mut rng, m);
        let tj = parameter_shift_jacobian(&a, &h, &p, &mut ExpectationEstimator::Exact, &mut CostMeter::new()).unwrap();
        let t = hamiltonian_aware(&h, &tj).unwrap();
        prop_assert!(t.validate().is_ok());
        let fs = fubini_study(&a, &p).unwrap();
        prop_assert!(fs.validate().is_ok());
    }

    #[test]
    fn natural_directions_descend(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let v = rng.random_range(1..=6).min((1usize << (2 * n)) - 1);
        let a = random_ansatz(&mut rng, n, m);
        let h = random_hamiltonian(&mut rng, n, v, false);
        let p = random_params(&mut rng, m);
        for method in [Method::Vg, Method::Qng, Method::Hqng] {
            let mut opt = Optimizer::new(&a, &h, OptimizerConfig::new(method)).unwrap();
            let (d, g) = opt.direction(&p).unwrap();
            prop_assert!(d.dot(&g) >= -1e-12);
        }
    }
}
