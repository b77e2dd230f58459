//! Brute-force reference computations used for verification and for the
//! ground energy behind every `delta_e`. Nothing here is on the optimizer's
//! hot path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gradients::energy;
use crate::metrics::{MetricKind, MetricTensor};
use crate::pauli::{Hamiltonian, DENSE_QUBIT_LIMIT};
use crate::sim::{prepare_state, Ansatz, StateVector};

/// Largest register for dense density-matrix formulas.
pub const DENSITY_QUBIT_LIMIT: usize = 6;
/// Step for first-order central differences.
pub const FD_STEP: f64 = 1e-5;
/// Step for the second-order infidelity Hessian.
pub const FD_HESSIAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GroundSolution {
    pub energy: f64,
    pub degeneracy: usize,
    pub state: DVector<Complex64>,
}

/// Lowest eigenpair of the dense Hamiltonian.
pub fn ground_state(h: &Hamiltonian) -> Result<GroundSolution> {
    if h.n_qubits() > DENSE_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: h.n_qubits(),
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    let m = h.dense_matrix()?;
    let scale = operator_norm_bound(h);
    let eig = SymmetricEigen::new(m);
    let (idx, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("matrix is non-empty");
    let gap_tol = 1e-8 * scale.max(1.0);
    let degeneracy = eig
        .eigenvalues
        .iter()
        .filter(|&&e| e - energy <= gap_tol)
        .count();
    Ok(GroundSolution {
        energy,
        degeneracy,
        state: eig.eigenvectors.column(idx).into_owned(),
    })
}

/// `sum_r |a_r|`, an upper bound on the operator norm.
pub fn operator_norm_bound(h: &Hamiltonian) -> f64 {
    h.terms().iter().map(|(a, _)| a.abs()).sum()
}

/// Central-difference gradient of the exact energy.
pub fn fd_gradient(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    check_step(step)?;
    let mut shifted = params.to_vec();
    (0..params.len())
        .map(|i| {
            shifted[i] = params[i] + step;
            let plus = energy(ansatz, h, &shifted)?;
            shifted[i] = params[i] - step;
            let minus = energy(ansatz, h, &shifted)?;
            shifted[i] = params[i];
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    Ok(())
}

/// Fubini-Study tensor as half the Hessian of the infidelity
/// `1 - |<phi(theta)|phi(theta + delta)>|^2` at `delta = 0`.
pub fn fd_metric(ansatz: &Ansatz, params: &[f64], step: f64) -> Result<MetricTensor> {
    check_step(step)?;
    let reference = prepare_state(ansatz, params)?;
    let infidelity = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut p = params.to_vec();
        for &(k, s) in shifts {
            p[k] += s;
        }
        Ok(1.0 - reference.inner(&prepare_state(ansatz, &p)?)?.norm_sqr())
    };
    let m = params.len();
    let base = infidelity(&[])?;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let diag =
            (infidelity(&[(i, step)])? - 2.0 * base + infidelity(&[(i, -step)])?) / (step * step);
        a[(i, i)] = diag / 2.0;
        for j in (i + 1)..m {
            let mixed = (infidelity(&[(i, step), (j, step)])?
                - infidelity(&[(i, step), (j, -step)])?
                - infidelity(&[(i, -step), (j, step)])?
                + infidelity(&[(i, -step), (j, -step)])?)
                / (4.0 * step * step);
            a[(i, j)] = mixed / 2.0;
            a[(j, i)] = mixed / 2.0;
        }
    }
    MetricTensor::new(a, MetricKind::FubiniStudy)
}

/// `|phi><phi|`.
pub fn density_matrix(state: &StateVector) -> Result<DMatrix<Complex64>> {
    if state.n_qubits() > DENSITY_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: state.n_qubits(),
            limit: DENSITY_QUBIT_LIMIT,
        });
    }
    let v = DVector::from_column_slice(state.amplitudes());
    Ok(&v * v.adjoint())
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Central-difference derivatives `d_i rho` of the dense density matrix.
pub fn density_derivatives(
    ansatz: &Ansatz,
    params: &[f64],
    step: f64,
) -> Result<Vec<DMatrix<Complex64>>> {
    check_step(step)?;
    let mut shifted = params.to_vec();
    (0..params.len())
        .map(|i| {
            shifted[i] = params[i] + step;
            let plus = density_matrix(&prepare_state(ansatz, &shifted)?)?;
            shifted[i] = params[i] - step;
            let minus = density_matrix(&prepare_state(ansatz, &shifted)?)?;
            shifted[i] = params[i];
            Ok((plus - minus) / Complex64::new(2.0 * step, 0.0))
        })
        .collect()
}

/// `(1/2) tr(d_i rho d_j rho)` from dense finite-difference derivatives.
pub fn dense_hs_metric(ansatz: &Ansatz, params: &[f64]) -> Result<DMatrix<f64>> {
    if ansatz.n_qubits() > DENSITY_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: ansatz.n_qubits(),
            limit: DENSITY_QUBIT_LIMIT,
        });
    }
    let d = density_derivatives(ansatz, params, FD_STEP)?;
    let m = d.len();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        0.5 * trace_product(&d[i], &d[j]).re
    }))
}
