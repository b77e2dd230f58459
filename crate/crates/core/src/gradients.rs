//! Per-term expectations, the parameter-shift Jacobian and the cost gradient.
//!
//! The Jacobian `J[i][r] = d_i tr(rho P_r)` is the shared ingredient of the
//! vanilla gradient, the Hamiltonian-aware metric and the OP-VQITE update.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::meter::{jacobian_charge, CostMeter};
use crate::pauli::Hamiltonian;
use crate::sampling::ExpectationEstimator;
use crate::sim::{derivative_states, expectation, prepare_state, Ansatz, StateVector};

/// `values[r] = tr(rho P_r)`, unscaled by the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TermExpectations {
    pub values: Vec<f64>,
}

/// `m x v` matrix of per-term partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TermJacobian {
    pub entries: DMatrix<f64>,
}

impl TermJacobian {
    pub fn n_params(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.entries.ncols()
    }
}

fn check_qubits(ansatz: &Ansatz, h: &Hamiltonian) -> Result<()> {
    if ansatz.n_qubits() != h.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: ansatz.n_qubits(),
            found: h.n_qubits(),
        });
    }
    Ok(())
}

fn estimate_terms(
    state: &StateVector,
    h: &Hamiltonian,
    estimator: &mut ExpectationEstimator,
) -> Result<Vec<f64>> {
    h.terms()
        .iter()
        .map(|(_, p)| {
            let exact = expectation(state, p)?;
            // identity needs no measurement
            Ok(if p.is_identity() {
                exact
            } else {
                estimator.estimate(exact)
            })
        })
        .collect()
}

pub fn term_expectations(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
) -> Result<TermExpectations> {
    check_qubits(ansatz, h)?;
    let state = prepare_state(ansatz, params)?;
    Ok(TermExpectations {
        values: estimate_terms(&state, h, &mut ExpectationEstimator::Exact)?,
    })
}

/// `sum_r a_r values[r]`.
pub fn cost(h: &Hamiltonian, te: &TermExpectations) -> Result<f64> {
    if te.values.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: te.values.len(),
        });
    }
    Ok(h.terms()
        .iter()
        .zip(&te.values)
        .map(|((a, _), x)| a * x)
        .sum())
}

/// Exact energy `tr(rho H)` at `params`.
pub fn energy(ansatz: &Ansatz, h: &Hamiltonian, params: &[f64]) -> Result<f64> {
    cost(h, &term_expectations(ansatz, h, params)?)
}

/// Jacobian by the two-term shift rule with shift pi/2. Every (shifted circuit,
/// term) pair is one estimate, so `2 m v` quantities are charged.
pub fn parameter_shift_jacobian(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    estimator: &mut ExpectationEstimator,
    meter: &mut CostMeter,
) -> Result<TermJacobian> {
    check_qubits(ansatz, h)?;
    let m = ansatz.n_params();
    if params.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: params.len(),
        });
    }
    let v = h.len();
    let mut entries = DMatrix::zeros(m, v);
    let mut shifted = params.to_vec();
    for i in 0..m {
        if ansatz.generator(i).is_none() {
            return Err(Error::InvalidGate(format!(
                "parameter p{i} does not drive a Pauli rotation"
            )));
        }
        shifted[i] = params[i] + FRAC_PI_2;
        let plus = estimate_terms(&prepare_state(ansatz, &shifted)?, h, estimator)?;
        shifted[i] = params[i] - FRAC_PI_2;
        let minus = estimate_terms(&prepare_state(ansatz, &shifted)?, h, estimator)?;
        shifted[i] = params[i];
        for r in 0..v {
            entries[(i, r)] = 0.5 * (plus[r] - minus[r]);
        }
    }
    meter.charge(jacobian_charge(m, v));
    Ok(TermJacobian { entries })
}

/// Exact Jacobian from tangent vectors, `2 Re <d_i phi|P_r|phi>`.
pub fn derivative_state_jacobian(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
) -> Result<TermJacobian> {
    check_qubits(ansatz, h)?;
    let state = prepare_state(ansatz, params)?;
    let tangents = derivative_states(ansatz, params)?;
    let mut entries = DMatrix::zeros(tangents.len(), h.len());
    for (i, d) in tangents.iter().enumerate() {
        for (r, (_, p)) in h.terms().iter().enumerate() {
            entries[(i, r)] = 2.0 * d.matrix_element(p, &state)?.re;
        }
    }
    Ok(TermJacobian { entries })
}

/// `grad[i] = sum_r a_r J[i][r]`.
pub fn gradient(h: &Hamiltonian, tj: &TermJacobian) -> Result<DVector<f64>> {
    if tj.n_terms() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: tj.n_terms(),
        });
    }
    let coeffs = DVector::from_vec(h.coefficients());
    Ok(&tj.entries * coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use crate::sim::Gate;

    fn ry_ansatz() -> Ansatz {
        Ansatz::new(1, vec![Gate::rotation(1, &[(0, Pauli::Y)], 0).unwrap()]).unwrap()
    }

    fn exact_jacobian(a: &Ansatz, h: &Hamiltonian, p: &[f64]) -> TermJacobian {
        parameter_shift_jacobian(
            a,
            h,
            p,
            &mut ExpectationEstimator::Exact,
            &mut CostMeter::new(),
        )
        .unwrap()
    }

    #[test]
    fn bloch_coordinates_for_minus_x_minus_y() {
        let h = Hamiltonian::parse("-1 X\n-1 Y").unwrap();
        for theta in [-2.0, 0.0, 0.4, 1.3] {
            let te = term_expectations(&ry_ansatz(), &h, &[theta]).unwrap();
            assert!((te.values[0] - f64::sin(theta)).abs() < 1e-12);
            assert!(te.values[1].abs() < 1e-12);
        }
        let at_zero = term_expectations(&ry_ansatz(), &h, &[0.0]).unwrap();
        assert_eq!(cost(&h, &at_zero).unwrap(), 0.0);
    }

    #[test]
    fn identity_and_z_parity() {
        let a = Ansatz::parse("qubits 3\nRY q0 p0\nRX q2 p1\n").unwrap();
        let h = Hamiltonian::parse("1 III\n1 ZII\n1 ZZI\n-2 IIZ").unwrap();
        let te = term_expectations(&a, &h, &[0.0, 0.0]).unwrap();
        assert_eq!(te.values, vec![1.0, 1.0, 1.0, 1.0]);

        let id = Hamiltonian::parse("1 I").unwrap();
        let te = term_expectations(&ry_ansatz(), &id, &[0.9]).unwrap();
        assert_eq!(cost(&id, &te).unwrap(), 1.0);
        assert!(matches!(
            cost(&h, &TermExpectations { values: vec![1.0] }),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn shift_rule_on_cosine() {
        let h = Hamiltonian::parse("1 Z").unwrap();
        for theta in [-1.0, 0.3, 2.5] {
            let tj = exact_jacobian(&ry_ansatz(), &h, &[theta]);
            assert!((tj.entries[(0, 0)] + f64::sin(theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_column_is_zero() {
        let a = Ansatz::parse("qubits 2\nRY q0 p0\nCNOT q0 q1\nRX q1 p1\n").unwrap();
        let h = Hamiltonian::parse("0.5 II\n1 XZ").unwrap();
        let tj = exact_jacobian(&a, &h, &[0.3, -0.8]);
        assert_eq!(
            tj.entries.column(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn gradient_of_minus_sine() {
        let h = Hamiltonian::parse("-1 X\n-1 Y").unwrap();
        for theta in [0.0, 0.7, -2.2] {
            let g = gradient(&h, &exact_jacobian(&ry_ansatz(), &h, &[theta])).unwrap();
            assert!((g[0] + f64::cos(theta)).abs() < 1e-12);
        }
        let zero = TermJacobian {
            entries: DMatrix::zeros(3, 2),
        };
        assert_eq!(gradient(&h, &zero).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn charges_two_m_v() {
        let a = Ansatz::parse("qubits 2\nRY q0 p0\nCNOT q0 q1\nRX q1 p1\n").unwrap();
        let h = Hamiltonian::parse("1 XI\n1 IZ\n1 YY").unwrap();
        let mut meter = CostMeter::new();
        parameter_shift_jacobian(
            &a,
            &h,
            &[0.1, 0.2],
            &mut ExpectationEstimator::Exact,
            &mut meter,
        )
        .unwrap();
        assert_eq!(meter.total(), 12);
    }

    #[test]
    fn noisy_jacobian_is_on_shot_lattice_and_bounded() {
        let a = Ansatz::parse("qubits 2\nRY q0 p0\nCNOT q0 q1\nRX q1 p1\n").unwrap();
        let h = Hamiltonian::parse("1 II\n1 XI\n1 IZ").unwrap();
        let mut est = ExpectationEstimator::shots(64, 1);
        let tj =
            parameter_shift_jacobian(&a, &h, &[0.4, 1.0], &mut est, &mut CostMeter::new()).unwrap();
        for x in tj.entries.iter() {
            assert!(x.abs() <= 1.0);
            let scaled = x * 64.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
        assert_eq!(tj.entries[(0, 0)], 0.0);
    }
}
