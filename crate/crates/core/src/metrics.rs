//! Metric tensors on parameter space and the natural-gradient solve.
//!
//! Three constructors are provided:
//!
//! - [`fubini_study`]: `A_ij = Re[<d_i phi|d_j phi> - <d_i phi|phi><phi|d_j phi>]`.
//! - [`hamiltonian_aware`]: `T = G / (2 |a|)` with
//!   `G_ij = sum_r a_r^2 d_i<P_r> d_j<P_r>`, i.e. the pullback of the Euclidean
//!   metric through `theta -> (a_1 <P_1>, ..., a_v <P_v>)`.
//! - [`full_pauli_pullback`]: the same pullback through all `4^n` unit-weight
//!   Pauli expectations, which equals `2^{n+1} A` on pure states.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gradients::{parameter_shift_jacobian, TermJacobian};
use crate::meter::{fubini_study_charge, CostMeter};
use crate::pauli::Hamiltonian;
use crate::sampling::ExpectationEstimator;
use crate::sim::{derivative_states, prepare_state, Ansatz};

/// Largest register for the full-basis pullback (4^n terms).
pub const PULLBACK_QUBIT_LIMIT: usize = 4;
/// Regularization used by the application runs.
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_RCOND: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    FubiniStudy,
    HamiltonianAware,
    FullPauliPullback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub entries: DMatrix<f64>,
    pub kind: MetricKind,
}

impl MetricTensor {
    pub fn new(entries: DMatrix<f64>, kind: MetricKind) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(MetricTensor { entries, kind })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    /// Checks symmetry and positive semidefiniteness. A negative eigenvalue
    /// beyond the tolerance is reported, never clamped.
    pub fn validate(&self) -> Result<()> {
        let asym = self.max_asymmetry();
        if asym >= SYMMETRY_TOLERANCE {
            return Err(Error::Numerical(format!("metric asymmetry {asym:e}")));
        }
        let min = self.min_eigenvalue();
        if min < PSD_TOLERANCE {
            return Err(Error::Numerical(format!(
                "metric has eigenvalue {min:e} < 0"
            )));
        }
        Ok(())
    }
}

/// Fubini-Study tensor from exact tangent vectors.
pub fn fubini_study(ansatz: &Ansatz, params: &[f64]) -> Result<MetricTensor> {
    let state = prepare_state(ansatz, params)?;
    let tangents = derivative_states(ansatz, params)?;
    let m = tangents.len();
    let overlaps = tangents
        .iter()
        .map(|d| d.inner(&state))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let value = (tangents[i].inner(&tangents[j])? - overlaps[i].conj() * overlaps[j]).re;
            a[(i, j)] = value;
            a[(j, i)] = value;
        }
    }
    MetricTensor::new(a, MetricKind::FubiniStudy)
}

/// Fubini-Study tensor as a hardware run would obtain it, charging
/// `2 m (m + 1)` estimations to `meter`.
///
/// With an exact estimator this is [`fubini_study`]. Otherwise each element is
/// assembled from four estimated overlaps `F(s, t) = |<phi(theta)|phi(theta + s e_i + t e_j)>|^2`
/// at shifts `s, t = +-pi/2`, using `A_ij = -(1/2) d_i d_j F`.
pub fn fubini_study_metered(
    ansatz: &Ansatz,
    params: &[f64],
    estimator: &mut ExpectationEstimator,
    meter: &mut CostMeter,
) -> Result<MetricTensor> {
    let m = ansatz.n_params();
    let tensor = if estimator.is_exact() {
        fubini_study(ansatz, params)?
    } else {
        let reference = prepare_state(ansatz, params)?;
        let mut overlap = |shifts: &[(usize, f64)]| -> Result<f64> {
            let mut shifted = params.to_vec();
            for &(k, s) in shifts {
                shifted[k] += s;
            }
            let f = reference
                .inner(&prepare_state(ansatz, &shifted)?)?
                .norm_sqr();
            Ok(estimator.estimate_probability(f))
        };
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mixed = overlap(&[(i, FRAC_PI_2), (j, FRAC_PI_2)])?
                    - overlap(&[(i, FRAC_PI_2), (j, -FRAC_PI_2)])?
                    - overlap(&[(i, -FRAC_PI_2), (j, FRAC_PI_2)])?
                    + overlap(&[(i, -FRAC_PI_2), (j, -FRAC_PI_2)])?;
                let value = -mixed / 8.0;
                a[(i, j)] = value;
                a[(j, i)] = value;
            }
        }
        MetricTensor::new(a, MetricKind::FubiniStudy)?
    };
    meter.charge(fubini_study_charge(m));
    Ok(tensor)
}

fn check_jacobian(h: &Hamiltonian, tj: &TermJacobian) -> Result<()> {
    if tj.n_terms() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: tj.n_terms(),
        });
    }
    Ok(())
}

/// Unnormalized pullback `G = J diag(a^2) J^T` through `S = {a_r P_r}`.
pub fn weighted_pullback(h: &Hamiltonian, tj: &TermJacobian) -> Result<DMatrix<f64>> {
    check_jacobian(h, tj)?;
    let mut scaled = tj.entries.clone();
    for (r, (a, _)) in h.terms().iter().enumerate() {
        scaled.column_mut(r).scale_mut(*a);
    }
    Ok(&scaled * scaled.transpose())
}

/// Hamiltonian-aware tensor `T = G / (2 sqrt(sum_r a_r^2))`. Needs no
/// estimations beyond the Jacobian.
pub fn hamiltonian_aware(h: &Hamiltonian, tj: &TermJacobian) -> Result<MetricTensor> {
    let g = weighted_pullback(h, tj)?;
    let prefactor = 1.0 / (2.0 * h.coefficient_norm());
    MetricTensor::new(g * prefactor, MetricKind::HamiltonianAware)
}

/// Pullback through all `4^n` unit-weight Pauli expectations.
pub fn full_pauli_pullback(ansatz: &Ansatz, params: &[f64]) -> Result<MetricTensor> {
    let n = ansatz.n_qubits();
    if n > PULLBACK_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: n,
            limit: PULLBACK_QUBIT_LIMIT,
        });
    }
    let basis = Hamiltonian::full_basis(n)?;
    let tj = parameter_shift_jacobian(
        ansatz,
        &basis,
        params,
        &mut ExpectationEstimator::Exact,
        &mut CostMeter::new(),
    )?;
    MetricTensor::new(
        &tj.entries * tj.entries.transpose(),
        MetricKind::FullPauliPullback,
    )
}

/// `t + lambda I`.
pub fn regularize(t: &MetricTensor, lambda: f64) -> Result<MetricTensor> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let n = t.dim();
    MetricTensor::new(&t.entries + DMatrix::identity(n, n) * lambda, t.kind)
}

/// How the metric is inverted against the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InversePolicy {
    /// Cholesky solve; fails on singular or indefinite tensors.
    ExactSolve,
    /// Eigen-truncated Moore-Penrose inverse.
    PseudoInverse { rcond: f64 },
    /// Solve `(t + lambda I) d = grad`.
    Regularized { lambda: f64 },
}

impl Default for InversePolicy {
    fn default() -> Self {
        InversePolicy::Regularized {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl std::str::FromStr for InversePolicy {
    type Err = Error;

    /// `exact`, `pinv`, `pinv:<rcond>`, `regularized`, `regularized:<lambda>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| {
                a.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number in policy '{s}'")))
            })
        };
        match name.trim() {
            "exact" => Ok(InversePolicy::ExactSolve),
            "pinv" => Ok(InversePolicy::PseudoInverse {
                rcond: number(DEFAULT_RCOND)?,
            }),
            "regularized" => Ok(InversePolicy::Regularized {
                lambda: number(DEFAULT_LAMBDA)?,
            }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown inverse policy '{s}'"
            ))),
        }
    }
}

fn singular(t: &DMatrix<f64>) -> Error {
    let min = if t.nrows() == 0 {
        0.0
    } else {
        SymmetricEigen::new(t.clone()).eigenvalues.min()
    };
    Error::SingularMetric {
        min_eigenvalue: min,
    }
}

/// Direction `d` with `t d = grad` under `policy`.
pub fn natural_direction(
    t: &MetricTensor,
    grad: &DVector<f64>,
    policy: InversePolicy,
) -> Result<DVector<f64>> {
    if grad.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: grad.len(),
        });
    }
    if t.dim() == 0 {
        return Ok(DVector::zeros(0));
    }
    match policy {
        InversePolicy::ExactSolve => {
            let chol = t
                .entries
                .clone()
                .cholesky()
                .ok_or_else(|| singular(&t.entries))?;
            if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0)) {
                return Err(singular(&t.entries));
            }
            Ok(chol.solve(grad))
        }
        InversePolicy::PseudoInverse { rcond } => {
            let eig = SymmetricEigen::new(t.entries.clone());
            let lambda_max = eig.eigenvalues.max();
            let cutoff = rcond * lambda_max;
            let projected = eig.eigenvectors.transpose() * grad;
            let scaled = DVector::from_iterator(
                projected.len(),
                projected
                    .iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(p, &ev)| {
                        if lambda_max > 0.0 && ev > cutoff {
                            p / ev
                        } else {
                            0.0
                        }
                    }),
            );
            Ok(&eig.eigenvectors * scaled)
        }
        InversePolicy::Regularized { lambda } => {
            let reg = regularize(t, lambda)?;
            reg.entries
                .clone()
                .lu()
                .solve(grad)
                .filter(|d| d.iter().all(|x| x.is_finite()))
                .ok_or_else(|| singular(&reg.entries))
        }
    }
}

/// Conventional relative cutoff for numerical rank: `dim * machine epsilon`.
pub fn default_rank_tolerance(dim: usize) -> f64 {
    dim.max(1) as f64 * f64::EPSILON
}

/// Numerical rank: eigenvalues above `tolerance * lambda_max`.
pub fn rank_probe(t: &MetricTensor, tolerance: f64) -> usize {
    let ev = t.eigenvalues();
    let Some(&max) = ev.last() else { return 0 };
    if max <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&e| e > tolerance * max).count()
}
