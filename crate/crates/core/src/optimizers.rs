//! Update rules, the optimization loop and its trace.
//!
//! Every method computes a right-hand side `b` and optionally a metric `M`;
//! the step is `theta - eta * M^{-1} b` (or `theta - eta * b` without a metric).
//!
//! | method  | metric                  | rhs          | estimations per step        |
//! |---------|-------------------------|--------------|-----------------------------|
//! | VG      | none                    | grad f       | `2mv`                       |
//! | QNG     | Fubini-Study `A`        | grad f       | `2mv + 2m(m+1)`             |
//! | H-QNG   | Hamiltonian-aware `T`   | grad f       | `2mv`                       |
//! | OP-VQITE| `J diag(a^2) J^T`       | `b`          | `2mv` + anticommutator set  |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gradients::{energy, gradient, parameter_shift_jacobian, TermJacobian};
use crate::meter::{jacobian_charge, CostMeter};
use crate::metrics::{
    fubini_study_metered, hamiltonian_aware, natural_direction, weighted_pullback, InversePolicy,
    MetricKind, MetricTensor,
};
use crate::pauli::{pauli_product, Hamiltonian, PauliTerm};
use crate::sampling::ExpectationEstimator;
use crate::sim::{expectation, prepare_state, Ansatz};

/// 1 kcal/mol in Hartree.
pub const CHEMICAL_ACCURACY: f64 = 1.593e-3;
/// Learning rate for exact runs.
pub const DEFAULT_ETA: f64 = 0.05;
/// Runs stop once the gradient norm falls below this.
pub const STATIONARY_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Vg,
    Qng,
    Hqng,
    OpVqite,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vg, Method::Qng, Method::Hqng, Method::OpVqite];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vg => "vg",
            Method::Qng => "qng",
            Method::Hqng => "hqng",
            Method::OpVqite => "opvqite",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "vg" => Ok(Method::Vg),
            "qng" => Ok(Method::Qng),
            "hqng" => Ok(Method::Hqng),
            "opvqite" => Ok(Method::OpVqite),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub eta: f64,
    /// Metric inversion; the regularization strength lives in `Regularized`.
    pub policy: InversePolicy,
    pub max_steps: usize,
    pub energy_tolerance: f64,
    /// `None` means exact expectation values.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(method: Method) -> Self {
        OptimizerConfig {
            method,
            eta: DEFAULT_ETA,
            policy: InversePolicy::default(),
            max_steps: 100,
            energy_tolerance: CHEMICAL_ACCURACY,
            shots: None,
            seed: 0,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self.policy {
            InversePolicy::Regularized { lambda } => lambda,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be >= 1".into()));
        }
        if !(self.energy_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "energy_tolerance must be >= 0".into(),
            ));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        match self.policy {
            InversePolicy::Regularized { lambda } if !(lambda >= 0.0) => Err(
                Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")),
            ),
            InversePolicy::PseudoInverse { rcond } if !(rcond > 0.0) => Err(
                Error::InvalidArgument(format!("rcond must be > 0, got {rcond}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    SingularMetric,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::SingularMetric => "singular_metric",
        })
    }
}

/// Trace of one optimization run. Index 0 is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub params: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// `E_k - E_ground`, present when a ground energy was supplied.
    pub delta_e: Option<Vec<f64>>,
    pub cumulative_estimations: Vec<u64>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.params.len() - 1
    }

    /// First step whose `delta_e` is at or below `threshold`.
    pub fn first_step_below(&self, threshold: f64) -> Option<usize> {
        self.delta_e.as_ref()?.iter().position(|&d| d <= threshold)
    }

    /// Cumulative estimations when `delta_e` first reaches `threshold`.
    pub fn estimations_at(&self, threshold: f64) -> Option<u64> {
        self.first_step_below(threshold)
            .map(|k| self.cumulative_estimations[k])
    }

    /// CSV with columns `step, energy, delta_e, cumulative_estimations, theta_0..`.
    /// Floats carry 17 significant digits; `delta_e` is empty when unknown.
    pub fn to_csv(&self) -> String {
        let m = self.params.first().map_or(0, Vec::len);
        let mut out = String::from("step,energy,delta_e,cumulative_estimations");
        for i in 0..m {
            out.push_str(&format!(",theta_{i}"));
        }
        out.push('\n');
        for k in 0..self.params.len() {
            out.push_str(&format!("{k},{}", format_float(self.energies[k])));
            match &self.delta_e {
                Some(d) => out.push_str(&format!(",{}", format_float(d[k]))),
                None => out.push(','),
            }
            out.push_str(&format!(",{}", self.cumulative_estimations[k]));
            for x in &self.params[k] {
                out.push_str(&format!(",{}", format_float(*x)));
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed 17-significant-digit scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Ingredients of one update: `theta' = theta - eta * metric^{-1} rhs`.
#[derive(Debug, Clone)]
pub struct StepComponents {
    pub gradient: DVector<f64>,
    pub rhs: DVector<f64>,
    pub metric: Option<MetricTensor>,
}

/// Distinct non-identity Pauli strings whose expectations an OP-VQITE step
/// needs besides the Jacobian: every `P_r` plus every `P_r P_s` of a commuting
/// pair (anticommuting pairs cancel in `{P_r, P_s}`).
pub fn op_vqite_extra_paulis(h: &Hamiltonian) -> Vec<PauliTerm> {
    let mut set: Vec<PauliTerm> = Vec::new();
    let mut push = |t: PauliTerm| {
        if !t.is_identity() && !set.contains(&t) {
            set.push(t);
        }
    };
    for (_, p) in h.terms() {
        push(*p);
    }
    for (_, p) in h.terms() {
        for (_, q) in h.terms() {
            if p.commutes_with(q) {
                let (_, product) = pauli_product(p, q).expect("terms share a register");
                push(product);
            }
        }
    }
    set
}

/// Per-step estimation count of each method.
pub fn step_charge(method: Method, m: usize, h: &Hamiltonian) -> u64 {
    let base = jacobian_charge(m, h.len());
    match method {
        Method::Vg | Method::Hqng => base,
        Method::Qng => base + crate::meter::fubini_study_charge(m),
        Method::OpVqite => base + op_vqite_extra_paulis(h).len() as u64,
    }
}

/// Evaluates update rules at given parameters, owning the estimator stream and
/// the cost meter of one run.
pub struct Optimizer<'a> {
    ansatz: &'a Ansatz,
    hamiltonian: &'a Hamiltonian,
    config: OptimizerConfig,
    estimator: ExpectationEstimator,
    meter: CostMeter,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        ansatz: &'a Ansatz,
        hamiltonian: &'a Hamiltonian,
        config: OptimizerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if ansatz.n_qubits() != hamiltonian.n_qubits() {
            return Err(Error::QubitMismatch {
                expected: ansatz.n_qubits(),
                found: hamiltonian.n_qubits(),
            });
        }
        Ok(Optimizer {
            ansatz,
            hamiltonian,
            estimator: ExpectationEstimator::from_options(config.shots, config.seed),
            config,
            meter: CostMeter::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn meter(&self) -> &CostMeter {
        &self.meter
    }

    fn jacobian(&mut self, params: &[f64]) -> Result<TermJacobian> {
        parameter_shift_jacobian(
            self.ansatz,
            self.hamiltonian,
            params,
            &mut self.estimator,
            &mut self.meter,
        )
    }

    /// Gradient, right-hand side and metric of the configured method.
    pub fn components(&mut self, params: &[f64]) -> Result<StepComponents> {
        let h = self.hamiltonian;
        let tj = self.jacobian(params)?;
        let grad = gradient(h, &tj)?;
        let (rhs, metric) = match self.config.method {
            Method::Vg => (grad.clone(), None),
            Method::Qng => {
                let a = fubini_study_metered(
                    self.ansatz,
                    params,
                    &mut self.estimator,
                    &mut self.meter,
                )?;
                (grad.clone(), Some(a))
            }
            Method::Hqng => (grad.clone(), Some(hamiltonian_aware(h, &tj)?)),
            Method::OpVqite => {
                let b = self.op_vqite_rhs(params, &tj)?;
                let g =
                    MetricTensor::new(weighted_pullback(h, &tj)?, MetricKind::HamiltonianAware)?;
                (b, Some(g))
            }
        };
        Ok(StepComponents {
            gradient: grad,
            rhs,
            metric,
        })
    }

    /// `b = sum_r V(rho, a_r P_r) grad tr(rho a_r P_r)` with
    /// `V(rho, O) = tr(rho {O, H}) - 2 tr(rho H) tr(rho O)`.
    fn op_vqite_rhs(&mut self, params: &[f64], tj: &TermJacobian) -> Result<DVector<f64>> {
        let h = self.hamiltonian;
        let state = prepare_state(self.ansatz, params)?;
        let needed = op_vqite_extra_paulis(h);
        let mut values: Vec<(PauliTerm, f64)> = Vec::with_capacity(needed.len());
        for p in &needed {
            let exact = expectation(&state, p)?;
            values.push((*p, self.estimator.estimate(exact)));
        }
        self.meter.charge(needed.len() as u64);
        let lookup = |t: &PauliTerm| -> f64 {
            if t.is_identity() {
                1.0
            } else {
                values
                    .iter()
                    .find(|(p, _)| p == t)
                    .map(|(_, v)| *v)
                    .expect("collected above")
            }
        };
        let energy: f64 = h.terms().iter().map(|(a, p)| a * lookup(p)).sum();
        let mut b = DVector::zeros(tj.n_params());
        for (r, (a_r, p)) in h.terms().iter().enumerate() {
            // tr(rho {P_r, H}) = sum_{s commuting} 2 a_s phase_rs <P_r P_s>
            let mut anticommutator = 0.0;
            for (a_s, q) in h.terms() {
                if p.commutes_with(q) {
                    let (phase, product) = pauli_product(p, q)?;
                    anticommutator += 2.0 * a_s * phase.re * lookup(&product);
                }
            }
            let variance_term = a_r * anticommutator - 2.0 * energy * a_r * lookup(p);
            b += tj.entries.column(r) * (variance_term * a_r);
        }
        Ok(b)
    }

    /// Direction `d` in `theta' = theta - eta d`, plus the gradient.
    pub fn direction(&mut self, params: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let c = self.components(params)?;
        let d = match &c.metric {
            None => c.rhs.clone(),
            Some(t) => natural_direction(t, &c.rhs, self.config.policy)?,
        };
        Ok((d, c.gradient))
    }

    /// One update of the configured method.
    pub fn step(&mut self, params: &[f64]) -> Result<Vec<f64>> {
        let (d, _) = self.direction(params)?;
        Ok(apply_update(params, &d, self.config.eta))
    }
}

fn apply_update(params: &[f64], d: &DVector<f64>, eta: f64) -> Vec<f64> {
    params
        .iter()
        .zip(d.iter())
        .map(|(p, di)| p - eta * di)
        .collect()
}

fn single_step(
    method: Method,
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let config = OptimizerConfig {
        method,
        ..config.clone()
    };
    Optimizer::new(ansatz, h, config)?.step(params)
}

/// `theta - eta grad f`.
pub fn vg_step(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    single_step(Method::Vg, ansatz, h, params, config)
}

/// `theta - eta A^{-1} grad f`.
pub fn qng_step(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    single_step(Method::Qng, ansatz, h, params, config)
}

/// `theta - eta T^{-1} grad f`.
pub fn hqng_step(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    single_step(Method::Hqng, ansatz, h, params, config)
}

/// `theta - eta G^{-1} b` with operator set `{a_r P_r}`.
pub fn op_vqite_step(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    params: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    single_step(Method::OpVqite, ansatz, h, params, config)
}

/// Smooth change of coordinates `theta = t(psi)`.
pub trait Reparameterization: Send + Sync {
    fn name(&self) -> &str;
    fn to_theta(&self, psi: &[f64]) -> Vec<f64>;
    fn to_psi(&self, theta: &[f64]) -> Vec<f64>;
    /// `d theta_i / d psi_j`.
    fn jacobian(&self, psi: &[f64]) -> DMatrix<f64>;
}

/// `theta = M psi`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub name: String,
    pub matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(name: impl Into<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let inverse = matrix.clone().try_inverse().ok_or_else(|| {
            Error::InvalidArgument("reparameterization matrix is singular".into())
        })?;
        Ok(LinearMap {
            name: name.into(),
            matrix,
            inverse,
        })
    }

    pub fn diagonal(name: impl Into<String>, scales: &[f64]) -> Result<Self> {
        Self::new(
            name,
            DMatrix::from_diagonal(&DVector::from_column_slice(scales)),
        )
    }
}

impl Reparameterization for LinearMap {
    fn name(&self) -> &str {
        &self.name
    }

    fn to_theta(&self, psi: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(psi))
            .iter()
            .copied()
            .collect()
    }

    fn to_psi(&self, theta: &[f64]) -> Vec<f64> {
        (&self.inverse * DVector::from_column_slice(theta))
            .iter()
            .copied()
            .collect()
    }

    fn jacobian(&self, _psi: &[f64]) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Elementwise `theta_i = 2 arctan(k tan(psi_i / 2))`, continued smoothly
/// through `psi = +-pi` as `2 atan2(k sin(psi/2), cos(psi/2))`.
#[derive(Debug, Clone)]
pub struct HalfAngleTangentMap {
    pub name: String,
    pub k: f64,
}

impl Reparameterization for HalfAngleTangentMap {
    fn name(&self) -> &str {
        &self.name
    }

    fn to_theta(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter()
            .map(|&p| {
                let (r, offset) = reduce_angle(p);
                2.0 * (self.k * (r / 2.0).sin()).atan2((r / 2.0).cos()) + offset
            })
            .collect()
    }

    fn to_psi(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .map(|&t| {
                let (r, offset) = reduce_angle(t);
                2.0 * (r / 2.0).sin().atan2(self.k * (r / 2.0).cos()) + offset
            })
            .collect()
    }

    fn jacobian(&self, psi: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        let diag: Vec<f64> = psi
            .iter()
            .map(|&p| {
                let (s, c) = (p / 2.0).sin_cos();
                k / (c * c + k * k * s * s)
            })
            .collect();
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    }
}

/// Splits `x` into `r` in `[-pi, pi]` and a multiple of `2 pi`. Both half-angle
/// maps fix `+-pi`, so they stay continuous across the split.
fn reduce_angle(x: f64) -> (f64, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let offset = two_pi * (x / two_pi).round();
    (x - offset, offset)
}

/// Two diagonal rescalings and one nonlinear half-angle map of the plane, used
/// by the reparameterization-invariance experiment.
pub fn coordinate_maps() -> Vec<Box<dyn Reparameterization>> {
    vec![
        Box::new(LinearMap::diagonal("t1", &[0.8, 1.2]).expect("invertible")),
        Box::new(LinearMap::diagonal("t2", &[1.2, 0.8]).expect("invertible")),
        Box::new(HalfAngleTangentMap {
            name: "t3".into(),
            k: 2.0,
        }),
    ]
}

/// Optimizes from `initial_params` and records the trace.
///
/// Stops when `delta_e <= energy_tolerance` (only if `ground_energy` is given),
/// when the gradient norm drops below [`STATIONARY_GRADIENT`], when a metric
/// cannot be inverted under `ExactSolve`, or after `max_steps`.
pub fn run(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    config: &OptimizerConfig,
    initial_params: &[f64],
    ground_energy: Option<f64>,
) -> Result<RunRecord> {
    drive(ansatz, h, config, initial_params, ground_energy, None)
}

/// Runs in `psi` coordinates with `theta = map(psi)`, starting from the `psi`
/// that maps to `initial_theta`. Gradients and metrics are pulled back through
/// the map's Jacobian; the recorded parameters are in `theta` space.
pub fn run_reparameterized(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    config: &OptimizerConfig,
    map: &dyn Reparameterization,
    initial_theta: &[f64],
    ground_energy: Option<f64>,
) -> Result<RunRecord> {
    drive(ansatz, h, config, initial_theta, ground_energy, Some(map))
}

fn drive(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    config: &OptimizerConfig,
    initial_theta: &[f64],
    ground_energy: Option<f64>,
    map: Option<&dyn Reparameterization>,
) -> Result<RunRecord> {
    if initial_theta.len() != ansatz.n_params() {
        return Err(Error::DimensionMismatch {
            expected: ansatz.n_params(),
            found: initial_theta.len(),
        });
    }
    let mut opt = Optimizer::new(ansatz, h, config.clone())?;
    let mut coords = match map {
        Some(t) => t.to_psi(initial_theta),
        None => initial_theta.to_vec(),
    };
    let theta_of = |c: &[f64]| match map {
        Some(t) => t.to_theta(c),
        None => c.to_vec(),
    };

    let mut theta = theta_of(&coords);
    let e0 = energy(ansatz, h, &theta)?;
    let mut record = RunRecord {
        params: vec![theta.clone()],
        energies: vec![e0],
        delta_e: ground_energy.map(|g| vec![e0 - g]),
        cumulative_estimations: vec![0],
        status: RunStatus::BudgetExhausted,
    };
    let reached = |rec: &RunRecord| {
        rec.delta_e
            .as_ref()
            .and_then(|d| d.last())
            .is_some_and(|&d| d <= config.energy_tolerance)
    };
    if reached(&record) {
        record.status = RunStatus::Converged;
        return Ok(record);
    }

    for _ in 0..config.max_steps {
        let components = match opt.components(&theta) {
            Ok(c) => c,
            Err(Error::SingularMetric { .. }) => {
                record.status = RunStatus::SingularMetric;
                return Ok(record);
            }
            Err(e) => return Err(e),
        };
        if components.gradient.norm() < STATIONARY_GRADIENT {
            record.status = RunStatus::Converged;
            return Ok(record);
        }
        let (rhs, metric) = match map {
            None => (components.rhs, components.metric),
            Some(t) => {
                let jac = t.jacobian(&coords);
                let rhs = jac.transpose() * &components.rhs;
                let metric = match components.metric {
                    Some(m) => Some(MetricTensor::new(
                        jac.transpose() * &m.entries * &jac,
                        m.kind,
                    )?),
                    None => None,
                };
                (rhs, metric)
            }
        };
        let d = match &metric {
            None => rhs,
            Some(t) => match natural_direction(t, &rhs, config.policy) {
                Ok(d) => d,
                Err(Error::SingularMetric { .. }) => {
                    record.status = RunStatus::SingularMetric;
                    return Ok(record);
                }
                Err(e) => return Err(e),
            },
        };
        coords = apply_update(&coords, &d, config.eta);
        theta = theta_of(&coords);
        let e = energy(ansatz, h, &theta)?;
        record.params.push(theta.clone());
        record.energies.push(e);
        if let (Some(d), Some(g)) = (record.delta_e.as_mut(), ground_energy) {
            d.push(e - g);
        }
        record.cumulative_estimations.push(opt.meter().total());
        if reached(&record) {
            record.status = RunStatus::Converged;
            return Ok(record);
        }
    }
    Ok(record)
}

/// Explicit-Euler integration of `theta' = -M^{-1} grad f` up to `t_end`; the
/// same as [`run`] with `eta = dt` and `round(t_end / dt)` steps.
pub fn continuous_trajectory(
    ansatz: &Ansatz,
    h: &Hamiltonian,
    method: Method,
    policy: InversePolicy,
    initial_params: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}"
        )));
    }
    if !matches!(method, Method::Qng | Method::Hqng) {
        return Err(Error::InvalidArgument(format!(
            "continuous trajectories are defined for qng and hqng, not {method}"
        )));
    }
    let config = OptimizerConfig {
        method,
        eta: dt,
        policy,
        max_steps: (t_end / dt).round() as usize,
        energy_tolerance: 0.0,
        shots: None,
        seed: 0,
    };
    Ok(run(ansatz, h, &config, initial_params, None)?.params)
}
