//! Exact pure-state simulation of parameterized circuits.
//!
//! Amplitude index bit `n - 1 - q` belongs to qubit `q` (qubit 0 is the most
//! significant bit), matching [`crate::pauli`].

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliTerm, MAX_QUBITS};

/// Largest register the simulator will allocate.
pub const SIM_QUBIT_LIMIT: usize = 24;

const NORM_TOLERANCE: f64 = 1e-10;
const IMAG_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

impl StateVector {
    /// The all-zeros computational basis state.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
            normalized: true,
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Ok(StateVector {
            n_qubits,
            amplitudes,
            normalized: (norm_sqr - 1.0).abs() < NORM_TOLERANCE,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// False for derivative vectors and other non-physical outputs.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other.n_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `<self|P|other>`.
    pub fn matrix_element(&self, p: &PauliTerm, other: &StateVector) -> Result<Complex64> {
        self.check_dim(p.n_qubits())?;
        self.check_dim(other.n_qubits)?;
        let x = p.x_mask() as usize;
        Ok((0..other.dim())
            .map(|b| self.amplitudes[b ^ x].conj() * p.phase_on(b) * other.amplitudes[b])
            .sum())
    }

    /// `P|self>`.
    pub fn apply_pauli(&self, p: &PauliTerm) -> Result<StateVector> {
        self.check_dim(p.n_qubits())?;
        let mut out = self.clone();
        apply_pauli_in_place(&self.amplitudes, &mut out.amplitudes, p);
        Ok(out)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::QubitMismatch {
                expected: self.n_qubits,
                found: n,
            });
        }
        Ok(())
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }
}

fn check_register(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "register must have at least one qubit".into(),
        ));
    }
    if n > SIM_QUBIT_LIMIT.min(MAX_QUBITS) {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: n,
            limit: SIM_QUBIT_LIMIT,
        });
    }
    Ok(())
}

fn apply_pauli_in_place(src: &[Complex64], dst: &mut [Complex64], p: &PauliTerm) {
    let x = p.x_mask() as usize;
    for (b, amp) in src.iter().enumerate() {
        dst[b ^ x] = p.phase_on(b) * amp;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// `exp(-i theta P / 2)` with `theta = params[param]`.
    Rotation {
        axis: PauliTerm,
        param: usize,
    },
    Hadamard(usize),
    PauliX(usize),
    PauliY(usize),
    PauliZ(usize),
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn rotation(n_qubits: usize, letters: &[(usize, Pauli)], param: usize) -> Result<Gate> {
        let mut axis = vec![Pauli::I; n_qubits];
        for &(q, p) in letters {
            if q >= n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    bound: n_qubits,
                });
            }
            axis[q] = p;
        }
        let axis = PauliTerm::from_letters(&axis)?;
        if axis.is_identity() {
            return Err(Error::InvalidGate("rotation axis is the identity".into()));
        }
        Ok(Gate::Rotation { axis, param })
    }

    pub fn param(&self) -> Option<usize> {
        match self {
            Gate::Rotation { param, .. } => Some(*param),
            _ => None,
        }
    }

    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rotation { axis, .. } => (0..axis.n_qubits())
                .filter(|&q| axis.letter(q) != Pauli::I)
                .collect(),
            Gate::Hadamard(q) | Gate::PauliX(q) | Gate::PauliY(q) | Gate::PauliZ(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if let Gate::Rotation { axis, .. } = self {
            if axis.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch {
                    expected: n_qubits,
                    found: axis.n_qubits(),
                });
            }
        }
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    bound: n_qubits,
                });
            }
        }
        if let Gate::Cnot { control, target } = self {
            if control == target {
                return Err(Error::InvalidGate(format!(
                    "CNOT control and target are both q{control}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Rotation { axis, param } => {
                write!(f, "R")?;
                let support: Vec<usize> = self.qubits();
                for &q in &support {
                    write!(f, "{}", axis.letter(q).as_char())?;
                }
                for q in support {
                    write!(f, " q{q}")?;
                }
                write!(f, " p{param}")
            }
            Gate::Hadamard(q) => write!(f, "H q{q}"),
            Gate::PauliX(q) => write!(f, "X q{q}"),
            Gate::PauliY(q) => write!(f, "Y q{q}"),
            Gate::PauliZ(q) => write!(f, "Z q{q}"),
            Gate::Cnot { control, target } => write!(f, "CNOT q{control} q{target}"),
        }
    }
}

/// Applies one gate in place.
fn apply_in_place(state: &mut StateVector, gate: &Gate, params: &[f64]) -> Result<()> {
    gate.validate(state.n_qubits)?;
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    match gate {
        Gate::Rotation { axis, param } => {
            let theta = *params.get(*param).ok_or(Error::IndexOutOfRange {
                index: *param,
                bound: params.len(),
            })?;
            let (sin, cos) = (theta / 2.0).sin_cos();
            let rotated = state.apply_pauli(axis)?;
            let minus_i_sin = Complex64::new(0.0, -sin);
            for (a, pa) in state.amplitudes.iter_mut().zip(&rotated.amplitudes) {
                *a = *a * cos + minus_i_sin * pa;
            }
        }
        Gate::Hadamard(q) => {
            let bit = state.bit(*q);
            for b in 0..state.dim() {
                if b & bit == 0 {
                    let (a0, a1) = (state.amplitudes[b], state.amplitudes[b | bit]);
                    state.amplitudes[b] = (a0 + a1) * s2;
                    state.amplitudes[b | bit] = (a0 - a1) * s2;
                }
            }
        }
        Gate::PauliX(q) | Gate::PauliY(q) | Gate::PauliZ(q) => {
            let letter = match gate {
                Gate::PauliX(_) => Pauli::X,
                Gate::PauliY(_) => Pauli::Y,
                _ => Pauli::Z,
            };
            let p = PauliTerm::single(state.n_qubits, *q, letter)?;
            *state = StateVector {
                normalized: state.normalized,
                ..state.apply_pauli(&p)?
            };
        }
        Gate::Cnot { control, target } => {
            let (cbit, tbit) = (state.bit(*control), state.bit(*target));
            for b in 0..state.dim() {
                if b & cbit != 0 && b & tbit == 0 {
                    state.amplitudes.swap(b, b | tbit);
                }
            }
        }
    }
    Ok(())
}

/// Returns `gate` applied to `state`.
pub fn apply_gate(state: &StateVector, gate: &Gate, params: &[f64]) -> Result<StateVector> {
    let mut out = state.clone();
    apply_in_place(&mut out, gate, params)?;
    Ok(out)
}

/// Ordered gate list defining `theta -> |phi(theta)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    /// `param_gate[k]` is the index of the gate driven by parameter `k`.
    param_gate: Vec<usize>,
}

impl Ansatz {
    /// Validates that parameters are exactly `0..m`, each driving one gate.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        check_register(n_qubits)?;
        let mut owner: Vec<Option<usize>> = Vec::new();
        for (g_idx, gate) in gates.iter().enumerate() {
            gate.validate(n_qubits)?;
            if let Some(p) = gate.param() {
                if p >= owner.len() {
                    owner.resize(p + 1, None);
                }
                if owner[p].is_some() {
                    return Err(Error::SharedParameter(p));
                }
                owner[p] = Some(g_idx);
            }
        }
        let param_gate = owner
            .iter()
            .enumerate()
            .map(|(k, g)| {
                g.ok_or_else(|| Error::InvalidArgument(format!("parameter p{k} is never used")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ansatz {
            n_qubits,
            n_params: param_gate.len(),
            gates,
            param_gate,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of parameters `m`.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Generator Pauli string of parameter `k`.
    pub fn generator(&self, k: usize) -> Option<&PauliTerm> {
        match self.gates.get(*self.param_gate.get(k)?)? {
            Gate::Rotation { axis, .. } => Some(axis),
            _ => None,
        }
    }

    /// Parses the line-oriented ansatz format:
    ///
    /// ```text
    /// qubits 2
    /// RY q0 p0
    /// CNOT q0 q1
    /// RXX q0 q1 p1
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_qubits: Option<usize> = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(n) = n_qubits else {
                if fields.len() != 2 || fields[0] != "qubits" {
                    return Err(Error::parse(line_no, "expected header 'qubits <n>'"));
                }
                let n: usize = fields[1].parse().map_err(|_| {
                    Error::parse(line_no, format!("invalid qubit count '{}'", fields[1]))
                })?;
                check_register(n).map_err(|e| Error::parse(line_no, e.to_string()))?;
                n_qubits = Some(n);
                continue;
            };
            let gate = parse_gate(n, &fields).map_err(|e| match e {
                Error::Parse { .. } => e,
                other => Error::parse(line_no, other.to_string()),
            })?;
            gates.push(gate);
        }
        let n = n_qubits.ok_or(Error::EmptyInput)?;
        Self::new(n, gates)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&format!("{g}\n"));
        }
        out
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                found: params.len(),
            });
        }
        Ok(())
    }
}

fn parse_qubit(token: &str) -> Result<usize> {
    token
        .strip_prefix('q')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidGate(format!("expected qubit 'q<k>', got '{token}'")))
}

fn parse_param(token: &str) -> Result<usize> {
    token
        .strip_prefix('p')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidGate(format!("expected parameter 'p<k>', got '{token}'")))
}

fn parse_gate(n_qubits: usize, fields: &[&str]) -> Result<Gate> {
    let name = fields[0];
    let args = &fields[1..];
    let arity = |k: usize| -> Result<()> {
        if args.len() != k {
            return Err(Error::InvalidGate(format!(
                "{name} takes {k} operands, got {}",
                args.len()
            )));
        }
        Ok(())
    };
    let gate = match name {
        "H" | "X" | "Y" | "Z" => {
            arity(1)?;
            let q = parse_qubit(args[0])?;
            match name {
                "H" => Gate::Hadamard(q),
                "X" => Gate::PauliX(q),
                "Y" => Gate::PauliY(q),
                _ => Gate::PauliZ(q),
            }
        }
        "CNOT" => {
            arity(2)?;
            Gate::Cnot {
                control: parse_qubit(args[0])?,
                target: parse_qubit(args[1])?,
            }
        }
        _ if name.len() >= 2 && name.starts_with('R') => {
            let letters = name[1..]
                .chars()
                .map(|c| match Pauli::from_char(c) {
                    Some(Pauli::I) | None => {
                        Err(Error::InvalidGate(format!("unknown gate '{name}'")))
                    }
                    Some(p) => Ok(p),
                })
                .collect::<Result<Vec<_>>>()?;
            arity(letters.len() + 1)?;
            let mut support = Vec::with_capacity(letters.len());
            for (tok, &p) in args.iter().zip(&letters) {
                let q = parse_qubit(tok)?;
                if support.iter().any(|&(s, _)| s == q) {
                    return Err(Error::InvalidGate(format!("{name} repeats qubit q{q}")));
                }
                support.push((q, p));
            }
            let param = parse_param(args[letters.len()])?;
            Gate::rotation(n_qubits, &support, param)?
        }
        _ => return Err(Error::InvalidGate(format!("unknown gate '{name}'"))),
    };
    gate.validate(n_qubits)?;
    Ok(gate)
}

/// Runs the ansatz on `|0...0>`.
pub fn prepare_state(ansatz: &Ansatz, params: &[f64]) -> Result<StateVector> {
    ansatz.check_params(params)?;
    let mut state = StateVector::zero(ansatz.n_qubits)?;
    for g in &ansatz.gates {
        apply_in_place(&mut state, g, params)?;
    }
    Ok(state)
}

/// `<phi|P|phi>` for a normalized state.
pub fn expectation(state: &StateVector, p: &PauliTerm) -> Result<f64> {
    if p.is_identity() && p.n_qubits() == state.n_qubits {
        return Ok(1.0);
    }
    let value = state.matrix_element(p, state)?;
    if value.im.abs() >= IMAG_TOLERANCE {
        return Err(Error::Numerical(format!(
            "expectation of Hermitian {p} has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Exact tangent vectors `|d_k phi>` for every parameter `k`.
///
/// The derivative of `exp(-i theta P/2)` is `(-i P/2) exp(-i theta P/2)`, so each
/// tangent is the forward state with that factor inserted after its gate.
pub fn derivative_states(ansatz: &Ansatz, params: &[f64]) -> Result<Vec<StateVector>> {
    ansatz.check_params(params)?;
    let mut state = StateVector::zero(ansatz.n_qubits)?;
    let mut branches: Vec<(usize, StateVector)> = Vec::with_capacity(ansatz.n_params);
    let minus_half_i = Complex64::new(0.0, -0.5);
    for g in &ansatz.gates {
        apply_in_place(&mut state, g, params)?;
        for (_, b) in branches.iter_mut() {
            apply_in_place(b, g, params)?;
        }
        if let Gate::Rotation { axis, param } = g {
            let mut tangent = state.apply_pauli(axis)?;
            for a in tangent.amplitudes.iter_mut() {
                *a *= minus_half_i;
            }
            tangent.normalized = false;
            branches.push((*param, tangent));
        }
    }
    branches.sort_by_key(|(k, _)| *k);
    Ok(branches.into_iter().map(|(_, s)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::pauli_matrix;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn ry(param: usize) -> Gate {
        Gate::rotation(1, &[(0, Pauli::Y)], param).unwrap()
    }

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn x_flips_zero() {
        let s = apply_gate(&StateVector::zero(1).unwrap(), &Gate::PauliX(0), &[]).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 1.0, 0.0));
    }

    #[test]
    fn ry_quarter_turn() {
        let s = apply_gate(&StateVector::zero(1).unwrap(), &ry(0), &[FRAC_PI_2]).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn cnot_with_control_off_is_identity() {
        let zero = StateVector::zero(2).unwrap();
        let s = apply_gate(
            &zero,
            &Gate::Cnot {
                control: 0,
                target: 1,
            },
            &[],
        )
        .unwrap();
        assert_eq!(s, zero);
    }

    #[test]
    fn gate_errors() {
        let zero = StateVector::zero(2).unwrap();
        assert!(matches!(
            apply_gate(&zero, &Gate::Hadamard(2), &[]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            apply_gate(
                &zero,
                &Gate::Cnot {
                    control: 1,
                    target: 1
                },
                &[]
            ),
            Err(Error::InvalidGate(_))
        ));
        let rot = Gate::rotation(2, &[(1, Pauli::X)], 3).unwrap();
        assert!(matches!(
            apply_gate(&zero, &rot, &[0.1]),
            Err(Error::IndexOutOfRange { index: 3, bound: 1 })
        ));
    }

    #[test]
    fn prepare_cases() {
        let empty = Ansatz::new(3, vec![]).unwrap();
        assert_eq!(
            prepare_state(&empty, &[]).unwrap(),
            StateVector::zero(3).unwrap()
        );

        let a = Ansatz::new(1, vec![ry(0)]).unwrap();
        let theta = 0.7;
        let s = prepare_state(&a, &[theta]).unwrap();
        assert!(close(s.amplitudes()[0], (theta / 2.0).cos(), 0.0));
        assert!(close(s.amplitudes()[1], (theta / 2.0).sin(), 0.0));
        assert!(matches!(
            prepare_state(&a, &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_rotations_leave_fixed_gates() {
        let text = "qubits 2\nRY q0 p0\nCNOT q0 q1\nH q1\nRX q1 p1\n";
        let a = Ansatz::parse(text).unwrap();
        let fixed = Ansatz::parse("qubits 2\nCNOT q0 q1\nH q1\n").unwrap();
        let s = prepare_state(&a, &[0.0, 0.0]).unwrap();
        let t = prepare_state(&fixed, &[]).unwrap();
        for (x, y) in s.amplitudes().iter().zip(t.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn expectation_cases() {
        let zero = StateVector::zero(1).unwrap();
        let z: PauliTerm = "Z".parse().unwrap();
        let x: PauliTerm = "X".parse().unwrap();
        assert_eq!(expectation(&zero, &z).unwrap(), 1.0);
        assert_eq!(expectation(&zero, &x).unwrap(), 0.0);
        let plus = apply_gate(&zero, &ry(0), &[FRAC_PI_2]).unwrap();
        assert!((expectation(&plus, &x).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(expectation(&plus, &"I".parse().unwrap()).unwrap(), 1.0);
        assert!(matches!(
            expectation(&plus, &"XX".parse().unwrap()),
            Err(Error::QubitMismatch { .. })
        ));
    }

    #[test]
    fn ry_derivative_state() {
        let a = Ansatz::new(1, vec![ry(0)]).unwrap();
        let theta = 1.1;
        let d = derivative_states(&a, &[theta]).unwrap();
        assert_eq!(d.len(), 1);
        assert!(!d[0].is_normalized());
        assert!(close(d[0].amplitudes()[0], -(theta / 2.0).sin() / 2.0, 0.0));
        assert!(close(d[0].amplitudes()[1], (theta / 2.0).cos() / 2.0, 0.0));
        assert!(derivative_states(&Ansatz::new(2, vec![]).unwrap(), &[])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parse_format_and_errors() {
        let a = Ansatz::parse(
            "# demo\nqubits 3\nRY q0 p1\nRXZ q1 q2 p0 # comment\nCNOT q0 q2\nH q1\nZ q2\n",
        )
        .unwrap();
        assert_eq!(a.n_params(), 2);
        assert_eq!(a.generator(0).unwrap().to_string(), "IXZ");
        assert_eq!(Ansatz::parse(&a.to_text()).unwrap(), a);

        let bad = [
            ("RY q0 p0", 1),
            ("qubits 2\nRY q0 p0\nRY q1 p0", 3),
            ("qubits 2\nRQ q0 p0", 2),
            ("qubits 2\nCNOT q0 q0", 2),
            ("qubits 2\nRY q2 p0", 2),
            ("qubits 2\nRXX q0 p0", 2),
        ];
        for (text, line) in bad {
            match Ansatz::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                Err(Error::SharedParameter(_)) if line == 3 => {}
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
        assert!(Ansatz::parse("qubits 1\nRY q0 p1\n").is_err());
    }

    fn dense_gate(n: usize, gate: &Gate, params: &[f64]) -> DMatrix<Complex64> {
        let dim = 1 << n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[col] = Complex64::new(1.0, 0.0);
            let s = apply_gate(&StateVector::from_amplitudes(amps).unwrap(), gate, params).unwrap();
            for row in 0..dim {
                m[(row, col)] = s.amplitudes()[row];
            }
        }
        m
    }

    fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate {
        let q = rng.random_range(0..n);
        match rng.random_range(0..7) {
            0 => Gate::Hadamard(q),
            1 => Gate::PauliX(q),
            2 => Gate::PauliY(q),
            3 => Gate::PauliZ(q),
            4 if n > 1 => {
                let t = (q + rng.random_range(1..n)) % n;
                Gate::Cnot {
                    control: q,
                    target: t,
                }
            }
            _ => loop {
                let letters: Vec<(usize, Pauli)> = (0..n)
                    .map(|k| (k, Pauli::ALL[rng.random_range(0..4)]))
                    .collect();
                if let Ok(g) = Gate::rotation(n, &letters, 0) {
                    break g;
                }
            },
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn gates_agree_with_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..1000 {
            let n = 1 + case % 3;
            let gate = random_gate(&mut rng, n);
            let theta = rng.random_range(-PI..PI);
            let state = random_state(&mut rng, n);
            let out = apply_gate(&state, &gate, &[theta]).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-12);

            // Reference: rotations from cos I - i sin P, fixed gates from textbook matrices.
            let reference = match &gate {
                Gate::Rotation { axis, .. } => {
                    let p = pauli_matrix(axis).unwrap();
                    let id = DMatrix::<Complex64>::identity(1 << n, 1 << n);
                    id * Complex64::new((theta / 2.0).cos(), 0.0)
                        - p * Complex64::new(0.0, (theta / 2.0).sin())
                }
                Gate::Cnot { control, target } => {
                    let dim = 1 << n;
                    let mut m = DMatrix::zeros(dim, dim);
                    for b in 0..dim {
                        let cbit = b >> (n - 1 - control) & 1;
                        let out = if cbit == 1 {
                            b ^ (1 << (n - 1 - target))
                        } else {
                            b
                        };
                        m[(out, b)] = Complex64::new(1.0, 0.0);
                    }
                    m
                }
                Gate::Hadamard(q) => {
                    let x = pauli_matrix(&PauliTerm::single(n, *q, Pauli::X).unwrap()).unwrap();
                    let z = pauli_matrix(&PauliTerm::single(n, *q, Pauli::Z).unwrap()).unwrap();
                    (x + z) * Complex64::new(FRAC_1_SQRT_2, 0.0)
                }
                other => dense_gate(n, other, &[theta]),
            };
            let v = DVector::from_column_slice(state.amplitudes());
            let want = reference * v;
            for (a, b) in out.amplitudes().iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-12, "{gate}");
            }
        }
    }

    #[test]
    fn derivative_states_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 3;
            let mut gates = Vec::new();
            let mut m = 0;
            for _ in 0..12 {
                let mut g = random_gate(&mut rng, n);
                if let Gate::Rotation { param, .. } = &mut g {
                    *param = m;
                    m += 1;
                }
                gates.push(g);
            }
            let a = Ansatz::new(n, gates).unwrap();
            let params: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
            let d = derivative_states(&a, &params).unwrap();
            let h = 1e-5;
            for k in 0..m {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[k] += h;
                minus[k] -= h;
                let sp = prepare_state(&a, &plus).unwrap();
                let sm = prepare_state(&a, &minus).unwrap();
                for idx in 0..sp.dim() {
                    let fd = (sp.amplitudes()[idx] - sm.amplitudes()[idx]) / (2.0 * h);
                    assert!((fd - d[k].amplitudes()[idx]).norm() < 1e-6);
                }
            }
        }
    }
}
