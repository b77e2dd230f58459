//! Pauli strings and Pauli-sum Hamiltonians.
//!
//! A [`PauliTerm`] is stored as a pair of bit masks in the symplectic form
//! `P = i^{#Y} X^x Z^z`. Qubit 0 is the leftmost letter and maps to the most
//! significant bit of a statevector index, so for an `n`-qubit term qubit `q`
//! lives at bit `n - 1 - q`. Every module in the crate uses that convention.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register for which dense matrices are built.
pub const DENSE_QUBIT_LIMIT: usize = 12;
/// Largest register for which the full 4^n Pauli basis is enumerated.
pub const BASIS_QUBIT_LIMIT: usize = 6;
/// Largest register a [`PauliTerm`] can describe.
pub const MAX_QUBITS: usize = 63;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// An n-qubit Pauli string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliTerm {
    pub fn identity(n_qubits: usize) -> Self {
        PauliTerm {
            n_qubits,
            x: 0,
            z: 0,
        }
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let n = letters.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "Pauli string must be non-empty".into(),
            ));
        }
        if n > MAX_QUBITS {
            return Err(Error::SizeGuard {
                what: "n_qubits",
                value: n,
                limit: MAX_QUBITS,
            });
        }
        let mut term = PauliTerm::identity(n);
        for (q, &p) in letters.iter().enumerate() {
            let (xb, zb) = p.bits();
            let bit = 1u64 << (n - 1 - q);
            if xb {
                term.x |= bit;
            }
            if zb {
                term.z |= bit;
            }
        }
        Ok(term)
    }

    /// Term acting as `p` on `qubit` and as identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n_qubits {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                bound: n_qubits,
            });
        }
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        Self::from_letters(&letters)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Bit mask of qubits carrying X or Y.
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    /// Bit mask of qubits carrying Z or Y.
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        let bit = 1u64 << (self.n_qubits - 1 - qubit);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }

    /// Phase picked up by basis state `b`: `P|b> = phase(b) |b ^ x_mask>`.
    #[inline]
    pub fn phase_on(&self, basis: usize) -> Complex64 {
        let sign_flips = ((basis as u64) & self.z).count_ones();
        i_power(self.y_count() + 2 * sign_flips)
    }

    pub fn commutes_with(&self, other: &PauliTerm) -> bool {
        let overlap = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        overlap.is_multiple_of(2)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PauliTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("invalid Pauli letter '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliTerm::from_letters(&letters)
    }
}

/// `i^power` for `power` in 0..4.
#[inline]
pub(crate) fn i_power(power: u32) -> Complex64 {
    match power % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Product of two Pauli strings, `p * q = phase * term`.
pub fn pauli_product(p: &PauliTerm, q: &PauliTerm) -> Result<(Complex64, PauliTerm)> {
    if p.n_qubits != q.n_qubits {
        return Err(Error::QubitMismatch {
            expected: p.n_qubits,
            found: q.n_qubits,
        });
    }
    let term = PauliTerm {
        n_qubits: p.n_qubits,
        x: p.x ^ q.x,
        z: p.z ^ q.z,
    };
    // i^{yP} X^a Z^b i^{yQ} X^c Z^d = i^{yP+yQ} (-1)^{|b&c|} X^{a^c} Z^{b^d}
    // and X^{a^c} Z^{b^d} = i^{-yR} R.
    let power = p.y_count() + q.y_count() + 2 * (p.z & q.x).count_ones() + (4 - term.y_count() % 4);
    Ok((i_power(power), term))
}

/// All 4^n Pauli strings, ordered lexicographically with I < X < Y < Z per qubit.
pub fn full_pauli_basis(n: usize) -> Result<Vec<PauliTerm>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if n > BASIS_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: n,
            limit: BASIS_QUBIT_LIMIT,
        });
    }
    let count = 1usize << (2 * n);
    let mut out = Vec::with_capacity(count);
    let mut letters = vec![Pauli::I; n];
    for index in 0..count {
        for (q, letter) in letters.iter_mut().enumerate() {
            let digit = (index >> (2 * (n - 1 - q))) & 3;
            *letter = Pauli::ALL[digit];
        }
        out.push(PauliTerm::from_letters(&letters)?);
    }
    Ok(out)
}

/// Weighted sum of Pauli strings `H = sum_r a_r P_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<(f64, PauliTerm)>,
}

impl Hamiltonian {
    /// Builds a Hamiltonian, merging duplicate strings (first occurrence keeps its
    /// position) and dropping terms whose merged coefficient is exactly zero.
    pub fn new(terms: Vec<(f64, PauliTerm)>) -> Result<Self> {
        let n_qubits = terms
            .first()
            .map(|(_, t)| t.n_qubits())
            .ok_or(Error::EmptyInput)?;
        let mut order: Vec<PauliTerm> = Vec::new();
        let mut sums: HashMap<PauliTerm, f64> = HashMap::new();
        for (coeff, term) in terms {
            if term.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch {
                    expected: n_qubits,
                    found: term.n_qubits(),
                });
            }
            if !coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient for {term}"
                )));
            }
            match sums.get_mut(&term) {
                Some(sum) => *sum += coeff,
                None => {
                    order.push(term);
                    sums.insert(term, coeff);
                }
            }
        }
        let terms: Vec<_> = order
            .into_iter()
            .map(|t| (sums[&t], t))
            .filter(|(c, _)| *c != 0.0)
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "all coefficients cancel; Hamiltonian has no terms".into(),
            ));
        }
        Ok(Hamiltonian { n_qubits, terms })
    }

    /// Unit-coefficient sum over the full 4^n Pauli basis.
    pub fn full_basis(n: usize) -> Result<Self> {
        Self::new(full_pauli_basis(n)?.into_iter().map(|t| (1.0, t)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliTerm)] {
        &self.terms
    }

    /// Number of terms `v`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|(c, _)| *c).collect()
    }

    pub fn paulis(&self) -> Vec<PauliTerm> {
        self.terms.iter().map(|(_, t)| *t).collect()
    }

    /// Euclidean norm of the coefficient vector, `sqrt(sum_r a_r^2)`.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.terms.iter().map(|(c, t)| (c * factor, *t)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let coeff_text = fields.next().unwrap_or_default();
            let letters_text = fields
                .next()
                .ok_or_else(|| Error::parse(line_no, "expected '<coefficient> <letters>'"))?;
            if fields.next().is_some() {
                return Err(Error::parse(line_no, "trailing fields after letter string"));
            }
            let coeff: f64 = coeff_text.parse().map_err(|_| {
                Error::parse(line_no, format!("malformed coefficient '{coeff_text}'"))
            })?;
            if !coeff.is_finite() {
                return Err(Error::parse(
                    line_no,
                    format!("non-finite coefficient '{coeff_text}'"),
                ));
            }
            let mut letters = Vec::with_capacity(letters_text.len());
            for c in letters_text.chars() {
                letters.push(
                    Pauli::from_char(c).ok_or_else(|| {
                        Error::parse(line_no, format!("invalid Pauli letter '{c}'"))
                    })?,
                );
            }
            match width {
                None => width = Some(letters.len()),
                Some(w) if w != letters.len() => {
                    return Err(Error::parse(
                        line_no,
                        format!("letter string has length {}, expected {w}", letters.len()),
                    ))
                }
                _ => {}
            }
            let term = PauliTerm::from_letters(&letters)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            terms.push((coeff, term));
        }
        if terms.is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::new(terms)
    }

    /// Serializes in the same line format [`Hamiltonian::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, t) in &self.terms {
            out.push_str(&format!("{c:?} {t}\n"));
        }
        out
    }

    /// Dense `2^n x 2^n` matrix of the Hamiltonian.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        check_dense(self.n_qubits)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (c, t) in &self.terms {
            let x = t.x_mask() as usize;
            for b in 0..dim {
                m[(b ^ x, b)] += t.phase_on(b) * *c;
            }
        }
        Ok(m)
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "n_qubits",
            value: n,
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    Ok(())
}

/// Dense matrix of a single Pauli string.
pub fn pauli_matrix(term: &PauliTerm) -> Result<DMatrix<Complex64>> {
    check_dense(term.n_qubits())?;
    let dim = 1usize << term.n_qubits();
    let x = term.x_mask() as usize;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for b in 0..dim {
        m[(b ^ x, b)] = term.phase_on(b);
    }
    Ok(m)
}
