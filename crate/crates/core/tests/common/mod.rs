//! Random circuits and Hamiltonians shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use hqng::pauli::{Hamiltonian, Pauli, PauliTerm};
use hqng::sim::{Ansatz, Gate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data(name: &str) -> PathBuf {
    crate_dir().join("data").join(name)
}

pub fn config(name: &str) -> PathBuf {
    crate_dir().join("configs").join(name)
}

const AXES: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// `m` Pauli rotations on one or two random qubits, each followed with some
/// probability by a fixed CNOT or Hadamard so the generators do not commute
/// trivially.
pub fn random_ansatz(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Ansatz {
    let mut gates = vec![];
    for q in 0..n {
        gates.push(Gate::Hadamard(q));
    }
    for k in 0..m {
        let mut qubits: Vec<usize> = (0..n).collect();
        qubits.shuffle(rng);
        let width = if n > 1 && rng.random_bool(0.3) { 2 } else { 1 };
        let letters: Vec<(usize, Pauli)> = qubits[..width]
            .iter()
            .map(|&q| (q, AXES[rng.random_range(0..3)]))
            .collect();
        gates.push(Gate::rotation(n, &letters, k).unwrap());
        if n > 1 && rng.random_bool(0.5) {
            let c = rng.random_range(0..n);
            let t = (c + 1 + rng.random_range(0..n - 1)) % n;
            gates.push(Gate::Cnot {
                control: c,
                target: t,
            });
        }
        if rng.random_bool(0.2) {
            gates.push(Gate::Hadamard(rng.random_range(0..n)));
        }
    }
    Ansatz::new(n, gates).unwrap()
}

pub fn random_pauli(rng: &mut ChaCha8Rng, n: usize) -> PauliTerm {
    loop {
        let letters: Vec<Pauli> = (0..n)
            .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)])
            .collect();
        let t = PauliTerm::from_letters(&letters).unwrap();
        if !t.is_identity() {
            return t;
        }
    }
}

/// `v` distinct non-identity terms with coefficients in `[-1, 1]`, plus an
/// identity offset when `with_identity`.
pub fn random_hamiltonian(
    rng: &mut ChaCha8Rng,
    n: usize,
    v: usize,
    with_identity: bool,
) -> Hamiltonian {
    let mut terms: Vec<(f64, PauliTerm)> = Vec::new();
    if with_identity {
        terms.push((rng.random_range(-1.0..1.0), PauliTerm::identity(n)));
    }
    while terms.iter().filter(|(_, t)| !t.is_identity()).count() < v {
        let t = random_pauli(rng, n);
        if terms.iter().all(|(_, s)| *s != t) {
            let mut a: f64 = rng.random_range(-1.0..1.0);
            if a.abs() < 0.05 {
                a = 0.5;
            }
            terms.push((a, t));
        }
    }
    Hamiltonian::new(terms).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Sup-norm distance between two parameter traces of equal length.
pub fn trace_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| max_abs_diff(x, y))
        .fold(0.0, f64::max)
}
