//! Measurement-overhead accounting in units of estimated quantities.
//!
//! The meter models hardware cost: one charge is one finite-shot estimate of
//! one scalar, regardless of how the simulator actually computed it. Terms of
//! a Hamiltonian are assumed pairwise non-commuting, so no grouping discount.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostMeter {
    total: u64,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, quantities: u64) {
        self.total += quantities;
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Per-step charge of the parameter-shift Jacobian: `2 m v`.
pub fn jacobian_charge(m: usize, v: usize) -> u64 {
    2 * (m as u64) * (v as u64)
}

/// Per-step charge of the Fubini-Study tensor: `m(m+1)/2` elements, four
/// estimations each.
pub fn fubini_study_charge(m: usize) -> u64 {
    let m = m as u64;
    2 * m * (m + 1)
}
