//! The pairing Hamiltonian restricted to the seniority-zero sector.
//!
//! Every level is empty or holds a pair, so `n_i ∈ {0, 2}` and the only
//! off-diagonal process is a pair hop `b†_i b_j`. Pairs on distinct levels
//! commute (hard-core bosons): no fermionic signs appear.

use super::{ExactDiagError, PairBasis};
use crate::model::PairingModel;
use crate::parallel::{fill_indexed, Execution};

/// `⟨s|H|t⟩` for two configurations with the same number of pairs.
pub fn matrix_element(model: &PairingModel, s: u64, t: u64) -> Result<f64, ExactDiagError> {
    if s.count_ones() != t.count_ones() {
        return Err(ExactDiagError::PatternMismatch { s, t });
    }
    if s == t {
        return Ok(diagonal_energy(model, s));
    }
    let diff = s ^ t;
    if diff.count_ones() != 2 {
        return Ok(0.0);
    }
    // t = s with the pair on level j moved to level i
    let i = (diff & t).trailing_zeros() as usize;
    let j = (diff & s).trailing_zeros() as usize;
    Ok(model.v1()[(i, j)])
}

/// `2 Σ_{i∈s} ε_i + 4 Σ_{i≠j ∈ s} V²_ij`.
pub fn diagonal_energy(model: &PairingModel, s: u64) -> f64 {
    let eps = model.eps();
    let v2 = model.v2();
    let mut single = 0.0;
    let mut monopole = 0.0;
    let mut bits = s;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        single += eps[i];
        let mut rest = bits;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            monopole += v2[(i, j)];
        }
    }
    // each unordered pair appears twice in the ordered sum
    2.0 * single + 8.0 * monopole
}

/// A model bound to a basis with the diagonal precomputed; applies `H`
/// without storing it.
#[derive(Debug, Clone)]
pub struct PairHamiltonian<'a> {
    model: &'a PairingModel,
    basis: &'a PairBasis,
    diagonal: Vec<f64>,
    level_mask: u64,
}

impl<'a> PairHamiltonian<'a> {
    pub fn new(model: &'a PairingModel, basis: &'a PairBasis) -> Result<Self, ExactDiagError> {
        Self::with_execution(model, basis, Execution::default())
    }

    pub fn with_execution(
        model: &'a PairingModel,
        basis: &'a PairBasis,
        exec: Execution,
    ) -> Result<Self, ExactDiagError> {
        if model.n_levels() != basis.n_levels() {
            return Err(ExactDiagError::LevelMismatch {
                model: model.n_levels(),
                basis: basis.n_levels(),
            });
        }
        let mut diagonal = vec![0.0; basis.len()];
        fill_indexed(exec, &mut diagonal, |a| diagonal_energy(model, basis.state(a)));
        let n = basis.n_levels();
        let level_mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Ok(Self {
            model,
            basis,
            diagonal,
            level_mask,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &PairBasis {
        self.basis
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Calls `f(b, V¹)` for every configuration `b` reached from `a` by one
    /// pair hop, in increasing (source level, target level) order.
    pub fn for_each_hop(&self, a: usize, mut f: impl FnMut(usize, f64)) {
        let s = self.basis.state(a);
        let v1 = self.model.v1();
        let mut occupied = s;
        while occupied != 0 {
            let j = occupied.trailing_zeros() as usize;
            occupied &= occupied - 1;
            let mut empty = !s & self.level_mask;
            while empty != 0 {
                let i = empty.trailing_zeros() as usize;
                empty &= empty - 1;
                let coupling = v1[(i, j)];
                if coupling != 0.0 {
                    let t = s ^ (1u64 << j) ^ (1u64 << i);
                    f(self.basis.index(t).expect("hop stays in the basis"), coupling);
                }
            }
        }
    }

    fn row_times(&self, a: usize, x: &[f64]) -> f64 {
        let mut acc = self.diagonal[a] * x[a];
        self.for_each_hop(a, |b, coupling| acc += coupling * x[b]);
        acc
    }

    /// `y = H x`. Each output entry is summed in a fixed order, so the
    /// result is bit-identical for every execution mode.
    pub fn apply_into(&self, exec: Execution, x: &[f64], y: &mut [f64]) -> Result<(), ExactDiagError> {
        let dim = self.dim();
        if x.len() != dim || y.len() != dim {
            return Err(ExactDiagError::DimensionMismatch {
                expected: dim,
                got: if x.len() != dim { x.len() } else { y.len() },
            });
        }
        fill_indexed(exec, y, |a| self.row_times(a, x));
        Ok(())
    }
}

/// Matrix-free `H x` over `basis`.
pub fn apply(model: &PairingModel, basis: &PairBasis, x: &[f64]) -> Result<Vec<f64>, ExactDiagError> {
    apply_with(Execution::default(), model, basis, x)
}

pub fn apply_with(
    exec: Execution,
    model: &PairingModel,
    basis: &PairBasis,
    x: &[f64],
) -> Result<Vec<f64>, ExactDiagError> {
    let h = PairHamiltonian::with_execution(model, basis, exec)?;
    let mut y = vec![0.0; basis.len()];
    h.apply_into(exec, x, &mut y)?;
    Ok(y)
}
