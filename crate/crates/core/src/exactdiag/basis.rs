//! Seniority-zero configurations: `M` pairs distributed over `N` levels,
//! one bit per level.

use super::ExactDiagError;

/// Largest basis enumerated by default.
pub const DEFAULT_MAX_BASIS: usize = 20_000_000;

/// Levels are stored as bits of a `u64`.
pub const MAX_LEVELS: usize = 64;

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `N`-bit patterns with exactly `M` bits set, in increasing integer
/// order, with an O(M) pattern → ordinal map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBasis {
    n_levels: usize,
    n_pairs: usize,
    states: Vec<u64>,
    // binom[n][k] for n < N, k ≤ M, used by the ranking
    binom: Vec<Vec<usize>>,
}

impl PairBasis {
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, ordinal: usize) -> u64 {
        self.states[ordinal]
    }

    /// Ordinal of `pattern`, or `None` if it is not a member of the basis.
    ///
    /// Increasing integer order on fixed-popcount patterns is the
    /// colexicographic order, whose rank is `Σ_k C(p_k, k + 1)` over the set
    /// bit positions `p_0 < p_1 < …`.
    pub fn index(&self, pattern: u64) -> Option<usize> {
        if pattern.count_ones() as usize != self.n_pairs
            || (self.n_levels < MAX_LEVELS && pattern >> self.n_levels != 0)
        {
            return None;
        }
        let mut rank = 0;
        let mut bits = pattern;
        let mut k = 0;
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            rank += self.binom[p][k + 1];
            bits &= bits - 1;
            k += 1;
        }
        Some(rank)
    }
}

/// Enumerates the `C(N, M)` configurations of `M` pairs on `N` levels.
pub fn enumerate_basis(n_levels: usize, n_pairs: usize) -> Result<PairBasis, ExactDiagError> {
    enumerate_basis_with_budget(n_levels, n_pairs, DEFAULT_MAX_BASIS)
}

pub fn enumerate_basis_with_budget(
    n_levels: usize,
    n_pairs: usize,
    max_states: usize,
) -> Result<PairBasis, ExactDiagError> {
    if n_pairs > n_levels {
        return Err(ExactDiagError::InvalidPairs { n_levels, n_pairs });
    }
    let size = binomial(n_levels, n_pairs);
    if n_levels > MAX_LEVELS || size > max_states as u128 {
        return Err(ExactDiagError::TooLarge {
            dimension: size,
            limit: max_states,
        });
    }
    let size = size as usize;
    let mut states = Vec::with_capacity(size);
    if n_pairs == 0 {
        states.push(0);
    } else {
        let mut s: u64 = if n_pairs == 64 { u64::MAX } else { (1u64 << n_pairs) - 1 };
        loop {
            states.push(s);
            if states.len() == size {
                break;
            }
            // Gosper's hack: next larger integer with the same popcount
            let c = s & s.wrapping_neg();
            let r = s + c;
            s = (((r ^ s) >> 2) / c) | r;
        }
    }
    let binom = (0..n_levels.max(1))
        .map(|n| (0..=n_pairs).map(|k| binomial(n, k) as usize).collect())
        .collect();
    Ok(PairBasis {
        n_levels,
        n_pairs,
        states,
        binom,
    })
}
