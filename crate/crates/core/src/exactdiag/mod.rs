//! Exact diagonalization in the seniority-zero pair basis.

mod basis;
mod hamiltonian;
pub mod lanczos;

pub use basis::{binomial, enumerate_basis, enumerate_basis_with_budget, PairBasis, DEFAULT_MAX_BASIS, MAX_LEVELS};
pub use hamiltonian::{apply, apply_with, diagonal_energy, matrix_element, PairHamiltonian};
pub use lanczos::{lowest_eigenpairs, Eigenpairs, LanczosError, LanczosOptions};

use crate::model::PairingModel;
use crate::parallel::Execution;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Bases up to this size may be diagonalized densely.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4000;

/// Largest number of eigenpairs the iterative solver hands out.
pub const DEFAULT_MAX_STATES: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExactDiagError {
    #[error("basis dimension {dimension} exceeds the limit of {limit}")]
    TooLarge { dimension: u128, limit: usize },
    #[error("cannot place {n_pairs} pairs on {n_levels} levels")]
    InvalidPairs { n_levels: usize, n_pairs: usize },
    #[error("patterns {s:#b} and {t:#b} hold different numbers of pairs")]
    PatternMismatch { s: u64, t: u64 },
    #[error("vector has length {got}, basis has {expected} states")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has {model} levels but the basis was built for {basis}")]
    LevelMismatch { model: usize, basis: usize },
    #[error("requested {k} states from a basis of {dim} (cap {cap})")]
    InvalidStateCount { k: usize, dim: usize, cap: usize },
    #[error("iterative solver did not converge: best estimate {estimate}, residual {residual:e}")]
    NoConvergence { estimate: f64, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Iterative,
}

/// Eigenvalues of one pair sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Ground-state amplitudes indexed by basis ordinal.
    pub ground_vector: Option<Vec<f64>>,
    /// Largest `‖Hv − Ev‖` among the returned pairs.
    pub residual: f64,
    pub method: SolveMethod,
    pub n_levels: usize,
    pub n_pairs: usize,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }
}

/// Options for [`iterative_ground_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeOptions {
    pub lanczos: LanczosOptions,
    pub max_states: usize,
    pub execution: Execution,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            max_states: DEFAULT_MAX_STATES,
            execution: Execution::default(),
        }
    }
}

/// Lowest `k` eigenvalues by restarted Lanczos with a seeded random start.
pub fn iterative_ground(
    model: &PairingModel,
    basis: &PairBasis,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectrumResult, ExactDiagError> {
    let mut opts = IterativeOptions::default();
    opts.lanczos.tol = tol;
    opts.lanczos.seed = seed;
    iterative_ground_with(model, basis, k, &opts)
}

pub fn iterative_ground_with(
    model: &PairingModel,
    basis: &PairBasis,
    k: usize,
    opts: &IterativeOptions,
) -> Result<SpectrumResult, ExactDiagError> {
    let dim = basis.len();
    if k == 0 || k > dim || k > opts.max_states {
        return Err(ExactDiagError::InvalidStateCount {
            k,
            dim,
            cap: opts.max_states,
        });
    }
    let h = PairHamiltonian::with_execution(model, basis, opts.execution)?;
    let exec = opts.execution;
    let op = |x: &[f64], y: &mut [f64]| {
        h.apply_into(exec, x, y).expect("dimensions checked above");
    };
    let pairs = lowest_eigenpairs(dim, k, op, None, &opts.lanczos).map_err(|e| match e {
        LanczosError::NoConvergence {
            estimate, residual, ..
        } => ExactDiagError::NoConvergence { estimate, residual },
        LanczosError::InvalidRequest { k, dim } => ExactDiagError::InvalidStateCount {
            k,
            dim,
            cap: opts.max_states,
        },
    })?;
    let residual = pairs.residuals.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(SpectrumResult {
        energies: pairs.values,
        ground_vector: pairs.vectors.into_iter().next(),
        residual,
        method: SolveMethod::Iterative,
        n_levels: basis.n_levels(),
        n_pairs: basis.n_pairs(),
    })
}

/// The Hamiltonian as a dense matrix over `basis`.
pub fn dense_matrix(model: &PairingModel, basis: &PairBasis) -> Result<DMatrix<f64>, ExactDiagError> {
    let h = PairHamiltonian::new(model, basis)?;
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        m[(a, a)] = h.diagonal()[a];
        h.for_each_hop(a, |b, coupling| m[(b, a)] = coupling);
    }
    Ok(m)
}

/// Full spectrum by dense symmetric diagonalization.
pub fn dense_spectrum(model: &PairingModel, basis: &PairBasis) -> Result<SpectrumResult, ExactDiagError> {
    dense_spectrum_with_threshold(model, basis, DEFAULT_DENSE_THRESHOLD)
}

pub fn dense_spectrum_with_threshold(
    model: &PairingModel,
    basis: &PairBasis,
    threshold: usize,
) -> Result<SpectrumResult, ExactDiagError> {
    let dim = basis.len();
    if dim > threshold {
        return Err(ExactDiagError::TooLarge {
            dimension: dim as u128,
            limit: threshold,
        });
    }
    let h = dense_matrix(model, basis)?;
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut hv = &h * &eig.eigenvectors;
    for (c, mut col) in hv.column_iter_mut().enumerate() {
        col.axpy(-eig.eigenvalues[c], &eig.eigenvectors.column(c), 1.0);
    }
    let residual = hv.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let ground_vector = order
        .first()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect());
    Ok(SpectrumResult {
        energies,
        ground_vector,
        residual,
        method: SolveMethod::Dense,
        n_levels: basis.n_levels(),
        n_pairs: basis.n_pairs(),
    })
}
