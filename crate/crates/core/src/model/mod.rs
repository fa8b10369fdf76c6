//! Pairing Hamiltonians over `N` doubly degenerate levels:
//!
//! ```text
//! H = Σ_i ε_i n_i + Σ_{i≠j} V¹_ij b†_i b_j + Σ_{i≠j} V²_ij n_i n_j
//! ```
//!
//! where `b†_i = c†_{i+} c†_{i−}` creates a pair on level `i` and `n_i`
//! counts the fermions on it. Models can be given directly, generated from
//! one of the exactly solvable families, or taken as the reduced BCS case.

mod io;
mod kernel;

pub use io::{load_model, save_model, ModelDocument};
pub use kernel::{cot_kernel, sin_kernel, FamilyKind, KernelError, ETA_TOLERANCE};

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("need at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("eta values at ({i}, {j}) coincide within the threshold")]
    DegenerateEta { i: usize, j: usize },
    #[error("trigonometric kernel is singular at ({i}, {j}): sin(eta_i - eta_j) vanishes")]
    SingularKernel { i: usize, j: usize },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl ModelError {
    fn from_kernel(err: KernelError, i: usize, j: usize) -> Self {
        match err {
            KernelError::DegenerateEta { .. } => ModelError::DegenerateEta { i, j },
            KernelError::SingularKernel { .. } => ModelError::SingularKernel { i, j },
        }
    }
}

/// The free parameters `(g, ϵ_i, η_i)` of an integrable model together with
/// its family.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrableSpec {
    g: f64,
    epsilon: Vec<f64>,
    eta: Vec<f64>,
    family: FamilyKind,
}

impl IntegrableSpec {
    pub fn new(
        family: FamilyKind,
        g: f64,
        epsilon: Vec<f64>,
        eta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = epsilon.len();
        if n < 2 {
            return Err(ModelError::TooFewLevels(n));
        }
        if eta.len() != n {
            return Err(ModelError::LengthMismatch {
                what: "eta",
                got: eta.len(),
                expected: n,
            });
        }
        if !g.is_finite() {
            return Err(ModelError::InvariantViolation(format!("g = {g} is not finite")));
        }
        for (name, values) in [("epsilon", &epsilon), ("eta", &eta)] {
            if let Some(i) = values.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::InvariantViolation(format!(
                    "{name}[{i}] = {} is not finite",
                    values[i]
                )));
            }
        }
        let eta_scale = eta.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let d = eta[i] - eta[j];
                if d.is_nan() || d.abs() <= ETA_TOLERANCE * eta_scale {
                    return Err(ModelError::DegenerateEta { i, j });
                }
                if family == FamilyKind::Trigonometric && d.sin().abs() <= ETA_TOLERANCE {
                    return Err(ModelError::SingularKernel { i, j });
                }
            }
        }
        Ok(Self {
            g,
            epsilon,
            eta,
            family,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    pub fn n_levels(&self) -> usize {
        self.epsilon.len()
    }
}

/// Effective level energies and symmetric coupling matrices of a pairing
/// Hamiltonian. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingModel {
    eps: Vec<f64>,
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
}

impl PairingModel {
    /// Validates that `v1` and `v2` are `N×N`, exactly symmetric, have zero
    /// diagonal and that every entry is finite.
    pub fn new(eps: Vec<f64>, v1: DMatrix<f64>, v2: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = eps.len();
        if n < 2 {
            return Err(ModelError::TooFewLevels(n));
        }
        if let Some(i) = eps.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::InvariantViolation(format!(
                "eps[{i}] = {} is not finite",
                eps[i]
            )));
        }
        for (name, m) in [("v1", &v1), ("v2", &v2)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(ModelError::InvariantViolation(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    let x = m[(i, j)];
                    if !x.is_finite() {
                        return Err(ModelError::InvariantViolation(format!(
                            "{name}[{i}][{j}] = {x} is not finite"
                        )));
                    }
                    if i == j && x != 0.0 {
                        return Err(ModelError::InvariantViolation(format!(
                            "{name}[{i}][{i}] = {x}, diagonal must be zero"
                        )));
                    }
                    if j > i && x != m[(j, i)] {
                        return Err(ModelError::InvariantViolation(format!(
                            "{name} is not symmetric at ({i},{j}): {x} != {}",
                            m[(j, i)]
                        )));
                    }
                }
            }
        }
        Ok(Self { eps, v1, v2 })
    }

    /// Model without interactions.
    pub fn non_interacting(eps: Vec<f64>) -> Result<Self, ModelError> {
        let n = eps.len();
        Self::new(eps, DMatrix::zeros(n, n), DMatrix::zeros(n, n))
    }

    pub fn n_levels(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn v1(&self) -> &DMatrix<f64> {
        &self.v1
    }

    pub fn v2(&self) -> &DMatrix<f64> {
        &self.v2
    }

    pub fn is_non_interacting(&self) -> bool {
        self.v1.iter().all(|&x| x == 0.0) && self.v2.iter().all(|&x| x == 0.0)
    }

    /// Relabels levels: level `k` of the result is level `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let n = self.n_levels();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(ModelError::InvariantViolation(
                "level permutation is not a bijection".into(),
            ));
        }
        let eps = perm.iter().map(|&p| self.eps[p]).collect();
        let v1 = DMatrix::from_fn(n, n, |i, j| self.v1[(perm[i], perm[j])]);
        let v2 = DMatrix::from_fn(n, n, |i, j| self.v2[(perm[i], perm[j])]);
        Self::new(eps, v1, v2)
    }
}

/// Expands an integrable parametrization into effective energies and
/// couplings:
///
/// ```text
/// ε_i   = ϵ_i − g Σ_{j≠i} γ(ϵ_i−ϵ_j) cot γ(η_i−η_j)
/// V¹_ij = 2g γ(ϵ_i−ϵ_j) / sin γ(η_i−η_j)
/// V²_ij = (g/2) γ(ϵ_i−ϵ_j) cot γ(η_i−η_j)
/// ```
///
/// Both kernels are even under swapping `i` and `j`, so only the upper
/// triangle is evaluated and mirrored.
pub fn build_integrable(spec: &IntegrableSpec) -> Result<PairingModel, ModelError> {
    let n = spec.n_levels();
    let family = spec.family;
    let mut cot = DMatrix::zeros(n, n);
    let mut sin = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d_eps = spec.epsilon[i] - spec.epsilon[j];
            let d_eta = spec.eta[i] - spec.eta[j];
            let c = cot_kernel(family, d_eps, d_eta).map_err(|e| ModelError::from_kernel(e, i, j))?;
            let s = sin_kernel(family, d_eps, d_eta).map_err(|e| ModelError::from_kernel(e, i, j))?;
            cot[(i, j)] = c;
            cot[(j, i)] = c;
            sin[(i, j)] = s;
            sin[(j, i)] = s;
        }
    }
    let g = spec.g;
    let eps = (0..n)
        .map(|i| spec.epsilon[i] - g * (0..n).filter(|&j| j != i).map(|j| cot[(i, j)]).sum::<f64>())
        .collect();
    let v1 = sin.map(|x| 2.0 * g * x);
    let v2 = cot.map(|x| 0.5 * g * x);
    PairingModel::new(eps, v1, v2)
}

/// Reduced BCS model: `V¹_ij = −G` for `i ≠ j`, no monopole term.
///
/// The pair-scattering sum excludes `i = j`, so compared with the
/// convention `−G Σ_{ij} b†_i b_j` that includes the diagonal, every
/// eigenvalue in the `M`-pair sector is shifted by `+G·M`.
pub fn build_reduced_bcs(eps_levels: Vec<f64>, pairing: f64) -> Result<PairingModel, ModelError> {
    let n = eps_levels.len();
    if n < 2 {
        return Err(ModelError::TooFewLevels(n));
    }
    let v1 = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { -pairing });
    PairingModel::new(eps_levels, v1, DMatrix::zeros(n, n))
}

/// Which free-parameter count to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamCountKind {
    /// Independent ordered entries of ε, V¹, V²: `2N² − N`.
    General,
    /// One integrable family: `g`, `ϵ_i`, `η_i`, i.e. `2N + 1`.
    IntegrableSingle,
    /// All three families together: `3(2N + 1) = 6N + 3`.
    IntegrableAllFamilies,
}

pub fn param_count(kind: ParamCountKind, n_levels: usize) -> usize {
    let n = n_levels;
    match kind {
        ParamCountKind::General => 2 * n * n - n,
        ParamCountKind::IntegrableSingle => 2 * n + 1,
        ParamCountKind::IntegrableAllFamilies => 6 * n + 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn two_level_trigonometric() {
        let spec =
            IntegrableSpec::new(FamilyKind::Trigonometric, 0.1, vec![0.0, 1.0], vec![0.0, FRAC_PI_4])
                .unwrap();
        let model = build_integrable(&spec).unwrap();
        // cot(±π/4)·(∓1) = 1 for both levels; 1/sin(π/4) = √2
        assert!((model.eps()[0] + 0.1).abs() < 1e-15);
        assert!((model.eps()[1] - 0.9).abs() < 1e-15);
        assert!((model.v1()[(0, 1)] - 0.2 * 2f64.sqrt()).abs() < 1e-15);
        assert!((model.v1()[(0, 1)] - 0.2828427).abs() < 1e-7);
        assert!((model.v2()[(0, 1)] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_is_non_interacting() {
        for family in FamilyKind::ALL {
            let spec = IntegrableSpec::new(family, 0.0, vec![0.3, -1.0, 2.5], vec![0.1, 0.4, 1.1]).unwrap();
            let model = build_integrable(&spec).unwrap();
            assert_eq!(model.eps(), spec.epsilon());
            assert!(model.is_non_interacting());
        }
    }

    #[test]
    fn rational_with_eta_equal_epsilon() {
        let levels: Vec<f64> = (1..=8).map(f64::from).collect();
        let spec = IntegrableSpec::new(FamilyKind::Rational, -0.2, levels.clone(), levels).unwrap();
        let model = build_integrable(&spec).unwrap();
        for i in 0..8 {
            assert!((model.eps()[i] - ((i + 1) as f64 + 1.4)).abs() < 1e-14);
            for j in 0..8 {
                if i != j {
                    assert_eq!(model.v1()[(i, j)], -0.4);
                    assert_eq!(model.v2()[(i, j)], -0.1);
                }
            }
        }
    }

    #[test]
    fn integrable_spec_invariants() {
        assert_eq!(
            IntegrableSpec::new(FamilyKind::Rational, 1.0, vec![1.0], vec![0.0]),
            Err(ModelError::TooFewLevels(1))
        );
        assert!(matches!(
            IntegrableSpec::new(FamilyKind::Rational, 1.0, vec![1.0, 2.0], vec![0.0]),
            Err(ModelError::LengthMismatch { .. })
        ));
        assert_eq!(
            IntegrableSpec::new(FamilyKind::Hyperbolic, 1.0, vec![1.0, 2.0, 3.0], vec![0.0, 0.5, 0.5]),
            Err(ModelError::DegenerateEta { i: 1, j: 2 })
        );
        assert_eq!(
            IntegrableSpec::new(
                FamilyKind::Trigonometric,
                1.0,
                vec![1.0, 2.0],
                vec![0.0, std::f64::consts::PI]
            ),
            Err(ModelError::SingularKernel { i: 0, j: 1 })
        );
        // the coincidence threshold scales with |η|
        assert!(IntegrableSpec::new(FamilyKind::Rational, 1.0, vec![1.0, 2.0], vec![1e6, 1e6 + 1e-5]).is_err());
        assert!(IntegrableSpec::new(FamilyKind::Rational, 1.0, vec![1.0, 2.0], vec![1e6, 1e6 + 1e-3]).is_ok());
    }

    #[test]
    fn reduced_bcs_couplings() {
        let model = build_reduced_bcs(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(model.v1(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        assert!(model.v2().iter().all(|&x| x == 0.0));
        assert!(build_reduced_bcs(vec![1.0, 2.0, 3.0], 0.0).unwrap().is_non_interacting());
        assert_eq!(build_reduced_bcs(vec![1.0], 1.0), Err(ModelError::TooFewLevels(1)));
    }

    #[test]
    fn model_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        let err = PairingModel::new(vec![0.0, 0.0], asym, DMatrix::zeros(2, 2)).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(PairingModel::new(vec![0.0, 0.0], DMatrix::zeros(2, 2), diag).is_err());
        let nan = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(PairingModel::new(vec![0.0, 0.0], nan, DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn permutation_relabels_levels() {
        let model = build_reduced_bcs(vec![1.0, 2.0, 3.0], 0.5).unwrap();
        let p = model.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.eps(), &[3.0, 1.0, 2.0]);
        assert!(model.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(ParamCountKind::General, 10), 190);
        assert_eq!(param_count(ParamCountKind::IntegrableSingle, 10), 21);
        assert_eq!(param_count(ParamCountKind::IntegrableAllFamilies, 10), 63);
    }
}
