//! Coupling kernels of the three exactly solvable pairing families.
//!
//! With γ the family parameter, the integrable couplings are built from
//! `γΔϵ·cot(γΔη)` and `γΔϵ/sin(γΔη)`. The rational family is the γ → 0
//! limit and the hyperbolic family (γ = −i) reduces to real `coth`/`sinh`,
//! so everything here stays in real arithmetic.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Coincidence threshold for η differences and trigonometric singularities.
pub const ETA_TOLERANCE: f64 = 1e-10;

/// One of the three exactly solvable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// γ = 0
    Rational,
    /// γ = 1
    Trigonometric,
    /// γ = −i
    Hyperbolic,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [
        FamilyKind::Rational,
        FamilyKind::Trigonometric,
        FamilyKind::Hyperbolic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Rational => "rational",
            FamilyKind::Trigonometric => "trigonometric",
            FamilyKind::Hyperbolic => "hyperbolic",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rational" => Ok(FamilyKind::Rational),
            "trigonometric" => Ok(FamilyKind::Trigonometric),
            "hyperbolic" => Ok(FamilyKind::Hyperbolic),
            other => Err(format!(
                "unknown family `{other}` (expected rational, trigonometric or hyperbolic)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("eta difference {d_eta:e} is within the coincidence threshold")]
    DegenerateEta { d_eta: f64 },
    #[error("sin({d_eta}) vanishes within the coincidence threshold")]
    SingularKernel { d_eta: f64 },
}

fn check(family: FamilyKind, d_eta: f64) -> Result<(), KernelError> {
    if d_eta.is_nan() || d_eta.abs() <= ETA_TOLERANCE {
        return Err(KernelError::DegenerateEta { d_eta });
    }
    if family == FamilyKind::Trigonometric && d_eta.sin().abs() <= ETA_TOLERANCE {
        return Err(KernelError::SingularKernel { d_eta });
    }
    Ok(())
}

/// `γΔϵ·cot(γΔη)` for the given family.
pub fn cot_kernel(family: FamilyKind, d_eps: f64, d_eta: f64) -> Result<f64, KernelError> {
    check(family, d_eta)?;
    Ok(match family {
        FamilyKind::Rational => d_eps / d_eta,
        FamilyKind::Trigonometric => d_eps * d_eta.cos() / d_eta.sin(),
        FamilyKind::Hyperbolic => d_eps * d_eta.cosh() / d_eta.sinh(),
    })
}

/// `γΔϵ/sin(γΔη)` for the given family.
pub fn sin_kernel(family: FamilyKind, d_eps: f64, d_eta: f64) -> Result<f64, KernelError> {
    check(family, d_eta)?;
    Ok(match family {
        FamilyKind::Rational => d_eps / d_eta,
        FamilyKind::Trigonometric => d_eps / d_eta.sin(),
        FamilyKind::Hyperbolic => d_eps / d_eta.sinh(),
    })
}
