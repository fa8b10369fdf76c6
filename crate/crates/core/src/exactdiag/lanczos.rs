//! Restarted Lanczos for the lowest eigenpairs of a symmetric operator.
//!
//! Eigenpairs are found one at a time. Each is computed by Lanczos with full
//! reorthogonalization in the orthogonal complement of the pairs already
//! locked, restarting from the current Ritz vector until the true residual
//! `‖Hx − θx‖` falls below `tol · scale`. Deflation makes degenerate
//! eigenvalues come out with their full multiplicity.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual tolerance relative to the spectral scale.
    pub tol: f64,
    /// Krylov vectors per restart cycle.
    pub krylov_dim: usize,
    /// Restart cycles allowed per eigenpair.
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            krylov_dim: 48,
            max_restarts: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Largest |Ritz value| seen; the unit of `tol`.
    pub scale: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LanczosError {
    #[error("requested {k} eigenpairs of a {dim}-dimensional operator")]
    InvalidRequest { k: usize, dim: usize },
    #[error(
        "eigenpair {index} did not converge after {matvecs} products: \
         estimate {estimate}, residual {residual:e}"
    )]
    NoConvergence {
        index: usize,
        estimate: f64,
        residual: f64,
        matvecs: usize,
    },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_in_place(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

/// Two passes of classical Gram-Schmidt against every vector in `sets`.
fn orthogonalize(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in sets {
            for v in set.iter() {
                let c = dot(v, w);
                axpy(-c, v, w);
            }
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = norm(&v);
    scale_in_place(1.0 / n, &mut v);
    v
}

/// Lowest `k` eigenpairs of the symmetric operator `op` (`op(x, y)` sets
/// `y = H x`). `start`, when given, seeds the first eigenpair.
pub fn lowest_eigenpairs<F>(
    dim: usize,
    k: usize,
    op: F,
    start: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<Eigenpairs, LanczosError>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > dim {
        return Err(LanczosError::InvalidRequest { k, dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut scale = 0.0f64;
    let mut matvecs = 0;
    let mut w = vec![0.0; dim];

    for index in 0..k {
        let mut x = match (index, start) {
            (0, Some(s)) if s.len() == dim && norm(s) > 0.0 => s.to_vec(),
            _ => random_unit(dim, &mut rng),
        };
        let mut tries = 0;
        loop {
            orthogonalize(&mut x, &[&locked]);
            let nx = norm(&x);
            if nx > 1e-8 {
                scale_in_place(1.0 / nx, &mut x);
                break;
            }
            tries += 1;
            assert!(tries < 100, "cannot find a start vector outside the locked space");
            x = random_unit(dim, &mut rng);
        }

        let available = dim - locked.len();
        let krylov = opts.krylov_dim.max(2).min(available);
        let mut best = (f64::NAN, f64::INFINITY);
        let mut converged = false;
        for _restart in 0..opts.max_restarts.max(1) {
            let mut basis: Vec<Vec<f64>> = vec![x.clone()];
            let mut alpha: Vec<f64> = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            loop {
                let j = basis.len() - 1;
                op(&basis[j], &mut w);
                matvecs += 1;
                let a = dot(&basis[j], &w);
                axpy(-a, &basis[j], &mut w);
                if j > 0 {
                    axpy(-beta[j - 1], &basis[j - 1], &mut w);
                }
                orthogonalize(&mut w, &[&locked, &basis]);
                alpha.push(a);
                let b = norm(&w);
                let floor = 1e-14 * scale.max(a.abs()).max(f64::MIN_POSITIVE);
                if basis.len() == krylov || b <= floor {
                    break;
                }
                beta.push(b);
                let mut next = w.clone();
                scale_in_place(1.0 / b, &mut next);
                basis.push(next);
            }

            let m = alpha.len();
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            for &v in eig.eigenvalues.iter() {
                scale = scale.max(v.abs());
            }
            let (low, _) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
            let y = eig.eigenvectors.column(low);

            x.iter_mut().for_each(|xi| *xi = 0.0);
            for (c, v) in y.iter().zip(&basis) {
                axpy(*c, v, &mut x);
            }
            orthogonalize(&mut x, &[&locked]);
            let nx = norm(&x);
            scale_in_place(1.0 / nx, &mut x);

            op(&x, &mut w);
            matvecs += 1;
            let theta = dot(&x, &w);
            axpy(-theta, &x, &mut w);
            let residual = norm(&w);
            best = (theta, residual);
            let unit = if scale > 0.0 { scale } else { 1.0 };
            if residual <= opts.tol * unit {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LanczosError::NoConvergence {
                index,
                estimate: best.0,
                residual: best.1,
                matvecs,
            });
        }
        values.push(best.0);
        residuals.push(best.1);
        locked.push(x);
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(Eigenpairs {
        values: order.iter().map(|&i| values[i]).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        vectors: order.iter().map(|&i| std::mem::take(&mut locked[i])).collect(),
        scale,
        matvecs,
    })
}
