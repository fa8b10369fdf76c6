//! The superblock `hole ⊗ particle` at fixed total pair number.
//!
//! A superblock vector is stored as one dense matrix `Ψ_p` per hole sector
//! `p` paired with the particle sector `T − p`, column-major and packed
//! back to back. Cross-block couplings are factored through a singular value
//! decomposition of the coupling submatrix, so the action of
//! `Σ_ij V_ij O_i ⊗ O_j` costs one product per singular value instead of one
//! per level pair.

use super::block::{BlockView, Sector, SectorDensity};
use super::{DmrgConfig, DmrgError};
use crate::exactdiag::lanczos::{lowest_eigenpairs, norm, LanczosError, LanczosOptions};
use crate::model::PairingModel;
use crate::parallel::{map_indexed, Execution};
use nalgebra::{DMatrix, DMatrixView};

/// Singular values below this fraction of the largest are dropped.
const SVD_CUTOFF: f64 = 1e-14;

/// Which block to keep when tracing out the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Hole,
    Particle,
}

/// One `(hole sector, particle sector)` block of a superblock vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorPair {
    /// Index into the hole sector list.
    pub hole: usize,
    /// Index into the particle sector list.
    pub particle: usize,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperblockLayout {
    hole_sectors: Vec<Sector>,
    particle_sectors: Vec<Sector>,
    target: usize,
    blocks: Vec<SectorPair>,
    dim: usize,
}

impl SuperblockLayout {
    pub fn new(hole: &[Sector], particle: &[Sector], target: usize) -> Result<Self, DmrgError> {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (hi, hs) in hole.iter().enumerate() {
            let Some(need) = target.checked_sub(hs.pairs) else {
                continue;
            };
            if let Some(pi) = particle.iter().position(|ps| ps.pairs == need) {
                let ps = particle[pi];
                blocks.push(SectorPair {
                    hole: hi,
                    particle: pi,
                    offset,
                    rows: hs.len,
                    cols: ps.len,
                });
                offset += hs.len * ps.len;
            }
        }
        if offset == 0 {
            return Err(DmrgError::EmptySector { target });
        }
        Ok(Self {
            hole_sectors: hole.to_vec(),
            particle_sectors: particle.to_vec(),
            target,
            blocks,
            dim: offset,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn blocks(&self) -> &[SectorPair] {
        &self.blocks
    }

    pub fn hole_sectors(&self) -> &[Sector] {
        &self.hole_sectors
    }

    pub fn particle_sectors(&self) -> &[Sector] {
        &self.particle_sectors
    }

    fn hole_pairs(&self, b: &SectorPair) -> usize {
        self.hole_sectors[b.hole].pairs
    }

    fn block_with_hole_pairs(&self, pairs: usize) -> Option<usize> {
        self.blocks.iter().position(|b| self.hole_pairs(b) == pairs)
    }
}

/// A superblock vector in a given layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperblockState {
    layout: SuperblockLayout,
    data: Vec<f64>,
}

impl SuperblockState {
    pub fn new(layout: SuperblockLayout, data: Vec<f64>) -> Result<Self, DmrgError> {
        if data.len() != layout.dim() {
            return Err(DmrgError::StateMismatch {
                expected: layout.dim(),
                got: data.len(),
            });
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> &SuperblockLayout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Amplitudes of the `i`-th sector block.
    pub fn block(&self, i: usize) -> DMatrixView<'_, f64> {
        block_view(&self.data, &self.layout.blocks[i])
    }

    /// All amplitudes as a (hole dim) × (particle dim) matrix; entries
    /// outside the target sector are zero.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let rows = self.layout.hole_sectors.iter().map(|s| s.len).sum();
        let cols = self.layout.particle_sectors.iter().map(|s| s.len).sum();
        let mut out = DMatrix::zeros(rows, cols);
        for (i, b) in self.layout.blocks.iter().enumerate() {
            let r0 = self.layout.hole_sectors[b.hole].start;
            let c0 = self.layout.particle_sectors[b.particle].start;
            out.view_mut((r0, c0), (b.rows, b.cols)).copy_from(&self.block(i));
        }
        out
    }
}

fn block_view<'a>(data: &'a [f64], b: &SectorPair) -> DMatrixView<'a, f64> {
    DMatrixView::from_slice(&data[b.offset..b.offset + b.rows * b.cols], b.rows, b.cols)
}

/// Partial trace of `|ψ⟩⟨ψ|` over the block opposite to `side`.
pub fn reduced_density(psi: &SuperblockState, side: Side) -> Result<SectorDensity, DmrgError> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(DmrgError::NotNormalized { norm: n });
    }
    let layout = psi.layout();
    let sectors = match side {
        Side::Hole => layout.hole_sectors.clone(),
        Side::Particle => layout.particle_sectors.clone(),
    };
    let mut blocks: Vec<DMatrix<f64>> = sectors.iter().map(|s| DMatrix::zeros(s.len, s.len)).collect();
    for (i, b) in layout.blocks.iter().enumerate() {
        let x = psi.block(i);
        match side {
            Side::Hole => blocks[b.hole] += x * x.transpose(),
            Side::Particle => blocks[b.particle] += x.transpose() * x,
        }
    }
    for b in &mut blocks {
        let t = b.transpose();
        *b = (&*b + t) * 0.5;
    }
    Ok(SectorDensity { sectors, blocks })
}

/// Rank-one pieces `σ_r u_r v_rᵀ` of `x`.
fn factor(x: DMatrix<f64>) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    if x.iter().all(|&v| v == 0.0) {
        return Vec::new();
    }
    let svd = x.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let mut out: Vec<(f64, Vec<f64>, Vec<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > SVD_CUTOFF * smax)
        .map(|(r, &s)| (s, u.column(r).iter().copied().collect(), vt.row(r).iter().copied().collect()))
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// `(σ, hole operator, particle operator)` factors of a coupling.
type CrossTerms = Vec<(f64, DMatrix<f64>, DMatrix<f64>)>;

/// Precomputed operator pieces feeding one output block.
#[derive(Debug, Clone)]
struct BlockTerms {
    h_hole: DMatrix<f64>,
    h_particle: DMatrix<f64>,
    /// From the block with one hole pair fewer: `(σ, A(p, p−1), C(q+1, q))`.
    from_below: Option<(usize, CrossTerms)>,
    /// From the block with one hole pair more: `(σ, A(p+1, p)ᵀ, C(q, q−1)ᵀ)`.
    from_above: Option<(usize, CrossTerms)>,
    /// `(2τ, D(p, p), E(q, q))`.
    monopole: Vec<(f64, DMatrix<f64>, DMatrix<f64>)>,
}

impl BlockTerms {
    fn entries(&self) -> usize {
        let pieces = |t: &[(f64, DMatrix<f64>, DMatrix<f64>)]| t.iter().map(|(_, a, c)| a.len() + c.len()).sum::<usize>();
        self.h_hole.len()
            + self.h_particle.len()
            + self.from_below.as_ref().map_or(0, |(_, t)| pieces(t))
            + self.from_above.as_ref().map_or(0, |(_, t)| pieces(t))
            + pieces(&self.monopole)
    }
}

/// Matrix-free superblock Hamiltonian
/// `H_h ⊗ 1 + 1 ⊗ H_p + Σ_ij V¹_ij (b†_i ⊗ b_j + b_i ⊗ b†_j) + 2 Σ_ij V²_ij n_i ⊗ n_j`.
#[derive(Debug, Clone)]
pub struct SuperblockHamiltonian {
    layout: SuperblockLayout,
    terms: Vec<BlockTerms>,
    exec: Execution,
}

fn sub(m: &DMatrix<f64>, r: &Sector, c: &Sector) -> DMatrix<f64> {
    m.view((r.start, c.start), (r.len, c.len)).into_owned()
}

impl SuperblockHamiltonian {
    pub fn new<H: BlockView, P: BlockView>(
        hole: &H,
        particle: &P,
        model: &PairingModel,
        target: usize,
        exec: Execution,
    ) -> Result<Self, DmrgError> {
        let hole_levels = hole.level_list();
        let particle_levels = particle.level_list();
        if hole_levels.iter().any(|l| particle_levels.contains(l)) {
            return Err(DmrgError::InvalidConfig("hole and particle blocks share a level".into()));
        }
        let layout = SuperblockLayout::new(hole.sectors(), particle.sectors(), target)?;
        let cross = |v: &DMatrix<f64>| {
            DMatrix::from_fn(hole_levels.len(), particle_levels.len(), |i, j| {
                v[(hole_levels[i], particle_levels[j])]
            })
        };
        let hop_pieces = factor(cross(model.v1()));
        let mono_pieces = factor(cross(model.v2()));
        let hops: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = hop_pieces
            .iter()
            .map(|(s, u, v)| (*s, hole.combined_raise(u), particle.combined_raise(v)))
            .collect();
        let monos: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = mono_pieces
            .iter()
            .map(|(s, u, v)| (*s, hole.combined_number(u), particle.combined_number(v)))
            .collect();

        let hs = hole.sectors();
        let ps = particle.sectors();
        let terms = layout
            .blocks
            .iter()
            .map(|b| {
                let (hp, pp) = (&hs[b.hole], &ps[b.particle]);
                let p = hp.pairs;
                let below = p.checked_sub(1).and_then(|q| layout.block_with_hole_pairs(q)).map(|nb| {
                    let n = &layout.blocks[nb];
                    let pieces = hops
                        .iter()
                        .map(|(s, a, c)| (*s, sub(a, hp, &hs[n.hole]), sub(c, &ps[n.particle], pp)))
                        .collect();
                    (nb, pieces)
                });
                let above = layout.block_with_hole_pairs(p + 1).map(|nb| {
                    let n = &layout.blocks[nb];
                    let pieces = hops
                        .iter()
                        .map(|(s, a, c)| {
                            (*s, sub(a, &hs[n.hole], hp).transpose(), sub(c, pp, &ps[n.particle]).transpose())
                        })
                        .collect();
                    (nb, pieces)
                });
                let monopole = monos
                    .iter()
                    .map(|(s, d, e)| (2.0 * s, sub(d, hp, hp), sub(e, pp, pp)))
                    .collect();
                BlockTerms {
                    h_hole: sub(hole.hamiltonian(), hp, hp),
                    h_particle: sub(particle.hamiltonian(), pp, pp),
                    from_below: below,
                    from_above: above,
                    monopole,
                }
            })
            .collect();
        Ok(Self { layout, terms, exec })
    }

    pub fn layout(&self) -> &SuperblockLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Matrix entries held by the precomputed operator pieces.
    pub fn stored_entries(&self) -> usize {
        self.terms.iter().map(BlockTerms::entries).sum()
    }

    fn apply_block(&self, i: usize, x: &[f64]) -> DMatrix<f64> {
        let b = &self.layout.blocks[i];
        let t = &self.terms[i];
        let psi = block_view(x, b);
        let mut out = &t.h_hole * psi;
        out.gemm(1.0, &psi, &t.h_particle, 1.0);
        for (nb, pieces) in [&t.from_below, &t.from_above].into_iter().flatten() {
            let other = block_view(x, &self.layout.blocks[*nb]);
            for (s, a, c) in pieces {
                let tmp = a * other;
                out.gemm(*s, &tmp, c, 1.0);
            }
        }
        for (s, d, e) in &t.monopole {
            let tmp = d * psi;
            out.gemm(*s, &tmp, e, 1.0);
        }
        out
    }

    /// `y = H x`. Output blocks are independent, so the result does not
    /// depend on the execution mode.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let blocks = map_indexed(self.exec, self.layout.blocks.len(), |i| self.apply_block(i, x));
        for (b, out) in self.layout.blocks.iter().zip(blocks) {
            y[b.offset..b.offset + b.rows * b.cols].copy_from_slice(out.as_slice());
        }
    }

    /// The superblock Hamiltonian as a dense matrix in layout order.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            self.apply(&e, &mut y);
            out.column_mut(c).copy_from_slice(&y);
            e[c] = 0.0;
        }
        out
    }
}

/// Ground state of one superblock solve.
#[derive(Debug, Clone)]
pub struct SuperblockGround {
    pub energy: f64,
    pub state: SuperblockState,
    pub residual: f64,
    pub matvecs: usize,
    /// Entries held by the superblock operator pieces and Krylov vectors.
    pub workspace_entries: usize,
}

/// Lowest eigenpair of the superblock in the `target` pair sector.
pub fn superblock_ground<H: BlockView, P: BlockView>(
    hole: &H,
    particle: &P,
    model: &PairingModel,
    target: usize,
    config: &DmrgConfig,
) -> Result<(f64, SuperblockState), DmrgError> {
    let g = solve_superblock(hole, particle, model, target, config, None, config.seed)?;
    Ok((g.energy, g.state))
}

/// [`superblock_ground`] with an optional start vector in layout order.
pub fn solve_superblock<H: BlockView, P: BlockView>(
    hole: &H,
    particle: &P,
    model: &PairingModel,
    target: usize,
    config: &DmrgConfig,
    start: Option<&[f64]>,
    seed: u64,
) -> Result<SuperblockGround, DmrgError> {
    let h = SuperblockHamiltonian::new(hole, particle, model, target, config.execution)?;
    let dim = h.dim();
    let opts = LanczosOptions {
        tol: config.superblock_tol,
        krylov_dim: config.krylov_dim,
        max_restarts: config.max_superblock_iters,
        seed,
    };
    let op = |x: &[f64], y: &mut [f64]| h.apply(x, y);
    let pairs = lowest_eigenpairs(dim, 1, op, start, &opts).map_err(|e| match e {
        LanczosError::NoConvergence {
            estimate, residual, ..
        } => DmrgError::NoConvergence { estimate, residual },
        LanczosError::InvalidRequest { .. } => DmrgError::EmptySector { target },
    })?;
    let workspace_entries = h.stored_entries() + (opts.krylov_dim.min(dim) + 3) * dim;
    let Some(vector) = pairs.vectors.into_iter().next() else {
        return Err(DmrgError::EmptySector { target });
    };
    let layout = h.layout;
    Ok(SuperblockGround {
        energy: pairs.values[0],
        state: SuperblockState::new(layout, vector)?,
        residual: pairs.residuals[0],
        matvecs: pairs.matvecs,
        workspace_entries,
    })
}
