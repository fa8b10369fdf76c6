//! DMRG blocks.
//!
//! A block holds a truncated basis whose states carry a definite number of
//! pairs. States are sorted by pair count, so each sector is a contiguous
//! index range and every stored operator is block-sparse over sectors.
//! Per level the block keeps `b†_ℓ` and `n_ℓ`; `b_ℓ` is the transpose of
//! `b†_ℓ`.
//!
//! Growing a block by one level is done lazily: a [`GrownBlock`] keeps the
//! old block plus the new level and materializes only its Hamiltonian and
//! the combined operators the superblock needs. Per-level operators are
//! projected straight from the old basis to the kept one.

use super::DmrgError;
use crate::model::PairingModel;
use crate::parallel::{map_owned, Execution};
use nalgebra::{DMatrix, SymmetricEigen};

/// A contiguous range of block states with `pairs` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sector {
    pub pairs: usize,
    pub start: usize,
    pub len: usize,
}

fn sectors_from_labels(labels: &[usize]) -> Vec<Sector> {
    let mut out: Vec<Sector> = Vec::new();
    for (i, &p) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.pairs == p => s.len += 1,
            _ => {
                debug_assert!(out.last().is_none_or(|s| s.pairs < p), "labels must be sorted");
                out.push(Sector {
                    pairs: p,
                    start: i,
                    len: 1,
                })
            }
        }
    }
    out
}

fn labels_of(sectors: &[Sector]) -> Vec<usize> {
    sectors
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.pairs, s.len))
        .collect()
}

/// What the superblock needs from a block.
pub trait BlockView {
    fn dim(&self) -> usize;
    fn sectors(&self) -> &[Sector];
    fn hamiltonian(&self) -> &DMatrix<f64>;
    /// Model level indices in operator order.
    fn level_list(&self) -> Vec<usize>;
    /// `Σ_ℓ coeffs[ℓ] b†_ℓ`, with `coeffs` ordered as [`level_list`](Self::level_list).
    fn combined_raise(&self, coeffs: &[f64]) -> DMatrix<f64>;
    /// `Σ_ℓ coeffs[ℓ] n_ℓ`.
    fn combined_number(&self, coeffs: &[f64]) -> DMatrix<f64>;
}

fn weighted_sum(dim: usize, ops: &[DMatrix<f64>], coeffs: &[f64]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(dim, dim);
    for (op, &c) in ops.iter().zip(coeffs) {
        if c != 0.0 {
            acc += op * c;
        }
    }
    acc
}

/// A stored (truncated) block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    levels: Vec<usize>,
    sectors: Vec<Sector>,
    h_block: DMatrix<f64>,
    pair_raise: Vec<DMatrix<f64>>,
    number_op: Vec<DMatrix<f64>>,
}

impl BlockState {
    /// The empty block: one state, no pairs, no levels.
    pub fn vacuum() -> Self {
        Self {
            levels: Vec::new(),
            sectors: vec![Sector {
                pairs: 0,
                start: 0,
                len: 1,
            }],
            h_block: DMatrix::zeros(1, 1),
            pair_raise: Vec::new(),
            number_op: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.h_block.nrows()
    }

    /// Model level indices, in the order they were added.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn h_block(&self) -> &DMatrix<f64> {
        &self.h_block
    }

    /// `b†` for the `slot`-th level of [`levels`](Self::levels).
    pub fn pair_raise(&self, slot: usize) -> &DMatrix<f64> {
        &self.pair_raise[slot]
    }

    /// `n` (0 or 2 fermions) for the `slot`-th level.
    pub fn number_op(&self, slot: usize) -> &DMatrix<f64> {
        &self.number_op[slot]
    }

    /// Pair count of every basis state.
    pub fn pair_labels(&self) -> Vec<usize> {
        labels_of(&self.sectors)
    }

    /// Entries actually held in per-level operators (two per level).
    pub fn stored_operator_entries(&self) -> usize {
        self.pair_raise
            .iter()
            .chain(&self.number_op)
            .map(|m| m.len())
            .sum()
    }

    /// Per-level operator entries counting `b†`, `b` and `n` separately.
    pub fn operator_entries(&self) -> usize {
        self.pair_raise.iter().map(|m| 3 * m.len()).sum()
    }

    pub fn hamiltonian_entries(&self) -> usize {
        self.h_block.len()
    }
}

impl BlockView for BlockState {
    fn dim(&self) -> usize {
        BlockState::dim(self)
    }

    fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.h_block
    }

    fn level_list(&self) -> Vec<usize> {
        self.levels.clone()
    }

    fn combined_raise(&self, coeffs: &[f64]) -> DMatrix<f64> {
        weighted_sum(self.dim(), &self.pair_raise, coeffs)
    }

    fn combined_number(&self, coeffs: &[f64]) -> DMatrix<f64> {
        weighted_sum(self.dim(), &self.number_op, coeffs)
    }
}

impl BlockState {
    fn project(self, exec: Execution, kept: &DMatrix<f64>, kept_labels: &[usize]) -> BlockState {
        let wt = kept.transpose();
        let project = |op: DMatrix<f64>| &wt * op * kept;
        let h_block = symmetrize(project(self.h_block.clone()));
        BlockState {
            levels: self.levels,
            sectors: sectors_from_labels(kept_labels),
            h_block,
            pair_raise: map_owned(exec, self.pair_raise, project),
            number_op: map_owned(exec, self.number_op, project),
        }
    }
}

/// A block plus one freshly added level, in the product basis
/// `old ⊗ {empty, occupied}` sorted by pair count.
#[derive(Debug, Clone)]
pub struct GrownBlock {
    base: BlockState,
    level: usize,
    // grown index -> (old index, new level occupied)
    states: Vec<(usize, bool)>,
    sectors: Vec<Sector>,
    h: DMatrix<f64>,
}

impl GrownBlock {
    /// Adds `level` to `base`. The new block Hamiltonian gains the level's
    /// `2ε` term and its pair hops and monopole couplings to every level
    /// already in the block.
    pub fn new(base: BlockState, level: usize, model: &PairingModel) -> Result<Self, DmrgError> {
        if level >= model.n_levels() || base.levels.contains(&level) {
            return Err(DmrgError::InvalidLevel { level });
        }
        let d = base.dim();
        let old_labels = base.pair_labels();
        let max_pairs = base.sectors.last().map_or(0, |s| s.pairs) + 1;
        let mut states = Vec::with_capacity(2 * d);
        let mut labels = Vec::with_capacity(2 * d);
        for p in 0..=max_pairs {
            for (a, &q) in old_labels.iter().enumerate() {
                if q == p {
                    states.push((a, false));
                    labels.push(p);
                }
            }
            for (a, &q) in old_labels.iter().enumerate() {
                if q + 1 == p {
                    states.push((a, true));
                    labels.push(p);
                }
            }
        }
        let sectors = sectors_from_labels(&labels);

        let v1 = model.v1();
        let v2 = model.v2();
        let mut hop = DMatrix::zeros(d, d);
        let mut mono = DMatrix::zeros(d, d);
        for (slot, &i) in base.levels.iter().enumerate() {
            hop += &base.pair_raise[slot] * v1[(i, level)];
            mono += &base.number_op[slot] * v2[(i, level)];
        }
        let two_eps = 2.0 * model.eps()[level];
        let dim = states.len();
        let h = DMatrix::from_fn(dim, dim, |r, c| {
            let (a, s) = states[r];
            let (b, t) = states[c];
            match (s, t) {
                (false, false) => base.h_block[(a, b)],
                (true, true) => {
                    let diag = if a == b { two_eps } else { 0.0 };
                    base.h_block[(a, b)] + diag + 4.0 * mono[(a, b)]
                }
                // ⟨a,0| b†_i b_ℓ |b,1⟩
                (false, true) => hop[(a, b)],
                (true, false) => hop[(b, a)],
            }
        });
        Ok(Self {
            base,
            level,
            states,
            sectors,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn new_level(&self) -> usize {
        self.level
    }

    pub fn base(&self) -> &BlockState {
        &self.base
    }

    /// Old levels followed by the new one.
    pub fn levels(&self) -> Vec<usize> {
        let mut l = self.base.levels.clone();
        l.push(self.level);
        l
    }

    /// `(old index, occupied)` for each grown basis state.
    pub fn states(&self) -> &[(usize, bool)] {
        &self.states
    }

    /// Lifts an old-basis operator `old ⊗ 1` and adds `new_entry(s, t)`
    /// on the diagonal of the old index.
    fn expand(&self, old: &DMatrix<f64>, new_entry: impl Fn(bool, bool) -> f64) -> DMatrix<f64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| {
            let (a, s) = self.states[r];
            let (b, t) = self.states[c];
            let mut x = if s == t { old[(a, b)] } else { 0.0 };
            if a == b {
                x += new_entry(s, t);
            }
            x
        })
    }

    /// Materializes the grown block without truncation.
    pub fn into_block(self) -> BlockState {
        let dim = self.dim();
        let labels = labels_of(&self.sectors);
        self.project(Execution::Sequential, &DMatrix::identity(dim, dim), &labels)
    }

    /// Projects every operator onto the columns of `kept` (grown basis ×
    /// kept states). Per-level operators are replaced one at a time, so the
    /// old and new copies of the full operator set never coexist.
    fn project(self, exec: Execution, kept: &DMatrix<f64>, kept_labels: &[usize]) -> BlockState {
        let d = self.base.dim();
        let m = kept.ncols();
        let mut w0 = DMatrix::zeros(d, m);
        let mut w1 = DMatrix::zeros(d, m);
        for (r, &(a, s)) in self.states.iter().enumerate() {
            let target = if s { &mut w1 } else { &mut w0 };
            target.row_mut(a).copy_from(&kept.row(r));
        }
        let h_block = kept.transpose() * &self.h * kept;
        let w0t = w0.transpose();
        let w1t = w1.transpose();
        let project_old = |op: DMatrix<f64>| &w0t * &op * &w0 + &w1t * &op * &w1;

        let GrownBlock { base, level, .. } = self;
        let BlockState {
            mut levels,
            pair_raise,
            number_op,
            ..
        } = base;
        let mut raise_out = map_owned(exec, pair_raise, project_old);
        let mut number_out = map_owned(exec, number_op, project_old);
        raise_out.push(&w1t * &w0);
        number_out.push((&w1t * &w1) * 2.0);
        levels.push(level);
        BlockState {
            levels,
            sectors: sectors_from_labels(kept_labels),
            h_block: symmetrize(h_block),
            pair_raise: raise_out,
            number_op: number_out,
        }
    }
}

impl BlockView for GrownBlock {
    fn dim(&self) -> usize {
        self.states.len()
    }

    fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.h
    }

    fn level_list(&self) -> Vec<usize> {
        self.levels()
    }

    fn combined_raise(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let (old, new) = coeffs.split_at(coeffs.len() - 1);
        let acc = weighted_sum(self.base.dim(), &self.base.pair_raise, old);
        let c = new[0];
        self.expand(&acc, |s, t| if s && !t { c } else { 0.0 })
    }

    fn combined_number(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let (old, new) = coeffs.split_at(coeffs.len() - 1);
        let acc = weighted_sum(self.base.dim(), &self.base.number_op, old);
        let c = new[0];
        self.expand(&acc, |s, t| if s && t { 2.0 * c } else { 0.0 })
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Adds `level` to `block` and returns the full, untruncated result.
pub fn grow_block(block: BlockState, level: usize, model: &PairingModel) -> Result<BlockState, DmrgError> {
    Ok(GrownBlock::new(block, level, model)?.into_block())
}

/// Reduced density matrix of one block, one dense matrix per sector of that
/// block (in sector order).
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDensity {
    pub sectors: Vec<Sector>,
    pub blocks: Vec<DMatrix<f64>>,
}

impl SectorDensity {
    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.len).sum()
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// The full block-diagonal matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (s, b) in self.sectors.iter().zip(&self.blocks) {
            out.view_mut((s.start, s.start), (s.len, s.len)).copy_from(b);
        }
        out
    }

    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| SymmetricEigen::new(b.clone()).eigenvalues.iter().copied().collect::<Vec<_>>())
            .collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all
    }
}

/// Outcome of a truncation step.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub block: BlockState,
    /// `1 − Σ kept eigenvalues`, clamped to `[0, 1]`.
    pub weight: f64,
    /// Kept density eigenvalues in kept-basis order.
    pub kept_weights: Vec<f64>,
    /// Old basis × kept states.
    pub kept_basis: DMatrix<f64>,
}

struct Selection {
    basis: DMatrix<f64>,
    labels: Vec<usize>,
    weight: f64,
    kept_weights: Vec<f64>,
}

/// Picks the `m` density eigenvectors of largest weight. Ties go to the
/// lower pair count, then to the earlier eigenvector. A block that already
/// fits keeps its basis untouched.
fn select(rho: &SectorDensity, m: usize) -> Selection {
    let dim = rho.dim();
    if dim <= m {
        return Selection {
            basis: DMatrix::identity(dim, dim),
            labels: labels_of(&rho.sectors),
            weight: (1.0 - rho.trace()).clamp(0.0, 1.0),
            kept_weights: rho.blocks.iter().flat_map(|b| b.diagonal().iter().copied().collect::<Vec<_>>()).collect(),
        };
    }

    struct Candidate {
        weight: f64,
        sector: usize,
        rank: usize,
        vector: nalgebra::DVector<f64>,
    }
    let mut candidates = Vec::with_capacity(dim);
    for (si, (sector, rho_s)) in rho.sectors.iter().zip(&rho.blocks).enumerate() {
        let eig = SymmetricEigen::new(rho_s.clone());
        let mut order: Vec<usize> = (0..sector.len).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        for (rank, &i) in order.iter().enumerate() {
            candidates.push(Candidate {
                weight: eig.eigenvalues[i],
                sector: si,
                rank,
                vector: eig.eigenvectors.column(i).into_owned(),
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(rho.sectors[a.sector].pairs.cmp(&rho.sectors[b.sector].pairs))
            .then(a.rank.cmp(&b.rank))
    });
    candidates.truncate(m);
    candidates.sort_by(|a, b| a.sector.cmp(&b.sector).then(a.rank.cmp(&b.rank)));

    let kept_total: f64 = candidates.iter().map(|c| c.weight).sum();
    let mut basis = DMatrix::zeros(dim, candidates.len());
    let mut labels = Vec::with_capacity(candidates.len());
    for (col, c) in candidates.iter().enumerate() {
        let s = rho.sectors[c.sector];
        basis.view_mut((s.start, col), (s.len, 1)).copy_from(&c.vector);
        labels.push(s.pairs);
    }
    Selection {
        basis,
        labels,
        weight: (1.0 - kept_total).clamp(0.0, 1.0),
        kept_weights: candidates.iter().map(|c| c.weight).collect(),
    }
}

fn check_density(sectors: &[Sector], rho: &SectorDensity) -> Result<(), DmrgError> {
    if rho.sectors != sectors || rho.blocks.iter().zip(sectors).any(|(b, s)| b.shape() != (s.len, s.len)) {
        return Err(DmrgError::DensityMismatch {
            block: sectors.iter().map(|s| s.len).sum(),
            density: rho.dim(),
        });
    }
    Ok(())
}

/// Keeps the `m` most probable density eigenvectors of `block` and
/// projects every stored operator onto them.
pub fn truncate(block: BlockState, rho: &SectorDensity, m: usize) -> Result<Truncation, DmrgError> {
    check_density(&block.sectors, rho)?;
    let sel = select(rho, m);
    let block = if sel.basis.ncols() == block.dim() && block.dim() <= m {
        block
    } else {
        block.project(Execution::default(), &sel.basis, &sel.labels)
    };
    Ok(Truncation {
        block,
        weight: sel.weight,
        kept_weights: sel.kept_weights,
        kept_basis: sel.basis,
    })
}

/// [`truncate`] for a lazily grown block. Operators are projected straight
/// from the pre-growth basis.
pub fn truncate_grown(
    block: GrownBlock,
    rho: &SectorDensity,
    m: usize,
    exec: Execution,
) -> Result<Truncation, DmrgError> {
    check_density(&block.sectors, rho)?;
    let sel = select(rho, m);
    Ok(Truncation {
        block: block.project(exec, &sel.basis, &sel.labels),
        weight: sel.weight,
        kept_weights: sel.kept_weights,
        kept_basis: sel.basis,
    })
}
