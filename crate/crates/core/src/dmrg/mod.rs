//! Infinite-algorithm DMRG for pairing Hamiltonians.
//!
//! Levels are sorted by single-particle energy and split in half at the
//! Fermi index. A hole block grows downward from the Fermi index and a
//! particle block grows upward, one level each per iteration, so a run
//! takes exactly `N/2` iterations and the last superblock is the whole
//! system. Every block state carries a definite pair number.
//!
//! Block bases are chosen from a density matrix that mixes the superblock
//! ground state at the targeted pair number with the ground states of the
//! neighbouring sectors (see [`DmrgConfig::target_spread`]). Setting the
//! spread to zero selects states from the ground state alone.

mod block;
mod superblock;

pub use block::{grow_block, truncate, truncate_grown, BlockState, BlockView, GrownBlock, Sector, SectorDensity, Truncation};
pub use superblock::{
    reduced_density, solve_superblock, superblock_ground, SectorPair, Side, SuperblockGround, SuperblockHamiltonian,
    SuperblockLayout, SuperblockState,
};

use crate::model::PairingModel;
use crate::parallel::Execution;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DmrgError {
    #[error("the infinite algorithm needs an even number of levels, got {n_levels}")]
    OddN { n_levels: usize },
    #[error("cannot place {total_pairs} pairs on {n_levels} levels")]
    InfeasibleTarget { total_pairs: usize, n_levels: usize },
    #[error("invalid DMRG configuration: {0}")]
    InvalidConfig(String),
    #[error("level {level} is out of range or already in the block")]
    InvalidLevel { level: usize },
    #[error("no superblock states carry {target} pairs")]
    EmptySector { target: usize },
    #[error("density matrix does not match the block (block dim {block}, density dim {density})")]
    DensityMismatch { block: usize, density: usize },
    #[error("superblock vector has length {got}, layout needs {expected}")]
    StateMismatch { expected: usize, got: usize },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("superblock solver did not converge: best estimate {estimate}, residual {residual:e}")]
    NoConvergence { estimate: f64, residual: f64 },
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<DmrgError>,
    },
}

impl DmrgError {
    /// The error with any iteration context removed.
    pub fn root(&self) -> &DmrgError {
        match self {
            DmrgError::Iteration { source, .. } => source.root(),
            other => other,
        }
    }
}

/// How levels are ordered before they are split into hole and particle
/// halves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelOrder {
    /// Ascending ε, ties by index.
    #[default]
    EpsAscending,
    /// Model order.
    AsGiven,
    /// Ascending ε, blocks grown from the band edges toward the Fermi index.
    EdgesInward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmrgConfig {
    /// States kept per block.
    pub m: usize,
    pub total_pairs: usize,
    /// Relative residual tolerance of the superblock eigensolver.
    pub superblock_tol: f64,
    /// Restart cycles allowed per superblock solve.
    pub max_superblock_iters: usize,
    pub krylov_dim: usize,
    /// Neighbouring pair sectors `T ± 1, …, T ± spread` whose ground states
    /// are mixed into the density matrices.
    pub target_spread: usize,
    /// Total weight given to the neighbouring sectors.
    pub spread_weight: f64,
    pub seed: u64,
    pub level_order: LevelOrder,
    pub execution: Execution,
}

impl DmrgConfig {
    pub fn new(m: usize, total_pairs: usize) -> Self {
        Self {
            m,
            total_pairs,
            superblock_tol: 1e-10,
            max_superblock_iters: 300,
            krylov_dim: 40,
            target_spread: 1,
            spread_weight: 0.5,
            seed: 0,
            level_order: LevelOrder::default(),
            execution: Execution::default(),
        }
    }

    fn validate(&self, model: &PairingModel) -> Result<(), DmrgError> {
        let n = model.n_levels();
        if n % 2 == 1 {
            return Err(DmrgError::OddN { n_levels: n });
        }
        if self.m < 2 {
            return Err(DmrgError::InvalidConfig(format!("m must be at least 2, got {}", self.m)));
        }
        if self.total_pairs > n {
            return Err(DmrgError::InfeasibleTarget {
                total_pairs: self.total_pairs,
                n_levels: n,
            });
        }
        if !(self.superblock_tol > 0.0 && self.superblock_tol.is_finite()) {
            return Err(DmrgError::InvalidConfig(format!(
                "superblock tolerance must be positive, got {}",
                self.superblock_tol
            )));
        }
        if !(0.0..1.0).contains(&self.spread_weight) {
            return Err(DmrgError::InvalidConfig(format!(
                "spread weight must lie in [0, 1), got {}",
                self.spread_weight
            )));
        }
        if self.max_superblock_iters == 0 || self.krylov_dim < 2 {
            return Err(DmrgError::InvalidConfig(
                "need at least one restart and two Krylov vectors".into(),
            ));
        }
        Ok(())
    }
}

/// Pair number targeted when the superblock holds `2k` of `n` levels:
/// `round(2kM/N)` with halves rounded up, clipped to `[0, 2k]`.
pub fn target_pairs(k: usize, n: usize, total_pairs: usize) -> usize {
    let t = (4 * k * total_pairs + n) / (2 * n);
    t.min(2 * k)
}

/// Levels for the hole block (in growth order, starting at the Fermi
/// index and moving down) and the particle block (moving up).
pub fn level_sequences(model: &PairingModel, order: LevelOrder) -> (Vec<usize>, Vec<usize>) {
    let n = model.n_levels();
    let mut sorted: Vec<usize> = (0..n).collect();
    if order != LevelOrder::AsGiven {
        let eps = model.eps();
        sorted.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]).then(a.cmp(&b)));
    }
    let half = n / 2;
    let mut hole: Vec<usize> = sorted[..half].iter().rev().copied().collect();
    let mut particle = sorted[half..].to_vec();
    if order == LevelOrder::EdgesInward {
        hole.reverse();
        particle.reverse();
    }
    (hole, particle)
}

/// The single-level blocks at the Fermi index.
pub fn init_blocks(model: &PairingModel, config: &DmrgConfig) -> Result<(BlockState, BlockState), DmrgError> {
    config.validate(model)?;
    let (hole, particle) = level_sequences(model, config.level_order);
    Ok((
        grow_block(BlockState::vacuum(), hole[0], model)?,
        grow_block(BlockState::vacuum(), particle[0], model)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub levels_in_superblock: usize,
    pub target_pairs: usize,
    pub energy: f64,
    pub trunc_weight_hole: f64,
    pub trunc_weight_particle: f64,
    pub dim_hole: usize,
    pub dim_particle: usize,
    pub superblock_dim: usize,
    pub residual: f64,
    pub matvecs: usize,
}

/// Stored entries of one block, counting `b†`, `b` and `n` per level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BlockMemory {
    pub raise: usize,
    pub lower: usize,
    pub number: usize,
    pub hamiltonian: usize,
}

impl BlockMemory {
    fn of(block: &BlockState) -> Self {
        let ops = block.operator_entries() / 3;
        Self {
            raise: ops,
            lower: ops,
            number: ops,
            hamiltonian: block.hamiltonian_entries(),
        }
    }

    pub fn operators(&self) -> usize {
        self.raise + self.lower + self.number
    }
}

/// Memory accounting of a run, in matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryReport {
    pub m: usize,
    pub n_levels: usize,
    /// `3 m² N`.
    pub operator_bound: usize,
    /// Largest per-level operator storage of both blocks together.
    pub peak_operator_entries: usize,
    pub peak_hole: BlockMemory,
    pub peak_particle: BlockMemory,
    /// Block Hamiltonians at the operator peak; at most `2 m²`.
    pub block_hamiltonian_entries: usize,
    /// Grown-block Hamiltonians, superblock operator pieces, Krylov vectors
    /// and density matrices at their largest.
    pub peak_workspace_entries: usize,
}

impl MemoryReport {
    pub fn within_bound(&self) -> bool {
        self.peak_operator_entries <= self.operator_bound
    }

    /// Stored block entries at the peak: operators plus block Hamiltonians.
    pub fn peak_entries(&self) -> usize {
        self.peak_operator_entries + self.block_hamiltonian_entries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmrgResult {
    pub iterations: Vec<IterationRecord>,
    pub final_energy: f64,
    /// Stored block entries at peak (see [`MemoryReport::peak_entries`]).
    pub memory_peak_entries: usize,
    pub memory: MemoryReport,
    pub m: usize,
    pub n_levels: usize,
    pub total_pairs: usize,
    pub seed: u64,
}

/// The memory record of a finished run.
pub fn memory_report(result: &DmrgResult) -> MemoryReport {
    result.memory.clone()
}

/// Weight of the random admixture in a warm start. A guess that is an
/// exact excited eigenvector would otherwise never leave its own span.
const GUESS_NOISE: f64 = 1e-2;

/// `prev` (hole × particle amplitudes in the grown bases of the previous
/// iteration) rotated into the kept bases and lifted into the new grown
/// bases, with the new hole level filled first as the target grows. A
/// small seeded random vector is mixed in.
fn embed_guess(
    prev: &SuperblockState,
    kept_hole: &DMatrix<f64>,
    kept_particle: &DMatrix<f64>,
    hole: &GrownBlock,
    particle: &GrownBlock,
    layout: &SuperblockLayout,
    seed: u64,
) -> Option<Vec<f64>> {
    let pattern = match layout.target().checked_sub(prev.layout().target())? {
        0 => (false, false),
        1 => (true, false),
        2 => (true, true),
        _ => return None,
    };
    let reduced = kept_hole.transpose() * prev.to_dense() * kept_particle;
    let hs = hole.states();
    let ps = particle.states();
    let mut out = vec![0.0; layout.dim()];
    for b in layout.blocks() {
        let r0 = layout.hole_sectors()[b.hole].start;
        let c0 = layout.particle_sectors()[b.particle].start;
        for c in 0..b.cols {
            let (ap, sp) = ps[c0 + c];
            if sp != pattern.1 {
                continue;
            }
            for r in 0..b.rows {
                let (ah, sh) = hs[r0 + r];
                if sh == pattern.0 {
                    out[b.offset + c * b.rows + r] = reduced[(ah, ap)];
                }
            }
        }
    }
    let size = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if size < 1e-8 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise_size = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (o, e) in out.iter_mut().zip(&noise) {
        *o = *o / size + GUESS_NOISE * e / noise_size;
    }
    Some(out)
}

/// Runs the infinite algorithm: `N/2` iterations, each growing both blocks
/// by one level, solving the superblock at [`target_pairs`] and truncating
/// both blocks to `m` states.
pub fn run_infinite(model: &PairingModel, config: &DmrgConfig) -> Result<DmrgResult, DmrgError> {
    config.validate(model)?;
    let n = model.n_levels();
    let half = n / 2;
    let (hole_seq, particle_seq) = level_sequences(model, config.level_order);
    let mut hole = BlockState::vacuum();
    let mut particle = BlockState::vacuum();
    let mut records = Vec::with_capacity(half);
    let mut previous: Option<(SuperblockState, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut peak_ops = 0;
    let mut peak_blocks = (BlockMemory::default(), BlockMemory::default());
    let mut peak_workspace = 0;
    let mut final_energy = f64::NAN;

    for k in 1..=half {
        let step = |e: DmrgError| DmrgError::Iteration {
            iteration: k,
            source: Box::new(e),
        };
        let before = (BlockMemory::of(&hole), BlockMemory::of(&particle));
        let grown_hole = GrownBlock::new(hole, hole_seq[k - 1], model).map_err(step)?;
        let grown_particle = GrownBlock::new(particle, particle_seq[k - 1], model).map_err(step)?;
        let target = target_pairs(k, n, config.total_pairs);
        let layout = SuperblockLayout::new(grown_hole.sectors(), grown_particle.sectors(), target).map_err(step)?;
        let seed = config.seed.wrapping_add(k as u64);
        let guess = previous
            .as_ref()
            .and_then(|(psi, wh, wp)| embed_guess(psi, wh, wp, &grown_hole, &grown_particle, &layout, seed));
        let ground = solve_superblock(&grown_hole, &grown_particle, model, target, config, guess.as_deref(), seed)
            .map_err(step)?;
        let mut rho_hole = reduced_density(&ground.state, Side::Hole).map_err(step)?;
        let mut rho_particle = reduced_density(&ground.state, Side::Particle).map_err(step)?;
        // the last blocks are never grown again, so the mixture is skipped there
        let spread = if k == half { 0 } else { config.target_spread };
        let extra: Vec<usize> = (1..=spread)
            .flat_map(|d| [target.checked_sub(d), Some(target + d).filter(|&t| t <= 2 * k)])
            .flatten()
            .collect();
        if !extra.is_empty() {
            let w = config.spread_weight / extra.len() as f64;
            for b in rho_hole.blocks.iter_mut().chain(rho_particle.blocks.iter_mut()) {
                *b *= 1.0 - config.spread_weight;
            }
            for &t in &extra {
                let g = match solve_superblock(&grown_hole, &grown_particle, model, t, config, None, seed ^ t as u64) {
                    Ok(g) => g,
                    Err(DmrgError::EmptySector { .. }) => continue,
                    Err(e) => return Err(step(e)),
                };
                let rh = reduced_density(&g.state, Side::Hole).map_err(step)?;
                let rp = reduced_density(&g.state, Side::Particle).map_err(step)?;
                for (a, b) in rho_hole.blocks.iter_mut().zip(&rh.blocks) {
                    *a += b * w;
                }
                for (a, b) in rho_particle.blocks.iter_mut().zip(&rp.blocks) {
                    *a += b * w;
                }
            }
        }

        let workspace = ground.workspace_entries
            + grown_hole.h().len()
            + grown_particle.h().len()
            + rho_hole.blocks.iter().chain(&rho_particle.blocks).map(|b| b.len()).sum::<usize>();
        peak_workspace = peak_workspace.max(workspace);

        let th = truncate_grown(grown_hole, &rho_hole, config.m, config.execution).map_err(step)?;
        let tp = truncate_grown(grown_particle, &rho_particle, config.m, config.execution).map_err(step)?;
        hole = th.block;
        particle = tp.block;

        // each block holds its old or its new operator set at any moment
        let after = (BlockMemory::of(&hole), BlockMemory::of(&particle));
        let pick = |a: BlockMemory, b: BlockMemory| if a.operators() >= b.operators() { a } else { b };
        let worst = (pick(before.0, after.0), pick(before.1, after.1));
        let ops = worst.0.operators() + worst.1.operators();
        if ops >= peak_ops {
            peak_ops = ops;
            peak_blocks = worst;
        }

        records.push(IterationRecord {
            iteration: k,
            levels_in_superblock: 2 * k,
            target_pairs: target,
            energy: ground.energy,
            trunc_weight_hole: th.weight,
            trunc_weight_particle: tp.weight,
            dim_hole: hole.dim(),
            dim_particle: particle.dim(),
            superblock_dim: layout.dim(),
            residual: ground.residual,
            matvecs: ground.matvecs,
        });
        final_energy = ground.energy;
        previous = Some((ground.state, th.kept_basis, tp.kept_basis));
    }

    let memory = MemoryReport {
        m: config.m,
        n_levels: n,
        operator_bound: 3 * config.m * config.m * n,
        peak_operator_entries: peak_ops,
        peak_hole: peak_blocks.0,
        peak_particle: peak_blocks.1,
        block_hamiltonian_entries: peak_blocks.0.hamiltonian + peak_blocks.1.hamiltonian,
        peak_workspace_entries: peak_workspace,
    };
    Ok(DmrgResult {
        iterations: records,
        final_energy,
        memory_peak_entries: memory.peak_entries(),
        memory,
        m: config.m,
        n_levels: n,
        total_pairs: config.total_pairs,
        seed: config.seed,
    })
}
