//! The `pairsolve` command line.
//!
//! Subcommands: `build`, `ed`, `dmrg`, `compare` and `sweep`. Exit codes are
//! 0 on success, 2 for invalid input, 3 when a basis is too large, 4 for an
//! unsupported shape (odd level count in DMRG) and 5 when a solver fails.

use crate::dmrg::{run_infinite, DmrgConfig, DmrgError, DmrgResult, LevelOrder};
use crate::exactdiag::{
    binomial, dense_spectrum_with_threshold, enumerate_basis_with_budget, iterative_ground_with, ExactDiagError,
    IterativeOptions, SolveMethod, SpectrumResult, DEFAULT_DENSE_THRESHOLD, DEFAULT_MAX_BASIS,
};
use crate::model::{
    load_model, param_count, save_model, FamilyKind, IntegrableSpec, ModelDocument, ModelError, PairingModel,
    ParamCountKind,
};
use crate::parallel::{map_indexed, Execution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SIZE: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "pairsolve", version, about = "Exact diagonalization and DMRG for pairing Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and validate a model, writing it in expanded (general) form.
    Build(BuildArgs),
    /// Exact diagonalization in one pair sector.
    Ed(EdArgs),
    /// Infinite-algorithm DMRG.
    Dmrg(DmrgArgs),
    /// Exact diagonalization and DMRG side by side.
    Compare(CompareArgs),
    /// DMRG over a list of kept-state counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    /// Dense up to the threshold, iterative above it.
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderChoice {
    EpsAscending,
    AsGiven,
    EdgesInward,
}

impl From<OrderChoice> for LevelOrder {
    fn from(o: OrderChoice) -> Self {
        match o {
            OrderChoice::EpsAscending => LevelOrder::EpsAscending,
            OrderChoice::AsGiven => LevelOrder::AsGiven,
            OrderChoice::EdgesInward => LevelOrder::EdgesInward,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Write `null` instead of the wall time, for reproducible output.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelSelect {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Number of pairs; half filling when absent.
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Validate and expand an existing model file.
    #[arg(long, conflicts_with_all = ["family", "eps"])]
    pub model: Option<PathBuf>,
    /// Integrable family: rational, trigonometric or hyperbolic.
    #[arg(long, requires_all = ["g", "epsilon", "eta"])]
    pub family: Option<FamilyKind>,
    /// Integrable coupling g.
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Integrable ϵ values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Vec<f64>,
    /// Integrable η values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eta: Vec<f64>,
    /// Reduced BCS single-particle energies, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "family", requires = "pairing")]
    pub eps: Vec<f64>,
    /// Reduced BCS pairing strength G (V¹ = −G).
    #[arg(long, allow_hyphen_values = true)]
    pub pairing: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EdArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// Number of eigenvalues; the dense path reports all of them when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DENSE_THRESHOLD)]
    pub dense_threshold: usize,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    pub method: MethodChoice,
    /// Largest basis the iterative path accepts.
    #[arg(long, default_value_t = DEFAULT_MAX_BASIS)]
    pub max_basis: usize,
    /// Also write the ground-state amplitudes (JSON array in basis order).
    #[arg(long)]
    pub vector: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct DmrgOptions {
    /// Ground states of the sectors T ± 1, …, T ± spread are mixed into the
    /// density matrices; 0 uses the ground state alone.
    #[arg(long, default_value_t = 1)]
    pub target_spread: usize,
    #[arg(long, value_enum, default_value_t = OrderChoice::EpsAscending)]
    pub level_order: OrderChoice,
    /// Restart cycles per superblock solve.
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Run every data-parallel loop on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl DmrgOptions {
    fn config(&self, m: usize, pairs: usize, common: &Common) -> DmrgConfig {
        let mut c = DmrgConfig::new(m, pairs);
        c.superblock_tol = common.tol;
        c.seed = common.seed;
        c.max_superblock_iters = self.max_iters;
        c.target_spread = self.target_spread;
        c.level_order = self.level_order.into();
        c.execution = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        c
    }
}

#[derive(Debug, Clone, Args)]
pub struct DmrgArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// States kept per block.
    #[arg(long)]
    pub m: usize,
    /// Summary JSON path; defaults to the history path with a `.json`
    /// extension, or standard output when no history path is given.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub dmrg: DmrgOptions,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_DENSE_THRESHOLD)]
    pub dense_threshold: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_BASIS)]
    pub max_basis: usize,
    #[command(flatten)]
    pub dmrg: DmrgOptions,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// Ascending kept-state counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m_list: Vec<usize>,
    #[command(flatten)]
    pub dmrg: DmrgOptions,
    #[command(flatten)]
    pub common: Common,
}

/// A failure with its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<ExactDiagError> for CliError {
    fn from(e: ExactDiagError) -> Self {
        let code = match e {
            ExactDiagError::TooLarge { .. } => EXIT_SIZE,
            ExactDiagError::NoConvergence { .. } => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DmrgError> for CliError {
    fn from(e: DmrgError) -> Self {
        let code = match e.root() {
            DmrgError::OddN { .. } => EXIT_SHAPE,
            DmrgError::InfeasibleTarget { .. } | DmrgError::InvalidConfig(_) | DmrgError::InvalidLevel { .. } => {
                EXIT_VALIDATION
            }
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// `x` with 17 significant digits, trailing zeros removed (C's `%.17g`).
pub fn format_g17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..17).contains(&exp) {
        trim(&format!("{:.*}", (16 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

fn write_output(path: Option<&Path>, content: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", p.display()))),
        None => stdout
            .write_all(content.as_bytes())
            .map_err(|e| CliError::validation(format!("cannot write output: {e}"))),
    }
}

fn read_document(path: &Path) -> Result<ModelDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read model file {}: {e}", path.display())))?;
    Ok(load_model(&text)?)
}

fn load_selected(select: &ModelSelect) -> Result<(PairingModel, usize), CliError> {
    let model = read_document(&select.model)?.to_model()?;
    let n = model.n_levels();
    let pairs = select.pairs.unwrap_or(n / 2);
    if pairs > n {
        return Err(CliError::validation(format!("cannot place {pairs} pairs on {n} levels")));
    }
    Ok((model, pairs))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn elapsed(start: Instant, common: &Common) -> Option<f64> {
    (!common.no_timestamp).then(|| start.elapsed().as_secs_f64())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn check_writable(path: Option<&Path>) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::validation(format!("output directory {} does not exist", dir.display())))
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let outputs: Vec<Option<&Path>> = match &cli.command {
        Command::Build(a) => vec![a.common.out.as_deref()],
        Command::Ed(a) => vec![a.common.out.as_deref(), a.vector.as_deref()],
        Command::Dmrg(a) => vec![a.common.out.as_deref(), a.summary.as_deref()],
        Command::Compare(a) => vec![a.common.out.as_deref()],
        Command::Sweep(a) => vec![a.common.out.as_deref()],
    };
    for path in outputs {
        check_writable(path)?;
    }
    match &cli.command {
        Command::Build(a) => cmd_build(a, stdout, stderr),
        Command::Ed(a) => cmd_ed(a, stdout, stderr),
        Command::Dmrg(a) => cmd_dmrg(a, stdout, stderr),
        Command::Compare(a) => cmd_compare(a, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
    }
}

#[derive(Debug, Serialize)]
struct BuildReport {
    kind: &'static str,
    family: Option<FamilyKind>,
    n_levels: usize,
    parameters_general: usize,
    parameters_integrable_single: usize,
    parameters_integrable_all_families: usize,
    non_interacting: bool,
    checks: Vec<(String, bool)>,
}

fn build_document(a: &BuildArgs) -> Result<ModelDocument, CliError> {
    if let Some(path) = &a.model {
        return read_document(path);
    }
    if let Some(family) = a.family {
        let g = a.g.expect("required by clap");
        return Ok(ModelDocument::Integrable(IntegrableSpec::new(
            family,
            g,
            a.epsilon.clone(),
            a.eta.clone(),
        )?));
    }
    if !a.eps.is_empty() {
        let pairing = a.pairing.expect("required by clap");
        return Ok(ModelDocument::ReducedBcs {
            eps: a.eps.clone(),
            pairing,
        });
    }
    Err(CliError::validation(
        "give --model, an integrable spec (--family, --g, --epsilon, --eta) or --eps with --pairing",
    ))
}

pub fn cmd_build(a: &BuildArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let doc = build_document(a)?;
    let model = doc.to_model()?;
    let n = model.n_levels();
    let sym = |m: &nalgebra::DMatrix<f64>| (0..n).all(|i| (0..n).all(|j| m[(i, j)] == m[(j, i)]));
    let zero_diag = |m: &nalgebra::DMatrix<f64>| (0..n).all(|i| m[(i, i)] == 0.0);
    let finite = model.eps().iter().chain(model.v1().iter()).chain(model.v2().iter()).all(|x| x.is_finite());
    let report = BuildReport {
        kind: doc.kind(),
        family: match &doc {
            ModelDocument::Integrable(s) => Some(s.family()),
            _ => None,
        },
        n_levels: n,
        parameters_general: param_count(ParamCountKind::General, n),
        parameters_integrable_single: param_count(ParamCountKind::IntegrableSingle, n),
        parameters_integrable_all_families: param_count(ParamCountKind::IntegrableAllFamilies, n),
        non_interacting: model.is_non_interacting(),
        checks: vec![
            ("v1 symmetric".into(), sym(model.v1())),
            ("v2 symmetric".into(), sym(model.v2())),
            ("zero diagonals".into(), zero_diag(model.v1()) && zero_diag(model.v2())),
            ("finite entries".into(), finite),
        ],
    };
    if report.non_interacting {
        let _ = writeln!(stderr, "warning: non-interacting model");
    }
    let expanded = save_model(&ModelDocument::General(model));
    let text = match a.common.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&report),
        _ => {
            let mut t = String::new();
            let family = report.family.map(|f| format!(" ({f})")).unwrap_or_default();
            let _ = writeln!(t, "model: {}{family}, {n} levels", report.kind);
            let _ = writeln!(t, "free parameters, general (2N^2-N): {}", report.parameters_general);
            let _ = writeln!(
                t,
                "free parameters, one integrable family (2N+1): {}",
                report.parameters_integrable_single
            );
            let _ = writeln!(
                t,
                "free parameters, all integrable families (6N+3): {}",
                report.parameters_integrable_all_families
            );
            for (name, ok) in &report.checks {
                let _ = writeln!(t, "check {name}: {}", if *ok { "ok" } else { "FAILED" });
            }
            t
        }
    };
    match &a.common.out {
        Some(path) => {
            write_output(Some(path), &expanded, stdout)?;
            write_output(None, &text, stdout)
        }
        None => {
            let _ = stderr.write_all(text.as_bytes());
            write_output(None, &expanded, stdout)
        }
    }
}

#[derive(Debug, Serialize)]
struct EdReport<'a> {
    energies: &'a [f64],
    residual: f64,
    method: SolveMethod,
    n_levels: usize,
    n_pairs: usize,
    dimension: usize,
    seed: u64,
    wall_seconds: Option<f64>,
}

struct EdOutcome {
    result: SpectrumResult,
    dimension: usize,
}

fn exact_ground(
    model: &PairingModel,
    pairs: usize,
    k: Option<usize>,
    method: MethodChoice,
    dense_threshold: usize,
    max_basis: usize,
    common: &Common,
) -> Result<EdOutcome, CliError> {
    let n = model.n_levels();
    let dim = binomial(n, pairs);
    let dense = match method {
        MethodChoice::Dense => true,
        MethodChoice::Iterative => false,
        MethodChoice::Auto => dim <= dense_threshold as u128,
    };
    if dense && dim > dense_threshold as u128 {
        return Err(CliError {
            code: EXIT_SIZE,
            message: format!(
                "basis dimension {dim} exceeds the dense threshold {dense_threshold}; use --method iterative"
            ),
        });
    }
    let budget = if dense { dense_threshold } else { max_basis };
    let basis = enumerate_basis_with_budget(n, pairs, budget).map_err(|e| match e {
        ExactDiagError::TooLarge { dimension, limit } => CliError {
            code: EXIT_SIZE,
            message: format!(
                "basis dimension {dimension} exceeds the limit {limit}; raise --max-basis or use `pairsolve dmrg`"
            ),
        },
        other => other.into(),
    })?;
    let mut result = if dense {
        dense_spectrum_with_threshold(model, &basis, dense_threshold)?
    } else {
        let mut opts = IterativeOptions::default();
        opts.lanczos.tol = common.tol;
        opts.lanczos.seed = common.seed;
        iterative_ground_with(model, &basis, k.unwrap_or(1), &opts)?
    };
    if let Some(k) = k {
        if k == 0 || k > result.energies.len() {
            return Err(CliError::validation(format!(
                "cannot report {k} eigenvalues of a {}-state basis",
                basis.len()
            )));
        }
        result.energies.truncate(k);
    }
    Ok(EdOutcome {
        result,
        dimension: basis.len(),
    })
}

pub fn cmd_ed(a: &EdArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    let (model, pairs) = load_selected(&a.select)?;
    let out = exact_ground(&model, pairs, a.k, a.method, a.dense_threshold, a.max_basis, &a.common)?;
    let r = &out.result;
    if let Some(path) = &a.vector {
        let v = r.ground_vector.as_deref().unwrap_or(&[]);
        write_output(Some(path), &to_json(&v), stdout)?;
    }
    let report = EdReport {
        energies: &r.energies,
        residual: r.residual,
        method: r.method,
        n_levels: r.n_levels,
        n_pairs: r.n_pairs,
        dimension: out.dimension,
        seed: a.common.seed,
        wall_seconds: elapsed(start, &a.common),
    };
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut t = String::from("index,energy\n");
            for (i, e) in r.energies.iter().enumerate() {
                let _ = writeln!(t, "{i},{}", format_g17(*e));
            }
            t
        }
        _ => to_json(&report),
    };
    write_output(a.common.out.as_deref(), &text, stdout)
}

/// One row per iteration:
/// `iteration,levels_in_superblock,target_pairs,E0,trunc_weight_hole,trunc_weight_particle,dim_hole,dim_particle`.
pub fn history_csv(result: &DmrgResult) -> String {
    let mut t = String::from(
        "iteration,levels_in_superblock,target_pairs,E0,trunc_weight_hole,trunc_weight_particle,dim_hole,dim_particle\n",
    );
    for r in &result.iterations {
        let _ = writeln!(
            t,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.levels_in_superblock,
            r.target_pairs,
            format_g17(r.energy),
            format_g17(r.trunc_weight_hole),
            format_g17(r.trunc_weight_particle),
            r.dim_hole,
            r.dim_particle
        );
    }
    t
}

#[derive(Debug, Serialize)]
struct DmrgSummary<'a> {
    final_energy: f64,
    m: usize,
    n_levels: usize,
    total_pairs: usize,
    iterations: usize,
    memory_peak_entries: usize,
    wall_seconds: Option<f64>,
    seed: u64,
    target_spread: usize,
    memory: &'a crate::dmrg::MemoryReport,
}

/// The run summary as pretty JSON.
pub fn summary_json(result: &DmrgResult, target_spread: usize, wall_seconds: Option<f64>) -> String {
    to_json(&DmrgSummary {
        final_energy: result.final_energy,
        m: result.m,
        n_levels: result.n_levels,
        total_pairs: result.total_pairs,
        iterations: result.iterations.len(),
        memory_peak_entries: result.memory_peak_entries,
        wall_seconds,
        seed: result.seed,
        target_spread,
        memory: &result.memory,
    })
}

pub fn cmd_dmrg(a: &DmrgArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    let (model, pairs) = load_selected(&a.select)?;
    let config = a.dmrg.config(a.m, pairs, &a.common);
    let result = run_infinite(&model, &config)?;
    let summary = summary_json(&result, config.target_spread, elapsed(start, &a.common));
    let summary_path = a
        .summary
        .clone()
        .or_else(|| a.common.out.as_ref().map(|p| p.with_extension("json")));
    if let Some(out) = &a.common.out {
        if summary_path.as_deref() == Some(out.as_path()) {
            return Err(CliError::validation("history and summary paths coincide; pass --summary"));
        }
        write_output(Some(out), &history_csv(&result), stdout)?;
    }
    write_output(summary_path.as_deref(), &summary, stdout)
}

#[derive(Debug, Serialize)]
struct CompareReport {
    e_ed: f64,
    e_dmrg: f64,
    abs_error: f64,
    rel_error: f64,
    sig_figs: u32,
    ed_method: SolveMethod,
    m: usize,
    n_levels: usize,
    n_pairs: usize,
    seed: u64,
    wall_seconds: Option<f64>,
}

/// `floor(−log10(rel))`, at most 16 (exact agreement).
pub fn significant_figures(rel: f64) -> u32 {
    if rel <= 1e-16 {
        return 16;
    }
    (-rel.log10()).floor().clamp(0.0, 16.0) as u32
}

pub fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    let (model, pairs) = load_selected(&a.select)?;
    let ed = exact_ground(&model, pairs, Some(1), MethodChoice::Auto, a.dense_threshold, a.max_basis, &a.common)?;
    let config = a.dmrg.config(a.m, pairs, &a.common);
    let dmrg = run_infinite(&model, &config)?;
    let e_ed = ed.result.ground_energy();
    let e_dmrg = dmrg.final_energy;
    let abs_error = (e_dmrg - e_ed).abs();
    let rel_error = if e_ed == 0.0 { abs_error } else { abs_error / e_ed.abs() };
    let report = CompareReport {
        e_ed,
        e_dmrg,
        abs_error,
        rel_error,
        sig_figs: significant_figures(rel_error),
        ed_method: ed.result.method,
        m: a.m,
        n_levels: model.n_levels(),
        n_pairs: pairs,
        seed: a.common.seed,
        wall_seconds: elapsed(start, &a.common),
    };
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Csv => format!(
            "e_ed,e_dmrg,abs_error,rel_error,sig_figs,m\n{},{},{},{},{},{}\n",
            format_g17(e_ed),
            format_g17(e_dmrg),
            format_g17(abs_error),
            format_g17(rel_error),
            report.sig_figs,
            a.m
        ),
        _ => to_json(&report),
    };
    write_output(a.common.out.as_deref(), &text, stdout)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub energy: f64,
    /// `|E(m) − E_best|` with `E_best` the lowest energy of the sweep.
    pub error_vs_best: f64,
    /// Largest truncation weight of the run.
    pub trunc_weight: f64,
    pub wall_seconds: Option<f64>,
    pub peak_memory_entries: usize,
    /// `|E(m) − E(m_last)| / |E(m_last)|`.
    pub self_convergence: f64,
}

/// Runs DMRG for every `m` (concurrently when parallel) and returns rows in
/// `m` order.
pub fn sweep_rows(model: &PairingModel, configs: &[DmrgConfig], timestamps: bool) -> Result<Vec<SweepRow>, DmrgError> {
    let exec = configs.first().map_or(Execution::Sequential, |c| c.execution);
    let runs = map_indexed(exec, configs.len(), |i| {
        let start = Instant::now();
        run_infinite(model, &configs[i]).map(|r| (r, start.elapsed().as_secs_f64()))
    });
    let runs: Vec<(DmrgResult, f64)> = runs.into_iter().collect::<Result<_, _>>()?;
    let best = runs.iter().map(|(r, _)| r.final_energy).fold(f64::INFINITY, f64::min);
    let last = runs.last().map_or(f64::NAN, |(r, _)| r.final_energy);
    Ok(runs
        .iter()
        .map(|(r, secs)| SweepRow {
            m: r.m,
            energy: r.final_energy,
            error_vs_best: (r.final_energy - best).abs(),
            trunc_weight: r
                .iterations
                .iter()
                .map(|it| it.trunc_weight_hole.max(it.trunc_weight_particle))
                .fold(0.0, f64::max),
            wall_seconds: timestamps.then_some(*secs),
            peak_memory_entries: r.memory_peak_entries,
            self_convergence: if last == 0.0 {
                (r.final_energy - last).abs()
            } else {
                ((r.final_energy - last) / last).abs()
            },
        })
        .collect())
}

pub fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let (model, pairs) = load_selected(&a.select)?;
    if a.m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::validation("--m-list must be strictly ascending"));
    }
    let configs: Vec<DmrgConfig> = a.m_list.iter().map(|&m| a.dmrg.config(m, pairs, &a.common)).collect();
    let rows = sweep_rows(&model, &configs, !a.common.no_timestamp)?;
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        _ => {
            let mut t =
                String::from("m,E0,error_vs_best,trunc_weight,wall_seconds,peak_memory_entries,self_convergence\n");
            for r in &rows {
                let _ = writeln!(
                    t,
                    "{},{},{},{},{},{},{}",
                    r.m,
                    format_g17(r.energy),
                    format_g17(r.error_vs_best),
                    format_g17(r.trunc_weight),
                    r.wall_seconds.map(format_g17).unwrap_or_default(),
                    r.peak_memory_entries,
                    format_g17(r.self_convergence)
                );
            }
            t
        }
    };
    write_output(a.common.out.as_deref(), &text, stdout)
}
