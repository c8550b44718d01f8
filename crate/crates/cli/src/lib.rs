//! Implementation of the `cesolve` command-line tool.

pub mod args;
pub mod bench;

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ce_core::blocksparse::mmio::{read_matrix_market, read_vector, write_matrix_market, write_vector};
use ce_core::blocksparse::{BlockPartition, BlockSparseMatrix};
use ce_core::cefact::{ce_factorize, CeFactorization, FactorOptions, RECONSTRUCT_LIMIT};
use ce_core::krylov::{error_vs_reference, minres, relative_residual, IterationTrace, MinresOptions, SolveReport, TraceRow};
use ce_core::problems::{assemble_diffusion_3d, assemble_laplace_2d_9pt, geometric_block_ordering, CoarseningPlan, Grid3D};
use ce_core::{matrix_for_plan, CeError, CompressionStrategy, Symmetry, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use args::{BenchArgs, Cli, Command, FactorArgs, GenArgs, ProblemArgs, SolveArgs, StrategyArgs};
use bench::{write_bench_csv, BenchRow};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(CeError),
    NotConverged { iterations: usize, residual: f64 },
}

impl CliError {
    /// 2 for a factorization breakdown, 3 for MINRES running out of
    /// iterations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(CeError::Breakdown { .. } | CeError::NotPositiveDefinite { .. } | CeError::TailBreakdown { .. }) => 2,
            Self::NotConverged { .. } => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "{msg}"),
            // The diagonal check runs as part of the first level.
            Self::Core(e @ CeError::NotPositiveDefinite { block }) => write!(f, "breakdown at level 1, block {block}: {e}"),
            Self::Core(e) => write!(f, "{e}"),
            Self::NotConverged { iterations, residual } => {
                write!(f, "MINRES did not converge in {iterations} iterations (residual {residual:e})")
            }
        }
    }
}

impl From<CeError> for CliError {
    fn from(e: CeError) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A problem in its original numbering together with the plan that reorders it.
pub struct Problem {
    pub name: String,
    pub n: usize,
    pub entries: Vec<Triplet<f64>>,
    pub rhs: Vec<f64>,
    pub plan: CoarseningPlan,
}

impl Problem {
    /// The block matrix in plan order.
    pub fn matrix(&self) -> CliResult<BlockSparseMatrix<f64>> {
        Ok(matrix_for_plan(&self.entries, &self.plan)?)
    }
}

fn parse_usize(s: &str, what: &str) -> CliResult<usize> {
    s.parse().map_err(|_| CliError::Usage(format!("{what} must be a non-negative integer, got `{s}`")))
}

pub fn load_problem(p: &ProblemArgs) -> CliResult<Problem> {
    let tokens: Vec<&str> = p.problem.iter().map(String::as_str).collect();
    let mut problem = match tokens.as_slice() {
        ["diffusion3d", nx, ny, nz] => {
            let grid = Grid3D::new(parse_usize(nx, "NX")?, parse_usize(ny, "NY")?, parse_usize(nz, "NZ")?)?;
            let a = assemble_diffusion_3d::<f64>(&grid);
            Problem {
                name: format!("diffusion3d-{nx}x{ny}x{nz}"),
                n: a.n,
                entries: a.entries,
                rhs: a.rhs,
                plan: geometric_block_ordering(&grid, p.block, p.join)?,
            }
        }
        ["laplace2d", n] => {
            let a = assemble_laplace_2d_9pt::<f64>(parse_usize(n, "N")?);
            Problem {
                name: format!("laplace2d-{n}"),
                n: a.n,
                plan: CoarseningPlan::sequential(a.n, p.block, p.join)?,
                entries: a.entries,
                rhs: a.rhs,
            }
        }
        ["file", path] => {
            let (entries, n) = read_matrix_market::<f64>(path)?;
            let plan = match &p.plan {
                Some(plan) => CoarseningPlan::read(plan)?,
                None => CoarseningPlan::sequential(n, p.block, p.join)?,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let rhs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let name = Path::new(path).file_stem().map_or("file".into(), |s| s.to_string_lossy().into_owned());
            Problem { name, n, entries, rhs, plan }
        }
        _ => {
            return Err(CliError::Usage(
                "problem must be `diffusion3d NX NY NZ`, `laplace2d N` or `file PATH`".into(),
            ))
        }
    };
    if let Some(path) = &p.rhs {
        problem.rhs = read_vector(path)?;
    }
    if problem.plan.dim() != problem.n {
        return Err(CliError::Usage(format!("plan covers {} unknowns, matrix has {}", problem.plan.dim(), problem.n)));
    }
    if problem.rhs.len() != problem.n {
        return Err(CliError::Usage(format!("right-hand side has {} entries, matrix has {}", problem.rhs.len(), problem.n)));
    }
    Ok(problem)
}

fn options(s: &StrategyArgs, join: usize) -> CliResult<FactorOptions> {
    let strategy = s.strategy().map_err(CliError::Usage)?;
    Ok(FactorOptions::new(strategy).dense_threshold(s.dense_threshold).join(join))
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Factor(a) => cmd_factor(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

/// Writes `matrix.mtx`, `rhs.txt` and `plan.txt`, all in the original numbering.
pub fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let p = load_problem(&args.problem)?;
    let out = &args.problem.out;
    fs::create_dir_all(out)?;
    let part = BlockPartition::uniform(p.n, args.problem.block.max(1))?;
    let a = BlockSparseMatrix::from_triplets(&p.entries, part, Symmetry::Full)?;
    write_matrix_market(&a, out.join("matrix.mtx"))?;
    write_vector(&p.rhs, out.join("rhs.txt"))?;
    p.plan.write(out.join("plan.txt"))?;
    println!("{}: N={} blocks={} levels={} -> {}", p.name, p.n, p.plan.partition.num_blocks(), p.plan.num_levels(), out.display());
    Ok(())
}

fn factorize(p: &Problem, a: &BlockSparseMatrix<f64>, opts: &FactorOptions) -> CliResult<CeFactorization<f64>> {
    Ok(ce_factorize(a, &p.plan, opts)?)
}

fn summary_line(p: &Problem, strategy: CompressionStrategy, f: &CeFactorization<f64>, recon: Option<f64>) -> String {
    let s = &f.stats;
    format!(
        "N={} B={} strategy={} levels={} L={} predicted_L={} bytes={} seconds={:.3} reconstruction_error={}",
        p.n,
        p.plan.partition.max_block_size(),
        strategy,
        f.num_levels(),
        s.l_blocks(),
        s.predicted_l_blocks(),
        s.bytes(),
        s.seconds,
        recon.map_or("n/a".into(), |e| format!("{e:e}")),
    )
}

/// Writes `stats.csv` and prints the summary line.
pub fn cmd_factor(args: &FactorArgs) -> CliResult<()> {
    let p = load_problem(&args.problem)?;
    let opts = options(&args.strategy, args.problem.join)?;
    let a = p.matrix()?;
    let f = factorize(&p, &a, &opts)?;
    fs::create_dir_all(&args.problem.out)?;
    write_text(&args.problem.out, "stats.csv", &f.stats.to_csv())?;
    let recon = if p.n <= RECONSTRUCT_LIMIT { Some(f.reconstruction_error(&a)?) } else { None };
    println!("{}", summary_line(&p, opts.strategy, &f, recon));
    Ok(())
}

/// Writes `x.txt` (original numbering), `report.csv` and `trace.csv`.
pub fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let p = load_problem(&args.problem)?;
    let opts = options(&args.strategy, args.problem.join)?;
    let a = p.matrix()?;
    let b = p.plan.permute_vector(&p.rhs);
    let mopts = MinresOptions { tol: args.tol, maxit: args.maxit };

    let factor = if args.no_precond { None } else { Some(factorize(&p, &a, &opts)?) };
    let (x, report) = match &factor {
        Some(f) if args.direct => {
            let t = Instant::now();
            let x = f.solve(&b)?;
            let seconds = t.elapsed().as_secs_f64();
            let r = relative_residual(&a, &x, &b)?.value;
            let trace = IterationTrace { rows: vec![TraceRow { iter: 0, recurrence: r, true_residual: Some(r), seconds }] };
            (x, SolveReport { converged: true, iterations: 0, final_residual: r, true_residual: r, seconds, trace })
        }
        Some(f) => minres(&a, Some(f), &b, &mopts)?,
        None => minres(&a, None, &b, &mopts)?,
    };

    let out = &args.problem.out;
    fs::create_dir_all(out)?;
    write_vector(&p.plan.unpermute_vector(&x), out.join("x.txt"))?;
    write_text(out, "report.csv", &report.to_csv())?;
    write_text(out, "trace.csv", &report.trace.to_csv())?;
    if let Some(f) = &factor {
        write_text(out, "stats.csv", &f.stats.to_csv())?;
    }
    println!(
        "N={} mode={} converged={} iterations={} residual={:e} true_residual={:e} factor_seconds={:.3} solve_seconds={:.3}",
        p.n,
        match (&factor, args.direct) {
            (None, _) => "minres".to_string(),
            (Some(_), true) => format!("direct {}", opts.strategy),
            (Some(_), false) => format!("pminres {}", opts.strategy),
        },
        report.converged,
        report.iterations,
        report.final_residual,
        report.true_residual,
        factor.as_ref().map_or(0.0, |f| f.stats.seconds),
        report.seconds,
    );
    if !report.converged {
        return Err(CliError::NotConverged { iterations: report.iterations, residual: report.final_residual });
    }
    Ok(())
}

fn bench_strategies(args: &BenchArgs) -> CliResult<Vec<CompressionStrategy>> {
    let mut out = Vec::new();
    for &e in &args.eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(CliError::Usage(format!("--eps values must be positive, got {e}")));
        }
        out.push(CompressionStrategy::eps(e));
    }
    for &r in &args.rank {
        if r == 0 {
            return Err(CliError::Usage("--rank values must be positive".into()));
        }
        out.push(CompressionStrategy::rank(r));
    }
    if out.is_empty() {
        out.push(CompressionStrategy::eps(1e-3));
    }
    Ok(out)
}

fn bench_problem(args: &BenchArgs, size: usize) -> CliResult<Problem> {
    let s = size.to_string();
    let problem = match args.kind.as_str() {
        "diffusion3d" => vec!["diffusion3d".into(), s.clone(), s.clone(), s],
        "laplace2d" => vec!["laplace2d".into(), s],
        other => return Err(CliError::Usage(format!("bench supports diffusion3d and laplace2d, got `{other}`"))),
    };
    load_problem(&ProblemArgs {
        problem,
        block: args.block,
        join: args.join,
        plan: None,
        rhs: None,
        seed: 0,
        out: args.out.clone(),
    })
}

fn bench_run(
    p: &Problem,
    a: &BlockSparseMatrix<f64>,
    b: &[f64],
    reference: &[f64],
    opts: &FactorOptions,
    mopts: &MinresOptions,
    row: &mut BenchRow,
) -> CliResult<()> {
    let f = factorize(p, a, opts)?;
    row.l_blocks = Some(f.stats.l_blocks());
    row.bytes = Some(f.payload_bytes());
    row.factor_seconds = Some(f.stats.seconds);
    row.error = Some(error_vs_reference(&f.solve(b)?, reference)?);
    let (_, rep) = minres(a, Some(&f), b, mopts)?;
    row.solve_seconds = Some(rep.seconds);
    row.iterations = Some(rep.iterations);
    row.residual = Some(rep.true_residual);
    row.status = if rep.converged { "ok".into() } else { "not-converged".into() };
    Ok(())
}

/// Writes `bench.csv` and echoes it. Failed runs become rows with a status
/// message and the sweep carries on.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let strategies = bench_strategies(args)?;
    let mut sizes = Vec::new();
    for tok in args.ladder.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        sizes.push(parse_usize(tok, "ladder size")?);
    }
    let mopts = MinresOptions { tol: args.tol, maxit: args.maxit };
    let mut rows = Vec::new();
    for size in sizes {
        let p = bench_problem(args, size)?;
        let a = p.matrix()?;
        let b = p.plan.permute_vector(&p.rhs);
        let (reference, _) = minres(&a, None, &b, &MinresOptions { tol: 1e-13, maxit: 20 * p.n + 100 })?;
        for &strategy in &strategies {
            let opts = FactorOptions::new(strategy).dense_threshold(args.dense_threshold).join(args.join);
            let mut row = BenchRow {
                problem: p.name.clone(),
                n: p.n,
                strategy: strategy.to_string(),
                l_blocks: None,
                bytes: None,
                factor_seconds: None,
                solve_seconds: None,
                iterations: None,
                residual: None,
                error: None,
                status: String::new(),
            };
            if let Err(e) = bench_run(&p, &a, &b, &reference, &opts, &mopts, &mut row) {
                row.status = e.to_string();
            }
            rows.push(row);
        }
    }
    let csv = write_bench_csv(&rows);
    fs::create_dir_all(&args.out)?;
    write_text(&args.out, "bench.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
