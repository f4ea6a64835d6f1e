use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::json;

use circattn::analysis::{bccb_similarity_report, export_kernel_pgm, extract_equivalent_kernel};
use circattn::bench::{wallclock_sweep, BenchImpl, SweepConfig, CSV_HEADER};
use circattn::cost::{attention_flops, model_flops, tokens_for_resolution, BlockModelSpec, DEIT_PATCH};
use circattn::io::{read_matrix_csv, write_matrix_csv};
use circattn::rng::SplitMix64;
use circattn::structured::{DenseMatrix, SizeGuard};
use circattn::verify::{run_suite, Suite};
use circattn::{Error, GridShape, SequenceTensor};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "circattn", version, about = "Circulant attention toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run property suites; prints one PASS/FAIL line per property.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, env = "CIRC_ATTN_SEED", default_value_t = 0)]
        seed: u64,
        /// Multiplier on the number of random cases per property.
        #[arg(long, default_value_t = 1)]
        cases: usize,
    },
    /// Project a dense matrix onto the BCCB subspace of a grid.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        grid: GridShape,
        #[arg(long)]
        out_kernel: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write equivalent convolution kernels for seeded random (Q, K) pairs.
    Kernels {
        #[arg(long, env = "CIRC_ATTN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        grid: GridShape,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Wall-clock sweep over grids, as CSV.
    Bench {
        #[arg(long = "impl", value_enum)]
        implementation: ImplArg,
        /// Comma-separated list of HxW grids.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<GridShape>,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, env = "CIRC_ATTN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allow dense paths beyond N = 4096.
        #[arg(long)]
        allow_large: bool,
    },
    /// Analytic FLOP counts for one attention layer or a whole model.
    #[command(group(ArgGroup::new("target").required(true).args(["tokens", "model"])))]
    Flops {
        #[arg(long = "N")]
        tokens: Option<usize>,
        #[arg(long, default_value_t = 64, requires = "tokens")]
        dim: usize,
        #[arg(long, default_value_t = 1, requires = "tokens")]
        heads: usize,
        #[arg(long, value_enum, requires = "resolution")]
        model: Option<ModelArg>,
        #[arg(long, requires = "model")]
        resolution: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Fft,
    Bccb,
    Attention,
    Grad,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Fft => Suite::Fft,
            SuiteArg::Bccb => Suite::Bccb,
            SuiteArg::Attention => Suite::Attention,
            SuiteArg::Grad => Suite::Grad,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ImplArg {
    #[value(name = "ca_fast")]
    CaFast,
    #[value(name = "ca_naive")]
    CaNaive,
    #[value(name = "sa_reference")]
    SaReference,
}

impl From<ImplArg> for BenchImpl {
    fn from(i: ImplArg) -> Self {
        match i {
            ImplArg::CaFast => BenchImpl::CaFast,
            ImplArg::CaNaive => BenchImpl::CaNaive,
            ImplArg::SaReference => BenchImpl::SaReference,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    #[value(name = "deit-t")]
    DeitT,
    #[value(name = "ca-deit-t")]
    CaDeitT,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::SpectralResidue { .. } => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

fn write_file(path: &Path, contents: &str) -> circattn::Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn verify(suite: Suite, seed: u64, cases: usize) -> circattn::Result<u8> {
    if cases == 0 {
        return Err(Error::Domain("--cases must be at least 1".into()));
    }
    let outcomes = run_suite(suite, seed, cases)?;
    let mut stdout = io::stdout().lock();
    for o in &outcomes {
        let _ = writeln!(stdout, "{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    eprintln!("{} properties, {failed} failed", outcomes.len());
    Ok(if failed == 0 { 0 } else { EXIT_FAILED })
}

fn project(input: &Path, grid: GridShape, out_kernel: Option<&Path>, report: Option<&Path>) -> circattn::Result<u8> {
    let a = read_matrix_csv(input)?;
    let result = bccb_similarity_report(&a, grid)?;
    let json = result.to_json();
    if let Some(path) = out_kernel {
        let flat: Vec<f64> = result.kernel.iter().flatten().copied().collect();
        write_matrix_csv(path, &DenseMatrix::new(1, flat.len(), flat)?)?;
    }
    if let Some(path) = report {
        write_file(path, &format!("{json}\n"))?;
    }
    println!("{json}");
    eprintln!("projected {}x{} matrix onto grid {grid}", a.rows(), a.cols());
    Ok(0)
}

fn kernels(seed: u64, grid: GridShape, dim: usize, count: usize, out_dir: &Path) -> circattn::Result<u8> {
    if dim == 0 {
        return Err(Error::Domain("--dim must be positive".into()));
    }
    if count == 0 {
        return Ok(0);
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut rng = SplitMix64::new(seed);
    for i in 0..count {
        let q = SequenceTensor::random(grid, dim, &mut rng, -1.0, 1.0);
        let k = SequenceTensor::random(grid, dim, &mut rng, -1.0, 1.0);
        let kernel = extract_equivalent_kernel(&q, &k)?;
        export_kernel_pgm(&kernel, &out_dir.join(format!("kernel_{i}.pgm")))?;
        let flat: Vec<f64> = kernel.iter().flatten().copied().collect();
        let m = DenseMatrix::new(grid.height(), grid.width(), flat)?;
        write_matrix_csv(&out_dir.join(format!("kernel_{i}.csv")), &m)?;
    }
    eprintln!("wrote {count} kernels to {}", out_dir.display());
    Ok(0)
}

fn bench(config: SweepConfig, out: Option<&Path>) -> circattn::Result<u8> {
    let rows = wallclock_sweep(&config)?;
    let mut csv = format!("{CSV_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    match out {
        Some(path) => {
            write_file(path, &csv)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn flops(tokens: Option<usize>, dim: usize, heads: usize, model: Option<ModelArg>, resolution: Option<usize>) -> circattn::Result<u8> {
    let value = match (tokens, model, resolution) {
        (Some(n), None, None) => serde_json::to_value(attention_flops(n, dim, heads)?).expect("report serializes"),
        (None, Some(model), Some(resolution)) => {
            let (name, spec) = match model {
                ModelArg::DeitT => ("deit-t", BlockModelSpec::deit_tiny()),
                ModelArg::CaDeitT => ("ca-deit-t", BlockModelSpec::ca_deit_tiny()),
            };
            let n = tokens_for_resolution(resolution, DEIT_PATCH)?;
            json!({
                "model": name,
                "resolution": resolution,
                "N": n,
                "flops": model_flops(&spec, n)?,
            })
        }
        _ => return Err(Error::Domain("use either --N or --model with --resolution".into())),
    };
    println!("{value}");
    Ok(0)
}

fn run(cli: Cli) -> circattn::Result<u8> {
    match cli.command {
        Command::Verify { suite, seed, cases } => verify(suite.into(), seed, cases),
        Command::Project {
            input,
            grid,
            out_kernel,
            report,
        } => project(&input, grid, out_kernel.as_deref(), report.as_deref()),
        Command::Kernels {
            seed,
            grid,
            dim,
            count,
            out_dir,
        } => kernels(seed, grid, dim, count, &out_dir),
        Command::Bench {
            implementation,
            grids,
            dim,
            heads,
            reps,
            seed,
            out,
            allow_large,
        } => bench(
            SweepConfig {
                implementation: implementation.into(),
                grids,
                d: dim,
                heads,
                reps,
                seed,
                guard: SizeGuard::from_flag(allow_large),
            },
            out.as_deref(),
        ),
        Command::Flops {
            tokens,
            dim,
            heads,
            model,
            resolution,
        } => flops(tokens, dim, heads, model, resolution),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
