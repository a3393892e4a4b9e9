//! `momrank` — compute moment-relaxation lower bounds on the cp-rank and
//! the nonnegative rank, certify non-complete-positivity, extract atomic
//! factorizations, export programs in SDPA format, reproduce published
//! tables, and generate random sparse cp instances.
//!
//! Exit codes: 0 success (an infeasibility certificate is a successful,
//! meaningful answer), 2 parse/argument error, 3 solver returned Unknown,
//! 4 infeasible by support structure alone, 5 reproduction mismatch,
//! 1 other I/O or runtime failure.

mod report;
mod suites;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momrank_core::certify::{self, AtomicMeasure};
use momrank_core::cprank::{cp_bound_opts, cp_spec, CpBoundRequest};
use momrank_core::momrelax::{build_dense, build_isp};
use momrank_core::nnrank::{nn_bound_opts, nn_spec, NnBoundRequest};
use momrank_core::{
    conic, instances, CpInstance, CpMode, Error as CoreError, MatrixScope, NnInstance, NnMode,
    SolveOptions, Status, Strength,
};
use report::{
    bound_row, AtomRow, ExtractionSummary, GenReport, GenSidecar, InstanceDesc, ReproReport,
    RunReport, Totals, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "momrank",
    version,
    about = "Moment-relaxation lower bounds on cp-rank and nonnegative rank"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a lower bound for a matrix
    Bound(BoundArgs),
    /// Bound, then test flatness, extract atoms, and rebuild the matrix
    Extract(ExtractArgs),
    /// Re-run a bundled suite and diff against published values
    Repro(ReproArgs),
    /// Write a relaxation in sparse SDPA format
    ExportSdpa(ExportArgs),
    /// Generate a random sparse completely positive matrix
    Gen(GenArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum Family {
    /// completely positive factorization (symmetric input)
    Cp,
    /// nonnegative factorization (rectangular input)
    Nn,
}

impl Family {
    fn as_str(self) -> &'static str {
        match self {
            Family::Cp => "cp",
            Family::Nn => "nn",
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// matrix family
    #[arg(value_enum)]
    family: Family,
    /// matrix file in the documented text format, or a built-in name
    /// (ex1..ex7, eqA, sep_cp(m), S(a,b), edm(n), identity(n))
    #[arg(long)]
    matrix: String,
    /// relaxation level
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// dense | isp | wisp (wisp is cp-only)
    #[arg(long, default_value = "dense")]
    mode: String,
    /// plain | dagger | ddagger
    #[arg(long, default_value = "plain")]
    strength: String,
    /// print the full-precision JSON report
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// print CSV rows (numeric fields match the JSON encoding exactly)
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    bound: BoundArgs,
    /// relative rank tolerance for flatness checks and extraction
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
}

#[derive(Copy, Clone, ValueEnum)]
enum Suite {
    #[value(name = "table1-t1")]
    Table1T1,
    #[value(name = "table3")]
    Table3,
    #[value(name = "table5-t1")]
    Table5T1,
    #[value(name = "figure3")]
    Figure3,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// parameter a of S(a,1) for the figure3 suite
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// write <suite>.json and <suite>.csv into this directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads for the suite (default: logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long, default_value = "dense")]
    mode: String,
    #[arg(long, default_value = "plain")]
    strength: String,
    /// output .dat-s file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// matrix size
    #[arg(long)]
    n: usize,
    /// number of nonzero entries above the diagonal (n-1 ..= n(n-1)/2)
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// rank-one factors per covering clique
    #[arg(long, default_value_t = 2)]
    m_k: usize,
    /// matrix file to write; metadata goes to <out>.json
    #[arg(long)]
    out: PathBuf,
    /// print the JSON report instead of a summary line
    #[arg(long)]
    json: bool,
}

/// An error with the exit code it maps to.
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn parse(msg: impl ToString) -> Failure {
        Failure {
            code: 2,
            msg: msg.to_string(),
        }
    }

    fn io(msg: impl ToString) -> Failure {
        Failure {
            code: 1,
            msg: msg.to_string(),
        }
    }
}

/// Build/solve errors: an equality made unsatisfiable by the support
/// structure is its own exit code; everything else is an argument problem.
fn bound_failure(e: CoreError) -> Failure {
    let code = match e {
        CoreError::InfeasibleBySupport { .. } => 4,
        _ => 2,
    };
    Failure {
        code,
        msg: e.to_string(),
    }
}

fn exit_for_status(status: Status) -> i32 {
    if status == Status::Unknown {
        3
    } else {
        0
    }
}

enum LoadedInstance {
    Cp(CpInstance),
    Nn(NnInstance),
}

impl LoadedInstance {
    fn descriptor(&self, source: &str) -> InstanceDesc {
        match self {
            LoadedInstance::Cp(cp) => InstanceDesc {
                kind: "cp".into(),
                source: source.into(),
                rows: cp.a.nrows(),
                cols: cp.a.ncols(),
            },
            LoadedInstance::Nn(nn) => InstanceDesc {
                kind: "nn".into(),
                source: source.into(),
                rows: nn.mat.nrows(),
                cols: nn.mat.ncols(),
            },
        }
    }
}

/// A matrix argument names either a file in the text format or a built-in.
fn load_instance(family: Family, matrix: &str) -> Result<LoadedInstance, Failure> {
    if Path::new(matrix).exists() {
        let text = fs::read_to_string(matrix)
            .map_err(|e| Failure::parse(format!("cannot read {matrix}: {e}")))?;
        let m = instances::parse_matrix(&text).map_err(Failure::parse)?;
        match family {
            Family::Cp => CpInstance::new(m).map(LoadedInstance::Cp),
            Family::Nn => NnInstance::new(m).map(LoadedInstance::Nn),
        }
        .map_err(Failure::parse)
    } else {
        match family {
            Family::Cp => instances::builtin_cp(matrix).map(LoadedInstance::Cp),
            Family::Nn => instances::builtin_nn(matrix).map(LoadedInstance::Nn),
        }
        .map_err(|e| {
            Failure::parse(format!(
                "'{matrix}' is neither a readable file nor a built-in name: {e}"
            ))
        })
    }
}

fn print_run_report(r: &RunReport, json: bool, csv: bool) {
    if json {
        println!("{}", r.to_json());
    } else if csv {
        print!("{}", r.to_csv());
    } else {
        print!("{}", r.to_text());
    }
}

/// Solve the requested bound; shared by `bound` and `extract`.
fn run_bound(
    inst: &LoadedInstance,
    t: usize,
    mode: &str,
    strength_arg: &str,
    opts: &SolveOptions,
) -> Result<(momrank_core::BoundResult, String, String), Failure> {
    let strength: Strength = strength_arg.parse().map_err(Failure::parse)?;
    match inst {
        LoadedInstance::Cp(cp) => {
            let mode: CpMode = mode.parse().map_err(Failure::parse)?;
            let req = CpBoundRequest { t, mode, strength };
            let res = cp_bound_opts(cp, &req, opts).map_err(bound_failure)?;
            Ok((res, mode.to_string(), strength.to_string()))
        }
        LoadedInstance::Nn(nn) => {
            let mode: NnMode = mode.parse().map_err(Failure::parse)?;
            let req = NnBoundRequest { t, mode, strength };
            let res = nn_bound_opts(nn, &req, opts).map_err(bound_failure)?;
            Ok((res, mode.to_string(), strength.to_string()))
        }
    }
}

fn cmd_bound(args: BoundArgs) -> Result<i32, Failure> {
    let started = Instant::now();
    let inst = load_instance(args.family, &args.matrix)?;
    let opts = SolveOptions::from_env();
    let (res, mode, strength) = run_bound(&inst, args.t, &args.mode, &args.strength, &opts)?;
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: format!(
            "bound {} --matrix {} --t {} --mode {} --strength {}",
            args.family.as_str(),
            args.matrix,
            args.t,
            mode,
            strength
        ),
        instance: inst.descriptor(&args.matrix),
        rows: vec![bound_row(&args.matrix, args.t, &mode, &strength, &res)],
        flatness: None,
        extraction: None,
        solver: (&opts).into(),
        totals: Totals {
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    };
    print_run_report(&report, args.json, args.csv);
    Ok(exit_for_status(res.status))
}

fn atom_rows(measures: &[AtomicMeasure]) -> Vec<AtomRow> {
    measures
        .iter()
        .flat_map(|m| {
            m.atoms.iter().map(|a| AtomRow {
                clique: m.clique.clone(),
                weight: a.weight,
                point: a.point.clone(),
            })
        })
        .collect()
}

fn cmd_extract(args: ExtractArgs) -> Result<i32, Failure> {
    let started = Instant::now();
    let b = &args.bound;
    let inst = load_instance(b.family, &b.matrix)?;
    let opts = SolveOptions::from_env();
    let (res, mode, strength) = run_bound(&inst, b.t, &b.mode, &b.strength, &opts)?;

    let mut flatness = None;
    let mut extraction = None;
    if res.status == Status::Optimal {
        flatness = Some(certify::flatness_report(
            &res.pseudo_moments,
            b.t,
            1,
            args.rank_tol,
        ));
        extraction = Some(
            match certify::extract_atoms_all(&res.pseudo_moments, b.t, args.rank_tol) {
                Ok(measures) => {
                    let residual = match &inst {
                        LoadedInstance::Cp(cp) => certify::reconstruct_cp(&measures, &cp.a).1,
                        LoadedInstance::Nn(nn) => certify::reconstruct_nn(&measures, &nn.mat).1,
                    };
                    ExtractionSummary {
                        atoms: AtomicMeasure::total_atoms(&measures),
                        residual: Some(residual),
                        error: None,
                        atom_rows: atom_rows(&measures),
                    }
                }
                Err(e) => ExtractionSummary {
                    atoms: 0,
                    residual: None,
                    error: Some(e.to_string()),
                    atom_rows: Vec::new(),
                },
            },
        );
    }

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: format!(
            "extract {} --matrix {} --t {} --mode {} --strength {} --rank-tol {}",
            b.family.as_str(),
            b.matrix,
            b.t,
            mode,
            strength,
            args.rank_tol
        ),
        instance: inst.descriptor(&b.matrix),
        rows: vec![bound_row(&b.matrix, b.t, &mode, &strength, &res)],
        flatness,
        extraction,
        solver: (&opts).into(),
        totals: Totals {
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    };
    print_run_report(&report, b.json, b.csv);
    Ok(exit_for_status(res.status))
}

fn cmd_repro(args: ReproArgs) -> Result<i32, Failure> {
    let started = Instant::now();
    let (name, cells) = match args.suite {
        Suite::Table1T1 => ("table1-t1", suites::table1_t1()),
        Suite::Table3 => ("table3", suites::table3()),
        Suite::Table5T1 => ("table5-t1", suites::table5_t1()),
        Suite::Figure3 => ("figure3", suites::figure3(args.a)),
    };
    let rows = suites::run_cells(&cells, args.jobs);
    let passed = rows.iter().filter(|c| c.pass).count();
    let failed = rows.len() - passed;
    let opts = SolveOptions::from_env();
    let mut command = format!("repro {name}");
    if matches!(args.suite, Suite::Figure3) {
        command.push_str(&format!(" --a {}", args.a));
    }
    let report = ReproReport {
        schema_version: SCHEMA_VERSION,
        command,
        suite: name.into(),
        cells: rows,
        passed,
        failed,
        solver: (&opts).into(),
        totals: Totals {
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(Failure::io)?;
        fs::write(dir.join(format!("{name}.json")), report.to_json()).map_err(Failure::io)?;
        fs::write(dir.join(format!("{name}.csv")), report.to_csv()).map_err(Failure::io)?;
    }
    if args.json {
        println!("{}", report.to_json());
    } else if args.csv {
        print!("{}", report.to_csv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(if failed == 0 { 0 } else { 5 })
}

fn cmd_export(args: ExportArgs) -> Result<i32, Failure> {
    let inst = load_instance(args.family, &args.matrix)?;
    let strength: Strength = args.strength.parse().map_err(Failure::parse)?;
    let (prog, _) = match &inst {
        LoadedInstance::Cp(cp) => {
            let mode: CpMode = args.mode.parse().map_err(Failure::parse)?;
            let spec = cp_spec(cp, strength);
            match mode {
                CpMode::Dense => build_dense(&spec, args.t),
                CpMode::Isp => build_isp(&spec, args.t, &cp.cliques, MatrixScope::ZeroOutside),
                CpMode::Wisp => build_isp(&spec, args.t, &cp.cliques, MatrixScope::Principal),
            }
        }
        LoadedInstance::Nn(nn) => {
            let mode: NnMode = args.mode.parse().map_err(Failure::parse)?;
            let spec = nn_spec(nn, strength);
            match mode {
                NnMode::Dense => build_dense(&spec, args.t),
                NnMode::Isp => build_isp(&spec, args.t, &nn.bicliques, MatrixScope::ZeroOutside),
            }
        }
    }
    .map_err(bound_failure)?;
    let text = conic::export_sdpa(&prog);
    fs::write(&args.out, text).map_err(Failure::io)?;
    let dims: Vec<usize> = prog.psd_blocks().iter().map(|&(_, d)| d).collect();
    println!(
        "wrote SDPA program to {}: {} equalities, psd blocks {:?}, {} nonneg vars",
        args.out.display(),
        prog.num_equalities(),
        dims,
        prog.nonneg_count(),
    );
    Ok(0)
}

fn cmd_gen(args: GenArgs) -> Result<i32, Failure> {
    let mut cfg = instances::GeneratorConfig::new(args.n, args.m, args.seed);
    cfg.m_k = args.m_k;
    let generated = instances::gen_random_cp(&cfg).map_err(|e| match e {
        CoreError::BadGeneratorConfig(_) => Failure::parse(e),
        other => Failure::io(other),
    })?;
    fs::write(&args.out, instances::format_matrix(&generated.instance.a))
        .map_err(Failure::io)?;
    let mut sidecar_os = args.out.clone().into_os_string();
    sidecar_os.push(".json");
    let sidecar_path = PathBuf::from(sidecar_os);
    let sidecar = GenSidecar {
        seed: args.seed,
        n: args.n,
        m: args.m,
        m_k: args.m_k,
        nzd: generated.nzd,
        factors: generated.factors,
    };
    fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )
    .map_err(Failure::io)?;
    let report = GenReport {
        schema_version: SCHEMA_VERSION,
        command: format!(
            "gen --n {} --m {} --seed {} --m-k {} --out {}",
            args.n,
            args.m,
            args.seed,
            args.m_k,
            args.out.display()
        ),
        seed: args.seed,
        n: args.n,
        m: args.m,
        m_k: args.m_k,
        nzd: generated.nzd,
        factors: generated.factors,
        matrix_path: args.out.display().to_string(),
        sidecar_path: sidecar_path.display().to_string(),
    };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        println!(
            "wrote {0}x{0} matrix (m={1}, nzd={2}, {3} factors) to {4}; metadata in {5}",
            args.n,
            args.m,
            report::sig6(generated.nzd),
            generated.factors,
            args.out.display(),
            sidecar_path.display(),
        );
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    match cli.cmd {
        Cmd::Bound(args) => cmd_bound(args),
        Cmd::Extract(args) => cmd_extract(args),
        Cmd::Repro(args) => cmd_repro(args),
        Cmd::ExportSdpa(args) => cmd_export(args),
        Cmd::Gen(args) => cmd_gen(args),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    };
    std::process::exit(code);
}
