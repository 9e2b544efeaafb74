//! CLI driver: runs the convergence/conditioning studies and inspects meshes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anisofem::adapt::{AdaptMode, LoopOptions};
use anisofem::harness::{self, StudyOptions, DEFAULT_TARGETS};
use anisofem::mesh::{Mesh, Polygon};
use anisofem::problem::TestProblem;

#[derive(Parser)]
#[command(name = "anisofem", version, about = "Anisotropic adaptive FEM studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a study and write CSV plus gnuplot-ready data files.
    Study(StudyArgs),
    /// Mesh file utilities.
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    /// Energy error and estimate vs element count.
    Convergence,
    /// Stiffness condition numbers before/after diagonal scaling.
    Conditioning,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(value_enum)]
    kind: StudyKind,
    /// Adaptation modes to run (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "uniform,isotropic,anisotropic")]
    modes: Vec<String>,
    /// Ascending element-count targets (comma separated).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Quadrature degree for load assembly and error integration.
    #[arg(long, default_value_t = 8)]
    quad_degree: usize,
    /// Relative-change tolerance of the Gauss-Seidel estimate sweeps.
    #[arg(long, default_value_t = 1e-2)]
    gs_tol: f64,
    #[arg(long, default_value_t = 20)]
    gs_max_sweeps: usize,
    /// Seed for the condition-number Lanczos start vectors.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Print a validity report and the maximum aspect ratio.
    Show { file: PathBuf },
}

fn parse_modes(names: &[String]) -> Result<Vec<AdaptMode>, String> {
    names
        .iter()
        .map(|s| AdaptMode::parse(s).ok_or_else(|| format!("unknown mode {s:?}")))
        .collect()
}

fn run_study(args: &StudyArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let modes = parse_modes(&args.modes)?;
    let targets = args.targets.clone().unwrap_or_else(|| DEFAULT_TARGETS.to_vec());
    let opts = StudyOptions {
        loop_opts: LoopOptions {
            quad_degree: args.quad_degree,
            gs_tol: args.gs_tol,
            gs_max_sweeps: args.gs_max_sweeps,
        },
        adapt_params: Default::default(),
        seed: args.seed,
    };
    let p = TestProblem::mitchell_lshape();
    let (name, records) = match args.kind {
        StudyKind::Convergence => (
            "convergence.csv",
            harness::run_convergence_study(&p, &modes, &targets, &opts),
        ),
        StudyKind::Conditioning => (
            "conditioning.csv",
            harness::run_conditioning_study(&p, &modes, &targets, &opts),
        ),
    };
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(name);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    harness::write_csv(&records, &mut f)?;
    drop(f);
    harness::emit_plot_data(&csv_path, &args.out)?;

    let mut failures = 0usize;
    for r in &records {
        match &r.error {
            None => println!(
                "{:<12} N={:<6} error={:.4e} estimate={:.4e} aspect={:.1} ({:.2}s)",
                r.mode.name(),
                r.n,
                r.energy_error,
                r.hb_estimate,
                r.max_aspect,
                r.wall_time
            ),
            Some(e) => {
                failures += 1;
                eprintln!("{:<12} FAILED: {e}", r.mode.name());
            }
        }
    }
    println!("wrote {}", csv_path.display());
    Ok(if failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn mesh_show(file: &PathBuf) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let f = std::fs::File::open(file)?;
    let mesh = Mesh::read_text(&mut std::io::BufReader::new(f), Polygon::lshape())?;
    println!(
        "{}: {} vertices ({} interior), {} triangles",
        file.display(),
        mesh.vertices.len(),
        mesh.n_int(),
        mesh.triangles.len()
    );
    let violations = mesh.validate();
    if violations.is_empty() {
        println!("valid");
    } else {
        for v in &violations {
            println!("violation: {v:?}");
        }
    }
    match mesh.max_aspect_ratio() {
        Ok(a) => println!("max aspect ratio: {a:.3}"),
        Err(e) => println!("max aspect ratio: unavailable ({e})"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Study(args) => run_study(args),
        Cmd::Mesh { cmd: MeshCmd::Show { file } } => mesh_show(file),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
