mod commands;
mod error;
mod scene;

use clap::{Parser, Subcommand};
use commands::{Outcome, RenderArgs};
use error::CliError;
use scene::Scene;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch computations with topological measures on planar grids.
///
/// Every command reads a JSON scene and writes CSV. Exit codes: 0 pass,
/// 1 property failure, 2 reference error, 3 I/O error.
#[derive(Parser)]
#[command(name = "topomeasure", version)]
struct Cli {
    /// Scene document (JSON)
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Seed for every random choice (overrides the scene seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file: the raster for `render`, the CSV otherwise (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Convergence tolerance (overrides the scene value)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample budget for the property checkers (overrides the scene value)
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Worker threads
    #[arg(long, global = true, env = "TOPOMEASURE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the axioms of a measure or an image transformation
    Axioms { name: String },
    /// Evaluate a measure on regions (all scene regions when none are given)
    Eval { measure: String, regions: Vec<String> },
    /// Quasi-integral of a function against a measure
    Integrate { measure: String, function: String },
    /// Exact W1 between point clouds, or a KR lower bound between grid measures
    Kr { first: String, second: String },
    /// Iterate a Markov operator and report the distance trace
    Markov {
        system: String,
        #[arg(long, default_value_t = 12)]
        steps: usize,
        /// Starting point cloud (affine systems) or measure (grid systems)
        #[arg(long)]
        start: Option<String>,
    },
    /// Chaos-game rendering of an affine system to a PPM raster
    Render {
        system: String,
        #[arg(long, default_value_t = 200_000)]
        points: usize,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[arg(long, default_value_t = 20)]
        burn_in: usize,
        /// x0,x1,y0,y1 (the bounding box of the points when absent)
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        bounds: Option<Vec<f64>>,
    },
    /// Distribution of the sample median of a family
    Median { family: String },
}

fn write_csv(rows: &[Vec<String>], out: &mut impl Write) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Reference(format!("thread pool: {e}")))?;
    }
    let path = cli.scene.as_ref().ok_or_else(|| CliError::Reference("--scene is required".into()))?;
    let scene = Scene::load(path)?;
    let seed = cli.seed.or(scene.file.seed);
    let tol = cli.tol.unwrap_or(scene.tol());
    let budget = cli.budget.unwrap_or(scene.budget());
    match &cli.command {
        Command::Axioms { name } => commands::axioms(&scene, name, budget, seed),
        Command::Eval { measure, regions } => commands::eval(&scene, measure, regions),
        Command::Integrate { measure, function } => commands::integrate(&scene, measure, function),
        Command::Kr { first, second } => commands::kr(&scene, first, second, budget, seed),
        Command::Markov { system, steps, start } => commands::markov(&scene, system, *steps, start.as_deref(), tol, seed),
        Command::Render {
            system,
            points,
            resolution,
            burn_in,
            bounds,
        } => {
            let bounds = match bounds.as_deref() {
                None => None,
                Some(&[x0, x1, y0, y1]) => Some([x0, x1, y0, y1]),
                Some(b) => return Err(CliError::Reference(format!("--bounds takes 4 numbers, got {}", b.len()))),
            };
            let args = RenderArgs {
                points: *points,
                resolution: *resolution,
                burn_in: *burn_in,
                bounds,
                out: cli.out.as_deref(),
            };
            commands::render(&scene, system, args, seed)
        }
        Command::Median { family } => commands::median(&scene, family),
    }
}

fn emit(cli: &Cli, rows: &[Vec<String>]) -> Result<(), CliError> {
    match &cli.out {
        Some(path) if !matches!(cli.command, Command::Render { .. }) => {
            let mut f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_csv(rows, &mut f)
        }
        _ => write_csv(rows, &mut std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        emit(&cli, &outcome.rows)?;
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            if let CliError::Property(msg) = &e {
                let _ = write_csv(&[vec!["error".into(), msg.clone()]], &mut std::io::stdout().lock());
            }
            eprintln!("topomeasure: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
