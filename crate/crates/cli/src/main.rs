use std::io::stdout;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use finsler_cli::output::{self, Timing};
use finsler_cli::{corpus, run, CliError, CorpusConfig, Geometry, RunConfig, RunReport, Status};
use finsler_core::analysis::{identity_sweep, inequality_sweep, sweep_families};
use finsler_core::model1d::{solve_model, OneDModel};
use finsler_core::CheckReport;

#[derive(Parser)]
#[command(
    name = "finsler",
    version,
    about = "Anisotropic eigenvalue bounds on convex polygons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and run its checks.
    Eig(EigArgs),
    /// Anisotropic diameter and inscribed radius only.
    Geom {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the 1-D comparison model.
    Model1d(ModelArgs),
    /// Identity and inequality sweeps over the built-in norm families.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of configurations.
    Corpus {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = default_parallelism())]
        parallelism: usize,
        #[arg(long, default_value = "corpus-out")]
        out: PathBuf,
    },
    /// Re-render a stored run report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct EigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the solver seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the refinement schedule.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
    #[arg(long)]
    dump_eigenfunction: Option<PathBuf>,
    /// Directory for `report.json`; defaults to the config's output dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Left endpoints; `inf` selects the flat model.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1,10,100,1000")]
    a: Vec<f64>,
    /// Also write `profile_XX.csv` samples for each `a`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Eig(args) => eig(args),
        Command::Geom { config } => geom(&config),
        Command::Model1d(args) => model1d(args),
        Command::Check { seed, samples, out } => check(seed, samples, out.as_deref()),
        Command::Corpus {
            config,
            parallelism,
            out,
        } => run_corpus(&config, parallelism, &out),
        Command::Report { input } => report(&input),
    }
}

fn eig(args: EigArgs) -> Result<Status, CliError> {
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
    }
    if let Some(levels) = args.levels {
        config.solver.levels = levels;
    }
    let out = run(&config);
    let r = &out.report;
    output::print(&mut stdout(), &output::render_text(r))?;
    if let Some(dir) = args.out.or_else(|| config.output.dir.clone()) {
        output::write_file(&dir.join("report.json"), output::to_json(r).as_bytes())?;
    }
    if let (Some(mesh), Some(eigen)) = (&out.mesh, &out.eigen) {
        if let Some(p) = args.dump_mesh.or_else(|| config.output.dump_mesh.clone()) {
            output::write_file(&p, &output::mesh_text(mesh))?;
        }
        if let Some(p) = args
            .dump_eigenfunction
            .or_else(|| config.output.dump_eigenfunction.clone())
        {
            output::write_file(&p, &output::eigenfunction_csv(mesh, eigen))?;
        }
    }
    if let Some(e) = &r.error {
        eprintln!("error: {e}");
    }
    Ok(r.status)
}

fn geom(path: &Path) -> Result<Status, CliError> {
    let config = RunConfig::from_path(path)?;
    let validated = config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    match Geometry::compute(&config, &validated.polygon) {
        Ok(g) => {
            output::print(&mut stdout(), &output::to_json(&g))?;
            Ok(Status::Pass)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(Status::NumericalError)
        }
    }
}

fn model1d(args: ModelArgs) -> Result<Status, CliError> {
    let mut solutions = Vec::with_capacity(args.a.len());
    for &a in &args.a {
        let model = if a.is_infinite() {
            OneDModel::at_infinity(args.n, args.lambda)
        } else {
            OneDModel::radial(args.n, args.lambda, a)
        };
        match solve_model(&model) {
            Ok(s) => solutions.push(s),
            Err(e) => {
                let status = if matches!(e, finsler_core::Error::Config(_)) {
                    Status::ConfigError
                } else {
                    Status::NumericalError
                };
                eprintln!("error: a = {a}: {e}");
                return Ok(status);
            }
        }
    }
    let table = output::model_table_csv(&solutions);
    output::print(
        &mut stdout(),
        std::str::from_utf8(&table).expect("csv is utf-8"),
    )?;
    if let Some(dir) = args.out {
        output::write_file(&dir.join("delta_m.csv"), &table)?;
        for (i, s) in solutions.iter().enumerate() {
            output::write_file(
                &dir.join(format!("profile_{i:02}.csv")),
                &output::model_samples_csv(s),
            )?;
        }
    }
    Ok(Status::Pass)
}

fn check(seed: u64, samples: usize, out: Option<&Path>) -> Result<Status, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let mut reports: Vec<CheckReport> = Vec::new();
    for spec in sweep_families() {
        let sweeps = identity_sweep(&spec, samples, seed)
            .and_then(|a| Ok(a.into_iter().chain(inequality_sweep(&spec, samples, seed)?)));
        match sweeps {
            Ok(r) => reports.extend(r),
            Err(e) => {
                eprintln!("error: {}: {e}", spec.label());
                return Ok(Status::NumericalError);
            }
        }
    }
    let mut text = String::new();
    for r in &reports {
        let norm = r.metadata.get("norm").map(String::as_str).unwrap_or("-");
        text.push_str(&format!(
            "{:<5} {:<20} {:<28} worst {:+.6e}  threshold {:.1e}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            norm,
            r.worst_violation,
            r.threshold
        ));
    }
    output::print(&mut stdout(), &text)?;
    if let Some(dir) = out {
        output::write_file(
            &dir.join("checks.json"),
            output::to_json(&reports).as_bytes(),
        )?;
    }
    Ok(if reports.iter().all(|r| r.pass) {
        Status::Pass
    } else {
        Status::CheckFailure
    })
}

fn run_corpus(path: &Path, parallelism: usize, out: &Path) -> Result<Status, CliError> {
    let configs = CorpusConfig::from_path(path)?.expand();
    let start = Instant::now();
    let result = corpus(&configs, parallelism)?;
    let total = start.elapsed().as_secs_f64();
    output::write_file(&out.join("summary.csv"), &output::summary_csv(&result.rows))?;
    for (i, r) in result.reports.iter().enumerate() {
        output::write_file(
            &out.join("runs").join(format!("run_{i:03}.json")),
            output::to_json(r).as_bytes(),
        )?;
    }
    let timing = Timing {
        total_seconds: total,
        runs: result.seconds.clone(),
    };
    output::write_file(
        &out.join("timing.json"),
        output::to_json(&timing).as_bytes(),
    )?;
    let status = result.status();
    let failed = result
        .rows
        .iter()
        .filter(|r| r.status != Status::Pass)
        .count();
    println!(
        "{} runs, {} failed, {:.1} s -> {}",
        result.rows.len(),
        failed,
        total,
        out.display()
    );
    Ok(status)
}

fn report(path: &Path) -> Result<Status, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let r: RunReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    output::print(&mut stdout(), &output::render_text(&r))?;
    Ok(r.status)
}
