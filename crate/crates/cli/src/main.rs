use std::path::PathBuf;
use std::process::ExitCode;

use cellflow::experiments::{
    cmd_mesh, cmd_permeability, cmd_regime_table, cmd_sweep_amplitude, cmd_sweep_rotation, cmd_validate, fmt_sig,
    parse_resolution, RunConfig, SweepOutcome,
};
use cellflow::Error;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Unit-cell Stokes solvers and effective Darcy laws for Carreau and power-law fluids.
#[derive(Parser)]
#[command(name = "cellflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Mesh resolution `h,n_layers`, overrides the cell settings.
    #[arg(long, global = true)]
    resolution: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and export the cell mesh.
    Mesh,
    /// Permeability tensor of the configured cell.
    Permeability,
    /// Filtration velocity against the forcing amplitude.
    SweepAmplitude,
    /// Filtration velocity against the forcing direction.
    SweepRotation,
    /// Effective regime for every (r, gamma) pair.
    RegimeTable,
    /// Oracle and property checks.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Fem(_) => EXIT_SOLVER,
                _ => EXIT_CONFIG,
            })
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(text) = &cli.resolution {
        let (h, n) = parse_resolution(text)?;
        cfg = cfg.with_resolution(h, n);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let cfg = load(cli)?;
    faer::set_global_parallelism(faer::Par::Seq);
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;

    match cli.command {
        Command::Mesh => {
            let m = cmd_mesh(&cfg)?;
            println!(
                "tets {} vertices {} volume {} (expected {})",
                m.report.n_tets,
                m.report.n_vertices,
                fmt_sig(m.report.volume),
                fmt_sig(m.expected_volume)
            );
            print_files(&m.files);
        }
        Command::Permeability => {
            let p = cmd_permeability(&cfg)?;
            for t in &p.tensors {
                println!(
                    "{:?}: [[{}, {}], [{}, {}]]",
                    t.form,
                    fmt_sig(t.a[0][0]),
                    fmt_sig(t.a[0][1]),
                    fmt_sig(t.a[1][0]),
                    fmt_sig(t.a[1][1])
                );
            }
            print_files(&p.files);
        }
        Command::SweepAmplitude => return Ok(report_sweep(cmd_sweep_amplitude(&cfg)?)),
        Command::SweepRotation => return Ok(report_sweep(cmd_sweep_rotation(&cfg)?)),
        Command::RegimeTable => {
            let (table, files) = cmd_regime_table(&cfg)?;
            print!("{}", table.render());
            print_files(&files);
        }
        Command::Validate => {
            let report = cmd_validate(&cfg)?;
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            print_files(&report.files);
            if !report.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(0)
}

fn report_sweep(s: SweepOutcome) -> u8 {
    println!("{} points, {} failed", s.records.len(), s.failures());
    print_files(&s.files);
    if s.failures() > 0 {
        EXIT_SOLVER
    } else {
        0
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}
