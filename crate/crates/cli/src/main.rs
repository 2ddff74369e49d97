//! `cfh`: build, certify, map and export conformally flat hypersurfaces.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration error,
//! 3 domain or interval error, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfh_core::charts::catalog;
use cfh_core::config::{catalog_configs, RunConfig};
use cfh_core::export::{export, sample_grid, write_grid};
use cfh_core::pipeline::{build, map_cyclic, verify};
use cfh_core::report::ResidualReport;
use cfh_core::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cfh", version, about = "Cyclic conformally flat hypersurfaces: construction and certification")]
struct Cli {
    /// JSON run configuration; output paths in it are relative to its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct the patch; write a summary and the sampled grid.
    Build,
    /// Run the certification suite on the build grid.
    Verify,
    /// Map into R^4 and run the cyclic suite; write residuals and fits.
    MapCyclic,
    /// Write slice meshes and curvature lines as OBJ or PLY.
    Export,
    /// List chart kinds, their parameters and the reference builds.
    Catalog,
}

struct Run {
    cfg: RunConfig,
    text: String,
    out: PathBuf,
}

fn load(path: Option<&Path>) -> Result<Run> {
    let path = path.ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let (cfg, text) = RunConfig::from_file(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let out = base.join(&cfg.outputs.dir);
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    Ok(Run { cfg, text, out })
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_report(run: &Run, stem: &str, report: &ResidualReport) -> Result<()> {
    write(&run.out.join(format!("{stem}.json")), report.to_json())?;
    let csv = run.out.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    report.write_csv(std::io::BufWriter::new(file))
}

fn summarize(report: &ResidualReport) {
    for c in &report.checks {
        let tag = if c.diagnostic { " (diagnostic)" } else { "" };
        println!(
            "{:<22} {:>5} n={:<6} worst={:<11.3e} tol={:.1e}{tag}",
            c.name,
            format!("{:?}", c.verdict).to_lowercase(),
            c.count,
            c.worst_scaled(),
            c.tolerance
        );
    }
    if report.excluded > 0 {
        println!("excluded samples: {}", report.excluded);
    }
    println!("verdict: {}", if report.passed() { "pass" } else { "fail" });
}

fn verdict_code(report: &ResidualReport) -> u8 {
    if report.passed() {
        0
    } else {
        1
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match cli.command {
        Command::Catalog => {
            let body = serde_json::json!({
                "charts": catalog(),
                "maps": ["phi", "phi_sphere", "phi_hyperbolic", "identity_product", "inversion"],
                "reference_builds": catalog_configs()
                    .into_iter()
                    .map(|(name, cfg)| serde_json::json!({ "name": name, "config": cfg }))
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&body)?);
            Ok(0)
        }
        Command::Build => {
            let run = load(cli.config.as_deref())?;
            let b = build(&run.cfg)?;
            write(&run.out.join("build.json"), serde_json::to_string_pretty(&b.summary(&run.text))?)?;
            let samples = sample_grid(&b)?;
            let files = write_grid(&samples, &b, run.cfg.outputs.grid_format, &run.text, &run.out)?;
            println!("interval ({}, {}), window ({}, {})", b.interval.0, b.interval.1, b.window.0, b.window.1);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Verify => {
            let run = load(cli.config.as_deref())?;
            let b = build(&run.cfg)?;
            let report = verify(&b, &run.cfg, &run.text)?;
            write_report(&run, "verify", &report)?;
            summarize(&report);
            Ok(verdict_code(&report))
        }
        Command::MapCyclic => {
            let run = load(cli.config.as_deref())?;
            let b = build(&run.cfg)?;
            let (report, fits) = map_cyclic(&b, &run.cfg, &run.text)?;
            write_report(&run, "map_cyclic", &report)?;
            write(&run.out.join("fits.json"), fits.to_json())?;
            summarize(&report);
            Ok(verdict_code(&report))
        }
        Command::Export => {
            let run = load(cli.config.as_deref())?;
            let b = build(&run.cfg)?;
            for f in export(&b, &run.cfg, &run.text, &run.out)? {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
