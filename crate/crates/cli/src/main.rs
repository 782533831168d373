//! Command-line front end: parse algebra/diagram/basis files, run the
//! computations, and emit text, JSON, or DOT reports.
//!
//! Exit codes separate mathematics from usage: 0 success, 1 zero sections
//! (the interesting contextuality outcome), 2 K-group mismatch, 3 saturation
//! cap exceeded, 64 algebra parse errors, 65 malformed input files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ncspec_core::contexts::core_diagram;
use ncspec_core::foundations::{global_sections, ks_diagram};
use ncspec_core::ideals::{saturate, IdealsError};
use ncspec_core::io::{bases_from_json, diagram_from_json, BasesJson, DiagramJson};
use ncspec_core::ktheory::{natural_iso_check, KtheoryError};
use ncspec_core::FdAlgebra;

const EXIT_OK: u8 = 0;
const EXIT_NO_SECTIONS: u8 = 1;
const EXIT_K_MISMATCH: u8 = 2;
const EXIT_CAP_EXCEEDED: u8 = 3;
const EXIT_PARSE: u8 = 64;
const EXIT_BAD_FILE: u8 = 65;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

/// Per-invocation configuration shared by all subcommands.
#[derive(Clone, Debug)]
struct RunConfig {
    tolerance: f64,
    seed: u64,
    max_saturation_rounds: usize,
    output_format: Format,
}

#[derive(Parser)]
#[command(name = "ncspec", version, about = "finite-dimensional operator-algebra workbench")]
struct Cli {
    /// Numeric tolerance for all matrix comparisons
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for any randomized computation (reports record it)
    #[arg(long, global = true, env = "NCSPEC_SEED", default_value_t = 0)]
    seed: u64,
    /// Cap on ideals saturation rounds
    #[arg(long, global = true, default_value_t = 16)]
    rounds: usize,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute both K₀ routes over the core diagram and verify they agree
    K0 { algebra: String },
    /// Run the invariant-family saturation loop and report the bijection
    Ideals { algebra: String },
    /// Count global sections of the diagram built from an orthonormal-basis file
    Ks { file: PathBuf },
    /// Render a diagram file as DOT
    Dot { file: PathBuf },
}

fn parse_algebra(spec: &str, tol: f64) -> Result<FdAlgebra, u8> {
    let parsed: FdAlgebra = spec.parse().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_PARSE
    })?;
    FdAlgebra::with_tolerance(parsed.block_sizes().to_vec(), tol).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_PARSE
    })
}

fn read_file(path: &PathBuf) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_BAD_FILE
    })
}

fn cmd_k0(spec: &str, config: &RunConfig) -> u8 {
    let algebra = match parse_algebra(spec, config.tolerance) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let diagram = match core_diagram(&algebra) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_K_MISMATCH;
        }
    };
    match natural_iso_check(&algebra, &diagram) {
        Ok(report) => {
            match config.output_format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
                _ => {
                    println!(
                        "K0 = {}, Ktilde_f = {}, iso = {}",
                        report.k0, report.ktilde_f, report.iso
                    );
                    for row in &report.generator_table {
                        println!("  {}: k0 {:?} ktilde_f {:?}", row.label, row.k0, row.ktilde_f);
                    }
                }
            }
            EXIT_OK
        }
        Err(e @ (KtheoryError::IsoFailure { .. } | KtheoryError::NaturalityFailure { .. })) => {
            eprintln!("mismatch: {e}");
            EXIT_K_MISMATCH
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_K_MISMATCH
        }
    }
}

fn cmd_ideals(spec: &str, config: &RunConfig) -> u8 {
    let algebra = match parse_algebra(spec, config.tolerance) {
        Ok(a) => a,
        Err(code) => return code,
    };
    match saturate(&algebra, config.max_saturation_rounds) {
        Ok(report) => {
            match config.output_format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
                _ => {
                    println!(
                        "invariant families = {}, bijection = {}, rounds = {}",
                        report.invariant_families, report.bijection, report.rounds
                    );
                    println!("central projections: {}", report.central_projections.join(" "));
                }
            }
            if report.bijection {
                EXIT_OK
            } else {
                EXIT_CAP_EXCEEDED
            }
        }
        Err(e @ IdealsError::SaturationCapExceeded { .. }) => {
            eprintln!("saturation failed: {e}");
            EXIT_CAP_EXCEEDED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CAP_EXCEEDED
        }
    }
}

fn cmd_ks(path: &PathBuf, config: &RunConfig) -> u8 {
    let text = match read_file(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let parsed: BasesJson = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_FILE;
        }
    };
    let bases = match bases_from_json(&parsed) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_FILE;
        }
    };
    let diagram = match ks_diagram(parsed.dim, &bases, config.tolerance) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_FILE;
        }
    };
    let sections = match global_sections(&diagram) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_FILE;
        }
    };
    match config.output_format {
        Format::Json => {
            let doc = serde_json::json!({
                "dim": parsed.dim,
                "bases": parsed.bases.len(),
                "contexts": diagram.contexts().len(),
                "sections": sections.len(),
                "sections_list": sections
                    .iter()
                    .map(|s| s.choices.iter().map(|h| format!("{h:016x}")).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        _ => println!("sections: {}", sections.len()),
    }
    if sections.is_empty() {
        EXIT_NO_SECTIONS
    } else {
        EXIT_OK
    }
}

fn cmd_dot(path: &PathBuf, config: &RunConfig) -> u8 {
    let text = match read_file(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let parsed: DiagramJson = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_FILE;
        }
    };
    match diagram_from_json(&parsed, config.tolerance) {
        Ok(d) => {
            print!("{}", d.to_dot());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_BAD_FILE
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes, like other line-oriented tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let config = RunConfig {
        tolerance: cli.tol,
        seed: cli.seed,
        max_saturation_rounds: cli.rounds,
        output_format: cli.format,
    };
    if !(config.tolerance > 0.0) || config.max_saturation_rounds < 1 {
        eprintln!("error: tolerance must be positive and rounds at least 1");
        return ExitCode::from(EXIT_PARSE);
    }
    let _ = config.seed; // all current commands are deterministic
    let code = match &cli.command {
        Command::K0 { algebra } => cmd_k0(algebra, &config),
        Command::Ideals { algebra } => cmd_ideals(algebra, &config),
        Command::Ks { file } => cmd_ks(file, &config),
        Command::Dot { file } => cmd_dot(file, &config),
    };
    ExitCode::from(code)
}
