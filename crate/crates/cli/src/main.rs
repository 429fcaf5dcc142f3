//! Batch front-end: reads one JSON run configuration, evaluates every grid
//! point on a worker pool and writes CSV or JSON tables.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{columns, expand, run_point, PointOutput};
use config::{Command, Format, RunConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

const CSV_HELP: &str = "\
CSV columns by command (floats carry 17 significant digits; nan marks a value
with no limit counterpart):
  sweep       d,L,beta,mu,rho_total,rho_zero,rho_Dminus,rho_Dplus,max_mode_fraction,tail_bound,rho_c_I,mu_limit,rho_limit,rho_0_I
  solve-mu    d,L,beta,rho,mu,rho_achieved,mu_limit
  genfun      d,L,beta,mu,e_finite,e_limit,gap,tail_bound
  condense    d,L,beta,mu,delta,shell_density,max_mode_fraction,rho_zero,macroscopic_modes,classification
  kac-check   d,beta,rho,rho_c,residual
  equiv       d,L,beta,rho,N,mu,e_canonical,e_grand,gap
  scaling     beta,rho,L,V,mu,flagged   (a JSON fit document is always written too)
  positivity  d,L,beta,axis,value,size,min_eigenvalue

Rows follow grid order: beta outermost, then L, then mu or rho.
Output files are named <command>_<hash>.<ext>, the hash taken over the
parsed configuration.

Exit status: 0 success, 2 invalid configuration or arguments outside the
model's domain, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "diagbose", version, about = "Finite-volume and limit computations for a diagonal Bose gas")]
#[command(after_help = CSV_HELP)]
struct Cli {
    /// JSON run configuration (schema v1).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides output.path, defaults to the current directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; affects wall time only.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

/// A failed run: message plus exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }
}

fn library_failure(context: &str, e: &diagbose::Error) -> Failure {
    use diagbose::Error::*;
    let message = format!("{context}: {e}");
    match e {
        Domain(_) | Divergence(_) => Failure::validation(message),
        Numeric { .. } | Resource(_) | Solver { .. } => Failure::numeric(message),
    }
}

fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(&serde_json::to_value(cfg).expect("config serializes")).expect("json");
    hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
}

fn csv_bytes(command: Command, results: &[PointOutput]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::numeric(format!("csv: {e}"));
    w.write_record(columns(command)).map_err(io)?;
    for r in results {
        for row in &r.rows {
            w.write_record(row.iter().map(|c| c.render())).map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| Failure::numeric(format!("csv: {e}")))
}

fn json_bytes(cfg: &RunConfig, results: &[PointOutput]) -> Vec<u8> {
    let doc = json!({
        "config": cfg,
        "results": results.iter().map(|r| r.json.clone()).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json");
    text.push('\n');
    text.into_bytes()
}

/// Writes every file under a temporary name first, then renames them all.
fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::validation(format!("output {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut staged = Vec::new();
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(io(&tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(|e| io(dest, e))?;
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Failure::validation(format!("config: cannot read {}: {e}", cli.config.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| Failure::validation(e.to_string()))?;
    if cli.threads == Some(0) {
        return Err(Failure::validation("threads: must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::numeric(format!("thread pool: {e}")))?;

    let points = expand(&cfg);
    let outcomes: Vec<_> = pool.install(|| points.par_iter().map(|p| run_point(&cfg, p)).collect());
    let total = points.len();
    let mut results = Vec::with_capacity(total);
    for (i, (pt, outcome)) in points.iter().zip(outcomes).enumerate() {
        let where_ = format!("[{}/{total}] {}", i + 1, pt.describe(cfg.axis()));
        match outcome {
            Ok(r) => {
                eprintln!("{where_}: {}", r.summary);
                results.push(r);
            }
            Err(e) => {
                eprintln!("{where_}: error");
                return Err(library_failure(&format!("grid point {}", i + 1), &e));
            }
        }
    }

    let stem = format!("{}_{}", cfg.command.name(), config_hash(&cfg));
    let mut files = Vec::new();
    if cfg.output.format == Format::Csv || cfg.command == Command::Scaling {
        files.push((format!("{stem}.csv"), csv_bytes(cfg.command, &results)?));
    }
    if cfg.output.format == Format::Json || cfg.command == Command::Scaling {
        files.push((format!("{stem}.json"), json_bytes(&cfg, &results)));
    }
    let dir = cli.out.clone().or_else(|| cfg.output.path.clone().map(PathBuf::from)).unwrap_or_else(|| ".".into());
    write_all(&dir, &files)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_column_set() {
        for cmd in [
            Command::Sweep,
            Command::SolveMu,
            Command::Genfun,
            Command::Condense,
            Command::KacCheck,
            Command::Equiv,
            Command::Scaling,
            Command::Positivity,
        ] {
            let line = format!("{:<12}{}", cmd.name(), columns(cmd).join(","));
            assert!(CSV_HELP.contains(&line), "{line}");
        }
    }
}
