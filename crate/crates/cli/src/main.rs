use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sdviab_cli::commands::{exit_code, format_bracket, format_projection, project, run_approx, run_oracle, write_approx};
use sdviab_cli::config::{self, ProblemConfig, PRESETS};
use sdviab_cli::io::read_vertices;

#[derive(Parser)]
#[command(name = "sdviab", version, about = "Polytopic approximations of sampled-data viability kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Problem configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in problem (double_integrator, quadrotor, integrator_chain:<n>).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ProblemConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => config::load(path),
            (None, Some(name)) => config::preset(name),
            (None, None) => bail!("give --config FILE or --preset NAME ({PRESETS})"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the inner (and optionally outer) approximation and write result files.
    Approx {
        #[command(flatten)]
        source: Source,
        /// Number of sampled vertices.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for uniform sampling (0: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the config's `output`, else the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the 2D shadow of a vertex file as a polygon.
    Project {
        #[arg(long)]
        vertices: PathBuf,
        /// Coordinate pair, e.g. `0,3`.
        #[arg(long, value_parser = parse_dims)]
        dims: (usize, usize),
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a grid over K (2D only) with the exact-discretization oracle.
    Oracle {
        #[command(flatten)]
        source: Source,
        /// Cell side length.
        #[arg(long, default_value_t = 0.02)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected i,j")?;
    Ok((a.trim().parse().map_err(|_| "bad index")?, b.trim().parse().map_err(|_| "bad index")?))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Approx {
            source,
            samples,
            seed,
            workers,
            out,
        } => {
            let mut cfg = source.load()?;
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.options.workers = w;
            }
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            let result = run_approx(&cfg)?;
            write_approx(&result, &dir)?;
            eprintln!(
                "{} vertices, {} facets in {:.2} s -> {}",
                result.under.len(),
                result.over.as_ref().map_or(0, |o| o.len()),
                result.total.as_secs_f64(),
                dir.display()
            );
        }
        Command::Project { vertices, dims, out } => {
            let v = read_vertices(&vertices)?;
            let p = project(&v, dims)?;
            if p.degenerate {
                log::warn!("projection onto ({}, {}) is degenerate", dims.0, dims.1);
            }
            emit(&format_projection(&p), out.as_ref())?;
        }
        Command::Oracle { source, h, out } => {
            let cfg = source.load()?;
            let g = run_oracle(&cfg, h)?;
            emit(&format_bracket(&g), out.as_ref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
