use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stefan_limit_cli::{parse_config, run, THREADS_ENV};

/// Vanishing-viscosity experiments for a degenerate diffusion equation.
#[derive(Parser, Debug)]
#[command(name = "stefan-limit", version)]
struct Args {
    /// Config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
    /// Worker threads; 0 uses every core. Overrides `run.parallelism`.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("error: invalid config {}:", args.config.display());
            for e in &errors.0 {
                eprintln!("  {e}");
            }
            return ExitCode::from(2);
        }
    };
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let out_dir = args.out.clone().unwrap_or_else(|| {
        if cfg.out.is_absolute() {
            cfg.out.clone()
        } else {
            base_dir.join(&cfg.out)
        }
    });
    let threads = args.threads.unwrap_or(cfg.parallelism);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(&cfg, &base_dir, &out_dir)) {
        Ok(outcome) => {
            if !args.quiet {
                for line in &outcome.lines {
                    println!("{line}");
                }
                println!("wrote {}", outcome.out_dir.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                if args.quiet {
                    for line in outcome
                        .lines
                        .iter()
                        .filter(|l| l.contains("FAIL") || l.starts_with("failing"))
                    {
                        eprintln!("{line}");
                    }
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
