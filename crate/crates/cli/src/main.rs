use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use loglab::run::diagnostic;
use loglab::{exit_code, run, Command, ExperimentConfig, Overrides};
use loglab_core::Error;

/// Numerical laboratory for the logarithmic obstacle problem.
#[derive(Parser)]
#[command(name = "loglab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Global tolerance scaling.
    #[arg(long, env = "LOGLAB_TOL", hide = true)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let overrides = Overrides {
        seed: cli.seed,
        tol_scale: cli.tol,
    };
    let loaded = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p),
        None => Ok(ExperimentConfig::default()),
    };
    let cfg = match loaded.and_then(|c| c.resolve(&overrides)) {
        Ok(c) => c,
        Err(err) => return fail(&cli, None, err),
    };
    match run(cli.command, &cfg).and_then(|a| a.write(&cli.out).map(|_| a)) {
        Ok(artifacts) => {
            for (name, _) in &artifacts.files {
                println!("{}", cli.out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => fail(&cli, Some(&cfg), err),
    }
}

fn fail(cli: &Cli, cfg: Option<&ExperimentConfig>, err: Error) -> ExitCode {
    eprintln!("error: {err}");
    let code = exit_code(&err);
    if code == 3 {
        let path = cli.out.join("diagnostic.json");
        let doc = diagnostic(cli.command, cfg, &err);
        if std::fs::create_dir_all(&cli.out).and_then(|_| std::fs::write(&path, doc)).is_ok() {
            eprintln!("diagnostics: {}", path.display());
        }
    }
    ExitCode::from(code as u8)
}
