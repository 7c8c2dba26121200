//! Command-line driver: configuration loading, sweep orchestration and CSV output.

pub mod config;
pub mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use config::Config;
use sweep::Mode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_POINT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Coverage, ASE and optimal downtilt sweeps for 3D cellular networks.
#[derive(Parser, Debug)]
#[command(name = "downtilt", version, about)]
pub struct Cli {
    /// Sweep to run.
    #[arg(value_enum)]
    pub mode: Mode,

    /// TOML configuration; defaults are used for anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// CSV destination (standard output when omitted). The resolved
    /// configuration is written next to it as `<out>.meta.toml`.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Monte Carlo seed, overriding `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Monte Carlo trials per point, overriding `mc.trials`.
    #[arg(long)]
    pub mc_trials: Option<u64>,

    /// Skip the Monte Carlo columns.
    #[arg(long)]
    pub no_mc: bool,
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<Config, config::ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = cli.mc_trials {
        cfg.mc.trials = n;
    }
    if cli.no_mc {
        cfg.mc.enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn meta_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let res = sweep::run_sweep(&cfg, cli.mode, cfg.mc.enabled);
    let written = match &cli.out {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| sweep::write_csv(&res, std::io::BufWriter::new(f)).map_err(|e| e.to_string()))
            .and_then(|_| {
                let mode = cli.mode.to_possible_value().expect("modes are named");
                let meta = format!("mode = \"{}\"\n{}", mode.get_name(), cfg.to_toml());
                std::fs::write(meta_path(path), meta).map_err(|e| e.to_string())
            }),
        None => sweep::write_csv(&res, std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    for note in &res.notes {
        eprintln!("{note}");
    }
    eprintln!(
        "{:?}: {} points, {} failed, {:.1} s",
        cli.mode,
        res.rows.len(),
        res.failures,
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().flush();
    if let Err(e) = written {
        eprintln!("output error: {e}");
        return EXIT_IO;
    }
    if res.failures > 0 {
        EXIT_POINT_FAILURE
    } else {
        EXIT_OK
    }
}
